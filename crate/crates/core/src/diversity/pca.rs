use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::matrix::FeatureMatrix;
use super::DiversityError;

/// Principal components of the subjects in a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaResult {
    pub subjects: Vec<String>,
    pub families: Vec<Option<String>>,
    /// Categories kept after dropping zero-variance ones.
    pub categories: Vec<String>,
    pub dropped: Vec<String>,
    /// Eigenvalues of the retained components, descending.
    pub eigenvalues: Vec<f64>,
    /// `loadings[c]` is component `c` over `categories`; unit length, with
    /// its largest-magnitude entry positive.
    pub loadings: Vec<Vec<f64>>,
    /// `scores[j][c]` is subject `j` on component `c`.
    pub scores: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Z-scored data, `normalized[j][i]` for subject `j` and category `i`.
    pub normalized: Vec<Vec<f64>>,
    pub rank: usize,
}

/// Z-scores each category across subjects (sample standard deviation) and
/// returns the kept category indices and the dropped ones.
pub fn normalize(m: &FeatureMatrix) -> (Vec<usize>, Vec<usize>, DMatrix<f64>) {
    let k = m.subjects.len();
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..m.categories.len()).partition(|&i| m.values[i].iter().any(|&v| v != m.values[i][0]));
    let mut z = DMatrix::zeros(k, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let row = &m.values[i];
        let mean = row.iter().sum::<f64>() / k as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0);
        let sd = var.sqrt();
        for (j, v) in row.iter().enumerate() {
            z[(j, col)] = (v - mean) / sd;
        }
    }
    (kept, dropped, z)
}

/// Top-`k` principal components of the z-scored category covariance.
pub fn pca(m: &FeatureMatrix, k: usize) -> Result<PcaResult, DiversityError> {
    let subjects = m.subjects.len();
    if subjects < 2 {
        return Err(DiversityError::TooFewSubjects(subjects));
    }
    if k == 0 {
        return Err(DiversityError::InvalidComponents { requested: k, rank: 0 });
    }
    let (kept, dropped, z) = normalize(m);
    for &i in &dropped {
        log::warn!("dropping zero-variance category {}", m.categories[i]);
    }
    if kept.is_empty() {
        return Err(DiversityError::Degenerate);
    }
    let cov = z.transpose() * &z / (subjects as f64 - 1.0);
    let eigen = SymmetricEigen::new(cov.clone());
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));

    let total: f64 = cov.trace();
    let top = eigen.eigenvalues[order[0]].max(0.0);
    let tol = top * (kept.len().max(subjects) as f64) * f64::EPSILON * 16.0;
    let rank = order.iter().filter(|&&i| eigen.eigenvalues[i] > tol).count();
    if k > rank {
        return Err(DiversityError::InvalidComponents { requested: k, rank });
    }

    let mut eigenvalues = Vec::with_capacity(k);
    let mut loadings = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut v: Vec<f64> = eigen.eigenvectors.column(c).iter().copied().collect();
        let pivot = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(eigen.eigenvalues[c]);
        loadings.push(v);
    }
    let basis = DMatrix::from_fn(kept.len(), k, |i, c| loadings[c][i]);
    let projected = &z * basis;
    let scores = (0..subjects).map(|j| projected.row(j).iter().copied().collect()).collect();
    let normalized = (0..subjects).map(|j| z.row(j).iter().copied().collect()).collect();

    Ok(PcaResult {
        subjects: m.subjects.clone(),
        families: m.families.clone(),
        categories: kept.iter().map(|&i| m.categories[i].clone()).collect(),
        dropped: dropped.iter().map(|&i| m.categories[i].clone()).collect(),
        explained_variance_ratio: eigenvalues.iter().map(|l| l / total).collect(),
        eigenvalues,
        loadings,
        scores,
        normalized,
        rank,
    })
}
