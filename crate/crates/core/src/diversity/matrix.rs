use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DiversityError;

/// Operation-category counts from one run of one subject on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub subject: String,
    pub seed: String,
    /// Benchmark family the subject belongs to, used only for labeling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub counts: BTreeMap<String, f64>,
}

/// Mean category counts: `values[i][j]` is category `i` for subject `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    pub subjects: Vec<String>,
    pub families: Vec<Option<String>>,
    pub categories: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn get(&self, category: &str, subject: &str) -> Option<f64> {
        let i = self.categories.iter().position(|c| c == category)?;
        let j = self.subjects.iter().position(|s| s == subject)?;
        Some(self.values[i][j])
    }
}

/// Builds the matrix over the subjects in order of first appearance and
/// the union of category labels in sorted order.
pub fn build_matrix(profiles: &[Profile]) -> Result<FeatureMatrix, DiversityError> {
    let mut subjects: Vec<String> = Vec::new();
    for p in profiles {
        if !subjects.contains(&p.subject) {
            subjects.push(p.subject.clone());
        }
    }
    let categories: Vec<String> =
        profiles.iter().flat_map(|p| p.counts.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    build_matrix_for(&subjects, &categories, profiles)
}

/// Builds the matrix for declared subjects and categories. A category
/// missing from a profile counts as zero.
pub fn build_matrix_for(
    subjects: &[String],
    categories: &[String],
    profiles: &[Profile],
) -> Result<FeatureMatrix, DiversityError> {
    if subjects.is_empty() {
        return Err(DiversityError::NoSubjects);
    }
    for (i, s) in subjects.iter().enumerate() {
        if subjects[..i].contains(s) {
            return Err(DiversityError::DuplicateLabel(s.clone()));
        }
    }
    for (i, c) in categories.iter().enumerate() {
        if categories[..i].contains(c) {
            return Err(DiversityError::DuplicateLabel(c.clone()));
        }
    }
    let mut sums = vec![vec![0.0; subjects.len()]; categories.len()];
    let mut seeds = vec![0usize; subjects.len()];
    let mut families: Vec<Option<String>> = vec![None; subjects.len()];
    for p in profiles {
        let j = subjects
            .iter()
            .position(|s| *s == p.subject)
            .ok_or_else(|| DiversityError::UnknownSubject(p.subject.clone()))?;
        seeds[j] += 1;
        if families[j].is_none() {
            families[j].clone_from(&p.family);
        }
        for (label, &count) in &p.counts {
            let i = categories
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| DiversityError::UnknownCategory(label.clone()))?;
            if !(count.is_finite() && count >= 0.0) {
                return Err(DiversityError::InvalidCount { subject: p.subject.clone(), category: label.clone() });
            }
            sums[i][j] += count;
        }
    }
    if let Some(j) = seeds.iter().position(|&n| n == 0) {
        return Err(DiversityError::NoSeeds(subjects[j].clone()));
    }
    let values =
        sums.into_iter().map(|row| row.into_iter().zip(&seeds).map(|(s, &n)| s / n as f64).collect()).collect();
    Ok(FeatureMatrix { subjects: subjects.to_vec(), families, categories: categories.to_vec(), values })
}

/// Reads every `*.json` profile in `dir`, in file-name order.
pub fn load_profiles(dir: &Path) -> Result<Vec<Profile>, DiversityError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| DiversityError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(io(p))?;
            serde_json::from_slice(&bytes).map_err(|source| DiversityError::Json { path: p.clone(), source })
        })
        .collect()
}
