//! Straight-line reference implementations used as test oracles. They
//! share no code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

/// Canary counters updated with plain branches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefCanary {
    pub reached: Vec<u64>,
    pub triggered: Vec<u64>,
    pub faulty: bool,
}

impl RefCanary {
    pub fn new(n: usize) -> Self {
        Self { reached: vec![0; n], triggered: vec![0; n], faulty: false }
    }

    pub fn log(&mut self, bug: usize, cond: bool) {
        if bug >= self.reached.len() {
            return;
        }
        if !self.faulty {
            self.reached[bug] += 1;
            if cond {
                self.triggered[bug] += 1;
            }
        }
        if cond {
            self.faulty = true;
        }
    }
}

/// S(t) by direct evaluation of the product over event times up to `t`.
pub fn product_limit(obs: &[(f64, bool)], t: f64) -> f64 {
    let mut times: Vec<f64> = obs.iter().filter(|o| o.1 && o.0 <= t).map(|o| o.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut s = 1.0;
    for ti in times {
        let n = obs.iter().filter(|o| o.0 >= ti).count() as f64;
        let d = obs.iter().filter(|o| o.1 && o.0 == ti).count() as f64;
        s *= 1.0 - d / n;
    }
    s
}

/// Two-sided exact rank-sum p-value for tie-free samples, by enumerating
/// every assignment of the pooled values to the first sample.
pub fn mwu_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let u_of = |mask: u32| {
        let mut u = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                for j in 0..n {
                    if mask >> j & 1 == 0 && pooled[i] > pooled[j] {
                        u += 1.0;
                    }
                }
            }
        }
        u
    };
    let observed_mask = (1u32 << a.len()) - 1;
    let u_obs = u_of(observed_mask);
    let (mut total, mut le, mut ge) = (0.0f64, 0.0f64, 0.0f64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let u = u_of(mask);
        total += 1.0;
        if u <= u_obs {
            le += 1.0;
        }
        if u >= u_obs {
            ge += 1.0;
        }
    }
    (u_obs, (2.0 * (le / total).min(ge / total)).min(1.0))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues descending and matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

pub struct BrutePca {
    pub eigenvalues: Vec<f64>,
    pub loadings: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
}

/// PCA of `values[category][subject]`: z-score every category, form the
/// category covariance and decompose it with [`jacobi_eigen`]. Loadings
/// are returned unnormalized in sign.
pub fn brute_pca(values: &[Vec<f64>], k: usize) -> BrutePca {
    let subjects = values[0].len();
    let z: Vec<Vec<f64>> = values
        .iter()
        .filter(|row| row.iter().any(|&x| x != row[0]))
        .map(|row| {
            let mean = row.iter().sum::<f64>() / subjects as f64;
            let sd = (row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (subjects - 1) as f64).sqrt();
            row.iter().map(|x| (x - mean) / sd).collect()
        })
        .collect();
    let n = z.len();
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n).map(|j| (0..subjects).map(|s| z[i][s] * z[j][s]).sum::<f64>() / (subjects - 1) as f64).collect()
        })
        .collect();
    let trace: f64 = (0..n).map(|i| cov[i][i]).sum();
    let (values, vectors) = jacobi_eigen(cov);
    let loadings: Vec<Vec<f64>> = vectors.into_iter().take(k).collect();
    let scores =
        (0..subjects).map(|s| loadings.iter().map(|l| (0..n).map(|i| z[i][s] * l[i]).sum()).collect()).collect();
    BrutePca {
        ratios: values.iter().take(k).map(|v| v / trace).collect(),
        eigenvalues: values.into_iter().take(k).collect(),
        loadings,
        scores,
    }
}
