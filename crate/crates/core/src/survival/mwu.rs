use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::SurvivalError;

/// Largest combined sample size for which the exact distribution is used.
pub const EXACT_MAX_N: usize = 14;

/// Significance threshold for classifying a p-value.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// U statistic of the first sample: pairs where it is larger, ties
    /// counting one half.
    pub u: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: RankMethod,
    pub tie_corrected: bool,
    /// The two samples are equal as multisets.
    pub identical: bool,
}

impl RankTestResult {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Two-sided Mann-Whitney U test.
pub fn mwu_test(a: &[f64], b: &[f64]) -> Result<RankTestResult, SurvivalError> {
    if a.is_empty() || b.is_empty() {
        return Err(SurvivalError::Empty);
    }
    if let Some(&x) = a.iter().chain(b).find(|x| x.is_nan()) {
        return Err(SurvivalError::InvalidTime(x));
    }
    let u = u_statistic(a, b);
    let (n1, n2) = (a.len(), b.len());

    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let ties = tie_groups(&pooled);
    let has_ties = ties.iter().any(|&t| t > 1);

    let identical = n1 == n2 && {
        let (mut sa, mut sb) = (a.to_vec(), b.to_vec());
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        sa == sb
    };

    let (method, p) = if !has_ties && n1 + n2 <= EXACT_MAX_N {
        (RankMethod::Exact, exact_p_value(u as u64, n1, n2))
    } else {
        (RankMethod::NormalApprox, normal_p_value(u, n1, n2, &ties))
    };
    Ok(RankTestResult {
        u,
        p_value: if identical { 1.0 } else { p },
        method,
        tie_corrected: method == RankMethod::NormalApprox && has_ties,
        identical,
    })
}

pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Sizes of runs of equal values in sorted data.
fn tie_groups(sorted: &[f64]) -> Vec<usize> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = i + sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Number of arrangements giving each U value, for samples of size `n1`
/// and `n2` without ties. Index is U.
pub fn u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    // table[m][n] = counts for sizes (m, n), built up over n1 rows.
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<f64>> = (0..=n2).map(|_| vec![1.0]).collect();
    for m in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n2 + 1);
        cur.push(vec![1.0]);
        for n in 1..=n2 {
            // The largest value belongs to the first sample (adding n to U)
            // or to the second.
            let mut counts = vec![0.0; m * n + 1];
            for (u, &c) in prev[n].iter().enumerate() {
                counts[u + n] += c;
            }
            for (u, &c) in cur[n - 1].iter().enumerate() {
                counts[u] += c;
            }
            cur.push(counts);
        }
        prev = cur;
    }
    let mut dist = prev.swap_remove(n2);
    dist.resize(max_u + 1, 0.0);
    dist
}

/// Exact two-sided p-value: twice the smaller tail, capped at 1.
pub fn exact_p_value(u: u64, n1: usize, n2: usize) -> f64 {
    let dist = u_distribution(n1, n2);
    let total: f64 = dist.iter().sum();
    let u = u as usize;
    let lower: f64 = dist[..=u.min(dist.len() - 1)].iter().sum::<f64>() / total;
    let upper: f64 = dist[u.min(dist.len())..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal-approximation p-value with tie and continuity corrections.
/// `ties` lists the sizes of groups of equal values in the pooled sample.
pub fn normal_p_value(u: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let variance = n1f * n2f / 12.0 * ((n + 1.0) - tie_term);
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u - n1f * n2f / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    let p = 2.0 * Normal::standard().cdf(-z);
    p.clamp(f64::MIN_POSITIVE, 1.0)
}
