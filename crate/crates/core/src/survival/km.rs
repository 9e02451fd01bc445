use serde::Serialize;

use super::SurvivalError;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Kaplan-Meier product-limit estimate. Step `i` holds the values just
/// after the `i`-th distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub survival: Vec<f64>,
    /// Greenwood variance of the survival estimate.
    pub variance: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SurvivalCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// S(t); 1 before the first event.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }

    /// Confidence band at `t`; `(1, 1)` before the first event.
    pub fn band_at(&self, t: f64) -> (f64, f64) {
        match self.times.partition_point(|&x| x <= t) {
            0 => (1.0, 1.0),
            i => (self.lower[i - 1], self.upper[i - 1]),
        }
    }
}

/// Estimates a survival curve from `(time, observed)` pairs; unobserved
/// entries are right-censored at their time and stay at risk through it.
pub fn km_estimate(observations: &[(f64, bool)]) -> Result<SurvivalCurve, SurvivalError> {
    if observations.is_empty() {
        return Err(SurvivalError::Empty);
    }
    if let Some(&(t, _)) = observations.iter().find(|(t, _)| !(t.is_finite() && *t >= 0.0)) {
        return Err(SurvivalError::InvalidTime(t));
    }
    let mut sorted = observations.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut curve = SurvivalCurve {
        times: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        survival: Vec::new(),
        variance: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
    };
    let mut s = 1.0;
    let mut greenwood = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let n = sorted.len() - i;
        let mut d = 0;
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == t {
            d += usize::from(sorted[j].1);
            j += 1;
        }
        i = j;
        if d == 0 {
            continue;
        }
        s *= 1.0 - d as f64 / n as f64;
        let (lo, hi) = if d < n {
            greenwood += d as f64 / (n as f64 * (n - d) as f64);
            let spread = Z_95 * greenwood.sqrt();
            ((s * (-spread).exp()).clamp(0.0, 1.0), (s * spread.exp()).clamp(0.0, 1.0))
        } else {
            (0.0, 0.0)
        };
        curve.times.push(t);
        curve.at_risk.push(n);
        curve.events.push(d);
        curve.survival.push(s);
        curve.variance.push(if s > 0.0 { s * s * greenwood } else { 0.0 });
        curve.lower.push(lo);
        curve.upper.push(hi);
    }
    Ok(curve)
}
