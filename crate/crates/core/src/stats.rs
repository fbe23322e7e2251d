//! Limit-law distribution functions and goodness-of-fit statistics.

use std::f64::consts::PI;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("argument {0} outside the domain")]
    Domain(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("samples are not sorted ascending")]
    Unsorted,
    #[error("no row has enough observations")]
    NoEligibleRows,
}

/// `P(A ≤ u) = (2/π) asin(√u)`.
pub fn arcsine_cdf(u: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(StatsError::Domain(u));
    }
    Ok(2.0 / PI * u.sqrt().asin())
}

/// `P(μ(E)/√π |N| ≤ x) = erf(x √(π/2) / μ(E))`.
pub fn scaled_halfnormal_cdf(x: f64, mu_e: f64) -> Result<f64, StatsError> {
    if !mu_e.is_finite() || mu_e <= 0.0 {
        return Err(StatsError::Domain(mu_e));
    }
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(x));
    }
    Ok(libm::erf(x * (PI / 2.0).sqrt() / mu_e))
}

/// `P(c |N| ≤ x) = erf(x / (c √2))`.
pub fn halfnormal_cdf(x: f64, c: f64) -> Result<f64, StatsError> {
    if !c.is_finite() || c <= 0.0 {
        return Err(StatsError::Domain(c));
    }
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(x));
    }
    Ok(libm::erf(x / (c * std::f64::consts::SQRT_2)))
}

/// Limiting distribution of a normalized occupation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitLaw {
    Arcsine,
    /// `μ(E)/√π |N|`
    ScaledHalfNormal { mu_e: f64 },
    /// `c |N|`
    HalfNormal { scale: f64 },
}

impl LimitLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LimitLaw::Arcsine => arcsine_cdf(x.clamp(0.0, 1.0)).expect("clamped"),
            LimitLaw::ScaledHalfNormal { mu_e } => scaled_halfnormal_cdf(x.max(0.0), mu_e).unwrap_or(f64::NAN),
            LimitLaw::HalfNormal { scale } => halfnormal_cdf(x.max(0.0), scale).unwrap_or(f64::NAN),
        }
    }

    pub fn name(&self) -> String {
        match self {
            LimitLaw::Arcsine => "arcsine".into(),
            LimitLaw::ScaledHalfNormal { mu_e } => format!("scaled-halfnormal(muE={mu_e})"),
            LimitLaw::HalfNormal { scale } => format!("halfnormal(scale={scale})"),
        }
    }
}

/// `sup_x |F_n(x) - F(x)|` over the jump points of `F_n`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(StatsError::Unsorted);
    }
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max(j as f64 / n - f).max(f - i as f64 / n);
        i = j;
    }
    Ok(d)
}

/// Pearson statistic over rows with total ≥ 50 and cells with expected
/// count ≥ 5; degrees of freedom = included cells − included rows.
pub fn chi_square_transition_stat(counts: &[Vec<u64>], expected_probs: &[Vec<f64>]) -> Result<(f64, usize), StatsError> {
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut rows = 0usize;
    for (row, probs) in counts.iter().zip(expected_probs) {
        let total: u64 = row.iter().sum();
        if total < 50 {
            continue;
        }
        let mut used = 0usize;
        for (&c, &p) in row.iter().zip(probs) {
            let e = p * total as f64;
            if e >= 5.0 {
                stat += (c as f64 - e).powi(2) / e;
                used += 1;
            }
        }
        if used > 0 {
            cells += used;
            rows += 1;
        }
    }
    if rows == 0 {
        return Err(StatsError::NoEligibleRows);
    }
    Ok((stat, cells - rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcsine_examples() {
        assert_eq!(arcsine_cdf(0.0).unwrap(), 0.0);
        assert!((arcsine_cdf(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((arcsine_cdf(0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(arcsine_cdf(1.5).is_err());
    }

    #[test]
    fn halfnormal_examples() {
        assert_eq!(scaled_halfnormal_cdf(0.0, 0.3).unwrap(), 0.0);
        let v = scaled_halfnormal_cdf(1.0, (PI / 2.0).sqrt()).unwrap();
        assert!((v - 0.842_700_792_9).abs() < 1e-10);
        assert!(scaled_halfnormal_cdf(-1.0, 1.0).is_err());
        assert!(scaled_halfnormal_cdf(1.0, 0.0).is_err());
        assert!((scaled_halfnormal_cdf(50.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ks_examples() {
        assert!((ks_distance(&[0.5], |x| x).unwrap() - 0.5).abs() < 1e-15);
        assert!(ks_distance(&[], |x| x).is_err());
        assert!(ks_distance(&[0.2, 0.1], |x| x).is_err());
        let n = 99;
        let q: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        assert!(ks_distance(&q, |x| x).unwrap() <= 1.0 / 100.0 + 1.0 / (n + 1) as f64);
    }

    #[test]
    fn chi_square_examples() {
        let (s, dof) = chi_square_transition_stat(&[vec![60, 40]], &[vec![0.5, 0.5]]).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
        assert_eq!(dof, 1);
        let (s, dof) = chi_square_transition_stat(&[vec![50, 30, 20]], &[vec![0.5, 0.3, 0.2]]).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(dof, 2);
        assert!(chi_square_transition_stat(&[vec![10, 10]], &[vec![0.5, 0.5]]).is_err());
    }
}
