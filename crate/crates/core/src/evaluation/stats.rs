//! Paired (one-sample on differences) Student's t-test.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("t-test needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult<T> {
    pub n: usize,
    pub mean_delta: T,
    pub t_statistic: T,
    /// Two-tailed.
    pub p_value: T,
    pub alpha: T,
    /// `p_value <= alpha`.
    pub significant: bool,
    /// Zero sample variance: the t statistic is not a ratio of finite values.
    pub degenerate: bool,
}

/// Two-tailed one-sample t-test of `deltas` against a zero mean.
///
/// `t = mean / (sd / sqrt(n))` with the `n - 1` sample standard deviation and
/// `n - 1` degrees of freedom. Zero variance is handled explicitly: a zero
/// mean gives `t = 0, p = 1`; a nonzero mean gives `p = 0`, `t = ±inf`, and
/// the result is flagged degenerate.
pub fn paired_t_test<T: Float>(deltas: &[T], alpha: T) -> Result<TTestResult<T>, StatsError> {
    let alpha_f = alpha.to_f64().unwrap_or(f64::NAN);
    if !(alpha_f > 0.0 && alpha_f < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha_f));
    }
    let n = deltas.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    if let Some(i) = deltas.iter().position(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let nt = T::from(n).expect("sample count representable");
    let mean = deltas.iter().fold(T::zero(), |acc, &d| acc + d) / nt;
    let ss = deltas.iter().fold(T::zero(), |acc, &d| acc + (d - mean) * (d - mean));
    let var = ss / (nt - T::one());
    // Rounding leaves a residue of order eps * max|d| on constant samples.
    let scale = deltas.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let noise = nt * T::epsilon() * scale;

    let (t, p, degenerate) = if ss <= noise * noise {
        if mean.abs() <= noise {
            (T::zero(), T::one(), true)
        } else {
            (mean.signum() * T::infinity(), T::zero(), true)
        }
    } else {
        let t = mean / (var.sqrt() / nt.sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
        let t_abs = t.abs().to_f64().expect("finite t");
        let p = (2.0 * dist.sf(t_abs)).clamp(0.0, 1.0);
        (t, T::from(p).expect("p representable"), false)
    };
    Ok(TTestResult {
        n,
        mean_delta: mean,
        t_statistic: t,
        p_value: p,
        alpha,
        significant: p <= alpha,
        degenerate,
    })
}

/// Paired test on `(baseline, treated)` score vectors: tests `treated - baseline`.
pub fn paired_t_test_scores<T: Float>(baseline: &[T], treated: &[T], alpha: T) -> Result<TTestResult<T>, StatsError> {
    if baseline.len() != treated.len() {
        return Err(StatsError::LengthMismatch(baseline.len(), treated.len()));
    }
    let deltas: Vec<T> = treated.iter().zip(baseline).map(|(&t, &b)| t - b).collect();
    paired_t_test(&deltas, alpha)
}
