//! Binomial statistics for win-rate estimates.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Wilson score interval for `wins` successes out of `n`.
pub fn wilson_interval(wins: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || wins > n {
        return Err(Error::Domain(format!("need 0 <= wins <= n and n >= 1, got wins={wins}, n={n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must lie in (0,1), got {confidence}")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let (k, n) = (wins as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if wins == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if wins as f64 == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// One-sided exact tail `P(W >= wins)` for `W ~ Binomial(n, p0)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TailProbability {
    pub p_value: f64,
    /// Base-10 logarithm, finite even when `p_value` underflows to zero.
    pub log10_p_value: f64,
}

pub fn binomial_test_geq(wins: u64, n: u64, p0: f64) -> Result<TailProbability> {
    if wins > n {
        return Err(Error::Domain(format!("wins {wins} exceeds trials {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Domain(format!("p0 must lie in (0,1), got {p0}")));
    }
    if wins == 0 {
        return Ok(TailProbability { p_value: 1.0, log10_p_value: 0.0 });
    }
    let (ln_p, ln_q) = (p0.ln(), (1.0 - p0).ln());
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let log_pmf = |k: u64| {
        ln_n_fact - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0) + k as f64 * ln_p + (n - k) as f64 * ln_q
    };
    let terms: Vec<f64> = (wins..=n).map(log_pmf).collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_tail = (peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln()).min(0.0);
    Ok(TailProbability { p_value: ln_tail.exp(), log10_p_value: ln_tail / std::f64::consts::LN_10 })
}
