//! Binomial confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};

/// Two-sided normal quantile for the given confidence level.
pub fn z_value(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(domain(format!("confidence {confidence} outside (0, 1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if successes > trials {
        return Err(domain(format!("{successes} successes out of {trials} trials")));
    }
    if trials == 0 {
        return Ok((0.0, 1.0));
    }
    let z = z_value(confidence)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}
