//! Power-law fits of arm probabilities.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{estimate, Estimate, McConfig, Runner};
use crate::error::{Error, Result};
use crate::events::EventSpec;
use crate::models::ModelSpec;

/// Least-squares line through `(log r, log p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% Student-t interval for the slope.
    pub slope_ci: (f64, f64),
    pub r_squared: f64,
}

/// Fits `log p = a + b log r`. Needs at least four radii, consecutive ones
/// a factor 2 apart or more, spanning a factor 8 or more.
pub fn fit_log_log(pairs: &[(f64, f64)]) -> Result<DecayFit> {
    if pairs.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 radii, got {}", pairs.len())));
    }
    if pairs.windows(2).any(|w| w[1].0 < 2.0 * w[0].0 * (1.0 - 1e-12)) || !(pairs[0].0 > 0.0) {
        return Err(Error::invalid("radii must be positive and at least a factor 2 apart"));
    }
    if pairs[pairs.len() - 1].0 < 8.0 * pairs[0].0 * (1.0 - 1e-12) {
        return Err(Error::invalid("radii must span at least a factor 8"));
    }
    if let Some(&(r, _)) = pairs.iter().find(|(_, p)| !(*p > 0.0)) {
        return Err(Error::ZeroEstimate(r));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let se = (ss_res / (k - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, k - 2.0).expect("positive degrees of freedom").inverse_cdf(0.975);
    Ok(DecayFit { pairs: pairs.to_vec(), slope, intercept, slope_ci: (slope - t * se, slope + t * se), r_squared })
}

/// Estimates along a family of events and the fit through them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmDecay {
    pub fit: DecayFit,
    pub estimates: Vec<(f64, Estimate)>,
}

/// Estimates `spec_for(r)` at every radius (radius `k` on stream tag
/// `cfg.tag + k`) and fits the log-log slope.
pub fn fit_arm_decay(
    model: &ModelSpec,
    spec_for: impl Fn(f64) -> EventSpec,
    radii: &[f64],
    cfg: &McConfig,
    runner: &Runner,
) -> Result<ArmDecay> {
    if radii.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 radii, got {}", radii.len())));
    }
    let estimates = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| Ok((r, estimate(model, &spec_for(r), &cfg.with_tag(cfg.tag.wrapping_add(k as u64)), runner)?)))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = estimates.iter().map(|(r, e)| (*r, e.p_hat)).collect();
    Ok(ArmDecay { fit: fit_log_log(&pairs)?, estimates })
}
