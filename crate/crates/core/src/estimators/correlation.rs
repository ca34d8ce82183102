//! Correlation between events in separated regions.

use serde::{Deserialize, Serialize};

use super::{sample_events, McConfig, Runner};
use crate::error::{Error, Result};
use crate::events::EventSpec;
use crate::geometry::{SupBox, GEOM_EPS};
use crate::models::ModelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// Sample covariance of the two indicators.
    pub rho_hat: f64,
    /// Standard error of `rho_hat`.
    pub sigma: f64,
    /// `8λ(1 + r/s)² ∫_{s/2}^∞ x² μ(dx)` for the Boolean model, `None`
    /// for the colour-field models.
    pub bound: Option<f64>,
    pub n: u64,
}

/// Covariance of `f1`, measurable inside `B∞(r)`, and `f2`, measurable
/// outside `B∞(r + s)`, on shared realizations.
pub fn estimate_correlation(
    model: &ModelSpec,
    r: f64,
    s: f64,
    f1: &EventSpec,
    f2: &EventSpec,
    cfg: &McConfig,
    runner: &Runner,
) -> Result<Correlation> {
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::invalid(format!("need r, s > 0, got {r}, {s}")));
    }
    let inner = SupBox { half_width: r }.rect();
    if !inner.inflate(GEOM_EPS).contains_rect(&f1.region()) {
        return Err(Error::Separation(format!("first event leaves B∞({r})")));
    }
    let k2 = f2.region();
    let outer = r + s - GEOM_EPS;
    if !(k2.x0 >= outer || k2.x1 <= -outer || k2.y0 >= outer || k2.y1 <= -outer) {
        return Err(Error::Separation(format!("second event enters B∞({})", r + s)));
    }
    let samples = sample_events(model, &[*f1, *f2], cfg, runner)?;
    let n = samples.n();
    let x: Vec<f64> = samples.values(0).iter().map(|&b| f64::from(u8::from(b))).collect();
    let y: Vec<f64> = samples.values(1).iter().map(|&b| f64::from(u8::from(b))).collect();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let prods: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let rho_hat = prods.iter().sum::<f64>() / nf;
    let var = if n > 1 { prods.iter().map(|p| (p - rho_hat).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    let bound = match model {
        ModelSpec::Boolean(b) => {
            let t = b.law.tail_m2(0.5 * s)?;
            Some(8.0 * b.lambda * (1.0 + r / s).powi(2) * t)
        }
        _ => None,
    };
    Ok(Correlation { rho_hat, sigma: (var / nf).sqrt(), bound, n })
}
