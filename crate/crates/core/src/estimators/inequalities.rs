//! Empirical checks of the correlation inequalities for increasing events.
//!
//! Each check compares a left side with a right side and passes when
//! `lhs ≥ rhs − 3σ − bias`, where σ combines the standard errors of both
//! sides and bias is the summed additive bias of the estimates involved.

use serde::{Deserialize, Serialize};

use super::{sample_events, McConfig, Outcome, Runner};
use crate::error::{Error, Result};
use crate::events::{EventSpec, Phase};
use crate::models::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub sigma: f64,
    pub bias: f64,
    pub passed: bool,
}

impl InequalityCheck {
    fn new(name: &str, lhs: f64, rhs: f64, sigma: f64, bias: f64) -> Self {
        InequalityCheck { name: name.into(), lhs, rhs, sigma, bias, passed: lhs >= rhs - 3.0 * sigma - bias }
    }
}

/// Covariance of two overlapping occupied crossings, `[0, 2r] × [0, r]`
/// and its translate by `(r, 0)`, against 0.
pub fn fkg_check(model: &ModelSpec, r: f64, cfg: &McConfig, runner: &Runner) -> Result<InequalityCheck> {
    let a = EventSpec::cross(2.0 * r, r, Phase::Occupied);
    let s = sample_events(model, &[a, a.translated(r, 0.0)], cfg, runner)?;
    let nf = s.n() as f64;
    let x: Vec<f64> = s.values(0).into_iter().map(|b| f64::from(u8::from(b))).collect();
    let y: Vec<f64> = s.values(1).into_iter().map(|b| f64::from(u8::from(b))).collect();
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let prods: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / nf;
    let var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    let bias = s.estimate(0)?.bias + s.estimate(1)?.bias;
    Ok(InequalityCheck::new("fkg", cov, 0.0, (var / nf).sqrt(), bias))
}

/// With `A_i` the crossings of `[0, 3r] × [ir, (i+1)r]`, `i < k`:
/// `max_i P(A_i) ≥ 1 − (1 − P(∪ A_i))^{1/k}`.
pub fn sqrt_trick_check(model: &ModelSpec, r: f64, k: usize, cfg: &McConfig, runner: &Runner) -> Result<InequalityCheck> {
    if k < 2 {
        return Err(Error::invalid("the square-root trick needs k ≥ 2 events"));
    }
    let specs: Vec<EventSpec> = (0..k).map(|i| EventSpec::cross(3.0 * r, r, Phase::Occupied).translated(0.0, i as f64 * r)).collect();
    let s = sample_events(model, &specs, cfg, runner)?;
    let ests = (0..k).map(|i| s.estimate(i)).collect::<Result<Vec<_>>>()?;
    let best = ests.iter().max_by(|a, b| a.p_hat.total_cmp(&b.p_hat)).expect("k ≥ 2");
    let union = super::Estimate::from_tally(
        &s.tally_by(|row| Outcome::new(row.iter().any(|o| o.value()), row.iter().any(|o| o.unresolved()))),
        s.seeds,
    )?;
    let kf = k as f64;
    let miss = 1.0 - union.p_hat;
    let rhs = 1.0 - miss.powf(1.0 / kf);
    // Delta method; at p∪ = 1 the derivative blows up, so fall back to the
    // value at one failure.
    let slope = (1.0 / kf) * miss.max(1.0 / union.n as f64).powf(1.0 / kf - 1.0);
    let sigma = (best.sigma().powi(2) + (slope * union.sigma()).powi(2)).sqrt();
    Ok(InequalityCheck::new("square-root trick", best.p_hat, rhs, sigma, best.bias + slope * union.bias))
}

/// `P[cir(r, 2r)] ≥ P[cross(4r, r)]⁴`, occupied, on shared realizations.
pub fn standard_inequality_check(model: &ModelSpec, r: f64, cfg: &McConfig, runner: &Runner) -> Result<InequalityCheck> {
    let cir = EventSpec::circuit(r, 2.0 * r, Phase::Occupied);
    let cross = EventSpec::cross(4.0 * r, r, Phase::Occupied).translated(-2.0 * r, -0.5 * r);
    let s = sample_events(model, &[cir, cross], cfg, runner)?;
    let c = s.estimate(0)?;
    let x = s.estimate(1)?;
    let d = 4.0 * x.p_hat.powi(3);
    let sigma = (c.sigma().powi(2) + (d * x.sigma()).powi(2)).sqrt();
    Ok(InequalityCheck::new("circuit vs crossing", c.p_hat, x.p_hat.powi(4), sigma, c.bias + d * x.bias))
}
