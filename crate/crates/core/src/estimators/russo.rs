//! Margulis–Russo check on the two-stage thinning construction.
//!
//! A base Poisson process of intensity `Λ` carries uniform marks `u`; point
//! `i` is kept at level `p` when `u_i ≤ p/m`, giving a Boolean model of
//! intensity `pΛ/m`. Each retention probability has derivative `1/m` in
//! `p`, so `d/dp P[A] = ±(1/m) E[#pivotal points]`, with the minus sign for
//! decreasing (vacant) events. Both sides are estimated
//! on the same marks: a central finite difference of the indicator and the
//! exact pivotal count.

use serde::{Deserialize, Serialize};

use super::{McConfig, Runner};
use crate::error::{Error, Result};
use crate::events::{EventSpec, Phase};
use crate::geometry::{disc_rect_intersects, Disc};
use crate::models::BooleanModel;
use crate::pointprocess::RngStream;

/// One base configuration: discs always present, then `(disc, u)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct RussoSample {
    pub forced: Vec<Disc>,
    pub points: Vec<(Disc, f64)>,
    /// Truncation bound of the densest configuration used.
    pub bias: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RussoCheck {
    /// `(E[X_{p+Δp}] − E[X_{p−Δp}]) / 2Δp` and its standard error.
    pub fd_derivative: (f64, f64),
    /// `(1/m) E[#pivotal]` and its standard error.
    pub pivotal_sum: (f64, f64),
    pub m: u32,
    pub p: f64,
    pub dp: f64,
    pub n: u64,
    pub bias: f64,
}

impl RussoCheck {
    pub fn combined_sigma(&self) -> f64 {
        self.fd_derivative.1.hypot(self.pivotal_sum.1)
    }

    pub fn difference(&self) -> f64 {
        self.fd_derivative.0 - self.pivotal_sum.0
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, (var / n).sqrt())
}

/// Runs the check on base configurations produced by `base`, which receives
/// the replicate stream.
pub fn russo_check_with(
    spec: &EventSpec,
    m: u32,
    p: f64,
    dp: f64,
    cfg: &McConfig,
    runner: &Runner,
    base: impl Fn(&mut RngStream) -> Result<RussoSample> + Sync + Send,
) -> Result<RussoCheck> {
    if m < 2 {
        return Err(Error::invalid(format!("m must be at least 2, got {m}")));
    }
    if !(dp > 0.0 && p - dp > 0.0 && p + dp < 1.0) {
        return Err(Error::invalid(format!("p ± Δp must lie in (0, 1), got {p} ± {dp}")));
    }
    spec.validate()?;
    cfg.validate()?;
    let k = spec.region();
    let mf = f64::from(m);
    let eval = |discs: &[Disc]| spec.exact(discs);
    // Occupied events increase with the disc set, vacant ones decrease.
    let increasing = spec.phase() == Phase::Occupied;
    let seeds = cfg.seeds();
    let rows = runner.map(seeds.start..seeds.end, |i| {
        let s = base(&mut seeds.stream(i))?;
        let at = |level: f64| -> Vec<Disc> {
            let t = level / mf;
            s.forced.iter().copied().chain(s.points.iter().filter(|q| q.1 <= t).map(|q| q.0)).collect()
        };
        let diff = f64::from(u8::from(eval(&at(p + dp)))) - f64::from(u8::from(eval(&at(p - dp))));
        let t = p / mf;
        let kept = at(p);
        let x0 = eval(&kept);
        let mut pivotal = 0u32;
        let candidates = s.points.iter().filter(|q| disc_rect_intersects(&q.0, &k));
        // A present increasing (or absent decreasing) event can only be
        // flipped by removing a kept point, otherwise only by adding one.
        if x0 == increasing {
            for q in candidates.filter(|q| q.1 <= t) {
                let without: Vec<Disc> = kept.iter().copied().filter(|d| d != &q.0).collect();
                pivotal += u32::from(eval(&without) != x0);
            }
        } else {
            for q in candidates.filter(|q| q.1 > t) {
                let mut with = kept.clone();
                with.push(q.0);
                pivotal += u32::from(eval(&with) != x0);
            }
        }
        let pivotal = if increasing { f64::from(pivotal) } else { -f64::from(pivotal) };
        Ok((diff, pivotal, s.bias))
    })?;
    let diffs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pivs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let bias = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let (fd, fd_se) = mean_sd(&diffs);
    let (pv, pv_se) = mean_sd(&pivs);
    Ok(RussoCheck {
        fd_derivative: (fd / (2.0 * dp), fd_se / (2.0 * dp)),
        pivotal_sum: (pv / mf, pv_se / mf),
        m,
        p,
        dp,
        n: seeds.len(),
        bias,
    })
}

/// Check for the Boolean model at intensity `model.lambda`, reached at level
/// `p` from the base intensity `Λ = m λ / p`.
pub fn russo_check(model: &BooleanModel, spec: &EventSpec, m: u32, p: f64, dp: f64, cfg: &McConfig, runner: &Runner) -> Result<RussoCheck> {
    model.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    let base = BooleanModel { lambda: f64::from(m) * model.lambda / p, ..model.clone() };
    let window = spec.region();
    let top = (p + dp) / f64::from(m);
    russo_check_with(spec, m, p, dp, cfg, runner, |stream| {
        let md = base.realize_marked(&window, cfg.eps, stream)?;
        Ok(RussoSample {
            forced: md.forced,
            points: md.points.iter().map(|q| (Disc::raw(q.pos.x, q.pos.y, q.z), q.u)).collect(),
            bias: md.budget.bias_bound * top,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RadiusLaw;
    use crate::events::Phase;
    use crate::geometry::Point;

    #[test]
    fn one_bit_toy() {
        let spec = EventSpec::cross(2.0, 1.0, Phase::Occupied);
        let cover = Disc::raw(1.0, 0.5, 5.0);
        let m = 4;
        let r = russo_check_with(&spec, m, 0.5, 0.1, &McConfig::new(20_000, 1), &Runner::serial(), |s| {
            Ok(RussoSample { forced: vec![], points: vec![(cover, s.uniform())], bias: 0.0 })
        })
        .unwrap();
        assert_eq!(r.pivotal_sum, (0.25, 0.0));
        assert!((r.fd_derivative.0 - 0.25).abs() <= 4.0 * r.fd_derivative.1, "{r:?}");
    }

    #[test]
    fn constant_event_has_zero_derivative() {
        let model = BooleanModel::new(0.2, RadiusLaw::Constant { radius: 1.0 })
            .unwrap()
            .with_forced(Disc::new(Point::new(3.0, 3.0), 10.0).unwrap());
        let spec = EventSpec::cross(6.0, 6.0, Phase::Occupied);
        let r = russo_check(&model, &spec, 4, 0.5, 0.1, &McConfig::new(100, 2), &Runner::serial()).unwrap();
        assert_eq!(r.fd_derivative, (0.0, 0.0));
        assert_eq!(r.pivotal_sum, (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_levels() {
        let model = BooleanModel::new(0.2, RadiusLaw::Constant { radius: 1.0 }).unwrap();
        let spec = EventSpec::cross(4.0, 4.0, Phase::Occupied);
        let cfg = McConfig::new(10, 3);
        assert!(russo_check(&model, &spec, 4, 0.95, 0.1, &cfg, &Runner::serial()).is_err());
        assert!(russo_check(&model, &spec, 1, 0.5, 0.1, &cfg, &Runner::serial()).is_err());
    }

    #[test]
    fn one_bit_toy_decreasing() {
        let spec = EventSpec::cross(2.0, 1.0, Phase::Vacant);
        let cover = Disc::raw(1.0, 0.5, 5.0);
        let r = russo_check_with(&spec, 4, 0.5, 0.1, &McConfig::new(20_000, 5), &Runner::serial(), |s| {
            Ok(RussoSample { forced: vec![], points: vec![(cover, s.uniform())], bias: 0.0 })
        })
        .unwrap();
        assert_eq!(r.pivotal_sum, (-0.25, 0.0));
        assert!((r.fd_derivative.0 + 0.25).abs() <= 4.0 * r.fd_derivative.1, "{r:?}");
    }

    #[test]
    fn vacant_arm_sides_agree() {
        let model = BooleanModel::new(0.3, RadiusLaw::Constant { radius: 1.0 }).unwrap();
        let spec = EventSpec::arm(1.0, 3.0, Phase::Vacant);
        let r = russo_check(&model, &spec, 3, 0.5, 0.1, &McConfig::new(3000, 6), &Runner::serial()).unwrap();
        assert!(r.difference().abs() <= 3.0 * r.combined_sigma(), "{r:?}");
        assert!(r.pivotal_sum.0 < 0.0);
    }

    #[test]
    fn sides_agree_near_criticality() {
        let model = BooleanModel::new(0.3, RadiusLaw::Constant { radius: 1.0 }).unwrap();
        let spec = EventSpec::cross(4.0, 4.0, Phase::Occupied);
        let r = russo_check(&model, &spec, 3, 0.5, 0.1, &McConfig::new(3000, 4), &Runner::serial()).unwrap();
        assert!(r.difference().abs() <= 3.0 * r.combined_sigma(), "{r:?}");
        assert!(r.pivotal_sum.0 > 0.0);
    }
}
