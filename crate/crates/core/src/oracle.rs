//! Slow, independent references for the detectors and the radius laws.
//!
//! The raster oracle paints each pixel by a direct point query and runs its
//! own breadth-first search, sharing nothing with the production rasterizer
//! but the pixel layout. Quadrature works from the survival function alone,
//! never from the closed-form moment tails.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::distributions::RadiusLaw;
use crate::error::{Error, Result};
use crate::estimators::{Estimate, McConfig, Runner, Tally};
use crate::events::{EventSpec, Phase};
use crate::geometry::{Disc, PixelGrid, Point, Rect};
use crate::pointprocess::realize_boolean;

/// Event value on a `delta`-pixelation of `spec.region()`, occupied pixels
/// 8-connected and vacant pixels 4-connected, with no refinement.
pub fn raster_oracle(occupied: &dyn Fn(Point) -> bool, spec: &EventSpec, delta: f64) -> Result<bool> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    spec.validate()?;
    let region = spec.region();
    let g = PixelGrid::new(region, delta)?;
    let (nx, ny) = (g.nx, g.ny);
    let colour: Vec<bool> = (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| occupied(g.center(i, j))).collect();
    let search = |phase: Phase, sources: Vec<(usize, usize)>, target: &dyn Fn(usize, usize) -> bool| -> bool {
        let want = phase == Phase::Occupied;
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::new();
        for (i, j) in sources {
            if colour[j * nx + i] == want && !seen[j * nx + i] {
                seen[j * nx + i] = true;
                queue.push_back((i, j));
            }
        }
        while let Some((i, j)) = queue.pop_front() {
            if target(i, j) {
                return true;
            }
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if (di == 0 && dj == 0) || (!want && di != 0 && dj != 0) {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let k = b as usize * nx + a as usize;
                    if colour[k] == want && !seen[k] {
                        seen[k] = true;
                        queue.push_back((a as usize, b as usize));
                    }
                }
            }
        }
        false
    };
    let border = |i: usize, j: usize| i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
    let boxed = |half: f64| -> Vec<(usize, usize)> {
        // Pixels whose closed cells meet the centred box.
        let c = region.center();
        let mut v = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = g.center(i, j);
                if (p.x - c.x).abs() <= half + 0.5 * g.dx + 1e-12 && (p.y - c.y).abs() <= half + 0.5 * g.dy + 1e-12 {
                    v.push((i, j));
                }
            }
        }
        v
    };
    Ok(match *spec {
        EventSpec::Cross { phase, .. } => search(phase, (0..ny).map(|j| (0, j)).collect(), &|i, _| i == nx - 1),
        EventSpec::CrossToSub { phase, y_low, .. } => {
            let cut = region.y0 + y_low;
            search(phase, (0..ny).map(|j| (0, j)).collect(), &|i, j| i == nx - 1 && g.center(i, j).y >= cut - 1e-9)
        }
        EventSpec::Arm { phase, r_inner, .. } => search(phase, boxed(r_inner), &border),
        EventSpec::Circuit { phase, r_inner, .. } => !search(phase.dual(), boxed(r_inner), &border),
        EventSpec::OriginArm { phase, .. } => search(phase, vec![g.pixel_of(region.center())], &border),
    })
}

/// [`raster_oracle`] on a list of discs, by brute-force membership.
pub fn raster_oracle_discs(discs: &[Disc], spec: &EventSpec, delta: f64) -> Result<bool> {
    raster_oracle(&|p| discs.iter().any(|d| d.contains(p)), spec, delta)
}

/// Natural log of `S(e^y)`, kept finite for very large `y`.
fn log_survival(law: &RadiusLaw, y: f64) -> f64 {
    let x = y.exp();
    match law {
        RadiusLaw::ParetoTail { alpha, x_min } if x > *x_min => -(2.0 + alpha) * (y - x_min.ln()),
        RadiusLaw::Pareto2 { x_min } if x > *x_min => -2.0 * (y - x_min.ln()),
        RadiusLaw::LogPareto2 { x0 } if x > *x0 => -2.0 * y - 2.0 * y.ln(),
        RadiusLaw::LogPareto2Alpha { alpha, x0 } if x > *x0 => -(2.0 + alpha) * y - 2.0 * y.ln(),
        _ => law.survival(x).ln(),
    }
}

/// Relative accuracy targeted by [`quadrature_m2`].
const QUAD_TOL: f64 = 1e-12;

/// `∫_a^b f`, in the variable `log x` when the interval spans decades.
fn integrate_piece(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a > 0.0 && b / a > 4.0 {
        let g = |y: f64| {
            let x = y.exp();
            f(x) * x
        };
        quadrature::double_exponential::integrate(g, a.ln(), b.ln(), QUAD_TOL).integral
    } else {
        quadrature::double_exponential::integrate(f, a, b, QUAD_TOL).integral
    }
}

/// `∫_{[s, ∞)} x² μ(dx)` by numeric integration of the survival function:
/// `s² S(s) + ∫_s^∞ 2t S(t) dt`, which also handles atoms.
pub fn quadrature_m2(law: &RadiusLaw, s: f64) -> Result<f64> {
    law.validate()?;
    if !law.moment_flags().has_m2 {
        return Err(Error::InfiniteMoment(format!("{law:?}")));
    }
    let s = s.max(0.0);
    let top = law.max_support();
    let mut cuts = vec![s];
    cuts.extend(law.breakpoints().into_iter().filter(|&b| b > s && b < top));
    let integrand = |t: f64| 2.0 * t * law.survival(t);
    let mut total = s * s * law.survival(s);
    for w in cuts.windows(2) {
        total += integrate_piece(integrand, w[0], w[1]);
    }
    let last = *cuts.last().expect("non-empty");
    if top.is_finite() {
        if top > last {
            total += integrate_piece(integrand, last, top);
        }
    } else {
        // t = e^y, y = log(a) + (1 − w)/w maps w ∈ (0, 1] onto [a, ∞).
        let a = last.max(f64::MIN_POSITIVE);
        let y0 = a.ln();
        let g = |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let y = y0 + (1.0 - w) / w;
            2.0 * (2.0 * y + log_survival(law, y)).exp() / (w * w)
        };
        total += quadrature::double_exponential::integrate(g, 0.0, 1.0, QUAD_TOL).integral;
    }
    Ok(total)
}

/// `exp(−λ ∫_0^{R} 2π x S(x) dx)`: the probability that no disc centred
/// within distance `R` of the origin covers it.
pub fn void_probability_analytic(law: &RadiusLaw, lambda: f64, r_pad: f64) -> Result<f64> {
    law.validate()?;
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let integral = if r_pad.is_infinite() {
        // ∫_0^∞ 2x S(x) dx is the second moment.
        std::f64::consts::PI * quadrature_m2(law, 0.0).or_else(|e| match e {
            Error::InfiniteMoment(_) => Ok(f64::INFINITY),
            e => Err(e),
        })?
    } else {
        let mut cuts = vec![0.0];
        cuts.extend(law.breakpoints().into_iter().filter(|&b| b > 0.0 && b < r_pad));
        cuts.push(r_pad);
        let f = |x: f64| 2.0 * std::f64::consts::PI * x * law.survival(x);
        cuts.windows(2).map(|w| integrate_piece(f, w[0], w[1])).sum()
    };
    Ok((-lambda * integral).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoidCheck {
    pub analytic: f64,
    /// Frequency of "no disc centred within `R` covers the origin". Its bias
    /// is the truncation certificate of the sampler.
    pub empirical: Estimate,
}

impl VoidCheck {
    /// `|empirical − analytic|` in binomial standard deviations at the
    /// analytic value.
    pub fn z_score(&self) -> f64 {
        let p = self.analytic;
        let sd = (p * (1.0 - p) / self.empirical.n as f64).sqrt();
        (self.empirical.p_hat - p).abs() / sd
    }
}

/// Analytic and empirical probability that the origin is vacant.
pub fn void_probability_check(law: &RadiusLaw, lambda: f64, r_pad: f64, cfg: &McConfig, runner: &Runner) -> Result<VoidCheck> {
    cfg.validate()?;
    let analytic = void_probability_analytic(law, lambda, r_pad)?;
    let o = Point::ORIGIN;
    let window = Rect::centered(o, 1e-3, 1e-3)?;
    let seeds = cfg.seeds();
    let rows = runner.map(seeds.start..seeds.end, |i| {
        let r = realize_boolean(lambda, &window, law, cfg.eps, &mut seeds.stream(i))?;
        let covered = r.points.iter().any(|p| p.pos.dist(o) <= r_pad && p.pos.dist(o) <= p.z);
        Ok((!covered, r.budget.bias_bound))
    })?;
    let mut t = Tally::default();
    for (vacant, bias) in rows {
        t.push(crate::estimators::Outcome::new(vacant, false), bias);
    }
    Ok(VoidCheck { analytic, empirical: Estimate::from_tally(&t, seeds)? })
}

/// A hand-built configuration with a certified answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TinyConfig {
    pub name: String,
    /// `[x, y, radius]` triples, at most four.
    pub discs: Vec<[f64; 3]>,
    pub event: EventSpec,
    pub expected: bool,
}

impl TinyConfig {
    pub fn discs(&self) -> Result<Vec<Disc>> {
        self.discs.iter().map(|d| Disc::new(Point::new(d[0], d[1]), d[2])).collect()
    }
}

/// The versioned corpus shipped in `fixtures/tiny_configs.json`.
pub fn tiny_corpus() -> Result<Vec<TinyConfig>> {
    let v: Vec<TinyConfig> = serde_json::from_str(include_str!("../fixtures/tiny_configs.json"))
        .map_err(|e| Error::invalid(format!("corpus: {e}")))?;
    if v.iter().any(|c| c.discs.len() > 4) {
        return Err(Error::invalid("corpus cases hold at most four discs"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::detect_cross_occupied;
    use crate::pointprocess::RngStream;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn quadrature_reference_values() {
        assert!(rel(quadrature_m2(&RadiusLaw::Constant { radius: 1.0 }, 0.0).unwrap(), 1.0) < 1e-12);
        let p = RadiusLaw::ParetoTail { alpha: 1.0, x_min: 1.0 };
        assert!(rel(quadrature_m2(&p, 1.0).unwrap(), 3.0) < 1e-10);
        let u = RadiusLaw::Uniform { low: 1.0, high: 3.0 };
        assert!(rel(quadrature_m2(&u, 0.0).unwrap(), 13.0 / 3.0) < 1e-10);
        assert!(matches!(quadrature_m2(&RadiusLaw::Pareto2 { x_min: 1.0 }, 1.0), Err(Error::InfiniteMoment(_))));
    }

    fn laws() -> Vec<RadiusLaw> {
        vec![
            RadiusLaw::Constant { radius: 1.5 },
            RadiusLaw::Uniform { low: 0.5, high: 2.0 },
            RadiusLaw::ParetoTail { alpha: 1.0, x_min: 1.0 },
            RadiusLaw::ParetoTail { alpha: 0.3, x_min: 2.0 },
            RadiusLaw::LogPareto2 { x0: std::f64::consts::E },
            RadiusLaw::LogPareto2 { x0: 5.0 },
            RadiusLaw::LogPareto2Alpha { alpha: 0.5, x0: std::f64::consts::E },
            RadiusLaw::Truncated { base: Box::new(RadiusLaw::Pareto2 { x_min: 1.0 }), cap: 10.0 },
            RadiusLaw::Truncated { base: Box::new(RadiusLaw::ParetoTail { alpha: 1.0, x_min: 1.0 }), cap: 4.0 },
        ]
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for law in laws() {
            for s in [0.0, 0.7, 1.0, 2.5, 3.0, 7.0, 12.0, 100.0] {
                let q = quadrature_m2(&law, s).unwrap();
                let c = law.tail_m2(s).unwrap();
                if c == 0.0 {
                    assert!(q.abs() < 1e-12, "{law:?} at {s}: {q}");
                } else {
                    assert!(rel(q, c) < 1e-6, "{law:?} at {s}: {q} vs {c}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn quadrature_matches_closed_forms_random(alpha in 0.2f64..3.0, x_min in 0.3f64..4.0, s in 0.0f64..50.0) {
            let law = RadiusLaw::ParetoTail { alpha, x_min };
            prop_assert!(rel(quadrature_m2(&law, s).unwrap(), law.tail_m2(s).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn void_probability_analytic_values() {
        let p = RadiusLaw::ParetoTail { alpha: 1.0, x_min: 1.0 };
        for lambda in [0.05, 0.1, 0.2] {
            let a = void_probability_analytic(&p, lambda, f64::INFINITY).unwrap();
            assert!(rel(a, (-3.0 * std::f64::consts::PI * lambda).exp()) < 1e-10);
            // Truncated at R: 2π(1/2 + 1 − 1/R).
            let r = 50.0;
            let t = void_probability_analytic(&p, lambda, r).unwrap();
            assert!(rel(t, (-lambda * 2.0 * std::f64::consts::PI * (1.5 - 1.0 / r)).exp()) < 1e-10);
        }
        assert_eq!(void_probability_analytic(&p, 0.0, 10.0).unwrap(), 1.0);
        // Pareto2: π(1 + 2 log R), so the vacancy probability vanishes.
        let p2 = RadiusLaw::Pareto2 { x_min: 1.0 };
        let vals: Vec<f64> = [10.0, 1e3, 1e6].iter().map(|&r| void_probability_analytic(&p2, 0.1, r).unwrap()).collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        assert!(rel(vals[2], (-0.1 * std::f64::consts::PI * (1.0 + 2.0 * 1e6f64.ln())).exp()) < 1e-8);
        assert_eq!(void_probability_analytic(&p2, 0.1, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn void_probability_empirical() {
        let c = void_probability_check(
            &RadiusLaw::Uniform { low: 0.5, high: 1.5 },
            0.3,
            f64::INFINITY,
            &McConfig::new(20_000, 1),
            &Runner::serial(),
        )
        .unwrap();
        assert!(c.z_score() < 4.0, "{c:?}");
        let c = void_probability_check(&RadiusLaw::Constant { radius: 1.0 }, 0.0, 5.0, &McConfig::new(100, 1), &Runner::serial()).unwrap();
        assert_eq!((c.analytic, c.empirical.p_hat), (1.0, 1.0));
    }

    #[test]
    fn oracle_trivial_cases() {
        let spec = EventSpec::cross(4.0, 1.0, Phase::Occupied);
        for delta in [0.1, 0.01] {
            assert!(raster_oracle_discs(&[Disc::raw(2.0, 0.5, 10.0)], &spec, delta).unwrap());
            assert!(!raster_oracle_discs(&[], &spec, delta).unwrap());
        }
        assert!(raster_oracle_discs(&[], &spec, 0.0).is_err());
    }

    #[test]
    fn oracle_monotone_under_insertion() {
        let k = Rect::new(0.0, 0.0, 6.0, 3.0).unwrap();
        let spec = EventSpec::cross(6.0, 3.0, Phase::Occupied);
        let arm = EventSpec::origin_arm(3.0, Phase::Occupied).translated(3.0, 1.5);
        let law = RadiusLaw::Uniform { low: 0.4, high: 1.0 };
        for rep in 0..20 {
            let r = realize_boolean(0.5, &k, &law, 1e-3, &mut RngStream::new(5, rep)).unwrap();
            let discs: Vec<Disc> = r.points.iter().map(|p| Disc::raw(p.pos.x, p.pos.y, p.z)).collect();
            let mut prev = (false, false);
            for n in 0..=discs.len() {
                let now = (raster_oracle_discs(&discs[..n], &spec, 0.05).unwrap(), raster_oracle_discs(&discs[..n], &arm, 0.05).unwrap());
                assert!((!prev.0 || now.0) && (!prev.1 || now.1));
                prev = now;
            }
        }
    }

    #[test]
    fn tiny_corpus_is_certified() {
        let corpus = tiny_corpus().unwrap();
        assert!(corpus.len() >= 40);
        for c in &corpus {
            let discs = c.discs().unwrap();
            let side = c.event.scale();
            for delta in [side / 1024.0, side / 2048.0] {
                assert_eq!(raster_oracle_discs(&discs, &c.event, delta).unwrap(), c.expected, "{} at {delta}", c.name);
            }
            assert_eq!(c.event.exact(&discs), c.expected, "{}", c.name);
        }
    }

    #[test]
    fn oracle_agrees_with_exact_on_random_crossings() {
        let k = Rect::new(0.0, 0.0, 5.0, 5.0).unwrap();
        let spec = EventSpec::cross(5.0, 5.0, Phase::Occupied);
        let law = RadiusLaw::Constant { radius: 0.5 };
        let mut agree = 0;
        for rep in 0..40 {
            let r = realize_boolean(1.4, &k, &law, 1e-3, &mut RngStream::new(6, rep)).unwrap();
            let discs: Vec<Disc> = r.points.iter().map(|p| Disc::raw(p.pos.x, p.pos.y, p.z)).collect();
            agree += usize::from(raster_oracle_discs(&discs, &spec, 5.0 / 512.0).unwrap() == detect_cross_occupied(&discs, &k, k.left(), k.right()));
        }
        assert!(agree >= 39);
    }
}
