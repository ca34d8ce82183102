//! Monte Carlo estimation on top of the event detectors.
//!
//! Replicate `i` of a run draws from `RngStream::new(master_seed, i)` (then
//! a child tagged by the parameter point), so outcomes depend on the seed
//! and the index only, never on how replicates are scheduled over threads.
//! Per-replicate records reduce through integer counts and a maximum, both
//! exact and order-free.

mod correlation;
mod critical;
mod decay;
mod inequalities;
mod russo;

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use correlation::{estimate_correlation, Correlation};
pub use critical::{bisect_critical, classify, truncation_convergence, BisectConfig, Bracket, Classification, TruncationRow, Verdict};
pub use decay::{fit_arm_decay, fit_log_log, ArmDecay, DecayFit};
pub use inequalities::{fkg_check, sqrt_trick_check, standard_inequality_check, InequalityCheck};
pub use russo::{russo_check, russo_check_with, RussoCheck, RussoSample};

use crate::error::{Error, Result};
use crate::events::{Bitmap, DetectorPolicy, EventSpec, Evaluator, Phase};
use crate::geometry::Rect;
use crate::models::{Field, ModelSpec};
use crate::pointprocess::RngStream;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Replicates `start..end` of the stream family `(master_seed, tag)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub master_seed: u64,
    pub tag: u64,
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn stream(&self, i: u64) -> RngStream {
        RngStream::new(self.master_seed, i).child(self.tag)
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// A Monte Carlo probability with its 95% Wilson interval and the additive
/// bias bound (truncation certificate plus unresolved-raster rate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub n: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bias: f64,
    pub unresolved_rate: f64,
    pub seeds: SeedRange,
}

impl Estimate {
    pub fn from_tally(t: &Tally, seeds: SeedRange) -> Result<Self> {
        if t.n == 0 {
            return Err(Error::invalid("an estimate needs at least one replicate"));
        }
        let (ci_low, ci_high) = wilson(t.hits, t.n, Z95);
        let unresolved_rate = t.unresolved as f64 / t.n as f64;
        Ok(Estimate {
            p_hat: t.hits as f64 / t.n as f64,
            n: t.n,
            ci_low,
            ci_high,
            bias: t.bias + unresolved_rate,
            unresolved_rate,
            seeds,
        })
    }

    /// Binomial standard error `√(p̂(1 − p̂)/n)`.
    pub fn sigma(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n as f64).sqrt()
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Interval half-width plus bias.
    pub fn total_uncertainty(&self) -> f64 {
        self.half_width() + self.bias
    }

    /// Lower Wilson bound minus bias: a conservative lower confidence bound.
    pub fn lower_bound(&self) -> f64 {
        self.ci_low - self.bias
    }
}

/// Exact, order-free reduction of per-replicate outcomes of one event.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub n: u64,
    pub hits: u64,
    pub unresolved: u64,
    /// Largest per-realization truncation bound.
    pub bias: f64,
}

impl Tally {
    pub fn push(&mut self, outcome: Outcome, bias: f64) {
        self.n += 1;
        self.hits += u64::from(outcome.value());
        self.unresolved += u64::from(outcome.unresolved());
        self.bias = self.bias.max(bias);
    }

    pub fn merge(mut self, o: Tally) -> Tally {
        self.n += o.n;
        self.hits += o.hits;
        self.unresolved += o.unresolved;
        self.bias = self.bias.max(o.bias);
        self
    }
}

/// Detector outcome packed in a byte: bit 0 is the value (the finest
/// raster value when unresolved), bit 1 flags an unresolved refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome(pub u8);

impl Outcome {
    pub fn new(value: bool, unresolved: bool) -> Self {
        Outcome(u8::from(value) | (u8::from(unresolved) << 1))
    }

    pub fn value(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn unresolved(self) -> bool {
        self.0 & 2 == 2
    }
}

/// Worker pool. The thread count is a hint: results never depend on it.
#[derive(Clone)]
pub struct Runner {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Runner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Runner({} threads)", self.threads())
    }
}

impl Runner {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        if threads == 1 {
            return Ok(Runner { pool: None });
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        Ok(Runner { pool: Some(Arc::new(pool)) })
    }

    pub fn serial() -> Self {
        Runner { pool: None }
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Applies `f` to every index, in index order. The first error by index
    /// wins, whichever thread hit it first.
    pub fn map<T: Send>(&self, range: Range<u64>, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let results: Vec<Result<T>> = match &self.pool {
            None => range.map(&f).collect(),
            Some(pool) => pool.install(|| range.into_par_iter().map(&f).collect()),
        };
        results.into_iter().collect()
    }
}

impl Default for Runner {
    fn default() -> Self {
        Runner::serial()
    }
}

/// Common Monte Carlo settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub tag: u64,
    #[serde(default)]
    pub policy: DetectorPolicy,
    /// Truncation error budget per realization.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-3
}

impl McConfig {
    pub fn new(n: u64, master_seed: u64) -> Self {
        McConfig { n, master_seed, tag: 0, policy: DetectorPolicy::default(), eps: default_eps() }
    }

    pub fn with_tag(mut self, tag: u64) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn with_policy(mut self, policy: DetectorPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn seeds(&self) -> SeedRange {
        SeedRange { master_seed: self.master_seed, tag: self.tag, start: 0, end: self.n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        self.policy.validate()
    }
}

/// Outcomes of several events evaluated on shared realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub seeds: SeedRange,
    pub events: usize,
    /// Row-major: `codes[rep * events + e]`.
    pub codes: Vec<Outcome>,
    /// Largest truncation bound over realizations.
    pub bias: f64,
    /// Total primitive objects over realizations.
    pub objects: u64,
}

impl Samples {
    pub fn n(&self) -> u64 {
        self.seeds.len()
    }

    pub fn get(&self, rep: usize, e: usize) -> Outcome {
        self.codes[rep * self.events + e]
    }

    pub fn column(&self, e: usize) -> Vec<Outcome> {
        (0..self.n() as usize).map(|r| self.get(r, e)).collect()
    }

    pub fn values(&self, e: usize) -> Vec<bool> {
        (0..self.n() as usize).map(|r| self.get(r, e).value()).collect()
    }

    pub fn tally(&self, e: usize) -> Tally {
        let mut t = Tally { bias: self.bias, ..Tally::default() };
        for r in 0..self.n() as usize {
            let o = self.get(r, e);
            t.n += 1;
            t.hits += u64::from(o.value());
            t.unresolved += u64::from(o.unresolved());
        }
        t
    }

    pub fn estimate(&self, e: usize) -> Result<Estimate> {
        Estimate::from_tally(&self.tally(e), self.seeds)
    }

    /// Tally of an arbitrary per-replicate function of the outcomes.
    pub fn tally_by(&self, f: impl Fn(&[Outcome]) -> Outcome) -> Tally {
        let mut t = Tally { bias: self.bias, ..Tally::default() };
        for r in 0..self.n() as usize {
            let row = &self.codes[r * self.events..(r + 1) * self.events];
            let o = f(row);
            t.n += 1;
            t.hits += u64::from(o.value());
            t.unresolved += u64::from(o.unresolved());
        }
        t
    }
}

/// Smallest rectangle containing every event region.
pub fn joint_window(specs: &[EventSpec]) -> Result<Rect> {
    let mut it = specs.iter();
    let first = it.next().ok_or_else(|| Error::invalid("no events given"))?;
    Ok(it.fold(first.region(), |acc, s| acc.union(&s.region())))
}

fn evaluate_all(field: &Field, specs: &[EventSpec], policy: DetectorPolicy) -> Result<Vec<Outcome>> {
    let ev = Evaluator::new(field, policy);
    specs
        .iter()
        .map(|s| {
            let d = ev.detect(s)?;
            Ok(Outcome::new(d.finest, d.is_unresolved()))
        })
        .collect()
}

/// Evaluates `specs` on one realization of `model` per replicate, over the
/// smallest window containing all event regions.
pub fn sample_events(model: &ModelSpec, specs: &[EventSpec], cfg: &McConfig, runner: &Runner) -> Result<Samples> {
    cfg.validate()?;
    sample_range(model, specs, cfg, cfg.seeds(), runner)
}

/// [`sample_events`] over an explicit replicate range.
pub fn sample_range(model: &ModelSpec, specs: &[EventSpec], cfg: &McConfig, seeds: SeedRange, runner: &Runner) -> Result<Samples> {
    model.validate()?;
    for s in specs {
        s.validate()?;
    }
    let window = joint_window(specs)?;
    let rows = runner.map(seeds.start..seeds.end, |i| {
        let field = model.realize(&window, cfg.eps, &mut seeds.stream(i))?;
        Ok((evaluate_all(&field, specs, cfg.policy)?, field.bias(), field.size() as u64))
    })?;
    let mut codes = Vec::with_capacity(rows.len() * specs.len());
    let mut bias = 0.0f64;
    let mut objects = 0;
    for (row, b, k) in rows {
        codes.extend(row);
        bias = bias.max(b);
        objects += k;
    }
    Ok(Samples { seeds, events: specs.len(), codes, bias, objects })
}

/// Probability of one event: `n` independent detections, Wilson interval,
/// bias = truncation bound + unresolved fraction. Unresolved replicates
/// contribute their finest raster value to `p̂` and widen the bias.
pub fn estimate(model: &ModelSpec, spec: &EventSpec, cfg: &McConfig, runner: &Runner) -> Result<Estimate> {
    sample_events(model, std::slice::from_ref(spec), cfg, runner)?.estimate(0)
}

/// One row of a crossing curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    pub r: f64,
    pub estimate: Estimate,
}

/// `P[cross(κr, r)]` (or its vacant analogue) over a grid of parameters and
/// scales. All parameters at one scale share replicate streams. Boolean
/// intensities are coupled exactly by thinning one marked sample at the
/// largest intensity; Voronoi and confetti share seeds and colour marks, so
/// raising `q` only recolours white to black.
pub fn crossing_curve(
    family: &ModelSpec,
    params: &[f64],
    kappa: f64,
    radii: &[f64],
    phase: Phase,
    cfg: &McConfig,
    runner: &Runner,
) -> Result<Vec<CurvePoint>> {
    if params.is_empty() || radii.is_empty() {
        return Err(Error::invalid("parameter and scale grids must be non-empty"));
    }
    let mut out = Vec::with_capacity(params.len() * radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let spec = EventSpec::cross(kappa * r, r, phase);
        let c = cfg.with_tag(cfg.tag.wrapping_add(ri as u64));
        let samples = sample_param_grid(family, params, &spec, &c, runner)?;
        for (pi, &param) in params.iter().enumerate() {
            out.push(CurvePoint { param, r, estimate: samples.estimate(pi)? });
        }
    }
    Ok(out)
}

/// One event at several parameter values on coupled realizations; the
/// columns of the result follow `params`.
pub fn sample_param_grid(family: &ModelSpec, params: &[f64], spec: &EventSpec, cfg: &McConfig, runner: &Runner) -> Result<Samples> {
    cfg.validate()?;
    spec.validate()?;
    for &p in params {
        family.with_param(p).validate()?;
    }
    let window = spec.region();
    let seeds = cfg.seeds();
    let rows = runner.map(seeds.start..seeds.end, |i| {
        let mut row = Vec::with_capacity(params.len());
        let mut bias = 0.0f64;
        let mut objects = 0u64;
        match family {
            ModelSpec::Boolean(b) => {
                let top = params.iter().copied().fold(0.0, f64::max);
                let base = crate::models::BooleanModel { lambda: top, ..b.clone() };
                let marked = base.realize_marked(&window, cfg.eps, &mut seeds.stream(i))?;
                for &l in params {
                    let p = if top > 0.0 { l / top } else { 0.0 };
                    let field = Field::Discs(marked.thinned(p));
                    row.extend(evaluate_all(&field, std::slice::from_ref(spec), cfg.policy)?);
                    bias = bias.max(field.bias());
                    objects += field.size() as u64;
                }
            }
            _ => {
                for &q in params {
                    let field = family.with_param(q).realize(&window, cfg.eps, &mut seeds.stream(i))?;
                    row.extend(evaluate_all(&field, std::slice::from_ref(spec), cfg.policy)?);
                    bias = bias.max(field.bias());
                    objects += field.size() as u64;
                }
            }
        }
        Ok((row, bias, objects))
    })?;
    let mut codes = Vec::with_capacity(rows.len() * params.len());
    let mut bias = 0.0f64;
    let mut objects = 0;
    for (row, b, k) in rows {
        codes.extend(row);
        bias = bias.max(b);
        objects += k;
    }
    Ok(Samples { seeds, events: params.len(), codes, bias, objects })
}

/// Per-replicate duality agreement at raster resolution `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub param: f64,
    pub r: f64,
    pub delta: f64,
    pub n: u64,
    /// Replicates where exactly one of the two crossings holds.
    pub agree: u64,
}

impl DualityRow {
    pub fn agreement(&self) -> f64 {
        self.agree as f64 / self.n as f64
    }

    pub fn violation_rate(&self) -> f64 {
        1.0 - self.agreement()
    }
}

/// Exact occupied left-right crossing against raster vacant top-bottom
/// crossing of the `r × r` square, on shared Boolean realizations, at each
/// resolution in `deltas`.
pub fn duality_check(model: &ModelSpec, r: f64, deltas: &[f64], cfg: &McConfig, runner: &Runner) -> Result<Vec<DualityRow>> {
    cfg.validate()?;
    let ModelSpec::Boolean(_) = model else {
        return Err(Error::invalid("the duality check needs a Boolean model"));
    };
    let spec = EventSpec::cross(r, r, Phase::Occupied);
    spec.validate()?;
    let k = spec.region();
    let seeds = cfg.seeds();
    let rows = runner.map(seeds.start..seeds.end, |i| {
        let field = model.realize(&k, cfg.eps, &mut seeds.stream(i))?;
        let occ = spec.exact(field.discs().unwrap_or(&[]));
        let mut agree = Vec::with_capacity(deltas.len());
        for &d in deltas {
            let b = Bitmap::rasterize(&field, k, d)?;
            agree.push(occ != b.crosses_vertically(Phase::Vacant));
        }
        Ok(agree)
    })?;
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| DualityRow {
            param: model.param(),
            r,
            delta,
            n: seeds.len(),
            agree: rows.iter().filter(|a| a[j]).count() as u64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RadiusLaw;
    use crate::models::{BooleanModel, StepFunction, VoronoiModel};

    fn boolean(lambda: f64) -> ModelSpec {
        ModelSpec::Boolean(BooleanModel::new(lambda, RadiusLaw::Constant { radius: 1.0 }).unwrap())
    }

    #[test]
    fn wilson_reference_values() {
        // k = 0: upper bound z²/(n + z²).
        let (lo, hi) = wilson(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (100.0 + Z95 * Z95)).abs() < 1e-12);
        // Symmetric around 1/2 at k = n/2.
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!((lo - 0.403_831_7).abs() < 1e-6, "{lo}");
        let (lo, hi) = wilson(100, 100, Z95);
        assert_eq!(hi, 1.0);
        assert!((lo - 100.0 / (100.0 + Z95 * Z95)).abs() < 1e-12);
    }

    #[test]
    fn empty_model_never_crosses() {
        let e = estimate(&boolean(0.0), &EventSpec::cross(5.0, 5.0, Phase::Occupied), &McConfig::new(200, 1), &Runner::serial()).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.ci_low, 0.0);
        assert_eq!(e.ci_high, wilson(0, 200, Z95).1);
        assert_eq!(e.bias, 0.0);
    }

    #[test]
    fn all_black_voronoi_always_crosses() {
        let one = StepFunction::constant(1.0).unwrap();
        let m = ModelSpec::Voronoi(VoronoiModel::new(1.0, one.clone(), one).unwrap());
        let e = estimate(&m, &EventSpec::cross(4.0, 4.0, Phase::Occupied), &McConfig::new(20, 2), &Runner::serial()).unwrap();
        assert_eq!(e.p_hat, 1.0);
    }

    #[test]
    fn square_duality_is_exact() {
        // Occupied left-right and vacant bottom-top: exactly one holds.
        let k = Rect::new(0.0, 0.0, 6.0, 6.0).unwrap();
        for (i, lambda) in [0.2, 0.36, 0.5].into_iter().enumerate() {
            let m = BooleanModel::new(lambda, RadiusLaw::Constant { radius: 1.0 }).unwrap();
            for rep in 0..300 {
                let (ds, _) = m.discs(&k, 1e-3, &mut RngStream::new(i as u64, rep)).unwrap();
                let occ = crate::events::detect_cross_occupied(&ds, &k, k.left(), k.right());
                let vac = crate::events::detect_cross_vacant(&ds, &k, crate::events::Direction::BottomTop);
                assert_ne!(occ, vac);
            }
        }
    }

    #[test]
    fn zero_replicates_rejected() {
        let r = estimate(&boolean(0.3), &EventSpec::cross(2.0, 2.0, Phase::Occupied), &McConfig::new(0, 1), &Runner::serial());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn thread_count_does_not_change_outcomes() {
        let specs = [EventSpec::cross(9.0, 3.0, Phase::Occupied), EventSpec::arm(1.0, 4.0, Phase::Vacant)];
        let cfg = McConfig::new(64, 7);
        let a = sample_events(&boolean(0.4), &specs, &cfg, &Runner::serial()).unwrap();
        let b = sample_events(&boolean(0.4), &specs, &cfg, &Runner::new(4).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tallies_merge_in_any_order() {
        let s = sample_events(&boolean(0.36), &[EventSpec::cross(6.0, 2.0, Phase::Occupied)], &McConfig::new(90, 5), &Runner::serial()).unwrap();
        let parts: Vec<Tally> = (0..9)
            .map(|c| {
                let mut t = Tally::default();
                for r in c * 10..(c + 1) * 10 {
                    t.push(s.get(r, 0), s.bias);
                }
                t
            })
            .collect();
        let forward = parts.iter().fold(Tally::default(), |a, b| a.merge(*b));
        let backward = parts.iter().rev().fold(Tally::default(), |a, b| b.merge(a));
        let paired = parts.chunks(2).map(|c| c.iter().fold(Tally::default(), |a, b| a.merge(*b))).fold(Tally::default(), |a, b| b.merge(a));
        assert_eq!(forward, s.tally(0));
        assert_eq!(backward, forward);
        assert_eq!(paired, forward);
    }

    #[test]
    fn coupled_curve_is_monotone_per_replicate() {
        let lambdas = [0.2, 0.3, 0.4, 0.5];
        let spec = EventSpec::cross(12.0, 4.0, Phase::Occupied);
        let s = sample_param_grid(&boolean(0.3), &lambdas, &spec, &McConfig::new(150, 11), &Runner::serial()).unwrap();
        for rep in 0..150 {
            for j in 1..lambdas.len() {
                assert!(!s.get(rep, j - 1).value() || s.get(rep, j).value(), "replicate {rep}");
            }
        }
        let one = StepFunction::constant(1.0).unwrap();
        let vor = ModelSpec::Voronoi(VoronoiModel::new(0.5, one.clone(), one).unwrap());
        let qs = [0.3, 0.5, 0.7];
        let s = sample_param_grid(&vor, &qs, &EventSpec::cross(6.0, 6.0, Phase::Occupied), &McConfig::new(30, 12), &Runner::serial()).unwrap();
        for rep in 0..30 {
            for j in 1..qs.len() {
                assert!(!s.get(rep, j - 1).value() || s.get(rep, j).value());
            }
        }
    }

    #[test]
    fn crossing_curve_trends() {
        let cfg = McConfig::new(200, 13);
        let rows = crossing_curve(&boolean(0.3), &[0.1, 0.8], 3.0, &[2.0, 6.0], Phase::Occupied, &cfg, &Runner::serial()).unwrap();
        let get = |l: f64, r: f64| rows.iter().find(|c| c.param == l && c.r == r).unwrap().estimate.p_hat;
        assert!(get(0.8, 6.0) >= get(0.8, 2.0));
        assert!(get(0.1, 6.0) <= get(0.1, 2.0));
        assert!(get(0.8, 6.0) > 0.9 && get(0.1, 6.0) < 0.1);
    }

    #[test]
    fn duality_rows_count_agreement() {
        let rows = duality_check(&boolean(0.36), 4.0, &[4.0 / 128.0, 4.0 / 512.0], &McConfig::new(100, 17), &Runner::serial()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].agree >= rows[0].agree.saturating_sub(2));
        assert!(rows[1].agreement() >= 0.95);
    }
}
