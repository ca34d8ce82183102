//! Finite-size classification and bracketing of the critical parameter.
//!
//! If `P[cross(3r, r)] > 1 − θ` at one large enough scale, the crossing
//! probability tends to 1; symmetrically for the vacant crossing. The
//! classifier looks for such a scale along a user schedule (standing in for
//! the unknown `r₀`) using Wilson lower bounds, so every verdict is evidence
//! rather than proof.

use serde::{Deserialize, Serialize};

use super::{sample_range, wilson, Estimate, McConfig, Runner, SeedRange, Tally, Z95};
use crate::distributions::RadiusLaw;
use crate::error::{Error, Result};
use crate::events::{EventSpec, Phase};
use crate::models::{BooleanModel, ModelSpec};

/// Replicates are processed in fixed chunks so that early stopping does not
/// depend on scheduling.
const CHUNK: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SupercriticalEvidence,
    SubcriticalEvidence,
    Undetermined,
}

/// Crossing estimates at one scheduled scale. `stopped` is set when
/// sampling ended early because neither bound could pass any more.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub r: f64,
    pub occupied: Estimate,
    pub vacant: Estimate,
    pub stopped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub param: f64,
    pub verdict: Verdict,
    pub trigger_r: Option<f64>,
    pub theta: f64,
    pub rows: Vec<ScaleRow>,
}

/// Whether a tally can still end with a lower bound above `1 − θ` once all
/// `n` replicates are in, assuming every remaining one succeeds.
fn can_pass(t: &Tally, n: u64, theta: f64) -> bool {
    let rest = n - t.n;
    let lo = wilson(t.hits + rest, n, Z95).0;
    lo - t.bias - t.unresolved as f64 / n as f64 > 1.0 - theta
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() || schedule.iter().any(|r| !(*r > 0.0)) || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("the scale schedule must be non-empty, positive and increasing"));
    }
    Ok(())
}

/// Evaluates `cross(3r, r)` in both phases along `schedule` and stops at the
/// first scale where one of the two lower bounds exceeds `1 − θ`. Scale `k`
/// uses stream tag `cfg.tag + k`.
pub fn classify(model: &ModelSpec, theta: f64, schedule: &[f64], cfg: &McConfig, runner: &Runner) -> Result<Classification> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!("θ must lie in (0, 1), got {theta}")));
    }
    check_schedule(schedule)?;
    cfg.validate()?;
    let mut rows = Vec::with_capacity(schedule.len());
    for (k, &r) in schedule.iter().enumerate() {
        let specs = [EventSpec::cross(3.0 * r, r, Phase::Occupied), EventSpec::cross(3.0 * r, r, Phase::Vacant)];
        let tag = cfg.tag.wrapping_add(k as u64);
        let mut occ = Tally::default();
        let mut vac = Tally::default();
        let mut stopped = false;
        while occ.n < cfg.n {
            let end = (occ.n + CHUNK).min(cfg.n);
            let seeds = SeedRange { master_seed: cfg.master_seed, tag, start: occ.n, end };
            let s = sample_range(model, &specs, cfg, seeds, runner)?;
            occ = occ.merge(s.tally(0));
            vac = vac.merge(s.tally(1));
            if !can_pass(&occ, cfg.n, theta) && !can_pass(&vac, cfg.n, theta) {
                stopped = occ.n < cfg.n;
                break;
            }
        }
        let seeds = SeedRange { master_seed: cfg.master_seed, tag, start: 0, end: occ.n };
        let row = ScaleRow {
            r,
            occupied: Estimate::from_tally(&occ, seeds)?,
            vacant: Estimate::from_tally(&vac, seeds)?,
            stopped,
        };
        rows.push(row);
        let verdict = if !stopped && row.occupied.lower_bound() > 1.0 - theta {
            Verdict::SupercriticalEvidence
        } else if !stopped && row.vacant.lower_bound() > 1.0 - theta {
            Verdict::SubcriticalEvidence
        } else {
            continue;
        };
        return Ok(Classification { param: model.param(), verdict, trigger_r: Some(r), theta, rows });
    }
    Ok(Classification { param: model.param(), verdict: Verdict::Undetermined, trigger_r: None, theta, rows })
}

/// Settings for [`bisect_critical`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    pub schedule: Vec<f64>,
    pub mc: McConfig,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Stop once `(λ⁺ − λ⁻) / ((λ⁺ + λ⁻)/2)` is at most this.
    pub rel_tol: f64,
    /// Budget in classifier calls, end points included.
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    /// Times the schedule may be extended by doubling its last scale when a
    /// midpoint is undetermined.
    #[serde(default = "default_extensions")]
    pub max_extensions: usize,
}

fn default_theta() -> f64 {
    0.01
}

fn default_max_evals() -> usize {
    24
}

fn default_extensions() -> usize {
    1
}

impl BisectConfig {
    pub fn new(schedule: Vec<f64>, mc: McConfig, rel_tol: f64) -> Self {
        BisectConfig {
            schedule,
            mc,
            theta: default_theta(),
            rel_tol,
            max_evals: default_max_evals(),
            max_extensions: default_extensions(),
        }
    }
}

/// Bracket `(λ⁻, λ⁺)` with subcritical evidence at `lo` and supercritical
/// evidence at `hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Whether the tolerance was met.
    pub converged: bool,
    pub evaluations: Vec<Classification>,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn rel_width(&self) -> f64 {
        (self.hi - self.lo) / self.mid()
    }

    pub fn overlaps(&self, o: &Bracket) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }
}

struct Bisector<'a> {
    family: &'a ModelSpec,
    cfg: &'a BisectConfig,
    runner: &'a Runner,
    evaluations: Vec<Classification>,
    /// Final verdict per parameter; classification is deterministic, so a
    /// repeated point is not sampled again.
    seen: Vec<(f64, Verdict)>,
}

impl Bisector<'_> {
    /// Classifies at `x`, extending the schedule while undetermined.
    fn verdict(&mut self, x: f64) -> Result<Verdict> {
        if let Some(&(_, v)) = self.seen.iter().find(|s| s.0 == x) {
            return Ok(v);
        }
        let mut schedule = self.cfg.schedule.clone();
        let mut ext = 0;
        loop {
            let c = classify(&self.family.with_param(x), self.cfg.theta, &schedule, &self.cfg.mc, self.runner)?;
            let v = c.verdict;
            self.evaluations.push(c);
            if v != Verdict::Undetermined || ext == self.cfg.max_extensions {
                self.seen.push((x, v));
                return Ok(v);
            }
            ext += 1;
            let last = *schedule.last().expect("non-empty schedule");
            schedule.push(2.0 * last);
        }
    }

    fn budget_left(&self) -> bool {
        self.evaluations.len() < self.cfg.max_evals
    }
}

/// Bisection on the family's parameter (`λ` or `q`). The end points must
/// classify as subcritical and supercritical. An undetermined midpoint
/// falls back to the quarter points before the search gives up.
pub fn bisect_critical(family: &ModelSpec, lo: f64, hi: f64, cfg: &BisectConfig, runner: &Runner) -> Result<Bracket> {
    if !(lo < hi) || !(lo >= 0.0) {
        return Err(Error::BadBracket(format!("need 0 ≤ lo < hi, got ({lo}, {hi})")));
    }
    if !(cfg.rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    check_schedule(&cfg.schedule)?;
    let mut b = Bisector { family, cfg, runner, evaluations: Vec::new(), seen: Vec::new() };
    let v = b.verdict(lo)?;
    if v != Verdict::SubcriticalEvidence {
        return Err(Error::BadBracket(format!("lower end {lo} classified {v:?}")));
    }
    let v = b.verdict(hi)?;
    if v != Verdict::SupercriticalEvidence {
        return Err(Error::BadBracket(format!("upper end {hi} classified {v:?}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let done = |lo: f64, hi: f64| hi - lo <= cfg.rel_tol * 0.5 * (lo + hi);
    while !done(lo, hi) && b.budget_left() {
        let mid = 0.5 * (lo + hi);
        match b.verdict(mid)? {
            Verdict::SupercriticalEvidence => hi = mid,
            Verdict::SubcriticalEvidence => lo = mid,
            Verdict::Undetermined => {
                let mut moved = false;
                let q1 = lo + 0.25 * (hi - lo);
                if b.budget_left() && b.verdict(q1)? == Verdict::SubcriticalEvidence {
                    lo = q1;
                    moved = true;
                }
                let q3 = hi - 0.25 * (hi - lo);
                if !done(lo, hi) && b.budget_left() && b.verdict(q3)? == Verdict::SupercriticalEvidence {
                    hi = q3;
                    moved = true;
                }
                if !moved {
                    break;
                }
            }
        }
    }
    Ok(Bracket { lo, hi, converged: done(lo, hi), evaluations: b.evaluations })
}

/// One truncation level of [`truncation_convergence`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub cap: f64,
    pub bracket: Bracket,
}

/// Brackets `λ_c` for the law truncated at each cap (mass above the cap
/// moved to an atom there), starting from the probe interval `(lo, hi)`.
pub fn truncation_convergence(
    law: &RadiusLaw,
    caps: &[f64],
    lo: f64,
    hi: f64,
    cfg: &BisectConfig,
    runner: &Runner,
) -> Result<Vec<TruncationRow>> {
    if !law.moment_flags().has_m2 {
        return Err(Error::InfiniteMoment(format!("{law:?}")));
    }
    let laws = caps.iter().map(|&c| law.truncated(c)).collect::<Result<Vec<_>>>()?;
    caps.iter()
        .zip(laws)
        .map(|(&cap, l)| {
            let family = ModelSpec::Boolean(BooleanModel::new(lo, l)?);
            Ok(TruncationRow { cap, bracket: bisect_critical(&family, lo, hi, cfg, runner)? })
        })
        .collect()
}
