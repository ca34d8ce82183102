//! Experiment execution. Every experiment produces result rows in a fixed
//! order, so a row index identifies the same computation across runs.

use std::collections::BTreeSet;
use std::time::Instant;

use percolab_core::estimators::{
    bisect_critical, duality_check, estimate_correlation, fit_log_log, russo_check, sample_events, sample_param_grid,
    truncation_convergence, wilson, BisectConfig, Classification, Estimate, McConfig, SeedRange, Z95,
};
use percolab_core::oracle::{raster_oracle_discs, void_probability_check};
use percolab_core::{EventSpec, ModelSpec, Runner};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

/// One CSV line. Field order is the frozen column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub model_digest: String,
    pub event_digest: String,
    pub param: f64,
    pub r: f64,
    pub n: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bias: f64,
    pub unresolved_rate: f64,
    pub master_seed: u64,
    pub replicate_range: String,
    pub wall_time: f64,
}

/// A row with the raw per-replicate outcomes behind it.
#[derive(Clone, Debug)]
pub struct RowOut {
    pub row: ResultRow,
    pub outcomes: Vec<u8>,
}

impl RowOut {
    /// SHA-256 over the outcomes and the bit patterns of every numeric
    /// field except `wall_time`.
    pub fn digest(&self) -> String {
        let r = &self.row;
        let mut h = Sha256::new();
        h.update(&self.outcomes);
        for x in [r.param, r.r, r.p_hat, r.ci_low, r.ci_high, r.bias, r.unresolved_rate] {
            h.update(x.to_bits().to_le_bytes());
        }
        h.update(r.n.to_le_bytes());
        h.update(r.master_seed.to_le_bytes());
        h.update(r.replicate_range.as_bytes());
        hex(&h.finalize())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub rows: Vec<RowOut>,
    pub verdicts: Vec<Value>,
    pub replicates: u64,
    pub objects: u64,
    pub oracle: Option<Value>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short content digest of a serializable value.
pub fn digest_of(v: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(v).expect("serializable");
    hex(&Sha256::digest(&bytes)[..8])
}

fn range_label(s: &SeedRange) -> String {
    format!("{}:{}..{}", s.tag, s.start, s.end)
}

/// Row selection for replay; `None` runs everything.
pub type Selection<'a> = Option<&'a BTreeSet<usize>>;

fn wanted(sel: Selection, i: usize) -> bool {
    sel.is_none_or(|s| s.contains(&i))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    runner: &'a Runner,
    sel: Selection<'a>,
    oracle: bool,
    report: Report,
}

impl Ctx<'_> {
    fn mc(&self, tag: u64) -> McConfig {
        McConfig::new(self.cfg.n, self.cfg.master_seed).with_tag(tag).with_policy(self.cfg.policy).with_eps(self.cfg.eps)
    }

    fn row(&self, id: String, model: &ModelSpec, event: &impl Serialize, r: f64, e: &Estimate, wall: f64) -> ResultRow {
        ResultRow {
            experiment: id,
            model_digest: digest_of(model),
            event_digest: digest_of(event),
            param: model.param(),
            r,
            n: e.n,
            p_hat: e.p_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            bias: e.bias,
            unresolved_rate: e.unresolved_rate,
            master_seed: self.cfg.master_seed,
            replicate_range: range_label(&e.seeds),
            wall_time: wall,
        }
    }

    /// Row for a signed statistic with a normal 95% interval.
    #[allow(clippy::too_many_arguments)]
    fn stat_row(&self, id: String, model: &ModelSpec, event: &impl Serialize, r: f64, value: f64, se: f64, bias: f64, seeds: &SeedRange, wall: f64) -> ResultRow {
        ResultRow {
            experiment: id,
            model_digest: digest_of(model),
            event_digest: digest_of(event),
            param: model.param(),
            r,
            n: seeds.len(),
            p_hat: value,
            ci_low: value - Z95 * se,
            ci_high: value + Z95 * se,
            bias,
            unresolved_rate: 0.0,
            master_seed: self.cfg.master_seed,
            replicate_range: range_label(seeds),
            wall_time: wall,
        }
    }

    fn push(&mut self, row: ResultRow, outcomes: Vec<u8>) {
        self.report.rows.push(RowOut { row, outcomes });
    }

    /// Placeholder keeping row indices stable when a row is skipped.
    fn skip(&mut self) {
        self.report.rows.push(RowOut { row: empty_row(), outcomes: vec![] });
    }
}

fn empty_row() -> ResultRow {
    ResultRow {
        experiment: String::new(),
        model_digest: String::new(),
        event_digest: String::new(),
        param: 0.0,
        r: 0.0,
        n: 0,
        p_hat: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
        bias: 0.0,
        unresolved_rate: 0.0,
        master_seed: 0,
        replicate_range: String::new(),
        wall_time: 0.0,
    }
}

/// Runs `cfg`. With a selection, independent rows outside it are skipped
/// and left as placeholders.
pub fn execute(cfg: &ExperimentConfig, runner: &Runner, sel: Selection, oracle: bool) -> Result<Report, CliError> {
    let mut cx = Ctx { cfg, runner, sel, oracle, report: Report::default() };
    match cfg.experiment {
        Experiment::Estimate => estimate(&mut cx)?,
        Experiment::Curve => curve(&mut cx)?,
        Experiment::Critical => critical(&mut cx)?,
        Experiment::Arm => arm(&mut cx)?,
        Experiment::Corr => corr(&mut cx)?,
        Experiment::Russo => russo(&mut cx)?,
        Experiment::DualityCheck => duality(&mut cx)?,
        Experiment::Coverage => coverage(&mut cx)?,
        Experiment::Truncation => truncation(&mut cx)?,
    }
    Ok(cx.report)
}

fn codes(s: &percolab_core::estimators::Samples, e: usize) -> Vec<u8> {
    s.column(e).into_iter().map(|o| o.0).collect()
}

fn estimate(cx: &mut Ctx) -> Result<(), CliError> {
    let spec = cx.cfg.event.expect("validated");
    for (i, p) in cx.cfg.param_grid().into_iter().enumerate() {
        if !wanted(cx.sel, i) {
            cx.skip();
            continue;
        }
        let t = Instant::now();
        let model = cx.cfg.model.with_param(p);
        let mc = cx.mc(i as u64);
        let s = sample_events(&model, &[spec], &mc, cx.runner)?;
        let e = s.estimate(0)?;
        cx.report.replicates += s.n();
        cx.report.objects += s.objects;
        if cx.oracle {
            oracle_check(cx, &model, &spec, &mc, &codes(&s, 0))?;
        }
        let row = cx.row("estimate".into(), &model, &spec, spec.scale(), &e, t.elapsed().as_secs_f64());
        cx.push(row, codes(&s, 0));
    }
    Ok(())
}

/// Re-decides the first replicates with the raster oracle at scale/1024.
fn oracle_check(cx: &mut Ctx, model: &ModelSpec, spec: &EventSpec, mc: &McConfig, outcomes: &[u8]) -> Result<(), CliError> {
    let ModelSpec::Boolean(_) = model else {
        cx.report.oracle = Some(json!({ "skipped": "the raster oracle reads disc lists only" }));
        return Ok(());
    };
    let seeds = mc.seeds();
    let k = seeds.len().min(32);
    let mut agree = 0u64;
    for i in 0..k {
        let field = model.realize(&spec.region(), mc.eps, &mut seeds.stream(seeds.start + i))?;
        let o = raster_oracle_discs(field.discs().unwrap_or(&[]), spec, spec.scale() / 1024.0)?;
        agree += u64::from(o == (outcomes[i as usize] & 1 == 1));
    }
    let entry = json!({ "param": model.param(), "checked": k, "agree": agree });
    match &mut cx.report.oracle {
        Some(Value::Array(v)) => v.push(entry),
        _ => cx.report.oracle = Some(Value::Array(vec![entry])),
    }
    Ok(())
}

fn curve(cx: &mut Ctx) -> Result<(), CliError> {
    let params = cx.cfg.param_grid();
    for (ri, &r) in cx.cfg.radii.clone().iter().enumerate() {
        let t = Instant::now();
        let spec = EventSpec::cross(cx.cfg.kappa * r, r, cx.cfg.phase);
        // Coupled across the parameter grid, as in `crossing_curve`.
        let s = sample_param_grid(&cx.cfg.model, &params, &spec, &cx.mc(ri as u64), cx.runner)?;
        cx.report.replicates += s.n();
        cx.report.objects += s.objects;
        let wall = t.elapsed().as_secs_f64() / params.len() as f64;
        for (pi, &p) in params.iter().enumerate() {
            let row = cx.row("curve".into(), &cx.cfg.model.with_param(p), &spec, r, &s.estimate(pi)?, wall);
            cx.push(row, codes(&s, pi));
        }
    }
    Ok(())
}

fn bisect_config(cx: &Ctx) -> BisectConfig {
    let mut b = BisectConfig::new(cx.cfg.radii.clone(), cx.mc(0), cx.cfg.rel_tol);
    b.theta = cx.cfg.theta;
    if let Some(m) = cx.cfg.max_evals {
        b.max_evals = m;
    }
    b
}

fn classification_rows(cx: &mut Ctx, id: &str, model: &ModelSpec, evals: &[Classification], wall: f64) {
    for c in evals {
        let last = c.rows.last().expect("non-empty schedule");
        let spec = EventSpec::cross(3.0 * last.r, last.r, percolab_core::Phase::Occupied);
        cx.report.replicates += c.rows.iter().map(|r| r.occupied.n).sum::<u64>();
        let row = cx.row(id.into(), &model.with_param(c.param), &spec, last.r, &last.occupied, wall);
        let outcomes = serde_json::to_vec(&(c.verdict, c.trigger_r, &c.rows)).expect("serializable");
        cx.push(row, outcomes);
    }
}

fn critical(cx: &mut Ctx) -> Result<(), CliError> {
    let t = Instant::now();
    let (lo, hi) = (cx.cfg.params[0], cx.cfg.params[1]);
    let b = bisect_critical(&cx.cfg.model, lo, hi, &bisect_config(cx), cx.runner)?;
    let wall = t.elapsed().as_secs_f64() / b.evaluations.len().max(1) as f64;
    classification_rows(cx, "critical", &cx.cfg.model.clone(), &b.evaluations, wall);
    cx.report.verdicts.push(json!({
        "bracket": [b.lo, b.hi],
        "mid": b.mid(),
        "rel_width": b.rel_width(),
        "converged": b.converged,
        "classifications": b.evaluations.iter().map(|c| json!({ "param": c.param, "verdict": c.verdict, "trigger_r": c.trigger_r })).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn truncation(cx: &mut Ctx) -> Result<(), CliError> {
    let ModelSpec::Boolean(base) = &cx.cfg.model else { unreachable!("validated") };
    let law = base.law.clone();
    let (lo, hi) = (cx.cfg.params[0], cx.cfg.params[1]);
    for &cap in &cx.cfg.caps.clone() {
        let t = Instant::now();
        let rows = truncation_convergence(&law, &[cap], lo, hi, &bisect_config(cx), cx.runner)?;
        let tr = &rows[0];
        let model = ModelSpec::Boolean(percolab_core::BooleanModel { law: law.truncated(cap)?, ..base.clone() });
        let wall = t.elapsed().as_secs_f64() / tr.bracket.evaluations.len().max(1) as f64;
        classification_rows(cx, &format!("truncation[cap={cap}]"), &model, &tr.bracket.evaluations, wall);
        cx.report.verdicts.push(json!({ "cap": cap, "bracket": [tr.bracket.lo, tr.bracket.hi], "converged": tr.bracket.converged }));
    }
    Ok(())
}

fn arm(cx: &mut Ctx) -> Result<(), CliError> {
    let model = cx.cfg.model.clone();
    let mut pairs = vec![];
    for (k, &r) in cx.cfg.radii.clone().iter().enumerate() {
        if !wanted(cx.sel, k) {
            cx.skip();
            continue;
        }
        let t = Instant::now();
        let spec = EventSpec::origin_arm(r, cx.cfg.phase);
        let s = sample_events(&model, &[spec], &cx.mc(k as u64), cx.runner)?;
        let e = s.estimate(0)?;
        cx.report.replicates += s.n();
        cx.report.objects += s.objects;
        pairs.push((r, e.p_hat));
        let row = cx.row("arm".into(), &model, &spec, r, &e, t.elapsed().as_secs_f64());
        cx.push(row, codes(&s, 0));
    }
    if cx.sel.is_none() {
        cx.report.verdicts.push(match fit_log_log(&pairs) {
            Ok(f) => json!({ "slope": f.slope, "slope_ci": [f.slope_ci.0, f.slope_ci.1], "intercept": f.intercept, "r_squared": f.r_squared }),
            Err(e) => json!({ "fit": e.code(), "message": e.to_string() }),
        });
    }
    Ok(())
}

fn corr(cx: &mut Ctx) -> Result<(), CliError> {
    let t = Instant::now();
    let (f1, f2) = (cx.cfg.event.expect("validated"), cx.cfg.event2.expect("validated"));
    let (r, s) = (cx.cfg.radii[0], cx.cfg.separation.expect("validated"));
    let mc = cx.mc(0);
    let c = estimate_correlation(&cx.cfg.model, r, s, &f1, &f2, &mc, cx.runner)?;
    let samples = sample_events(&cx.cfg.model, &[f1, f2], &mc, cx.runner)?;
    cx.report.replicates += samples.n();
    cx.report.objects += samples.objects;
    let mut outcomes = codes(&samples, 0);
    outcomes.extend(codes(&samples, 1));
    let row = cx.stat_row("corr".into(), &cx.cfg.model, &(f1, f2), r, c.rho_hat, c.sigma, samples.bias, &mc.seeds(), t.elapsed().as_secs_f64());
    cx.push(row, outcomes);
    cx.report.verdicts.push(json!({
        "rho_hat": c.rho_hat,
        "sigma": c.sigma,
        "bound": c.bound,
        "within_bound": c.bound.map(|b| c.rho_hat.abs() <= b + 3.0 * c.sigma),
    }));
    Ok(())
}

fn russo(cx: &mut Ctx) -> Result<(), CliError> {
    let t = Instant::now();
    let ModelSpec::Boolean(b) = &cx.cfg.model else { unreachable!("validated") };
    let spec = cx.cfg.event.expect("validated");
    let st = cx.cfg.russo;
    let mc = cx.mc(0);
    let c = russo_check(b, &spec, st.m, st.p, st.dp, &mc, cx.runner)?;
    cx.report.replicates += c.n;
    let wall = 0.5 * t.elapsed().as_secs_f64();
    let outcomes = serde_json::to_vec(&c).expect("serializable");
    let seeds = mc.seeds();
    let fd = cx.stat_row("russo:fd".into(), &cx.cfg.model, &spec, spec.scale(), c.fd_derivative.0, c.fd_derivative.1, c.bias, &seeds, wall);
    let pv = cx.stat_row("russo:pivotal".into(), &cx.cfg.model, &spec, spec.scale(), c.pivotal_sum.0, c.pivotal_sum.1, c.bias, &seeds, wall);
    cx.push(fd, outcomes.clone());
    cx.push(pv, outcomes);
    cx.report.verdicts.push(json!({
        "difference": c.difference(),
        "combined_sigma": c.combined_sigma(),
        "agree_within_3_sigma": c.difference().abs() <= 3.0 * c.combined_sigma(),
    }));
    Ok(())
}

fn duality(cx: &mut Ctx) -> Result<(), CliError> {
    let deltas = cx.cfg.deltas.clone();
    let radii = cx.cfg.radii.clone();
    let mut i = 0;
    for (pi, p) in cx.cfg.param_grid().into_iter().enumerate() {
        for (ri, &r) in radii.iter().enumerate() {
            let block: Vec<usize> = (i..i + deltas.len()).collect();
            i += deltas.len();
            if !block.iter().any(|&j| wanted(cx.sel, j)) {
                block.iter().for_each(|_| cx.skip());
                continue;
            }
            let t = Instant::now();
            let model = cx.cfg.model.with_param(p);
            let mc = cx.mc((pi * radii.len() + ri) as u64);
            let abs: Vec<f64> = deltas.iter().map(|d| d * r).collect();
            let rows = duality_check(&model, r, &abs, &mc, cx.runner)?;
            cx.report.replicates += mc.n;
            let wall = t.elapsed().as_secs_f64() / rows.len() as f64;
            for d in rows {
                let (lo, hi) = wilson(d.agree, d.n, Z95);
                let spec = EventSpec::cross(r, r, percolab_core::Phase::Occupied);
                let row = ResultRow {
                    experiment: format!("duality-check[delta={}]", d.delta),
                    model_digest: digest_of(&model),
                    event_digest: digest_of(&(spec, d.delta)),
                    param: p,
                    r,
                    n: d.n,
                    p_hat: d.agreement(),
                    ci_low: lo,
                    ci_high: hi,
                    bias: 0.0,
                    unresolved_rate: 0.0,
                    master_seed: cx.cfg.master_seed,
                    replicate_range: range_label(&mc.seeds()),
                    wall_time: wall,
                };
                cx.push(row, d.agree.to_le_bytes().to_vec());
            }
        }
    }
    Ok(())
}

fn coverage(cx: &mut Ctx) -> Result<(), CliError> {
    let ModelSpec::Boolean(b) = &cx.cfg.model else { unreachable!("validated") };
    let law = b.law.clone();
    let r_pad = cx.cfg.r_pad.unwrap_or(f64::INFINITY);
    for (i, l) in cx.cfg.param_grid().into_iter().enumerate() {
        if !wanted(cx.sel, i) {
            cx.skip();
            continue;
        }
        let t = Instant::now();
        let model = cx.cfg.model.with_param(l);
        let c = void_probability_check(&law, l, r_pad, &cx.mc(i as u64), cx.runner)?;
        cx.report.replicates += c.empirical.n;
        let row = cx.row("coverage".into(), &model, &json!({ "void_at_origin": r_pad.to_string() }), r_pad, &c.empirical, t.elapsed().as_secs_f64());
        cx.push(row, vec![]);
        cx.report.verdicts.push(json!({ "param": l, "analytic": c.analytic, "empirical": c.empirical.p_hat, "z_score": c.z_score() }));
    }
    Ok(())
}
