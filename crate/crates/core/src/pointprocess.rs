//! Marked Poisson point processes in padded windows.
//!
//! Randomness is organised in [`RngStream`]s: each replicate gets a stream
//! keyed by a hash of `(master_seed, replicate_index)`, and sub-streams are
//! derived by hashing a tag into the parent key. No generator is ever shared
//! between replicates, so results do not depend on scheduling.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::{padding_for, RadiusLaw, TailBudget};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

const STREAM_DOMAIN: &[u8] = b"percolab/stream/v1";

/// Identifies the stream a realization was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub replicate: u64,
}

/// Deterministic random stream derived from `(master_seed, replicate)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u8; 32],
    rng: ChaCha8Rng,
    info: SeedInfo,
}

impl RngStream {
    pub fn new(master_seed: u64, replicate: u64) -> Self {
        let mut h = Sha256::new();
        h.update(STREAM_DOMAIN);
        h.update(master_seed.to_le_bytes());
        h.update(replicate.to_le_bytes());
        Self::from_key(h.finalize().into(), SeedInfo { master_seed, replicate })
    }

    fn from_key(key: [u8; 32], info: SeedInfo) -> Self {
        RngStream { key, rng: ChaCha8Rng::from_seed(key), info }
    }

    /// Independent sub-stream; does not advance `self`.
    pub fn child(&self, tag: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(b"child#");
        h.update(tag.to_le_bytes());
        Self::from_key(h.finalize().into(), self.info)
    }

    pub fn child_named(&self, name: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(b"child$");
        h.update(name.as_bytes());
        Self::from_key(h.finalize().into(), self.info)
    }

    pub fn seed_info(&self) -> SeedInfo {
        self.info
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Poisson variate: inversion below mean 30, Hörmann's PTRS above.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if !(mean > 0.0) {
            return 0;
        }
        if mean < 30.0 {
            self.poisson_inversion(mean)
        } else {
            self.poisson_ptrs(mean)
        }
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    }

    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let slam = mean.sqrt();
        let loglam = mean.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -mean + k * loglam - statrs::function::gamma::ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

/// A support point `(x, z)` with its optional marks. Marks that were not
/// requested are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub pos: Point,
    /// Radius (Boolean) or pull mark in `[0, 1)` (Voronoi, confetti).
    pub z: f64,
    /// Fall time (confetti).
    pub t: f64,
    /// Colour mark.
    pub s: f64,
    /// Thinning level mark.
    pub u: f64,
    /// Thinning slot mark.
    pub v: f64,
}

impl MarkedPoint {
    pub fn new(pos: Point, z: f64) -> Self {
        MarkedPoint { pos, z, t: 0.0, s: 0.0, u: 0.0, v: 0.0 }
    }
}

/// Which optional marks to draw, in the fixed order `t, s, (u, v)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MarkFlags {
    pub t: bool,
    pub s: bool,
    pub uv: bool,
}

impl MarkFlags {
    pub const NONE: MarkFlags = MarkFlags { t: false, s: false, uv: false };
    pub const COLORED: MarkFlags = MarkFlags { t: false, s: true, uv: false };
    pub const CONFETTI: MarkFlags = MarkFlags { t: true, s: true, uv: false };
    pub const THINNING: MarkFlags = MarkFlags { t: false, s: false, uv: true };
}

/// How the `z` mark is drawn.
#[derive(Clone, Copy, Debug)]
pub enum ZMark<'a> {
    Radius(&'a RadiusLaw),
    /// Radius conditioned on `Z ≥ t`.
    RadiusAtLeast(&'a RadiusLaw, f64),
    Uniform,
}

fn draw_point(region: &Rect, zmark: ZMark<'_>, stream: &mut RngStream, marks: MarkFlags) -> MarkedPoint {
    let x = region.x0 + stream.uniform() * region.width();
    let y = region.y0 + stream.uniform() * region.height();
    let z = match zmark {
        ZMark::Radius(law) => law.sample_radius(stream.open01()),
        ZMark::RadiusAtLeast(law, t) => law.sample_radius_at_least(t, stream.open01()),
        ZMark::Uniform => stream.uniform(),
    };
    let mut p = MarkedPoint::new(Point::new(x, y), z);
    if marks.t {
        p.t = stream.uniform();
    }
    if marks.s {
        p.s = stream.uniform();
    }
    if marks.uv {
        p.u = stream.uniform();
        p.v = stream.uniform();
    }
    p
}

/// Poisson process of intensity `lambda · dx · μ(dz)` on `region`.
pub fn sample_ppp(
    lambda: f64,
    region: &Rect,
    zmark: ZMark<'_>,
    stream: &mut RngStream,
    marks: MarkFlags,
) -> Vec<MarkedPoint> {
    let n = stream.poisson(lambda * region.area());
    (0..n).map(|_| draw_point(region, zmark, stream, marks)).collect()
}

/// Keeps the points with `u ≤ p` and `v ≤ 1/m`.
pub fn thin(points: &[MarkedPoint], p: f64, m: u32) -> Vec<MarkedPoint> {
    let slot = 1.0 / f64::from(m.max(1));
    points.iter().copied().filter(|q| q.u <= p && q.v <= slot).collect()
}

/// Which part of the Poisson process a [`Realization`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Every point of the padded window.
    Full,
    /// Only the points whose disc meets the window.
    Hitting,
}

/// One sampled configuration together with its truncation certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub window: Rect,
    pub padded_window: Rect,
    pub points: Vec<MarkedPoint>,
    pub budget: TailBudget,
    pub seed_info: SeedInfo,
    pub scope: Scope,
}

/// Square sampling region `center(W) + B∞(R + s)` with `R = max(half sup
/// diameter, 1)`: it contains both the window inflated by `s` and the box
/// whose complement the truncation bound is stated for.
pub fn padded_region(window: &Rect, padding: f64) -> Rect {
    let half = window.half_sup_diameter().max(1.0) + padding;
    let c = window.center();
    Rect::raw(c.x - half, c.y - half, c.x + half, c.y + half)
}

/// Truncation budget for a Boolean sample of `window`.
pub fn boolean_budget(lambda: f64, window: &Rect, law: &RadiusLaw, eps: f64) -> Result<TailBudget> {
    if lambda == 0.0 {
        return Ok(TailBudget { padding: 0.0, bias_bound: 0.0 });
    }
    padding_for(law, lambda, window.half_sup_diameter().max(1.0), eps)
}

/// Boolean configuration as seen from `window`: the discs of the padded
/// window that meet `window`.
///
/// Centres are drawn band by band in sup-distance from the window. In a band
/// at distance at least `e`, only radii `z ≥ e` can reach the window, so the
/// band is sampled with intensity `λ S(e)` and radii conditioned on `z ≥ e`,
/// then filtered to the discs that actually hit. The result has the same
/// law as filtering a full sample of the padded window.
pub fn realize_boolean(
    lambda: f64,
    window: &Rect,
    law: &RadiusLaw,
    eps: f64,
    stream: &mut RngStream,
) -> Result<Realization> {
    realize_boolean_with(lambda, window, law, eps, stream, MarkFlags::NONE, Scope::Hitting)
}

pub fn realize_boolean_with(
    lambda: f64,
    window: &Rect,
    law: &RadiusLaw,
    eps: f64,
    stream: &mut RngStream,
    marks: MarkFlags,
    scope: Scope,
) -> Result<Realization> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("intensity must be non-negative, got {lambda}")));
    }
    law.validate()?;
    let budget = boolean_budget(lambda, window, law, eps)?;
    let padded = padded_region(window, budget.padding);
    let seed_info = stream.seed_info();
    let points = match scope {
        Scope::Full => sample_ppp(lambda, &padded, ZMark::Radius(law), stream, marks),
        Scope::Hitting => sample_hitting(lambda, window, &padded, budget.padding, law, stream, marks),
    };
    Ok(Realization { window: *window, padded_window: padded, points, budget, seed_info, scope })
}

fn sample_hitting(
    lambda: f64,
    window: &Rect,
    padded: &Rect,
    padding: f64,
    law: &RadiusLaw,
    stream: &mut RngStream,
    marks: MarkFlags,
) -> Vec<MarkedPoint> {
    let mut out = Vec::new();
    if lambda == 0.0 {
        return out;
    }
    let mut take = |region: &Rect, threshold: f64, stream: &mut RngStream| {
        let mass = law.survival(threshold);
        if mass <= 0.0 {
            return;
        }
        let n = stream.poisson(lambda * region.area() * mass);
        for _ in 0..n {
            let p = draw_point(region, ZMark::RadiusAtLeast(law, threshold), stream, marks);
            if window.dist(p.pos) <= p.z {
                out.push(p);
            }
        }
    };
    take(window, 0.0, stream);
    let mut inner = 0.0;
    let mut outer = law.survival_quantile(0.5).min(padding);
    while inner < padding {
        for r in ring(&window.inflate(inner), &window.inflate(outer)) {
            take(&r, inner, stream);
        }
        inner = outer;
        outer = (2.0 * outer).min(padding);
    }
    for r in ring(&window.inflate(padding), padded) {
        take(&r, padding, stream);
    }
    out
}

/// Decomposes `outer \ inner` (with `inner ⊂ outer`) into up to four
/// rectangles: bottom, top, left, right.
fn ring(inner: &Rect, outer: &Rect) -> Vec<Rect> {
    let mut v = Vec::with_capacity(4);
    let mut push = |x0: f64, y0: f64, x1: f64, y1: f64| {
        if x1 > x0 && y1 > y0 {
            v.push(Rect::raw(x0, y0, x1, y1));
        }
    };
    push(outer.x0, outer.y0, outer.x1, inner.y0);
    push(outer.x0, inner.y1, outer.x1, outer.y1);
    push(outer.x0, inner.y0, inner.x0, inner.y1);
    push(inner.x1, inner.y0, outer.x1, inner.y1);
    v
}
