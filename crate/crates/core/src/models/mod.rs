//! The three percolation mechanisms.
//!
//! A model is realized over a query window into a [`Field`]: a disc list for
//! the Boolean model, where exact detectors apply, or a colour field for the
//! Voronoi and confetti models. Every field answers point queries through
//! [`Occupancy`] and can paint a whole pixel grid at once.

mod confetti;
mod step;
mod voronoi;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use confetti::{ConfettiField, ConfettiModel};
pub use step::{StepFunction, MAX_STEPS};
pub use voronoi::{VoronoiField, VoronoiModel};

use crate::distributions::{RadiusLaw, TailBudget};
use crate::error::{Error, Result};
use crate::geometry::{default_cell_size, Disc, PixelGrid, Point, Rect, SpatialGrid};
use crate::pointprocess::{realize_boolean_with, MarkFlags, MarkedPoint, RngStream, Scope};

/// Point-colour oracle: `true` means occupied (black).
pub trait Occupancy: Sync {
    fn occupied(&self, p: Point) -> bool;

    /// Writes the colour of every pixel center into `bits`.
    fn paint(&self, grid: &PixelGrid, bits: &mut [bool]) {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                bits[grid.index(i, j)] = self.occupied(grid.center(i, j));
            }
        }
    }
}

impl Occupancy for bool {
    fn occupied(&self, _: Point) -> bool {
        *self
    }

    fn paint(&self, _: &PixelGrid, bits: &mut [bool]) {
        bits.fill(*self);
    }
}

impl<F: Fn(Point) -> bool + Sync> Occupancy for F {
    fn occupied(&self, p: Point) -> bool {
        self(p)
    }
}

/// Poisson Boolean model `⋃ B(x, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BooleanModel {
    pub lambda: f64,
    pub law: RadiusLaw,
    /// Discs added to every realization (test hook).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forced: Vec<Disc>,
}

impl BooleanModel {
    pub fn new(lambda: f64, law: RadiusLaw) -> Result<Self> {
        let m = BooleanModel { lambda, law, forced: Vec::new() };
        m.validate()?;
        Ok(m)
    }

    pub fn with_forced(mut self, d: Disc) -> Self {
        self.forced.push(d);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("intensity must be non-negative, got {}", self.lambda)));
        }
        for d in &self.forced {
            Disc::new(d.center, d.radius)?;
        }
        self.law.validate()
    }

    /// Discs of one realization over `window`, with the truncation budget.
    pub fn discs(&self, window: &Rect, eps: f64, stream: &mut RngStream) -> Result<(Vec<Disc>, TailBudget)> {
        let f = self.realize(window, eps, stream)?;
        Ok((f.discs, f.budget))
    }

    pub fn realize(&self, window: &Rect, eps: f64, stream: &mut RngStream) -> Result<DiscField> {
        let r = realize_boolean_with(self.lambda, window, &self.law, eps, stream, MarkFlags::NONE, Scope::Hitting)?;
        let mut discs: Vec<Disc> = self.forced.clone();
        discs.extend(r.points.iter().map(|p| Disc::raw(p.pos.x, p.pos.y, p.z)));
        Ok(DiscField::new(discs, *window, r.budget))
    }

    /// Realization carrying thinning marks, for couplings across intensity.
    pub fn realize_marked(&self, window: &Rect, eps: f64, stream: &mut RngStream) -> Result<MarkedDiscs> {
        let r = realize_boolean_with(self.lambda, window, &self.law, eps, stream, MarkFlags::THINNING, Scope::Hitting)?;
        Ok(MarkedDiscs { points: r.points, forced: self.forced.clone(), window: *window, budget: r.budget })
    }
}

/// Boolean configuration with `(u, v)` marks on every point.
#[derive(Clone, Debug)]
pub struct MarkedDiscs {
    pub points: Vec<MarkedPoint>,
    pub forced: Vec<Disc>,
    pub window: Rect,
    pub budget: TailBudget,
}

impl MarkedDiscs {
    /// Discs of the points with `u ≤ p`, plus the forced discs. With base
    /// intensity `Λ` this is the Boolean model at intensity `p Λ`.
    /// The truncation bound is linear in the intensity, so it scales by `p`.
    pub fn thinned(&self, p: f64) -> DiscField {
        let mut discs = self.forced.clone();
        discs.extend(self.points.iter().filter(|q| q.u <= p).map(|q| Disc::raw(q.pos.x, q.pos.y, q.z)));
        let budget = TailBudget { padding: self.budget.padding, bias_bound: self.budget.bias_bound * p.clamp(0.0, 1.0) };
        DiscField::new(discs, self.window, budget)
    }
}

/// Disc list of a Boolean realization.
#[derive(Debug)]
pub struct DiscField {
    pub discs: Vec<Disc>,
    pub window: Rect,
    pub budget: TailBudget,
    grid: OnceLock<SpatialGrid>,
}

impl Clone for DiscField {
    fn clone(&self) -> Self {
        DiscField::new(self.discs.clone(), self.window, self.budget)
    }
}

impl DiscField {
    pub fn new(discs: Vec<Disc>, window: Rect, budget: TailBudget) -> Self {
        DiscField { discs, window, budget, grid: OnceLock::new() }
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.grid.get_or_init(|| {
            let cell = default_cell_size(&self.discs, self.window.width().max(self.window.height()));
            SpatialGrid::build_within(&self.discs, cell, &self.window.inflate(1.0)).expect("positive cell size")
        })
    }
}

impl Occupancy for DiscField {
    fn occupied(&self, p: Point) -> bool {
        if !self.window.inflate(1.0).contains(p) {
            return self.discs.iter().any(|d| d.contains(p));
        }
        let g = self.grid();
        let (i, j) = g.cell_of(p);
        g.bucket(i, j).iter().any(|&k| self.discs[k as usize].contains(p))
    }

    fn paint(&self, grid: &PixelGrid, bits: &mut [bool]) {
        bits.fill(false);
        for d in &self.discs {
            grid.fill_disc(d, bits, true);
        }
    }
}

/// Serializable model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Boolean(BooleanModel),
    Voronoi(VoronoiModel),
    Confetti(ConfettiModel),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Boolean(m) => m.validate(),
            ModelSpec::Voronoi(m) => m.validate(),
            ModelSpec::Confetti(m) => m.validate(),
        }
    }

    pub fn realize(&self, window: &Rect, eps: f64, stream: &mut RngStream) -> Result<Field> {
        Ok(match self {
            ModelSpec::Boolean(m) => Field::Discs(m.realize(window, eps, stream)?),
            ModelSpec::Voronoi(m) => Field::Voronoi(m.realize(window, eps, stream)?),
            ModelSpec::Confetti(m) => Field::Confetti(m.realize(window, eps, stream)?),
        })
    }

    /// The main parameter: `λ` for the Boolean model, `q` otherwise.
    pub fn param(&self) -> f64 {
        match self {
            ModelSpec::Boolean(m) => m.lambda,
            ModelSpec::Voronoi(m) => m.q,
            ModelSpec::Confetti(m) => m.q,
        }
    }

    pub fn with_param(&self, x: f64) -> ModelSpec {
        let mut m = self.clone();
        match &mut m {
            ModelSpec::Boolean(b) => b.lambda = x,
            ModelSpec::Voronoi(v) => v.q = x,
            ModelSpec::Confetti(c) => c.q = x,
        }
        m
    }
}

/// One realized model over a query window.
// One short-lived value per realization, so variant sizes do not matter.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Field {
    Discs(DiscField),
    Voronoi(VoronoiField),
    Confetti(ConfettiField),
}

impl Field {
    /// Certified probability that truncation changed the configuration
    /// inside the window.
    pub fn bias(&self) -> f64 {
        match self {
            Field::Discs(d) => d.budget.bias_bound,
            Field::Voronoi(v) => v.bias(),
            Field::Confetti(_) => 0.0,
        }
    }

    pub fn discs(&self) -> Option<&[Disc]> {
        match self {
            Field::Discs(d) => Some(&d.discs),
            _ => None,
        }
    }

    /// Number of primitive objects (discs, seeds, confetti generated so far).
    pub fn size(&self) -> usize {
        match self {
            Field::Discs(d) => d.discs.len(),
            Field::Voronoi(v) => v.seeds().len(),
            Field::Confetti(c) => c.generated(),
        }
    }
}

impl Occupancy for Field {
    fn occupied(&self, p: Point) -> bool {
        match self {
            Field::Discs(d) => d.occupied(p),
            Field::Voronoi(v) => v.occupied(p),
            Field::Confetti(c) => c.occupied(p),
        }
    }

    fn paint(&self, grid: &PixelGrid, bits: &mut [bool]) {
        match self {
            Field::Discs(d) => d.paint(grid, bits),
            Field::Voronoi(v) => v.paint(grid, bits),
            Field::Confetti(c) => c.paint(grid, bits),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn zero_intensity_has_no_discs() {
        let m = BooleanModel::new(0.0, RadiusLaw::Constant { radius: 1.0 }).unwrap();
        let (d, b) = m.discs(&rect(0.0, 0.0, 10.0, 10.0), 1e-3, &mut RngStream::new(1, 1)).unwrap();
        assert!(d.is_empty());
        assert_eq!(b.bias_bound, 0.0);
    }

    #[test]
    fn forced_disc_is_present() {
        let m = BooleanModel::new(0.0, RadiusLaw::Constant { radius: 1.0 })
            .unwrap()
            .with_forced(Disc::new(Point::new(5.0, 5.0), 10.0).unwrap());
        let f = m.realize(&rect(0.0, 0.0, 10.0, 10.0), 1e-3, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(f.discs.len(), 1);
        assert!(f.occupied(Point::new(0.0, 0.0)) && f.occupied(Point::new(10.0, 10.0)));
    }

    #[test]
    fn mean_disc_count_over_padded_window() {
        let law = RadiusLaw::Constant { radius: 1.0 };
        let w = rect(0.0, 0.0, 10.0, 10.0);
        let reps = 2000;
        let mut total = 0usize;
        let mut area = 0.0;
        for i in 0..reps {
            let mut s = RngStream::new(4, i);
            let r = realize_boolean_with(0.3, &w, &law, 1e-3, &mut s, MarkFlags::NONE, Scope::Full).unwrap();
            total += r.points.len();
            area = r.padded_window.area();
        }
        let expect = 0.3 * area;
        let mean = total as f64 / reps as f64;
        assert!((mean - expect).abs() < 5.0 * (expect / reps as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn disc_field_point_queries_match_paint() {
        let m = BooleanModel::new(0.4, RadiusLaw::Uniform { low: 0.5, high: 1.5 }).unwrap();
        let w = rect(0.0, 0.0, 6.0, 4.0);
        let f = m.realize(&w, 1e-3, &mut RngStream::new(2, 0)).unwrap();
        let g = PixelGrid::new(w, 0.05).unwrap();
        let mut bits = vec![false; g.len()];
        f.paint(&g, &mut bits);
        let mut slow = vec![false; g.len()];
        (|p: Point| f.discs.iter().any(|d| d.contains(p))).paint(&g, &mut slow);
        assert_eq!(bits, slow);
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(f.occupied(g.center(i, j)), bits[g.index(i, j)]);
            }
        }
    }

    #[test]
    fn thinning_is_monotone() {
        let m = BooleanModel::new(1.0, RadiusLaw::Constant { radius: 0.5 }).unwrap();
        let md = m.realize_marked(&rect(0.0, 0.0, 5.0, 5.0), 1e-3, &mut RngStream::new(3, 3)).unwrap();
        let a = md.thinned(0.3);
        let b = md.thinned(0.6);
        assert!(a.discs.iter().all(|d| b.discs.contains(d)));
        assert_eq!(md.thinned(1.0).discs.len(), md.points.len());
    }

    #[test]
    fn model_spec_json() {
        let j = r#"{"model":"boolean","lambda":0.3,"law":{"kind":"pareto_tail","alpha":1.0,"x_min":1.0}}"#;
        let m: ModelSpec = serde_json::from_str(j).unwrap();
        assert_eq!(m.param(), 0.3);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"model":"boolean","lambda":0.3,"law":{"kind":"constant","radius":1.0},"extra":1}"#).is_err());
        let j = r#"{"model":"voronoi","q":0.5,"g0":[[0.0,1.0]],"g1":[[0.0,1.0]]}"#;
        let m: ModelSpec = serde_json::from_str(j).unwrap();
        assert_eq!(m.with_param(0.7).param(), 0.7);
    }
}
