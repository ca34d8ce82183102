use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Occupancy, StepFunction};
use crate::error::{Error, Result};
use crate::geometry::{Disc, PixelGrid, Point, Rect, SpatialGrid, GEOM_EPS};
use crate::pointprocess::{sample_ppp, MarkFlags, RngStream, ZMark};

/// Confetti (dead leaves) percolation.
///
/// Discs rain down as a Poisson process in space and time. A confetto with
/// colour mark `s ≤ q` is black with radius `g0(z)`, otherwise white with
/// radius `g1(z)`. Each point takes the colour of the first confetto that
/// covers it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfettiModel {
    pub q: f64,
    pub g0: StepFunction,
    pub g1: StepFunction,
}

/// Number of time layers generated before giving up on coverage.
pub const MAX_LAYERS: usize = 64;

impl ConfettiModel {
    pub fn new(q: f64, g0: StepFunction, g1: StepFunction) -> Result<Self> {
        let m = ConfettiModel { q, g0, g1 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!("q must lie in [0, 1], got {}", self.q)));
        }
        Ok(())
    }

    /// `min(G0(0), G1(0))`.
    pub fn g_min(&self) -> f64 {
        self.g0.min().min(self.g1.min())
    }

    pub fn g_max(&self) -> f64 {
        self.g0.max().max(self.g1.max())
    }

    /// First time horizon, `4 / (π g_min²)`: at least four expected covering
    /// arrivals per point.
    pub fn initial_horizon(&self) -> f64 {
        4.0 / (std::f64::consts::PI * self.g_min() * self.g_min())
    }

    /// Radii are bounded by `g_max`, so padding by it loses nothing.
    pub fn realize(&self, window: &Rect, _eps: f64, stream: &mut RngStream) -> Result<ConfettiField> {
        self.validate()?;
        let field = ConfettiField {
            model: self.clone(),
            padded: window.inflate(self.g_max()),
            stream: stream.child_named("confetti"),
            t0: self.initial_horizon(),
            layers: (0..MAX_LAYERS).map(|_| OnceLock::new()).collect(),
        };
        Ok(field)
    }
}

#[derive(Debug)]
struct Layer {
    /// `(disc, black, t)` sorted by fall time.
    confetti: Vec<(Disc, bool, f64)>,
    grid: SpatialGrid,
}

/// Lazily generated confetti rain over a window. Time layer `k` holds the
/// arrivals with `t ∈ (T_{k−1}, T_k]`, `T_k = T_0 2^k`, drawn from its own
/// sub-stream, so extending the horizon never changes earlier layers.
#[derive(Debug)]
pub struct ConfettiField {
    model: ConfettiModel,
    padded: Rect,
    stream: RngStream,
    t0: f64,
    layers: Vec<OnceLock<Layer>>,
}

impl Clone for ConfettiField {
    fn clone(&self) -> Self {
        ConfettiField {
            model: self.model.clone(),
            padded: self.padded,
            stream: self.stream.clone(),
            t0: self.t0,
            layers: (0..MAX_LAYERS).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl ConfettiField {
    /// Upper end of layer `k`'s time range.
    pub fn horizon(&self, k: usize) -> f64 {
        self.t0 * 2f64.powi(k as i32)
    }

    fn layer(&self, k: usize) -> &Layer {
        self.layers[k].get_or_init(|| {
            let lo = if k == 0 { 0.0 } else { self.horizon(k - 1) };
            let dt = self.horizon(k) - lo;
            let mut s = self.stream.child(k as u64);
            let pts = sample_ppp(dt, &self.padded, ZMark::Uniform, &mut s, MarkFlags::CONFETTI);
            let mut confetti: Vec<(Disc, bool, f64)> = pts
                .iter()
                .map(|p| {
                    let black = p.s <= self.model.q;
                    let r = if black { self.model.g0.eval(p.z) } else { self.model.g1.eval(p.z) };
                    (Disc::raw(p.pos.x, p.pos.y, r), black, lo + p.t * dt)
                })
                .collect();
            confetti.sort_by(|a, b| a.2.total_cmp(&b.2));
            let discs: Vec<Disc> = confetti.iter().map(|c| c.0).collect();
            let grid = SpatialGrid::build(&discs, self.model.g_max()).expect("positive cell size");
            Layer { confetti, grid }
        })
    }

    /// Total confetti generated so far.
    pub fn generated(&self) -> usize {
        self.layers.iter().filter_map(|l| l.get()).map(|l| l.confetti.len()).sum()
    }

    /// Fall time and colour of the first confetto covering `p`, searching
    /// layers up to `max_layer` inclusive.
    pub fn first_cover(&self, p: Point, max_layer: usize) -> Option<(f64, bool)> {
        for k in 0..=max_layer.min(MAX_LAYERS - 1) {
            let layer = self.layer(k);
            let (i, j) = layer.grid.cell_of(p);
            let mut best: Option<(f64, bool)> = None;
            for &idx in layer.grid.bucket(i, j) {
                let (d, black, t) = &layer.confetti[idx as usize];
                if d.contains(p) && best.is_none_or(|b| *t < b.0) {
                    best = Some((*t, *black));
                }
            }
            if best.is_some() {
                return best;
            }
        }
        None
    }
}

impl Occupancy for ConfettiField {
    /// Points left uncovered after every layer (probability zero in
    /// practice) are reported vacant.
    fn occupied(&self, p: Point) -> bool {
        self.first_cover(p, MAX_LAYERS - 1).is_some_and(|c| c.1)
    }

    fn paint(&self, grid: &PixelGrid, bits: &mut [bool]) {
        let mut covered = vec![false; grid.len()];
        let mut remaining = grid.len();
        bits.fill(false);
        for k in 0..MAX_LAYERS {
            for (d, black, _) in &self.layer(k).confetti {
                let r = d.radius + GEOM_EPS;
                let Some((j0, j1)) = grid.rows_within(d.center.y - r, d.center.y + r) else { continue };
                for j in j0..=j1 {
                    let y = grid.center(0, j).y - d.center.y;
                    let w2 = r * r - y * y;
                    if w2 < 0.0 {
                        continue;
                    }
                    let w = w2.sqrt();
                    let Some((i0, i1)) = grid.cols_within(d.center.x - w, d.center.x + w) else { continue };
                    for i in i0..=i1 {
                        let idx = grid.index(i, j);
                        if !covered[idx] {
                            covered[idx] = true;
                            bits[idx] = *black;
                            remaining -= 1;
                        }
                    }
                }
                if remaining == 0 {
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(q: f64, g: f64) -> ConfettiModel {
        ConfettiModel::new(q, StepFunction::constant(g).unwrap(), StepFunction::constant(g).unwrap()).unwrap()
    }

    #[test]
    fn horizon_doubles() {
        let m = model(0.5, 1.0);
        let f = m.realize(&Rect::new(0.0, 0.0, 2.0, 2.0).unwrap(), 0.0, &mut RngStream::new(0, 0)).unwrap();
        assert!((f.horizon(0) - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((f.horizon(3) - 8.0 * f.horizon(0)).abs() < 1e-12);
    }

    #[test]
    fn extreme_q_is_constant() {
        let w = Rect::new(0.0, 0.0, 5.0, 5.0).unwrap();
        for (q, colour) in [(1.0, true), (0.0, false)] {
            let f = model(q, 0.6).realize(&w, 0.0, &mut RngStream::new(2, 0)).unwrap();
            let g = PixelGrid::new(w, 0.05).unwrap();
            let mut bits = vec![!colour; g.len()];
            f.paint(&g, &mut bits);
            assert!(bits.iter().all(|&b| b == colour));
        }
    }

    #[test]
    fn paint_matches_point_queries() {
        let w = Rect::new(0.0, 0.0, 4.0, 3.0).unwrap();
        let m = ConfettiModel::new(
            0.5,
            StepFunction::new(vec![(0.0, 0.3), (0.5, 0.8)]).unwrap(),
            StepFunction::new(vec![(0.0, 0.4), (0.7, 1.2)]).unwrap(),
        )
        .unwrap();
        let f = m.realize(&w, 0.0, &mut RngStream::new(3, 1)).unwrap();
        let g = PixelGrid::new(w, 0.03).unwrap();
        let mut bits = vec![false; g.len()];
        f.paint(&g, &mut bits);
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(bits[g.index(i, j)], f.occupied(g.center(i, j)));
            }
        }
    }

    #[test]
    fn earlier_fall_wins() {
        let w = Rect::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let f = model(0.5, 1.0).realize(&w, 0.0, &mut RngStream::new(9, 9)).unwrap();
        let p = Point::new(2.0, 2.0);
        let (t, black) = f.first_cover(p, MAX_LAYERS - 1).unwrap();
        let layer = f.layer(0);
        let earliest = layer
            .confetti
            .iter()
            .filter(|c| c.0.contains(p))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap();
        assert_eq!((t, black), (earliest.2, earliest.1));
    }

    #[test]
    fn coverage_probability_by_horizon() {
        let g = 0.5;
        let m = model(0.5, g);
        let w = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let n = 20_000u64;
        let mut by_t0 = 0;
        let mut by_t1 = 0;
        for i in 0..n {
            let f = m.realize(&w, 0.0, &mut RngStream::new(10, i)).unwrap();
            match f.first_cover(Point::new(0.5, 0.5), 1) {
                Some((t, _)) if t <= f.horizon(0) => {
                    by_t0 += 1;
                    by_t1 += 1;
                }
                Some(_) => by_t1 += 1,
                None => {}
            }
        }
        let t0 = m.initial_horizon();
        for (count, t) in [(by_t0, t0), (by_t1, 2.0 * t0)] {
            let p = 1.0 - (-std::f64::consts::PI * g * g * t).exp();
            let f = count as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-4, "{f} vs {p}");
        }
    }

    #[test]
    fn raising_q_only_adds_black() {
        let w = Rect::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let g = PixelGrid::new(w, 0.05).unwrap();
        let mut prev = vec![false; g.len()];
        for q in [0.2, 0.4, 0.6, 0.8] {
            let f = model(q, 0.7).realize(&w, 0.0, &mut RngStream::new(12, 0)).unwrap();
            let mut bits = vec![false; g.len()];
            f.paint(&g, &mut bits);
            assert!(prev.iter().zip(&bits).all(|(&a, &b)| !a || b));
            prev = bits;
        }
    }
}
