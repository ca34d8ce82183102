use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{Occupancy, StepFunction};
use crate::error::{Error, Result};
use crate::geometry::{Disc, PixelGrid, Point, Rect, SpatialGrid};
use crate::pointprocess::{sample_ppp, MarkFlags, MarkedPoint, RngStream, ZMark};

/// Weighted Poisson Voronoi percolation.
///
/// Seeds form a unit-intensity Poisson process with marks `z` (pull level)
/// and `s` (colour). A seed is black when `s ≤ q`; a point `y` takes the
/// colour of the seed minimizing `|y − x| / G(z)`, with `G = g0` for black
/// seeds and `G = g1` for white ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoronoiModel {
    pub q: f64,
    pub g0: StepFunction,
    pub g1: StepFunction,
}

impl VoronoiModel {
    pub fn new(q: f64, g0: StepFunction, g1: StepFunction) -> Result<Self> {
        let m = VoronoiModel { q, g0, g1 };
        m.validate()?;
        Ok(m)
    }

    /// Ordinary Voronoi percolation (`G0 = G1 ≡ 1`).
    pub fn unweighted(q: f64) -> Result<Self> {
        Self::new(q, StepFunction::constant(1.0)?, StepFunction::constant(1.0)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!("q must lie in [0, 1], got {}", self.q)));
        }
        Ok(())
    }

    /// Smallest pull `a`.
    pub fn pull_min(&self) -> f64 {
        self.g0.min().min(self.g1.min())
    }

    /// Largest pull `b`.
    pub fn pull_max(&self) -> f64 {
        self.g0.max().max(self.g1.max())
    }

    pub fn is_black(&self, p: &MarkedPoint) -> bool {
        p.s <= self.q
    }

    pub fn pull(&self, p: &MarkedPoint) -> f64 {
        if self.is_black(p) {
            self.g0.eval(p.z)
        } else {
            self.g1.eval(p.z)
        }
    }

    pub fn realize(&self, window: &Rect, eps: f64, stream: &mut RngStream) -> Result<VoronoiField> {
        self.validate()?;
        let (ell, bias) = void_radius(window, eps);
        let padded = window.inflate(ell * (1.0 + self.pull_max() / self.pull_min()));
        let seeds = sample_ppp(1.0, &padded, ZMark::Uniform, stream, MarkFlags::COLORED);
        if seeds.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(VoronoiField::build(self.clone(), seeds, *window, padded, bias))
    }
}

/// Smallest `ℓ` (on a 1% geometric grid) such that, with the window tiled
/// by squares of side `ℓ/√2`, the union bound `N e^{−ℓ²/2}` on some square
/// being empty of unit-intensity seeds is at most `eps`. Returns `(ℓ, bound)`.
pub fn void_radius(window: &Rect, eps: f64) -> (f64, f64) {
    let bound = |ell: f64| {
        let c = ell / std::f64::consts::SQRT_2;
        let n = (window.width() / c).ceil() * (window.height() / c).ceil();
        n * (-ell * ell / 2.0).exp()
    };
    let mut ell = 1.0;
    while bound(ell) > eps {
        ell *= 1.01;
    }
    (ell, bound(ell))
}

/// Realized Voronoi colour field.
#[derive(Clone, Debug)]
pub struct VoronoiField {
    model: VoronoiModel,
    seeds: Vec<MarkedPoint>,
    pulls: Vec<f64>,
    grid: SpatialGrid,
    window: Rect,
    padded: Rect,
    bias: f64,
}

const SEED_CELL: f64 = 1.0;
const BLOCK: usize = 8;

impl VoronoiField {
    pub fn build(model: VoronoiModel, seeds: Vec<MarkedPoint>, window: Rect, padded: Rect, bias: f64) -> Self {
        let pts: Vec<Disc> = seeds.iter().map(|p| Disc::raw(p.pos.x, p.pos.y, 0.0)).collect();
        let grid = SpatialGrid::build(&pts, SEED_CELL).expect("positive cell size");
        let pulls = seeds.iter().map(|p| model.pull(p)).collect();
        VoronoiField { model, seeds, pulls, grid, window, padded, bias }
    }

    pub fn seeds(&self) -> &[MarkedPoint] {
        &self.seeds
    }

    pub fn model(&self) -> &VoronoiModel {
        &self.model
    }

    pub fn padded_window(&self) -> Rect {
        self.padded
    }

    /// Union bound on some window point lacking a seed within `ℓ`.
    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Same seeds and marks, different `q`.
    pub fn with_q(&self, q: f64) -> VoronoiField {
        let model = VoronoiModel { q, ..self.model.clone() };
        VoronoiField::build(model, self.seeds.clone(), self.window, self.padded, self.bias)
    }

    fn ratio(&self, k: usize, y: Point) -> f64 {
        self.seeds[k].pos.dist(y) / self.pulls[k]
    }

    /// Strict total order on candidate owners of `y`.
    fn better(&self, a: usize, ra: f64, b: usize, rb: f64) -> bool {
        let (p, q) = (&self.seeds[a], &self.seeds[b]);
        ra.total_cmp(&rb)
            .then(p.pos.x.total_cmp(&q.pos.x))
            .then(p.pos.y.total_cmp(&q.pos.y))
            .then(p.z.total_cmp(&q.z))
            .then(p.s.total_cmp(&q.s))
            == Ordering::Less
    }

    /// Index of the seed owning `y`: ring-by-ring search over grid cells,
    /// stopped once no unexplored seed can beat the incumbent.
    pub fn owner(&self, y: Point) -> usize {
        let c = self.grid.cell_size();
        let b = self.model.pull_max();
        let (ci, cj) = self.grid.cell_of(y);
        let (i0, i1, j0, j1) = self.grid.index_bounds();
        let mut best: Option<(usize, f64)> = None;
        let visit = |i: i64, j: i64, best: &mut Option<(usize, f64)>| {
            for &k in self.grid.bucket(i, j) {
                let k = k as usize;
                let r = self.ratio(k, y);
                if best.is_none_or(|(bk, br)| self.better(k, r, bk, br)) {
                    *best = Some((k, r));
                }
            }
        };
        for ring in 0i64.. {
            if ring == 0 {
                visit(ci, cj, &mut best);
            } else {
                for i in ci - ring..=ci + ring {
                    visit(i, cj - ring, &mut best);
                    visit(i, cj + ring, &mut best);
                }
                for j in cj - ring + 1..=cj + ring - 1 {
                    visit(ci - ring, j, &mut best);
                    visit(ci + ring, j, &mut best);
                }
            }
            // Every unexplored seed lies at distance ≥ ring · c.
            if let Some((_, r)) = best {
                if ring as f64 * c / b > r {
                    break;
                }
            }
            if ci - ring <= i0 && ci + ring >= i1 && cj - ring <= j0 && cj + ring >= j1 {
                break;
            }
        }
        best.expect("field has at least one seed").0
    }

    /// Exhaustive owner search, for checking the pruned one.
    pub fn owner_exhaustive(&self, y: Point) -> usize {
        let mut best = 0;
        let mut br = self.ratio(0, y);
        for k in 1..self.seeds.len() {
            let r = self.ratio(k, y);
            if self.better(k, r, best, br) {
                best = k;
                br = r;
            }
        }
        best
    }

    fn paint_block(&self, grid: &PixelGrid, bits: &mut [bool], (ia, ib): (usize, usize), (ja, jb): (usize, usize), cand: &mut Vec<usize>) {
        let lo = grid.center(ia, ja);
        let hi = grid.center(ib, jb);
        let block = Rect::raw(lo.x, lo.y, hi.x, hi.y);
        let o = self.owner(block.center());
        let far = block
            .corners()
            .iter()
            .map(|c| c.dist(self.seeds[o].pos))
            .fold(0.0, f64::max);
        let bound = far / self.pulls[o] * (1.0 + 1e-12);
        cand.clear();
        let reach = bound * self.model.pull_max();
        self.grid.for_each_candidate(&block.inflate(reach), |k| {
            let k = k as usize;
            if block.dist(self.seeds[k].pos) / self.pulls[k] <= bound {
                cand.push(k);
            }
        });
        cand.sort_unstable();
        cand.dedup();
        let black = self.model.is_black(&self.seeds[o]);
        if cand.iter().all(|&k| self.model.is_black(&self.seeds[k]) == black) {
            for j in ja..=jb {
                bits[grid.index(ia, j)..=grid.index(ib, j)].fill(black);
            }
            return;
        }
        for j in ja..=jb {
            for i in ia..=ib {
                let y = grid.center(i, j);
                let mut best = cand[0];
                let mut br = self.ratio(best, y);
                for &k in &cand[1..] {
                    let r = self.ratio(k, y);
                    if self.better(k, r, best, br) {
                        best = k;
                        br = r;
                    }
                }
                bits[grid.index(i, j)] = self.model.is_black(&self.seeds[best]);
            }
        }
    }
}

impl Occupancy for VoronoiField {
    fn occupied(&self, p: Point) -> bool {
        self.model.is_black(&self.seeds[self.owner(p)])
    }

    fn paint(&self, grid: &PixelGrid, bits: &mut [bool]) {
        let mut cand = Vec::new();
        for jb in (0..grid.ny).step_by(BLOCK) {
            for ib in (0..grid.nx).step_by(BLOCK) {
                let ie = (ib + BLOCK - 1).min(grid.nx - 1);
                let je = (jb + BLOCK - 1).min(grid.ny - 1);
                self.paint_block(grid, bits, (ib, ie), (jb, je), &mut cand);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(x: f64, y: f64, z: f64, s: f64) -> MarkedPoint {
        MarkedPoint { s, ..MarkedPoint::new(Point::new(x, y), z) }
    }

    fn window() -> Rect {
        Rect::new(-5.0, -5.0, 5.0, 5.0).unwrap()
    }

    fn field(model: VoronoiModel, seeds: Vec<MarkedPoint>) -> VoronoiField {
        VoronoiField::build(model, seeds, window(), window(), 0.0)
    }

    #[test]
    fn single_black_seed_paints_everything() {
        let f = field(VoronoiModel::unweighted(0.5).unwrap(), vec![seed(3.0, 1.0, 0.2, 0.1)]);
        for p in [Point::new(-4.0, -4.0), Point::new(0.0, 0.0), Point::new(4.9, 4.9)] {
            assert!(f.occupied(p));
        }
        let g = PixelGrid::new(window(), 0.5).unwrap();
        let mut bits = vec![false; g.len()];
        f.paint(&g, &mut bits);
        assert!(bits.iter().all(|&b| b));
    }

    #[test]
    fn ordinary_voronoi_cells() {
        let f = field(VoronoiModel::unweighted(0.5).unwrap(), vec![seed(0.0, 0.0, 0.5, 0.2), seed(2.0, 0.0, 0.5, 0.8)]);
        assert!(f.occupied(Point::new(0.5, 0.0)));
        assert!(!f.occupied(Point::new(1.5, 0.0)));
    }

    #[test]
    fn weighted_cell_bulges() {
        let m = VoronoiModel::new(0.5, StepFunction::constant(2.0).unwrap(), StepFunction::constant(1.0).unwrap()).unwrap();
        let f = field(m, vec![seed(0.0, 0.0, 0.5, 0.2), seed(2.0, 0.0, 0.5, 0.8)]);
        // Ratios 1.2 / 2 = 0.6 against 0.8 / 1.
        assert!(f.occupied(Point::new(1.2, 0.0)));
        assert!(!f.occupied(Point::new(1.5, 0.0)));
    }

    #[test]
    fn constant_colours_at_extreme_q() {
        let w = Rect::new(0.0, 0.0, 6.0, 6.0).unwrap();
        for (q, colour) in [(1.0, true), (0.0, false)] {
            let f = VoronoiModel::unweighted(q).unwrap().realize(&w, 1e-3, &mut RngStream::new(1, 0)).unwrap();
            let g = PixelGrid::new(w, 0.1).unwrap();
            let mut bits = vec![!colour; g.len()];
            f.paint(&g, &mut bits);
            assert!(bits.iter().all(|&b| b == colour));
        }
    }

    fn weighted_model(q: f64) -> VoronoiModel {
        let g0 = StepFunction::new(vec![(0.0, 0.5), (0.3, 1.0), (0.8, 2.5)]).unwrap();
        let g1 = StepFunction::new(vec![(0.0, 0.7), (0.5, 1.8)]).unwrap();
        VoronoiModel::new(q, g0, g1).unwrap()
    }

    #[test]
    fn pruned_search_matches_exhaustive() {
        let w = Rect::new(0.0, 0.0, 12.0, 8.0).unwrap();
        let f = weighted_model(0.45).realize(&w, 1e-3, &mut RngStream::new(5, 0)).unwrap();
        let mut s = RngStream::new(6, 0);
        for _ in 0..1000 {
            let y = Point::new(w.x0 + s.uniform() * w.width(), w.y0 + s.uniform() * w.height());
            assert_eq!(f.owner(y), f.owner_exhaustive(y), "{y:?}");
        }
    }

    #[test]
    fn block_paint_matches_point_queries() {
        let w = Rect::new(0.0, 0.0, 10.0, 7.0).unwrap();
        for rep in 0..5 {
            let f = weighted_model(0.5).realize(&w, 1e-3, &mut RngStream::new(7, rep)).unwrap();
            let g = PixelGrid::new(w, 0.037).unwrap();
            let mut fast = vec![false; g.len()];
            f.paint(&g, &mut fast);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let y = g.center(i, j);
                    let slow = f.model().is_black(&f.seeds()[f.owner_exhaustive(y)]);
                    assert_eq!(fast[g.index(i, j)], slow, "pixel {i},{j}");
                }
            }
        }
    }

    #[test]
    fn raising_q_only_adds_black() {
        let w = Rect::new(0.0, 0.0, 8.0, 8.0).unwrap();
        let base = weighted_model(0.3).realize(&w, 1e-3, &mut RngStream::new(8, 0)).unwrap();
        let g = PixelGrid::new(w, 0.05).unwrap();
        let mut prev = vec![false; g.len()];
        base.paint(&g, &mut prev);
        for q in [0.4, 0.5, 0.6, 0.9] {
            let f = base.with_q(q);
            let mut bits = vec![false; g.len()];
            f.paint(&g, &mut bits);
            assert!(prev.iter().zip(&bits).all(|(&a, &b)| !a || b));
            prev = bits;
        }
    }

    #[test]
    fn void_radius_meets_budget() {
        let (ell, b) = void_radius(&window(), 1e-3);
        assert!(b <= 1e-3);
        let (_, b2) = (ell / 1.01, {
            let c = ell / 1.01 / std::f64::consts::SQRT_2;
            (10.0 / c).ceil().powi(2) * (-(ell / 1.01).powi(2) / 2.0).exp()
        });
        assert!(b2 > 1e-3);
    }
}
