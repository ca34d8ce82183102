//! Pixel-level event evaluation.
//!
//! Occupied pixels connect through their eight neighbours and vacant pixels
//! through their four edge neighbours. With this pairing, exactly one of
//! "occupied left-right crossing" and "vacant top-bottom crossing" holds on
//! every bitmap, the discrete counterpart of planar duality.

use crate::error::Result;
use crate::geometry::{PixelGrid, Rect, GEOM_EPS};
use crate::models::Occupancy;

use super::{EventSpec, Phase};

/// A painted pixel grid: `bits[k]` is the colour of pixel `k`'s center.
#[derive(Clone, Debug)]
pub struct Bitmap {
    pub grid: PixelGrid,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn rasterize(field: &(impl Occupancy + ?Sized), region: Rect, delta: f64) -> Result<Self> {
        let grid = PixelGrid::new(region, delta)?;
        let mut bits = vec![false; grid.len()];
        field.paint(&grid, &mut bits);
        Ok(Bitmap { grid, bits })
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Breadth-first search over pixels of colour `phase`, from `sources` to
    /// any pixel satisfying `target`.
    pub fn connects(
        &self,
        phase: Phase,
        sources: impl IntoIterator<Item = (usize, usize)>,
        target: impl Fn(usize, usize) -> bool,
    ) -> bool {
        let g = &self.grid;
        let want = phase == Phase::Occupied;
        let mut seen = vec![false; g.len()];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for (i, j) in sources {
            let k = g.index(i, j);
            if self.bits[k] == want && !seen[k] {
                seen[k] = true;
                stack.push((i, j));
            }
        }
        const N4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const N8: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let nbrs: &[(isize, isize)] = if want { &N8 } else { &N4 };
        while let Some((i, j)) = stack.pop() {
            if target(i, j) {
                return true;
            }
            for &(di, dj) in nbrs {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= g.nx as isize || nj >= g.ny as isize {
                    continue;
                }
                let k = g.index(ni as usize, nj as usize);
                if self.bits[k] == want && !seen[k] {
                    seen[k] = true;
                    stack.push((ni as usize, nj as usize));
                }
            }
        }
        false
    }

    fn left_right(&self, phase: Phase, min_y: f64) -> bool {
        let g = self.grid;
        let last = g.nx - 1;
        self.connects(phase, (0..g.ny).map(|j| (0, j)), |i, j| i == last && g.center(i, j).y >= min_y - GEOM_EPS)
    }

    fn bottom_top(&self, phase: Phase) -> bool {
        let g = self.grid;
        let last = g.ny - 1;
        self.connects(phase, (0..g.nx).map(|i| (i, 0)), |_, j| j == last)
    }

    fn on_border(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.grid.nx || j + 1 == self.grid.ny
    }

    /// Pixels whose cells meet the centred sup-box of half-width `r`.
    fn inner_box(&self, r: f64) -> Vec<(usize, usize)> {
        let g = self.grid;
        let c = g.region.center();
        let (hx, hy) = (0.5 * g.dx, 0.5 * g.dy);
        let cols = g.cols_within(c.x - r - hx, c.x + r + hx);
        let rows = g.rows_within(c.y - r - hy, c.y + r + hy);
        match (cols, rows) {
            (Some((i0, i1)), Some((j0, j1))) => (j0..=j1).flat_map(|j| (i0..=i1).map(move |i| (i, j))).collect(),
            _ => vec![],
        }
    }

    fn arm(&self, phase: Phase, r_inner: f64) -> bool {
        self.connects(phase, self.inner_box(r_inner), |i, j| self.on_border(i, j))
    }

    /// Evaluates `spec` on this bitmap, which must cover `spec.region()`.
    pub fn evaluate(&self, spec: &EventSpec) -> bool {
        match *spec {
            EventSpec::Cross { phase, .. } => self.left_right(phase, f64::NEG_INFINITY),
            EventSpec::CrossToSub { phase, y_low, .. } => self.left_right(phase, self.grid.region.y0 + y_low),
            EventSpec::Arm { phase, r_inner, .. } => self.arm(phase, r_inner),
            EventSpec::Circuit { phase, r_inner, .. } => !self.arm(phase.dual(), r_inner),
            EventSpec::OriginArm { phase, .. } => {
                let src = self.grid.pixel_of(self.grid.region.center());
                self.connects(phase, [src], |i, j| self.on_border(i, j))
            }
        }
    }

    /// Top-bottom crossing of the whole bitmap in the given phase.
    pub fn crosses_vertically(&self, phase: Phase) -> bool {
        self.bottom_top(phase)
    }
}
