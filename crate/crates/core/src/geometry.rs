//! Planar primitives: points, closed discs, closed rectangles, sup-norm
//! boxes, and the clipped-convex intersection predicates that exact
//! connectivity detection is built on.
//!
//! Every set is closed. Tangent configurations count as intersecting, with
//! an absolute slack of [`GEOM_EPS`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for in/on tests, in length units.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    /// Sup-norm of the vector from the origin.
    pub fn sup_norm(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn translate(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("disc center must be finite"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("disc radius must be positive and finite, got {radius}")));
        }
        Ok(Disc { center, radius })
    }

    /// Unchecked constructor for hot paths where the inputs are known valid.
    pub(crate) const fn raw(x: f64, y: f64, radius: f64) -> Self {
        Disc { center: Point { x, y }, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        let r = self.radius + GEOM_EPS;
        self.center.dist2(p) <= r * r
    }

    pub fn bbox(&self) -> Rect {
        Rect {
            x0: self.center.x - self.radius,
            y0: self.center.y - self.radius,
            x1: self.center.x + self.radius,
            y1: self.center.y + self.radius,
        }
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// Closed axis-parallel rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    /// Closest point of the segment to `p`.
    pub fn closest(&self, p: Point) -> Point {
        let vx = self.b.x - self.a.x;
        let vy = self.b.y - self.a.y;
        let len2 = vx * vx + vy * vy;
        if len2 == 0.0 {
            return self.a;
        }
        let t = (((p.x - self.a.x) * vx + (p.y - self.a.y) * vy) / len2).clamp(0.0, 1.0);
        Point::new(self.a.x + t * vx, self.a.y + t * vy)
    }

    pub fn dist(&self, p: Point) -> f64 {
        self.closest(p).dist(p)
    }
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(Error::invalid("rectangle coordinates must be finite"));
        }
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::invalid(format!("degenerate rectangle [{x0},{x1}]x[{y0},{y1}]")));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub(crate) const fn raw(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// `[0, w] × [0, h]` shifted by `offset`.
    pub fn from_size(offset: Point, w: f64, h: f64) -> Result<Self> {
        Rect::new(offset.x, offset.y, offset.x + w, offset.y + h)
    }

    pub fn centered(c: Point, half_w: f64, half_h: f64) -> Result<Self> {
        Rect::new(c.x - half_w, c.y - half_h, c.x + half_w, c.y + half_h)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Half of the sup-norm diameter, i.e. the half-width of the smallest
    /// centered sup-norm box containing the rectangle.
    pub fn half_sup_diameter(&self) -> f64 {
        0.5 * self.width().max(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 - GEOM_EPS
            && p.x <= self.x1 + GEOM_EPS
            && p.y >= self.y0 - GEOM_EPS
            && p.y <= self.y1 + GEOM_EPS
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 - GEOM_EPS
            && other.x1 <= self.x1 + GEOM_EPS
            && other.y0 >= self.y0 - GEOM_EPS
            && other.y1 <= self.y1 + GEOM_EPS
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }

    /// Euclidean distance from `p` to the rectangle (zero inside).
    pub fn dist(&self, p: Point) -> f64 {
        self.clamp(p).dist(p)
    }

    /// Sup-norm distance from `p` to the rectangle (zero inside).
    pub fn sup_dist(&self, p: Point) -> f64 {
        let dx = (self.x0 - p.x).max(p.x - self.x1).max(0.0);
        let dy = (self.y0 - p.y).max(p.y - self.y1).max(0.0);
        dx.max(dy)
    }

    pub fn inflate(&self, s: f64) -> Rect {
        Rect::raw(self.x0 - s, self.y0 - s, self.x1 + s, self.y1 + s)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::raw(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        );
        (r.x0 <= r.x1 && r.y0 <= r.y1).then_some(r)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::raw(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    /// Corners in counter-clockwise order starting at `(x0, y0)`.
    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x0, self.y0),
            Point::new(self.x1, self.y0),
            Point::new(self.x1, self.y1),
            Point::new(self.x0, self.y1),
        ]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let c = self.corners();
        [
            Segment::new(c[0], c[1]),
            Segment::new(c[1], c[2]),
            Segment::new(c[2], c[3]),
            Segment::new(c[3], c[0]),
        ]
    }

    pub fn left(&self) -> Segment {
        Segment::new(Point::new(self.x0, self.y0), Point::new(self.x0, self.y1))
    }

    pub fn right(&self) -> Segment {
        Segment::new(Point::new(self.x1, self.y0), Point::new(self.x1, self.y1))
    }

    pub fn bottom(&self) -> Segment {
        Segment::new(Point::new(self.x0, self.y0), Point::new(self.x1, self.y0))
    }

    pub fn top(&self) -> Segment {
        Segment::new(Point::new(self.x0, self.y1), Point::new(self.x1, self.y1))
    }

    /// Rotate by a quarter turn counter-clockwise about the origin.
    pub fn rotate90(&self) -> Rect {
        Rect::raw(-self.y1, self.x0, -self.y0, self.x1)
    }
}

/// The sup-norm ball `B∞(r) = [-r, r]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupBox {
    pub half_width: f64,
}

impl SupBox {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!("sup-box half width must be positive, got {half_width}")));
        }
        Ok(SupBox { half_width })
    }

    pub fn rect(&self) -> Rect {
        let r = self.half_width;
        Rect::raw(-r, -r, r, r)
    }

    pub fn rect_at(&self, c: Point) -> Rect {
        let r = self.half_width;
        Rect::raw(c.x - r, c.y - r, c.x + r, c.y + r)
    }
}

/// True iff the closed disc meets the closed rectangle.
pub fn disc_rect_intersects(d: &Disc, k: &Rect) -> bool {
    let r = d.radius + GEOM_EPS;
    k.clamp(d.center).dist2(d.center) <= r * r
}

/// True iff the distance from the disc center to segment `ab` is at most the radius.
pub fn disc_touches_segment(d: &Disc, a: Point, b: Point) -> bool {
    Segment::new(a, b).dist(d.center) <= d.radius + GEOM_EPS
}

/// True iff `d1 ∩ d2 ∩ k ≠ ∅`.
pub fn disc_disc_rect_intersects(d1: &Disc, d2: &Disc, k: &Rect) -> bool {
    disc_disc_rect_witness(d1, d2, k).is_some()
}

/// A point of `d1 ∩ d2 ∩ k`, if there is one.
///
/// The lens `d1 ∩ d2` is convex, so it meets the rectangle iff one of the
/// following holds: a lens vertex (or the chord midpoint) lies in `k`, a
/// corner of `k` lies in the lens, or an edge of `k` crosses one of the two
/// arcs bounding the lens.
pub fn disc_disc_rect_witness(d1: &Disc, d2: &Disc, k: &Rect) -> Option<Point> {
    let (c1, r1) = (d1.center, d1.radius);
    let (c2, r2) = (d2.center, d2.radius);
    let dx = c2.x - c1.x;
    let dy = c2.y - c1.y;
    let dist = (dx * dx + dy * dy).sqrt();

    if dist > r1 + r2 + GEOM_EPS {
        return None;
    }
    // One disc inside the other: the lens is the smaller disc.
    if dist + r1.min(r2) <= r1.max(r2) + GEOM_EPS {
        let small = if r1 <= r2 { d1 } else { d2 };
        return disc_rect_intersects(small, k).then(|| k.clamp(small.center));
    }
    if !disc_rect_intersects(d1, k) || !disc_rect_intersects(d2, k) {
        return None;
    }

    let a = (r1 * r1 - r2 * r2 + dist * dist) / (2.0 * dist);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let (ux, uy) = (dx / dist, dy / dist);
    let mid = Point::new(c1.x + a * ux, c1.y + a * uy);
    let p = Point::new(mid.x - h * uy, mid.y + h * ux);
    let q = Point::new(mid.x + h * uy, mid.y - h * ux);
    if let Some(&x) = [mid, p, q].iter().find(|&&x| k.contains(x)) {
        return Some(x);
    }
    if let Some(&c) = k.corners().iter().find(|&&c| d1.contains(c) && d2.contains(c)) {
        return Some(c);
    }
    for edge in k.edges() {
        for (this, other) in [(d1, d2), (d2, d1)] {
            if let Some(x) = segment_circle_points(&edge, this).into_iter().flatten().find(|&x| other.contains(x)) {
                return Some(x);
            }
        }
    }
    let kc = k.center();
    (d1.contains(kc) && d2.contains(kc)).then_some(kc)
}

/// Intersection points of a segment with the boundary circle of `d`.
fn segment_circle_points(seg: &Segment, d: &Disc) -> [Option<Point>; 2] {
    let vx = seg.b.x - seg.a.x;
    let vy = seg.b.y - seg.a.y;
    let fx = seg.a.x - d.center.x;
    let fy = seg.a.y - d.center.y;
    let a = vx * vx + vy * vy;
    if a == 0.0 {
        return [None, None];
    }
    let b = 2.0 * (fx * vx + fy * vy);
    let c = fx * fx + fy * fy - d.radius * d.radius;
    let mut disc = b * b - 4.0 * a * c;
    // Tangency within tolerance: distance from the center to the line is
    // radius ± eps, i.e. disc ≥ -4a(2 r eps).
    let slack = 8.0 * a * d.radius * GEOM_EPS;
    if disc < -slack {
        return [None, None];
    }
    disc = disc.max(0.0);
    let sq = disc.sqrt();
    let tol = GEOM_EPS / a.sqrt();
    let mut out = [None, None];
    for (slot, t) in out.iter_mut().zip([(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]) {
        if t >= -tol && t <= 1.0 + tol {
            let t = t.clamp(0.0, 1.0);
            *slot = Some(Point::new(seg.a.x + t * vx, seg.a.y + t * vy));
        }
    }
    out
}

/// Pixelation of a rectangle at resolution close to `delta`: `nx × ny`
/// pixels whose centers are `(x0 + (i + ½) dx, y0 + (j + ½) dy)`. Pixels are
/// stored row-major, `index = j · nx + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelGrid {
    pub region: Rect,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl PixelGrid {
    pub fn new(region: Rect, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("pixel size must be positive, got {delta}")));
        }
        let nx = ((region.width() / delta).round() as usize).max(1);
        let ny = ((region.height() / delta).round() as usize).max(1);
        Ok(PixelGrid { region, nx, ny, dx: region.width() / nx as f64, dy: region.height() / ny as f64 })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> Point {
        Point::new(self.region.x0 + (i as f64 + 0.5) * self.dx, self.region.y0 + (j as f64 + 0.5) * self.dy)
    }

    /// Column range whose centers lie in `[a, b]`, or `None`.
    pub fn cols_within(&self, a: f64, b: f64) -> Option<(usize, usize)> {
        span_within(a, b, self.region.x0, self.dx, self.nx)
    }

    /// Row range whose centers lie in `[a, b]`, or `None`.
    pub fn rows_within(&self, a: f64, b: f64) -> Option<(usize, usize)> {
        span_within(a, b, self.region.y0, self.dy, self.ny)
    }

    /// Pixel whose cell contains `p`, clamped to the grid.
    pub fn pixel_of(&self, p: Point) -> (usize, usize) {
        let i = ((p.x - self.region.x0) / self.dx).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.y - self.region.y0) / self.dy).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// Sets every pixel whose center lies in the closed disc.
    pub fn fill_disc<T: Copy>(&self, d: &Disc, bits: &mut [T], value: T) {
        let r = d.radius + GEOM_EPS;
        let Some((j0, j1)) = self.rows_within(d.center.y - r, d.center.y + r) else { return };
        for j in j0..=j1 {
            let y = self.region.y0 + (j as f64 + 0.5) * self.dy - d.center.y;
            let w2 = r * r - y * y;
            if w2 < 0.0 {
                continue;
            }
            let w = w2.sqrt();
            if let Some((i0, i1)) = self.cols_within(d.center.x - w, d.center.x + w) {
                let row = j * self.nx;
                bits[row + i0..=row + i1].fill(value);
            }
        }
    }
}

fn span_within(a: f64, b: f64, origin: f64, step: f64, n: usize) -> Option<(usize, usize)> {
    let lo = ((a - origin) / step - 0.5).ceil().max(0.0);
    let hi = ((b - origin) / step - 0.5).floor().min(n as f64 - 1.0);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// Uniform bucket grid over disc bounding boxes.
///
/// Cells are half-open, `[i c, (i+1) c) × [j c, (j+1) c)`, and each disc is
/// recorded in every cell its bounding box overlaps. Storage is dense over
/// the covered cell range in CSR form.
#[derive(Clone, Debug)]
pub struct SpatialGrid {
    cell_size: f64,
    ix0: i64,
    iy0: i64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

/// Cells are capped so a single huge disc cannot allocate an unbounded grid.
const MAX_GRID_CELLS: usize = 1 << 24;

impl SpatialGrid {
    pub fn build(discs: &[Disc], cell_size: f64) -> Result<Self> {
        Self::build_inner(discs, cell_size, None)
    }

    /// Like [`SpatialGrid::build`] but only covers `clip`; discs are bucketed
    /// by the part of their bounding box inside it.
    pub fn build_within(discs: &[Disc], cell_size: f64, clip: &Rect) -> Result<Self> {
        Self::build_inner(discs, cell_size, Some(clip))
    }

    fn build_inner(discs: &[Disc], cell_size: f64, clip: Option<&Rect>) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!("grid cell size must be positive, got {cell_size}")));
        }
        let boxes: Vec<Option<Rect>> = discs
            .iter()
            .map(|d| match clip {
                Some(c) => d.bbox().intersection(c),
                None => Some(d.bbox()),
            })
            .collect();
        if boxes.iter().all(|b| b.is_none()) {
            return Ok(SpatialGrid { cell_size, ix0: 0, iy0: 0, nx: 0, ny: 0, offsets: vec![0], items: vec![] });
        };
        let mut cell_size = cell_size;
        loop {
            // Union of the per-box spans; a box ending on a cell boundary of
            // the extent would otherwise fall outside it.
            let (mut ix0, mut ix1, mut iy0, mut iy1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
            for b in boxes.iter().flatten() {
                let (a0, a1) = cell_span(b.x0, b.x1, cell_size);
                let (b0, b1) = cell_span(b.y0, b.y1, cell_size);
                (ix0, ix1, iy0, iy1) = (ix0.min(a0), ix1.max(a1), iy0.min(b0), iy1.max(b1));
            }
            let nx = (ix1 - ix0 + 1) as usize;
            let ny = (iy1 - iy0 + 1) as usize;
            if nx.saturating_mul(ny) > MAX_GRID_CELLS {
                cell_size *= 2.0;
                continue;
            }
            let mut counts = vec![0u32; nx * ny + 1];
            for b in boxes.iter().flatten() {
                let (a0, a1) = cell_span(b.x0, b.x1, cell_size);
                let (b0, b1) = cell_span(b.y0, b.y1, cell_size);
                for j in b0..=b1 {
                    for i in a0..=a1 {
                        counts[((j - iy0) as usize) * nx + (i - ix0) as usize] += 1;
                    }
                }
            }
            let mut offsets = vec![0u32; nx * ny + 1];
            for c in 0..nx * ny {
                offsets[c + 1] = offsets[c] + counts[c];
            }
            let mut cursor = offsets.clone();
            let mut items = vec![0u32; offsets[nx * ny] as usize];
            for (idx, b) in boxes.iter().enumerate() {
                let Some(b) = b else { continue };
                let (a0, a1) = cell_span(b.x0, b.x1, cell_size);
                let (b0, b1) = cell_span(b.y0, b.y1, cell_size);
                for j in b0..=b1 {
                    for i in a0..=a1 {
                        let c = ((j - iy0) as usize) * nx + (i - ix0) as usize;
                        items[cursor[c] as usize] = idx as u32;
                        cursor[c] += 1;
                    }
                }
            }
            return Ok(SpatialGrid { cell_size, ix0, iy0, nx, ny, offsets, items });
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Integer coordinates of the cell containing `p`.
    pub fn cell_of(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell_size).floor() as i64, (p.y / self.cell_size).floor() as i64)
    }

    /// Disc indices recorded in cell `(i, j)`.
    pub fn bucket(&self, i: i64, j: i64) -> &[u32] {
        if i < self.ix0 || j < self.iy0 {
            return &[];
        }
        let (ci, cj) = ((i - self.ix0) as usize, (j - self.iy0) as usize);
        if ci >= self.nx || cj >= self.ny {
            return &[];
        }
        let c = cj * self.nx + ci;
        &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    /// Non-empty buckets as `((i, j), indices)`.
    pub fn buckets(&self) -> impl Iterator<Item = ((i64, i64), &[u32])> + '_ {
        (0..self.nx * self.ny).filter_map(move |c| {
            let s = &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize];
            (!s.is_empty()).then(|| {
                (((c % self.nx) as i64 + self.ix0, (c / self.nx) as i64 + self.iy0), s)
            })
        })
    }

    /// Calls `f` for every index bucketed in a cell overlapping `query`.
    /// Indices can repeat across cells.
    pub fn for_each_candidate(&self, query: &Rect, mut f: impl FnMut(u32)) {
        if self.nx == 0 {
            return;
        }
        let (a0, a1) = cell_span(query.x0, query.x1, self.cell_size);
        let (b0, b1) = cell_span(query.y0, query.y1, self.cell_size);
        let a0 = a0.max(self.ix0);
        let a1 = a1.min(self.ix0 + self.nx as i64 - 1);
        let b0 = b0.max(self.iy0);
        let b1 = b1.min(self.iy0 + self.ny as i64 - 1);
        for j in b0..=b1 {
            let row = ((j - self.iy0) as usize) * self.nx;
            for i in a0..=a1 {
                let c = row + (i - self.ix0) as usize;
                for &idx in &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize] {
                    f(idx);
                }
            }
        }
    }

    /// Cell-index bounds `(i0, i1, j0, j1)` of the stored range.
    pub(crate) fn index_bounds(&self) -> (i64, i64, i64, i64) {
        (self.ix0, self.ix0 + self.nx as i64 - 1, self.iy0, self.iy0 + self.ny as i64 - 1)
    }
}

/// Inclusive cell range covered by the interval `[lo, hi)`; a degenerate
/// interval maps to the single cell containing it.
fn cell_span(lo: f64, hi: f64, cell: f64) -> (i64, i64) {
    let a = (lo / cell).floor() as i64;
    let b = ((hi / cell).ceil() as i64 - 1).max(a);
    (a, b)
}

/// Default grid cell: the median radius, clamped to `[1e-3, side]`.
pub fn default_cell_size(discs: &[Disc], side: f64) -> f64 {
    if discs.is_empty() {
        return side.max(1e-3);
    }
    let mut radii: Vec<f64> = discs.iter().map(|d| d.radius).collect();
    let mid = radii.len() / 2;
    let (_, median, _) = radii.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    median.clamp(1e-3, side.max(1e-3))
}

/// Enumerates every unordered pair `(i, j)`, `i < j`, whose bounding boxes
/// (inflated by [`GEOM_EPS`] and clipped to `clip`) overlap.
pub fn candidate_pairs(discs: &[Disc], grid: &SpatialGrid, clip: &Rect, mut f: impl FnMut(usize, usize)) {
    let mut seen = vec![u32::MAX; discs.len()];
    for (i, d) in discs.iter().enumerate() {
        let Some(q) = d.bbox().inflate(GEOM_EPS).intersection(&clip.inflate(GEOM_EPS)) else { continue };
        grid.for_each_candidate(&q, |j| {
            let j = j as usize;
            if j > i && seen[j] != i as u32 {
                seen[j] = i as u32;
                f(i, j);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disc(x: f64, y: f64, r: f64) -> Disc {
        Disc::new(Point::new(x, y), r).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn disc_rect_cases() {
        let k = rect(0.0, 0.0, 2.0, 2.0);
        assert!(disc_rect_intersects(&disc(0.0, 0.0, 1.0), &k));
        assert!(!disc_rect_intersects(&disc(5.0, 5.0, 1.0), &k));
        assert!(disc_rect_intersects(&disc(3.0, 1.0, 1.0), &k));
    }

    #[test]
    fn lens_rect_cases() {
        assert!(disc_disc_rect_intersects(&disc(0.0, 0.0, 1.0), &disc(1.5, 0.0, 1.0), &rect(0.0, -1.0, 2.0, 1.0)));
        for k in [rect(-5.0, -5.0, 5.0, 5.0), rect(0.0, 0.0, 1.0, 1.0)] {
            assert!(!disc_disc_rect_intersects(&disc(0.0, 0.0, 1.0), &disc(3.0, 0.0, 1.0), &k));
        }
        assert!(!disc_disc_rect_intersects(&disc(0.0, 5.0, 1.0), &disc(1.0, 5.0, 1.0), &rect(0.0, 0.0, 2.0, 1.0)));
    }

    #[test]
    fn lens_edge_cases() {
        // Tangent discs touching at (1, 0.5), inside K.
        let k = rect(0.0, 0.0, 4.0, 1.0);
        assert!(disc_disc_rect_intersects(&disc(0.0, 0.5, 1.0), &disc(2.0, 0.5, 1.0), &k));
        // Lens pokes into K only through its bottom edge.
        // The lens apex sits at (0, √3/2).
        let k = rect(-1.0, 0.8, 1.0, 3.0);
        assert!(disc_disc_rect_intersects(&disc(-0.5, 0.0, 1.0), &disc(0.5, 0.0, 1.0), &k));
        let k = rect(-1.0, 0.9, 1.0, 3.0);
        assert!(!disc_disc_rect_intersects(&disc(-0.5, 0.0, 1.0), &disc(0.5, 0.0, 1.0), &k));
        // K deep inside a big lens.
        let k = rect(-0.1, -0.1, 0.1, 0.1);
        assert!(disc_disc_rect_intersects(&disc(-1.0, 0.0, 5.0), &disc(1.0, 0.0, 5.0), &k));
        // Nested discs: the lens is the small one.
        let k = rect(2.0, 2.0, 3.0, 3.0);
        assert!(!disc_disc_rect_intersects(&disc(0.0, 0.0, 10.0), &disc(0.0, 0.0, 1.0), &k));
        assert!(disc_disc_rect_intersects(&disc(0.0, 0.0, 10.0), &disc(2.5, 2.5, 0.1), &k));
    }

    #[test]
    fn segment_touch_cases() {
        let (a, b) = (Point::new(0.0, -2.0), Point::new(0.0, 2.0));
        assert!(disc_touches_segment(&disc(1.0, 0.0, 1.0), a, b));
        assert!(!disc_touches_segment(&disc(3.0, 0.0, 1.0), a, b));
        assert!(!disc_touches_segment(&disc(0.0, 5.0, 1.0), Point::new(0.0, 0.0), Point::new(0.0, 1.0)));
    }

    #[test]
    fn pixel_disc_area() {
        let g = PixelGrid::new(rect(-2.0, -2.0, 2.0, 2.0), 0.01).unwrap();
        let mut bits = vec![false; g.len()];
        g.fill_disc(&disc(0.0, 0.0, 1.0), &mut bits, true);
        let area = bits.iter().filter(|&&b| b).count() as f64 * g.dx * g.dy;
        assert!((area - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(bits[g.index(i, j)], g.center(i, j).dist(Point::ORIGIN) <= 1.0 + GEOM_EPS);
            }
        }
    }

    #[test]
    fn pixel_spans() {
        let g = PixelGrid::new(rect(0.0, 0.0, 1.0, 1.0), 0.1).unwrap();
        assert_eq!((g.nx, g.ny), (10, 10));
        assert_eq!(g.cols_within(0.0, 1.0), Some((0, 9)));
        assert_eq!(g.cols_within(0.05, 0.05), Some((0, 0)));
        assert_eq!(g.cols_within(0.06, 0.14), None);
        assert_eq!(g.cols_within(-5.0, -1.0), None);
        assert_eq!(g.pixel_of(Point::new(0.55, 2.0)), (5, 9));
    }

    #[test]
    fn grid_buckets() {
        let g = SpatialGrid::build(&[], 1.0).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.buckets().count(), 0);

        let g = SpatialGrid::build(&[disc(0.5, 0.5, 0.25)], 1.0).unwrap();
        let cells: Vec<_> = g.buckets().map(|(c, _)| c).collect();
        assert_eq!(cells, vec![(0, 0)]);

        let g = SpatialGrid::build(&[disc(0.0, 0.0, 2.0)], 1.0).unwrap();
        let mut cells: Vec<_> = g.buckets().map(|(c, _)| c).collect();
        cells.sort();
        let expected: Vec<_> = (-2..2).flat_map(|i| (-2..2).map(move |j| (i, j))).collect();
        assert_eq!(cells.len(), 16);
        assert_eq!(cells, expected);

        assert!(SpatialGrid::build(&[], 0.0).is_err());
        assert!(SpatialGrid::build(&[], -1.0).is_err());
    }

    #[test]
    fn tangent_pair_found_across_cell_boundary() {
        let discs = [disc(0.0, 0.5, 1.0), disc(2.0, 0.5, 1.0)];
        let g = SpatialGrid::build(&discs, 1.0).unwrap();
        let mut pairs = vec![];
        candidate_pairs(&discs, &g, &rect(-5.0, -5.0, 5.0, 5.0), |i, j| pairs.push((i, j)));
        assert_eq!(pairs, vec![(0, 1)]);
    }

    /// Clips `k` by the half-planes of regular `n`-gons inscribed in (or
    /// circumscribed about) both discs. Returns the common verdict, or `None`
    /// when the inner and outer approximations disagree.
    fn lens_polygon_verdict(d1: &Disc, d2: &Disc, k: &Rect) -> Option<bool> {
        let n = 1024;
        let clip = |scale: f64| {
            let mut poly: Vec<Point> = k.corners().to_vec();
            for d in [d1, d2] {
                let apothem = d.radius * scale;
                for i in 0..n {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    let (nx, ny) = (a.cos(), a.sin());
                    let side = |p: &Point| (p.x - d.center.x) * nx + (p.y - d.center.y) * ny - apothem;
                    let mut out = Vec::with_capacity(poly.len() + 1);
                    for j in 0..poly.len() {
                        let (p, q) = (poly[j], poly[(j + 1) % poly.len()]);
                        let (sp, sq) = (side(&p), side(&q));
                        if sp <= 0.0 {
                            out.push(p);
                        }
                        if (sp < 0.0) != (sq < 0.0) && sp != sq {
                            let t = sp / (sp - sq);
                            out.push(Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
                        }
                    }
                    poly = out;
                    if poly.is_empty() {
                        return false;
                    }
                }
            }
            true
        };
        if d1.center.dist(d2.center) > d1.radius + d2.radius {
            return Some(false);
        }
        if !clip(1.0) {
            return Some(false);
        }
        let half = std::f64::consts::PI / n as f64;
        clip(half.cos()).then_some(true)
    }

    #[test]
    fn lens_matches_polygon_clipping() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..10_000 {
            let d1 = disc(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.2..2.5));
            let d2 = disc(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.2..2.5));
            let (xa, xb): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let (ya, yb): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            if (xa - xb).abs() < 1e-3 || (ya - yb).abs() < 1e-3 {
                continue;
            }
            let k = rect(xa.min(xb), ya.min(yb), xa.max(xb), ya.max(yb));
            let Some(expected) = lens_polygon_verdict(&d1, &d2, &k) else { continue };
            checked += 1;
            assert_eq!(disc_disc_rect_intersects(&d1, &d2, &k), expected, "{d1:?} {d2:?} {k:?}");
        }
        assert!(checked > 9_000);
    }

    fn arb_disc() -> impl Strategy<Value = Disc> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.05..3.0f64).prop_map(|(x, y, r)| disc(x, y, r))
    }

    fn arb_rect() -> impl Strategy<Value = Rect> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.01..6.0f64, 0.01..6.0f64).prop_map(|(x, y, w, h)| rect(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn lens_symmetric(d1 in arb_disc(), d2 in arb_disc(), k in arb_rect()) {
            prop_assert_eq!(disc_disc_rect_intersects(&d1, &d2, &k), disc_disc_rect_intersects(&d2, &d1, &k));
        }

        #[test]
        fn lens_witness_lies_in_all_three(d1 in arb_disc(), d2 in arb_disc(), k in arb_rect()) {
            if let Some(w) = disc_disc_rect_witness(&d1, &d2, &k) {
                let tol = 1e-6;
                prop_assert!(d1.center.dist(w) <= d1.radius + tol && d2.center.dist(w) <= d2.radius + tol);
                prop_assert!(k.inflate(tol).contains(w));
            }
        }

        #[test]
        fn lens_monotone_in_rect(d1 in arb_disc(), d2 in arb_disc(), k in arb_rect(), grow in (0.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64)) {
            let big = Rect::raw(k.x0 - grow.0, k.y0 - grow.1, k.x1 + grow.2, k.y1 + grow.3);
            if disc_disc_rect_intersects(&d1, &d2, &k) {
                prop_assert!(disc_disc_rect_intersects(&d1, &d2, &big));
            }
        }

        #[test]
        fn grid_finds_all_overlapping_pairs(discs in proptest::collection::vec(arb_disc(), 0..40), cell in 0.1..3.0f64) {
            let clip = rect(-20.0, -20.0, 20.0, 20.0);
            let g = SpatialGrid::build(&discs, cell).unwrap();
            let mut found = std::collections::HashSet::new();
            candidate_pairs(&discs, &g, &clip, |i, j| { found.insert((i, j)); });
            for i in 0..discs.len() {
                for j in i + 1..discs.len() {
                    let (a, b) = (&discs[i], &discs[j]);
                    if a.center.dist(b.center) <= a.radius + b.radius {
                        prop_assert!(found.contains(&(i, j)), "missing pair {} {}", i, j);
                    }
                }
            }
        }
    }
}
