//! Exact connectivity of a union of discs clipped to a rectangle.
//!
//! Each clipped disc `D ∩ K` is convex, so two of them lie in the same
//! component of `⋃ (D_i ∩ K)` iff they are linked by a chain of pairwise
//! intersecting clipped discs. Components come from a union-find over the
//! pairs produced by the spatial grid.
//!
//! Vacant arms and occupied circuits reduce to the existence of an occupied
//! loop around a point, see [`encloses`].

use petgraph::unionfind::UnionFind;

use crate::geometry::{
    candidate_pairs, default_cell_size, disc_disc_rect_intersects, disc_disc_rect_witness, disc_rect_intersects,
    disc_touches_segment, Disc, Point, Rect, Segment, SpatialGrid, SupBox,
};

/// Components of the discs clipped to `k`.
#[derive(Clone, Debug)]
pub struct Clusters {
    k: Rect,
    discs: Vec<Disc>,
    root: Vec<u32>,
}

impl Clusters {
    pub fn new(all: &[Disc], k: Rect) -> Self {
        let discs: Vec<Disc> = all.iter().filter(|d| disc_rect_intersects(d, &k)).copied().collect();
        let mut uf = UnionFind::<u32>::new(discs.len());
        if discs.len() > 1 {
            let cell = default_cell_size(&discs, k.width().max(k.height()));
            let grid = SpatialGrid::build_within(&discs, cell, &k).expect("positive cell size");
            candidate_pairs(&discs, &grid, &k, |i, j| {
                if !uf.equiv(i as u32, j as u32) && disc_disc_rect_intersects(&discs[i], &discs[j], &k) {
                    uf.union(i as u32, j as u32);
                }
            });
        }
        let root = uf.into_labeling();
        Clusters { k, discs, root }
    }

    pub fn rect(&self) -> Rect {
        self.k
    }

    /// Clipped discs, i.e. those meeting the rectangle.
    pub fn len(&self) -> usize {
        self.discs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discs.is_empty()
    }

    /// True iff some component holds a disc satisfying `a` and a disc
    /// satisfying `b`.
    pub fn connects(&self, a: impl Fn(&Disc) -> bool, b: impl Fn(&Disc) -> bool) -> bool {
        let mut marked = vec![false; self.discs.len()];
        let mut any = false;
        for (i, d) in self.discs.iter().enumerate() {
            if a(d) {
                marked[self.root[i] as usize] = true;
                any = true;
            }
        }
        any && self.discs.iter().enumerate().any(|(i, d)| marked[self.root[i] as usize] && b(d))
    }

    /// Occupied connection between two unions of boundary segments.
    pub fn segments_connected(&self, a: &[Segment], b: &[Segment]) -> bool {
        let touches = |segs: &[Segment], d: &Disc| segs.iter().any(|s| disc_touches_segment(d, s.a, s.b));
        self.connects(|d| touches(a, d), |d| touches(b, d))
    }
}

/// Occupied crossing of `k` between boundary sides `a` and `b`.
pub fn detect_cross_occupied(discs: &[Disc], k: &Rect, a: Segment, b: Segment) -> bool {
    Clusters::new(discs, *k).segments_connected(&[a], &[b])
}

/// Crossing direction of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LeftRight,
    BottomTop,
}

/// Vacant crossing of `k`, through the dual occupied crossing: a vacant
/// left-right crossing exists iff no occupied top-bottom one does.
pub fn detect_cross_vacant(discs: &[Disc], k: &Rect, dir: Direction) -> bool {
    match dir {
        Direction::LeftRight => !detect_cross_occupied(discs, k, k.bottom(), k.top()),
        Direction::BottomTop => !detect_cross_occupied(discs, k, k.left(), k.right()),
    }
}

/// `[B∞(r) ↔ ∂B∞(r')]` in the occupied set, boxes centred at `center`.
pub fn detect_arm_occupied(discs: &[Disc], r: f64, r_outer: f64, center: Point) -> bool {
    let outer = SupBox { half_width: r_outer }.rect_at(center);
    let inner = SupBox { half_width: r }.rect_at(center);
    let edges = outer.edges();
    Clusters::new(discs, outer).connects(|d| disc_rect_intersects(d, &inner), |d| touches_any(d, &edges))
}

/// `[center ↔ ∂B∞(r)]` in the occupied set.
pub fn detect_origin_arm_occupied(discs: &[Disc], r: f64, center: Point) -> bool {
    let outer = SupBox { half_width: r }.rect_at(center);
    let edges = outer.edges();
    Clusters::new(discs, outer).connects(|d| d.contains(center), |d| touches_any(d, &edges))
}

/// Four closed bands covering the annulus `B∞(r_outer) \ int B∞(r_inner)`.
pub fn annulus_bands(r_inner: f64, r_outer: f64, center: Point) -> [Rect; 4] {
    let (x, y, a, b) = (center.x, center.y, r_inner, r_outer);
    [
        Rect::raw(x - b, y + a, x + b, y + b),
        Rect::raw(x - b, y - b, x + b, y - a),
        Rect::raw(x - b, y - b, x - a, y + b),
        Rect::raw(x + a, y - b, x + b, y + b),
    ]
}

/// True iff `⋃ (D ∩ band)` holds a closed curve winding around `center`.
/// `center` must lie outside every piece `D ∩ band`.
///
/// The pieces are closed convex sets, so by the nerve lemma their union has
/// a loop of nonzero winding number iff their intersection graph does. Each
/// piece gets a base point and each intersecting pair a witness point; the
/// path base → witness → base stays inside the two pieces, and a union-find
/// that carries the angle swept between a node and its root detects a cycle
/// whose total angle is a nonzero multiple of 2π.
pub fn encloses(discs: &[Disc], bands: &[Rect], center: Point) -> bool {
    let hull = bands.iter().skip(1).fold(bands[0], |h, b| h.union(b));
    let discs: Vec<Disc> = discs.iter().filter(|d| disc_rect_intersects(d, &hull)).copied().collect();
    // Pieces of disc i are pieces[first[i]..first[i + 1]].
    let mut pieces: Vec<(usize, Point)> = vec![];
    let mut first = Vec::with_capacity(discs.len() + 1);
    for d in &discs {
        first.push(pieces.len());
        for (b, band) in bands.iter().enumerate() {
            if disc_rect_intersects(d, band) {
                pieces.push((b, band.clamp(d.center)));
            }
        }
    }
    first.push(pieces.len());
    let overlap = |a: usize, b: usize| bands[a].intersection(&bands[b]);
    let mut w = Winding::new(pieces.len());
    let mut link = |u: usize, v: usize, via: Point| w.union(u, v, sweep(center, pieces[u].1, via) + sweep(center, via, pieces[v].1));
    for (i, d) in discs.iter().enumerate() {
        for u in first[i]..first[i + 1] {
            for v in u + 1..first[i + 1] {
                if let Some(k) = overlap(pieces[u].0, pieces[v].0).filter(|k| disc_rect_intersects(d, k)) {
                    if link(u, v, k.clamp(d.center)) {
                        return true;
                    }
                }
            }
        }
    }
    if discs.len() < 2 {
        return false;
    }
    let cell = default_cell_size(&discs, hull.width().max(hull.height()));
    let grid = SpatialGrid::build_within(&discs, cell, &hull).expect("positive cell size");
    let mut found = false;
    candidate_pairs(&discs, &grid, &hull, |i, j| {
        for u in first[i]..first[i + 1] {
            for v in first[j]..first[j + 1] {
                if found {
                    return;
                }
                let Some(k) = overlap(pieces[u].0, pieces[v].0) else { continue };
                if let Some(x) = disc_disc_rect_witness(&discs[i], &discs[j], &k) {
                    found = link(u, v, x);
                }
            }
        }
    });
    found
}

/// Signed angle of the segment `a → b` seen from `c`.
fn sweep(c: Point, a: Point, b: Point) -> f64 {
    let (ax, ay, bx, by) = (a.x - c.x, a.y - c.y, b.x - c.x, b.y - c.y);
    (ax * by - ay * bx).atan2(ax * bx + ay * by)
}

/// Union-find whose nodes store the angle swept from the node to its parent.
struct Winding {
    parent: Vec<usize>,
    size: Vec<usize>,
    angle: Vec<f64>,
}

impl Winding {
    fn new(n: usize) -> Self {
        Winding { parent: (0..n).collect(), size: vec![1; n], angle: vec![0.0; n] }
    }

    /// Root of `i` and the angle swept from `i` to it.
    fn find(&mut self, i: usize) -> (usize, f64) {
        let (mut root, mut total) = (i, 0.0);
        while self.parent[root] != root {
            total += self.angle[root];
            root = self.parent[root];
        }
        let (mut k, mut rest) = (i, total);
        while self.parent[k] != k {
            let (next, a) = (self.parent[k], self.angle[k]);
            self.parent[k] = root;
            self.angle[k] = rest;
            rest -= a;
            k = next;
        }
        (root, total)
    }

    /// Adds an edge sweeping `a` from `u` to `v`; true iff it closes a
    /// cycle with nonzero winding number.
    fn union(&mut self, u: usize, v: usize, a: f64) -> bool {
        let (ru, au) = self.find(u);
        let (rv, av) = self.find(v);
        // Angle swept from ru to rv through the new edge.
        let across = a + av - au;
        if ru == rv {
            return across.abs() > std::f64::consts::PI;
        }
        let (child, parent, swept) = if self.size[ru] < self.size[rv] { (ru, rv, across) } else { (rv, ru, -across) };
        self.parent[child] = parent;
        self.angle[child] = swept;
        self.size[parent] += self.size[child];
        false
    }
}

fn touches_any(d: &Disc, segs: &[Segment]) -> bool {
    segs.iter().any(|s| disc_touches_segment(d, s.a, s.b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(x: f64, y: f64, r: f64) -> Disc {
        Disc::new(Point::new(x, y), r).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn cross_examples() {
        let k = rect(0.0, 0.0, 4.0, 1.0);
        assert!(!detect_cross_occupied(&[], &k, k.left(), k.right()));
        assert!(detect_cross_occupied(&[disc(2.0, 0.5, 10.0)], &k, k.left(), k.right()));
        let chain = [disc(0.0, 0.5, 1.0), disc(1.5, 0.5, 1.0), disc(3.0, 0.5, 1.0)];
        assert!(detect_cross_occupied(&chain, &k, k.left(), k.right()));
        assert!(!detect_cross_occupied(&chain[..2], &k, k.left(), k.right()));
    }

    #[test]
    fn vacant_examples() {
        let k = rect(0.0, 0.0, 4.0, 4.0);
        assert!(detect_cross_vacant(&[], &k, Direction::LeftRight));
        assert!(!detect_cross_vacant(&[disc(2.0, 2.0, 10.0)], &k, Direction::LeftRight));
        let stack: Vec<Disc> = (0..5).map(|i| disc(2.0, i as f64, 0.6)).collect();
        assert!(!detect_cross_vacant(&stack, &k, Direction::LeftRight));
        assert!(detect_cross_vacant(&stack, &k, Direction::BottomTop));
    }

    #[test]
    fn lens_outside_rect_does_not_connect() {
        // The two discs overlap only above K.
        let k = rect(0.0, 0.0, 4.0, 1.0);
        let ds = [disc(-0.5, 2.5, 2.0), disc(4.5, 2.5, 2.0), disc(2.0, 3.2, 1.8)];
        assert!(!detect_cross_occupied(&ds, &k, k.left(), k.right()));
        let big = rect(0.0, 0.0, 4.0, 5.0);
        assert!(detect_cross_occupied(&ds, &big, big.left(), big.right()));
    }

    #[test]
    fn arm_examples() {
        let o = Point::ORIGIN;
        assert!(!detect_arm_occupied(&[], 1.0, 4.0, o));
        assert!(detect_arm_occupied(&[disc(0.0, 0.0, 4.0 * 2f64.sqrt())], 1.0, 4.0, o));
        assert!(!detect_arm_occupied(&[disc(0.0, 0.0, 1.0), disc(0.0, 3.0, 1.0)], 1.0, 4.0, o));
        assert!(detect_arm_occupied(&[disc(0.0, 0.0, 1.0), disc(0.0, 2.0, 1.0), disc(0.0, 3.5, 1.0)], 1.0, 4.0, o));
        assert!(detect_origin_arm_occupied(&[disc(0.5, 0.0, 1.0), disc(1.8, 0.0, 1.0)], 2.5, o));
        assert!(!detect_origin_arm_occupied(&[disc(1.8, 0.0, 1.0)], 2.5, o));
    }

    fn ring(n: usize, radius: f64, disc_r: f64) -> Vec<Disc> {
        (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                disc(radius * t.cos(), radius * t.sin(), disc_r)
            })
            .collect()
    }

    #[test]
    fn ring_encloses_and_gap_opens() {
        let o = Point::ORIGIN;
        let k = SupBox { half_width: 4.0 }.rect();
        let full = ring(12, 2.5, 0.8);
        assert!(encloses(&full, &[k], o));
        assert!(encloses(&full, &annulus_bands(1.0, 4.0, o), o));
        assert!(!encloses(&full[1..], &[k], o));
        assert!(!encloses(&full[1..], &annulus_bands(1.0, 4.0, o), o));
        // The ring leaves the annulus when the inner box swallows it.
        assert!(!encloses(&full, &annulus_bands(3.5, 4.0, o), o));
        // Clipping matters: the same ring cut by a small box is no loop.
        assert!(!encloses(&full, &[SupBox { half_width: 1.5 }.rect()], o));
    }

    #[test]
    fn one_disc_never_encloses() {
        let o = Point::ORIGIN;
        assert!(!encloses(&[disc(2.0, 0.0, 1.5)], &[SupBox { half_width: 4.0 }.rect()], o));
        // A big disc around the inner box covers all four bands and their
        // corners: its pieces form a loop.
        assert!(encloses(&[disc(0.0, 0.0, 3.0)], &annulus_bands(1.0, 4.0, o), o));
    }

    #[test]
    fn winding_agrees_with_raster_oracle_on_clear_configurations() {
        use crate::events::{EventSpec, Phase};
        use crate::oracle::raster_oracle_discs;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (r_in, r_out) = (1.0, 4.0);
        let delta = 2.0 * r_out / 1024.0;
        let specs = [
            EventSpec::origin_arm(r_out, Phase::Vacant),
            EventSpec::arm(r_in, r_out, Phase::Vacant),
            EventSpec::circuit(r_in, r_out, Phase::Occupied),
        ];
        let lines = [-r_out, -r_in, r_in, r_out];
        let (mut checked, mut positive) = (0, 0);
        for _ in 0..400 {
            let n = rng.random_range(4..16);
            let ds: Vec<Disc> = (0..n)
                .map(|_| disc(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.6..1.4)))
                .collect();
            // Skip near-tangencies the raster cannot resolve.
            let mut clearance = f64::INFINITY;
            for (i, a) in ds.iter().enumerate() {
                clearance = clearance.min((a.center.dist(Point::ORIGIN) - a.radius).abs());
                for &l in &lines {
                    clearance = clearance.min(((a.center.x - l).abs() - a.radius).abs()).min(((a.center.y - l).abs() - a.radius).abs());
                }
                for b in &ds[i + 1..] {
                    clearance = clearance.min((a.center.dist(b.center) - a.radius - b.radius).abs());
                }
            }
            if clearance < 4.0 * delta {
                continue;
            }
            for spec in &specs {
                let exact = spec.exact(&ds);
                assert_eq!(exact, raster_oracle_discs(&ds, spec, delta).unwrap(), "{spec:?} {ds:?}");
                positive += usize::from(exact);
            }
            checked += 1;
        }
        assert!(checked >= 80, "only {checked} clear configurations");
        assert!(positive > 0 && positive < 3 * checked);
    }
}
