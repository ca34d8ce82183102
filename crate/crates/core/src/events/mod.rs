//! Crossing, arm and circuit events.
//!
//! Occupied rectangle crossings and occupied arms of the Boolean model are
//! decided exactly ([`exact`]). Vacant rectangle crossings follow from the
//! perpendicular occupied crossing by duality, and a vacant circuit is the
//! complement of an occupied arm. Vacant arms and occupied circuits are
//! decided by the winding number of occupied loops around the centre. The
//! colour-field models, and any model under the raster-only policy, go
//! through the rasterizer ([`raster`]), refined until two consecutive
//! resolutions agree.

pub mod exact;
pub mod raster;

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

pub use exact::{detect_arm_occupied, detect_cross_occupied, detect_cross_vacant, detect_origin_arm_occupied, Clusters, Direction};
pub use raster::Bitmap;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect, Segment, SupBox};
use crate::models::{Field, Occupancy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Occupied,
    Vacant,
}

impl Phase {
    pub fn dual(self) -> Phase {
        match self {
            Phase::Occupied => Phase::Vacant,
            Phase::Vacant => Phase::Occupied,
        }
    }
}

fn is_zero(p: &Point) -> bool {
    *p == Point::ORIGIN
}

/// An event query. Rectangles are `[0, width] × [0, height]` shifted by
/// `offset`; boxes are sup-norm boxes around `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// Left-right crossing.
    Cross {
        width: f64,
        height: f64,
        phase: Phase,
        #[serde(default, skip_serializing_if = "is_zero")]
        offset: Point,
    },
    /// Left side to the part `[y_low, height]` of the right side.
    CrossToSub {
        width: f64,
        height: f64,
        y_low: f64,
        phase: Phase,
        #[serde(default, skip_serializing_if = "is_zero")]
        offset: Point,
    },
    /// `B∞(r_inner)` connected to `∂B∞(r_outer)`.
    Arm {
        r_inner: f64,
        r_outer: f64,
        phase: Phase,
        #[serde(default, skip_serializing_if = "is_zero")]
        center: Point,
    },
    /// A loop in `B∞(r_outer) \ B∞(r_inner)` surrounding the inner box.
    Circuit {
        r_inner: f64,
        r_outer: f64,
        phase: Phase,
        #[serde(default, skip_serializing_if = "is_zero")]
        center: Point,
    },
    /// The center connected to `∂B∞(r)`.
    OriginArm {
        r: f64,
        phase: Phase,
        #[serde(default, skip_serializing_if = "is_zero")]
        center: Point,
    },
}

impl EventSpec {
    pub fn cross(width: f64, height: f64, phase: Phase) -> Self {
        EventSpec::Cross { width, height, phase, offset: Point::ORIGIN }
    }

    pub fn arm(r_inner: f64, r_outer: f64, phase: Phase) -> Self {
        EventSpec::Arm { r_inner, r_outer, phase, center: Point::ORIGIN }
    }

    pub fn circuit(r_inner: f64, r_outer: f64, phase: Phase) -> Self {
        EventSpec::Circuit { r_inner, r_outer, phase, center: Point::ORIGIN }
    }

    pub fn origin_arm(r: f64, phase: Phase) -> Self {
        EventSpec::OriginArm { r, phase, center: Point::ORIGIN }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        let ok = match *self {
            EventSpec::Cross { width, height, .. } => pos(width) && pos(height),
            EventSpec::CrossToSub { width, height, y_low, .. } => {
                pos(width) && pos(height) && (0.0..height).contains(&y_low)
            }
            EventSpec::Arm { r_inner, r_outer, .. } | EventSpec::Circuit { r_inner, r_outer, .. } => {
                pos(r_inner) && pos(r_outer) && r_inner < r_outer
            }
            EventSpec::OriginArm { r, .. } => pos(r),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid event geometry {self:?}")))
        }
    }

    pub fn phase(&self) -> Phase {
        match *self {
            EventSpec::Cross { phase, .. }
            | EventSpec::CrossToSub { phase, .. }
            | EventSpec::Arm { phase, .. }
            | EventSpec::Circuit { phase, .. }
            | EventSpec::OriginArm { phase, .. } => phase,
        }
    }

    pub fn with_phase(mut self, p: Phase) -> Self {
        match &mut self {
            EventSpec::Cross { phase, .. }
            | EventSpec::CrossToSub { phase, .. }
            | EventSpec::Arm { phase, .. }
            | EventSpec::Circuit { phase, .. }
            | EventSpec::OriginArm { phase, .. } => *phase = p,
        }
        self
    }

    /// Same event shifted by `(dx, dy)`.
    pub fn translated(mut self, dx: f64, dy: f64) -> Self {
        match &mut self {
            EventSpec::Cross { offset, .. } | EventSpec::CrossToSub { offset, .. } => *offset = offset.translate(dx, dy),
            EventSpec::Arm { center, .. } | EventSpec::Circuit { center, .. } | EventSpec::OriginArm { center, .. } => {
                *center = center.translate(dx, dy)
            }
        }
        self
    }

    /// Region the event depends on: the rectangle, or the outer box.
    pub fn region(&self) -> Rect {
        match *self {
            EventSpec::Cross { width, height, offset, .. } | EventSpec::CrossToSub { width, height, offset, .. } => {
                Rect::raw(offset.x, offset.y, offset.x + width, offset.y + height)
            }
            EventSpec::Arm { r_outer, center, .. } | EventSpec::Circuit { r_outer, center, .. } => {
                SupBox { half_width: r_outer }.rect_at(center)
            }
            EventSpec::OriginArm { r, center, .. } => SupBox { half_width: r }.rect_at(center),
        }
    }

    /// Longer side of [`EventSpec::region`].
    pub fn scale(&self) -> f64 {
        let r = self.region();
        r.width().max(r.height())
    }

    /// Exact value on a list of discs.
    pub fn exact(&self, discs: &[crate::geometry::Disc]) -> bool {
        self.exact_with(discs, &mut |k| Clusters::new(discs, k))
    }

    fn exact_with(&self, discs: &[crate::geometry::Disc], clusters: &mut dyn FnMut(Rect) -> Clusters) -> bool {
        let k = self.region();
        match *self {
            EventSpec::Cross { phase: Phase::Occupied, .. } => clusters(k).segments_connected(&[k.left()], &[k.right()]),
            EventSpec::Cross { phase: Phase::Vacant, .. } => !clusters(k).segments_connected(&[k.bottom()], &[k.top()]),
            EventSpec::CrossToSub { y_low, phase, .. } => {
                let cut = k.y0 + y_low;
                let upper = Segment::new(Point::new(k.x1, cut), Point::new(k.x1, k.y1));
                let lower = Segment::new(Point::new(k.x1, k.y0), Point::new(k.x1, cut));
                match phase {
                    Phase::Occupied => clusters(k).segments_connected(&[k.left()], &[upper]),
                    Phase::Vacant => !clusters(k).segments_connected(&[k.top()], &[k.bottom(), lower]),
                }
            }
            // A vacant arm across the annulus exists iff no occupied circuit does.
            EventSpec::Arm { r_inner, r_outer, center, phase: Phase::Vacant }
            | EventSpec::Circuit { r_inner, r_outer, center, phase: Phase::Occupied } => {
                let circuit = exact::encloses(discs, &exact::annulus_bands(r_inner, r_outer, center), center);
                if matches!(self, EventSpec::Circuit { .. }) {
                    circuit
                } else {
                    !circuit
                }
            }
            EventSpec::Arm { r_inner, center, .. } | EventSpec::Circuit { r_inner, center, .. } => {
                let inner = SupBox { half_width: r_inner }.rect_at(center);
                let edges = k.edges();
                let arm = clusters(k).connects(
                    |d| crate::geometry::disc_rect_intersects(d, &inner),
                    |d| edges.iter().any(|s| crate::geometry::disc_touches_segment(d, s.a, s.b)),
                );
                if matches!(self, EventSpec::Arm { .. }) {
                    arm
                } else {
                    !arm
                }
            }
            EventSpec::OriginArm { center, phase: Phase::Vacant, .. } => {
                !discs.iter().any(|d| d.contains(center)) && !exact::encloses(discs, &[k], center)
            }
            EventSpec::OriginArm { center, .. } => {
                let edges = k.edges();
                clusters(k).connects(
                    |d| d.contains(center),
                    |d| edges.iter().any(|s| crate::geometry::disc_touches_segment(d, s.a, s.b)),
                )
            }
        }
    }
}

/// How an event value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Exact,
    Raster(f64),
}

/// Outcome of a detector. `value` is `None` when the raster refinement
/// never settled; `finest` then holds the value at the finest resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub value: Option<bool>,
    pub finest: bool,
    pub resolution: Resolution,
}

impl DetectionResult {
    pub fn exact(v: bool) -> Self {
        DetectionResult { value: Some(v), finest: v, resolution: Resolution::Exact }
    }

    pub fn is_unresolved(&self) -> bool {
        self.value.is_none()
    }
}

/// Detector selection and raster resolutions, the latter as fractions of
/// the event's longer side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorPolicy {
    #[serde(default = "default_mode")]
    pub mode: DetectorMode,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorMode {
    ExactFirst,
    RasterOnly,
}

fn default_mode() -> DetectorMode {
    DetectorMode::ExactFirst
}

fn default_delta0() -> f64 {
    1.0 / 512.0
}

fn default_delta_min() -> f64 {
    1.0 / 4096.0
}

impl Default for DetectorPolicy {
    fn default() -> Self {
        DetectorPolicy { mode: default_mode(), delta0: default_delta0(), delta_min: default_delta_min() }
    }
}

impl DetectorPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta_min > 0.0 && self.delta_min <= self.delta0 && self.delta0 <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < delta_min <= delta0 <= 1, got {} and {}",
                self.delta_min, self.delta0
            )));
        }
        Ok(())
    }
}

/// Evaluates `spec` on `field` by rasterization at `delta0`, `delta0 / 2`,
/// … until two consecutive resolutions agree or `delta_min` is passed.
pub fn detect_raster(spec: &EventSpec, field: &(impl Occupancy + ?Sized), delta0: f64, delta_min: f64) -> Result<DetectionResult> {
    let region = spec.region();
    let mut delta = delta0;
    let mut v = Bitmap::rasterize(field, region, delta)?.evaluate(spec);
    loop {
        let half = 0.5 * delta;
        if half < delta_min * (1.0 - 1e-9) {
            return Ok(DetectionResult { value: None, finest: v, resolution: Resolution::Raster(delta) });
        }
        let w = Bitmap::rasterize(field, region, half)?.evaluate(spec);
        if w == v {
            return Ok(DetectionResult { value: Some(w), finest: w, resolution: Resolution::Raster(half) });
        }
        delta = half;
        v = w;
    }
}

/// Per-realization evaluator that shares clusters and bitmaps between
/// events on the same region.
pub struct Evaluator<'a> {
    field: &'a Field,
    policy: DetectorPolicy,
    clusters: RefCell<Vec<(Rect, Clusters)>>,
    bitmaps: RefCell<Vec<(Rect, f64, bool, Bitmap)>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(field: &'a Field, policy: DetectorPolicy) -> Self {
        Evaluator { field, policy, clusters: RefCell::new(vec![]), bitmaps: RefCell::new(vec![]) }
    }

    pub fn field(&self) -> &Field {
        self.field
    }

    pub fn detect(&self, spec: &EventSpec) -> Result<DetectionResult> {
        if let (DetectorMode::ExactFirst, Some(discs)) = (self.policy.mode, self.field.discs()) {
            let v = spec.exact_with(discs, &mut |k| self.clusters_for(discs, k));
            return Ok(DetectionResult::exact(v));
        }
        let side = spec.scale();
        let mut delta = self.policy.delta0 * side;
        let delta_min = self.policy.delta_min * side;
        let mut v = self.raster_value(spec, delta)?;
        loop {
            let half = 0.5 * delta;
            if half < delta_min * (1.0 - 1e-9) {
                return Ok(DetectionResult { value: None, finest: v, resolution: Resolution::Raster(delta) });
            }
            let w = self.raster_value(spec, half)?;
            if w == v {
                return Ok(DetectionResult { value: Some(w), finest: w, resolution: Resolution::Raster(half) });
            }
            delta = half;
            v = w;
        }
    }

    /// Value on the bitmap of `spec.region()` at resolution `delta`.
    pub fn raster_value(&self, spec: &EventSpec, delta: f64) -> Result<bool> {
        let region = spec.region();
        {
            let cache = self.bitmaps.borrow();
            if let Some((.., b)) = cache.iter().find(|(r, d, _, _)| *r == region && *d == delta) {
                return Ok(b.evaluate(spec));
            }
        }
        let b = Bitmap::rasterize(self.field, region, delta)?;
        let v = b.evaluate(spec);
        let mut cache = self.bitmaps.borrow_mut();
        if cache.len() >= 4 {
            cache.remove(0);
        }
        cache.push((region, delta, true, b));
        Ok(v)
    }

    fn clusters_for(&self, discs: &[crate::geometry::Disc], k: Rect) -> Clusters {
        if let Some((_, c)) = self.clusters.borrow().iter().find(|(r, _)| *r == k) {
            return c.clone();
        }
        let c = Clusters::new(discs, k);
        self.clusters.borrow_mut().push((k, c.clone()));
        c
    }
}

/// Convenience wrapper: one event on one field.
pub fn detect(spec: &EventSpec, field: &Field, policy: DetectorPolicy) -> Result<DetectionResult> {
    Evaluator::new(field, policy).detect(spec)
}
