//! Planar/3-D points, distances and 2.5-D line-of-sight against extruded
//! building footprints.
//!
//! Buildings are prisms: a simple polygon footprint extruded from the ground
//! to a flat roof. A segment is blocked when some part of it passes through
//! a prism interior, i.e. it is strictly inside the footprint while strictly
//! below the roof. Touching a wall, a corner or the roof plane is visible.

use serde::{Deserialize, Serialize};

use crate::scenario::{Building, Scenario, ScenarioError};

/// Tolerance for on-edge classification and roof grazing, in meters.
pub const EPS: f64 = 1e-9;

/// Planar point in the local metric frame (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn with_z(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2::new(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Point with height above ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Horizontal distance, ignoring height.
pub fn dist2d(a: Point3, b: Point3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

pub fn dist3d(a: Point3, b: Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Outcome of a line-of-sight query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LosResult {
    blocking_building_id: Option<String>,
}

impl LosResult {
    pub fn visible() -> Self {
        Self {
            blocking_building_id: None,
        }
    }

    pub fn blocked_by(id: impl Into<String>) -> Self {
        Self {
            blocking_building_id: Some(id.into()),
        }
    }

    pub fn is_visible(&self) -> bool {
        self.blocking_building_id.is_none()
    }

    pub fn blocking_building_id(&self) -> Option<&str> {
        self.blocking_building_id.as_deref()
    }
}

/// Line of sight between `a` and `b` over the given obstacle set.
///
/// The first blocking building in list order is reported.
pub fn line_of_sight(a: Point3, b: Point3, buildings: &[Building]) -> LosResult {
    match buildings.iter().find(|bld| segment_blocked(a, b, bld)) {
        Some(bld) => LosResult::blocked_by(bld.id.clone()),
        None => LosResult::visible(),
    }
}

/// Axis-aligned bounding box as `[min_x, min_y, max_x, max_y]`.
fn bbox(points: &[Point2]) -> [f64; 4] {
    points.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |[x0, y0, x1, y1], p| [x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)],
    )
}

/// Buildings bucketed on a uniform grid for repeated queries.
///
/// A query visits only the buckets the segment's ground track crosses and
/// clips the segment against each candidate's bounding box before running
/// the exact prism test.
#[derive(Debug, Clone)]
pub struct ObstacleIndex<'a> {
    buildings: &'a [Building],
    boxes: Vec<[f64; 4]>,
    max_roof: f64,
    origin: Point2,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

/// Padding applied to bounding boxes in the prefilters.
const BOX_PAD: f64 = 1e-6;

impl<'a> ObstacleIndex<'a> {
    pub fn new(buildings: &'a [Building]) -> Self {
        let boxes: Vec<[f64; 4]> = buildings.iter().map(|b| bbox(&b.footprint)).collect();
        let max_roof = buildings
            .iter()
            .map(|b| b.roof_height)
            .fold(f64::NEG_INFINITY, f64::max);
        let all = boxes.iter().fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |acc, b| [acc[0].min(b[0]), acc[1].min(b[1]), acc[2].max(b[2]), acc[3].max(b[3])],
        );
        let (origin, cell, cols, rows) = if boxes.is_empty() {
            (Point2::new(0.0, 0.0), 1.0, 0, 0)
        } else {
            let (w, h) = ((all[2] - all[0]).max(1.0), (all[3] - all[1]).max(1.0));
            let cell = (w * h / boxes.len() as f64).sqrt().max(1.0);
            let cols = ((w / cell).floor() as usize + 1).min(1024);
            let rows = ((h / cell).floor() as usize + 1).min(1024);
            let cell = (w / cols as f64).max(h / rows as f64) * (1.0 + 1e-9);
            (Point2::new(all[0], all[1]), cell, cols, rows)
        };
        let mut buckets = vec![Vec::new(); cols * rows];
        let idx = |v: f64, o: f64, n: usize| (((v - o) / cell).floor().max(0.0) as usize).min(n - 1);
        for (i, b) in boxes.iter().enumerate() {
            let (c0, c1) = (idx(b[0], origin.x, cols), idx(b[2], origin.x, cols));
            let (r0, r1) = (idx(b[1], origin.y, rows), idx(b[3], origin.y, rows));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * cols + c].push(i as u32);
                }
            }
        }
        Self {
            buildings,
            boxes,
            max_roof,
            origin,
            cell,
            cols,
            rows,
            buckets,
        }
    }

    /// Calls `f` for every building whose bucket the ground track of
    /// `a`→`b` may touch, possibly more than once, until `f` returns true.
    fn visit(&self, a: Point3, b: Point3, mut f: impl FnMut(usize) -> bool) -> bool {
        if self.cols == 0 {
            return false;
        }
        let cell = self.cell;
        let col_of = |x: f64| ((x - self.origin.x) / cell).floor();
        let row_of = |y: f64| ((y - self.origin.y) / cell).floor();
        let (lo_x, hi_x) = (a.x.min(b.x) - BOX_PAD, a.x.max(b.x) + BOX_PAD);
        let c0 = col_of(lo_x).max(0.0);
        let c1 = col_of(hi_x).min(self.cols as f64 - 1.0);
        if c0 > c1 {
            return false;
        }
        let dx = b.x - a.x;
        for c in c0 as usize..=c1 as usize {
            // y-range of the track inside this column strip.
            let sx0 = (self.origin.x + c as f64 * cell).max(lo_x);
            let sx1 = (self.origin.x + (c + 1) as f64 * cell).min(hi_x);
            let (y0, y1) = if dx.abs() < 1e-12 {
                (a.y.min(b.y), a.y.max(b.y))
            } else {
                let ya = a.y + (b.y - a.y) * ((sx0 - a.x) / dx).clamp(0.0, 1.0);
                let yb = a.y + (b.y - a.y) * ((sx1 - a.x) / dx).clamp(0.0, 1.0);
                (ya.min(yb), ya.max(yb))
            };
            let r0 = row_of(y0 - BOX_PAD).max(0.0);
            let r1 = row_of(y1 + BOX_PAD).min(self.rows as f64 - 1.0);
            if r0 > r1 {
                continue;
            }
            for r in r0 as usize..=r1 as usize {
                for &i in &self.buckets[r * self.cols + c] {
                    if f(i as usize) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Cheap rejection: the segment never enters the padded bounding box
    /// below roof level.
    fn may_block(&self, a: Point3, b: Point3, i: usize) -> bool {
        let bb = self.boxes[i];
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for (o, d, lo, hi) in [(a.x, b.x - a.x, bb[0], bb[2]), (a.y, b.y - a.y, bb[1], bb[3])] {
            let (lo, hi) = (lo - BOX_PAD, hi + BOX_PAD);
            if d.abs() < 1e-12 {
                if o < lo || o > hi {
                    return false;
                }
            } else {
                let (u, v) = ((lo - o) / d, (hi - o) / d);
                t0 = t0.max(u.min(v));
                t1 = t1.min(u.max(v));
                if t0 > t1 {
                    return false;
                }
            }
        }
        let z0 = a.z + (b.z - a.z) * t0;
        let z1 = a.z + (b.z - a.z) * t1;
        z0.min(z1) < self.buildings[i].roof_height - EPS + BOX_PAD
    }

    /// Index of the first building (in list order) blocking `a`→`b`, if any.
    pub fn first_blocker(&self, a: Point3, b: Point3) -> Option<usize> {
        if a.z.min(b.z) >= self.max_roof {
            return None;
        }
        let mut first: Option<usize> = None;
        self.visit(a, b, |i| {
            if first.is_none_or(|f| i < f) && self.may_block(a, b, i) && segment_blocked(a, b, &self.buildings[i]) {
                first = Some(i);
            }
            false
        });
        first
    }

    pub fn is_visible(&self, a: Point3, b: Point3) -> bool {
        if a.z.min(b.z) >= self.max_roof {
            return true;
        }
        !self.visit(a, b, |i| {
            self.may_block(a, b, i) && segment_blocked(a, b, &self.buildings[i])
        })
    }

    pub fn line_of_sight(&self, a: Point3, b: Point3) -> LosResult {
        match self.first_blocker(a, b) {
            Some(i) => LosResult::blocked_by(self.buildings[i].id.clone()),
            None => LosResult::visible(),
        }
    }
}

/// Whether the 3-D segment passes through the interior of the building prism.
fn segment_blocked(a: Point3, b: Point3, building: &Building) -> bool {
    let roof = building.roof_height;
    if a.z.min(b.z) >= roof - EPS {
        return false;
    }
    let poly = &building.footprint;
    let p = a.xy();
    let d = b.xy().sub(p);
    let len = d.norm();
    if len < EPS {
        return strictly_inside(p, poly) && a.z.min(b.z) < roof - EPS;
    }

    // Breakpoints where the segment may enter or leave the footprint.
    let mut ts = vec![0.0, 1.0];
    let s_tol = EPS / len;
    for (i, &u) in poly.iter().enumerate() {
        let v = poly[(i + 1) % poly.len()];
        let e = v.sub(u);
        let w = u.sub(p);
        let denom = d.cross(e);
        if denom.abs() <= EPS * len * e.norm() {
            // Parallel: if collinear, the edge endpoints are breakpoints.
            if w.cross(d).abs() <= EPS * len {
                for q in [u, v] {
                    let t = q.sub(p).dot(d) / (len * len);
                    if (0.0..=1.0).contains(&t) {
                        ts.push(t);
                    }
                }
            }
            continue;
        }
        let t = w.cross(e) / denom;
        let s = w.cross(d) / denom;
        if (-s_tol..=1.0 + s_tol).contains(&s) && (0.0..=1.0).contains(&t) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let z_at = |t: f64| a.z + (b.z - a.z) * t;
    ts.windows(2).any(|w| {
        let (t0, t1) = (w[0], w[1]);
        if (t1 - t0) * len <= EPS {
            return false;
        }
        let tm = 0.5 * (t0 + t1);
        let mid = Point2::new(p.x + d.x * tm, p.y + d.y * tm);
        strictly_inside(mid, poly) && z_at(t0).min(z_at(t1)) < roof - EPS
    })
}

/// Distance from `p` to the segment `u`→`v`.
pub fn point_segment_distance(p: Point2, u: Point2, v: Point2) -> f64 {
    let e = v.sub(u);
    let l2 = e.dot(e);
    if l2 == 0.0 {
        return p.sub(u).norm();
    }
    let t = (p.sub(u).dot(e) / l2).clamp(0.0, 1.0);
    Point2::new(u.x + e.x * t - p.x, u.y + e.y * t - p.y).norm()
}

/// Even-odd containment; points within [`EPS`] of an edge count as outside.
pub fn strictly_inside(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let u = poly[i];
        let v = poly[(i + 1) % n];
        if point_segment_distance(p, u, v) <= EPS {
            return false;
        }
        if (u.y > p.y) != (v.y > p.y) {
            let x = u.x + (p.y - u.y) * (v.x - u.x) / (v.y - u.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Twice the signed area; positive for counter-clockwise rings.
pub fn signed_area2(poly: &[Point2]) -> f64 {
    (0..poly.len()).map(|i| poly[i].cross(poly[(i + 1) % poly.len()])).sum()
}

/// Proper or touching intersection of two closed segments.
pub(crate) fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = q2.sub(q1).cross(p1.sub(q1));
    let d2 = q2.sub(q1).cross(p2.sub(q1));
    let d3 = p2.sub(p1).cross(q1.sub(p1));
    let d4 = p2.sub(p1).cross(q2.sub(p1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point2, b: Point2, c: Point2, d: f64| {
        d == 0.0 && c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Binary cell × panel visibility indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl VisibilityMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged visibility matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, cell: usize, panel: usize) -> bool {
        self.data[cell * self.cols + panel]
    }

    pub fn set(&mut self, cell: usize, panel: usize, value: bool) {
        self.data[cell * self.cols + panel] = value;
    }

    /// Number of visible pairs.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// Cell-to-panel visibility, OR-ed over every offset configuration.
pub fn visibility_matrix(scenario: &Scenario, offsets: &[f64]) -> Result<VisibilityMatrix, ScenarioError> {
    let mut chi = VisibilityMatrix::new(scenario.cells().len(), scenario.ris_panels().len());
    let index = ObstacleIndex::new(scenario.buildings());
    for &offset in offsets {
        let shifted = scenario.apply_ris_offset(offset)?;
        for (i, cell) in shifted.cells().iter().enumerate() {
            for (j, panel) in shifted.ris_panels().iter().enumerate() {
                if !chi.get(i, j) && index.is_visible(cell.antenna_point(), panel.center()) {
                    chi.set(i, j, true);
                }
            }
        }
    }
    Ok(chi)
}
