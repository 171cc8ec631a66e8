//! Planar primitives shared by the field, chain and graph code.
//!
//! Orientation signs come from adaptive exact predicates, so side tests and
//! crossing classification never disagree with each other.

use serde::{Deserialize, Serialize};

use crate::Error;

pub type Point = [f64; 2];

/// Points closer than this to a wall or to the domain boundary count as on it.
pub const GEOM_TOL: f64 = 1e-10;

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Left normal of a direction.
#[inline]
pub fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}

pub fn lerp(a: Point, b: Point, s: f64) -> Point {
    [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s]
}

/// Sign of the orientation of the triangle (a, b, c): +1 counter-clockwise,
/// -1 clockwise, 0 collinear. Exact for all finite doubles.
pub fn orient(a: Point, b: Point, c: Point) -> i8 {
    let v = robust::orient2d(
        robust::Coord { x: a[0], y: a[1] },
        robust::Coord { x: b[0], y: b[1] },
        robust::Coord { x: c[0], y: c[1] },
    );
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn within_box(p: Point, a: Point, b: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegHit {
    Disjoint,
    /// Interiors cross at a single point, no endpoint involved.
    Proper,
    /// Any other contact: endpoint on the other segment, collinear overlap.
    Touch,
}

pub fn segment_hit(p0: Point, p1: Point, q0: Point, q1: Point) -> SegHit {
    let o1 = orient(p0, p1, q0);
    let o2 = orient(p0, p1, q1);
    let o3 = orient(q0, q1, p0);
    let o4 = orient(q0, q1, p1);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return SegHit::Proper;
    }
    if (o1 == 0 && within_box(q0, p0, p1))
        || (o2 == 0 && within_box(q1, p0, p1))
        || (o3 == 0 && within_box(p0, q0, q1))
        || (o4 == 0 && within_box(p1, q0, q1))
    {
        return SegHit::Touch;
    }
    SegHit::Disjoint
}

/// Fraction along `p0 -> p1` where it meets the line through `q0, q1`.
/// The wall segment is put in lexicographic order first so that the same
/// geometric segment gives bit-identical results in either orientation.
pub fn crossing_fraction(p0: Point, p1: Point, q0: Point, q1: Point) -> f64 {
    let (a, b) = if (q0[0], q0[1]) <= (q1[0], q1[1]) { (q0, q1) } else { (q1, q0) };
    let e = sub(b, a);
    let num = cross(sub(a, p0), e);
    let den = cross(sub(p1, p0), e);
    (num / den).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    if l2 == 0.0 {
        return dist(p, a);
    }
    let s = (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0);
    dist(p, lerp(a, b, s))
}

/// Winding number of a closed loop (last vertex equal to the first) around `p`.
/// Points on the loop get an arbitrary but deterministic answer.
pub fn winding_number(lp: &[Point], p: Point) -> i32 {
    let mut w = 0;
    for s in lp.windows(2) {
        let (a, b) = (s[0], s[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(a, b, p) > 0 {
                w += 1;
            }
        } else if b[1] <= p[1] && orient(a, b, p) < 0 {
            w -= 1;
        }
    }
    w
}

pub fn polygon_area(vs: &[Point]) -> f64 {
    let n = vs.len();
    let mut s = 0.0;
    for i in 0..n {
        s += cross(vs[i], vs[(i + 1) % n]);
    }
    0.5 * s
}

/// Liang-Barsky clip of a segment against an axis-aligned box; returns the
/// parameter range in [0, 1] that lies inside, if any.
pub fn clip_segment(a: Point, b: Point, lo: Point, hi: Point) -> Option<(f64, f64)> {
    let d = sub(b, a);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        if d[k] == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return None;
            }
        } else {
            let mut ta = (lo[k] - a[k]) / d[k];
            let mut tb = (hi[k] - a[k]) / d[k];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((t0, t1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Rect { min: Point, max: Point },
    /// Counter-clockwise simple polygon, first vertex not repeated.
    Polygon(Vec<Point>),
}

impl Domain {
    pub fn rect(min: Point, max: Point) -> Result<Self, Error> {
        if !(min[0] < max[0] && min[1] < max[1]) || !min.iter().chain(max.iter()).all(|v| v.is_finite()) {
            return Err(Error::Construction(format!("degenerate rectangle {min:?}..{max:?}")));
        }
        Ok(Domain::Rect { min, max })
    }

    pub fn polygon(mut vs: Vec<Point>) -> Result<Self, Error> {
        if vs.len() >= 2 && vs.first() == vs.last() {
            vs.pop();
        }
        if vs.len() < 3 {
            return Err(Error::Construction("polygon needs at least 3 vertices".into()));
        }
        let n = vs.len();
        for i in 0..n {
            if vs[i] == vs[(i + 1) % n] {
                return Err(Error::Construction(format!("polygon has a repeated vertex at {i}")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let hit = segment_hit(vs[i], vs[(i + 1) % n], vs[j], vs[(j + 1) % n]);
                if adjacent {
                    // consecutive edges may only share their common vertex
                    let (shared, a, b) = if j == i + 1 {
                        (vs[j], vs[i], vs[(j + 1) % n])
                    } else {
                        (vs[i], vs[(i + 1) % n], vs[j])
                    };
                    if orient(a, shared, b) == 0 && dot(sub(a, shared), sub(b, shared)) > 0.0 {
                        return Err(Error::Construction(format!("polygon folds back at vertex {j}")));
                    }
                } else if hit != SegHit::Disjoint {
                    return Err(Error::Construction(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        let area = polygon_area(&vs);
        if area == 0.0 {
            return Err(Error::Construction("polygon has zero area".into()));
        }
        if area < 0.0 {
            vs.reverse();
        }
        Ok(Domain::Polygon(vs))
    }

    pub fn bbox(&self) -> (Point, Point) {
        match self {
            Domain::Rect { min, max } => (*min, *max),
            Domain::Polygon(vs) => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vs {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Counter-clockwise boundary vertices.
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Domain::Rect { min, max } => vec![*min, [max[0], min[1]], *max, [min[0], max[1]]],
            Domain::Polygon(vs) => vs.clone(),
        }
    }

    pub fn edges(&self) -> Vec<(Point, Point)> {
        let vs = self.vertices();
        let n = vs.len();
        (0..n).map(|i| (vs[i], vs[(i + 1) % n])).collect()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices())
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn on_boundary(&self, p: Point) -> bool {
        self.boundary_distance(p) <= GEOM_TOL
    }

    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Domain::Rect { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
            Domain::Polygon(vs) => {
                let n = vs.len();
                for i in 0..n {
                    let (a, b) = (vs[i], vs[(i + 1) % n]);
                    if orient(a, b, p) == 0 && within_box(p, a, b) {
                        return false;
                    }
                }
                let mut lp = vs.clone();
                lp.push(vs[0]);
                winding_number(&lp, p) != 0
            }
        }
    }

    pub fn contains_closed(&self, p: Point) -> bool {
        self.contains(p) || self.on_boundary(p)
    }

    /// Whether the open segment and both endpoints lie strictly inside.
    pub fn contains_segment(&self, a: Point, b: Point) -> bool {
        if !self.contains(a) || !self.contains(b) {
            return false;
        }
        match self {
            Domain::Rect { .. } => true,
            Domain::Polygon(_) => self.edges().iter().all(|&(p, q)| segment_hit(a, b, p, q) == SegHit::Disjoint),
        }
    }

    /// Whether a segment stays in the closure of the domain.
    pub fn contains_segment_closed(&self, a: Point, b: Point) -> bool {
        if !self.contains_closed(a) || !self.contains_closed(b) {
            return false;
        }
        match self {
            Domain::Rect { .. } => true,
            Domain::Polygon(_) => {
                if self.edges().iter().any(|&(p, q)| segment_hit(a, b, p, q) == SegHit::Proper) {
                    return false;
                }
                self.contains_closed(lerp(a, b, 0.5))
            }
        }
    }

    /// Position of a boundary point as (edge index, fraction along the edge).
    pub fn boundary_position(&self, p: Point) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, (a, b)) in self.edges().into_iter().enumerate() {
            let d = point_segment_distance(p, a, b);
            if d <= GEOM_TOL && best.is_none_or(|(_, _, bd)| d < bd) {
                let ab = sub(b, a);
                let s = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
                best = Some((i, s, d));
            }
        }
        best.map(|(i, s, _)| (i, s))
    }

    /// Boundary path from `from` to `to` walking clockwise, as the list of
    /// corner vertices visited in between.
    pub fn clockwise_path(&self, from: Point, to: Point) -> Option<Vec<Point>> {
        let vs = self.vertices();
        let n = vs.len();
        let (ef, sf) = self.boundary_position(from)?;
        let (et, st) = self.boundary_position(to)?;
        let mut out = Vec::new();
        if ef == et && st <= sf {
            return Some(out);
        }
        // walking clockwise along edge i means heading towards vertex i
        let mut e = ef;
        loop {
            out.push(vs[e]);
            e = (e + n - 1) % n;
            if e == et {
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_signs() {
        assert_eq!(orient([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]), 1);
        assert_eq!(orient([0.0, 0.0], [1.0, 0.0], [0.0, -1.0]), -1);
        assert_eq!(orient([0.0, 0.0], [1.0, 1.0], [3.0, 3.0]), 0);
        // nearly collinear: naive evaluation gets this wrong
        assert_eq!(orient([0.5, 0.5], [12.0, 12.0], [24.0, 24.000000000000004]), 1);
    }

    #[test]
    fn segment_classification() {
        assert_eq!(segment_hit([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]), SegHit::Proper);
        assert_eq!(segment_hit([0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.5, 1.0]), SegHit::Touch);
        assert_eq!(segment_hit([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]), SegHit::Disjoint);
        assert_eq!(segment_hit([0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [3.0, 0.0]), SegHit::Touch);
    }

    #[test]
    fn crossing_fraction_is_orientation_free() {
        let (p0, p1) = ([0.1, 0.3], [0.9, 0.37]);
        let (q0, q1) = ([0.4123, -0.2], [0.45, 1.3]);
        assert_eq!(crossing_fraction(p0, p1, q0, q1), crossing_fraction(p0, p1, q1, q0));
    }

    #[test]
    fn winding_of_squares() {
        let ccw = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
        assert_eq!(winding_number(&ccw, [0.5, 0.5]), 1);
        assert_eq!(winding_number(&ccw, [1.5, 0.5]), 0);
        let cw: Vec<Point> = ccw.iter().rev().copied().collect();
        assert_eq!(winding_number(&cw, [0.5, 0.5]), -1);
    }

    #[test]
    fn polygon_is_normalised_ccw() {
        let d = Domain::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(d.area() > 0.0);
        assert!(d.contains([0.5, 0.5]));
        assert!(!d.contains([1.0, 0.5]));
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn nonconvex_segment_containment() {
        let l = Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        assert!(l.contains_segment([0.5, 0.5], [1.5, 0.5]));
        // grazes the reflex corner
        assert!(!l.contains_segment([1.5, 0.5], [0.5, 1.5]));
        assert!(!l.contains_segment([1.5, 0.9], [0.9, 1.5]));
        assert!(!l.contains_segment([1.8, 0.5], [0.5, 1.8]));
    }

    #[test]
    fn clockwise_boundary_walk() {
        let d = Domain::rect([0.0, 0.0], [1.0, 1.0]).unwrap();
        // from top middle clockwise to bottom middle passes the right side
        let path = d.clockwise_path([0.5, 1.0], [0.5, 0.0]).unwrap();
        assert_eq!(path, vec![[1.0, 1.0], [1.0, 0.0]]);
        let back = d.clockwise_path([0.5, 0.0], [0.5, 1.0]).unwrap();
        assert_eq!(back, vec![[0.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn clipping() {
        let (t0, t1) = clip_segment([-1.0, 0.5], [2.0, 0.5], [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert!((t0 - 1.0 / 3.0).abs() < 1e-15 && (t1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(clip_segment([-1.0, 2.0], [2.0, 2.0], [0.0, 0.0], [1.0, 1.0]).is_none());
    }
}
