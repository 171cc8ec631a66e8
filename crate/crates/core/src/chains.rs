//! Simple polygonal chains parameterised by arc length.

use serde::{Deserialize, Serialize};

use crate::bvfield::JumpWall;
use crate::geom::{self, orient, segment_hit, Domain, Point, SegHit};
use crate::{Error, Result};

/// Per-segment frame: unit direction, foot of the segment's line on the
/// hyperplane orthogonal to it, and the offset so that
/// `gamma(t) = foot + (t - a_{i-1} + offset) * eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFrame {
    pub eta: Point,
    pub foot: Point,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalChain {
    pub vertices: Vec<Point>,
    pub params: Vec<f64>,
    pub frames: Vec<SegmentFrame>,
}

impl PolygonalChain {
    pub fn num_segments(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    pub fn point_at(&self, t: f64) -> Point {
        let i = self.params.partition_point(|&a| a <= t).clamp(1, self.vertices.len() - 1) - 1;
        let f = &self.frames[i];
        geom::add(f.foot, geom::scale(f.eta, t - self.params[i] + f.offset))
    }

    pub fn reversed(&self) -> PolygonalChain {
        let vs: Vec<Point> = self.vertices.iter().rev().copied().collect();
        build(vs)
    }
}

fn build(vertices: Vec<Point>) -> PolygonalChain {
    let mut params = vec![0.0];
    let mut frames = Vec::with_capacity(vertices.len() - 1);
    for w in vertices.windows(2) {
        let d = geom::sub(w[1], w[0]);
        let len = geom::norm(d);
        let eta = geom::scale(d, 1.0 / len);
        let offset = geom::dot(w[0], eta);
        let foot = geom::sub(w[0], geom::scale(eta, offset));
        frames.push(SegmentFrame { eta, foot, offset });
        params.push(params[params.len() - 1] + len);
    }
    PolygonalChain { vertices, params, frames }
}

/// Checks that the vertices describe a simple chain inside the domain and
/// computes its arc-length parameterisation.
pub fn validate_chain(domain: &Domain, vertices: &[Point]) -> Result<PolygonalChain> {
    let bad = |segment: usize, reason: String| Err(Error::InvalidChain { segment, reason });
    if vertices.len() < 2 {
        return bad(0, "a chain needs at least two vertices".into());
    }
    let m = vertices.len() - 1;
    for (i, v) in vertices.iter().enumerate() {
        if !v[0].is_finite() || !v[1].is_finite() {
            return bad(i.min(m - 1), format!("vertex {i} is not finite"));
        }
    }
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if vertices[i] == vertices[j] {
                let reason = if j == i + 1 { "zero-length segment" } else { "repeated vertex, chain is not injective" };
                return bad(i.min(m - 1), format!("{reason} ({i} and {j})"));
            }
        }
    }
    for i in 0..m {
        let (a, b) = (vertices[i], vertices[i + 1]);
        if !domain.contains_segment(a, b) {
            return bad(i, "segment leaves the domain".into());
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let (a, b, c, d) = (vertices[i], vertices[i + 1], vertices[j], vertices[j + 1]);
            if j == i + 1 {
                // consecutive: only the shared vertex may be common
                if orient(a, b, d) == 0 && geom::dot(geom::sub(a, b), geom::sub(d, b)) > 0.0 {
                    return bad(j, "chain folds back onto the previous segment".into());
                }
            } else if segment_hit(a, b, c, d) != SegHit::Disjoint {
                return bad(j, format!("segment {j} meets segment {i}"));
            }
        }
    }
    Ok(build(vertices.to_vec()))
}

/// A transversal crossing of one chain segment with one wall segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Crossing {
    pub t: f64,
    pub sign: i8,
    pub wall_segment: usize,
}

/// Crossings of the straight piece `s -> e` (parameters `a .. a + len`) with
/// a wall. Any contact other than a proper crossing is an error.
pub(crate) fn segment_crossings(s: Point, e: Point, a: f64, b: f64, wall: &JumpWall) -> std::result::Result<Vec<Crossing>, String> {
    let mut out = Vec::new();
    for (k, w) in wall.vertices.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        match segment_hit(s, e, p, q) {
            SegHit::Disjoint => {}
            SegHit::Touch => return Err(format!("degenerate contact with wall segment {k}")),
            SegHit::Proper => {
                let f = geom::crossing_fraction(s, e, p, q);
                let t = a + (b - a) * f;
                if !(t > a && t < b) {
                    return Err(format!("crossing with wall segment {k} too close to a vertex"));
                }
                let sign = if orient(p, q, s) > 0 { 1 } else { -1 };
                out.push(Crossing { t, sign, wall_segment: k });
            }
        }
    }
    out.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(out)
}

/// Sorted transversal crossings of the chain with the wall, with +1 when the
/// chain passes from the wall's left to its right.
pub fn wall_crossings(chain: &PolygonalChain, wall: &JumpWall) -> Result<Vec<(f64, i8)>> {
    let mut out = Vec::new();
    for i in 0..chain.num_segments() {
        let (s, e) = (chain.vertices[i], chain.vertices[i + 1]);
        let cs = segment_crossings(s, e, chain.params[i], chain.params[i + 1], wall)
            .map_err(|reason| Error::InvalidChain { segment: i, reason })?;
        out.extend(cs.into_iter().map(|c| (c.t, c.sign)));
    }
    for (i, v) in chain.vertices.iter().enumerate() {
        if wall.distance(*v) <= geom::GEOM_TOL {
            return Err(Error::InvalidChain { segment: i.min(chain.num_segments() - 1), reason: format!("vertex {i} lies on a wall") });
        }
    }
    Ok(out)
}
