//! Structured BV fields on planar domains: a bilinear smooth part, jump walls
//! and Cantor channels.
//!
//! A closed wall with constant height adds `h` on its right side. A wall whose
//! two ends sit on the domain boundary is closed up along the boundary, so it
//! too is a step of height `h` towards its right. Any other wall (open, or
//! with heights varying per segment) is a double layer: each segment
//! contributes `-h/(2 pi)` times the angle it subtends, which jumps by exactly
//! `h` across the segment and is smooth elsewhere.

use std::f64::consts::PI;

use crate::bv1d::{self, AcPiece, AngleTerm, BVProfile, CantorAtom, JumpAtom, DEFAULT_DEPTH};
use crate::chains::{segment_crossings, PolygonalChain};
use crate::geom::{self, cross, dot, orient, perp, segment_hit, sub, Domain, Point, SegHit, GEOM_TOL};
use crate::{Error, Result};

/// Offset used to read the value of a step wall on one side of it.
const SIDE_OFFSET: f64 = 1e-9;
/// Number of directions probed around points where several walls meet.
const SECTOR_DIRECTIONS: usize = 72;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothGrid {
    pub origin: Point,
    pub spacing: [f64; 2],
    /// Number of samples along x and y, each at least 2.
    pub shape: [usize; 2],
    /// Row-major samples, index `j * nx + i`.
    pub values: Vec<f64>,
}

impl SmoothGrid {
    pub fn new(origin: Point, spacing: [f64; 2], shape: [usize; 2], values: Vec<f64>) -> Result<Self> {
        if shape[0] < 2 || shape[1] < 2 || values.len() != shape[0] * shape[1] {
            return Err(Error::Construction(format!(
                "smooth grid of shape {shape:?} needs {} samples, got {}",
                shape[0] * shape[1],
                values.len()
            )));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction("smooth grid spacing must be positive and samples finite".into()));
        }
        Ok(SmoothGrid { origin, spacing, shape, values })
    }

    /// Samples `f` on a `shape` grid spanning the box.
    pub fn from_fn(lo: Point, hi: Point, shape: [usize; 2], f: impl Fn(Point) -> f64) -> Result<Self> {
        let spacing = [(hi[0] - lo[0]) / (shape[0] - 1) as f64, (hi[1] - lo[1]) / (shape[1] - 1) as f64];
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                values.push(f([lo[0] + i as f64 * spacing[0], lo[1] + j as f64 * spacing[1]]));
            }
        }
        SmoothGrid::new(lo, spacing, shape, values)
    }

    pub fn constant(lo: Point, hi: Point, c: f64) -> Result<Self> {
        SmoothGrid::from_fn(lo, hi, [2, 2], |_| c)
    }

    pub fn extent(&self) -> (Point, Point) {
        let hi = [
            self.origin[0] + self.spacing[0] * (self.shape[0] - 1) as f64,
            self.origin[1] + self.spacing[1] * (self.shape[1] - 1) as f64,
        ];
        (self.origin, hi)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.shape[0] + i]
    }

    /// Cell indices and local coordinates, clamped to the grid.
    fn locate(&self, p: Point) -> (usize, usize, f64, f64) {
        let mut idx = [0usize; 2];
        let mut loc = [0.0; 2];
        for k in 0..2 {
            let s = ((p[k] - self.origin[k]) / self.spacing[k]).clamp(0.0, (self.shape[k] - 1) as f64);
            let c = (s.floor() as usize).min(self.shape[k] - 2);
            idx[k] = c;
            loc[k] = s - c as f64;
        }
        (idx[0], idx[1], loc[0], loc[1])
    }

    fn corners(&self, i: usize, j: usize) -> (f64, f64, f64, f64) {
        let (f00, f10, f01, f11) = (self.at(i, j), self.at(i + 1, j), self.at(i, j + 1), self.at(i + 1, j + 1));
        (f00, f10 - f00, f01 - f00, f11 - f10 - f01 + f00)
    }

    pub fn eval(&self, p: Point) -> f64 {
        let (i, j, u, v) = self.locate(p);
        let (a, b, c, d) = self.corners(i, j);
        a + b * u + c * v + d * u * v
    }

    pub fn gradient(&self, p: Point) -> Point {
        let (i, j, u, v) = self.locate(p);
        let (_, b, c, d) = self.corners(i, j);
        [(b + d * v) / self.spacing[0], (c + d * u) / self.spacing[1]]
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn min_sample(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise sum of two grids with the same layout.
    pub fn plus(&self, other: &SmoothGrid) -> Result<SmoothGrid> {
        if self.origin != other.origin || self.spacing != other.spacing || self.shape != other.shape {
            return Err(Error::Contract("smooth grids must share their layout".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        SmoothGrid::new(self.origin, self.spacing, self.shape, values)
    }

    /// Slope and curvature along direction `eta` for the cell containing `mid`,
    /// measured from the point `start` of the same cell.
    fn quadratic_along(&self, start: Point, mid: Point, eta: Point) -> (f64, f64) {
        let (i, j, _, _) = self.locate(mid);
        let (_, b, c, d) = self.corners(i, j);
        let u = ((start[0] - self.origin[0]) / self.spacing[0] - i as f64).clamp(0.0, 1.0);
        let v = ((start[1] - self.origin[1]) / self.spacing[1] - j as f64).clamp(0.0, 1.0);
        let ex = eta[0] / self.spacing[0];
        let ey = eta[1] / self.spacing[1];
        let slope = b * ex + c * ey + d * (u * ey + v * ex);
        (slope, d * ex * ey)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpWall {
    pub vertices: Vec<Point>,
    /// One height per segment.
    pub heights: Vec<f64>,
}

impl JumpWall {
    pub fn new(vertices: Vec<Point>, height: f64) -> Self {
        let n = vertices.len().saturating_sub(1);
        JumpWall { vertices, heights: vec![height; n] }
    }

    pub fn with_heights(vertices: Vec<Point>, heights: Vec<f64>) -> Self {
        JumpWall { vertices, heights }
    }

    pub fn is_closed(&self) -> bool {
        self.vertices.len() > 3 && self.vertices.first() == self.vertices.last()
    }

    pub fn constant_height(&self) -> Option<f64> {
        let h = self.heights[0];
        self.heights.iter().all(|&x| x == h).then_some(h)
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point, f64)> + '_ {
        self.vertices.windows(2).zip(&self.heights).map(|(w, &h)| (w[0], w[1], h))
    }

    pub fn distance(&self, p: Point) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| geom::point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| geom::dist(w[0], w[1])).sum()
    }

    pub fn scaled(&self, lambda: f64) -> JumpWall {
        JumpWall { vertices: self.vertices.clone(), heights: self.heights.iter().map(|h| h * lambda).collect() }
    }

    fn validate(&self, domain: &Domain, index: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Construction(format!("wall {index}: {m}")));
        if self.vertices.len() < 2 {
            return bad("needs at least two vertices".into());
        }
        if self.heights.len() != self.vertices.len() - 1 {
            return bad(format!("{} heights for {} segments", self.heights.len(), self.vertices.len() - 1));
        }
        if self.heights.iter().any(|h| !h.is_finite() || *h == 0.0) {
            return bad("heights must be finite and nonzero".into());
        }
        let n = self.vertices.len() - 1;
        for (k, w) in self.vertices.windows(2).enumerate() {
            if w[0] == w[1] {
                return bad(format!("segment {k} has zero length"));
            }
            if !domain.contains_segment_closed(w[0], w[1]) {
                return bad(format!("segment {k} leaves the closed domain"));
            }
        }
        let closed = self.vertices.first() == self.vertices.last();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b, c, d) = (self.vertices[i], self.vertices[i + 1], self.vertices[j], self.vertices[j + 1]);
                let adjacent = j == i + 1 || (closed && i == 0 && j == n - 1);
                if adjacent {
                    let (x, shared, y) = if j == i + 1 { (a, b, d) } else { (b, a, c) };
                    if orient(x, shared, y) == 0 && dot(sub(x, shared), sub(y, shared)) > 0.0 {
                        return bad(format!("folds back at vertex {}", i + 1));
                    }
                } else if segment_hit(a, b, c, d) != SegHit::Disjoint {
                    return bad(format!("segments {i} and {j} intersect"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantorChannel {
    pub direction: Point,
    pub band: [f64; 2],
    pub weight: f64,
}

impl CantorChannel {
    pub fn ell(&self, p: Point) -> f64 {
        (dot(p, self.direction) - self.band[0]) / (self.band[1] - self.band[0])
    }

    pub fn value(&self, p: Point) -> f64 {
        self.weight * bv1d::cantor(self.ell(p).clamp(0.0, 1.0))
    }

    pub fn scaled(&self, lambda: f64) -> CantorChannel {
        CantorChannel { weight: self.weight * lambda, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WallMode {
    /// Step of height `h` on the right of a closed loop (possibly completed
    /// along the domain boundary).
    Step { lp: Vec<Point>, h: f64 },
    /// Sum of per-segment double layers.
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Hit {
    Interior(usize),
    Vertex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredBVField {
    pub domain: Domain,
    pub smooth: SmoothGrid,
    pub walls: Vec<JumpWall>,
    pub channels: Vec<CantorChannel>,
    modes: Vec<WallMode>,
}

impl StructuredBVField {
    pub fn new(domain: Domain, smooth: SmoothGrid, walls: Vec<JumpWall>, channels: Vec<CantorChannel>) -> Result<Self> {
        let (lo, hi) = domain.bbox();
        let (glo, ghi) = smooth.extent();
        let slack = 1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        if glo[0] > lo[0] + slack || glo[1] > lo[1] + slack || ghi[0] < hi[0] - slack || ghi[1] < hi[1] - slack {
            return Err(Error::Construction("smooth grid must cover the domain's bounding box".into()));
        }
        let mut modes = Vec::with_capacity(walls.len());
        for (k, w) in walls.iter().enumerate() {
            w.validate(&domain, k)?;
            modes.push(Self::mode_for(&domain, w));
        }
        for (k, c) in channels.iter().enumerate() {
            let n = geom::norm(c.direction);
            if !c.weight.is_finite() || c.weight == 0.0 {
                return Err(Error::Construction(format!("channel {k}: weight must be finite and nonzero")));
            }
            if !((n - 1.0).abs() <= 1e-12) {
                return Err(Error::Construction(format!("channel {k}: direction must be a unit vector")));
            }
            if !(c.band[0] < c.band[1]) {
                return Err(Error::Construction(format!("channel {k}: band must satisfy a < b")));
            }
            let proj: Vec<f64> = domain.vertices().iter().map(|v| dot(*v, c.direction)).collect();
            let (pmin, pmax) = proj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            if c.band[1] <= pmin || c.band[0] >= pmax {
                return Err(Error::Construction(format!("channel {k}: band misses the domain")));
            }
        }
        Ok(StructuredBVField { domain, smooth, walls, channels, modes })
    }

    pub fn constant(domain: Domain, c: f64) -> Result<Self> {
        let (lo, hi) = domain.bbox();
        StructuredBVField::new(domain, SmoothGrid::constant(lo, hi, c)?, vec![], vec![])
    }

    fn mode_for(domain: &Domain, w: &JumpWall) -> WallMode {
        let Some(h) = w.constant_height() else { return WallMode::Layer };
        if w.is_closed() {
            return WallMode::Step { lp: w.vertices.clone(), h };
        }
        let (first, last) = (w.vertices[0], w.vertices[w.vertices.len() - 1]);
        if domain.on_boundary(first) && domain.on_boundary(last) {
            if let Some(path) = domain.clockwise_path(last, first) {
                let mut lp = w.vertices.clone();
                lp.extend(path);
                lp.push(first);
                return WallMode::Step { lp, h };
            }
        }
        WallMode::Layer
    }

    pub fn wall_modes(&self) -> &[WallMode] {
        &self.modes
    }

    pub fn is_pure_jump(&self) -> bool {
        self.channels.is_empty()
    }

    /// Whether the absolutely continuous gradient vanishes identically.
    pub fn has_zero_ac_gradient(&self) -> bool {
        self.smooth.is_constant() && self.modes.iter().all(|m| matches!(m, WallMode::Step { .. }))
    }

    pub fn with_smooth(&self, smooth: SmoothGrid) -> Result<Self> {
        StructuredBVField::new(self.domain.clone(), smooth, self.walls.clone(), self.channels.clone())
    }

    /// Scales every wall height and channel weight by `lambda`.
    pub fn scale_singular(&self, lambda: f64) -> Result<Self> {
        StructuredBVField::new(
            self.domain.clone(),
            self.smooth.clone(),
            self.walls.iter().map(|w| w.scaled(lambda)).collect(),
            self.channels.iter().map(|c| c.scaled(lambda)).collect(),
        )
    }

    fn check_inside(&self, x: Point) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point {x:?} is not in the domain")))
        }
    }

    fn hits(&self, x: Point) -> Vec<(usize, Hit)> {
        let mut out = Vec::new();
        for (k, w) in self.walls.iter().enumerate() {
            for (s, pair) in w.vertices.windows(2).enumerate() {
                if geom::point_segment_distance(x, pair[0], pair[1]) <= GEOM_TOL {
                    let at_vertex = geom::dist(x, pair[0]) <= GEOM_TOL || geom::dist(x, pair[1]) <= GEOM_TOL;
                    out.push((k, if at_vertex { Hit::Vertex(s) } else { Hit::Interior(s) }));
                }
            }
        }
        out
    }

    pub fn on_wall(&self, x: Point) -> bool {
        self.walls.iter().any(|w| w.distance(x) <= GEOM_TOL)
    }

    fn layer_angle(p: Point, q: Point, x: Point) -> f64 {
        let (a, b) = (sub(p, x), sub(q, x));
        cross(a, b).atan2(dot(a, b))
    }

    fn wall_value(&self, k: usize, x: Point) -> f64 {
        match &self.modes[k] {
            WallMode::Step { lp, h } => -h * geom::winding_number(lp, x) as f64,
            WallMode::Layer => self.walls[k].segments().map(|(p, q, h)| -h * (Self::layer_angle(p, q, x) / (2.0 * PI))).sum(),
        }
    }

    /// Value of wall `k` at a point on it, read from direction `u`.
    fn wall_value_towards(&self, k: usize, x: Point, u: Point) -> f64 {
        match &self.modes[k] {
            WallMode::Step { lp, h } => -h * geom::winding_number(lp, geom::add(x, geom::scale(u, SIDE_OFFSET))) as f64,
            WallMode::Layer => self.walls[k]
                .segments()
                .map(|(p, q, h)| {
                    let theta = if geom::dist(x, p) <= GEOM_TOL {
                        let a = geom::scale(u, -1.0);
                        let b = sub(q, x);
                        cross(a, b).atan2(dot(a, b))
                    } else if geom::dist(x, q) <= GEOM_TOL {
                        let a = sub(p, x);
                        let b = geom::scale(u, -1.0);
                        cross(a, b).atan2(dot(a, b))
                    } else if geom::point_segment_distance(x, p, q) <= GEOM_TOL {
                        if cross(sub(q, p), u) > 0.0 {
                            PI
                        } else {
                            -PI
                        }
                    } else {
                        Self::layer_angle(p, q, x)
                    };
                    -h * (theta / (2.0 * PI))
                })
                .sum(),
        }
    }

    fn base_value(&self, x: Point) -> f64 {
        self.smooth.eval(x) + self.channels.iter().map(|c| c.value(x)).sum::<f64>()
    }

    /// Value of the precise representative at a point off every wall.
    fn value_off_walls(&self, x: Point) -> f64 {
        let mut v = self.base_value(x);
        for k in 0..self.walls.len() {
            v += self.wall_value(k, x);
        }
        v
    }

    /// Limit of the field at `x` approached from direction `u`.
    pub fn value_towards(&self, x: Point, u: Point) -> f64 {
        let hits = self.hits(x);
        let mut v = self.base_value(x);
        for k in 0..self.walls.len() {
            if hits.iter().any(|(w, _)| *w == k) {
                v += self.wall_value_towards(k, x, u);
            } else {
                v += self.wall_value(k, x);
            }
        }
        v
    }

    fn probe_directions(&self, hits: &[(usize, Hit)]) -> Vec<Point> {
        if let [(k, Hit::Interior(s))] = hits {
            let w = &self.walls[*k];
            let d = sub(w.vertices[s + 1], w.vertices[*s]);
            let n = geom::scale(perp(d), 1.0 / geom::norm(d));
            return vec![n, geom::scale(n, -1.0)];
        }
        (0..SECTOR_DIRECTIONS)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.37) / SECTOR_DIRECTIONS as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    }

    fn sector(&self, x: Point) -> Option<Vec<f64>> {
        let hits = self.hits(x);
        if hits.is_empty() {
            return None;
        }
        Some(self.probe_directions(&hits).into_iter().map(|u| self.value_towards(x, u)).collect())
    }

    /// Approximate lower limit u^(x).
    pub fn eval_lower(&self, x: Point) -> Result<f64> {
        self.check_inside(x)?;
        Ok(match self.sector(x) {
            None => self.value_off_walls(x),
            Some(vals) => vals.into_iter().fold(f64::INFINITY, f64::min),
        })
    }

    /// Approximate upper limit.
    pub fn eval_upper(&self, x: Point) -> Result<f64> {
        self.check_inside(x)?;
        Ok(match self.sector(x) {
            None => self.value_off_walls(x),
            Some(vals) => vals.into_iter().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    pub fn jump_size(&self, x: Point) -> Result<f64> {
        self.check_inside(x)?;
        let hits = self.hits(x);
        match hits.as_slice() {
            [] => Ok(0.0),
            [(k, Hit::Interior(s))] => Ok(self.walls[*k].heights[*s].abs()),
            _ => {
                let vals = self.sector(x).unwrap_or_default();
                let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                Ok(hi - lo)
            }
        }
    }

    /// Gradient of the absolutely continuous part, where it exists.
    pub fn ac_gradient(&self, x: Point) -> Point {
        let mut g = self.smooth.gradient(x);
        for (k, m) in self.modes.iter().enumerate() {
            if let WallMode::Layer = m {
                for (p, q, h) in self.walls[k].segments() {
                    let (a, b) = (sub(p, x), sub(q, x));
                    let (na, nb) = (dot(a, a), dot(b, b));
                    let gx = b[1] / nb - a[1] / na;
                    let gy = -b[0] / nb + a[0] / na;
                    g[0] += -h / (2.0 * PI) * gx;
                    g[1] += -h / (2.0 * PI) * gy;
                }
            }
        }
        g
    }

    pub fn is_admissible_node(&self, x: Point) -> bool {
        if !self.domain.contains(x) || self.on_wall(x) {
            return false;
        }
        self.channels.iter().all(|c| !bv1d::in_cantor_set(c.ell(x), DEFAULT_DEPTH))
    }

    /// Restriction along a polygonal chain.
    pub fn restrict(&self, chain: &PolygonalChain) -> Result<BVProfile> {
        let m = chain.num_segments();
        for (i, v) in chain.vertices.iter().enumerate() {
            if self.on_wall(*v) {
                return Err(Error::InvalidChain { segment: i.min(m - 1), reason: format!("vertex {i} lies on a wall") });
            }
        }
        for (i, v) in [(0, chain.vertices[0]), (m - 1, chain.vertices[m])] {
            for (k, c) in self.channels.iter().enumerate() {
                if bv1d::in_cantor_set(c.ell(v), DEFAULT_DEPTH) {
                    return Err(Error::InvalidChain { segment: i, reason: format!("endpoint on a Cantor fiber of channel {k}") });
                }
            }
        }
        let mut out: Option<BVProfile> = None;
        for i in 0..m {
            let seg = self.restrict_segment(chain, i).map_err(|reason| Error::InvalidChain { segment: i, reason })?;
            out = Some(match out {
                None => seg,
                Some(acc) => bv1d::concat(&acc, &seg, 0.0)?,
            });
        }
        Ok(out.expect("chain has at least one segment"))
    }

    fn restrict_segment(&self, chain: &PolygonalChain, i: usize) -> std::result::Result<BVProfile, String> {
        let (s, e) = (chain.vertices[i], chain.vertices[i + 1]);
        let (a, b) = (chain.params[i], chain.params[i + 1]);
        let eta = chain.frames[i].eta;
        let len = b - a;
        let at = |t: f64| geom::add(s, geom::scale(eta, t - a));

        // continuous part split at the smooth grid lines
        let mut fr = vec![0.0, 1.0];
        for k in 0..2 {
            let (lo, hi) = (s[k].min(e[k]), s[k].max(e[k]));
            if s[k] == e[k] {
                continue;
            }
            for g in 0..self.smooth.shape[k] {
                let x = self.smooth.origin[k] + g as f64 * self.smooth.spacing[k];
                if x > lo && x < hi {
                    fr.push((x - s[k]) / (e[k] - s[k]));
                }
            }
        }
        fr.sort_by(f64::total_cmp);
        fr.dedup();
        let mut ts: Vec<f64> = fr.iter().map(|f| a + len * f).collect();
        ts[0] = a;
        *ts.last_mut().unwrap() = b;
        ts.dedup();
        let mut pieces = Vec::with_capacity(ts.len() - 1);
        let mut level = self.value_off_walls(s);
        for w in ts.windows(2) {
            let (p0, p1) = (at(w[0]), at(w[1]));
            let (slope, curvature) = self.smooth.quadratic_along(p0, geom::lerp(p0, p1, 0.5), eta);
            let piece = AcPiece { start: w[0], end: w[1], value: level, slope, curvature };
            let d = w[1] - w[0];
            level += slope * d + curvature * d * d;
            pieces.push(piece);
        }

        let mut jumps = Vec::new();
        let mut angles = Vec::new();
        let n = perp(eta);
        let mut per_wall = Vec::with_capacity(self.walls.len());
        for wall in &self.walls {
            per_wall.push(segment_crossings(s, e, a, b, wall)?);
        }
        // crossings of different walls at one junction point share a parameter
        let mut leaders: Vec<f64> = per_wall.iter().flatten().map(|c| c.t).collect();
        leaders.sort_by(f64::total_cmp);
        for i in 1..leaders.len() {
            if leaders[i] - leaders[i - 1] <= GEOM_TOL {
                leaders[i] = leaders[i - 1];
            }
        }
        let mut sorted: Vec<f64> = per_wall.iter().flatten().map(|c| c.t).collect();
        sorted.sort_by(f64::total_cmp);
        for c in per_wall.iter_mut().flatten() {
            c.t = leaders[sorted.partition_point(|&t| t < c.t)];
        }
        for (k, wall) in self.walls.iter().enumerate() {
            let crossings = &per_wall[k];
            for c in crossings {
                jumps.push(JumpAtom { t: c.t, h: c.sign as f64 * wall.heights[c.wall_segment] });
            }
            if let WallMode::Layer = self.modes[k] {
                for (ws, (p, q, h)) in wall.segments().enumerate() {
                    let local = |x: Point| {
                        let d = sub(x, s);
                        [a + dot(d, eta), dot(d, n)]
                    };
                    let (pl, ql) = (local(p), local(q));
                    let cut = crossings.iter().find(|c| c.wall_segment == ws).map(|c| {
                        let left = (ql[1] - pl[1]).signum();
                        [c.t, -2.0 * PI * left]
                    });
                    angles.push(AngleTerm { start: a, end: b, weight: -h / (2.0 * PI), p: pl, q: ql, cut });
                }
            }
        }

        let mut cantor = Vec::new();
        for c in &self.channels {
            let (l_s, l_e) = (c.ell(s), c.ell(e));
            if l_s == l_e {
                continue;
            }
            let f0 = (0.0 - l_s) / (l_e - l_s);
            let f1 = (1.0 - l_s) / (l_e - l_s);
            let (lo, hi) = (f0.min(f1).max(0.0), f0.max(f1).min(1.0));
            if lo >= hi {
                continue;
            }
            let s0 = if lo == 0.0 { a } else { a + len * lo };
            let s1 = if hi == 1.0 { b } else { a + len * hi };
            if s0 >= s1 {
                continue;
            }
            let l0 = (l_s + (l_e - l_s) * lo).clamp(0.0, 1.0);
            let l1 = (l_s + (l_e - l_s) * hi).clamp(0.0, 1.0);
            cantor.push(CantorAtom { s0, s1, w: c.weight, l0, l1 });
        }
        BVProfile::from_parts(pieces, jumps, cantor, angles).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv1d::VariationPart;
    use crate::chains::validate_chain;
    use approx::assert_abs_diff_eq;

    fn unit() -> Domain {
        Domain::rect([0.0, 0.0], [1.0, 1.0]).unwrap()
    }

    fn field(walls: Vec<JumpWall>, channels: Vec<CantorChannel>, c: f64) -> StructuredBVField {
        StructuredBVField::new(unit(), SmoothGrid::constant([0.0, 0.0], [1.0, 1.0], c).unwrap(), walls, channels).unwrap()
    }

    #[test]
    fn constant_field_values() {
        let f = field(vec![], vec![], 5.0);
        assert_eq!(f.eval_lower([0.3, 0.7]).unwrap(), 5.0);
        assert_eq!(f.jump_size([0.3, 0.7]).unwrap(), 0.0);
        assert!(matches!(f.eval_lower([1.3, 0.7]), Err(Error::Domain(_))));
    }

    #[test]
    fn separating_wall_traces() {
        // upward wall: west is its left side, east gains the height
        let f = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 2.0)], vec![], 0.0);
        assert_eq!(f.eval_lower([0.25, 0.5]).unwrap(), 0.0);
        assert_eq!(f.eval_lower([0.75, 0.5]).unwrap(), 2.0);
        assert_eq!(f.eval_lower([0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(f.eval_upper([0.5, 0.5]).unwrap(), 2.0);
        let g = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 1.0)], vec![], 0.0);
        assert_eq!(g.eval_lower([0.5, 0.3]).unwrap(), 0.0);
        assert_eq!(g.jump_size([0.5, 0.3]).unwrap(), 1.0);
    }

    #[test]
    fn jump_size_examples() {
        let f = field(vec![JumpWall::new(vec![[0.2, 0.2], [0.8, 0.6]], -3.0)], vec![], 0.0);
        assert_eq!(f.jump_size([0.9, 0.1]).unwrap(), 0.0);
        assert_eq!(f.jump_size([0.5, 0.4]).unwrap(), 3.0);
        // collinear meeting point of two walls of height 1
        let t = field(
            vec![JumpWall::new(vec![[0.1, 0.5], [0.5, 0.5]], 1.0), JumpWall::new(vec![[0.5, 0.5], [0.9, 0.5]], 1.0)],
            vec![],
            0.0,
        );
        assert_abs_diff_eq!(t.jump_size([0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn open_wall_jumps_by_its_height() {
        let f = field(vec![JumpWall::new(vec![[0.3, 0.3], [0.3, 0.7]], 1.5)], vec![], 0.0);
        let left = f.eval_lower([0.3 - 1e-7, 0.5]).unwrap();
        let right = f.eval_lower([0.3 + 1e-7, 0.5]).unwrap();
        assert_abs_diff_eq!(right - left, 1.5, epsilon = 1e-6);
        // far from the slit the layer decays
        assert!(f.eval_lower([0.95, 0.05]).unwrap().abs() < 0.1);
    }

    #[test]
    fn closed_clockwise_wall_lifts_inside() {
        let sq = vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.75], [0.75, 0.25], [0.25, 0.25]];
        let f = field(vec![JumpWall::new(sq, 1.0)], vec![], 1.0);
        assert_eq!(f.eval_lower([0.5, 0.5]).unwrap(), 2.0);
        assert_eq!(f.eval_lower([0.1, 0.5]).unwrap(), 1.0);
        assert!(f.has_zero_ac_gradient());
    }

    #[test]
    fn admissibility() {
        let f = field(vec![], vec![], 0.0);
        assert!(f.is_admissible_node([0.123, 0.456]));
        let w = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 1.0)], vec![], 0.0);
        assert!(!w.is_admissible_node([0.5, 0.2]));
        let c = field(vec![], vec![CantorChannel { direction: [1.0, 0.0], band: [0.0, 1.0], weight: 1.0 }], 0.0);
        assert!(c.is_admissible_node([0.5, 0.3]));
        assert!(!c.is_admissible_node([0.25, 0.3]));
        assert!(!c.is_admissible_node([1.0 / 3.0, 0.3]));
    }

    #[test]
    fn restrict_examples() {
        let f = field(vec![], vec![], 2.0);
        let ch = validate_chain(&unit(), &[[0.1, 0.1], [0.8, 0.3], [0.2, 0.9]]).unwrap();
        let p = f.restrict(&ch).unwrap();
        assert_eq!(p.variation(VariationPart::Total), 0.0);

        let w = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 1.0)], vec![], 0.0);
        let h = validate_chain(&unit(), &[[0.1, 0.4], [0.9, 0.4]]).unwrap();
        let p = w.restrict(&h).unwrap();
        assert_eq!(p.jumps.len(), 1);
        assert_eq!(p.jumps[0].h, 1.0);

        let c = field(vec![], vec![CantorChannel { direction: [1.0, 0.0], band: [0.0, 1.0], weight: 1.0 }], 0.0);
        let h = validate_chain(&unit(), &[[0.1, 0.2], [0.9, 0.2]]).unwrap();
        let p = c.restrict(&h).unwrap();
        let expect = bv1d::cantor(0.9) - bv1d::cantor(0.1);
        assert_abs_diff_eq!(p.variation(VariationPart::Cantor), expect, epsilon = 1e-15);
        // dense polyline sampling of the field itself
        let n = 20000;
        let mut sum = 0.0;
        let mut prev = c.eval_lower([0.1, 0.2]).unwrap();
        for k in 1..=n {
            let x = 0.1 + 0.8 * k as f64 / n as f64;
            let v = c.eval_lower([x, 0.2]).unwrap();
            sum += (v - prev).abs();
            prev = v;
        }
        assert_abs_diff_eq!(sum, expect, epsilon = 1e-6);
    }

    #[test]
    fn restrict_rejects_degenerate_chains() {
        let w = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 1.0)], vec![], 0.0);
        let onwall = validate_chain(&unit(), &[[0.1, 0.4], [0.5, 0.4]]).unwrap();
        assert!(matches!(w.restrict(&onwall), Err(Error::InvalidChain { segment: 0, .. })));
        let along = validate_chain(&unit(), &[[0.2, 0.2], [0.5, 0.3], [0.5, 0.8], [0.6, 0.9]]).unwrap();
        assert!(w.restrict(&along).is_err());
    }

    #[test]
    fn bilinear_restriction_matches_pointwise() {
        let g = SmoothGrid::from_fn([0.0, 0.0], [1.0, 1.0], [5, 4], |p| p[0] * p[1] + 0.3 * p[0] - p[1] * p[1]).unwrap();
        let f = StructuredBVField::new(unit(), g, vec![JumpWall::new(vec![[0.3, 0.3], [0.6, 0.8]], 0.5)], vec![]).unwrap();
        let ch = validate_chain(&unit(), &[[0.05, 0.1], [0.9, 0.55], [0.2, 0.95]]).unwrap();
        let p = f.restrict(&ch).unwrap();
        for k in 0..=200 {
            let t = ch.length() * k as f64 / 200.0;
            let x = ch.point_at(t);
            if f.on_wall(x) {
                continue;
            }
            assert_abs_diff_eq!(p.lower_limit(t), f.eval_lower(x).unwrap(), epsilon = 1e-12);
        }
    }
}
