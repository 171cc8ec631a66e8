//! Sets with segment sections over a planar domain, their perimeters, the
//! equality conditions for Steiner symmetrisation, and the rigidity test.
//!
//! A set is described by its section length `v >= 0` and barycenter `b`: the
//! section over `x` is `(b - v/2, b + v/2)`. Its perimeter over a rectangle
//! `B` splits into the graph area of the two boundary surfaces `b +- v/2`, the
//! vertical walls over jump lines of `v` or `b`, and the vertical Cantor part.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bv1d::{self, VariationPart};
use crate::bvfield::{JumpWall, SmoothGrid, StructuredBVField, WallMode};
use crate::chains::validate_chain;
use crate::connectivity::{essentially_disconnects, positivity_cells, zero_barrier, CellGrid, CellSet};
use crate::geom::{self, clip_segment, perp, segment_hit, Domain, Point, SegHit, GEOM_TOL};
use crate::svd::{build_graph, cells_along, minimal_singularity, svd_map, Connectivity, MinimalSingularity};
use crate::{Error, Result};

/// Positivity threshold for the lower limit of `v`.
pub const POSITIVITY_TOL: f64 = 1e-12;
/// Relative tolerance for calling two perimeters equal.
pub const EQUALITY_RTOL: f64 = 1e-9;
/// Largest least-squares residual accepted for a counterexample barycenter.
pub const FIT_TOL: f64 = 1e-9;

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
];

#[derive(Debug, Clone, PartialEq)]
pub struct VDistributedSet {
    pub v: StructuredBVField,
    pub b: StructuredBVField,
}

impl VDistributedSet {
    pub fn new(v: StructuredBVField, b: StructuredBVField) -> Result<Self> {
        if v.domain != b.domain {
            return Err(Error::Contract("v and b must share their domain".into()));
        }
        check_nonnegative(&v)?;
        Ok(VDistributedSet { v, b })
    }
}

fn check_nonnegative(v: &StructuredBVField) -> Result<()> {
    let (lo, hi) = v.domain.bbox();
    let n = 64;
    for j in 0..=n {
        for i in 0..=n {
            let p = [lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64, lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64];
            if !v.domain.contains(p) {
                continue;
            }
            let x = v.eval_lower(p)?;
            if x < -POSITIVITY_TOL {
                return Err(Error::Contract(format!("v is negative ({x}) at {p:?}")));
            }
        }
    }
    Ok(())
}

/// The Steiner symmetric set: same section lengths, barycenter zero.
pub fn steiner_set(v: &StructuredBVField) -> Result<VDistributedSet> {
    VDistributedSet::new(v.clone(), StructuredBVField::constant(v.domain.clone(), 0.0)?)
}

/// Axis-aligned rectangle over which perimeters are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub lo: Point,
    pub hi: Point,
}

impl Region {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::Contract(format!("empty region {lo:?}..{hi:?}")));
        }
        Ok(Region { lo, hi })
    }

    pub fn of_domain(d: &Domain) -> Self {
        let (lo, hi) = d.bbox();
        Region { lo, hi }
    }

    fn chord(&self, nu: Point, s: f64) -> f64 {
        // length of the region cut by the line x . nu = s
        let t = perp(nu);
        let base = geom::scale(nu, s);
        let big = 4.0 * (self.hi[0] - self.lo[0] + self.hi[1] - self.lo[1]) + geom::norm(base);
        let a = geom::add(base, geom::scale(t, -big));
        let b = geom::add(base, geom::scale(t, big));
        match clip_segment(a, b, self.lo, self.hi) {
            Some((t0, t1)) => (t1 - t0) * 2.0 * big,
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerimeterOptions {
    /// Quadrature cell size.
    pub resolution: f64,
    /// Also count the lateral surface over the boundary of a rectangular
    /// domain.
    pub closed: bool,
}

impl PerimeterOptions {
    pub fn new(resolution: f64) -> Self {
        PerimeterOptions { resolution, closed: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerimeterReport {
    pub ac: f64,
    pub jump_vertical: f64,
    pub cantor_vertical: f64,
    pub closure: f64,
    pub total: f64,
}

/// Union of the wall segments of several fields, split where they meet,
/// without repeats and without pieces on the domain boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub pieces: Vec<(Point, Point)>,
}

impl Skeleton {
    pub fn of(fields: &[&StructuredBVField]) -> Skeleton {
        let segs: Vec<(Point, Point)> =
            fields.iter().flat_map(|f| f.walls.iter().flat_map(|w| w.vertices.windows(2).map(|s| (s[0], s[1])))).collect();
        let domain = &fields[0].domain;
        let mut pieces = Vec::new();
        for (i, &(a, b)) in segs.iter().enumerate() {
            let len = geom::dist(a, b);
            let mut ts = vec![0.0, 1.0];
            for (j, &(c, d)) in segs.iter().enumerate() {
                if i == j {
                    continue;
                }
                match segment_hit(a, b, c, d) {
                    SegHit::Disjoint => {}
                    SegHit::Proper => ts.push(geom::crossing_fraction(a, b, c, d)),
                    SegHit::Touch => {
                        for p in [c, d] {
                            if geom::point_segment_distance(p, a, b) <= GEOM_TOL {
                                ts.push((geom::dot(geom::sub(p, a), geom::sub(b, a)) / (len * len)).clamp(0.0, 1.0));
                            }
                        }
                    }
                }
            }
            ts.sort_by(f64::total_cmp);
            let mut cuts = vec![0.0];
            for t in ts {
                if (t - cuts[cuts.len() - 1]) * len > GEOM_TOL && (1.0 - t) * len > GEOM_TOL {
                    cuts.push(t);
                }
            }
            cuts.push(1.0);
            for w in cuts.windows(2) {
                let (p, q) = (geom::lerp(a, b, w[0]), geom::lerp(a, b, w[1]));
                let mid = geom::lerp(p, q, 0.5);
                if domain.on_boundary(mid) {
                    continue;
                }
                if segs[..i].iter().any(|&(c, d)| geom::point_segment_distance(mid, c, d) <= GEOM_TOL) {
                    continue;
                }
                pieces.push((p, q));
            }
        }
        Skeleton { pieces }
    }

    /// Gauss points `(x, unit normal, weight)` of the pieces inside the region.
    fn quadrature(&self, region: &Region, h: f64) -> Vec<(Point, Point, f64)> {
        let mut out = Vec::new();
        for &(a, b) in &self.pieces {
            let Some((t0, t1)) = clip_segment(a, b, region.lo, region.hi) else { continue };
            let (p, q) = (geom::lerp(a, b, t0), geom::lerp(a, b, t1));
            let len = geom::dist(p, q);
            if len <= GEOM_TOL {
                continue;
            }
            let n = geom::scale(perp(geom::sub(b, a)), 1.0 / geom::dist(a, b));
            let m = (len / h).ceil().max(1.0) as usize;
            for k in 0..m {
                let (s0, s1) = (k as f64 / m as f64, (k + 1) as f64 / m as f64);
                for (x, w) in GAUSS4 {
                    let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x;
                    out.push((geom::lerp(p, q, s), n, w * 0.5 * (s1 - s0) * len));
                }
            }
        }
        out
    }
}

/// 2x2 Gauss points `(x, weight)` over the cells of the region inside the
/// domain.
fn area_quadrature(domain: &Domain, region: &Region, h: f64) -> Vec<(Point, f64)> {
    let nx = cells_along(region.hi[0] - region.lo[0], h);
    let ny = cells_along(region.hi[1] - region.lo[1], h);
    let edge = |lo: f64, hi: f64, n: usize, k: usize| if k == n { hi } else { (lo + k as f64 * h).min(hi) };
    let mut out = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        let (y0, y1) = (edge(region.lo[1], region.hi[1], ny, j), edge(region.lo[1], region.hi[1], ny, j + 1));
        for i in 0..nx {
            let (x0, x1) = (edge(region.lo[0], region.hi[0], nx, i), edge(region.lo[0], region.hi[0], nx, i + 1));
            let w = 0.25 * (x1 - x0) * (y1 - y0);
            for gy in GAUSS2 {
                for gx in GAUSS2 {
                    let p = [0.5 * (x0 + x1) + 0.5 * (x1 - x0) * gx, 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * gy];
                    if domain.contains(p) {
                        out.push((p, w));
                    }
                }
            }
        }
    }
    out
}

fn section(b: f64, v: f64) -> (f64, f64) {
    if v > 0.0 {
        (b - 0.5 * v, b + 0.5 * v)
    } else {
        (0.0, 0.0)
    }
}

/// Length of the symmetric difference of two intervals.
pub fn symmetric_difference(i1: (f64, f64), i2: (f64, f64)) -> f64 {
    let len = |i: (f64, f64)| (i.1 - i.0).max(0.0);
    let overlap = (i1.1.min(i2.1) - i1.0.max(i2.0)).max(0.0);
    len(i1) + len(i2) - 2.0 * overlap
}

fn ac_integrand(v: &StructuredBVField, b: &StructuredBVField, x: Point) -> f64 {
    if !v.eval_lower(x).is_ok_and(|y| y > 0.0) {
        return 0.0;
    }
    let gv = v.ac_gradient(x);
    let gb = b.ac_gradient(x);
    let up = [gb[0] + 0.5 * gv[0], gb[1] + 0.5 * gv[1]];
    let dn = [gb[0] - 0.5 * gv[0], gb[1] - 0.5 * gv[1]];
    (1.0 + geom::dot(up, up)).sqrt() + (1.0 + geom::dot(dn, dn)).sqrt()
}

fn traces(f: &StructuredBVField, x: Point, n: Point) -> (f64, f64) {
    (f.value_towards(x, n), f.value_towards(x, geom::scale(n, -1.0)))
}

fn wall_integrand(v: &StructuredBVField, b: &StructuredBVField, x: Point, n: Point) -> f64 {
    let (vp, vm) = traces(v, x, n);
    let (bp, bm) = traces(b, x, n);
    symmetric_difference(section(bp, vp), section(bm, vm))
}

type ChannelKey = ([u64; 2], [u64; 2]);

fn channel_groups(v: &StructuredBVField, b: &StructuredBVField) -> BTreeMap<ChannelKey, (Point, [f64; 2], f64, f64)> {
    let mut groups = BTreeMap::new();
    let key = |c: &crate::bvfield::CantorChannel| {
        ([c.direction[0].to_bits(), c.direction[1].to_bits()], [c.band[0].to_bits(), c.band[1].to_bits()])
    };
    for c in &v.channels {
        groups.entry(key(c)).or_insert((c.direction, c.band, 0.0, 0.0)).2 += c.weight;
    }
    for c in &b.channels {
        groups.entry(key(c)).or_insert((c.direction, c.band, 0.0, 0.0)).3 += c.weight;
    }
    groups
}

/// Integral over the region of the Cantor measure of `ell`, weighted by the
/// chord length of the region.
fn cantor_mass(region: &Region, nu: Point, band: [f64; 2]) -> f64 {
    let (a, beta) = (band[0], band[1]);
    let corners = [region.lo, [region.hi[0], region.lo[1]], region.hi, [region.lo[0], region.hi[1]]];
    let mut ls: Vec<f64> = corners.iter().map(|c| ((geom::dot(*c, nu) - a) / (beta - a)).clamp(0.0, 1.0)).collect();
    ls.extend([0.0, 1.0]);
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    let mut total = 0.0;
    for w in ls.windows(2) {
        let (l0, l1) = (w[0], w[1]);
        if l1 <= l0 {
            continue;
        }
        // the chord is affine in ell between consecutive corner levels
        let s = |l: f64| a + l * (beta - a);
        let (q1, q3) = (l0 + 0.25 * (l1 - l0), l0 + 0.75 * (l1 - l0));
        let (c1, c3) = (region.chord(nu, s(q1)), region.chord(nu, s(q3)));
        let slope = (c3 - c1) / (q3 - q1);
        let alpha = c1 - slope * q1;
        total += bv1d::cantor_linear_integral(alpha, slope, l0, l1);
    }
    total
}

fn closure(v: &StructuredBVField, h: f64) -> Result<f64> {
    let Domain::Rect { min, max } = v.domain else {
        return Err(Error::Unsupported("boundary closure is only available on rectangular domains".into()));
    };
    let corners = [min, [max[0], min[1]], max, [min[0], max[1]], min];
    let mut total = 0.0;
    for w in corners.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = geom::dist(p, q);
        let inward = geom::scale(perp(geom::sub(q, p)), 1.0 / len);
        let m = (len / h).ceil().max(1.0) as usize;
        for k in 0..m {
            let (s0, s1) = (k as f64 / m as f64, (k + 1) as f64 / m as f64);
            for (x, wt) in GAUSS4 {
                let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x;
                total += wt * 0.5 * (s1 - s0) * len * v.value_towards(geom::lerp(p, q, s), inward).max(0.0);
            }
        }
    }
    Ok(total)
}

fn check_resolution(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(format!("quadrature resolution must be positive, got {h}")))
    }
}

/// Perimeter of the set over the region, using the given wall skeleton.
pub fn perimeter_on(e: &VDistributedSet, region: &Region, skeleton: &Skeleton, opts: &PerimeterOptions) -> Result<PerimeterReport> {
    check_resolution(opts.resolution)?;
    let (v, b) = (&e.v, &e.b);
    let ac: f64 = area_quadrature(&v.domain, region, opts.resolution)
        .par_iter()
        .map(|&(x, w)| w * ac_integrand(v, b, x))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let jump_vertical: f64 = skeleton.quadrature(region, opts.resolution).iter().map(|&(x, n, w)| w * wall_integrand(v, b, x, n)).sum();
    let cantor_vertical: f64 = channel_groups(v, b)
        .values()
        .map(|&(nu, band, wv, wb)| ((wb + 0.5 * wv).abs() + (wb - 0.5 * wv).abs()) * cantor_mass(region, nu, band))
        .sum();
    let closure = if opts.closed { closure(v, opts.resolution)? } else { 0.0 };
    Ok(PerimeterReport { ac, jump_vertical, cantor_vertical, closure, total: ac + jump_vertical + cantor_vertical + closure })
}

pub fn perimeter(e: &VDistributedSet, region: &Region, opts: &PerimeterOptions) -> Result<PerimeterReport> {
    perimeter_on(e, region, &Skeleton::of(&[&e.v, &e.b]), opts)
}

/// Perimeters of `(v, b)` and of its Steiner symmetral on a shared skeleton.
pub fn perimeter_pair(e: &VDistributedSet, region: &Region, opts: &PerimeterOptions) -> Result<(PerimeterReport, PerimeterReport)> {
    let sk = Skeleton::of(&[&e.v, &e.b]);
    let sym = steiner_set(&e.v)?;
    Ok((perimeter_on(e, region, &sk, opts)?, perimeter_on(&sym, region, &sk, opts)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreconditionReport {
    pub satisfied: bool,
    pub min_node_value: f64,
    pub min_edge_value: f64,
    pub witness: Option<Point>,
}

/// Checks that the lower limit of `v` stays positive on lattice nodes and
/// along every lattice edge.
pub fn check_precondition(v: &StructuredBVField, resolution: f64, connectivity: Connectivity) -> Result<PreconditionReport> {
    let grid = CellGrid::for_domain(&v.domain, resolution)?;
    let mut min_node = f64::INFINITY;
    let mut witness = None;
    let mut nodes = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let p = grid.center(i, j);
            if !v.is_admissible_node(p) {
                continue;
            }
            let x = v.eval_lower(p)?;
            if x < min_node {
                min_node = x;
                if x <= POSITIVITY_TOL {
                    witness = witness.or(Some(p));
                }
            }
            nodes.push((i as i64, j as i64, p));
        }
    }
    let index: std::collections::HashMap<(i64, i64), Point> = nodes.iter().map(|&(i, j, p)| ((i, j), p)).collect();
    let edges: Vec<(Point, f64)> = nodes
        .par_iter()
        .flat_map_iter(|&(i, j, p)| {
            let index = &index;
            connectivity.forward_offsets().iter().filter_map(move |&(di, dj)| {
                let q = *index.get(&(i + di, j + dj))?;
                let chain = validate_chain(&v.domain, &[p, q]).ok()?;
                let prof = v.restrict(&chain).ok()?;
                let inf = prof.infimum();
                Some((geom::lerp(p, q, 0.5), inf))
            })
        })
        .collect();
    let mut min_edge = f64::INFINITY;
    for (m, inf) in edges {
        if inf < min_edge {
            min_edge = inf;
            if inf <= POSITIVITY_TOL {
                witness = witness.or(Some(m));
            }
        }
    }
    Ok(PreconditionReport {
        satisfied: min_node > POSITIVITY_TOL && min_edge > POSITIVITY_TOL,
        min_node_value: min_node,
        min_edge_value: min_edge,
        witness,
    })
}

fn require_precondition(v: &StructuredBVField, resolution: f64, connectivity: Connectivity) -> Result<PreconditionReport> {
    let r = check_precondition(v, resolution, connectivity)?;
    if !r.satisfied {
        return Err(Error::Precondition(format!(
            "lower limit of v vanishes near {:?} (node min {}, edge min {})",
            r.witness, r.min_node_value, r.min_edge_value
        )));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EqualityOptions {
    pub resolution: f64,
    pub connectivity: Connectivity,
    pub check_precondition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityReport {
    pub sections_are_segments: bool,
    pub gradient_ok: bool,
    pub jumps_ok: bool,
    pub cantor_ok: bool,
    pub verdict: bool,
    pub max_gradient: f64,
    pub max_jump_excess: f64,
    pub perimeter: PerimeterReport,
    pub symmetral_perimeter: PerimeterReport,
    pub perimeters_equal: bool,
    pub agrees: bool,
}

/// Conditions under which `(v, b)` has the same perimeter as its symmetral.
pub fn check_equality_case(v: &StructuredBVField, b: &StructuredBVField, opts: &EqualityOptions) -> Result<EqualityReport> {
    if opts.check_precondition {
        require_precondition(v, opts.resolution, opts.connectivity)?;
    }
    let e = VDistributedSet::new(v.clone(), b.clone())?;
    let region = Region::of_domain(&v.domain);
    let popts = PerimeterOptions::new(opts.resolution);
    let (pe, pf) = perimeter_pair(&e, &region, &popts)?;

    let max_gradient = area_quadrature(&v.domain, &region, opts.resolution)
        .par_iter()
        .map(|&(x, _)| if v.eval_lower(x).is_ok_and(|y| y > 0.0) { geom::norm(b.ac_gradient(x)) } else { 0.0 })
        .reduce(|| 0.0, f64::max);
    let gradient_ok = max_gradient <= 1e-12;

    let sk = Skeleton::of(&[v, b]);
    let mut max_jump_excess: f64 = 0.0;
    for (x, n, _) in sk.quadrature(&region, opts.resolution) {
        let (vp, vm) = traces(v, x, n);
        if vp.min(vm) <= 0.0 {
            continue;
        }
        let (bp, bm) = traces(b, x, n);
        let excess = (bp - bm).abs() - 0.5 * (vp - vm).abs();
        max_jump_excess = max_jump_excess.max(excess / (1.0f64).max((vp - vm).abs()));
    }
    let jumps_ok = max_jump_excess <= 1e-12;

    let cantor_ok = channel_groups(v, b).values().all(|&(_, _, wv, wb)| wb.abs() <= 0.5 * wv.abs() + 1e-12);
    let verdict = gradient_ok && jumps_ok && cantor_ok;
    let perimeters_equal = (pe.total - pf.total).abs() <= EQUALITY_RTOL * pf.total;
    Ok(EqualityReport {
        sections_are_segments: true,
        gradient_ok,
        jumps_ok,
        cantor_ok,
        verdict,
        max_gradient,
        max_jump_excess,
        perimeter: pe,
        symmetral_perimeter: pf,
        perimeters_equal,
        agrees: verdict == perimeters_equal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// Barycenter built from the distance map of `v / 2`.
    DistanceMap,
    /// The positivity set of `v` splits; one piece is lifted.
    SplitSupport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub kind: CounterexampleKind,
    pub b: StructuredBVField,
    pub residual: f64,
    pub report: EqualityReport,
}

/// Barycenter field with constant smooth part and step walls on given loops.
fn step_barycenter(domain: &Domain, c: f64, walls: Vec<JumpWall>) -> Result<StructuredBVField> {
    let (lo, hi) = domain.bbox();
    StructuredBVField::new(domain.clone(), SmoothGrid::constant(lo, hi, c)?, walls, vec![])
}

pub fn counterexample(v: &StructuredBVField, xbar: Point, scale: f64, resolution: f64, connectivity: Connectivity) -> Result<Counterexample> {
    if !v.channels.is_empty() {
        return Err(Error::Unsupported("counterexamples are only built for fields without Cantor channels".into()));
    }
    if !(0.0..=1.0).contains(&scale) {
        return Err(Error::Contract(format!("scale must lie in [0, 1], got {scale}")));
    }
    let eq = EqualityOptions { resolution, connectivity, check_precondition: false };
    let pre = check_precondition(v, resolution, connectivity)?;
    if !pre.satisfied {
        return split_support_counterexample(v, xbar, scale, &eq);
    }
    let g = build_graph(v, resolution, connectivity)?;
    if minimal_singularity(&g, crate::svd::DEFAULT_COVERAGE_TOL).minimally_singular {
        return Err(Error::Precondition("v is minimally singular, so no counterexample exists".into()));
    }
    let src = g.nearest_node(xbar).expect("graph has nodes");
    let dist = svd_map(&g, src)?.dist;
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::Unsupported("the lattice graph is disconnected".into()));
    }
    // basis: constant plus one indicator per step wall of v
    let steps: Vec<(usize, &Vec<Point>)> = v
        .wall_modes()
        .iter()
        .enumerate()
        .filter_map(|(k, m)| match m {
            WallMode::Step { lp, .. } => Some((k, lp)),
            WallMode::Layer => None,
        })
        .collect();
    let n = g.len();
    let mut a = DMatrix::<f64>::zeros(n, steps.len() + 1);
    let mut rhs = DVector::<f64>::zeros(n);
    for (r, p) in g.nodes.iter().enumerate() {
        a[(r, 0)] = 1.0;
        for (c, (_, lp)) in steps.iter().enumerate() {
            a[(r, c + 1)] = -(geom::winding_number(lp, *p) as f64);
        }
        rhs[r] = 0.5 * scale * dist[r];
    }
    let sol = a.clone().svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::Invariant(e.to_string()))?;
    let residual = (&a * &sol - &rhs).amax();
    if residual > FIT_TOL {
        return Err(Error::Unsupported(format!(
            "the distance map is not representable by the step walls of v (residual {residual})"
        )));
    }
    let snap = |x: f64| if x.abs() <= 1e-12 { 0.0 } else { x };
    let walls: Vec<JumpWall> = steps
        .iter()
        .enumerate()
        .filter_map(|(c, (k, _))| {
            let h = snap(sol[c + 1]);
            (h != 0.0).then(|| JumpWall::new(v.walls[*k].vertices.clone(), h))
        })
        .collect();
    let b = step_barycenter(&v.domain, snap(sol[0]), walls)?;
    let report = check_equality_case(v, &b, &eq)?;
    Ok(Counterexample { kind: CounterexampleKind::DistanceMap, b, residual, report })
}

fn split_support_counterexample(v: &StructuredBVField, xbar: Point, scale: f64, eq: &EqualityOptions) -> Result<Counterexample> {
    let grid = CellGrid::for_domain(&v.domain, eq.resolution)?;
    let pos = positivity_cells(v, grid, POSITIVITY_TOL);
    let barrier = zero_barrier(v, grid);
    let rep = essentially_disconnects(&barrier, &pos)?;
    if !rep.disconnects {
        return Err(Error::Precondition(
            "the lower limit of v vanishes but does not split its positivity set; no construction available".into(),
        ));
    }
    let comps = pos.components(Some(&barrier));
    let i = (((xbar[0] - grid.origin[0]) / grid.resolution).floor().max(0.0) as usize).min(grid.nx - 1);
    let j = (((xbar[1] - grid.origin[1]) / grid.resolution).floor().max(0.0) as usize).min(grid.ny - 1);
    let at = grid.index(i, j);
    let comp = comps.iter().find(|c| c.contains(&at)).unwrap_or(&comps[0]);
    let mut set = CellSet::empty(grid);
    for &k in comp {
        let (i, j) = grid.coords(k);
        set.insert(i, j);
    }
    let walls =
        if scale == 0.0 { vec![] } else { set.boundary_loops().into_iter().map(|lp| JumpWall::new(lp, -scale)).collect() };
    let b = step_barycenter(&v.domain, 0.0, walls)?;
    let report = check_equality_case(v, &b, eq)?;
    Ok(Counterexample { kind: CounterexampleKind::SplitSupport, b, residual: 0.0, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidityReport {
    pub precondition: PreconditionReport,
    pub minimal: MinimalSingularity,
    pub rigid: bool,
    pub counterexample: Option<Counterexample>,
}

/// Rigidity of Steiner's inequality for `v`, decided through minimal
/// singularity of `v`.
pub fn rigidity_test(v: &StructuredBVField, resolution: f64, connectivity: Connectivity, tol: f64) -> Result<RigidityReport> {
    let precondition = require_precondition(v, resolution, connectivity)?;
    let g = build_graph(v, resolution, connectivity)?;
    let minimal = minimal_singularity(&g, tol);
    let rigid = minimal.minimally_singular;
    let counterexample = if rigid || !v.channels.is_empty() {
        None
    } else {
        let xbar = minimal.violating.unwrap_or(minimal.witness);
        counterexample(v, xbar, 1.0, resolution, connectivity).ok()
    };
    Ok(RigidityReport { precondition, minimal, rigid, counterexample })
}

/// Singular variation along a straight segment of `v`, used to compare
/// wall heights in reports.
pub fn singular_jump(v: &StructuredBVField, a: Point, b: Point) -> Result<f64> {
    let chain = validate_chain(&v.domain, &[a, b])?;
    Ok(v.restrict(&chain)?.variation(VariationPart::Singular))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvfield::CantorChannel;
    use approx::assert_relative_eq;

    fn unit() -> Domain {
        Domain::rect([0.0, 0.0], [1.0, 1.0]).unwrap()
    }

    fn constant(c: f64, walls: Vec<JumpWall>) -> StructuredBVField {
        StructuredBVField::new(unit(), SmoothGrid::constant([0.0, 0.0], [1.0, 1.0], c).unwrap(), walls, vec![]).unwrap()
    }

    fn square() -> Vec<Point> {
        vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.75], [0.75, 0.25], [0.25, 0.25]]
    }

    #[test]
    fn unit_box_surface() {
        let e = steiner_set(&constant(1.0, vec![])).unwrap();
        let r = Region::of_domain(&e.v.domain);
        let open = perimeter(&e, &r, &PerimeterOptions::new(0.1)).unwrap();
        assert_relative_eq!(open.total, 2.0, max_relative = 1e-14);
        let closed = perimeter(&e, &r, &PerimeterOptions { resolution: 0.1, closed: true }).unwrap();
        assert_relative_eq!(closed.total, 6.0, max_relative = 1e-14);
        let zero = steiner_set(&constant(0.0, vec![])).unwrap();
        assert_eq!(perimeter(&zero, &r, &PerimeterOptions::new(0.1)).unwrap().total, 0.0);
        assert!(steiner_set(&constant(-1.0, vec![])).is_err());
    }

    #[test]
    fn interval_symmetric_difference() {
        assert_eq!(symmetric_difference((-1.0, 1.0), (-0.5, 0.5)), 1.0);
        assert_eq!(symmetric_difference((-0.5, 1.5), (-0.5, 0.5)), 1.0);
        assert_eq!(symmetric_difference((0.0, 2.0), (-0.5, 0.5)), 2.0);
        assert_eq!(symmetric_difference((3.0, 4.0), (-0.5, 0.5)), 2.0);
    }

    #[test]
    fn wall_vertical_part() {
        // v = 2 on the right of an upward wall, 1 on its left
        let v = constant(1.0, vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 1.0)]);
        let e = steiner_set(&v).unwrap();
        let r = Region::of_domain(&v.domain);
        let p = perimeter(&e, &r, &PerimeterOptions::new(0.1)).unwrap();
        assert_relative_eq!(p.jump_vertical, 1.0, max_relative = 1e-14);
        let b = constant(0.0, vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 0.5)]);
        let shifted = VDistributedSet::new(v.clone(), b).unwrap();
        let (pe, pf) = perimeter_pair(&shifted, &r, &PerimeterOptions::new(0.1)).unwrap();
        assert_relative_eq!(pe.jump_vertical, 1.0, max_relative = 1e-14);
        assert_relative_eq!(pe.total, pf.total, max_relative = 1e-14);
    }

    #[test]
    fn enclosed_block_shifts() {
        let v = constant(1.0, vec![JumpWall::new(square(), 1.0)]);
        let opts = EqualityOptions { resolution: 0.05, connectivity: Connectivity::K8, check_precondition: true };
        for (t, equal) in [(0.0, true), (0.25, true), (0.5, true), (0.6, false), (1.0, false)] {
            let b = if t == 0.0 { constant(0.0, vec![]) } else { constant(0.0, vec![JumpWall::new(square(), t)]) };
            let rep = check_equality_case(&v, &b, &opts).unwrap();
            assert_eq!(rep.verdict, equal, "t = {t}");
            assert_eq!(rep.perimeters_equal, equal, "t = {t}");
            let excess = rep.perimeter.total - rep.symmetral_perimeter.total;
            let expect = 2.0 * 2.0 * (t - 0.5f64).max(0.0);
            assert!((excess - expect).abs() <= 1e-9, "t = {t}: {excess} vs {expect}");
        }
    }

    #[test]
    fn smooth_barycenter_breaks_equality() {
        let v = constant(1.0, vec![]);
        let b = StructuredBVField::new(
            unit(),
            SmoothGrid::from_fn([0.0, 0.0], [1.0, 1.0], [3, 3], |p| 0.3 * p[0]).unwrap(),
            vec![],
            vec![],
        )
        .unwrap();
        let opts = EqualityOptions { resolution: 0.1, connectivity: Connectivity::K8, check_precondition: true };
        let rep = check_equality_case(&v, &b, &opts).unwrap();
        assert!(!rep.gradient_ok && !rep.perimeters_equal && rep.agrees);
    }

    #[test]
    fn cantor_vertical_part() {
        let c = CantorChannel { direction: [1.0, 0.0], band: [0.0, 1.0], weight: 1.0 };
        let v = StructuredBVField::new(unit(), SmoothGrid::constant([0.0, 0.0], [1.0, 1.0], 1.0).unwrap(), vec![], vec![c]).unwrap();
        let e = steiner_set(&v).unwrap();
        let p = perimeter(&e, &Region::of_domain(&v.domain), &PerimeterOptions::new(0.1)).unwrap();
        assert_relative_eq!(p.cantor_vertical, 1.0, max_relative = 1e-12);
        let half = Region::new([0.0, 0.0], [0.5, 1.0]).unwrap();
        let q = perimeter(&e, &half, &PerimeterOptions::new(0.1)).unwrap();
        assert_relative_eq!(q.cantor_vertical, 0.5, max_relative = 1e-12);
        // a rotated channel: mass equals the chord-weighted Cantor integral
        let d = [0.6, 0.8];
        let diag = CantorChannel { direction: d, band: [0.2, 1.2], weight: 1.0 };
        let v2 = StructuredBVField::new(unit(), SmoothGrid::constant([0.0, 0.0], [1.0, 1.0], 1.0).unwrap(), vec![], vec![diag]).unwrap();
        let r = Region::of_domain(&unit());
        let m = cantor_mass(&r, d, [0.2, 1.2]);
        let n = 200_000;
        let mut riemann = 0.0;
        for k in 0..n {
            let (l0, l1) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            let lm = 0.5 * (l0 + l1);
            riemann += r.chord(d, 0.2 + lm) * (bv1d::cantor(l1) - bv1d::cantor(l0));
        }
        assert!((m - riemann).abs() < 1e-5);
        let p2 = perimeter(&steiner_set(&v2).unwrap(), &r, &PerimeterOptions::new(0.1)).unwrap();
        assert_relative_eq!(p2.cantor_vertical, m, max_relative = 1e-14);
    }

    #[test]
    fn precondition_flags_zero_line() {
        let d = Domain::rect([0.0, 0.0], [2.0, 1.0]).unwrap();
        let s = SmoothGrid::from_fn([0.0, 0.0], [2.0, 1.0], [9, 2], |p| if p[0] == 1.0 { 0.0 } else { 1.0 }).unwrap();
        let v = StructuredBVField::new(d, s, vec![], vec![]).unwrap();
        let r = check_precondition(&v, 0.125, Connectivity::K8).unwrap();
        assert!(!r.satisfied);
        assert!(r.min_node_value > 0.0);
        assert!(matches!(rigidity_test(&v, 0.125, Connectivity::K8, 0.01), Err(Error::Precondition(_))));
        let ce = counterexample(&v, [0.5, 0.5], 1.0, 0.125, Connectivity::K8).unwrap();
        assert_eq!(ce.kind, CounterexampleKind::SplitSupport);
        assert!(ce.report.verdict && ce.report.perimeters_equal);
        assert_eq!(ce.b.eval_lower([0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(ce.b.eval_lower([1.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn rigidity_examples() {
        let smooth = StructuredBVField::new(
            unit(),
            SmoothGrid::from_fn([0.0, 0.0], [1.0, 1.0], [3, 3], |p| 1.0 + p[0] * p[1]).unwrap(),
            vec![],
            vec![],
        )
        .unwrap();
        assert!(rigidity_test(&smooth, 0.1, Connectivity::K8, 0.01).unwrap().rigid);

        let block = constant(1.0, vec![JumpWall::new(vec![[0.2, 0.2], [0.2, 0.8], [0.8, 0.8], [0.8, 0.2], [0.2, 0.2]], 1.0)]);
        let r = rigidity_test(&block, 0.1, Connectivity::K8, 0.01).unwrap();
        assert!(!r.rigid);
        let ce = r.counterexample.expect("pure-jump field yields a counterexample");
        assert_eq!(ce.kind, CounterexampleKind::DistanceMap);
        assert!(ce.report.verdict && ce.report.perimeters_equal);
        let inside = ce.b.eval_lower([0.5, 0.5]).unwrap();
        let outside = ce.b.eval_lower([0.05, 0.05]).unwrap();
        assert!(((inside - outside).abs() - 0.5).abs() <= 1e-12);

        let slit = constant(1.0, vec![JumpWall::new(vec![[0.3, 0.5], [0.7, 0.5]], 0.5)]);
        assert!(rigidity_test(&slit, 0.1, Connectivity::K8, 0.01).unwrap().rigid);
        let zero_scale = counterexample(&block, [0.5, 0.5], 0.0, 0.1, Connectivity::K8).unwrap();
        assert!(zero_scale.b.walls.is_empty() && zero_scale.b.eval_lower([0.5, 0.5]).unwrap() == 0.0);
    }
}
