//! Cell-level connectivity: cell sets and interface barriers, disconnection
//! checks, one-dimensional positivity sets and the dense-ball generator.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv1d::BVProfile;
use crate::bvfield::StructuredBVField;
use crate::geom::{self, segment_hit, Domain, Point, SegHit};
use crate::svd::{cells_along, Lattice, UnionFind};
use crate::{Error, Result};

/// Values at or below this count as zero.
pub const ZERO_LEVEL: f64 = 1e-12;

/// A regular grid of square cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub origin: Point,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CellGrid {
    /// Cells covering the domain's bounding box, aligned with its lower corner.
    pub fn for_domain(domain: &Domain, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Contract(format!("resolution must be positive, got {resolution}")));
        }
        let (lo, hi) = domain.bbox();
        Ok(CellGrid { origin: lo, resolution, nx: cells_along(hi[0] - lo[0], resolution), ny: cells_along(hi[1] - lo[1], resolution) })
    }

    pub fn of_lattice(l: &Lattice) -> Self {
        CellGrid { origin: l.origin, resolution: l.resolution, nx: l.nx, ny: l.ny }
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

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn corner(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + i as f64 * self.resolution, self.origin[1] + j as f64 * self.resolution]
    }

    pub fn center(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + (i as f64 + 0.5) * self.resolution, self.origin[1] + (j as f64 + 0.5) * self.resolution]
    }

    /// Interface between `(i, j)` and `(i + 1, j)`.
    pub fn vertical_interface(&self, i: usize, j: usize) -> (Point, Point) {
        (self.corner(i + 1, j), self.corner(i + 1, j + 1))
    }

    /// Interface between `(i, j)` and `(i, j + 1)`.
    pub fn horizontal_interface(&self, i: usize, j: usize) -> (Point, Point) {
        (self.corner(i, j + 1), self.corner(i + 1, j + 1))
    }

    fn vertical_count(&self) -> usize {
        self.nx.saturating_sub(1) * self.ny
    }

    fn horizontal_count(&self) -> usize {
        self.nx * self.ny.saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    pub grid: CellGrid,
    bits: Vec<bool>,
}

impl CellSet {
    pub fn empty(grid: CellGrid) -> Self {
        CellSet { grid, bits: vec![false; grid.len()] }
    }

    pub fn from_fn(grid: CellGrid, f: impl Fn(usize, usize) -> bool + Sync) -> Self {
        let bits = (0..grid.len()).into_par_iter().map(|k| f(k % grid.nx, k / grid.nx)).collect();
        CellSet { grid, bits }
    }

    /// Cells whose centre lies in the domain.
    pub fn domain_cells(domain: &Domain, grid: CellGrid) -> Self {
        CellSet::from_fn(grid, |i, j| domain.contains(grid.center(i, j)))
    }

    /// Cells holding the given lattice nodes.
    pub fn from_nodes(lattice: &Lattice, nodes: &[usize]) -> Self {
        let mut s = CellSet::empty(CellGrid::of_lattice(lattice));
        for &n in nodes {
            let [i, j] = lattice.cells[n];
            s.insert(i, j);
        }
        s
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.grid.nx && j < self.grid.ny && self.bits[self.grid.index(i, j)]
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        let k = self.grid.index(i, j);
        self.bits[k] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| self.grid.coords(k))
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.resolution * self.grid.resolution
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.grid == other.grid && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// 4-connected components after cutting the interfaces covered by the
    /// barrier; each component is a sorted list of cell indices.
    pub fn components(&self, barrier: Option<&Barrier>) -> Vec<Vec<usize>> {
        let g = self.grid;
        let mut uf = UnionFind::new(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                if !self.contains(i, j) {
                    continue;
                }
                if self.contains(i + 1, j) && !barrier.is_some_and(|b| b.covers_vertical(i, j)) {
                    uf.union(g.index(i, j), g.index(i + 1, j));
                }
                if self.contains(i, j + 1) && !barrier.is_some_and(|b| b.covers_horizontal(i, j)) {
                    uf.union(g.index(i, j), g.index(i, j + 1));
                }
            }
        }
        uf.components().into_iter().filter(|c| self.bits[c[0]]).collect()
    }

    /// Closed boundary loops of the union of cells, with the set on the left
    /// (outer boundaries counter-clockwise, holes clockwise). Loops touching
    /// at a corner are kept apart.
    pub fn boundary_loops(&self) -> Vec<Vec<Point>> {
        type V = (i64, i64);
        let mut out_edges: HashMap<V, Vec<V>> = HashMap::new();
        let mut order: Vec<(V, V)> = Vec::new();
        let mut add = |a: V, b: V| {
            out_edges.entry(a).or_default().push(b);
            order.push((a, b));
        };
        let inside = |i: i64, j: i64| i >= 0 && j >= 0 && self.contains(i as usize, j as usize);
        for (i, j) in self.cells() {
            let (i, j) = (i as i64, j as i64);
            if !inside(i, j - 1) {
                add((i, j), (i + 1, j));
            }
            if !inside(i + 1, j) {
                add((i + 1, j), (i + 1, j + 1));
            }
            if !inside(i, j + 1) {
                add((i + 1, j + 1), (i, j + 1));
            }
            if !inside(i - 1, j) {
                add((i, j + 1), (i, j));
            }
        }
        let mut used: HashMap<(V, V), bool> = order.iter().map(|e| (*e, false)).collect();
        let mut loops = Vec::new();
        for &(a0, b0) in &order {
            if used[&(a0, b0)] {
                continue;
            }
            let mut lp = vec![a0];
            let (mut a, mut b) = (a0, b0);
            loop {
                used.insert((a, b), true);
                lp.push(b);
                if b == a0 {
                    break;
                }
                let d_in = (b.0 - a.0, b.1 - a.1);
                let next = out_edges[&b]
                    .iter()
                    .copied()
                    .filter(|c| !used[&(b, *c)])
                    .max_by_key(|c| {
                        let d_out = (c.0 - b.0, c.1 - b.1);
                        // left turn first, then straight, then right
                        d_in.0 * d_out.1 - d_in.1 * d_out.0
                    })
                    .expect("boundary edges form closed loops");
                a = b;
                b = next;
            }
            loops.push(simplify_loop(&lp).into_iter().map(|(i, j)| self.grid.corner(i as usize, j as usize)).collect());
        }
        loops
    }

    pub fn to_rle(&self) -> RleCellSet {
        let mut runs = Vec::new();
        let mut cur = false;
        let mut len = 0u32;
        for &b in &self.bits {
            if b == cur {
                len += 1;
            } else {
                runs.push(len);
                cur = b;
                len = 1;
            }
        }
        runs.push(len);
        RleCellSet { grid: self.grid, runs }
    }

    pub fn from_rle(r: &RleCellSet) -> Result<Self> {
        let mut bits = Vec::with_capacity(r.grid.len());
        let mut cur = false;
        for &n in &r.runs {
            bits.extend(std::iter::repeat_n(cur, n as usize));
            cur = !cur;
        }
        if bits.len() != r.grid.len() {
            return Err(Error::Contract(format!("run lengths cover {} cells, grid has {}", bits.len(), r.grid.len())));
        }
        Ok(CellSet { grid: r.grid, bits })
    }

    /// Binary PGM (P5, 8-bit), top row first; members are white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let g = self.grid;
        let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
        for j in (0..g.ny).rev() {
            for i in 0..g.nx {
                out.push(if self.contains(i, j) { 255 } else { 0 });
            }
        }
        out
    }
}

fn simplify_loop(lp: &[(i64, i64)]) -> Vec<(i64, i64)> {
    // lp is closed (first == last); drop vertices where the direction is kept
    let n = lp.len() - 1;
    let turn = |k: usize| {
        let (p, c, q) = (lp[(k + n - 1) % n], lp[k], lp[(k + 1) % n]);
        (c.0 - p.0) * (q.1 - c.1) - (c.1 - p.1) * (q.0 - c.0) != 0
    };
    let mut out: Vec<(i64, i64)> = (0..n).filter(|&k| turn(k)).map(|k| lp[k]).collect();
    out.push(out[0]);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RleCellSet {
    pub grid: CellGrid,
    /// Alternating run lengths in row-major order, starting with cells outside.
    pub runs: Vec<u32>,
}

/// A set K on a cell grid: whole cells plus individual interfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub grid: CellGrid,
    pub cells: Vec<bool>,
    vertical: Vec<bool>,
    horizontal: Vec<bool>,
}

impl Barrier {
    pub fn empty(grid: CellGrid) -> Self {
        Barrier { grid, cells: vec![false; grid.len()], vertical: vec![false; grid.vertical_count()], horizontal: vec![false; grid.horizontal_count()] }
    }

    pub fn from_cells(set: &CellSet) -> Self {
        let mut b = Barrier::empty(set.grid);
        b.cells.clone_from(&set.bits);
        b
    }

    /// Barrier whose interfaces satisfy the predicate.
    pub fn from_interfaces(grid: CellGrid, covered: impl Fn(Point, Point) -> bool + Sync) -> Self {
        let vertical = (0..grid.vertical_count())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % (grid.nx - 1), k / (grid.nx - 1));
                let (a, b) = grid.vertical_interface(i, j);
                covered(a, b)
            })
            .collect();
        let horizontal = (0..grid.horizontal_count())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % grid.nx, k / grid.nx);
                let (a, b) = grid.horizontal_interface(i, j);
                covered(a, b)
            })
            .collect();
        Barrier { grid, cells: vec![false; grid.len()], vertical, horizontal }
    }

    pub fn set_vertical(&mut self, i: usize, j: usize) {
        self.vertical[j * (self.grid.nx - 1) + i] = true;
    }

    pub fn set_horizontal(&mut self, i: usize, j: usize) {
        self.horizontal[j * self.grid.nx + i] = true;
    }

    fn cell(&self, i: usize, j: usize) -> bool {
        self.cells[self.grid.index(i, j)]
    }

    pub fn covers_vertical(&self, i: usize, j: usize) -> bool {
        self.vertical[j * (self.grid.nx - 1) + i] || self.cell(i, j) || self.cell(i + 1, j)
    }

    pub fn covers_horizontal(&self, i: usize, j: usize) -> bool {
        self.horizontal[j * self.grid.nx + i] || self.cell(i, j) || self.cell(i, j + 1)
    }

    pub fn union(&self, other: &Barrier) -> Result<Barrier> {
        if self.grid != other.grid {
            return Err(Error::Contract("barriers live on different grids".into()));
        }
        let or = |a: &[bool], b: &[bool]| a.iter().zip(b).map(|(x, y)| *x || *y).collect();
        Ok(Barrier {
            grid: self.grid,
            cells: or(&self.cells, &other.cells),
            vertical: or(&self.vertical, &other.vertical),
            horizontal: or(&self.horizontal, &other.horizontal),
        })
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().chain(&self.vertical).chain(&self.horizontal).any(|b| *b)
    }

    pub fn interface_count(&self) -> usize {
        self.vertical.iter().chain(&self.horizontal).filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisconnectReport {
    pub disconnects: bool,
    pub components: usize,
    pub component_sizes: Vec<usize>,
}

/// Whether cutting every interface covered by `k` splits `g` into at least
/// two nonempty pieces.
pub fn essentially_disconnects(k: &Barrier, g: &CellSet) -> Result<DisconnectReport> {
    if k.grid != g.grid {
        return Err(Error::Contract("barrier and cell set live on different grids".into()));
    }
    if g.is_empty() {
        return Err(Error::Contract("the set to disconnect is empty".into()));
    }
    let comps = g.components(Some(k));
    Ok(DisconnectReport { disconnects: comps.len() >= 2, components: comps.len(), component_sizes: comps.iter().map(Vec::len).collect() })
}

fn interface_samples(a: Point, b: Point) -> impl Iterator<Item = Point> {
    (0..9).map(move |k| geom::lerp(a, b, (k as f64 + 0.5) / 9.0))
}

/// Interfaces along which the lower limit of `v` vanishes somewhere.
pub fn zero_barrier(v: &StructuredBVField, grid: CellGrid) -> Barrier {
    Barrier::from_interfaces(grid, |a, b| {
        interface_samples(a, b).any(|p| v.domain.contains(p) && v.eval_lower(p).is_ok_and(|x| x <= ZERO_LEVEL))
    })
}

/// Interfaces met by a jump wall.
pub fn wall_barrier(f: &StructuredBVField, grid: CellGrid) -> Barrier {
    Barrier::from_interfaces(grid, |a, b| {
        f.walls.iter().any(|w| w.vertices.windows(2).any(|s| segment_hit(a, b, s[0], s[1]) != SegHit::Disjoint))
    })
}

/// Cells whose centre value exceeds `tol`.
pub fn positivity_cells(v: &StructuredBVField, grid: CellGrid, tol: f64) -> CellSet {
    CellSet::from_fn(grid, |i, j| v.eval_lower(grid.center(i, j)).is_ok_and(|x| x > tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaCandidate {
    pub cells: CellSet,
    pub components: usize,
    pub connected: bool,
}

/// Cells whose closure stays away from the zero set of the lower limit,
/// judged on a 9x9 sample of the closed cell.
pub fn omega_candidate(v: &StructuredBVField, grid: CellGrid) -> OmegaCandidate {
    let cells = CellSet::from_fn(grid, |i, j| {
        if !v.domain.contains(grid.center(i, j)) {
            return false;
        }
        let c = grid.corner(i, j);
        (0..81).all(|k| {
            let p = [c[0] + (k % 9) as f64 / 8.0 * grid.resolution, c[1] + (k / 9) as f64 / 8.0 * grid.resolution];
            !v.domain.contains(p) || v.eval_lower(p).is_ok_and(|x| x > ZERO_LEVEL)
        })
    });
    let components = cells.components(None).len();
    OmegaCandidate { connected: components == 1, components, cells }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PositivityVerdict {
    SingleInterval { a: f64, b: f64 },
    Empty,
    HypothesisViolated { witness: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Positivity1d {
    /// Sample points and whether the lower limit is positive there.
    pub samples: Vec<(f64, bool)>,
    pub verdict: PositivityVerdict,
}

/// The set where the lower limit of a nonnegative profile is positive.
pub fn positivity_set_1d(v: &BVProfile, samples: usize) -> Result<Positivity1d> {
    if samples < 2 {
        return Err(Error::Contract("need at least two samples".into()));
    }
    let (a0, am) = (v.start(), v.end());
    let ts: Vec<f64> = (0..samples).map(|k| a0 + (am - a0) * (k as f64 + 0.5) / samples as f64).collect();
    let mut pos = Vec::with_capacity(samples);
    for &t in &ts {
        let x = v.lower_limit(t);
        if x < -ZERO_LEVEL {
            return Err(Error::Contract(format!("profile is negative ({x}) at {t}")));
        }
        pos.push(x > ZERO_LEVEL);
    }
    let samples_out: Vec<(f64, bool)> = ts.iter().copied().zip(pos.iter().copied()).collect();
    let first = pos.iter().position(|p| *p);
    let last = pos.iter().rposition(|p| *p);
    let verdict = match (first, last) {
        (Some(f), Some(l)) => {
            if let Some(k) = (f..=l).find(|&k| !pos[k]) {
                PositivityVerdict::HypothesisViolated {
                    witness: ts[k],
                    reason: "the zero set splits the positive mass into two sides of positive measure".into(),
                }
            } else {
                let positive = |t: f64| v.lower_limit(t) > ZERO_LEVEL;
                let a = if f == 0 { a0 } else { bisect(ts[f - 1], ts[f], positive) };
                let b = if l == samples - 1 { am } else { bisect(ts[l + 1], ts[l], positive) };
                PositivityVerdict::SingleInterval { a, b }
            }
        }
        _ => PositivityVerdict::Empty,
    };
    Ok(Positivity1d { samples: samples_out, verdict })
}

/// Boundary between `off` (predicate false) and `on` (predicate true).
fn bisect(mut off: f64, mut on: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (off + on);
        if mid == off || mid == on {
            break;
        }
        if pred(mid) {
            on = mid;
        } else {
            off = mid;
        }
    }
    off
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorProbe {
    /// Cells of K with no ball met at the probe resolution.
    pub untouched_cells: usize,
    pub probed_cells: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseBalls {
    pub seed: u64,
    pub epsilon: f64,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    /// Sum of 2 pi r_h.
    pub boundary_length_sum: f64,
    pub summability_ok: bool,
    /// Sum of pi r_h^2.
    pub area_sum: f64,
    /// Lattice estimate of the area of the union.
    pub area_estimate: f64,
    pub area_ok: bool,
    pub probe: InteriorProbe,
    #[serde(skip)]
    pub complement: CellSet,
    pub limitation: &'static str,
}

pub fn summability_sum(radii: &[f64]) -> f64 {
    radii.iter().map(|r| 2.0 * PI * r).sum()
}

/// Balls in the unit disk with radii summing to one in the perimeter sense
/// and total area at most `epsilon`, and the cell set of their complement.
pub fn dense_ball_complement(count: usize, seed: u64, epsilon: f64, resolution: f64) -> Result<DenseBalls> {
    if count == 0 {
        return Err(Error::Contract("count must be at least one".into()));
    }
    if !(epsilon > 0.0 && epsilon < PI) {
        return Err(Error::Contract(format!("epsilon must lie in (0, pi), got {epsilon}")));
    }
    let total: f64 = (1..=count).map(|h| 1.0 / (h as f64 * (h as f64 + 1.0))).sum();
    let mut radii: Vec<f64> = (1..=count).map(|h| 1.0 / (h as f64 * (h as f64 + 1.0)) / total / (2.0 * PI)).collect();
    let area: f64 = radii.iter().map(|r| PI * r * r).sum();
    if area > epsilon {
        let s = (epsilon / area).sqrt() * (1.0 - 1e-12);
        radii.iter_mut().for_each(|r| *r *= s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Point> = radii
        .iter()
        .map(|r| {
            let rho = (1.0 - r) * rng.random::<f64>().sqrt();
            let th = 2.0 * PI * rng.random::<f64>();
            [rho * th.cos(), rho * th.sin()]
        })
        .collect();
    dense_balls_from(seed, epsilon, centers, radii, resolution)
}

/// Checks given balls; fails if the perimeter sum exceeds one.
pub fn dense_balls_from(seed: u64, epsilon: f64, centers: Vec<Point>, radii: Vec<f64>, resolution: f64) -> Result<DenseBalls> {
    let boundary_length_sum = summability_sum(&radii);
    let summability_ok = boundary_length_sum <= 1.0 + 1e-12;
    if !summability_ok {
        return Err(Error::Precondition(format!("sum of 2 pi r_h is {boundary_length_sum}, above 1")));
    }
    let area_sum: f64 = radii.iter().map(|r| PI * r * r).sum();
    let index = BallIndex::new(&centers, &radii);
    let grid = CellGrid { origin: [-1.0, -1.0], resolution, nx: cells_along(2.0, resolution), ny: cells_along(2.0, resolution) };

    // area of the union by sampling a 4x finer lattice
    let fine = 4 * grid.nx;
    let h = 2.0 / fine as f64;
    let covered: usize = (0..fine * fine)
        .into_par_iter()
        .filter(|&k| {
            let p = [-1.0 + ((k % fine) as f64 + 0.5) * h, -1.0 + ((k / fine) as f64 + 0.5) * h];
            index.inside(p)
        })
        .count();
    let area_estimate = covered as f64 * h * h;
    let area_ok = area_sum <= epsilon && area_estimate <= epsilon;

    let complement = CellSet::from_fn(grid, |i, j| {
        let c = grid.center(i, j);
        geom::norm(c) <= 1.0 && !index.inside(c)
    });
    let probe_n = 8;
    let results: Vec<(bool, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.coords(k);
            let c = grid.corner(i, j);
            let interior = (0..4).all(|q| geom::norm(grid.corner(i + q % 2, j + q / 2)) < 1.0);
            if !complement.contains(i, j) || !interior {
                return (false, false);
            }
            let touched = (0..probe_n * probe_n).any(|s| {
                let p = [
                    c[0] + ((s % probe_n) as f64 + 0.5) / probe_n as f64 * resolution,
                    c[1] + ((s / probe_n) as f64 + 0.5) / probe_n as f64 * resolution,
                ];
                index.inside(p)
            });
            (true, !touched)
        })
        .collect();
    let probed_cells = results.iter().filter(|r| r.0).count();
    let untouched_cells = results.iter().filter(|r| r.1).count();
    Ok(DenseBalls {
        seed,
        epsilon,
        centers,
        radii,
        boundary_length_sum,
        summability_ok,
        area_sum,
        area_estimate,
        area_ok,
        probe: InteriorProbe { untouched_cells, probed_cells, passed: untouched_cells == 0 },
        complement,
        limitation: "empty interior of K holds only in the limit of infinitely many balls; the probe reports finite-count behaviour",
    })
}

/// Bucketed lookup of balls in [-1, 1]^2.
struct BallIndex<'a> {
    centers: &'a [Point],
    radii: &'a [f64],
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> BallIndex<'a> {
    fn new(centers: &'a [Point], radii: &'a [f64]) -> Self {
        let n = 64;
        let mut buckets = vec![Vec::new(); n * n];
        let cell = |x: f64| (((x + 1.0) / 2.0 * n as f64).floor().max(0.0) as usize).min(n - 1);
        for (k, (c, r)) in centers.iter().zip(radii).enumerate() {
            for j in cell(c[1] - r)..=cell(c[1] + r) {
                for i in cell(c[0] - r)..=cell(c[0] + r) {
                    buckets[j * n + i].push(k);
                }
            }
        }
        BallIndex { centers, radii, n, buckets }
    }

    fn inside(&self, p: Point) -> bool {
        let cell = |x: f64| (((x + 1.0) / 2.0 * self.n as f64).floor().max(0.0) as usize).min(self.n - 1);
        self.buckets[cell(p[1]) * self.n + cell(p[0])].iter().any(|&k| geom::dist(p, self.centers[k]) < self.radii[k])
    }
}
