//! Singular vertical distance on lattice graphs.
//!
//! Nodes are admissible cell centres of a lattice aligned with the domain's
//! bounding box; edges join nearby nodes and carry the singular variation of
//! the field restricted to the straight segment between them. Distances are
//! nonnegative shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv1d::{BVProfile, VariationPart};
use crate::bvfield::StructuredBVField;
use crate::chains::{validate_chain, PolygonalChain};
use crate::geom::{self, Point};
use crate::{Error, Result};

/// Weights at or below this are treated as zero when forming classes.
pub const ZERO_TOL: f64 = 1e-12;
/// Default fraction of nodes allowed outside the largest zero class.
pub const DEFAULT_COVERAGE_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    K4,
    #[default]
    #[serde(rename = "8")]
    K8,
    #[serde(rename = "16")]
    K16,
}

impl Connectivity {
    pub fn from_k(k: u32) -> Result<Self> {
        match k {
            4 => Ok(Connectivity::K4),
            8 => Ok(Connectivity::K8),
            16 => Ok(Connectivity::K16),
            _ => Err(Error::Contract(format!("connectivity must be 4, 8 or 16, got {k}"))),
        }
    }

    pub fn k(self) -> u32 {
        match self {
            Connectivity::K4 => 4,
            Connectivity::K8 => 8,
            Connectivity::K16 => 16,
        }
    }

    /// One offset per undirected neighbour pair.
    pub fn forward_offsets(self) -> &'static [(i64, i64)] {
        const ALL: [(i64, i64); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)];
        match self {
            Connectivity::K4 => &ALL[..2],
            Connectivity::K8 => &ALL[..4],
            Connectivity::K16 => &ALL[..],
        }
    }
}

/// Placement of graph nodes on the cell lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub origin: Point,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    pub connectivity: Connectivity,
    /// Cell index `(i, j)` of every node.
    pub cells: Vec<[usize; 2]>,
    /// Node at cell `j * nx + i`, if admissible.
    pub slots: Vec<Option<usize>>,
}

impl Lattice {
    pub fn center(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.resolution,
            self.origin[1] + (j as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.nx && j < self.ny {
            self.slots[j * self.nx + i]
        } else {
            None
        }
    }
}

/// Number of cells of size `r` needed to cover a length.
pub fn cells_along(len: f64, r: f64) -> usize {
    let n = len / r;
    let rounded = n.round();
    if (n - rounded).abs() <= 1e-9 * n.max(1.0) {
        rounded.max(1.0) as usize
    } else {
        n.ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdGraph {
    pub nodes: Vec<Point>,
    pub edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    pub lattice: Option<Lattice>,
}

impl SvdGraph {
    pub fn from_edges(nodes: Vec<Point>, edges: Vec<Edge>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            if e.a >= nodes.len() || e.b >= nodes.len() || e.a == e.b {
                return Err(Error::Construction(format!("edge ({}, {}) does not join two distinct nodes", e.a, e.b)));
            }
            if !(e.weight >= 0.0) {
                return Err(Error::Invariant(format!("edge ({}, {}) has weight {}", e.a, e.b, e.weight)));
            }
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
        }
        Ok(SvdGraph { nodes, edges, adjacency, lattice: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|(_, w)| *w)
    }

    /// Node closest to `p`, ties broken by index.
    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (k, n) in self.nodes.iter().enumerate() {
            let d = geom::dist(*n, p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        best.map(|(_, k)| k)
    }

    /// Node exactly at `p`.
    pub fn node_index(&self, p: Point) -> Option<usize> {
        self.nodes.iter().position(|n| *n == p)
    }
}

/// Singular variation of the field along the segment `a -> b`, or `None`
/// when the segment is not a valid chain for the field.
pub fn segment_weight(field: &StructuredBVField, a: Point, b: Point) -> Option<f64> {
    let chain = validate_chain(&field.domain, &[a, b]).ok()?;
    let profile = field.restrict(&chain).ok()?;
    Some(profile.variation(VariationPart::Singular))
}

pub fn build_graph(field: &StructuredBVField, resolution: f64, connectivity: Connectivity) -> Result<SvdGraph> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::Contract(format!("resolution must be positive, got {resolution}")));
    }
    let (lo, hi) = field.domain.bbox();
    let nx = cells_along(hi[0] - lo[0], resolution);
    let ny = cells_along(hi[1] - lo[1], resolution);
    if nx.saturating_mul(ny) > 50_000_000 {
        return Err(Error::Contract(format!("lattice of {nx}x{ny} cells is too large")));
    }
    let proto = Lattice { origin: lo, resolution, nx, ny, connectivity, cells: vec![], slots: vec![] };
    let admissible: Vec<bool> = (0..nx * ny)
        .into_par_iter()
        .map(|s| field.is_admissible_node(proto.center(s % nx, s / nx)))
        .collect();
    let mut nodes = Vec::new();
    let mut cells = Vec::new();
    let mut slots = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if admissible[j * nx + i] {
                slots[j * nx + i] = Some(nodes.len());
                nodes.push(proto.center(i, j));
                cells.push([i, j]);
            }
        }
    }
    if nodes.len() < 2 {
        return Err(Error::Construction(format!(
            "only {} admissible lattice nodes at resolution {resolution}",
            nodes.len()
        )));
    }
    let lattice = Lattice { cells, slots, ..proto };
    let offsets = connectivity.forward_offsets();
    let edges: Vec<Edge> = (0..nodes.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            let [i, j] = lattice.cells[a];
            let lattice = &lattice;
            let nodes = &nodes;
            offsets.iter().filter_map(move |&(di, dj)| {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 {
                    return None;
                }
                let b = lattice.node_at(ni as usize, nj as usize)?;
                let weight = segment_weight(field, nodes[a], nodes[b])?;
                Some(Edge { a, b, weight })
            })
        })
        .collect();
    let mut g = SvdGraph::from_edges(nodes, edges)?;
    g.lattice = Some(lattice);
    Ok(g)
}

/// Graph on the sample points `a0 + (i + 1/2) r` of a one-dimensional
/// profile, joining consecutive samples. Points sitting on a jump are skipped.
pub fn build_graph_1d(profile: &BVProfile, resolution: f64) -> Result<SvdGraph> {
    if !(resolution > 0.0) {
        return Err(Error::Contract(format!("resolution must be positive, got {resolution}")));
    }
    let n = cells_along(profile.end() - profile.start(), resolution);
    let ts: Vec<f64> = (0..n)
        .map(|i| profile.start() + (i as f64 + 0.5) * resolution)
        .filter(|t| *t < profile.end() && !profile.jumps.iter().any(|j| j.t == *t))
        .collect();
    if ts.len() < 2 {
        return Err(Error::Construction("fewer than two sample points".into()));
    }
    let mut edges = Vec::with_capacity(ts.len() - 1);
    for (k, w) in ts.windows(2).enumerate() {
        let piece = profile.restrict_to(w[0], w[1])?;
        edges.push(Edge { a: k, b: k + 1, weight: piece.variation(VariationPart::Singular) });
    }
    SvdGraph::from_edges(ts.into_iter().map(|t| [t, 0.0]).collect(), edges)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdMap {
    pub source: usize,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl SvdMap {
    /// Node path from the source to `target`, empty if unreachable.
    pub fn path_to(&self, target: usize) -> Vec<usize> {
        if !self.dist[target].is_finite() {
            return Vec::new();
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
            if path.len() > self.dist.len() {
                break;
            }
        }
        path.reverse();
        path
    }
}

#[derive(PartialEq)]
struct Queued {
    d: f64,
    node: usize,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn svd_map(g: &SvdGraph, source: usize) -> Result<SvdMap> {
    if source >= g.len() {
        return Err(Error::Domain(format!("source {source} is not a node of the graph")));
    }
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut pred = vec![None; g.len()];
    let mut done = vec![false; g.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Queued { d: 0.0, node: source });
    while let Some(Queued { d, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &(next, w) in g.neighbours(node) {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                pred[next] = Some(node);
                heap.push(Queued { d: nd, node: next });
            }
        }
    }
    Ok(SvdMap { source, dist, pred })
}

/// One-to-all maps for several sources, computed concurrently.
pub fn svd_maps(g: &SvdGraph, sources: &[usize]) -> Result<Vec<SvdMap>> {
    sources.par_iter().map(|&s| svd_map(g, s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub distance: f64,
    pub path: Vec<usize>,
    /// The path as a chain, when it is simple.
    pub chain: Option<PolygonalChain>,
}

pub fn svd(g: &SvdGraph, domain: &geom::Domain, x1: usize, x2: usize) -> Result<SvdResult> {
    if x2 >= g.len() {
        return Err(Error::Domain(format!("target {x2} is not a node of the graph")));
    }
    if x1 == x2 {
        if x1 >= g.len() {
            return Err(Error::Domain(format!("source {x1} is not a node of the graph")));
        }
        return Ok(SvdResult { distance: 0.0, path: vec![], chain: None });
    }
    let m = svd_map(g, x1)?;
    let path = m.path_to(x2);
    let vertices: Vec<Point> = path.iter().map(|&k| g.nodes[k]).collect();
    let chain = if path.len() >= 2 { validate_chain(domain, &vertices).ok() } else { None };
    Ok(SvdResult { distance: m.dist[x2], path, chain })
}

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }

    /// Components as sorted node lists, ordered by their smallest node.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            let r = self.find(v);
            if label[r] == usize::MAX {
                label[r] = out.len();
                out.push(Vec::new());
            }
            out[label[r]].push(v);
        }
        out
    }
}

/// Components of the graph after dropping every edge heavier than the zero
/// tolerance.
pub fn zero_classes(g: &SvdGraph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(g.len());
    for e in &g.edges {
        if e.weight <= ZERO_TOL {
            uf.union(e.a, e.b);
        }
    }
    uf.components()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalSingularity {
    pub minimally_singular: bool,
    /// Smallest node of the largest class.
    pub witness: Point,
    pub largest_class_size: usize,
    pub largest_class_fraction: f64,
    pub num_nodes: usize,
    pub num_classes: usize,
    /// A node outside the largest class, when there is one.
    pub violating: Option<Point>,
}

pub fn minimal_singularity(g: &SvdGraph, tol: f64) -> MinimalSingularity {
    let classes = zero_classes(g);
    let largest = classes
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("graph has nodes");
    let big = &classes[largest];
    let n = g.len();
    let violating = classes.iter().enumerate().find(|(i, _)| *i != largest).map(|(_, c)| g.nodes[c[0]]);
    MinimalSingularity {
        minimally_singular: big.len() as f64 >= (1.0 - tol) * n as f64,
        witness: g.nodes[big[0]],
        largest_class_size: big.len(),
        largest_class_fraction: big.len() as f64 / n as f64,
        num_nodes: n,
        num_classes: classes.len(),
        violating,
    }
}

pub fn is_minimally_singular(
    field: &StructuredBVField,
    resolution: f64,
    connectivity: Connectivity,
    tol: f64,
) -> Result<MinimalSingularity> {
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::Contract(format!("coverage tolerance must lie in [0, 1), got {tol}")));
    }
    let g = build_graph(field, resolution, connectivity)?;
    Ok(minimal_singularity(&g, tol))
}

/// Whether distances never decrease along predecessor links.
pub fn monotone_along_optimal(m: &SvdMap) -> bool {
    m.pred.iter().enumerate().all(|(v, p)| match p {
        Some(p) => m.dist[*p] <= m.dist[v],
        None => true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStep {
    pub resolution: f64,
    pub connectivity: u32,
    pub source: Point,
    pub target: Point,
    pub distance: f64,
}

/// Distances between the nodes nearest to `p` and `q` on a sequence of
/// lattices.
pub fn refinement_sequence(
    field: &StructuredBVField,
    p: Point,
    q: Point,
    levels: &[(f64, Connectivity)],
) -> Result<Vec<RefinementStep>> {
    levels
        .iter()
        .map(|&(r, k)| {
            let g = build_graph(field, r, k)?;
            let a = g.nearest_node(p).expect("nonempty graph");
            let b = g.nearest_node(q).expect("nonempty graph");
            let m = svd_map(&g, a)?;
            Ok(RefinementStep { resolution: r, connectivity: k.k(), source: g.nodes[a], target: g.nodes[b], distance: m.dist[b] })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv1d::{self, ProfileBuilder};
    use crate::bvfield::{CantorChannel, JumpWall, SmoothGrid};
    use crate::geom::Domain;

    fn unit() -> Domain {
        Domain::rect([0.0, 0.0], [1.0, 1.0]).unwrap()
    }

    fn field(walls: Vec<JumpWall>, channels: Vec<CantorChannel>) -> StructuredBVField {
        StructuredBVField::new(unit(), SmoothGrid::constant([0.0, 0.0], [1.0, 1.0], 1.0).unwrap(), walls, channels).unwrap()
    }

    #[test]
    fn constant_field_weights_vanish() {
        let g = build_graph(&field(vec![], vec![]), 0.1, Connectivity::K8).unwrap();
        assert_eq!(g.len(), 100);
        assert!(g.edges.iter().all(|e| e.weight == 0.0));
        assert_eq!(g.edges.len(), 2 * 90 + 2 * 81);
        let m = svd_map(&g, 0).unwrap();
        assert!(m.dist.iter().all(|d| *d == 0.0));
        assert_eq!(zero_classes(&g).len(), 1);
    }

    #[test]
    fn separating_wall_weights_and_classes() {
        let f = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 1.0)], vec![]);
        let g = build_graph(&f, 0.1, Connectivity::K8).unwrap();
        for e in &g.edges {
            let crosses = (g.nodes[e.a][0] - 0.5).signum() != (g.nodes[e.b][0] - 0.5).signum();
            assert_eq!(e.weight, if crosses { 1.0 } else { 0.0 });
        }
        assert_eq!(zero_classes(&g).len(), 2);
        let v = minimal_singularity(&g, DEFAULT_COVERAGE_TOL);
        assert!(!v.minimally_singular);
        assert_eq!(v.num_classes, 2);
    }

    #[test]
    fn separating_wall_of_height_two() {
        let f = field(vec![JumpWall::new(vec![[0.5, 0.0], [0.5, 1.0]], 2.0)], vec![]);
        let g = build_graph(&f, 0.1, Connectivity::K8).unwrap();
        let a = g.nearest_node([0.25, 0.45]).unwrap();
        let b = g.nearest_node([0.75, 0.65]).unwrap();
        let r = svd(&g, &f.domain, a, b).unwrap();
        assert_eq!(r.distance, 2.0);
        assert!(r.chain.is_some());
        let same = svd(&g, &f.domain, a, a).unwrap();
        assert_eq!(same.distance, 0.0);
        assert!(same.path.is_empty() && same.chain.is_none());
    }

    #[test]
    fn channel_edge_weight() {
        let d = Domain::rect([-0.05, -0.05], [0.95, 0.95]).unwrap();
        let c = CantorChannel { direction: [1.0, 0.0], band: [0.0, 1.0], weight: 1.0 };
        let f = StructuredBVField::new(d, SmoothGrid::constant([-0.05, -0.05], [0.95, 0.95], 0.0).unwrap(), vec![], vec![c]).unwrap();
        let w = segment_weight(&f, [0.4, 0.3], [0.5, 0.3]).unwrap();
        assert_eq!(w, bv1d::cantor(0.5) - bv1d::cantor(0.4));
        let g = build_graph(&f, 0.1, Connectivity::K4).unwrap();
        let a = g.nearest_node([0.4, 0.3]).unwrap();
        let b = g.nearest_node([0.5, 0.3]).unwrap();
        assert_eq!(g.edge_weight(a, b), Some(w));
    }

    #[test]
    fn nonseparating_wall_is_invisible() {
        let f = field(vec![JumpWall::new(vec![[0.3, 0.5], [0.7, 0.5]], 1.0)], vec![]);
        let g = build_graph(&f, 0.05, Connectivity::K8).unwrap();
        let m = svd_map(&g, 0).unwrap();
        assert!(m.dist.iter().all(|d| *d == 0.0));
        let v = minimal_singularity(&g, DEFAULT_COVERAGE_TOL);
        assert!(v.minimally_singular && v.largest_class_fraction == 1.0);
    }

    #[test]
    fn enclosed_block_map() {
        let sq = vec![[0.2, 0.2], [0.2, 0.8], [0.8, 0.8], [0.8, 0.2], [0.2, 0.2]];
        let f = field(vec![JumpWall::new(sq, 1.0)], vec![]);
        let g = build_graph(&f, 0.1, Connectivity::K8).unwrap();
        let src = g.nearest_node([0.05, 0.05]).unwrap();
        let m = svd_map(&g, src).unwrap();
        for (k, p) in g.nodes.iter().enumerate() {
            let inside = p[0] > 0.2 && p[0] < 0.8 && p[1] > 0.2 && p[1] < 0.8;
            assert_eq!(m.dist[k], if inside { 1.0 } else { 0.0 });
        }
        assert!(monotone_along_optimal(&m));
        let v = minimal_singularity(&g, DEFAULT_COVERAGE_TOL);
        assert!(!v.minimally_singular);
        assert_eq!(v.num_classes, 2);
    }

    #[test]
    fn corrupted_predecessor_is_detected() {
        let sq = vec![[0.2, 0.2], [0.2, 0.8], [0.8, 0.8], [0.8, 0.2], [0.2, 0.2]];
        let f = field(vec![JumpWall::new(sq, 1.0)], vec![]);
        let g = build_graph(&f, 0.1, Connectivity::K8).unwrap();
        let mut m = svd_map(&g, 0).unwrap();
        let outside = (1..g.len()).find(|&k| m.dist[k] == 0.0).unwrap();
        let inside = (0..g.len()).find(|&k| m.dist[k] == 1.0).unwrap();
        m.pred[outside] = Some(inside);
        assert!(!monotone_along_optimal(&m));
    }

    #[test]
    fn one_dimensional_graphs() {
        let smooth = ProfileBuilder::new(0.0, 0.0).piece(1.0, 1.0, -0.3).build().unwrap();
        let g = build_graph_1d(&smooth, 0.05).unwrap();
        assert!(minimal_singularity(&g, 0.0).minimally_singular);
        let jump = ProfileBuilder::new(0.0, 0.0).constant(1.0).jump(0.5, -0.75).build().unwrap();
        let g = build_graph_1d(&jump, 0.1).unwrap();
        assert!(!minimal_singularity(&g, 0.0).minimally_singular);
        let m = svd_map(&g, 0).unwrap();
        assert_eq!(m.dist[g.len() - 1], 0.75);
    }

    #[test]
    fn lattice_covers_the_box() {
        assert_eq!(cells_along(1.0, 0.1), 10);
        assert_eq!(cells_along(1.0, 0.3), 4);
        assert_eq!(cells_along(2.0, 0.125), 16);
    }

    #[test]
    fn unreachable_nodes_are_infinite() {
        let g = SvdGraph::from_edges(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![Edge { a: 0, b: 1, weight: 0.5 }]).unwrap();
        let m = svd_map(&g, 0).unwrap();
        assert_eq!(m.dist, vec![0.0, 0.5, f64::INFINITY]);
        assert!(m.path_to(2).is_empty());
        assert!(svd_map(&g, 7).is_err());
    }
}
