use clap::ValueEnum;
use minsing::connectivity::{
    dense_ball_complement, essentially_disconnects, omega_candidate, positivity_cells, positivity_set_1d, wall_barrier,
    zero_barrier, CellGrid, CellSet, PositivityVerdict, ZERO_LEVEL,
};
use minsing::steiner::{
    check_equality_case, check_precondition, counterexample, perimeter_pair, rigidity_test, Counterexample, EqualityOptions,
    PerimeterOptions, Region, VDistributedSet,
};
use minsing::svd::{build_graph, build_graph_1d, minimal_singularity, svd, svd_map, zero_classes, Connectivity, SvdGraph};
use minsing::{bv1d, Domain, Point};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{csv_table, json_report, Raster};
use crate::scenario::{FieldSpec, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    SvdMap,
    Svd,
    MinSingular,
    Rigidity,
    Perimeter,
    EqualityCheck,
    Counterexample,
    DisconnectCheck,
    #[value(name = "positivity-1d")]
    Positivity1d,
    DenseBalls,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SvdMap => "svd-map",
            Command::Svd => "svd",
            Command::MinSingular => "min-singular",
            Command::Rigidity => "rigidity",
            Command::Perimeter => "perimeter",
            Command::EqualityCheck => "equality-check",
            Command::Counterexample => "counterexample",
            Command::DisconnectCheck => "disconnect-check",
            Command::Positivity1d => "positivity-1d",
            Command::DenseBalls => "dense-balls",
        }
    }

    pub fn formats(self) -> &'static [Format] {
        use Format::*;
        match self {
            Command::SvdMap => &[Json, Csv, Pgm, Svg],
            Command::Svd | Command::MinSingular | Command::Positivity1d => &[Json, Csv],
            Command::DisconnectCheck | Command::DenseBalls => &[Json, Pgm],
            _ => &[Json],
        }
    }

    pub fn all() -> &'static [Command] {
        Command::value_variants()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Pgm,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Pgm => "pgm",
            Format::Svg => "svg",
        }
    }
}

/// Flag overrides of the scenario settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub resolution: Option<f64>,
    pub connectivity: Option<u32>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Effective {
    pub resolution: f64,
    pub connectivity: u32,
    pub tol: f64,
    pub seed: u64,
    pub format: Format,
}

impl Effective {
    fn conn(&self) -> Connectivity {
        Connectivity::from_k(self.connectivity).expect("validated")
    }
}

/// Bytes produced by a command, plus the failure to report after writing
/// them, if any.
#[derive(Debug)]
pub struct Outcome {
    pub bytes: Vec<u8>,
    pub status: Option<CliError>,
}

impl Outcome {
    fn ok(bytes: Vec<u8>) -> Self {
        Outcome { bytes, status: None }
    }
}

pub fn effective(sc: &Scenario, o: &Overrides, format: Format) -> Result<Effective, CliError> {
    let s = &sc.settings;
    let e = Effective {
        resolution: o.resolution.unwrap_or(s.resolution),
        connectivity: o.connectivity.unwrap_or(s.connectivity),
        tol: o.tol.unwrap_or(s.tol),
        seed: o.seed.unwrap_or(s.seed),
        format,
    };
    if !(e.resolution > 0.0 && e.resolution.is_finite()) {
        return Err(CliError::Parse(format!("--resolution must be positive, got {}", e.resolution)));
    }
    if Connectivity::from_k(e.connectivity).is_err() {
        return Err(CliError::Parse(format!("--connectivity must be 4, 8 or 16, got {}", e.connectivity)));
    }
    if !(0.0..1.0).contains(&e.tol) {
        return Err(CliError::Parse(format!("--tol must lie in [0, 1), got {}", e.tol)));
    }
    Ok(e)
}

pub fn run(cmd: Command, sc: &Scenario, name: &str, o: &Overrides, format: Format) -> Result<Outcome, CliError> {
    if !cmd.formats().contains(&format) {
        return Err(CliError::Parse(format!("{} does not support --format {}", cmd.name(), format.extension())));
    }
    let e = effective(sc, o, format)?;
    let ctx = Ctx { cmd, sc, name, e, settings: serde_json::to_value(e).expect("settings serialize") };
    match cmd {
        Command::SvdMap => ctx.svd_map(),
        Command::Svd => ctx.svd(),
        Command::MinSingular => ctx.min_singular(),
        Command::Rigidity => ctx.rigidity(),
        Command::Perimeter => ctx.perimeter(),
        Command::EqualityCheck => ctx.equality_check(),
        Command::Counterexample => ctx.counterexample(),
        Command::DisconnectCheck => ctx.disconnect_check(),
        Command::Positivity1d => ctx.positivity_1d(),
        Command::DenseBalls => ctx.dense_balls(),
    }
}

struct Ctx<'a> {
    cmd: Command,
    sc: &'a Scenario,
    name: &'a str,
    e: Effective,
    settings: serde_json::Value,
}

fn xy(p: Point) -> serde_json::Value {
    json!([p[0], p[1]])
}

#[derive(Serialize)]
struct CounterexampleOut<'a> {
    kind: &'a minsing::steiner::CounterexampleKind,
    residual: f64,
    b: FieldSpec,
    report: &'a minsing::steiner::EqualityReport,
}

impl<'a> CounterexampleOut<'a> {
    fn of(c: &'a Counterexample) -> Self {
        CounterexampleOut { kind: &c.kind, residual: c.residual, b: FieldSpec::of(&c.b), report: &c.report }
    }
}

impl Ctx<'_> {
    fn json<R: Serialize>(&self, result: R) -> Vec<u8> {
        json_report(self.cmd.name(), self.name, &self.settings, result)
    }

    /// The lattice graph of the field, or of the 1-D profile when there is no
    /// field.
    fn graph(&self) -> Result<(SvdGraph, Domain), CliError> {
        let g = if self.sc.field.is_some() {
            (build_graph(&self.sc.field()?, self.e.resolution, self.e.conn())?, self.sc.domain()?)
        } else if self.sc.profile.is_some() {
            let p = self.sc.profile()?;
            let d = Domain::rect([p.start(), -1.0], [p.end(), 1.0])?;
            (build_graph_1d(&p, self.e.resolution)?, d)
        } else {
            return Err(CliError::Semantic("scenario needs a [field] or a [profile]".into()));
        };
        if g.0.is_empty() {
            return Err(CliError::Semantic("the lattice has no admissible nodes".into()));
        }
        Ok(g)
    }

    fn node_near(&self, g: &SvdGraph, p: Point) -> usize {
        g.nearest_node(p).expect("graph is nonempty")
    }

    fn svd_map(&self) -> Result<Outcome, CliError> {
        let (g, _) = self.graph()?;
        let src = self.sc.queries.sources.first().map_or(0, |p| self.node_near(&g, *p));
        let m = svd_map(&g, src)?;
        for e in &g.edges {
            let (da, db) = (m.dist[e.a], m.dist[e.b]);
            let slack = 1e-12 * da.max(db).max(1.0);
            if db > da + e.weight + slack || da > db + e.weight + slack {
                return Err(CliError::Invariant(format!("distance map violates the triangle bound on edge ({}, {})", e.a, e.b)));
            }
        }
        let out = match self.e.format {
            Format::Json => {
                let finite: Vec<f64> = m.dist.iter().copied().filter(|d| d.is_finite()).collect();
                let nodes: Vec<_> = g.nodes.iter().zip(&m.dist).map(|(p, d)| json!({"x": p[0], "y": p[1], "dist": d})).collect();
                self.json(json!({
                    "source": xy(g.nodes[src]),
                    "num_nodes": g.len(),
                    "num_zero_classes": zero_classes(&g).len(),
                    "max_finite_distance": finite.iter().copied().fold(0.0, f64::max),
                    "unreachable": g.len() - finite.len(),
                    "nodes": nodes,
                }))
            }
            Format::Csv => csv_table("x,y,dist", g.nodes.iter().zip(&m.dist).map(|(p, d)| vec![p[0], p[1], *d])),
            Format::Pgm => Raster::of_graph(&g, &m.dist).to_pgm16(),
            Format::Svg => Raster::of_graph(&g, &m.dist).to_svg(8),
        };
        Ok(Outcome::ok(out))
    }

    fn svd(&self) -> Result<Outcome, CliError> {
        let q = &self.sc.queries;
        if q.sources.is_empty() || q.targets.is_empty() {
            return Err(CliError::Semantic("svd needs queries.sources and queries.targets".into()));
        }
        let (g, d) = self.graph()?;
        let mut pairs = Vec::new();
        let mut rows = Vec::new();
        for s in &q.sources {
            for t in &q.targets {
                let (a, b) = (self.node_near(&g, *s), self.node_near(&g, *t));
                let r = svd(&g, &d, a, b)?;
                let path: Vec<_> = r.path.iter().map(|&k| xy(g.nodes[k])).collect();
                pairs.push(json!({
                    "source": xy(g.nodes[a]),
                    "target": xy(g.nodes[b]),
                    "distance": r.distance,
                    "path": path,
                    "chain_is_simple": r.chain.is_some(),
                }));
                rows.push(vec![g.nodes[a][0], g.nodes[a][1], g.nodes[b][0], g.nodes[b][1], r.distance]);
            }
        }
        Ok(Outcome::ok(match self.e.format {
            Format::Csv => csv_table("source_x,source_y,target_x,target_y,dist", rows),
            _ => self.json(json!({ "pairs": pairs })),
        }))
    }

    fn min_singular(&self) -> Result<Outcome, CliError> {
        let (g, _) = self.graph()?;
        let m = minimal_singularity(&g, self.e.tol);
        let mut classes = zero_classes(&g);
        classes.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        Ok(Outcome::ok(match self.e.format {
            Format::Csv => {
                let mut label = vec![0.0; g.len()];
                for (c, class) in classes.iter().enumerate() {
                    for &k in class {
                        label[k] = c as f64;
                    }
                }
                csv_table("x,y,class", g.nodes.iter().zip(&label).map(|(p, c)| vec![p[0], p[1], *c]))
            }
            _ => self.json(json!({
                "result": m,
                "class_sizes": classes.iter().map(Vec::len).collect::<Vec<_>>(),
            })),
        }))
    }

    fn precondition_failure(&self, message: String) -> Result<Outcome, CliError> {
        let v = self.sc.field()?;
        let pre = check_precondition(&v, self.e.resolution, self.e.conn())?;
        let bytes = self.json(json!({ "precondition": pre, "message": message }));
        Ok(Outcome { bytes, status: Some(CliError::Precondition(message)) })
    }

    fn rigidity(&self) -> Result<Outcome, CliError> {
        let v = self.sc.field()?;
        match rigidity_test(&v, self.e.resolution, self.e.conn(), self.e.tol) {
            Ok(r) => Ok(Outcome::ok(self.json(json!({
                "precondition": r.precondition,
                "minimal": r.minimal,
                "rigid": r.rigid,
                "counterexample": r.counterexample.as_ref().map(CounterexampleOut::of),
            })))),
            Err(minsing::Error::Precondition(m)) => self.precondition_failure(m),
            Err(e) => Err(e.into()),
        }
    }

    fn perimeter(&self) -> Result<Outcome, CliError> {
        let v = self.sc.field()?;
        let e = VDistributedSet::new(v, self.sc.barycenter()?)?;
        let regions: Vec<Region> = if self.sc.queries.regions.is_empty() {
            vec![Region::of_domain(&self.sc.domain()?)]
        } else {
            self.sc.queries.regions.iter().map(|r| Region::new(r.lo, r.hi)).collect::<Result<_, _>>()?
        };
        let opts = PerimeterOptions { resolution: self.e.resolution, closed: self.sc.queries.closed };
        let mut out = Vec::new();
        for r in &regions {
            let (pe, pf) = perimeter_pair(&e, r, &opts)?;
            out.push(json!({
                "lo": xy(r.lo),
                "hi": xy(r.hi),
                "set": pe,
                "symmetral": pf,
                "excess": pe.total - pf.total,
            }));
        }
        Ok(Outcome::ok(self.json(json!({ "closed": opts.closed, "regions": out }))))
    }

    fn equality_check(&self) -> Result<Outcome, CliError> {
        let v = self.sc.field()?;
        let b = self.sc.barycenter()?;
        let opts = EqualityOptions { resolution: self.e.resolution, connectivity: self.e.conn(), check_precondition: true };
        match check_equality_case(&v, &b, &opts) {
            Ok(r) => Ok(Outcome::ok(self.json(r))),
            Err(minsing::Error::Precondition(m)) => self.precondition_failure(m),
            Err(e) => Err(e.into()),
        }
    }

    fn counterexample(&self) -> Result<Outcome, CliError> {
        let v = self.sc.field()?;
        let q = &self.sc.queries;
        let xbar = q
            .xbar
            .or_else(|| q.sources.first().copied())
            .ok_or_else(|| CliError::Semantic("counterexample needs queries.xbar or a source".into()))?;
        let c = counterexample(&v, xbar, q.scale.unwrap_or(1.0), self.e.resolution, self.e.conn())?;
        Ok(Outcome::ok(self.json(CounterexampleOut::of(&c))))
    }

    fn disconnect_check(&self) -> Result<Outcome, CliError> {
        let v = self.sc.field()?;
        let d = self.sc.domain()?;
        let grid = CellGrid::for_domain(&d, self.e.resolution)?;
        let pos = positivity_cells(&v, grid, ZERO_LEVEL);
        let zb = zero_barrier(&v, grid);
        let zero = if pos.is_empty() { None } else { Some(essentially_disconnects(&zb, &pos)?) };
        let walls = essentially_disconnects(&wall_barrier(&v, grid), &CellSet::domain_cells(&d, grid))?;
        let omega = omega_candidate(&v, grid);
        let split = zero.as_ref().is_some_and(|r| r.disconnects) || !omega.connected;
        let bytes = match self.e.format {
            Format::Pgm => omega.cells.to_pgm(),
            _ => self.json(json!({
                "positivity_cells": pos.to_rle(),
                "zero_barrier_interfaces": zb.interface_count(),
                "zero_set_disconnects": zero,
                "walls_disconnect": walls,
                "omega": { "cells": omega.cells.to_rle(), "components": omega.components, "connected": omega.connected },
                "surrogate": "interfaces covered by the set stand in for its essential boundary at lattice scale",
            })),
        };
        let status = split.then(|| CliError::Precondition("the positivity set is essentially disconnected".into()));
        Ok(Outcome { bytes, status })
    }

    fn positivity_1d(&self) -> Result<Outcome, CliError> {
        let p = self.sc.profile()?;
        if !bv1d::endpoint_bound_check(&p) {
            return Err(CliError::Invariant("endpoint values exceed the total variation".into()));
        }
        let r = positivity_set_1d(&p, self.sc.queries.samples.unwrap_or(1000))?;
        let status = match &r.verdict {
            PositivityVerdict::HypothesisViolated { witness, .. } => {
                Some(CliError::Precondition(format!("the zero set splits the positivity set at t = {witness}")))
            }
            _ => None,
        };
        let bytes = match self.e.format {
            Format::Csv => csv_table("t,positive", r.samples.iter().map(|&(t, b)| vec![t, if b { 1.0 } else { 0.0 }])),
            _ => {
                let positive = r.samples.iter().filter(|s| s.1).count();
                self.json(json!({ "verdict": r.verdict, "samples": r.samples.len(), "positive_samples": positive }))
            }
        };
        Ok(Outcome { bytes, status })
    }

    fn dense_balls(&self) -> Result<Outcome, CliError> {
        let spec = self.sc.dense_balls.ok_or_else(|| CliError::Semantic("scenario has no [dense_balls]".into()))?;
        let r = dense_ball_complement(spec.count, self.e.seed, spec.epsilon, spec.resolution)?;
        if !r.summability_ok || !r.area_ok {
            return Err(CliError::Invariant("dense-ball radii break the summability or area bound".into()));
        }
        Ok(Outcome::ok(match self.e.format {
            Format::Pgm => r.complement.to_pgm(),
            _ => self.json(&r),
        }))
    }
}
