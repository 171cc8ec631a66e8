//! Scenario files: a TOML description of a domain, a field, an optional
//! barycenter, a 1-D profile, settings and named queries.

use std::path::Path;

use minsing::bv1d::{AcPiece, CantorAtom, JumpAtom};
use minsing::{BVProfile, CantorChannel, Domain, JumpWall, Point, SmoothGrid, StructuredBVField};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barycenter: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub queries: Queries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_balls: Option<DenseBallSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Rect { min: Point, max: Point },
    Polygon { vertices: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub smooth: SmoothSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub walls: Vec<WallSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothSpec {
    Constant(f64),
    /// `sum c[i][j] x^i y^j` with `i + j <= 3`, sampled bilinearly.
    Polynomial {
        coefficients: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<[usize; 2]>,
    },
    Grid { lo: Point, hi: Point, shape: [usize; 2], values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub vertices: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub direction: Point,
    pub band: [f64; 2],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub start: f64,
    pub value: f64,
    pub pieces: Vec<PieceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<JumpSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cantor: Vec<CantorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub end: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub t: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorSpec {
    pub s0: f64,
    pub s1: f64,
    pub w: f64,
    #[serde(default)]
    pub l0: f64,
    #[serde(default = "one")]
    pub l1: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_connectivity")]
    pub connectivity: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_resolution() -> f64 {
    0.05
}
fn default_connectivity() -> u32 {
    8
}
fn default_tol() -> f64 {
    0.01
}

impl Default for Settings {
    fn default() -> Self {
        Settings { resolution: default_resolution(), connectivity: default_connectivity(), tol: default_tol(), seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Queries {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionSpec>,
    /// Base point of the counterexample construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xbar: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub lo: Point,
    pub hi: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseBallSpec {
    pub count: usize,
    pub epsilon: f64,
    #[serde(default = "default_ball_resolution")]
    pub resolution: f64,
}

fn default_ball_resolution() -> f64 {
    0.01
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let sc = parse_scenario(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        CliError::Semantic(m) => CliError::Semantic(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(sc)
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario data serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        let domain = self.domain.as_ref().map(|d| d.build()).transpose()?;
        if let Some(f) = &self.field {
            let d = domain.as_ref().ok_or_else(|| CliError::Semantic("field: a [domain] is required".into()))?;
            f.build(d).map_err(|e| e.context("field"))?;
        }
        if let Some(b) = &self.barycenter {
            let d = domain.as_ref().ok_or_else(|| CliError::Semantic("barycenter: a [domain] is required".into()))?;
            b.build(d).map_err(|e| e.context("barycenter"))?;
        }
        if let Some(p) = &self.profile {
            p.build().map_err(|e| e.context("profile"))?;
        }
        let s = &self.settings;
        if !(s.resolution > 0.0 && s.resolution.is_finite()) {
            return Err(CliError::Semantic(format!("settings.resolution: must be positive, got {}", s.resolution)));
        }
        minsing::svd::Connectivity::from_k(s.connectivity).map_err(|e| CliError::from(e).context("settings.connectivity"))?;
        if !(0.0..1.0).contains(&s.tol) {
            return Err(CliError::Semantic(format!("settings.tol: must lie in [0, 1), got {}", s.tol)));
        }
        let q = &self.queries;
        let points = q.sources.iter().map(|p| ("queries.sources", p)).chain(q.targets.iter().map(|p| ("queries.targets", p)));
        let points = points.chain(q.xbar.iter().map(|p| ("queries.xbar", p)));
        for (name, p) in points {
            if let Some(d) = &domain {
                if !d.contains(*p) {
                    return Err(CliError::Semantic(format!("{name}: point {p:?} is not inside the domain")));
                }
            } else if let Some(prof) = &self.profile {
                if !(p[0] > prof.start && p[0] < prof.pieces.last().map_or(prof.start, |x| x.end)) {
                    return Err(CliError::Semantic(format!("{name}: point {p:?} is not inside the profile interval")));
                }
            }
        }
        for (k, r) in q.regions.iter().enumerate() {
            if !(r.lo[0] < r.hi[0] && r.lo[1] < r.hi[1]) {
                return Err(CliError::Semantic(format!("queries.regions[{k}]: lo must be below hi")));
            }
        }
        if let Some(db) = &self.dense_balls {
            if db.count == 0 || !(db.resolution > 0.0) {
                return Err(CliError::Semantic("dense_balls: count and resolution must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        self.domain.as_ref().ok_or_else(|| CliError::Semantic("scenario has no [domain]".into()))?.build()
    }

    pub fn field(&self) -> Result<StructuredBVField, CliError> {
        let f = self.field.as_ref().ok_or_else(|| CliError::Semantic("scenario has no [field]".into()))?;
        f.build(&self.domain()?)
    }

    /// The barycenter, or zero when the scenario has none.
    pub fn barycenter(&self) -> Result<StructuredBVField, CliError> {
        let d = self.domain()?;
        match &self.barycenter {
            Some(b) => b.build(&d),
            None => Ok(StructuredBVField::constant(d, 0.0)?),
        }
    }

    pub fn profile(&self) -> Result<BVProfile, CliError> {
        self.profile.as_ref().ok_or_else(|| CliError::Semantic("scenario has no [profile]".into()))?.build()
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain, CliError> {
        let d = match self {
            DomainSpec::Rect { min, max } => Domain::rect(*min, *max),
            DomainSpec::Polygon { vertices } => Domain::polygon(vertices.clone()),
        };
        d.map_err(|e| CliError::from(e).context("domain"))
    }

    pub fn of(d: &Domain) -> Self {
        match d {
            Domain::Rect { min, max } => DomainSpec::Rect { min: *min, max: *max },
            Domain::Polygon(vs) => DomainSpec::Polygon { vertices: vs.clone() },
        }
    }
}

impl SmoothSpec {
    fn build(&self, domain: &Domain) -> Result<SmoothGrid, CliError> {
        let (lo, hi) = domain.bbox();
        let g = match self {
            SmoothSpec::Constant(c) => SmoothGrid::constant(lo, hi, *c),
            SmoothSpec::Polynomial { coefficients, samples } => {
                for (i, row) in coefficients.iter().enumerate() {
                    if i + row.len() > 4 {
                        return Err(CliError::Semantic(format!("smooth.polynomial: degree above 3 in row {i}")));
                    }
                }
                let eval = |p: Point| {
                    let mut s = 0.0;
                    for (i, row) in coefficients.iter().enumerate() {
                        for (j, c) in row.iter().enumerate() {
                            s += c * p[0].powi(i as i32) * p[1].powi(j as i32);
                        }
                    }
                    s
                };
                SmoothGrid::from_fn(lo, hi, samples.unwrap_or([17, 17]), eval)
            }
            SmoothSpec::Grid { lo, hi, shape, values } => {
                if shape[0] < 2 || shape[1] < 2 {
                    return Err(CliError::Semantic("smooth.grid: shape must be at least [2, 2]".into()));
                }
                let spacing = [(hi[0] - lo[0]) / (shape[0] - 1) as f64, (hi[1] - lo[1]) / (shape[1] - 1) as f64];
                SmoothGrid::new(*lo, spacing, *shape, values.clone())
            }
        };
        g.map_err(|e| CliError::from(e).context("smooth"))
    }
}

impl FieldSpec {
    pub fn build(&self, domain: &Domain) -> Result<StructuredBVField, CliError> {
        let smooth = self.smooth.build(domain)?;
        let mut walls = Vec::with_capacity(self.walls.len());
        for (k, w) in self.walls.iter().enumerate() {
            let heights = match (&w.height, &w.heights) {
                (Some(h), None) => vec![*h; w.vertices.len().saturating_sub(1)],
                (None, Some(hs)) => hs.clone(),
                _ => return Err(CliError::Semantic(format!("walls[{k}]: give exactly one of `height` or `heights`"))),
            };
            walls.push(JumpWall::with_heights(w.vertices.clone(), heights));
        }
        let channels = self.channels.iter().map(|c| CantorChannel { direction: c.direction, band: c.band, weight: c.weight }).collect();
        Ok(StructuredBVField::new(domain.clone(), smooth, walls, channels)?)
    }

    /// Lossless description of a field built from specs or by the library.
    pub fn of(f: &StructuredBVField) -> Self {
        let g = &f.smooth;
        let (lo, hi) = g.extent();
        let smooth = if g.is_constant() {
            SmoothSpec::Constant(g.values[0])
        } else {
            SmoothSpec::Grid { lo, hi, shape: g.shape, values: g.values.clone() }
        };
        let walls = f
            .walls
            .iter()
            .map(|w| match w.constant_height() {
                Some(h) => WallSpec { vertices: w.vertices.clone(), height: Some(h), heights: None },
                None => WallSpec { vertices: w.vertices.clone(), height: None, heights: Some(w.heights.clone()) },
            })
            .collect();
        let channels = f.channels.iter().map(|c| ChannelSpec { direction: c.direction, band: c.band, weight: c.weight }).collect();
        FieldSpec { smooth, walls, channels }
    }
}

impl ProfileSpec {
    pub fn build(&self) -> Result<BVProfile, CliError> {
        if self.pieces.is_empty() {
            return Err(CliError::Semantic("profile.pieces: at least one piece is required".into()));
        }
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let (mut start, mut value) = (self.start, self.value);
        for (k, p) in self.pieces.iter().enumerate() {
            if !(p.end > start) {
                return Err(CliError::Semantic(format!("profile.pieces[{k}]: end {} must exceed {start}", p.end)));
            }
            pieces.push(AcPiece { start, end: p.end, value, slope: p.slope, curvature: p.curvature });
            let d = p.end - start;
            value += p.slope * d + p.curvature * d * d;
            start = p.end;
        }
        let jumps = self.jumps.iter().map(|j| JumpAtom { t: j.t, h: j.h }).collect();
        let cantor = self.cantor.iter().map(|c| CantorAtom { s0: c.s0, s1: c.s1, w: c.w, l0: c.l0, l1: c.l1 }).collect();
        Ok(BVProfile::from_parts(pieces, jumps, cantor, vec![])?)
    }
}
