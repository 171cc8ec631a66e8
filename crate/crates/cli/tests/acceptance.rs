//! Acceptance suite. Run with `cargo test -p minsing-cli --test acceptance -- --nocapture`
//! to see one line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Proc;
use std::time::{Duration, Instant};

use minsing::bv1d::{cantor_eval, DEFAULT_DEPTH};
use minsing::connectivity::{
    dense_ball_complement, essentially_disconnects, positivity_cells, summability_sum, zero_barrier, CellGrid, ZERO_LEVEL,
};
use minsing::sampling::{equality_suite, random_field, random_smooth, zero_gradient_suite};
use minsing::steiner::{check_equality_case, check_precondition, rigidity_test, EqualityOptions};
use minsing::svd::{
    build_graph, build_graph_1d, minimal_singularity, svd, svd_map, zero_classes, Connectivity, SvdGraph, DEFAULT_COVERAGE_TOL,
};
use minsing::{Error, JumpWall, SmoothGrid, StructuredBVField};
use minsing_cli::{load_scenario, Command, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> Scenario {
    load_scenario(&fixture_dir().join(format!("{name}.toml"))).expect("fixture loads")
}

fn conn(sc: &Scenario) -> Connectivity {
    Connectivity::from_k(sc.settings.connectivity).unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit), format!("took {:.1} s, limit {limit} s", elapsed.as_secs_f64()))
}

fn pseudometric() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = f64::INFINITY;
    for seed in 0..50 {
        let f = random_field(seed, 3, 1);
        let g = build_graph(&f, 0.05, Connectivity::K8).map_err(|e| e.to_string())?;
        ensure(g.len() <= 400, format!("seed {seed}: {} nodes", g.len()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..10 {
            let [x, y, z] = [0; 3].map(|_| rng.random_range(0..g.len()));
            let dx = svd_map(&g, x).unwrap().dist;
            let dy = svd_map(&g, y).unwrap().dist;
            ensure(dx[x] == 0.0 && dy[y] == 0.0, format!("seed {seed}: identity fails"))?;
            ensure(dx[y] == dy[x], format!("seed {seed}: d({x},{y}) = {} but d({y},{x}) = {}", dx[y], dy[x]))?;
            if dx[z].is_finite() {
                let slack = dx[y] + dy[z] - dx[z];
                worst = worst.min(slack);
                ensure(slack >= -1e-12, format!("seed {seed}: triangle slack {slack}"))?;
            }
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!("500 triples, min triangle slack {worst:e}, {:.2} s", start.elapsed().as_secs_f64()))
}

fn brute_force(g: &SvdGraph, source: usize) -> Vec<f64> {
    fn go(g: &SvdGraph, v: usize, acc: f64, seen: &mut [bool], best: &mut [f64]) {
        best[v] = best[v].min(acc);
        for &(w, wt) in g.neighbours(v) {
            if !seen[w] {
                seen[w] = true;
                go(g, w, acc + wt, seen, best);
                seen[w] = false;
            }
        }
    }
    let mut best = vec![f64::INFINITY; g.len()];
    let mut seen = vec![false; g.len()];
    seen[source] = true;
    go(g, source, 0.0, &mut seen, &mut best);
    best
}

fn oracle() -> Verdict {
    let start = Instant::now();
    let mut pairs = 0;
    for seed in 0..10 {
        let f = random_field(200 + seed, 3, 1);
        let g = build_graph(&f, 0.2, Connectivity::K4).map_err(|e| e.to_string())?;
        ensure(g.len() <= 25, format!("seed {seed}: {} nodes", g.len()))?;
        for s in 0..g.len() {
            let fast = svd_map(&g, s).unwrap().dist;
            let slow = brute_force(&g, s);
            ensure(fast == slow, format!("seed {seed}, source {s}: {fast:?} vs {slow:?}"))?;
            pairs += g.len();
        }
    }
    within(start.elapsed(), 60)?;
    Ok(format!("{pairs} source/target pairs equal, {:.2} s", start.elapsed().as_secs_f64()))
}

fn figures() -> Verdict {
    let sc = fixture("slit_wall");
    let g = build_graph(&sc.field().unwrap(), sc.settings.resolution, conn(&sc)).unwrap();
    let m = minimal_singularity(&g, sc.settings.tol);
    ensure(m.minimally_singular, "slit wall: not minimally singular")?;
    ensure(m.largest_class_size == m.num_nodes, format!("slit wall: class covers {}/{}", m.largest_class_size, m.num_nodes))?;

    let sc = fixture("enclosed_block");
    let g = build_graph(&sc.field().unwrap(), sc.settings.resolution, conn(&sc)).unwrap();
    let m = minimal_singularity(&g, sc.settings.tol);
    ensure(!m.minimally_singular, "enclosed block: minimally singular")?;
    ensure(m.num_classes == 2, format!("enclosed block: {} classes", m.num_classes))?;

    let sc = fixture("split_support");
    let v = sc.field().unwrap();
    let grid = CellGrid::for_domain(&sc.domain().unwrap(), sc.settings.resolution).unwrap();
    let r = essentially_disconnects(&zero_barrier(&v, grid), &positivity_cells(&v, grid, ZERO_LEVEL)).unwrap();
    ensure(r.disconnects, "split support: not disconnected")?;
    let pre = check_precondition(&v, sc.settings.resolution, conn(&sc)).unwrap();
    ensure(!pre.satisfied, "split support: precondition satisfied")?;
    let flagged = matches!(rigidity_test(&v, sc.settings.resolution, conn(&sc), sc.settings.tol), Err(Error::Precondition(_)));
    ensure(flagged, "split support: rigidity test did not flag the precondition")?;
    Ok("slit wall TRUE at 100%, enclosed block FALSE with 2 classes, split support disconnected and flagged".into())
}

fn one_dimensional() -> Verdict {
    let sc = fixture("smooth_1d");
    let g = build_graph_1d(&sc.profile().unwrap(), sc.settings.resolution).unwrap();
    ensure(minimal_singularity(&g, sc.settings.tol).minimally_singular, "smooth profile: not minimally singular")?;

    let sc = fixture("jump_1d");
    let p = sc.profile().unwrap();
    let g = build_graph_1d(&p, sc.settings.resolution).unwrap();
    ensure(!minimal_singularity(&g, sc.settings.tol).minimally_singular, "jump profile: minimally singular")?;
    let d = minsing::Domain::rect([p.start(), -1.0], [p.end(), 1.0]).unwrap();
    let (a, b) = (g.nearest_node(sc.queries.sources[0]).unwrap(), g.nearest_node(sc.queries.targets[0]).unwrap());
    let dist = svd(&g, &d, a, b).unwrap().distance;
    let h = sc.profile.as_ref().unwrap().jumps[0].h.abs();
    ensure(dist == h, format!("jump profile: svd {dist}, |h| = {h}"))?;
    Ok(format!("smooth TRUE, jump FALSE with svd {dist} = |h|"))
}

fn cantor_channel() -> Verdict {
    let sc = fixture("cantor_channel");
    let f = sc.field().unwrap();
    let g = build_graph(&f, sc.settings.resolution, conn(&sc)).unwrap();
    ensure(!minimal_singularity(&g, sc.settings.tol).minimally_singular, "minimally singular")?;
    let d = sc.domain().unwrap();
    let mut worst: f64 = 0.0;
    for s in &sc.queries.sources {
        for t in &sc.queries.targets {
            let (a, b) = (g.nearest_node(*s).unwrap(), g.nearest_node(*t).unwrap());
            let dist = svd(&g, &d, a, b).unwrap().distance;
            let p = cantor_eval(g.nodes[a][0], DEFAULT_DEPTH).unwrap();
            let q = cantor_eval(g.nodes[b][0], DEFAULT_DEPTH).unwrap();
            let err = (dist - (q - p).abs()).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, format!("svd {dist} vs |C(q) - C(p)| = {}", (q - p).abs()))?;
        }
    }
    Ok(format!("max error {worst:e}, minimally singular FALSE"))
}

fn saturation() -> Verdict {
    let start = Instant::now();
    let sc = fixture("enclosed_block");
    let v = sc.field().unwrap();
    let wall = v.walls[0].clone();
    let len = wall.length();
    let (lo, hi) = v.domain.bbox();
    let opts = EqualityOptions { resolution: 0.05, connectivity: Connectivity::K8, check_precondition: true };
    let mut lines = Vec::new();
    for t in [0.0, 0.25, 0.5, 0.6, 1.0] {
        let walls = if t == 0.0 { vec![] } else { vec![JumpWall::new(wall.vertices.clone(), t)] };
        let b = StructuredBVField::new(v.domain.clone(), SmoothGrid::constant(lo, hi, 0.0).unwrap(), walls, vec![]).unwrap();
        let r = check_equality_case(&v, &b, &opts).unwrap();
        let (pe, pf) = (r.perimeter.total, r.symmetral_perimeter.total);
        let excess = pe - pf;
        if t <= 0.5 {
            ensure(excess.abs() <= 1e-9 * pf, format!("t = {t}: excess {excess}"))?;
        } else {
            let expect = 2.0 * len * (t - 0.5);
            ensure(excess > 0.0 && (excess - expect).abs() <= 1e-6 * expect, format!("t = {t}: excess {excess}, expected {expect}"))?;
        }
        lines.push(format!("{t}:{excess:.3e}"));
    }
    within(start.elapsed(), 10)?;
    Ok(format!("excess by shift {}, {:.2} s", lines.join(" "), start.elapsed().as_secs_f64()))
}

fn equality_agreement() -> Verdict {
    let opts = EqualityOptions { resolution: 0.05, connectivity: Connectivity::K8, check_precondition: true };
    let suite = equality_suite();
    let mut agree = 0;
    for c in &suite {
        let r = check_equality_case(&c.v, &c.b, &opts).map_err(|e| format!("{}: {e}", c.name))?;
        let equal = (r.perimeter.total - r.symmetral_perimeter.total).abs() <= 1e-9 * r.symmetral_perimeter.total;
        if r.verdict == equal && r.verdict == c.expect_equal {
            agree += 1;
        }
    }
    ensure(agree == suite.len() && agree == 20, format!("{agree}/{} agree", suite.len()))?;
    Ok(format!("{agree}/20 agree"))
}

fn independence_and_homogeneity() -> Verdict {
    let mut edges = 0;
    for seed in 0..20 {
        let f = random_field(seed, 3, 1);
        let g = build_graph(&f, 0.05, Connectivity::K8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other = build_graph(&f.with_smooth(random_smooth(&mut rng)).unwrap(), 0.05, Connectivity::K8).unwrap();
        let scaled = build_graph(&f.scale_singular(2.5).unwrap(), 0.05, Connectivity::K8).unwrap();
        ensure(g.nodes == other.nodes && g.nodes == scaled.nodes, format!("seed {seed}: node sets differ"))?;
        let src = [0, g.len() / 2, g.len() - 1];
        for &s in &src {
            let (a, b, c) = (svd_map(&g, s).unwrap().dist, svd_map(&other, s).unwrap().dist, svd_map(&scaled, s).unwrap().dist);
            ensure(a == b, format!("seed {seed}: smooth part changed a distance"))?;
            for (x, y) in a.iter().zip(&c) {
                ensure(2.5 * x == *y, format!("seed {seed}: {y} is not 2.5 x {x}"))?;
            }
        }
        edges += g.edges.len();
    }
    Ok(format!("20 fields, {edges} edges, distances unchanged and scaled by exactly 2.5"))
}

fn constant_on_class() -> Verdict {
    let mut worst: f64 = 0.0;
    for (name, v) in zero_gradient_suite() {
        ensure(v.has_zero_ac_gradient(), format!("{name}: nonzero gradient"))?;
        let g = build_graph(&v, 0.05, Connectivity::K8).unwrap();
        ensure(minimal_singularity(&g, DEFAULT_COVERAGE_TOL).minimally_singular, format!("{name}: not minimally singular"))?;
        let class = zero_classes(&g).into_iter().max_by_key(|c| c.len()).unwrap();
        let vals: Vec<f64> = class.iter().map(|&k| v.eval_lower(g.nodes[k]).unwrap()).collect();
        let spread = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(spread);
        ensure(spread <= 1e-12, format!("{name}: spread {spread}"))?;
    }
    Ok(format!("10 fields, max spread {worst:e}"))
}

fn dense_balls() -> Verdict {
    let start = Instant::now();
    let sc = fixture("dense_balls");
    let spec = sc.dense_balls.unwrap();
    let r = dense_ball_complement(1000, sc.settings.seed, 0.1, spec.resolution).unwrap();
    let sum = summability_sum(&r.radii);
    ensure(r.radii.len() == 1000, "wrong count")?;
    ensure(sum <= 1.0 + 1e-12 && r.summability_ok, format!("sum of 2 pi r = {sum}"))?;
    ensure(r.area_sum <= 0.1 && r.area_ok, format!("area {}", r.area_sum))?;
    within(start.elapsed(), 10)?;
    Ok(format!("sum 2 pi r = {sum:.12}, area {:.4}, {:.2} s", r.area_sum, start.elapsed().as_secs_f64()))
}

fn run_cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Proc::new(env!("CARGO_BIN_EXE_minsing")).args(args).output().expect("binary runs");
    (out.status.code(), out.stdout)
}

fn determinism() -> Verdict {
    let mut fixtures: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    fixtures.sort();
    let mut runs = 0;
    for path in &fixtures {
        let path = path.to_str().unwrap();
        for cmd in Command::all() {
            for fmt in cmd.formats() {
                let args = [cmd.name(), path, "--format", fmt.extension()];
                let first = run_cli(&args);
                let second = run_cli(&args);
                ensure(first == second, format!("{} {path} --format {} differs", cmd.name(), fmt.extension()))?;
                runs += 1;
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let path = fixture_dir().join("enclosed_block.toml");
    let path = path.to_str().unwrap();
    run_cli(&["svd-map", path, "--format", "pgm", "--out", out]);
    let a = std::fs::read(dir.path().join("enclosed_block.svd-map.pgm")).unwrap();
    run_cli(&["svd-map", path, "--format", "pgm", "--out", out]);
    let b = std::fs::read(dir.path().join("enclosed_block.svd-map.pgm")).unwrap();
    ensure(a == b, "report files differ")?;
    Ok(format!("{runs} invocations over {} fixtures repeated byte for byte", fixtures.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("pseudometric", pseudometric),
        ("oracle equivalence", oracle),
        ("figure scenarios", figures),
        ("one-dimensional characterization", one_dimensional),
        ("cantor channel", cantor_channel),
        ("inequality saturation", saturation),
        ("equality checker agreement", equality_agreement),
        ("smooth independence and homogeneity", independence_and_homogeneity),
        ("constant on the zero class", constant_on_class),
        ("dense balls", dense_balls),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
