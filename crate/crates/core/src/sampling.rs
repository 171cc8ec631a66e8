//! Seeded random scenarios on the unit square for property checks.
//!
//! Wall vertices sit on the 0.1 grid and heights and weights are dyadic, so
//! sums of edge weights are exact in double precision.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvfield::{CantorChannel, JumpWall, SmoothGrid, StructuredBVField};
use crate::geom::{Domain, Point};

pub fn unit_square() -> Domain {
    Domain::Rect { min: [0.0, 0.0], max: [1.0, 1.0] }
}

fn grid_point(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> Point {
    [rng.random_range(lo..=hi) as f64 / 10.0, rng.random_range(lo..=hi) as f64 / 10.0]
}

fn height(rng: &mut ChaCha8Rng) -> f64 {
    let k = rng.random_range(1..=16) as f64 / 8.0;
    if rng.random_bool(0.5) {
        k
    } else {
        -k
    }
}

/// An open polyline, an axis-aligned closed rectangle, or a wall joining two
/// sides of the square.
pub fn random_wall(rng: &mut ChaCha8Rng) -> JumpWall {
    let h = height(rng);
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(2..=4);
            let vs: Vec<Point> = (0..n).map(|_| grid_point(rng, 1, 9)).collect();
            JumpWall::new(vs, h)
        }
        1 => {
            let (x0, x1) = (rng.random_range(1..=4) as f64 / 10.0, rng.random_range(6..=9) as f64 / 10.0);
            let (y0, y1) = (rng.random_range(1..=4) as f64 / 10.0, rng.random_range(6..=9) as f64 / 10.0);
            let mut vs = vec![[x0, y0], [x0, y1], [x1, y1], [x1, y0], [x0, y0]];
            if rng.random_bool(0.5) {
                vs.reverse();
            }
            JumpWall::new(vs, h)
        }
        _ => {
            let a = rng.random_range(1..=9) as f64 / 10.0;
            let b = rng.random_range(1..=9) as f64 / 10.0;
            let mid = grid_point(rng, 2, 8);
            let vs = if rng.random_bool(0.5) { vec![[a, 0.0], mid, [b, 1.0]] } else { vec![[0.0, a], mid, [1.0, b]] };
            JumpWall::new(vs, h)
        }
    }
}

pub fn random_channel(rng: &mut ChaCha8Rng) -> CantorChannel {
    let direction = *[[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [-0.8, 0.6]].choose(rng).expect("nonempty");
    // band ends off the dyadic node columns
    let a = rng.random_range(-4..=4) as f64 / 8.0 + 0.0137;
    let len = rng.random_range(2..=8) as f64 / 8.0;
    let w = rng.random_range(1..=8) as f64 / 4.0;
    CantorChannel { direction, band: [a, a + len], weight: if rng.random_bool(0.5) { w } else { -w } }
}

pub fn random_smooth(rng: &mut ChaCha8Rng) -> SmoothGrid {
    let n = rng.random_range(2..=5);
    let values = (0..n * n).map(|_| rng.random_range(-8..=8) as f64 / 4.0).collect();
    let s = 1.0 / (n - 1) as f64;
    SmoothGrid::new([0.0, 0.0], [s, s], [n, n], values).expect("valid grid")
}

/// A random field with up to `max_walls` walls and up to `max_channels`
/// channels. Invalid draws are redrawn.
pub fn random_field(seed: u64, max_walls: usize, max_channels: usize) -> StructuredBVField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let smooth = random_smooth(&mut rng);
        let nw = rng.random_range(0..=max_walls);
        let walls: Vec<JumpWall> = (0..nw).map(|_| random_wall(&mut rng)).collect();
        let nc = rng.random_range(0..=max_channels);
        let channels: Vec<CantorChannel> = (0..nc).map(|_| random_channel(&mut rng)).collect();
        if let Ok(f) = StructuredBVField::new(unit_square(), smooth, walls, channels) {
            return f;
        }
    }
}

fn rect_loop(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point> {
    // clockwise, so a positive height raises the inside
    vec![[x0, y0], [x0, y1], [x1, y1], [x1, y0], [x0, y0]]
}

fn field(smooth: SmoothGrid, walls: Vec<JumpWall>, channels: Vec<CantorChannel>) -> StructuredBVField {
    StructuredBVField::new(unit_square(), smooth, walls, channels).expect("curated field is valid")
}

fn flat(c: f64) -> SmoothGrid {
    SmoothGrid::constant([0.0, 0.0], [1.0, 1.0], c).expect("valid grid")
}

fn tilted(f: impl Fn(Point) -> f64) -> SmoothGrid {
    SmoothGrid::from_fn([0.0, 0.0], [1.0, 1.0], [3, 3], f).expect("valid grid")
}

/// A curated pair `(name, v, b, expected verdict)` for the equality-case
/// checker.
pub struct EqualityCase {
    pub name: &'static str,
    pub v: StructuredBVField,
    pub b: StructuredBVField,
    pub expect_equal: bool,
}

/// Twenty pairs `(v, b)` covering each equality condition, passing and
/// failing.
pub fn equality_suite() -> Vec<EqualityCase> {
    let block = || rect_loop(0.25, 0.25, 0.75, 0.75);
    let inner = || rect_loop(0.375, 0.375, 0.625, 0.625);
    let cut = || vec![[0.5, 0.0], [0.5, 1.0]];
    let v_block = || field(flat(1.0), vec![JumpWall::new(block(), 1.0)], vec![]);
    let v_cut = |h: f64| field(flat(2.0), vec![JumpWall::new(cut(), h)], vec![]);
    let ch = |d: Point, w: f64| CantorChannel { direction: d, band: [0.0, 1.0], weight: w };
    let v_chan = || field(flat(2.0), vec![], vec![ch([1.0, 0.0], 1.0)]);
    let b_walls = |c: f64, walls: Vec<JumpWall>| field(flat(c), walls, vec![]);
    let b_chan = |d: Point, w: f64| field(flat(0.0), vec![], vec![ch(d, w)]);
    let smooth_v = || field(tilted(|p| 1.0 + 0.5 * p[0] + 0.25 * p[1]), vec![], vec![]);
    let case = |name, v, b, expect_equal| EqualityCase { name, v, b, expect_equal };
    vec![
        case("constant-zero-shift", field(flat(1.0), vec![], vec![]), b_walls(0.0, vec![]), true),
        case("constant-rigid-shift", field(flat(1.0), vec![], vec![]), b_walls(3.0, vec![]), true),
        case("block-zero-shift", v_block(), b_walls(0.0, vec![]), true),
        case("block-quarter", v_block(), b_walls(0.0, vec![JumpWall::new(block(), 0.25)]), true),
        case("block-half", v_block(), b_walls(0.0, vec![JumpWall::new(block(), 0.5)]), true),
        case("block-0.6", v_block(), b_walls(0.0, vec![JumpWall::new(block(), 0.6)]), false),
        case("block-full", v_block(), b_walls(0.0, vec![JumpWall::new(block(), 1.0)]), false),
        case("block-down-half", v_block(), b_walls(0.0, vec![JumpWall::new(block(), -0.5)]), true),
        case("block-off-wall", v_block(), b_walls(0.0, vec![JumpWall::new(inner(), 0.5)]), false),
        case("constant-tilted-b", field(flat(1.0), vec![], vec![]), field(tilted(|p| 0.3 * p[0]), vec![], vec![]), false),
        case("smooth-zero-shift", smooth_v(), b_walls(0.0, vec![]), true),
        case("smooth-tilted-b", smooth_v(), field(tilted(|p| 0.2 * p[1] - 0.1 * p[0]), vec![], vec![]), false),
        case("cut-half", v_cut(1.0), b_walls(0.0, vec![JumpWall::new(cut(), 0.5)]), true),
        case("cut-three-quarters", v_cut(1.0), b_walls(0.0, vec![JumpWall::new(cut(), 0.75)]), false),
        case("channel-half", v_chan(), b_chan([1.0, 0.0], 0.5), true),
        case("channel-quarter", v_chan(), b_chan([1.0, 0.0], -0.25), true),
        case("channel-three-quarters", v_chan(), b_chan([1.0, 0.0], 0.75), false),
        case("channel-crossed", v_chan(), b_chan([0.0, 1.0], 0.25), false),
        case("block-half-lifted", v_block(), b_walls(2.0, vec![JumpWall::new(block(), 0.5)]), true),
        case("cut-down-opposite", v_cut(-1.0), b_walls(0.0, vec![JumpWall::new(cut(), 0.5)]), true),
    ]
}

/// Ten pure-jump fields with zero absolutely continuous gradient whose
/// singular part is invisible or confined to under 1% of a 20x20 lattice.
pub fn zero_gradient_suite() -> Vec<(&'static str, StructuredBVField)> {
    let sq = |x0: f64, y0: f64, s: f64| rect_loop(x0, y0, x0 + s, y0 + s);
    let pair = |lp: Vec<Point>, h: f64| vec![JumpWall::new(lp.clone(), h), JumpWall::new(lp, -h)];
    let reversed_pair = |lp: Vec<Point>, h: f64| {
        let mut r = lp.clone();
        r.reverse();
        vec![JumpWall::new(lp, h), JumpWall::new(r, h)]
    };
    let anchored = || vec![[0.3, 0.0], [0.6, 0.4], [0.7, 1.0]];
    vec![
        ("flat-one", field(flat(1.0), vec![], vec![])),
        ("flat-two-and-half", field(flat(2.5), vec![], vec![])),
        ("cancelling-loop", field(flat(1.0), pair(sq(0.2, 0.2, 0.5), 0.75), vec![])),
        ("reversed-loop", field(flat(1.0), reversed_pair(sq(0.3, 0.1, 0.4), 1.25), vec![])),
        ("single-node-island", field(flat(1.0), vec![JumpWall::new(sq(0.5, 0.5, 0.05), 1.0)], vec![])),
        ("cancelling-anchored", field(flat(0.5), pair(anchored(), 2.0), vec![])),
        ("island-and-pair", {
            let mut w = pair(sq(0.1, 0.6, 0.3), 0.5);
            w.push(JumpWall::new(sq(0.85, 0.05, 0.05), -0.5));
            field(flat(1.0), w, vec![])
        }),
        ("two-islands", field(flat(0.75), vec![JumpWall::new(sq(0.1, 0.1, 0.05), 1.0), JumpWall::new(sq(0.8, 0.8, 0.05), 2.0)], vec![])),
        ("three-pairs", {
            let mut w = pair(sq(0.1, 0.1, 0.3), 1.0);
            w.extend(pair(sq(0.5, 0.5, 0.4), 0.25));
            w.extend(pair(anchored(), 0.5));
            field(flat(1.0), w, vec![])
        }),
        ("flat-eighth", field(flat(0.125), vec![], vec![])),
    ]
}
