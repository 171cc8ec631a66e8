use minsing::bv1d::{cantor_eval, concat, endpoint_bound_check, BVProfile, ProfileBuilder, VariationPart};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Spec {
    start: f64,
    value: f64,
    pieces: Vec<(f64, f64, f64)>,
    jumps: Vec<(f64, f64)>,
    cantor: Option<(f64, f64)>,
}

fn dyadic(lo: i32, hi: i32, den: f64) -> impl Strategy<Value = f64> {
    (lo..=hi).prop_map(move |k| k as f64 / den)
}

fn spec() -> impl Strategy<Value = Spec> {
    (
        dyadic(-8, 8, 4.0),
        dyadic(-8, 8, 4.0),
        prop::collection::vec((dyadic(1, 8, 8.0), dyadic(-16, 16, 8.0), dyadic(-4, 4, 4.0)), 1..5),
        prop::collection::vec((0.0f64..1.0, dyadic(-8, 8, 4.0)), 0..4),
        prop::option::of((0.0f64..1.0, dyadic(-8, 8, 8.0))),
    )
        .prop_map(|(start, value, pieces, jumps, cantor)| Spec { start, value, pieces, jumps, cantor })
}

fn build(s: &Spec) -> BVProfile {
    let mut b = ProfileBuilder::new(s.start, s.value);
    let mut end = s.start;
    for &(len, slope, curv) in &s.pieces {
        end += len;
        b = b.piece(end, slope, curv);
    }
    let len = end - s.start;
    for &(f, h) in &s.jumps {
        let t = s.start + len * (0.05 + 0.9 * f);
        if h != 0.0 {
            b = b.jump(t, h);
        }
    }
    if let Some((f, w)) = s.cantor {
        let s0 = s.start + len * 0.5 * f;
        if w != 0.0 {
            b = b.cantor(s0, end, w, 0.0, 1.0);
        }
    }
    b.build().expect("valid profile")
}

fn decomposition(p: &BVProfile) -> [f64; 3] {
    [p.variation(VariationPart::Ac), p.variation(VariationPart::Jump), p.variation(VariationPart::Cantor)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn total_is_sum_of_parts(s in spec()) {
        let p = build(&s);
        let [ac, j, c] = decomposition(&p);
        prop_assert_eq!(p.variation(VariationPart::Total), ac + j + c);
        prop_assert_eq!(p.variation(VariationPart::Singular), j + c);
    }

    #[test]
    fn endpoint_values_bounded_by_variation(s in spec()) {
        prop_assert!(endpoint_bound_check(&build(&s)));
    }

    #[test]
    fn concat_is_associative(
        a in spec(), b in spec(), c in spec(),
        j12 in dyadic(-4, 4, 4.0), j23 in dyadic(-4, 4, 4.0),
    ) {
        let p1 = build(&a);
        let mut sb = b.clone();
        sb.start = p1.end();
        let p2 = build(&sb);
        let mut sc = c.clone();
        sc.start = p2.end();
        let p3 = build(&sc);
        let left = concat(&concat(&p1, &p2, j12).unwrap(), &p3, j23).unwrap();
        let right = concat(&p1, &concat(&p2, &p3, j23).unwrap(), j12).unwrap();
        prop_assert_eq!(decomposition(&left), decomposition(&right));
    }

    #[test]
    fn concat_mismatch_is_rejected(a in spec(), b in spec()) {
        let p1 = build(&a);
        let p2 = build(&b);
        prop_assume!(p1.end() != p2.start());
        prop_assert!(concat(&p1, &p2, 0.0).is_err());
    }

    #[test]
    fn restriction_splits_singular_variation(s in spec(), f in 0.05f64..0.95) {
        let p = build(&s);
        let c = p.start() + (p.end() - p.start()) * f;
        prop_assume!(p.jumps.iter().all(|j| j.t != c));
        let l = p.restrict_to(p.start(), c).unwrap();
        let r = p.restrict_to(c, p.end()).unwrap();
        let whole = p.variation(VariationPart::Singular);
        let parts = l.variation(VariationPart::Singular) + r.variation(VariationPart::Singular);
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
    }
}

#[test]
fn cantor_monotone_and_symmetric_on_grid() {
    let n = 10_000;
    let depth = 40;
    let mut prev = cantor_eval(0.0, depth).unwrap();
    for k in 1..=n {
        // multiples of 2^-40, so 1 - x is exact
        let x = (k as f64 / n as f64 * 2f64.powi(40)).round() / 2f64.powi(40);
        let y = cantor_eval(x, depth).unwrap();
        assert!(y >= prev, "C decreases at {x}: {prev} > {y}");
        prev = y;
        let z = cantor_eval(1.0 - x, depth).unwrap();
        assert!((y + z - 1.0).abs() <= 2f64.powi(-(depth as i32) + 1), "C({x}) + C(1 - {x}) = {}", y + z);
    }
}
