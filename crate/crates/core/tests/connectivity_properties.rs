use minsing::connectivity::{essentially_disconnects, positivity_set_1d, Barrier, CellGrid, CellSet, PositivityVerdict};
use minsing::ProfileBuilder;
use proptest::prelude::*;

fn grid() -> CellGrid {
    CellGrid { origin: [0.0, 0.0], resolution: 0.125, nx: 8, ny: 8 }
}

fn barrier(bits: &[bool]) -> Barrier {
    let g = grid();
    let mut b = Barrier::empty(g);
    let mut k = 0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i + 1 < g.nx && bits[k % bits.len()] {
                b.set_vertical(i, j);
            }
            if j + 1 < g.ny && bits[(k + 1) % bits.len()] {
                b.set_horizontal(i, j);
            }
            k += 2;
        }
    }
    b
}

fn cells(bits: &[bool]) -> CellSet {
    CellSet::from_fn(grid(), |i, j| bits[j * 8 + i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn larger_barriers_still_disconnect(
        k in prop::collection::vec(prop::bool::weighted(0.2), 128),
        extra in prop::collection::vec(prop::bool::weighted(0.2), 128),
        g in prop::collection::vec(prop::bool::weighted(0.85), 64),
    ) {
        let g = cells(&g);
        prop_assume!(!g.is_empty());
        let small = barrier(&k);
        let big = small.union(&barrier(&extra)).unwrap();
        if essentially_disconnects(&small, &g).unwrap().disconnects {
            prop_assert!(essentially_disconnects(&big, &g).unwrap().disconnects);
        }
    }

    #[test]
    fn empty_barrier_disconnects_only_disconnected_sets(g in prop::collection::vec(prop::bool::weighted(0.6), 64)) {
        let g = cells(&g);
        prop_assume!(!g.is_empty());
        let r = essentially_disconnects(&Barrier::empty(grid()), &g).unwrap();
        prop_assert_eq!(r.disconnects, g.components(None).len() > 1);
    }

    #[test]
    fn positivity_set_is_one_interval_when_accepted(
        a in 0.05f64..0.45, b in 0.5f64..0.7, h in 0.25f64..2.0, second in prop::option::of((0.75f64..0.85, 0.88f64..0.97)),
    ) {
        let mut pb = ProfileBuilder::new(0.0, 0.0).constant(1.0).jump(a, h).jump(b, -h);
        if let Some((c, d)) = second {
            pb = pb.jump(c, h).jump(d, -h);
        }
        let p = pb.build().unwrap();
        let r = positivity_set_1d(&p, 400).unwrap();
        match r.verdict {
            PositivityVerdict::SingleInterval { a, b } => {
                prop_assert!(second.is_none());
                for k in 0..1000 {
                    let t = (k as f64 + 0.5) / 1000.0;
                    let inside = t > a && t < b;
                    prop_assert_eq!(p.lower_limit(t) > 1e-12, inside, "t = {}", t);
                }
            }
            PositivityVerdict::HypothesisViolated { .. } => prop_assert!(second.is_some()),
            PositivityVerdict::Empty => prop_assert!(false, "nonzero profile reported empty"),
        }
    }
}

#[test]
fn two_bumps_are_rejected() {
    let p = ProfileBuilder::new(0.0, 0.0).constant(0.1).jump(0.1, 1.0).constant(0.3).jump(0.3, -1.0).constant(0.6).jump(0.6, 1.0).constant(0.8).jump(0.8, -1.0).constant(1.0).build().unwrap();
    assert!(matches!(positivity_set_1d(&p, 200).unwrap().verdict, PositivityVerdict::HypothesisViolated { .. }));
}
