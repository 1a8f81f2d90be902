mod common;

use common::{rel_diff, series, sigma_series};
use kamtori::symplectic::{from_generating, lie_time_one, to_generating, SymplecticMap};
use kamtori::{c64, Series, Space};
use proptest::prelude::*;

fn space() -> Space {
    Space::new(2, 6)
}

/// A small generating function vanishing to third order.
fn generator(seed: u64, min_degree: u32) -> Series {
    let sp = space();
    series(seed, sp, sp.n(), 30).filter(|m, _| m.zw_degree(2) >= 2 && sp.degree(m) >= min_degree).scale_re(0.2)
}

fn near_identity(seed: u64) -> SymplecticMap {
    from_generating(&generator(seed, 3)).unwrap()
}

/// Time-one map of `-0.2 i g` for a σ-symmetric cubic-and-up `g`.
fn sigma_map(seed: u64) -> SymplecticMap {
    let sp = space();
    let g = sigma_series(seed, sp, sp.n(), 30).filter(|m, _| sp.degree(m) >= 3);
    lie_time_one(&g.scale(c64(0.0, -0.2))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generating_function_round_trip(seed in any::<u64>()) {
        let f = generator(seed, 3);
        let map = from_generating(&f).unwrap();
        prop_assert!(map.symplectic_defect() <= 1e-12);
        let back = to_generating(&map).unwrap();
        let e = rel_diff(&back, &f);
        prop_assert!(e <= 1e-12, "{e}");
    }

    #[test]
    fn lie_maps_are_exact(seed in any::<u64>()) {
        let map = sigma_map(seed);
        prop_assert!(to_generating(&map).is_ok());
        prop_assert!(map.symplectic_defect() <= 1e-12);
    }

    #[test]
    fn group_laws(seed in any::<u64>()) {
        let (a, b, c) = (near_identity(seed), near_identity(seed ^ 1), sigma_map(seed ^ 2));
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
        prop_assert!(left.symplectic_defect() <= 1e-12);
        let id = SymplecticMap::identity(space());
        let inv = a.invert().unwrap();
        prop_assert!(a.compose(&inv).unwrap().max_abs_diff(&id) <= 1e-12);
        prop_assert!(inv.compose(&a).unwrap().max_abs_diff(&id) <= 1e-12);
    }

    #[test]
    fn sigma_is_preserved(seed in any::<u64>()) {
        let (a, b) = (sigma_map(seed), sigma_map(seed ^ 5));
        prop_assert!(a.sigma_defect() <= 1e-12);
        prop_assert!(a.compose(&b).unwrap().sigma_defect() <= 1e-12);
        prop_assert!(a.invert().unwrap().sigma_defect() <= 1e-12);
    }

    #[test]
    fn order_bookkeeping(seed in any::<u64>(), q in 1u32..=2) {
        let f = generator(seed, 2 * q + 1);
        prop_assume!(!f.is_zero());
        let map = from_generating(&f).unwrap();
        prop_assert!(map.min_order().is_none_or(|m| m >= 2 * q));
    }
}
