mod common;

use common::{rel_diff, series, sigma_series};
use kamtori::smalldiv::project_diagonal;
use kamtori::{c64, Mono, Series, Space, C64};
use proptest::prelude::*;

fn space(d: usize) -> Space {
    Space::new(d, 8)
}

/// Random series without a constant term, for substitution.
fn sub_series(seed: u64, sp: Space, deg: u32) -> Series {
    series(seed, sp, deg, 6).filter(|m, _| m != Mono::ONE).scale_re(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_laws(seed in any::<u64>(), d in 1usize..=3) {
        let sp = space(d);
        let a = series(seed, sp, 8, 20);
        let b = series(seed ^ 1, sp, 8, 20);
        let c = series(seed ^ 2, sp, 8, 20);
        let left = &(&a + &b) * &c;
        let right = &(&a * &c) + &(&b * &c);
        prop_assert!(rel_diff(&left, &right) <= 1e-13);
        let assoc = rel_diff(&(&(&a * &b) * &c), &(&a * &(&b * &c)));
        prop_assert!(assoc <= 1e-12, "{assoc}");
    }

    #[test]
    fn sigma_closure(seed in any::<u64>(), d in 1usize..=3, r in -3.0f64..3.0) {
        let sp = space(d);
        let a = sigma_series(seed, sp, 8, 20);
        let b = sigma_series(seed ^ 7, sp, 8, 20);
        prop_assert!((&a + &b).sigma_deviation() <= 1e-13);
        prop_assert!((&a * &b).sigma_deviation() <= 1e-13);
        prop_assert!(project_diagonal(&a).sigma_deviation() <= 1e-13);
        prop_assert!(a.scale_re(r).sigma_deviation() <= 1e-13);
    }

    #[test]
    fn sigma_conjugate_is_an_involution(seed in any::<u64>(), d in 1usize..=3) {
        let f = series(seed, space(d), 8, 25);
        prop_assert_eq!(f.sigma_conjugate().sigma_conjugate(), f);
    }

    #[test]
    fn substitution_composes(seed in any::<u64>(), d in 1usize..=2) {
        let sp = Space::new(d, 6);
        let f = series(seed, sp, 6, 12);
        let g: Vec<Series> = (0..sp.nvars()).map(|i| sub_series(seed ^ (10 + i as u64), sp, 6)).collect();
        let h: Vec<Series> = (0..sp.nvars()).map(|i| sub_series(seed ^ (100 + i as u64), sp, 6)).collect();
        let two_step = f.substitute(&g).unwrap().substitute(&h).unwrap();
        let gh: Vec<Series> = g.iter().map(|gi| gi.substitute(&h).unwrap()).collect();
        let one_step = f.substitute(&gh).unwrap();
        let e = rel_diff(&two_step, &one_step);
        prop_assert!(e <= 1e-12, "{e}");
    }

    #[test]
    fn evaluation_is_consistent(seed in any::<u64>(), d in 1usize..=2, pts in proptest::collection::vec((-0.14f64..0.14, -0.14f64..0.14), 6)) {
        let sp = Space::new(d, 6);
        let p: Vec<C64> = pts.iter().take(sp.nvars()).map(|(a, b)| c64(*a, *b)).collect();
        // Degrees 3 and 2 keep the composite inside the truncation.
        let f = series(seed, sp, 3, 15);
        let mut direct = c64(0.0, 0.0);
        for (m, c) in f.terms() {
            let mut t = c;
            for (i, x) in p.iter().enumerate() {
                t *= x.powu(m.exp(i));
            }
            direct += t;
        }
        let scale = f.terms().map(|(_, c)| c.norm()).sum::<f64>().max(1e-300);
        prop_assert!((f.eval(&p) - direct).norm() <= 1e-10 * scale);

        let g: Vec<Series> = (0..sp.nvars()).map(|i| sub_series(seed ^ (30 + i as u64), sp, 2)).collect();
        let inner: Vec<C64> = g.iter().map(|gi| gi.eval(&p)).collect();
        let composite = f.substitute(&g).unwrap().eval(&p);
        let expect = f.eval(&inner);
        prop_assert!((composite - expect).norm() <= 1e-10 * expect.norm().max(1e-3));
    }
}
