mod common;

use common::{rel_diff, series, sigma_series};
use kamtori::decomp::{action_vector, canonical_parts, cubic_form, decompose_action, decompose_zw, quadratic_form, Basis};
use kamtori::{c64, Series, Space};
use proptest::prelude::*;

fn nonresonant(f: &Series) -> Series {
    let d = f.d();
    f.filter(|m, _| m.is_nonresonant(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip(seed in any::<u64>(), d in 1usize..=3) {
        let f = series(seed, Space::new(d, 8), 8, 25);
        prop_assert!(decompose_zw(&f).recombine().max_abs_diff(&f) <= 1e-12);
        prop_assert!(decompose_action(&f).recombine().max_abs_diff(&f) <= 1e-12);
    }

    #[test]
    fn parts_have_no_kernel(seed in any::<u64>(), d in 1usize..=3, pick in any::<prop::sample::Index>()) {
        let sp = Space::new(d, 8);
        let zero = decompose_action(&Series::zero(sp));
        prop_assert!(zero.parts.values().all(|p| p.is_zero()));

        let f = series(seed, sp, 8, 25);
        let mut dec = decompose_action(&f);
        let keys: Vec<Vec<u32>> = dec.parts.keys().cloned().collect();
        prop_assume!(!keys.is_empty());
        let key = pick.get(&keys).clone();
        let part = dec.parts.get_mut(&key).unwrap();
        let (m, _) = part.terms().next().unwrap();
        *part = &*part + &Series::from_terms(sp, [(m, c64(1e-3, 0.0))]);
        let moved = dec.recombine().max_abs_diff(&f);
        prop_assert!(moved > 1e-4, "{moved}");
    }

    #[test]
    fn parts_of_sigma_series_are_sigma(seed in any::<u64>(), d in 1usize..=3) {
        let f = sigma_series(seed, Space::new(d, 8), 8, 25);
        for p in decompose_action(&f).parts.values() {
            prop_assert!(p.sigma_deviation() <= 1e-13);
        }
        for p in decompose_zw(&f).parts.values() {
            prop_assert!(p.sigma_deviation() <= 1e-13);
        }
    }

    #[test]
    fn canonical_parts_recover_low_coefficients(seed in any::<u64>(), d in 1usize..=3) {
        let sp = Space::new(d, 8);
        let delta = action_vector(sp, Basis::Shifted);
        let a0 = nonresonant(&series(seed, sp, 8, 15));
        let a1: Vec<Series> = (0..d).map(|i| nonresonant(&series(seed ^ (i as u64 + 1), sp, 6, 10))).collect();
        let mut f = a0.clone();
        for i in 0..d {
            f = &f + &(&a1[i] * &delta[i]);
            for j in 0..d {
                let b = series(seed ^ (50 + (i * d + j) as u64), sp, 4, 5);
                f = &f + &(&(&delta[i] * &delta[j]) * &b);
            }
        }
        let p = canonical_parts(&f);
        prop_assert!(p.f0.max_abs_diff(&a0) <= 1e-13);
        for i in 0..d {
            prop_assert!(p.f1[i].max_abs_diff(&a1[i]) <= 1e-13);
        }
    }

    #[test]
    fn symmetric_and_full_quadratic_parts_agree(seed in any::<u64>(), d in 1usize..=3) {
        let sp = Space::new(d, 8);
        let f = series(seed, sp, 8, 25);
        let p = canonical_parts(&f);
        let delta = action_vector(sp, Basis::Shifted);
        let full = quadratic_form(&p.f2_full, &delta);
        let split = &quadratic_form(&p.f2, &delta) + &cubic_form(&p.f3_full, &delta);
        prop_assert!(rel_diff(&full, &split) <= 1e-12);
    }
}
