mod common;

use common::{rel_diff, sigma_series, GOLDEN};
use kamtori::bnf::{birkhoff_normal_form, degeneracy_rank, Method, RANK_REL_THRESHOLD};
use kamtori::{Series, Space, Var};
use proptest::prelude::*;

const OMEGA: [f64; 2] = [1.0, GOLDEN];

/// `⟨ω, zw⟩` plus a small σ-symmetric perturbation of degree 3 to 6.
fn hamiltonian(seed: u64) -> Series {
    let sp = Space::new(2, 6);
    let mut h = sigma_series(seed, sp, 6, 25).filter(|m, _| m.zw_degree(2) >= 3 && m.c_degree(2) == 0).scale_re(0.1);
    for (i, w) in OMEGA.iter().enumerate() {
        h = &h + &(&Series::var(sp, Var::Z(i)) * &Series::var(sp, Var::W(i))).scale_re(*w);
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn normalizer_conjugates_below_residual_order(seed in any::<u64>()) {
        let h = hamiltonian(seed);
        let r = birkhoff_normal_form(&h, &OMEGA, 6, Method::Lie, None).unwrap();
        prop_assert!(r.residual_order >= 7);
        let pulled = r.normalizer.pullback(&h).unwrap();
        let low = (&pulled - &r.n_diag).filter(|m, _| m.zw_degree(2) < r.residual_order);
        prop_assert!(low.max_abs() <= 1e-12 * h.max_abs().max(1.0));
        prop_assert!(r.normalizer.symplectic_defect() <= 1e-12);
        prop_assert!(r.normalizer.sigma_defect() <= 1e-12);
    }

    #[test]
    fn normal_form_is_unique_and_real(seed in any::<u64>(), shuffle in any::<u64>()) {
        let h = hamiltonian(seed);
        let lie = birkhoff_normal_form(&h, &OMEGA, 6, Method::Lie, None).unwrap();
        let gen = birkhoff_normal_form(&h, &OMEGA, 6, Method::Generating, None).unwrap();
        let mixed = birkhoff_normal_form(&h, &OMEGA, 6, Method::Lie, Some(shuffle)).unwrap();
        prop_assert!(rel_diff(&gen.n_actions, &lie.n_actions) <= 1e-10);
        prop_assert!(rel_diff(&mixed.n_actions, &lie.n_actions) <= 1e-10);
        prop_assert!(lie.n_actions.max_imag() <= 1e-12);
    }

    #[test]
    fn degeneracy_rank_is_rotation_invariant(kind in 0usize..3, angle in 0.0f64..std::f64::consts::TAU, a in 0.2f64..2.0, b in 0.2f64..2.0) {
        let sp = Space::new(2, 8);
        let r = [Series::var(sp, Var::C(0)), Series::var(sp, Var::C(1))];
        let lin = |x: f64, y: f64, r: &[Series]| &r[0].scale_re(x) + &r[1].scale_re(y);
        let u = lin(0.6, 0.8, &r);
        let v = lin(-0.8, 0.6, &r);
        let mut n = lin(OMEGA[0], OMEGA[1], &r);
        if kind >= 1 {
            n = &n + &(&(&u * &u).scale_re(a) + &(&(&u * &u) * &u).scale_re(b));
        }
        if kind == 2 {
            n = &n + &(&v * &v).scale_re(b);
        }
        let expected = 2 - kind;
        prop_assert_eq!(degeneracy_rank(&n, RANK_REL_THRESHOLD).j, expected);

        let (s, c) = angle.sin_cos();
        let mut subs: Vec<Series> = [Var::Z(0), Var::Z(1), Var::W(0), Var::W(1)].iter().map(|v| Series::var(sp, *v)).collect();
        subs.push(lin(c, -s, &r));
        subs.push(lin(s, c, &r));
        let rotated = n.substitute(&subs).unwrap();
        prop_assert!(rotated.max_imag() <= 1e-15);
        prop_assert_eq!(degeneracy_rank(&rotated, RANK_REL_THRESHOLD).j, expected);
    }
}
