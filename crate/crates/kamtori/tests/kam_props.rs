mod common;

use common::sigma_series;
use kamtori::kam::{inductive_step, kam_space, prepare, KamConfig, NormalFormState, LEDGER_TOL, SIGMA_TOL};
use kamtori::smalldiv::{dot_k, Diophantine, Frequency};
use kamtori::{Series, Space, Var};
use proptest::prelude::*;

/// Close to the resonance `ω₁ = ω₂`, so the cut-off has something to remove.
const OMEGA: [f64; 2] = [1.0, 1.05];
const KAPPA: f64 = 0.9;

fn hamiltonian(seed: u64) -> Series {
    let sp = Space::new(2, 8);
    let mut h = sigma_series(seed, sp, 8, 30).filter(|m, _| m.zw_degree(2) >= 3 && m.c_degree(2) == 0).scale_re(0.02);
    // z0^2 w0 w1 lives in the near-resonant mode k = (1, -1).
    let v = |x| Series::var(sp, x);
    let t = &(&(&v(Var::Z(0)) * &v(Var::Z(0))) * &v(Var::W(0))) * &v(Var::W(1));
    h = &h + &(&t + &t.sigma_conjugate()).scale_re(0.01);
    for (i, w) in OMEGA.iter().enumerate() {
        h = &h + &(&Series::var(sp, Var::Z(i)) * &Series::var(sp, Var::W(i))).scale_re(*w);
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn a_step_keeps_ledger_symmetry_and_flat_support(seed in any::<u64>()) {
        let prep = prepare(&hamiltonian(seed), &OMEGA, 1).unwrap();
        prop_assert_eq!(prep.space, kam_space(2, 8));
        let dioph = Diophantine::new(KAPPA, 1.0).unwrap();
        let cfg = KamConfig { q: 1, steps: 1, dioph: Some(dioph), ..Default::default() };
        let start = NormalFormState::new(&prep.htilde, Frequency::Const(OMEGA.to_vec()), Some(dioph)).unwrap();
        let state = inductive_step(&start, &cfg).unwrap();
        let dg = &state.diagnostics[0];
        prop_assert!(dg.ledger.is_some_and(|l| l <= LEDGER_TOL));
        prop_assert!(dg.sigma <= SIGMA_TOL);
        // g only carries modes where the cut-off weight is nonzero.
        prop_assert!(!state.g.is_zero());
        for (m, _) in state.g.terms() {
            let k = m.k(2);
            prop_assert!(k.iter().any(|x| *x != 0));
            prop_assert!(dot_k(&k, &OMEGA).abs() <= 0.5 * KAPPA);
        }
    }
}
