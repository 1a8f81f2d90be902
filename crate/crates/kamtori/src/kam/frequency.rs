//! The frequency map `Ω`, defined by `Ω(c) + Λ(c, Ω(c)) = 0`.
//!
//! With `Λ = Λ̃ − ∇N^q` this reads `Ω = ∇N^q − Λ̃(·; Ω)`, solved by fixed
//! point: `Λ̃` depends on `ω` only through divisors and only at higher
//! c-degree, so each sweep fixes at least one more order of the jet.

use rayon::prelude::*;

use super::{normal_form, KamConfig, NormalFormState, Prepared};
use crate::error::{KamError, Result};
use crate::series::{c64, Series, C64};
use crate::smalldiv::Frequency;

pub const FREQ_TOL: f64 = 1e-12;
pub const FREQ_MAX_ITERS: usize = 50;

#[derive(Clone, Debug)]
pub struct FrequencyJet {
    /// `Ω_i(c)` as c-series in the scheme's space.
    pub jet: Vec<Series>,
    pub iterations: usize,
    /// Largest coefficient of `Ω − (∇N^q − Λ̃(·; Ω))`.
    pub residual: f64,
    /// Scheme state computed at `ω = Ω(c)`.
    pub state: NormalFormState,
}

fn max_diff(a: &[Series], b: &[Series]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

/// Jet mode: `ω` is itself a c-series.
pub fn frequency_map(prep: &Prepared, cfg: &KamConfig) -> Result<FrequencyJet> {
    let mut w = prep.grad_nq.clone();
    let mut res = f64::INFINITY;
    for it in 1..=FREQ_MAX_ITERS {
        let state = normal_form(prep, Frequency::Jet(w.clone()), cfg)?;
        let next: Vec<Series> = prep.grad_nq.iter().zip(&state.lambda).map(|(g, l)| g - l).collect();
        res = max_diff(&next, &w);
        if res <= FREQ_TOL {
            return Ok(FrequencyJet {
                jet: w,
                iterations: it,
                residual: res,
                state,
            });
        }
        w = next;
    }
    Err(KamError::Contraction(format!(
        "frequency map did not converge in {FREQ_MAX_ITERS} sweeps, last residual {res:e}"
    )))
}

fn at_c(d: usize, c: &[C64]) -> Vec<C64> {
    let mut p = vec![c64(0.0, 0.0); 2 * d];
    p.extend_from_slice(c);
    p
}

impl FrequencyJet {
    pub fn d(&self) -> usize {
        self.jet.len()
    }

    pub fn eval(&self, c: &[C64]) -> Vec<C64> {
        let p = at_c(self.d(), c);
        self.jet.iter().map(|s| s.eval(&p)).collect()
    }

    pub fn eval_real(&self, c: &[f64]) -> Vec<f64> {
        let cc: Vec<C64> = c.iter().map(|x| c64(*x, 0.0)).collect();
        self.eval(&cc).iter().map(|z| z.re).collect()
    }

    /// Evaluations on a list of points, in input order.
    pub fn grid_values(&self, points: &[Vec<C64>]) -> Vec<Vec<C64>> {
        points.par_iter().map(|c| self.eval(c)).collect()
    }
}

/// Numeric mode at a fixed real `c★`: iterate `ω ← ∇N^q(c★) − Λ̃(c★; ω)`
/// with `ω` constant. Returns `Ω(c★)`, the state at that frequency and the
/// number of sweeps.
pub fn frequency_at(prep: &Prepared, cfg: &KamConfig, c: &[f64]) -> Result<(Vec<f64>, NormalFormState, usize)> {
    let d = prep.space.d();
    if c.len() != d {
        return Err(KamError::Precondition(format!("c has {} entries, expected {d}", c.len())));
    }
    let cc: Vec<C64> = c.iter().map(|x| c64(*x, 0.0)).collect();
    let p = at_c(d, &cc);
    let grad: Vec<f64> = prep.grad_nq.iter().map(|g| g.eval(&p).re).collect();
    let mut w = grad.clone();
    let mut res = f64::INFINITY;
    for it in 1..=FREQ_MAX_ITERS {
        let state = normal_form(prep, Frequency::Const(w.clone()), cfg)?;
        let next: Vec<f64> = (0..d).map(|i| grad[i] - state.lambda[i].eval(&p).re).collect();
        res = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if res <= FREQ_TOL {
            return Ok((w, state, it));
        }
        w = next;
    }
    Err(KamError::Contraction(format!(
        "numeric frequency iteration did not converge in {FREQ_MAX_ITERS} sweeps, last residual {res:e}"
    )))
}

/// Per-order relative deviation between two c-series vectors:
/// `max_j max_{|γ|=j} |a−b| / s_j` over c-degrees `0..=max_order`, where
/// `s_j` is the largest reference coefficient of order `j`, floored at
/// `1e-3` times the largest reference coefficient overall so that orders
/// holding only round-off do not count as relative failures.
pub fn jet_deviation(a: &[Series], b: &[Series], max_order: u32) -> f64 {
    let d = a[0].d();
    let global = b.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    let floor = 1e-3 * global;
    let mut worst: f64 = 0.0;
    for ord in 0..=max_order {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (x, y) in a.iter().zip(b) {
            let xs = x.filter(|m, _| m.c_degree(d) == ord);
            let ys = y.filter(|m, _| m.c_degree(d) == ord);
            diff = diff.max(xs.max_abs_diff(&ys));
            scale = scale.max(ys.max_abs());
        }
        let denom = scale.max(floor);
        worst = worst.max(if denom > 0.0 { diff / denom } else { diff });
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kam::prepare;
    use crate::series::{Space, Var};

    #[test]
    fn integrable_frequency_is_gradient() {
        let sp = Space::new(2, 8);
        let omega = vec![1.0, 1.618_033_988_749_895];
        let zw = |i| &Series::var(sp, Var::Z(i)) * &Series::var(sp, Var::W(i));
        let h = &(&(&zw(0) + &zw(1).scale_re(omega[1])) + &(&zw(0) * &zw(1)).scale_re(0.5))
            + &(&zw(0).pow(2) * &zw(1).pow(2));
        let prep = prepare(&h, &omega, 1).unwrap();
        let cfg = KamConfig { q: 1, ..Default::default() };
        let fj = frequency_map(&prep, &cfg).unwrap();
        let ks = prep.space;
        let c = |i| Series::var(ks, Var::C(i));
        let expect = [
            &(&Series::constant(ks, c64(1.0, 0.0)) + &c(1).scale_re(0.5)) + &(&c(0) * &c(1).pow(2)).scale_re(2.0),
            &(&Series::constant(ks, c64(omega[1], 0.0)) + &c(0).scale_re(0.5)) + &(&c(0).pow(2) * &c(1)).scale_re(2.0),
        ];
        assert!(jet_deviation(&fj.jet, &expect, 4) < 1e-12);
        assert!(fj.residual <= FREQ_TOL);

        let (w, _, _) = frequency_at(&prep, &cfg, &[0.01, 0.02]).unwrap();
        let direct = fj.eval_real(&[0.01, 0.02]);
        for i in 0..2 {
            assert!((w[i] - direct[i]).abs() < 1e-12);
        }
    }
}
