//! Tori `Φ({zw = c★})` with `Φ = Z_BNF ∘ Z_KAM(·, c★)`, their invariance
//! defect, and a reference integrator for the real flow.
//!
//! Real coordinates are `z = (x + iy)/√2`, `w = (x − iy)/√2`, in which
//! `ẋ = ∂_y H, ẏ = −∂_x H` becomes `ż = −i∂_w H, ẇ = i∂_z H`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{NormalFormState, Prepared};
use crate::error::{KamError, Result};
use crate::series::{c64, Series, Var, C64};
use crate::symplectic::SymplecticMap;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX: usize = 50;

/// A map with its Jacobian series, evaluated at fixed `c`.
#[derive(Clone, Debug)]
struct JetMap {
    map: SymplecticMap,
    jac: Vec<Vec<Series>>,
    c: Vec<C64>,
}

impl JetMap {
    fn new(map: SymplecticMap, c: Vec<C64>) -> JetMap {
        let jac = map.jacobian_series();
        JetMap { map, jac, c }
    }

    fn point(&self, u: &[C64]) -> Vec<C64> {
        u.iter().chain(&self.c).copied().collect()
    }

    fn eval(&self, u: &[C64]) -> Vec<C64> {
        let d = self.map.d();
        let (z, w) = self.map.eval(&u[..d], &u[d..], &self.c);
        z.into_iter().chain(w).collect()
    }

    fn jacobian(&self, u: &[C64]) -> DMatrix<C64> {
        let p = self.point(u);
        let n = self.jac.len();
        DMatrix::from_fn(n, n, |i, j| self.jac[i][j].eval(&p))
    }
}

/// `Φ = Z_BNF ∘ Z_KAM(·, c★)` acting on `(z, w)`.
#[derive(Clone, Debug)]
pub struct TorusMap {
    bnf: JetMap,
    kam: JetMap,
    pub c_star: Vec<C64>,
}

impl TorusMap {
    pub fn new(prep: &Prepared, state: &NormalFormState, c_star: &[C64]) -> Result<TorusMap> {
        let d = prep.space.d();
        if c_star.len() != d {
            return Err(KamError::Precondition(format!("c* has {} entries, expected {d}", c_star.len())));
        }
        let zero = vec![c64(0.0, 0.0); d];
        Ok(TorusMap {
            bnf: JetMap::new(prep.bnf.normalizer.clone(), zero),
            kam: JetMap::new(state.map.clone(), c_star.to_vec()),
            c_star: c_star.to_vec(),
        })
    }

    pub fn eval(&self, u: &[C64]) -> Vec<C64> {
        self.bnf.eval(&self.kam.eval(u))
    }

    pub fn jacobian(&self, u: &[C64]) -> DMatrix<C64> {
        let y = self.kam.eval(u);
        self.bnf.jacobian(&y) * self.kam.jacobian(u)
    }

    /// Newton solve of `Φ(u) = x` from `guess`.
    pub fn invert(&self, x: &[C64], guess: &[C64]) -> Result<Vec<C64>> {
        let mut u = guess.to_vec();
        for _ in 0..NEWTON_MAX {
            let r: Vec<C64> = self.eval(&u).iter().zip(x).map(|(a, b)| a - b).collect();
            let size = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
            if size <= NEWTON_TOL * scale {
                return Ok(u);
            }
            let step = self
                .jacobian(&u)
                .lu()
                .solve(&DVector::from_vec(r))
                .ok_or_else(|| KamError::Precondition("singular Jacobian while inverting the torus map".into()))?;
            for (ui, si) in u.iter_mut().zip(step.iter()) {
                *ui -= si;
            }
        }
        Err(KamError::Contraction("Newton inversion of the torus map did not converge".into()))
    }
}

/// Vector field `(ż, ẇ) = (−i∂_w H, i∂_z H)` of a plain (z,w) series.
#[derive(Clone, Debug)]
pub struct HamiltonField {
    d: usize,
    h: Series,
    dz: Vec<Series>,
    dw: Vec<Series>,
}

impl HamiltonField {
    pub fn new(h: &Series) -> HamiltonField {
        let d = h.d();
        HamiltonField {
            d,
            h: h.clone(),
            dz: (0..d).map(|i| h.partial(Var::Z(i))).collect(),
            dw: (0..d).map(|i| h.partial(Var::W(i))).collect(),
        }
    }

    fn point(&self, x: &[C64]) -> Vec<C64> {
        let mut p = x.to_vec();
        p.resize(3 * self.d, c64(0.0, 0.0));
        p
    }

    pub fn energy(&self, x: &[C64]) -> C64 {
        self.h.eval(&self.point(x))
    }

    pub fn field(&self, x: &[C64]) -> Vec<C64> {
        let p = self.point(x);
        let i = c64(0.0, 1.0);
        let zdot = self.dw.iter().map(|s| -i * s.eval(&p));
        let wdot = self.dz.iter().map(|s| i * s.eval(&p));
        zdot.chain(wdot).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TorusCandidate {
    pub c_star: Vec<C64>,
    pub omega_star: Vec<C64>,
    pub theta_grid: usize,
    /// Image points `Φ(u(θ))` in grid order (first angle fastest).
    pub points: Vec<Vec<C64>>,
    /// `max_θ max_j |d/dt (z_j w_j)|` along the `H`-flow, in normal-form
    /// coordinates.
    pub residual: f64,
    pub map: TorusMap,
}

/// Principal square roots of `c★`; a negative real entry sits on the cut.
fn sqrt_actions(c: &[C64]) -> Result<Vec<C64>> {
    c.iter()
        .map(|x| {
            if x.im == 0.0 && x.re < 0.0 {
                Err(KamError::Precondition(format!(
                    "c* entry {x} lies on the square-root branch cut (negative real axis)"
                )))
            } else {
                Ok(x.sqrt())
            }
        })
        .collect()
}

/// `u(θ) = (√c e^{2πiθ}, √c e^{−2πiθ})`.
pub fn torus_point(root: &[C64], theta: &[f64]) -> Vec<C64> {
    let z = root.iter().zip(theta).map(|(r, t)| r * C64::from_polar(1.0, 2.0 * PI * t));
    let w = root.iter().zip(theta).map(|(r, t)| r * C64::from_polar(1.0, -2.0 * PI * t));
    z.chain(w).collect()
}

fn grid_angles(d: usize, n: usize, idx: usize) -> Vec<f64> {
    let mut rest = idx;
    (0..d)
        .map(|_| {
            let i = rest % n;
            rest /= n;
            i as f64 / n as f64
        })
        .collect()
}

/// Rates `d/dt(z_j w_j)` at `u` for the flow of `h` pulled back by `Φ`.
pub fn action_rates(map: &TorusMap, field: &HamiltonField, u: &[C64]) -> Result<Vec<C64>> {
    let d = u.len() / 2;
    let x = map.eval(u);
    let xh = DVector::from_vec(field.field(&x));
    let v = map
        .jacobian(u)
        .lu()
        .solve(&xh)
        .ok_or_else(|| KamError::Precondition("singular torus-map Jacobian".into()))?;
    Ok((0..d).map(|j| u[d + j] * v[j] + u[j] * v[d + j]).collect())
}

pub fn build_torus(prep: &Prepared, state: &NormalFormState, omega_star: &[C64], c_star: &[C64], theta_grid: usize) -> Result<TorusCandidate> {
    let d = prep.space.d();
    if theta_grid == 0 {
        return Err(KamError::Precondition("theta grid must be positive".into()));
    }
    let root = sqrt_actions(c_star)?;
    let map = TorusMap::new(prep, state, c_star)?;
    let field = HamiltonField::new(&prep.h);
    let total = theta_grid.pow(d as u32);
    let per_point: Vec<Result<(Vec<C64>, f64)>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let u = torus_point(&root, &grid_angles(d, theta_grid, idx));
            let rates = action_rates(&map, &field, &u)?;
            let r = rates.iter().map(|v| v.norm()).fold(0.0, f64::max);
            Ok((map.eval(&u), r))
        })
        .collect();
    let mut points = Vec::with_capacity(total);
    let mut residual: f64 = 0.0;
    for item in per_point {
        let (p, r) = item?;
        points.push(p);
        residual = residual.max(r);
    }
    Ok(TorusCandidate {
        c_star: c_star.to_vec(),
        omega_star: omega_star.to_vec(),
        theta_grid,
        points,
        residual,
        map,
    })
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub t_end: f64,
    /// Local error tolerance, per unit of time stepped.
    pub tol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub sample_dt: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t_end: 100.0,
            tol: 1e-10,
            h0: 1e-2,
            h_min: 1e-12,
            sample_dt: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowSample {
    pub t: f64,
    pub energy_drift: f64,
    pub actions: Vec<f64>,
    pub torus_distance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FlowReport {
    pub samples: Vec<FlowSample>,
    pub steps: usize,
    pub rejected: usize,
    pub max_energy_drift: f64,
    pub max_action_drift: f64,
    pub max_torus_distance: Option<f64>,
}

fn to_complex(s: &[f64]) -> Vec<C64> {
    let d = s.len() / 2;
    let z = (0..d).map(|j| c64(s[j], s[d + j]) / SQRT_2);
    let w = (0..d).map(|j| c64(s[j], -s[d + j]) / SQRT_2);
    z.chain(w).collect()
}

fn real_field(field: &HamiltonField, s: &[f64]) -> Vec<f64> {
    let d = s.len() / 2;
    let v = field.field(&to_complex(s));
    let xdot = (0..d).map(|j| SQRT_2 * v[j].re);
    let ydot = (0..d).map(|j| SQRT_2 * v[j].im);
    xdot.chain(ydot).collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| yi + a * xi).collect()
}

fn rk4(field: &HamiltonField, s: &[f64], h: f64) -> Vec<f64> {
    let k1 = real_field(field, s);
    let k2 = real_field(field, &axpy(h / 2.0, &k1, s));
    let k3 = real_field(field, &axpy(h / 2.0, &k2, s));
    let k4 = real_field(field, &axpy(h, &k3, s));
    (0..s.len())
        .map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Classical RK4 with step doubling and local extrapolation. `z0` gives
/// the start point on the real set (`w = z̄`). With a torus map, each
/// sample also records `max_j |u_z u_w − c★_j|` after inverting `Φ`.
pub fn integrate_flow(h: &Series, z0: &[C64], cfg: &FlowConfig, torus: Option<&TorusMap>) -> Result<FlowReport> {
    let d = h.d();
    if z0.len() != d {
        return Err(KamError::Precondition(format!("start point needs {d} entries")));
    }
    let field = HamiltonField::new(h);
    let mut s: Vec<f64> = z0.iter().map(|z| SQRT_2 * z.re).chain(z0.iter().map(|z| SQRT_2 * z.im)).collect();
    let e0 = field.energy(&to_complex(&s)).re;
    let a0: Vec<f64> = z0.iter().map(|z| z.norm_sqr()).collect();
    // Newton starts from the identity guess.
    let mut guess = torus.map(|_| to_complex(&s));
    let mut samples = Vec::new();
    let mut t = 0.0;
    let mut h_step = cfg.h0;
    let mut steps = 0;
    let mut rejected = 0;
    let mut next_sample = 0.0;
    let record = |t: f64, s: &[f64], guess: &mut Option<Vec<C64>>| -> Result<FlowSample> {
        let x = to_complex(s);
        let energy_drift = (field.energy(&x).re - e0).abs();
        let actions: Vec<f64> = (0..d).map(|j| (x[j] * x[d + j]).re).collect();
        let torus_distance = match (torus, guess.as_mut()) {
            (Some(m), Some(g)) => {
                let u = m.invert(&x, g)?;
                let dist = (0..d).map(|j| (u[j] * u[d + j] - m.c_star[j]).norm()).fold(0.0, f64::max);
                *g = u;
                Some(dist)
            }
            _ => None,
        };
        Ok(FlowSample {
            t,
            energy_drift,
            actions,
            torus_distance,
        })
    };
    samples.push(record(0.0, &s, &mut guess)?);
    next_sample += cfg.sample_dt;
    while t < cfg.t_end {
        let target = next_sample.min(cfg.t_end);
        let h_try = h_step.min(target - t);
        let full = rk4(&field, &s, h_try);
        let half = rk4(&field, &rk4(&field, &s, h_try / 2.0), h_try / 2.0);
        // Error per unit step: the estimate is compared with `tol·h`.
        let err = full.iter().zip(&half).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 15.0 / h_try;
        if err <= cfg.tol {
            s = half.iter().zip(&full).map(|(b, a)| b + (b - a) / 15.0).collect();
            t += h_try;
            steps += 1;
            if (t - target).abs() <= 1e-12 * target.max(1.0) {
                t = target;
                samples.push(record(t, &s, &mut guess)?);
                next_sample += cfg.sample_dt;
            }
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (cfg.tol / err).powf(0.25)).clamp(0.2, 5.0) };
        // Only grow from steps that were not shortened to hit a sample.
        if err > cfg.tol || h_try >= h_step {
            h_step *= factor;
        }
        if h_step < cfg.h_min {
            return Err(KamError::Precondition(format!("step size underflow at t={t}: h={h_step:e}")));
        }
    }
    let max_energy_drift = samples.iter().map(|x| x.energy_drift).fold(0.0, f64::max);
    let max_action_drift = samples
        .iter()
        .flat_map(|x| x.actions.iter().zip(&a0).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let max_torus_distance = torus.map(|_| samples.iter().filter_map(|x| x.torus_distance).fold(0.0, f64::max));
    Ok(FlowReport {
        samples,
        steps,
        rejected,
        max_energy_drift,
        max_action_drift,
        max_torus_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Space;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PHI: f64 = 1.618_033_988_749_895;

    fn zw(sp: Space, i: usize) -> Series {
        &Series::var(sp, Var::Z(i)) * &Series::var(sp, Var::W(i))
    }

    #[test]
    fn integrable_actions_conserved() {
        let sp = Space::new(2, 6);
        let h = &(&zw(sp, 0) + &zw(sp, 1).scale_re(PHI)) + &(&zw(sp, 0) * &zw(sp, 1)).scale_re(0.5);
        let z0 = [c64(0.2, 0.1), c64(-0.15, 0.05)];
        let rep = integrate_flow(&h, &z0, &FlowConfig::default(), None).unwrap();
        assert!(rep.max_action_drift < 1e-9, "{}", rep.max_action_drift);
    }

    #[test]
    fn energy_conserved_on_random_data() {
        let sp = Space::new(2, 4);
        let z = |i| Series::var(sp, Var::Z(i));
        let w = |i| Series::var(sp, Var::W(i));
        let mixed = &(&(&z(0) * &z(1)) * &w(1)) + &(&(&w(0) * &z(1)) * &w(1));
        let cubic = &(&z(0).pow(3) + &w(0).pow(3)) + &mixed;
        let h = &(&zw(sp, 0) + &zw(sp, 1).scale_re(PHI)) + &cubic.scale_re(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let z0: Vec<C64> = (0..2)
                .map(|_| C64::from_polar(0.1 * rng.random_range(0.0..1.0f64).sqrt() / SQRT_2, rng.random_range(0.0..2.0 * PI)))
                .collect();
            let rep = integrate_flow(&h, &z0, &FlowConfig::default(), None).unwrap();
            assert!(rep.max_energy_drift < 1e-8, "{}", rep.max_energy_drift);
        }
    }

    #[test]
    fn branch_cut_rejected() {
        assert!(sqrt_actions(&[c64(-0.1, 0.0)]).is_err());
        assert!(sqrt_actions(&[c64(0.0, 0.02)]).is_ok());
    }
}
