//! The counterterm scheme at truncated order.
//!
//! All series live in a space where `c_j` has weight 2, so `Δ_j = z_j w_j − c_j`
//! is homogeneous. A [`NormalFormState`] carries the conjugacy
//!
//! `(H̃ + ⟨ω, zw⟩ + ⟨Λ̃, Δ⟩)∘Z = Γ + ⟨ω, Δ⟩ + h + g`
//!
//! and each [`inductive_step`] removes the `Δ`-free and `Δ`-linear parts of
//! `h` up to terms quadratic in them. `ω` is either a constant vector or a
//! vector of c-series (jet mode, see [`Frequency`]).

pub mod density;
pub mod frequency;
pub mod measure;
pub mod torus;

use crate::bnf::{birkhoff_normal_form, gradient_actions, BnfResult, Method};
use crate::decomp::{action_vector, decompose_action, Basis};
use crate::error::{KamError, Result};
use crate::series::{c64, Mono, Series, Space, Var};
use crate::smalldiv::{apply_d, apply_d_i, cutoff_freq, project_diagonal, solve_l, Diophantine, Frequency};
use crate::symplectic::{lie_series, lie_time_one, SymplecticMap};

pub use density::{density_experiment, DensityConfig, DensityReport};
pub use frequency::{frequency_at, frequency_map, FrequencyJet};
pub use measure::{measure_mc, MeasureConfig, MeasureReport};
pub use torus::{build_torus, integrate_flow, FlowConfig, FlowReport, TorusCandidate, TorusMap};

/// Weight of `c_j` in the scheme's grading.
pub const C_WEIGHT: u32 = 2;
/// Tolerance of the conjugacy ledger.
pub const LEDGER_TOL: f64 = 1e-10;
/// Relative level below which a stalled counterterm iteration counts as
/// converged to round-off.
const STALL_TOL: f64 = 1e-9;
/// Tolerance of the σ-symmetry checks on the state.
pub const SIGMA_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
pub struct KamConfig {
    pub q: u32,
    pub steps: usize,
    /// Cut-off parameters; `None` runs without `𝒫` (so `g = 0`).
    pub dioph: Option<Diophantine>,
    pub delta0: f64,
    /// Constant `C` of the monitor `m_new ≤ max(C·m_old², floor)`.
    pub contraction: f64,
    pub floor: f64,
    pub lambda_iters: usize,
    pub lambda_tol: f64,
    /// Re-expand the ledger after each step.
    pub verify: bool,
}

impl Default for KamConfig {
    fn default() -> Self {
        KamConfig {
            q: 3,
            steps: 5,
            dioph: None,
            delta0: 0.4,
            contraction: 1e4,
            floor: 1e-14,
            lambda_iters: 50,
            lambda_tol: 1e-12,
            verify: true,
        }
    }
}

impl KamConfig {
    /// Radius after `k` steps: `δ₀ − Σ_{j<k} δ₀/2^{j+2}`.
    pub fn delta(&self, k: usize) -> f64 {
        let lost: f64 = (0..k).map(|j| self.delta0 / 2f64.powi(j as i32 + 2)).sum();
        self.delta0 - lost
    }
}

/// Input to the scheme: `H` normalized to order `2q+1` and split as
/// `H∘Z_BNF = H̃ + N^q(c) + ⟨∇N^q(c), Δ⟩`.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub space: Space,
    pub omega0: Vec<f64>,
    pub q: u32,
    /// The original Hamiltonian (plain grading).
    pub h: Series,
    pub bnf: BnfResult,
    pub nq: Series,
    pub grad_nq: Vec<Series>,
    pub htilde: Series,
}

pub fn kam_space(d: usize, n: u32) -> Space {
    Space::weighted(d, n, C_WEIGHT)
}

pub fn prepare(h: &Series, omega0: &[f64], q: u32) -> Result<Prepared> {
    let n = h.space().n();
    if 2 * q + 1 > n {
        return Err(KamError::Precondition(format!("q={q} needs N >= {}, have {n}", 2 * q + 1)));
    }
    if h.space().c_weight() != 1 || h.terms().any(|(m, _)| m.c_degree(h.d()) > 0) {
        return Err(KamError::Precondition("Hamiltonian must be a pure (z,w) series".into()));
    }
    let bnf = birkhoff_normal_form(h, omega0, 2 * q + 1, Method::Lie, None)?;
    let space = kam_space(h.d(), n);
    let h1 = bnf.transformed.to_space(space);
    let nq = bnf.n_actions.to_space(space);
    let grad_nq = gradient_actions(&nq);
    let delta = action_vector(space, Basis::Shifted);
    let mut htilde = &h1 - &nq;
    for (g, dl) in grad_nq.iter().zip(&delta) {
        htilde = &htilde - &(g * dl);
    }
    Ok(Prepared {
        space,
        omega0: omega0.to_vec(),
        q,
        h: h.clone(),
        bnf,
        nq,
        grad_nq,
        htilde: htilde.chop(1e-300),
    })
}

/// Parts of `f = f0 + ⟨f1, Δ⟩ + ⟨Δ, f2 Δ⟩ + O(Δ³)` with `f2` symmetric.
pub(crate) struct LowParts {
    pub f0: Series,
    pub f1: Vec<Series>,
    pub f2: Vec<Vec<Series>>,
}

pub(crate) fn low_parts(f: &Series) -> LowParts {
    let dec = decompose_action(f);
    let d = f.d();
    let unit = |idx: &[usize]| {
        let mut v = vec![0u32; d];
        for &i in idx {
            v[i] += 1;
        }
        v
    };
    let f0 = dec.part(&vec![0; d]);
    let f1 = (0..d).map(|i| dec.part(&unit(&[i]))).collect();
    let f2 = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let p = dec.part(&unit(&[i, j]));
                    if i == j {
                        p
                    } else {
                        p.scale_re(0.5)
                    }
                })
                .collect()
        })
        .collect();
    LowParts { f0, f1, f2 }
}

/// `z^a w^a c^b ↦ c^{a+b}`: restriction of a diagonal series to `zw = c`.
pub fn restrict_to_torus(f: &Series) -> Series {
    let d = f.d();
    let zeros = vec![0u32; d];
    Series::from_terms(
        f.space(),
        f.terms().filter(|(m, _)| m.is_diagonal(d)).map(|(m, c)| {
            let g: Vec<u32> = m.alpha(d).iter().zip(m.gamma(d)).map(|(a, b)| a + b).collect();
            (Mono::new(&zeros, &zeros, &g), c)
        }),
    )
}

/// `⟨ω, zw⟩` for either frequency mode.
pub fn omega_zw(space: Space, freq: &Frequency) -> Series {
    let mut out = Series::zero(space);
    for i in 0..space.d() {
        let zw = &Series::var(space, Var::Z(i)) * &Series::var(space, Var::W(i));
        let wi = match freq {
            Frequency::Const(w) => Series::constant(space, c64(w[i], 0.0)),
            Frequency::Jet(ws) => ws[i].to_space(space),
        };
        out = &out + &(&zw * &wi);
    }
    out
}

fn omega_c(space: Space, freq: &Frequency) -> Series {
    let mut out = Series::zero(space);
    for i in 0..space.d() {
        let c = Series::var(space, Var::C(i));
        let wi = match freq {
            Frequency::Const(w) => Series::constant(space, c64(w[i], 0.0)),
            Frequency::Jet(ws) => ws[i].to_space(space),
        };
        out = &out + &(&c * &wi);
    }
    out
}

/// `X_j = f1_j − 2 Σ_i f2_ij 𝒟_i k0`.
fn linear_targets(parts: &LowParts, k0: &Series) -> Vec<Series> {
    let d = parts.f1.len();
    let dk0 = apply_d(k0);
    (0..d)
        .map(|j| {
            let mut x = parts.f1[j].clone();
            for i in 0..d {
                if !parts.f2[i][j].is_zero() {
                    x = &x - &(&parts.f2[i][j] * &dk0[i]).scale_re(2.0);
                }
            }
            x
        })
        .collect()
}

/// `μ(ℳ X_j)`: the obstruction removed by the counterterm, restricted to
/// `zw = c`. Only degrees up to `N − 2` are kept, since higher ones would
/// multiply `Δ_j` beyond the truncation.
pub fn m_vector(f: &Series, freq: &Frequency, dioph: Option<&Diophantine>) -> Result<Vec<Series>> {
    let sp = f.space();
    let top = sp.n().saturating_sub(C_WEIGHT);
    let parts = low_parts(f);
    let k0 = solve_l(&parts.f0, freq, dioph)?;
    Ok(linear_targets(&parts, &k0)
        .iter()
        .map(|x| restrict_to_torus(&project_diagonal(x)).filter(|m, _| sp.degree(m) <= top))
        .collect())
}

/// `[f]_δ`: largest majorant among `f0`, `f1_i`, `𝒟_jℒf0`, `𝒟_jℒf1_i`.
pub fn bracket_norm(f: &Series, freq: &Frequency, dioph: Option<&Diophantine>, delta: f64) -> Result<f64> {
    let parts = low_parts(f);
    let d = f.d();
    let mut m = parts.f0.majorant(delta);
    let mut lifted = vec![solve_l(&parts.f0, freq, dioph)?];
    for f1 in &parts.f1 {
        m = m.max(f1.majorant(delta));
        lifted.push(solve_l(f1, freq, dioph)?);
    }
    for l in &lifted {
        for j in 0..d {
            m = m.max(apply_d_i(l, j).majorant(delta));
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct StepDiag {
    pub step: usize,
    pub delta: f64,
    pub bracket_in: f64,
    pub bracket_out: f64,
    /// Majorant of `μ(M)` after the counterterm correction.
    pub m_residual: f64,
    pub lambda_iterations: usize,
    pub ledger: Option<f64>,
    pub sigma: f64,
}

#[derive(Clone, Debug)]
pub struct NormalFormState {
    pub space: Space,
    pub freq: Frequency,
    pub dioph: Option<Diophantine>,
    pub h_input: Series,
    /// Accumulated counterterm `Λ̃`.
    pub lambda: Vec<Series>,
    pub gamma: Series,
    pub h: Series,
    pub g: Series,
    pub map: SymplecticMap,
    pub step_count: usize,
    pub diagnostics: Vec<StepDiag>,
}

impl NormalFormState {
    pub fn new(h_input: &Series, freq: Frequency, dioph: Option<Diophantine>) -> Result<NormalFormState> {
        let space = h_input.space();
        if space.c_weight() != C_WEIGHT {
            return Err(KamError::Precondition("scheme needs the c-weight-2 space".into()));
        }
        if freq.d() != space.d() {
            return Err(KamError::SpaceMismatch("frequency dimension".into()));
        }
        let d = space.d();
        Ok(NormalFormState {
            space,
            gamma: omega_c(space, &freq),
            freq,
            dioph,
            h_input: h_input.clone(),
            lambda: vec![Series::zero(space); d],
            h: h_input.clone(),
            g: Series::zero(space),
            map: SymplecticMap::identity(space),
            step_count: 0,
            diagnostics: Vec::new(),
        })
    }

    /// Largest coefficient of `(H̃ + ⟨ω,zw⟩ + ⟨Λ̃,Δ⟩)∘Z − (Γ + ⟨ω,Δ⟩ + h + g)`.
    pub fn ledger_residual(&self) -> Result<f64> {
        let sp = self.space;
        let delta = action_vector(sp, Basis::Shifted);
        let wzw = omega_zw(sp, &self.freq);
        let mut lhs = &self.h_input + &wzw;
        for (l, dl) in self.lambda.iter().zip(&delta) {
            lhs = &lhs + &(l * dl);
        }
        let lhs = self.map.pullback(&lhs)?;
        let wc = omega_c(sp, &self.freq);
        let rhs = &(&(&(&self.gamma + &wzw) - &wc) + &self.h) + &self.g;
        Ok(lhs.max_abs_diff(&rhs))
    }

    /// Worst σ-defect among `Γ`, `Λ̃`, `g`, `h` and `Z`.
    pub fn sigma_defect(&self) -> f64 {
        let mut s = self.gamma.sigma_deviation().max(self.g.sigma_deviation()).max(self.h.sigma_deviation());
        for l in &self.lambda {
            s = s.max(l.sigma_deviation());
        }
        s.max(self.map.sigma_defect())
    }

    /// `Λ = Λ̃ − ∇N^q`.
    pub fn counterterm(&self, prep: &Prepared) -> Vec<Series> {
        self.lambda.iter().zip(&prep.grad_nq).map(|(l, g)| l - g).collect()
    }

    pub fn bracket(&self, delta: f64) -> Result<f64> {
        bracket_norm(&self.h, &self.freq, self.dioph.as_ref(), delta)
    }
}

/// Solve `μ(M_{h + ⟨Λ', U⟩}) = 0` for a c-only `Λ'`, with `U = Δ∘Z`.
/// The affine part in `Λ'` is the identity up to higher-order terms, so it
/// serves as its own preconditioner.
fn counterterm_correction(state: &NormalFormState, cfg: &KamConfig) -> Result<(Vec<Series>, Series, f64, usize)> {
    let sp = state.space;
    let d = sp.d();
    let dioph = state.dioph.as_ref();
    let u: Vec<Series> = action_vector(sp, Basis::Shifted)
        .iter()
        .map(|x| state.map.pullback(x))
        .collect::<Result<_>>()?;
    let mut lam = vec![Series::zero(sp); d];
    let mut ht = state.h.clone();
    let scale = state.h.max_abs().max(1.0);
    let mut last = f64::INFINITY;
    for it in 0..=cfg.lambda_iters {
        let m = m_vector(&ht, &state.freq, dioph)?;
        let res = m.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
        if res <= cfg.lambda_tol {
            return Ok((lam, ht, res, it));
        }
        if res > 0.5 * last || it == cfg.lambda_iters {
            // Stagnation at round-off level is accepted and reported.
            if res <= STALL_TOL * scale {
                return Ok((lam, ht, res, it));
            }
            return Err(KamError::Contraction(format!(
                "counterterm iteration stalled after {it} iterations, residual {res:e}"
            )));
        }
        last = res;
        for i in 0..d {
            lam[i] = &lam[i] - &m[i];
            ht = &ht - &(&m[i] * &u[i]);
        }
    }
    unreachable!()
}

/// One step of the scheme. Fails when the new `[h]`-majorant exceeds
/// `max(C·m_old², floor)`.
pub fn inductive_step(state: &NormalFormState, cfg: &KamConfig) -> Result<NormalFormState> {
    let sp = state.space;
    let d = sp.d();
    let k = state.step_count;
    let delta = cfg.delta(k);
    let delta_next = cfg.delta(k + 1);
    let dioph = state.dioph.as_ref();
    let bracket_in = state.bracket(delta)?;

    let (lam, ht, m_residual, lambda_iterations) = counterterm_correction(state, cfg)?;

    let parts = low_parts(&ht);
    let k0 = solve_l(&parts.f0, &state.freq, dioph)?;
    let xs = linear_targets(&parts, &k0);
    let deltas = action_vector(sp, Basis::Shifted);
    let mut gen = k0.clone();
    let mut gprime = Series::zero(sp);
    if let Some(p) = dioph {
        gprime = cutoff_freq(&parts.f0, &state.freq, p)?;
    }
    for (j, x) in xs.iter().enumerate() {
        let k1 = solve_l(x, &state.freq, dioph)?;
        gen = &gen + &(&k1 * &deltas[j]);
        if let Some(p) = dioph {
            gprime = &gprime + &(&cutoff_freq(x, &state.freq, p)? * &deltas[j]);
        }
    }
    let m0 = project_diagonal(&parts.f0);
    let wzw = omega_zw(sp, &state.freq);

    let mut h_new = &lie_series(&(&wzw + &ht), &gen) - &wzw;
    h_new = &(&h_new - &m0) - &gprime;
    if !state.g.is_zero() {
        h_new = &h_new + &(&lie_series(&state.g, &gen) - &state.g);
    }
    let phi = lie_time_one(&gen)?;
    let mut next = NormalFormState {
        space: sp,
        freq: state.freq.clone(),
        dioph: state.dioph,
        h_input: state.h_input.clone(),
        lambda: (0..d).map(|i| &state.lambda[i] + &lam[i]).collect(),
        gamma: &state.gamma + &m0,
        h: h_new,
        g: &state.g + &gprime,
        map: state.map.compose(&phi)?,
        step_count: k + 1,
        diagnostics: state.diagnostics.clone(),
    };
    let bracket_out = next.bracket(delta_next)?;
    let ledger = if cfg.verify { Some(next.ledger_residual()?) } else { None };
    let sigma = next.sigma_defect();
    next.diagnostics.push(StepDiag {
        step: k,
        delta,
        bracket_in,
        bracket_out,
        m_residual,
        lambda_iterations,
        ledger,
        sigma,
    });
    let bound = (cfg.contraction * bracket_in * bracket_in).max(cfg.floor);
    if bracket_out > bound {
        return Err(KamError::Contraction(format!(
            "step {k}: [H] went from {bracket_in:e} to {bracket_out:e} (bound {bound:e})"
        )));
    }
    if let Some(l) = ledger {
        if l > LEDGER_TOL {
            return Err(KamError::Contraction(format!("step {k}: conjugacy ledger residual {l:e}")));
        }
    }
    Ok(next)
}

/// Iterate [`inductive_step`] from `H̃` until `[h]` drops below the floor
/// or `cfg.steps` steps were taken.
pub fn normal_form(prep: &Prepared, freq: Frequency, cfg: &KamConfig) -> Result<NormalFormState> {
    run_scheme(&prep.htilde, freq, cfg)
}

pub fn run_scheme(h: &Series, freq: Frequency, cfg: &KamConfig) -> Result<NormalFormState> {
    let mut state = NormalFormState::new(h, freq, cfg.dioph)?;
    for _ in 0..cfg.steps {
        if state.bracket(cfg.delta(state.step_count))? <= cfg.floor {
            break;
        }
        state = inductive_step(&state, cfg)?;
    }
    Ok(state)
}

/// Minimum degrees in the `c`-weight-2 grading, which is the plain grading
/// after `c ↦ c²`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderScan {
    pub map: Option<u32>,
    pub g: Option<u32>,
    pub lambda_tilde: Option<u32>,
}

pub fn order_scan(state: &NormalFormState) -> OrderScan {
    OrderScan {
        map: state.map.min_order(),
        g: state.g.min_degree(),
        lambda_tilde: state.lambda.iter().filter_map(|l| l.min_degree()).min(),
    }
}
