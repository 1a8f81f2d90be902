//! Diophantine arithmetic and the linear operators built on `⟨ω, α−β⟩`.
//!
//! The diagonal projector `ℳ`, the derivations `𝒟_i`, `𝒟` and `𝒟^ω`, the
//! smooth cut-off `𝒫` and the solver `ℒ` of `𝒟^ω u = f − 𝒫f − ℳf`.
//! Frequencies are either a constant vector or a vector of c-only series
//! whose constant term is the base frequency (see [`Frequency`]).
//!
//! `𝒫` never keeps diagonal monomials, so `ℳ𝒫 = 𝒫ℳ = 0` and the equation
//! for `ℒ` is always solvable.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{KamError, Result};
use crate::series::{c64, Mono, Series, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diophantine {
    pub kappa: f64,
    pub tau: f64,
}

impl Diophantine {
    pub fn new(kappa: f64, tau: f64) -> Result<Diophantine> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(KamError::Precondition(format!("kappa={kappa} outside (0,1)")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(KamError::Precondition(format!("tau={tau} must be positive")));
        }
        Ok(Diophantine { kappa, tau })
    }

    /// Additionally enforce `τ > d − 1`.
    pub fn for_dim(kappa: f64, tau: f64, d: usize) -> Result<Diophantine> {
        let p = Diophantine::new(kappa, tau)?;
        if tau <= d as f64 - 1.0 {
            return Err(KamError::Precondition(format!("tau={tau} must exceed d-1={}", d - 1)));
        }
        Ok(p)
    }
}

pub fn dot_k(k: &[i64], omega: &[f64]) -> f64 {
    k.iter().zip(omega).map(|(a, b)| *a as f64 * b).sum()
}

/// Euclidean length of an integer vector.
pub fn knorm(k: &[i64]) -> f64 {
    k.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt()
}

/// Integer vectors in the box `0 < |k|_∞ ≤ kmax` whose first nonzero entry
/// is positive (one representative of each `±k` pair), with `k_0 = first`.
fn for_each_half<F: FnMut(&[i64])>(d: usize, first: i64, kmax: i64, f: &mut F) {
    fn rec<F: FnMut(&[i64])>(k: &mut Vec<i64>, idx: usize, kmax: i64, lead_zero: bool, f: &mut F) {
        if idx == k.len() {
            if !lead_zero {
                f(k);
            }
            return;
        }
        let lo = if lead_zero { 0 } else { -kmax };
        for v in lo..=kmax {
            k[idx] = v;
            rec(k, idx + 1, kmax, lead_zero && v == 0, f);
        }
        k[idx] = 0;
    }
    let mut k = vec![0i64; d];
    k[0] = first;
    rec(&mut k, 1, kmax, first == 0, f);
}

/// `min |⟨k,ω⟩|·|k|^τ` over the box `0 < |k|_∞ ≤ kmax`, with a minimizing
/// `k`. Ties go to the first `k` in enumeration order.
pub fn dc_margin(omega: &[f64], tau: f64, kmax: u32) -> (f64, Vec<i64>) {
    let d = omega.len();
    let kmax = kmax as i64;
    let per_first: Vec<(f64, Vec<i64>)> = (0..=kmax)
        .into_par_iter()
        .map(|first| {
            let mut best = (f64::INFINITY, Vec::new());
            for_each_half(d, first, kmax, &mut |k| {
                let v = dot_k(k, omega).abs() * knorm(k).powf(tau);
                if v < best.0 {
                    best = (v, k.to_vec());
                }
            });
            best
        })
        .collect();
    per_first
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a })
}

/// Finite-range check of `|⟨k,ω⟩| ≥ κ/|k|^τ` for `0 < |k|_∞ ≤ kmax`.
pub fn dc_check(omega: &[f64], p: &Diophantine, kmax: u32) -> bool {
    dc_margin(omega, p.tau, kmax).0 >= p.kappa
}

/// First resonance `⟨k,ω⟩ = 0` with `0 < |k|_∞ ≤ kmax`, if any.
pub fn find_resonance(omega: &[f64], kmax: u32) -> Option<Vec<i64>> {
    let (m, k) = dc_margin(omega, 0.0, kmax);
    (m == 0.0).then_some(k)
}

fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// The even bump: 1 on `|x| ≤ 1/4`, 0 on `|x| ≥ 1/2`, `C^∞` in between.
pub fn bump(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.25 {
        1.0
    } else if a >= 0.5 {
        0.0
    } else {
        let t = (0.5 - a) / 0.25;
        psi(t) / (psi(t) + psi(1.0 - t))
    }
}

/// Either a constant frequency vector or a vector of c-only series.
#[derive(Clone, Debug)]
pub enum Frequency {
    Const(Vec<f64>),
    Jet(Vec<Series>),
}

impl Frequency {
    pub fn base(&self) -> Vec<f64> {
        match self {
            Frequency::Const(w) => w.clone(),
            Frequency::Jet(s) => s.iter().map(|x| x.coeff(Mono::ONE).re).collect(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Frequency::Const(w) => w.len(),
            Frequency::Jet(s) => s.len(),
        }
    }

    fn is_const(&self) -> bool {
        match self {
            Frequency::Const(_) => true,
            Frequency::Jet(s) => s.iter().all(|x| x.terms().all(|(m, _)| m == Mono::ONE)),
        }
    }

    /// `⟨k, ω⟩` as a c-series in `space`.
    fn divisor(&self, k: &[i64], f: &Series) -> Series {
        let space = f.space();
        match self {
            Frequency::Const(w) => Series::constant(space, c64(dot_k(k, w), 0.0)),
            Frequency::Jet(s) => {
                let mut out = Series::zero(space);
                for (ki, si) in k.iter().zip(s) {
                    if *ki != 0 {
                        out = &out + &si.scale_re(*ki as f64);
                    }
                }
                out
            }
        }
    }
}

pub fn project_diagonal(f: &Series) -> Series {
    let d = f.d();
    f.filter(|m, _| m.is_diagonal(d))
}

pub fn apply_d_i(f: &Series, i: usize) -> Series {
    let d = f.d();
    f.map_coeffs(|m, c| c * (m.exp(i) as f64 - m.exp(d + i) as f64))
}

pub fn apply_d(f: &Series) -> Vec<Series> {
    (0..f.d()).map(|i| apply_d_i(f, i)).collect()
}

pub fn apply_d_omega(f: &Series, omega: &[f64]) -> Series {
    let d = f.d();
    f.map_coeffs(|m, c| c * dot_k(&m.k(d), omega))
}

/// `Σ_i ω_i(c) 𝒟_i f`.
pub fn apply_d_freq(f: &Series, freq: &Frequency) -> Series {
    match freq {
        Frequency::Const(w) => apply_d_omega(f, w),
        Frequency::Jet(ws) => {
            let mut out = Series::zero(f.space());
            for (i, wi) in ws.iter().enumerate() {
                out = &out + &(&apply_d_i(f, i) * wi);
            }
            out
        }
    }
}

/// Cut-off weight of a non-diagonal monomial; zero on the diagonal.
pub fn cutoff_weight(m: Mono, d: usize, omega: &[f64], p: &Diophantine) -> f64 {
    if m.is_diagonal(d) {
        return 0.0;
    }
    let size = (m.zw_degree(d) as f64).powf(p.tau);
    bump(dot_k(&m.k(d), omega) * size / p.kappa)
}

/// `𝒫f` with weights evaluated at the base frequency.
pub fn cutoff(f: &Series, omega: &[f64], p: &Diophantine) -> Series {
    let d = f.d();
    f.map_coeffs(|m, c| c * cutoff_weight(m, d, omega, p))
}

fn check_plateau(f: &Series, freq: &Frequency, p: Option<&Diophantine>) -> Result<()> {
    let Some(p) = p else { return Ok(()) };
    if freq.is_const() {
        return Ok(());
    }
    let d = f.d();
    let w0 = freq.base();
    for (m, _) in f.terms() {
        let l = cutoff_weight(m, d, &w0, p);
        if l > 0.0 && l < 1.0 {
            return Err(KamError::Precondition(format!(
                "cut-off weight {l} off its plateau at alpha={:?} beta={:?}; jet mode needs l in {{0,1}}",
                m.alpha(d),
                m.beta(d)
            )));
        }
    }
    Ok(())
}

pub fn cutoff_freq(f: &Series, freq: &Frequency, p: &Diophantine) -> Result<Series> {
    check_plateau(f, freq, Some(p))?;
    Ok(cutoff(f, &freq.base(), p))
}

/// Inverse of a c-only series with nonzero constant term.
pub fn invert_c_series(s: &Series) -> Series {
    let space = s.space();
    let a = s.coeff(Mono::ONE);
    let rest = s.filter(|m, _| m != Mono::ONE).scale(-a.inv());
    let mut term = Series::constant(space, a.inv());
    let mut out = term.clone();
    loop {
        term = &term * &rest;
        if term.is_zero() {
            break;
        }
        out = &out + &term;
    }
    out
}

/// `ℒf`: solves `𝒟^ω u = f − 𝒫f − ℳf` with `ℳu = 0`.
/// Without Diophantine parameters there is no cut-off and `ℒ` inverts
/// `𝒟^ω` on the non-diagonal part.
pub fn solve_l(f: &Series, freq: &Frequency, p: Option<&Diophantine>) -> Result<Series> {
    check_plateau(f, freq, p)?;
    let space = f.space();
    let d = f.d();
    let w0 = freq.base();
    // Group by the (z,w) part so each c-coefficient is divided once.
    let mut groups: BTreeMap<Mono, Vec<(Mono, C64)>> = BTreeMap::new();
    for (m, c) in f.terms() {
        if m.is_diagonal(d) {
            continue;
        }
        let mut key = m;
        let mut cm = Mono::ONE;
        for i in 0..d {
            key = key.with_exp(2 * d + i, 0);
            cm = cm.with_exp(2 * d + i, m.exp(2 * d + i));
        }
        groups.entry(key).or_default().push((cm, c));
    }
    let mut inverses: BTreeMap<Vec<i64>, Series> = BTreeMap::new();
    let mut out: Vec<(Mono, C64)> = Vec::new();
    for (key, cs) in groups {
        let l = p.map_or(0.0, |p| cutoff_weight(key, d, &w0, p));
        if l == 1.0 {
            continue;
        }
        let k = key.k(d);
        let div0 = dot_k(&k, &w0);
        if div0 == 0.0 {
            return Err(KamError::SmallDivisor {
                alpha: key.alpha(d),
                beta: key.beta(d),
                divisor: div0,
            });
        }
        let coeffs = Series::from_terms(space, cs);
        let quotient = match freq {
            Frequency::Const(_) => coeffs.scale_re(1.0 / div0),
            Frequency::Jet(_) => {
                let inv = inverses
                    .entry(k.clone())
                    .or_insert_with(|| invert_c_series(&freq.divisor(&k, &coeffs)));
                &coeffs * inv
            }
        };
        let scale = 1.0 - l;
        for (cm, c) in quotient.terms() {
            out.push((cm.times(key), c * scale));
        }
    }
    Ok(Series::from_terms(space, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Space, Var};

    const GOLDEN: f64 = 1.618_033_988_749_895;
    const FROZEN_GOLDEN_KAPPA: f64 = 0.850_650_807_592_286_3;

    #[test]
    fn dc_examples() {
        let p = Diophantine::new(0.5, 1.0).unwrap();
        assert!(dc_check(&[1.0], &p, 1_000_000));
        let p = Diophantine::new(0.9, 1.0).unwrap();
        assert!(!dc_check(&[1.0, 1.0], &p, 1));
        assert_eq!(find_resonance(&[1.0, 1.0], 3), Some(vec![1, -1]));
        assert_eq!(find_resonance(&[1.0, GOLDEN], 50), None);
    }

    #[test]
    fn golden_margin_matches_convergent_oracle() {
        // Independent oracle: for each k2 the best k1 is the nearest integer
        // to −k2·φ, so three candidates per k2 suffice (plus k = (1,0)).
        let kmax = 10_000i64;
        let mut oracle = 1.0f64;
        for k2 in 1..=kmax {
            let centre = (-(k2 as f64) * GOLDEN).round() as i64;
            for k1 in [centre - 1, centre, centre + 1] {
                if k1.abs() > kmax {
                    continue;
                }
                let (a, b) = (k1 as f64, k2 as f64);
                oracle = oracle.min((a + b * GOLDEN).abs() * (a * a + b * b).sqrt());
            }
        }
        let (m, k) = dc_margin(&[1.0, GOLDEN], 1.0, 10_000);
        assert!((m - oracle).abs() < 1e-12, "{m} vs {oracle}");
        // Frozen from the oracle; the minimizer is a Fibonacci pair.
        assert!((m - FROZEN_GOLDEN_KAPPA).abs() < 1e-9, "{m}");
        assert_eq!(k, vec![4181, -2584]);
    }

    #[test]
    fn bump_profile() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(-0.25), 1.0);
        assert_eq!(bump(0.5), 0.0);
        assert_eq!(bump(90.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let x = 0.25 + 0.25 * i as f64 / 100.0;
            let v = bump(x);
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            assert_eq!(v, bump(-x));
            prev = v;
        }
    }

    #[test]
    fn diagonal_projection() {
        let sp = Space::new(1, 6);
        let f = &Series::monomial(sp, &[2], &[2], &[0], c64(3.0, 0.0))
            + &Series::monomial(sp, &[1], &[2], &[0], c64(2.0, 0.0));
        let m = project_diagonal(&f);
        assert_eq!(m, Series::monomial(sp, &[2], &[2], &[0], c64(3.0, 0.0)));
        assert_eq!(project_diagonal(&m), m);
    }

    #[test]
    fn derivations() {
        let sp = Space::new(1, 6);
        let f = Series::monomial(sp, &[2], &[1], &[0], c64(1.0, 0.0));
        assert_eq!(apply_d_omega(&f, &[1.0]), f);
        let delta = &Series::monomial(sp, &[1], &[1], &[0], c64(1.0, 0.0)) - &Series::var(sp, Var::C(0));
        for n in 1..4 {
            assert!(apply_d(&delta.pow(n))[0].is_zero());
        }
    }

    #[test]
    fn cutoff_examples() {
        let sp = Space::new(1, 6);
        let p = Diophantine::new(0.1, 2.0).unwrap();
        let f = Series::monomial(sp, &[2], &[1], &[0], c64(1.0, 0.0));
        assert!(cutoff(&f, &[1.0], &p).is_zero());
        let diag = Series::monomial(sp, &[2], &[2], &[1], c64(1.0, 0.0));
        assert!(cutoff(&diag, &[1.0], &p).is_zero());
        let z = Series::var(sp, Var::Z(0));
        assert_eq!(cutoff(&z, &[0.001], &p), z);
    }

    #[test]
    fn solver_examples() {
        let sp = Space::new(1, 6);
        let p = Diophantine::new(0.1, 2.0).unwrap();
        let freq = Frequency::Const(vec![1.0]);
        let f = Series::monomial(sp, &[2], &[1], &[0], c64(1.0, 0.0));
        assert_eq!(solve_l(&f, &freq, Some(&p)).unwrap(), f);
        let diag = Series::monomial(sp, &[1], &[1], &[2], c64(1.0, 0.0));
        assert!(solve_l(&diag, &freq, Some(&p)).unwrap().is_zero());
        let err = solve_l(&f, &Frequency::Const(vec![0.0]), None).unwrap_err();
        assert_eq!(err.class(), "small-divisor");
    }

    #[test]
    fn jet_solver_divides_by_series() {
        let sp = Space::weighted(1, 8, 2);
        let c = Series::var(sp, Var::C(0));
        let omega = &Series::one(sp) + &c.scale_re(0.5);
        let freq = Frequency::Jet(vec![omega]);
        let z = Series::var(sp, Var::Z(0));
        let u = solve_l(&z, &freq, None).unwrap();
        let back = apply_d_freq(&u, &freq);
        assert!(back.max_abs_diff(&z) < 1e-15);
    }

    #[test]
    fn jet_mode_rejects_transition_band() {
        let sp = Space::weighted(1, 8, 2);
        let omega = &Series::one(sp) + &Series::var(sp, Var::C(0));
        let freq = Frequency::Jet(vec![omega]);
        let p = Diophantine::new(0.99, 0.0001).unwrap();
        let z = Series::var(sp, Var::Z(0));
        assert!(bump(1.0 / 0.99) == 0.0);
        assert!(solve_l(&z, &freq, Some(&p)).is_ok());
        // x = 0.2·2^τ/κ ≈ 0.40 lies between the plateaus.
        let zz = Series::monomial(sp, &[2], &[0], &[0], c64(1.0, 0.0));
        let freq = Frequency::Jet(vec![&Series::constant(sp, c64(0.2, 0.0)) + &Series::var(sp, Var::C(0))]);
        let err = solve_l(&zz, &freq, Some(&p)).unwrap_err();
        assert_eq!(err.class(), "precondition");
    }
}
