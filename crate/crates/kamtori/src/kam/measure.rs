//! Monte-Carlo check that a perturbed polar map keeps most of a ball.
//!
//! `W(c, θ) = (c₁ sin 2πθ₁, c₁ cos 2πθ₁, …)` maps `[0, η]^d × T^d` onto the
//! product of disks `B = D(0, η)^d`. With `W_ε = W + ε`, the estimate is the
//! fraction of `x ∈ B` whose preimage `(c, θ)` has `c ∈ Σ`, where `Σ` is a
//! union of stripes in `c_i²` of the configured density.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{KamError, Result};

const CHUNK: usize = 10_000;
const INVERT_TOL: f64 = 1e-14;
const INVERT_MAX: usize = 200;

#[derive(Clone, Debug)]
pub struct MeasureConfig {
    pub d: usize,
    pub eta: f64,
    pub samples: usize,
    pub seed: u64,
    /// Fraction of `[0, η]^d` covered by `Σ`; 1 is the full cube.
    pub density: f64,
    /// Stripes per coordinate.
    pub stripes: u32,
    /// Amplitude `A` of `ε = A|c|^{2d+2}(cos 2πθ_i, sin 2πθ_i)_i`.
    /// `None` takes the largest value passing the bound check.
    pub amplitude: Option<f64>,
    /// Samples of `c` used to validate `|ε| + |∇ε| < ξ^{2d+1}`, `ξ = max_i c_i`.
    pub validation_samples: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            d: 2,
            eta: 0.1,
            samples: 1_000_000,
            seed: 0,
            density: 0.95,
            stripes: 50,
            amplitude: None,
            validation_samples: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasureReport {
    pub ratio: f64,
    pub half_width: f64,
    pub hits: usize,
    pub samples: usize,
    pub amplitude: f64,
    /// Largest `(|ε| + |∇ε|)/ξ^{2d+1}` seen during validation.
    pub bound_ratio: f64,
    /// Samples whose preimage iteration did not settle.
    pub unresolved: usize,
}

fn perturbation(a: f64, c: &[f64], theta: &[f64]) -> Vec<f64> {
    let d = c.len();
    let rho2: f64 = c.iter().map(|x| x * x).sum();
    let s = a * rho2.powi(d as i32 + 1);
    theta
        .iter()
        .flat_map(|t| [s * (2.0 * PI * t).cos(), s * (2.0 * PI * t).sin()])
        .collect()
}

/// `(|ε| + |∇ε|)/ξ^{2d+1}` at unit amplitude, with `|∇ε|` the Frobenius
/// norm of the Jacobian in `(c, θ)`. Neither depends on `θ`.
fn bound_ratio_unit(c: &[f64]) -> f64 {
    let d = c.len();
    let rho2: f64 = c.iter().map(|x| x * x).sum();
    let rho = rho2.sqrt();
    let e = rho.powi(2 * d as i32 + 2);
    let eps_norm = e * (d as f64).sqrt();
    // ∂/∂c_j of ρ^{2d+2} is (2d+2) ρ^{2d} c_j; ∂/∂θ_i hits one pair with 2π.
    let dc = (2 * d + 2) as f64 * rho.powi(2 * d as i32) * rho;
    let grad = (d as f64 * dc * dc + d as f64 * (2.0 * PI * e).powi(2)).sqrt();
    let xi = c.iter().cloned().fold(0.0, f64::max);
    (eps_norm + grad) / xi.powi(2 * d as i32 + 1)
}

fn in_sigma(c: &[f64], cfg: &MeasureConfig) -> bool {
    let per = cfg.density.powf(1.0 / cfg.d as f64);
    c.iter().all(|x| {
        if *x < 0.0 || *x > cfg.eta {
            return false;
        }
        if cfg.density >= 1.0 {
            return true;
        }
        let s = (x / cfg.eta).powi(2) * cfg.stripes as f64;
        s.fract() < per
    })
}

/// `W^{-1}` on the canonical branch `c ≥ 0`.
fn polar_inverse(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = y.len() / 2;
    let mut c = Vec::with_capacity(d);
    let mut t = Vec::with_capacity(d);
    for i in 0..d {
        let (s, co) = (y[2 * i], y[2 * i + 1]);
        c.push(s.hypot(co));
        t.push(s.atan2(co) / (2.0 * PI));
    }
    (c, t)
}

/// Solve `W(c, θ) + ε(c, θ) = x` by fixed point from `W^{-1}(x)`.
fn preimage(a: f64, x: &[f64]) -> Option<Vec<f64>> {
    let (mut c, mut t) = polar_inverse(x);
    if a == 0.0 {
        return Some(c);
    }
    for _ in 0..INVERT_MAX {
        let e = perturbation(a, &c, &t);
        let y: Vec<f64> = x.iter().zip(&e).map(|(xi, ei)| xi - ei).collect();
        let (c2, t2) = polar_inverse(&y);
        let moved = c2.iter().zip(&c).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        c = c2;
        t = t2;
        if moved <= INVERT_TOL * x.iter().map(|v| v.abs()).fold(1e-300, f64::max) {
            return Some(c);
        }
    }
    None
}

fn sample_disk<R: Rng>(rng: &mut R, eta: f64) -> [f64; 2] {
    let r = eta * rng.random_range(0.0..1.0f64).sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    [r * a.sin(), r * a.cos()]
}

pub fn measure_mc(cfg: &MeasureConfig) -> Result<MeasureReport> {
    if cfg.d == 0 || !(cfg.eta > 0.0) || cfg.samples == 0 {
        return Err(KamError::Precondition("measure needs d >= 1, eta > 0 and samples".into()));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(KamError::Precondition(format!("density {} outside (0,1]", cfg.density)));
    }
    // Validation over [0, η]^d, plus the corner where the ratio peaks.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut unit_worst = bound_ratio_unit(&vec![cfg.eta; cfg.d]);
    for _ in 0..cfg.validation_samples.max(1) {
        let c: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(0.0..cfg.eta)).collect();
        unit_worst = unit_worst.max(bound_ratio_unit(&c));
    }
    let amplitude = match cfg.amplitude {
        Some(a) => a,
        None => 0.99 / unit_worst,
    };
    let bound_ratio = amplitude * unit_worst;
    if bound_ratio >= 1.0 {
        return Err(KamError::Precondition(format!(
            "perturbation violates |eps| + |grad eps| < xi^(2d+1): ratio {bound_ratio:.4}"
        )));
    }
    let chunks = cfg.samples.div_ceil(CHUNK);
    let counts: Vec<(usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(ci as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
            let len = CHUNK.min(cfg.samples - ci * CHUNK);
            let mut hits = 0;
            let mut bad = 0;
            for _ in 0..len {
                let x: Vec<f64> = (0..cfg.d).flat_map(|_| sample_disk(&mut rng, cfg.eta)).collect();
                match preimage(amplitude, &x) {
                    Some(c) => hits += in_sigma(&c, cfg) as usize,
                    None => bad += 1,
                }
            }
            (hits, bad)
        })
        .collect();
    let hits: usize = counts.iter().map(|c| c.0).sum();
    let unresolved: usize = counts.iter().map(|c| c.1).sum();
    let n = cfg.samples as f64;
    let ratio = hits as f64 / n;
    Ok(MeasureReport {
        ratio,
        half_width: 1.96 * (ratio * (1.0 - ratio) / n).sqrt(),
        hits,
        samples: cfg.samples,
        amplitude,
        bound_ratio,
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_full_cube_is_everything() {
        let cfg = MeasureConfig {
            samples: 50_000,
            density: 1.0,
            amplitude: Some(0.0),
            ..Default::default()
        };
        let rep = measure_mc(&cfg).unwrap();
        assert_eq!(rep.hits, rep.samples);
        assert_eq!(rep.half_width, 0.0);
    }

    #[test]
    fn stripes_have_their_density() {
        let cfg = MeasureConfig {
            samples: 200_000,
            amplitude: Some(0.0),
            ..Default::default()
        };
        let rep = measure_mc(&cfg).unwrap();
        assert!((rep.ratio - 0.95).abs() < 3.0 * rep.half_width.max(1e-3), "{}", rep.ratio);
    }

    #[test]
    fn oversized_perturbation_rejected() {
        let cfg = MeasureConfig {
            samples: 10,
            amplitude: Some(1e9),
            ..Default::default()
        };
        assert!(measure_mc(&cfg).is_err());
    }
}
