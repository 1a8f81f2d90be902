//! Monte-Carlo density of Diophantine frequencies `Ω(c)` near `c = 0`.
//!
//! For each κ the sample region is `{|c| < η/2} ∩ ℝ^d_+` with
//! `η = (κ/σ)^{1/(2p)}/C″`. All κ share the same unit samples, scaled by
//! `η`, so the fractions are comparable without extra noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bnf::half_box;
use crate::error::{KamError, Result};
use crate::series::{c64, Series, C64};
use crate::smalldiv::{dot_k, knorm};
use crate::symplectic::loglog_slope;

const CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub struct DensityConfig {
    pub kappas: Vec<f64>,
    pub tau: f64,
    pub k_range: u32,
    pub samples: usize,
    pub seed: u64,
    /// Transversality data `(p, σ)`.
    pub p: u32,
    pub sigma: f64,
    /// The constant `C″` in `η`.
    pub c_eta: f64,
    /// Number of halvings of `ε` in the exponent fit.
    pub fit_points: usize,
}

impl DensityConfig {
    pub fn eta(&self, kappa: f64) -> f64 {
        (kappa / self.sigma).powf(1.0 / (2.0 * self.p as f64)) / self.c_eta
    }
}

#[derive(Clone, Debug)]
pub struct DensityRow {
    pub kappa: f64,
    pub eta: f64,
    pub passing: usize,
    pub samples: usize,
    pub fraction: f64,
    /// `Σ_k (κ/(σ|k|^{τ+1}))^{1/p}`: the per-k exclusion bound summed over
    /// the range, up to its constant.
    pub lemma_sum: f64,
}

#[derive(Clone, Debug)]
pub struct ExponentFit {
    pub eps: Vec<f64>,
    pub fractions: Vec<f64>,
    pub slope: Option<f64>,
    pub expected: f64,
}

#[derive(Clone, Debug)]
pub struct DensityReport {
    pub rows: Vec<DensityRow>,
    pub fit: ExponentFit,
}

/// Unit samples: uniform in the unit ball intersected with the orthant.
fn unit_samples(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ci as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let len = CHUNK.min(n - ci * CHUNK);
            (0..len)
                .map(|_| loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                    if v.iter().map(|x| x * x).sum::<f64>() < 1.0 {
                        break v;
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn eval_omega(omega: &[Series], c: &[f64]) -> Vec<f64> {
    let d = omega.len();
    let mut p = vec![c64(0.0, 0.0); 2 * d];
    p.extend(c.iter().map(|x| c64(*x, 0.0)));
    omega.iter().map(|s| s.eval(&p).re).collect::<Vec<f64>>()
}

struct KTable {
    ks: Vec<Vec<i64>>,
    norms: Vec<f64>,
}

pub fn density_experiment(omega: &[Series], cfg: &DensityConfig) -> Result<DensityReport> {
    let d = omega.len();
    if cfg.kappas.is_empty() || cfg.samples == 0 {
        return Err(KamError::Precondition("density needs kappas and samples".into()));
    }
    if !(cfg.sigma > 0.0) || cfg.p == 0 {
        return Err(KamError::Precondition("transversality data must have p >= 1 and sigma > 0".into()));
    }
    let ks = half_box(d, cfg.k_range);
    let table = KTable {
        norms: ks.iter().map(|k| knorm(k)).collect(),
        ks,
    };
    let unit = unit_samples(d, cfg.samples, cfg.seed);
    let mut rows = Vec::new();
    for &kappa in &cfg.kappas {
        let eta = cfg.eta(kappa);
        let passing: usize = unit
            .par_iter()
            .map(|u| {
                let c: Vec<f64> = u.iter().map(|x| x * eta / 2.0).collect();
                let w = eval_omega(omega, &c);
                let ok = table
                    .ks
                    .iter()
                    .zip(&table.norms)
                    .all(|(k, n)| dot_k(k, &w).abs() * n.powf(cfg.tau) >= kappa);
                ok as usize
            })
            .sum();
        let lemma_sum = table
            .norms
            .iter()
            .map(|n| 2.0 * (kappa / (cfg.sigma * n.powf(cfg.tau + 1.0))).powf(1.0 / cfg.p as f64))
            .sum();
        rows.push(DensityRow {
            kappa,
            eta,
            passing,
            samples: unit.len(),
            fraction: passing as f64 / unit.len() as f64,
            lemma_sum,
        });
    }
    let fit = exponent_fit(omega, &table, &unit, cfg)?;
    Ok(DensityReport { rows, fit })
}

/// Fraction of the largest-κ region where `min_k |⟨k/|k|, Ω(c)⟩| < ε`,
/// on a halving ladder of ε starting at the 10% quantile of that minimum.
fn exponent_fit(omega: &[Series], table: &KTable, unit: &[Vec<f64>], cfg: &DensityConfig) -> Result<ExponentFit> {
    let kmax = cfg.kappas.iter().cloned().fold(f64::MIN, f64::max);
    let eta = cfg.eta(kmax);
    let mut mins: Vec<f64> = unit
        .par_iter()
        .map(|u| {
            let c: Vec<f64> = u.iter().map(|x| x * eta / 2.0).collect();
            let w = eval_omega(omega, &c);
            table
                .ks
                .iter()
                .zip(&table.norms)
                .map(|(k, n)| dot_k(k, &w).abs() / n)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    mins.sort_by(|a, b| a.total_cmp(b));
    let top = mins[mins.len() / 10];
    let eps: Vec<f64> = (0..cfg.fit_points.max(2)).map(|j| top / 2f64.powi(j as i32)).collect();
    let fractions: Vec<f64> = eps
        .iter()
        .map(|e| mins.partition_point(|m| m < e) as f64 / mins.len() as f64)
        .collect();
    let usable: Vec<(f64, f64)> = eps.iter().zip(&fractions).filter(|(_, f)| **f > 0.0).map(|(e, f)| (*e, *f)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    Ok(ExponentFit {
        slope: loglog_slope(&xs, &ys),
        eps,
        fractions,
        expected: 1.0 / cfg.p as f64,
    })
}

/// `Ω` at complex `c`, for callers holding a jet.
pub fn eval_jet(omega: &[Series], c: &[C64]) -> Vec<C64> {
    let d = omega.len();
    let mut p = vec![c64(0.0, 0.0); 2 * d];
    p.extend_from_slice(c);
    omega.iter().map(|s| s.eval(&p)).collect()
}
