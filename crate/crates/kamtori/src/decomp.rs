//! Unique splittings of a series into powers of the actions.
//!
//! Every monomial `z^α w^β` factors uniquely as `(zw)^n z^α' w^β'` with
//! `n_i = min(α_i, β_i)`, leaving a non-resonant remainder (`α'_i β'_i = 0`).
//! Grouping by `n` gives the expansion in powers of `zw`; the binomial rewrite
//! `z_j w_j = c_j + (z_j w_j − c_j)` turns it into the expansion in powers of
//! `zw − c`, from which the canonical parts are read off.

use std::collections::BTreeMap;

use crate::series::{c64, Mono, Series, Space, Var};

/// `(n, α', β')` with `n_i = min(α_i, β_i)`.
pub fn nr_reduce(alpha: &[u32], beta: &[u32]) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let n: Vec<u32> = alpha.iter().zip(beta).map(|(a, b)| *a.min(b)).collect();
    let a: Vec<u32> = alpha.iter().zip(&n).map(|(a, k)| a - k).collect();
    let b: Vec<u32> = beta.iter().zip(&n).map(|(b, k)| b - k).collect();
    (n, a, b)
}

pub fn is_nonresonant(f: &Series) -> bool {
    let d = f.d();
    f.terms().all(|(m, _)| m.is_nonresonant(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// `f = Σ (zw)^n f̃_n`.
    Actions,
    /// `f = Σ (zw − c)^n f_n`.
    Shifted,
}

#[derive(Clone, Debug)]
pub struct ActionDecomposition {
    pub space: Space,
    pub basis: Basis,
    pub parts: BTreeMap<Vec<u32>, Series>,
}

impl ActionDecomposition {
    pub fn part(&self, n: &[u32]) -> Series {
        self.parts
            .get(n)
            .cloned()
            .unwrap_or_else(|| Series::zero(self.space))
    }

    pub fn recombine(&self) -> Series {
        let mut pow = PowerCache::new(self.space, self.basis);
        let mut out = Series::zero(self.space);
        for (n, f) in &self.parts {
            out = &out + &(&pow.get(n) * f);
        }
        out
    }
}

/// `zw` or `zw − c` componentwise.
pub fn action_vector(space: Space, basis: Basis) -> Vec<Series> {
    (0..space.d())
        .map(|i| {
            let zw = &Series::var(space, Var::Z(i)) * &Series::var(space, Var::W(i));
            match basis {
                Basis::Actions => zw,
                Basis::Shifted => &zw - &Series::var(space, Var::C(i)),
            }
        })
        .collect()
}

/// Memoized products `Π_i a_i^{n_i}` of an action vector.
pub struct PowerCache {
    space: Space,
    base: Vec<Series>,
    cache: BTreeMap<Vec<u32>, Series>,
}

impl PowerCache {
    pub fn new(space: Space, basis: Basis) -> PowerCache {
        PowerCache {
            space,
            base: action_vector(space, basis),
            cache: BTreeMap::new(),
        }
    }

    pub fn get(&mut self, n: &[u32]) -> Series {
        if let Some(s) = self.cache.get(n) {
            return s.clone();
        }
        let out = match n.iter().position(|&e| e > 0) {
            None => Series::one(self.space),
            Some(i) => {
                let mut lower = n.to_vec();
                lower[i] -= 1;
                let prev = self.get(&lower);
                &prev * &self.base[i]
            }
        };
        self.cache.insert(n.to_vec(), out.clone());
        out
    }
}

pub fn decompose_zw(f: &Series) -> ActionDecomposition {
    let space = f.space();
    let d = space.d();
    let mut buckets: BTreeMap<Vec<u32>, Vec<(Mono, crate::C64)>> = BTreeMap::new();
    for (m, c) in f.terms() {
        let (n, a, b) = nr_reduce(&m.alpha(d), &m.beta(d));
        buckets
            .entry(n)
            .or_default()
            .push((Mono::new(&a, &b, &m.gamma(d)), c));
    }
    ActionDecomposition {
        space,
        basis: Basis::Actions,
        parts: buckets
            .into_iter()
            .map(|(n, t)| (n, Series::from_terms(space, t)))
            .collect(),
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// `f_n = Σ_{k ≥ n} C(k, n) c^{k−n} f̃_k`.
pub fn decompose_action(f: &Series) -> ActionDecomposition {
    let space = f.space();
    let d = space.d();
    let zw = decompose_zw(f);
    let mut parts: BTreeMap<Vec<u32>, Series> = BTreeMap::new();
    for (k, fk) in &zw.parts {
        // All n with n ≤ k componentwise.
        let mut n = vec![0u32; d];
        loop {
            let mut coeff = 1.0;
            let mut shift = vec![0u32; d];
            for i in 0..d {
                coeff *= binomial(k[i], n[i]);
                shift[i] = k[i] - n[i];
            }
            let zeros = vec![0u32; d];
            let term = fk.mul_mono(Mono::new(&zeros, &zeros, &shift), c64(coeff, 0.0));
            if !term.is_zero() {
                let slot = parts.entry(n.clone()).or_insert_with(|| Series::zero(space));
                *slot = &*slot + &term;
            }
            // Advance the odometer.
            let mut i = 0;
            while i < d {
                if n[i] < k[i] {
                    n[i] += 1;
                    break;
                }
                n[i] = 0;
                i += 1;
            }
            if i == d {
                break;
            }
        }
    }
    parts.retain(|_, s| !s.is_zero());
    ActionDecomposition {
        space,
        basis: Basis::Shifted,
        parts,
    }
}

#[derive(Clone, Debug)]
pub struct CanonicalParts {
    pub f0: Series,
    pub f1: Vec<Series>,
    /// Symmetric: diagonal `f_{2e_i}`, off-diagonal `f_{e_i+e_j}/2`.
    pub f2: Vec<Vec<Series>>,
    /// `f = f0 + ⟨f1, Δ⟩ + ⟨Δ, f2_full Δ⟩`.
    pub f2_full: Vec<Vec<Series>>,
    /// Quadratic form minus `f2`, as a symmetric cubic tensor in `Δ`.
    pub f3_full: Vec<Vec<Vec<Series>>>,
}

fn unit(d: usize, idx: &[usize]) -> Vec<u32> {
    let mut v = vec![0u32; d];
    for &i in idx {
        v[i] += 1;
    }
    v
}

fn dominated(small: &[u32], big: &[u32]) -> bool {
    small.iter().zip(big).all(|(a, b)| a <= b)
}

pub fn canonical_parts(f: &Series) -> CanonicalParts {
    canonical_from(&decompose_action(f))
}

pub fn canonical_from(dec: &ActionDecomposition) -> CanonicalParts {
    assert_eq!(dec.basis, Basis::Shifted, "canonical parts need the shifted basis");
    let space = dec.space;
    let d = space.d();
    let zero = Series::zero(space);
    let f0 = dec.part(&vec![0; d]);
    let f1: Vec<Series> = (0..d).map(|i| dec.part(&unit(d, &[i]))).collect();
    let mut f2 = vec![vec![zero.clone(); d]; d];
    for i in 0..d {
        for j in 0..d {
            let p = dec.part(&unit(d, &[i, j]));
            f2[i][j] = if i == j { p } else { p.scale_re(0.5) };
        }
    }
    let mut pow = PowerCache::new(space, Basis::Shifted);
    let mut f2_full = vec![vec![zero.clone(); d]; d];
    let mut f3_full = vec![vec![vec![zero.clone(); d]; d]; d];
    for (n, fn_) in &dec.parts {
        let total: u32 = n.iter().sum();
        if total >= 2 {
            let pairs: Vec<(usize, usize)> = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .filter(|&(i, j)| dominated(&unit(d, &[i, j]), n))
                .collect();
            let w = 1.0 / pairs.len() as f64;
            for (i, j) in pairs {
                let rest: Vec<u32> = n.iter().zip(unit(d, &[i, j])).map(|(a, b)| a - b).collect();
                let t = (&pow.get(&rest) * fn_).scale_re(w);
                f2_full[i][j] = &f2_full[i][j] + &t;
            }
        }
        if total >= 3 {
            let mut triples = Vec::new();
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        if dominated(&unit(d, &[i, j, k]), n) {
                            triples.push((i, j, k));
                        }
                    }
                }
            }
            let w = 1.0 / triples.len() as f64;
            for (i, j, k) in triples {
                let rest: Vec<u32> = n
                    .iter()
                    .zip(unit(d, &[i, j, k]))
                    .map(|(a, b)| a - b)
                    .collect();
                let t = (&pow.get(&rest) * fn_).scale_re(w);
                f3_full[i][j][k] = &f3_full[i][j][k] + &t;
            }
        }
    }
    CanonicalParts {
        f0,
        f1,
        f2,
        f2_full,
        f3_full,
    }
}

impl CanonicalParts {
    /// `f0 + ⟨f1, Δ⟩ + ⟨Δ, f2_full Δ⟩`.
    pub fn recombine_first(&self) -> Series {
        let space = self.f0.space();
        let delta = action_vector(space, Basis::Shifted);
        let mut out = self.f0.clone();
        for (i, di) in delta.iter().enumerate() {
            out = &out + &(&self.f1[i] * di);
        }
        &out + &quadratic_form(&self.f2_full, &delta)
    }

    /// `f0 + ⟨f1, Δ⟩ + ⟨Δ, f2 Δ⟩ + f3_full·Δ⊗Δ⊗Δ`.
    pub fn recombine_second(&self) -> Series {
        let space = self.f0.space();
        let delta = action_vector(space, Basis::Shifted);
        let mut out = self.f0.clone();
        for (i, di) in delta.iter().enumerate() {
            out = &out + &(&self.f1[i] * di);
        }
        out = &out + &quadratic_form(&self.f2, &delta);
        &out + &cubic_form(&self.f3_full, &delta)
    }
}

pub fn quadratic_form(m: &[Vec<Series>], delta: &[Series]) -> Series {
    let space = delta[0].space();
    let mut out = Series::zero(space);
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if !e.is_zero() {
                out = &out + &(&(&delta[i] * &delta[j]) * e);
            }
        }
    }
    out
}

pub fn cubic_form(t: &[Vec<Vec<Series>>], delta: &[Series]) -> Series {
    let space = delta[0].space();
    let mut out = Series::zero(space);
    for (i, a) in t.iter().enumerate() {
        for (j, b) in a.iter().enumerate() {
            for (k, e) in b.iter().enumerate() {
                if !e.is_zero() {
                    let dd = &(&delta[i] * &delta[j]) * &delta[k];
                    out = &out + &(&dd * e);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> crate::C64 {
        c64(1.0, 0.0)
    }

    #[test]
    fn nr_reduce_examples() {
        assert_eq!(nr_reduce(&[2], &[1]), (vec![1], vec![1], vec![0]));
        assert_eq!(nr_reduce(&[0], &[0]), (vec![0], vec![0], vec![0]));
        assert_eq!(
            nr_reduce(&[1, 0], &[1, 1]),
            (vec![1, 0], vec![0, 0], vec![0, 1])
        );
    }

    #[test]
    fn decompose_zw_examples() {
        let sp = Space::new(1, 6);
        let f = Series::monomial(sp, &[2], &[1], &[0], one());
        let dec = decompose_zw(&f);
        assert_eq!(dec.parts.len(), 1);
        assert_eq!(dec.part(&[1]), Series::var(sp, Var::Z(0)));

        let z3 = Series::var(sp, Var::Z(0)).pow(3);
        assert_eq!(decompose_zw(&z3).part(&[0]), z3);

        let sp2 = Space::new(2, 6);
        let f = Series::monomial(sp2, &[1, 1], &[1, 0], &[0, 0], one());
        let dec = decompose_zw(&f);
        assert_eq!(dec.part(&[1, 0]), Series::var(sp2, Var::Z(1)));
        assert_eq!(dec.parts.len(), 1);
    }

    #[test]
    fn decompose_action_examples() {
        let sp = Space::new(1, 6);
        let c = Series::var(sp, Var::C(0));
        let zw = Series::monomial(sp, &[1], &[1], &[0], one());
        let dec = decompose_action(&zw);
        assert_eq!(dec.part(&[0]), c);
        assert_eq!(dec.part(&[1]), Series::one(sp));

        // (zw)^2 = c^2 + 2c(zw − c) + (zw − c)^2.
        let dec = decompose_action(&zw.pow(2));
        assert_eq!(dec.part(&[0]), c.pow(2));
        assert_eq!(dec.part(&[1]), c.scale_re(2.0));
        assert_eq!(dec.part(&[2]), Series::one(sp));

        let z = Series::var(sp, Var::Z(0));
        let dec = decompose_action(&z);
        assert_eq!(dec.parts.len(), 1);
        assert_eq!(dec.part(&[0]), z);
    }

    #[test]
    fn canonical_examples() {
        let sp = Space::new(1, 6);
        let delta = action_vector(sp, Basis::Shifted).remove(0);
        let p = canonical_parts(&delta.pow(2));
        assert!(p.f0.is_zero() && p.f1[0].is_zero());
        assert_eq!(p.f2_full[0][0], Series::one(sp));

        let z = Series::var(sp, Var::Z(0));
        let w = Series::var(sp, Var::W(0));
        let f = &z + &(&delta * &w);
        let p = canonical_parts(&f);
        assert_eq!(p.f0, z);
        assert_eq!(p.f1[0], w);
        assert!(p.f2_full[0][0].is_zero());

        let five = Series::constant(sp, c64(5.0, 0.0));
        let p = canonical_parts(&five);
        assert_eq!(p.f0, five);
        assert!(p.f1[0].is_zero() && p.f2[0][0].is_zero());
    }

    #[test]
    fn canonical_recombination_d2() {
        let sp = Space::new(2, 8);
        let delta = action_vector(sp, Basis::Shifted);
        let z0 = Series::var(sp, Var::Z(0));
        let w1 = Series::var(sp, Var::W(1));
        let f = &(&(&delta[0] * &delta[1]) * &z0) + &(&delta[0].pow(3) * &w1);
        let f = &f + &(&delta[1] * &z0);
        let p = canonical_parts(&f);
        assert!(p.recombine_first().max_abs_diff(&f) < 1e-13);
        assert!(p.recombine_second().max_abs_diff(&f) < 1e-13);
        assert_eq!(p.f1[1], z0);
        assert_eq!(p.f2[0][1], z0.scale_re(0.5));
    }
}
