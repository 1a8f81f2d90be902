//! Sparse power series in `(z, w, c) ∈ C^d × C^d × C^d`, truncated by degree.
//!
//! A series belongs to a [`Space`], fixed by the number of degrees of freedom
//! `d`, the truncation bound `N` and the weight given to each `c_j`. The
//! degree of `z^α w^β c^γ` is `|α| + |β| + c_weight·|γ|`. With the default
//! weight 1 this is the plain total degree. Weight 2 makes `z_j w_j − c_j`
//! homogeneous, which is the grading used by the counterterm scheme.
//!
//! Invariants:
//! - no stored coefficient is exactly zero;
//! - every stored monomial has degree at most `N`;
//! - binary operations require identical spaces.
//!
//! Exponents are packed six bits per variable into a `u128`, so `d ≤ 7` and
//! `N ≤ 63`. Multiplying monomials is then a single integer addition.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustc_hash::FxHashMap;

use crate::error::{KamError, Result};

pub type C64 = Complex64;

const BITS: u32 = 6;
const MASK: u128 = (1 << BITS) - 1;
pub const MAX_D: usize = 7;
pub const MAX_N: u32 = 63;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Space {
    d: usize,
    n: u32,
    c_weight: u32,
}

impl Space {
    /// Plain total-degree space. Panics on `d = 0`, `N = 0` or out-of-range sizes.
    pub fn new(d: usize, n: u32) -> Space {
        Space::try_new(d, n, 1).expect("invalid series space")
    }

    /// Space where each `c_j` counts `c_weight` towards the degree.
    pub fn weighted(d: usize, n: u32, c_weight: u32) -> Space {
        Space::try_new(d, n, c_weight).expect("invalid series space")
    }

    pub fn try_new(d: usize, n: u32, c_weight: u32) -> Result<Space> {
        if d == 0 || d > MAX_D {
            return Err(KamError::Precondition(format!("d={d} outside 1..={MAX_D}")));
        }
        if n == 0 || n > MAX_N {
            return Err(KamError::Precondition(format!("N={n} outside 1..={MAX_N}")));
        }
        if c_weight == 0 {
            return Err(KamError::Precondition("c weight must be positive".into()));
        }
        Ok(Space { d, n, c_weight })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn c_weight(&self) -> u32 {
        self.c_weight
    }

    pub fn nvars(&self) -> usize {
        3 * self.d
    }

    pub fn with_n(&self, n: u32) -> Space {
        Space::weighted(self.d, n, self.c_weight)
    }

    pub fn degree(&self, m: Mono) -> u32 {
        let d = self.d;
        let mut zw = 0;
        for f in 0..2 * d {
            zw += m.exp(f);
        }
        let mut c = 0;
        for f in 2 * d..3 * d {
            c += m.exp(f);
        }
        zw + self.c_weight * c
    }

    fn check(&self, other: &Space) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(KamError::SpaceMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    W(usize),
    C(usize),
}

impl Var {
    pub fn field(self, d: usize) -> usize {
        match self {
            Var::Z(i) => i,
            Var::W(i) => d + i,
            Var::C(i) => 2 * d + i,
        }
    }
}

/// Packed exponent triple `(α, β, γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Mono(u128);

impl Mono {
    pub const ONE: Mono = Mono(0);

    pub fn new(alpha: &[u32], beta: &[u32], gamma: &[u32]) -> Mono {
        let d = alpha.len();
        assert!(beta.len() == d && gamma.len() == d, "exponent blocks differ in length");
        let mut m = Mono::ONE;
        for (b, block) in [alpha, beta, gamma].iter().enumerate() {
            for (i, &e) in block.iter().enumerate() {
                m = m.with_exp(b * d + i, e);
            }
        }
        m
    }

    pub fn exp(self, field: usize) -> u32 {
        ((self.0 >> (BITS * field as u32)) & MASK) as u32
    }

    pub fn with_exp(self, field: usize, e: u32) -> Mono {
        assert!(e <= MAX_N, "exponent {e} too large");
        let shift = BITS * field as u32;
        Mono((self.0 & !(MASK << shift)) | ((e as u128) << shift))
    }

    pub fn block(self, d: usize, b: usize) -> Vec<u32> {
        (0..d).map(|i| self.exp(b * d + i)).collect()
    }

    pub fn alpha(self, d: usize) -> Vec<u32> {
        self.block(d, 0)
    }

    pub fn beta(self, d: usize) -> Vec<u32> {
        self.block(d, 1)
    }

    pub fn gamma(self, d: usize) -> Vec<u32> {
        self.block(d, 2)
    }

    /// Product of monomials. Callers guarantee the result fits (degree ≤ N).
    pub fn times(self, other: Mono) -> Mono {
        Mono(self.0 + other.0)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(self, other: Mono, nvars: usize) -> Option<Mono> {
        for f in 0..nvars {
            if self.exp(f) < other.exp(f) {
                return None;
            }
        }
        Some(Mono(self.0 - other.0))
    }

    /// Exchange the z- and w-blocks.
    pub fn swap_zw(self, d: usize) -> Mono {
        let mut m = self;
        for i in 0..d {
            m = m.with_exp(i, self.exp(d + i)).with_exp(d + i, self.exp(i));
        }
        m
    }

    pub fn is_diagonal(self, d: usize) -> bool {
        (0..d).all(|i| self.exp(i) == self.exp(d + i))
    }

    pub fn is_nonresonant(self, d: usize) -> bool {
        (0..d).all(|i| self.exp(i) == 0 || self.exp(d + i) == 0)
    }

    pub fn zw_degree(self, d: usize) -> u32 {
        (0..2 * d).map(|f| self.exp(f)).sum()
    }

    pub fn c_degree(self, d: usize) -> u32 {
        (2 * d..3 * d).map(|f| self.exp(f)).sum()
    }

    /// `α − β` as signed integers.
    pub fn k(self, d: usize) -> Vec<i64> {
        (0..d)
            .map(|i| self.exp(i) as i64 - self.exp(d + i) as i64)
            .collect()
    }

    pub fn is_c_only(self, d: usize) -> bool {
        self.zw_degree(d) == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    space: Space,
    terms: BTreeMap<Mono, C64>,
}

impl Series {
    pub fn zero(space: Space) -> Series {
        Series {
            space,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: Space, value: C64) -> Series {
        Series::from_terms(space, [(Mono::ONE, value)])
    }

    pub fn one(space: Space) -> Series {
        Series::constant(space, c64(1.0, 0.0))
    }

    pub fn var(space: Space, v: Var) -> Series {
        let m = Mono::ONE.with_exp(v.field(space.d), 1);
        Series::from_terms(space, [(m, c64(1.0, 0.0))])
    }

    pub fn monomial(space: Space, alpha: &[u32], beta: &[u32], gamma: &[u32], coeff: C64) -> Series {
        Series::from_terms(space, [(Mono::new(alpha, beta, gamma), coeff)])
    }

    /// Sums repeated monomials, then drops zeros and anything above the bound.
    pub fn from_terms<I: IntoIterator<Item = (Mono, C64)>>(space: Space, terms: I) -> Series {
        let mut map: BTreeMap<Mono, C64> = BTreeMap::new();
        for (m, c) in terms {
            if space.degree(m) <= space.n {
                *map.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
        map.retain(|_, c| c.re != 0.0 || c.im != 0.0);
        Series { space, terms: map }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn d(&self) -> usize {
        self.space.d
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Mono, C64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    pub fn coeff(&self, m: Mono) -> C64 {
        self.terms.get(&m).copied().unwrap_or_default()
    }

    pub fn coeff_of(&self, alpha: &[u32], beta: &[u32], gamma: &[u32]) -> C64 {
        self.coeff(Mono::new(alpha, beta, gamma))
    }

    pub fn checked_add(&self, other: &Series) -> Result<Series> {
        self.space.check(&other.space)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(*m).or_insert(C64::new(0.0, 0.0)) += c;
        }
        terms.retain(|_, c| c.re != 0.0 || c.im != 0.0);
        Ok(Series {
            space: self.space,
            terms,
        })
    }

    pub fn checked_sub(&self, other: &Series) -> Result<Series> {
        self.checked_add(&other.scale(c64(-1.0, 0.0)))
    }

    /// Truncated product. The accumulation order is fixed by the sorted
    /// term order, so results are reproducible bit for bit.
    pub fn checked_mul(&self, other: &Series) -> Result<Series> {
        self.space.check(&other.space)?;
        let n = self.space.n;
        if self.is_zero() || other.is_zero() {
            return Ok(Series::zero(self.space));
        }
        let mut rhs: Vec<(u32, Mono, C64)> = other
            .terms
            .iter()
            .map(|(m, c)| (self.space.degree(*m), *m, *c))
            .collect();
        rhs.sort_by_key(|t| t.0);
        let mut acc: FxHashMap<Mono, C64> = FxHashMap::default();
        for (ma, ca) in &self.terms {
            let da = self.space.degree(*ma);
            let limit = n - da;
            for (db, mb, cb) in &rhs {
                if *db > limit {
                    break;
                }
                *acc.entry(ma.times(*mb)).or_insert(C64::new(0.0, 0.0)) += ca * cb;
            }
        }
        let mut terms: BTreeMap<Mono, C64> = acc.into_iter().collect();
        terms.retain(|_, c| c.re != 0.0 || c.im != 0.0);
        Ok(Series {
            space: self.space,
            terms,
        })
    }

    pub fn scale(&self, s: C64) -> Series {
        if s.re == 0.0 && s.im == 0.0 {
            return Series::zero(self.space);
        }
        Series::from_terms(self.space, self.terms().map(|(m, c)| (m, c * s)))
    }

    pub fn scale_re(&self, s: f64) -> Series {
        self.scale(c64(s, 0.0))
    }

    /// Multiply by `coeff · m`.
    pub fn mul_mono(&self, m: Mono, coeff: C64) -> Series {
        Series::from_terms(
            self.space,
            self.terms().map(|(k, c)| (k.times(m), c * coeff)),
        )
    }

    pub fn pow(&self, k: u32) -> Series {
        let mut out = Series::one(self.space);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn filter<F: Fn(Mono, C64) -> bool>(&self, keep: F) -> Series {
        Series {
            space: self.space,
            terms: self
                .terms
                .iter()
                .filter(|(m, c)| keep(**m, **c))
                .map(|(m, c)| (*m, *c))
                .collect(),
        }
    }

    pub fn map_coeffs<F: Fn(Mono, C64) -> C64>(&self, f: F) -> Series {
        Series::from_terms(self.space, self.terms().map(|(m, c)| (m, f(m, c))))
    }

    /// Re-home the series in another space with the same `d`, dropping
    /// monomials that exceed the new bound.
    pub fn to_space(&self, space: Space) -> Series {
        assert_eq!(space.d, self.space.d, "cannot change d");
        Series::from_terms(space, self.terms())
    }

    pub fn homogeneous(&self, degree: u32) -> Series {
        let sp = self.space;
        self.filter(|m, _| sp.degree(m) == degree)
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| self.space.degree(*m)).min()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| self.space.degree(*m)).max()
    }

    pub fn partial(&self, v: Var) -> Series {
        let f = v.field(self.space.d);
        Series::from_terms(
            self.space,
            self.terms().filter_map(|(m, c)| {
                let e = m.exp(f);
                (e > 0).then(|| (m.with_exp(f, e - 1), c * e as f64))
            }),
        )
    }

    /// Evaluate at `point = (z, w, c)` (length `3d`).
    pub fn eval(&self, point: &[C64]) -> C64 {
        let nv = self.space.nvars();
        assert_eq!(point.len(), nv, "point has wrong length");
        let n = self.space.n as usize;
        let powers: Vec<Vec<C64>> = point
            .iter()
            .map(|x| {
                let mut p = Vec::with_capacity(n + 1);
                let mut acc = C64::new(1.0, 0.0);
                for _ in 0..=n {
                    p.push(acc);
                    acc *= x;
                }
                p
            })
            .collect();
        let mut sum = C64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut t = *c;
            for (f, p) in powers.iter().enumerate() {
                let e = m.exp(f) as usize;
                if e > 0 {
                    t *= p[e];
                }
            }
            sum += t;
        }
        sum
    }

    /// Formal composition `f(subs_0, …, subs_{3d−1})` truncated at `N`.
    /// Every substituted series must vanish at the origin.
    pub fn substitute(&self, subs: &[Series]) -> Result<Series> {
        let nv = self.space.nvars();
        if subs.len() != nv {
            return Err(KamError::Precondition(format!(
                "substitution needs {nv} series, got {}",
                subs.len()
            )));
        }
        for (i, s) in subs.iter().enumerate() {
            self.space.check(&s.space)?;
            if s.coeff(Mono::ONE).norm() != 0.0 {
                return Err(KamError::Precondition(format!(
                    "substitution for variable {i} has a constant term"
                )));
            }
        }
        let identity: Vec<bool> = (0..nv)
            .map(|f| {
                let m = Mono::ONE.with_exp(f, 1);
                subs[f].len() == 1 && subs[f].coeff(m) == c64(1.0, 0.0)
            })
            .collect();
        let terms: Vec<(Mono, C64)> = self.terms().collect();
        Ok(subst_rec(self.space, &terms, 0, subs, &identity))
    }

    /// `coeff(α,β,γ) ↦ conj(coeff(β,α,γ))`.
    pub fn sigma_conjugate(&self) -> Series {
        let d = self.space.d;
        Series::from_terms(self.space, self.terms().map(|(m, c)| (m.swap_zw(d), c.conj())))
    }

    pub fn sigma_deviation(&self) -> f64 {
        self.max_abs_diff(&self.sigma_conjugate())
    }

    pub fn is_sigma_symmetric(&self, tol: f64) -> bool {
        self.sigma_deviation() <= tol
    }

    /// `Σ |a| δ^deg` with the plain total degree, so that the value bounds
    /// `|f|` on the closed polydisk of radius `δ` in all `3d` variables.
    pub fn majorant(&self, delta: f64) -> f64 {
        let d = self.space.d;
        self.terms
            .iter()
            .map(|(m, c)| c.norm() * delta.powi((m.zw_degree(d) + m.c_degree(d)) as i32))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Series) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.coeff(*m)).norm());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Drop coefficients with modulus at most `tol`.
    pub fn chop(&self, tol: f64) -> Series {
        self.filter(|_, c| c.norm() > tol)
    }

    /// Monomials in display order: by degree, then by exponents.
    pub fn sorted_terms(&self) -> Vec<(Mono, C64)> {
        let d = self.space.d;
        let mut v: Vec<(Mono, C64)> = self.terms().collect();
        v.sort_by_key(|(m, _)| {
            (
                self.space.degree(*m),
                m.alpha(d),
                m.beta(d),
                m.gamma(d),
            )
        });
        v
    }

    /// Text form: a `space` header and one `α | β | γ | re im` line per monomial.
    pub fn to_text(&self) -> String {
        let sp = self.space;
        let mut out = String::new();
        if sp.c_weight == 1 {
            let _ = writeln!(out, "space d={} N={}", sp.d, sp.n);
        } else {
            let _ = writeln!(out, "space d={} N={} cweight={}", sp.d, sp.n, sp.c_weight);
        }
        for (m, c) in self.sorted_terms() {
            let _ = writeln!(
                out,
                "{} | {} | {} | {} {}",
                join(&m.alpha(sp.d)),
                join(&m.beta(sp.d)),
                join(&m.gamma(sp.d)),
                c.re,
                c.im
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Series> {
        let mut space: Option<Space> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("space") {
                if space.is_some() {
                    return Err(KamError::parse(line_no, "duplicate space header"));
                }
                space = Some(parse_header(rest, line_no)?);
                continue;
            }
            let sp = space.ok_or_else(|| KamError::parse(line_no, "monomial before space header"))?;
            terms.push(parse_monomial(line, sp, line_no)?);
        }
        let sp = space.ok_or_else(|| KamError::parse(1, "missing space header"))?;
        Ok(Series::from_terms(sp, terms))
    }
}

fn join(v: &[u32]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_header(rest: &str, line: usize) -> Result<Space> {
    let mut d = None;
    let mut n = None;
    let mut cw = 1;
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| KamError::parse(line, format!("bad header token '{tok}'")))?;
        let val: u32 = val
            .parse()
            .map_err(|_| KamError::parse(line, format!("bad number in '{tok}'")))?;
        match key {
            "d" => d = Some(val as usize),
            "N" => n = Some(val),
            "cweight" => cw = val,
            _ => return Err(KamError::parse(line, format!("unknown header key '{key}'"))),
        }
    }
    let d = d.ok_or_else(|| KamError::parse(line, "header lacks d"))?;
    let n = n.ok_or_else(|| KamError::parse(line, "header lacks N"))?;
    Space::try_new(d, n, cw).map_err(|e| KamError::parse(line, e.to_string()))
}

pub(crate) fn parse_monomial(line: &str, sp: Space, line_no: usize) -> Result<(Mono, C64)> {
    let parts: Vec<&str> = line.split('|').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(KamError::parse(line_no, "expected 'alpha | beta | gamma | re im'"));
    }
    let mut blocks = Vec::new();
    for p in &parts[..3] {
        let v: std::result::Result<Vec<u32>, _> = p.split(',').map(|s| s.trim().parse::<u32>()).collect();
        let v = v.map_err(|_| KamError::parse(line_no, format!("bad exponent vector '{p}'")))?;
        if v.len() != sp.d {
            return Err(KamError::parse(line_no, format!("vector '{p}' is not of length {}", sp.d)));
        }
        if v.iter().any(|&e| e > MAX_N) {
            return Err(KamError::parse(line_no, "exponent too large"));
        }
        blocks.push(v);
    }
    let nums: Vec<&str> = parts[3].split_whitespace().collect();
    if nums.len() != 2 {
        return Err(KamError::parse(line_no, "coefficient must be 're im'"));
    }
    let re: f64 = nums[0]
        .parse()
        .map_err(|_| KamError::parse(line_no, format!("bad real part '{}'", nums[0])))?;
    let im: f64 = nums[1]
        .parse()
        .map_err(|_| KamError::parse(line_no, format!("bad imaginary part '{}'", nums[1])))?;
    let m = Mono::new(&blocks[0], &blocks[1], &blocks[2]);
    if sp.degree(m) > sp.n {
        return Err(KamError::parse(line_no, "monomial exceeds the truncation bound"));
    }
    Ok((m, c64(re, im)))
}

// Horner scheme, one variable at a time.
fn subst_rec(space: Space, terms: &[(Mono, C64)], field: usize, subs: &[Series], identity: &[bool]) -> Series {
    if terms.is_empty() {
        return Series::zero(space);
    }
    if field == space.nvars() {
        let total: C64 = terms.iter().map(|(_, c)| *c).sum();
        return Series::constant(space, total);
    }
    let mut groups: BTreeMap<u32, Vec<(Mono, C64)>> = BTreeMap::new();
    for (m, c) in terms {
        groups
            .entry(m.exp(field))
            .or_default()
            .push((m.with_exp(field, 0), *c));
    }
    if identity[field] {
        let mut out = Series::zero(space);
        for (e, group) in &groups {
            let inner = subst_rec(space, group, field + 1, subs, identity);
            out = &out + &inner.mul_mono(Mono::ONE.with_exp(field, *e), c64(1.0, 0.0));
        }
        return out;
    }
    let top = *groups.keys().next_back().unwrap();
    let mut acc = Series::zero(space);
    for e in (0..=top).rev() {
        if !acc.is_zero() {
            acc = &acc * &subs[field];
        }
        if let Some(group) = groups.get(&e) {
            acc = &acc + &subst_rec(space, group, field + 1, subs, identity);
        }
    }
    acc
}

impl Add for &Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        self.checked_add(rhs).expect("series space mismatch")
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        self.checked_sub(rhs).expect("series space mismatch")
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, rhs: &Series) -> Series {
        self.checked_mul(rhs).expect("series space mismatch")
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale_re(-1.0)
    }
}

/// Random series with `terms` monomials of degree at most `max_degree`,
/// coefficients uniform in the unit square. Used by tests and benchmarks.
pub fn random_series<R: rand::Rng>(space: Space, max_degree: u32, terms: usize, rng: &mut R) -> Series {
    let d = space.d();
    let top = max_degree.min(space.n());
    let mut out = Vec::with_capacity(terms);
    while out.len() < terms {
        let mut m = Mono::ONE;
        let target = rng.random_range(0..=top);
        let mut deg = 0;
        while deg < target {
            let f = rng.random_range(0..3 * d);
            let step = if f >= 2 * d { space.c_weight() } else { 1 };
            if deg + step > target {
                break;
            }
            m = m.with_exp(f, m.exp(f) + 1);
            deg += step;
        }
        let c = c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        out.push((m, c));
    }
    Series::from_terms(space, out)
}

/// Random σ-symmetric series, `(f + σf)/2` of a random `f`.
pub fn random_sigma_series<R: rand::Rng>(space: Space, max_degree: u32, terms: usize, rng: &mut R) -> Series {
    let f = random_series(space, max_degree, terms, rng);
    (&f + &f.sigma_conjugate()).scale_re(0.5)
}

/// Sum of a list of series in one space.
pub fn sum_all<'a, I: IntoIterator<Item = &'a Series>>(space: Space, items: I) -> Series {
    let mut out = Series::zero(space);
    for s in items {
        out = &out + s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp1(n: u32) -> Space {
        Space::new(1, n)
    }

    fn z(sp: Space) -> Series {
        Series::var(sp, Var::Z(0))
    }

    fn w(sp: Space) -> Series {
        Series::var(sp, Var::W(0))
    }

    #[test]
    fn monomial_product() {
        let sp = sp1(4);
        let zw = &z(sp) * &w(sp);
        let sq = &zw * &zw;
        assert_eq!(sq.len(), 1);
        assert_eq!(sq.coeff_of(&[2], &[2], &[0]), c64(1.0, 0.0));
    }

    #[test]
    fn product_of_sigma_symmetric_linear_form() {
        // (i z − i w)^2 = −z² + 2zw − w², expanded by hand.
        let sp = sp1(4);
        let f = &z(sp).scale(c64(0.0, 1.0)) - &w(sp).scale(c64(0.0, 1.0));
        assert!(f.is_sigma_symmetric(0.0));
        let sq = &f * &f;
        assert_eq!(sq.coeff_of(&[2], &[0], &[0]), c64(-1.0, 0.0));
        assert_eq!(sq.coeff_of(&[1], &[1], &[0]), c64(2.0, 0.0));
        assert_eq!(sq.coeff_of(&[0], &[2], &[0]), c64(-1.0, 0.0));
        assert_eq!(sq.len(), 3);
        assert!(sq.is_sigma_symmetric(0.0));
    }

    #[test]
    fn truncation_drops_high_degree() {
        let sp = sp1(4);
        let zn = z(sp).pow(4);
        assert!((&zn * &z(sp)).is_zero());
    }

    #[test]
    fn substitution_examples() {
        let sp = sp1(4);
        let zw = &z(sp) * &w(sp);
        let cvar = Series::var(sp, Var::C(0));
        let out = zw.substitute(&[z(sp), &w(sp) + &z(sp), cvar.clone()]).unwrap();
        let expect = &zw + &z(sp).pow(2);
        assert_eq!(out.max_abs_diff(&expect), 0.0);

        // z² with z ↦ z + εz²: z² + 2εz³ + ε²z⁴.
        let eps = 0.3;
        let f = z(sp).pow(2);
        let sub = &z(sp) + &z(sp).pow(2).scale_re(eps);
        let out = f.substitute(&[sub, w(sp), cvar.clone()]).unwrap();
        assert!((out.coeff_of(&[2], &[0], &[0]) - c64(1.0, 0.0)).norm() < 1e-15);
        assert!((out.coeff_of(&[3], &[0], &[0]) - c64(2.0 * eps, 0.0)).norm() < 1e-15);
        assert!((out.coeff_of(&[4], &[0], &[0]) - c64(eps * eps, 0.0)).norm() < 1e-15);
        assert_eq!(out.len(), 3);

        let same = f.substitute(&[z(sp), w(sp), cvar]).unwrap();
        assert_eq!(same, f);
    }

    #[test]
    fn substitution_rejects_constant_terms() {
        let sp = sp1(3);
        let shifted = &z(sp) + &Series::one(sp);
        let err = z(sp)
            .substitute(&[shifted, w(sp), Series::var(sp, Var::C(0))])
            .unwrap_err();
        assert_eq!(err.class(), "precondition");
    }

    #[test]
    fn derivatives() {
        let sp = sp1(4);
        let f = &z(sp).pow(2) * &w(sp);
        let df = f.partial(Var::Z(0));
        assert_eq!(df.coeff_of(&[1], &[1], &[0]), c64(2.0, 0.0));
        assert_eq!(df.len(), 1);
        assert!(z(sp).pow(3).partial(Var::W(0)).is_zero());
    }

    #[test]
    fn sigma_examples() {
        let sp = sp1(4);
        let a = c64(2.0, 3.0);
        let f = &z(sp).pow(3).scale(a) + &w(sp).pow(3).scale(a.conj());
        assert!(f.is_sigma_symmetric(0.0));
        let zw = &z(sp) * &w(sp);
        assert!(zw.is_sigma_symmetric(0.0));
        assert!(!zw.scale(c64(0.0, 1.0)).is_sigma_symmetric(0.0));
    }

    #[test]
    fn majorant_examples() {
        let sp = sp1(4);
        assert_eq!(z(sp).majorant(0.5), 0.5);
        assert_eq!(Series::zero(sp).majorant(0.5), 0.0);
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let a = Series::one(sp1(3));
        let b = Series::one(sp1(4));
        assert_eq!(a.checked_mul(&b).unwrap_err().class(), "precondition");
    }

    #[test]
    fn text_round_trip() {
        let sp = Space::new(2, 5);
        let f = Series::from_terms(
            sp,
            [
                (Mono::new(&[1, 0], &[0, 2], &[1, 0]), c64(0.125, -3.5)),
                (Mono::new(&[0, 0], &[0, 0], &[0, 1]), c64(1e-17, 0.0)),
            ],
        );
        let text = f.to_text();
        let back = Series::parse(&text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "space d=1 N=3\n1 | 0 | 0 | 1.0 0.0\n1,2 | 0 | 0 | 1 0\n";
        match Series::parse(bad).unwrap_err() {
            KamError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn weighted_degree() {
        let sp = Space::weighted(1, 4, 2);
        let c = Series::var(sp, Var::C(0));
        assert_eq!(c.pow(2).len(), 1);
        assert!(c.pow(3).is_zero());
    }
}
