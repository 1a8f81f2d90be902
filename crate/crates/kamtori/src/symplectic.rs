//! Near-identity symplectic maps `(z, w) ↦ (z + R, w + T)` on truncated jets.
//!
//! Maps come from a generating function `f(z, w')` through
//! `z' = z + ∂_{w'} f`, `w = w' + ∂_z f`, or from the time-one flow of
//! `ż = ∂_w f`, `ẇ = −∂_z f`. For that flow `g∘φ = exp(L_f) g` with
//! `L_f g = {g, f}` and `{g, f} = Σ ∂_z g ∂_w f − ∂_w g ∂_z f`.
//! The c-variables are passive parameters throughout.

use nalgebra::DMatrix;

use crate::error::{KamError, Result};
use crate::series::{c64, Mono, Series, Space, Var, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Identity,
    Generating,
    Lie,
    Composite,
    Inverse,
    Explicit,
}

#[derive(Clone, Debug)]
pub struct SymplecticMap {
    space: Space,
    pub r: Vec<Series>,
    pub t: Vec<Series>,
    pub provenance: Provenance,
}

/// `{f, g} = Σ_i ∂_{z_i} f ∂_{w_i} g − ∂_{w_i} f ∂_{z_i} g`.
pub fn poisson(f: &Series, g: &Series) -> Series {
    let mut out = Series::zero(f.space());
    for i in 0..f.d() {
        let a = &f.partial(Var::Z(i)) * &g.partial(Var::W(i));
        let b = &f.partial(Var::W(i)) * &g.partial(Var::Z(i));
        out = &out + &(&a - &b);
    }
    out
}

const LIE_MAX_TERMS: usize = 400;
const LIE_REL_TOL: f64 = 1e-18;

/// `exp(L_f) h = Σ_k L_f^k h / k!`. Stops when a term vanishes, which
/// happens after finitely many terms when `f` has no quadratic part, or
/// once terms drop below `1e-18` relative to the sum.
pub fn lie_series(h: &Series, f: &Series) -> Series {
    let mut acc = h.clone();
    let mut term = h.clone();
    for k in 1..LIE_MAX_TERMS {
        term = poisson(&term, f).scale_re(1.0 / k as f64);
        if term.is_zero() {
            break;
        }
        acc = &acc + &term;
        if term.max_abs() <= LIE_REL_TOL * acc.max_abs().max(1.0) {
            break;
        }
    }
    acc
}

fn var_list(space: Space) -> Vec<Series> {
    let d = space.d();
    let mut v = Vec::with_capacity(3 * d);
    for i in 0..d {
        v.push(Series::var(space, Var::Z(i)));
    }
    for i in 0..d {
        v.push(Series::var(space, Var::W(i)));
    }
    for i in 0..d {
        v.push(Series::var(space, Var::C(i)));
    }
    v
}

fn linear_coeff(s: &Series, field: usize) -> C64 {
    s.coeff(Mono::ONE.with_exp(field, 1))
}

fn matrix_apply(m: &DMatrix<C64>, v: &[Series], space: Space) -> Vec<Series> {
    (0..m.nrows())
        .map(|i| {
            let mut out = Series::zero(space);
            for (j, vj) in v.iter().enumerate() {
                let a = m[(i, j)];
                if a != c64(0.0, 0.0) {
                    out = &out + &vj.scale(a);
                }
            }
            out
        })
        .collect()
}

/// Solves `M y = base − Q(y)` where `y` replaces the variables in `slots`
/// inside `Q`. `Q` must not contain terms linear in those slots alone, so
/// each sweep fixes at least one more degree and the loop ends after at most
/// `N + 1` sweeps.
fn implicit_solve(space: Space, slots: &[usize], m: DMatrix<C64>, base: &[Series], q: &[Series]) -> Result<Vec<Series>> {
    let minv = m
        .try_inverse()
        .ok_or_else(|| KamError::Precondition("linear part of the implicit equation is singular".into()))?;
    let vars = var_list(space);
    let mut y = matrix_apply(&minv, base, space);
    for _ in 0..=space.n() + 1 {
        let mut subs = vars.clone();
        for (s, yi) in slots.iter().zip(&y) {
            subs[*s] = yi.clone();
        }
        let qy: Vec<Series> = q.iter().map(|qi| qi.substitute(&subs)).collect::<Result<_>>()?;
        let rhs: Vec<Series> = base.iter().zip(&qy).map(|(b, v)| b - v).collect();
        let next = matrix_apply(&minv, &rhs, space);
        let change = next
            .iter()
            .zip(&y)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        y = next;
        if change == 0.0 {
            return Ok(y);
        }
    }
    let scale = y.iter().map(|s| s.max_abs()).fold(1.0, f64::max);
    // Rounding can leave a last-digit flicker; accept it and reject growth.
    let mut subs = vars;
    for (s, yi) in slots.iter().zip(&y) {
        subs[*s] = yi.clone();
    }
    let qy: Vec<Series> = q.iter().map(|qi| qi.substitute(&subs)).collect::<Result<_>>()?;
    let rhs: Vec<Series> = base.iter().zip(&qy).map(|(b, v)| b - v).collect();
    let next = matrix_apply(&minv, &rhs, space);
    let change = next
        .iter()
        .zip(&y)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    if change <= 1e-13 * scale {
        Ok(next)
    } else {
        Err(KamError::Contraction(format!(
            "implicit solve did not settle: last change {change:e}"
        )))
    }
}

fn check_order(f: &Series, what: &str) -> Result<()> {
    match f.min_degree() {
        Some(m) if m < 2 => Err(KamError::Precondition(format!(
            "{what} must vanish to second order, found a term of degree {m}"
        ))),
        _ => Ok(()),
    }
}

impl SymplecticMap {
    pub fn identity(space: Space) -> SymplecticMap {
        let d = space.d();
        SymplecticMap {
            space,
            r: vec![Series::zero(space); d],
            t: vec![Series::zero(space); d],
            provenance: Provenance::Identity,
        }
    }

    pub fn from_parts(space: Space, r: Vec<Series>, t: Vec<Series>, provenance: Provenance) -> Result<SymplecticMap> {
        if r.len() != space.d() || t.len() != space.d() {
            return Err(KamError::Precondition("map needs d components per block".into()));
        }
        for s in r.iter().chain(&t) {
            if s.space() != space {
                return Err(KamError::SpaceMismatch("map component".into()));
            }
            if s.coeff(Mono::ONE) != c64(0.0, 0.0) {
                return Err(KamError::Precondition("map must fix the origin".into()));
            }
        }
        Ok(SymplecticMap { space, r, t, provenance })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn d(&self) -> usize {
        self.space.d()
    }

    /// `[z + R, w + T]`.
    pub fn components(&self) -> Vec<Series> {
        let d = self.d();
        let mut out = Vec::with_capacity(2 * d);
        for i in 0..d {
            out.push(&Series::var(self.space, Var::Z(i)) + &self.r[i]);
        }
        for i in 0..d {
            out.push(&Series::var(self.space, Var::W(i)) + &self.t[i]);
        }
        out
    }

    fn substitution(&self) -> Vec<Series> {
        let mut subs = self.components();
        for i in 0..self.d() {
            subs.push(Series::var(self.space, Var::C(i)));
        }
        subs
    }

    /// `h∘Z`.
    pub fn pullback(&self, h: &Series) -> Result<Series> {
        h.substitute(&self.substitution())
    }

    /// `self∘other`, i.e. `other` is applied first.
    pub fn compose(&self, other: &SymplecticMap) -> Result<SymplecticMap> {
        if self.space != other.space {
            return Err(KamError::SpaceMismatch("compose".into()));
        }
        let subs = other.substitution();
        let mut r = Vec::with_capacity(self.d());
        let mut t = Vec::with_capacity(self.d());
        for i in 0..self.d() {
            r.push(&other.r[i] + &self.r[i].substitute(&subs)?);
            t.push(&other.t[i] + &self.t[i].substitute(&subs)?);
        }
        Ok(SymplecticMap {
            space: self.space,
            r,
            t,
            provenance: Provenance::Composite,
        })
    }

    /// Matrix of the `(z, w)`-linear part of `[z + R, w + T]`.
    pub fn linear_part(&self) -> DMatrix<C64> {
        let d = self.d();
        let comps = self.components();
        DMatrix::from_fn(2 * d, 2 * d, |i, j| linear_coeff(&comps[i], j))
    }

    pub fn invert(&self) -> Result<SymplecticMap> {
        let d = self.d();
        let a = self.linear_part();
        let vars = var_list(self.space);
        let comps = self.components();
        let lin = matrix_apply(&a, &vars[..2 * d], self.space);
        let q: Vec<Series> = comps.iter().zip(&lin).map(|(c, l)| c - l).collect();
        let slots: Vec<usize> = (0..2 * d).collect();
        let y = implicit_solve(self.space, &slots, a, &vars[..2 * d], &q)?;
        let r = (0..d).map(|i| &y[i] - &vars[i]).collect();
        let t = (0..d).map(|i| &y[d + i] - &vars[d + i]).collect();
        Ok(SymplecticMap {
            space: self.space,
            r,
            t,
            provenance: Provenance::Inverse,
        })
    }

    /// Image of `(z, w)` at parameter `c`.
    pub fn eval(&self, z: &[C64], w: &[C64], c: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let point: Vec<C64> = z.iter().chain(w).chain(c).copied().collect();
        let zs = (0..self.d()).map(|i| z[i] + self.r[i].eval(&point)).collect();
        let ws = (0..self.d()).map(|i| w[i] + self.t[i].eval(&point)).collect();
        (zs, ws)
    }

    /// Series entries `∂(component_i)/∂(var_j)` for `i, j < 2d`.
    pub fn jacobian_series(&self) -> Vec<Vec<Series>> {
        let d = self.d();
        let comps = self.components();
        comps
            .iter()
            .map(|c| {
                (0..2 * d)
                    .map(|j| {
                        let v = if j < d { Var::Z(j) } else { Var::W(j - d) };
                        c.partial(v)
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest coefficient of the bracket relations
    /// `{z'_i, w'_j} = δ_ij`, `{z'_i, z'_j} = {w'_i, w'_j} = 0`, compared
    /// through degree `N − 1` where the truncated data is complete.
    pub fn symplectic_defect(&self) -> f64 {
        let d = self.d();
        let comps = self.components();
        let top = self.space.n() - 1;
        let sp = self.space;
        let mut worst: f64 = 0.0;
        for i in 0..2 * d {
            for j in i + 1..2 * d {
                let mut b = poisson(&comps[i], &comps[j]);
                if i < d && j == i + d {
                    b = &b - &Series::one(sp);
                }
                let low = b.filter(|m, _| sp.degree(m) <= top);
                worst = worst.max(low.max_abs());
            }
        }
        worst
    }

    /// Deviation from `σ∘Z∘σ = Z`, i.e. of `R` from the σ-conjugate of `T`.
    pub fn sigma_defect(&self) -> f64 {
        (0..self.d())
            .map(|i| self.r[i].max_abs_diff(&self.t[i].sigma_conjugate()))
            .fold(0.0, f64::max)
    }

    /// Smallest degree present in `R` or `T`; `None` for the identity.
    pub fn min_order(&self) -> Option<u32> {
        self.r.iter().chain(&self.t).filter_map(|s| s.min_degree()).min()
    }

    pub fn max_abs_diff(&self, other: &SymplecticMap) -> f64 {
        self.r
            .iter()
            .zip(&other.r)
            .chain(self.t.iter().zip(&other.t))
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Largest majorant of a component of `Z − id` at radius `delta`.
    pub fn displacement_majorant(&self, delta: f64) -> f64 {
        self.r
            .iter()
            .chain(&self.t)
            .map(|s| s.majorant(delta))
            .fold(0.0, f64::max)
    }

    /// Restrict the parameters `c` to fixed values, keeping the space.
    pub fn at_parameter(&self, c: &[C64]) -> Result<SymplecticMap> {
        let d = self.d();
        let fix = |s: &Series| -> Series {
            let mut out = Vec::new();
            for (m, coeff) in s.terms() {
                let mut v = coeff;
                let mut base = m;
                for i in 0..d {
                    let e = m.exp(2 * d + i);
                    if e > 0 {
                        v *= c[i].powu(e);
                        base = base.with_exp(2 * d + i, 0);
                    }
                }
                out.push((base, v));
            }
            Series::from_terms(self.space, out)
        };
        let r: Vec<Series> = self.r.iter().map(fix).collect();
        let t: Vec<Series> = self.t.iter().map(fix).collect();
        SymplecticMap::from_parts(self.space, r, t, self.provenance)
    }
}

/// Map generated by `f(z, w', c)`: `z' = z + ∂_{w'} f`, `w = w' + ∂_z f`.
pub fn from_generating(f: &Series) -> Result<SymplecticMap> {
    check_order(f, "generating function")?;
    let space = f.space();
    let d = space.d();
    let vars = var_list(space);
    // ∂_z f(z, w') = B w' + rest; solve (I + B) w' = w − rest(z, w').
    let gz: Vec<Series> = (0..d).map(|i| f.partial(Var::Z(i))).collect();
    let b = DMatrix::from_fn(d, d, |i, j| linear_coeff(&gz[i], d + j));
    let m = DMatrix::identity(d, d) + &b;
    let lin = matrix_apply(&b, &vars[d..2 * d], space);
    let rest: Vec<Series> = gz.iter().zip(&lin).map(|(g, l)| g - l).collect();
    let slots: Vec<usize> = (d..2 * d).collect();
    let wprime = implicit_solve(space, &slots, m, &vars[d..2 * d], &rest)?;
    let mut subs = vars.clone();
    for i in 0..d {
        subs[d + i] = wprime[i].clone();
    }
    let mut r = Vec::with_capacity(d);
    let mut t = Vec::with_capacity(d);
    for i in 0..d {
        r.push(f.partial(Var::W(i)).substitute(&subs)?);
        t.push(&wprime[i] - &vars[d + i]);
    }
    Ok(SymplecticMap {
        space,
        r,
        t,
        provenance: Provenance::Generating,
    })
}

/// Tolerance on the gradient check in [`to_generating`].
pub const EXACTNESS_TOL: f64 = 1e-12;

/// The unique generating function with no `(z, w')`-free terms.
pub fn to_generating(map: &SymplecticMap) -> Result<Series> {
    let space = map.space();
    let d = space.d();
    let vars = var_list(space);
    // w' = w + T(z, w): solve for w = Ŵ(z, w').
    let b = DMatrix::from_fn(d, d, |i, j| linear_coeff(&map.t[i], d + j));
    let m = DMatrix::identity(d, d) + &b;
    let lin = matrix_apply(&b, &vars[d..2 * d], space);
    let rest: Vec<Series> = map.t.iter().zip(&lin).map(|(t, l)| t - l).collect();
    let slots: Vec<usize> = (d..2 * d).collect();
    let what = implicit_solve(space, &slots, m, &vars[d..2 * d], &rest)?;
    let mut subs = vars.clone();
    for i in 0..d {
        subs[d + i] = what[i].clone();
    }
    let gz: Vec<Series> = (0..d).map(|i| &what[i] - &vars[d + i]).collect();
    let gw: Vec<Series> = map.r.iter().map(|r| r.substitute(&subs)).collect::<Result<_>>()?;
    // Euler: (|α| + |β|) f = Σ z ∂_z f + w' ∂_{w'} f on each monomial.
    let mut euler = Series::zero(space);
    for i in 0..d {
        euler = &euler + &(&vars[i] * &gz[i]);
        euler = &euler + &(&vars[d + i] * &gw[i]);
    }
    let f = Series::from_terms(
        space,
        euler.terms().filter_map(|(m, c)| {
            let k = m.zw_degree(d);
            (k > 0).then(|| (m, c / k as f64))
        }),
    );
    let top = space.n() - 1;
    let mut residual: f64 = 0.0;
    for i in 0..d {
        let ez = &f.partial(Var::Z(i)) - &gz[i];
        let ew = &f.partial(Var::W(i)) - &gw[i];
        for e in [ez, ew] {
            let low = e.filter(|m, _| space.degree(m) <= top);
            residual = residual.max(low.max_abs());
        }
    }
    if residual > EXACTNESS_TOL {
        return Err(KamError::Precondition(format!(
            "map is not exact symplectic: closedness residual {residual:e}"
        )));
    }
    Ok(f)
}

/// Time-one map of `ż = ∂_w f`, `ẇ = −∂_z f`.
pub fn lie_time_one(f: &Series) -> Result<SymplecticMap> {
    check_order(f, "Lie generator")?;
    let space = f.space();
    let d = space.d();
    let mut r = Vec::with_capacity(d);
    let mut t = Vec::with_capacity(d);
    for i in 0..d {
        let z = Series::var(space, Var::Z(i));
        let w = Series::var(space, Var::W(i));
        r.push(&lie_series(&z, f) - &z);
        t.push(&lie_series(&w, f) - &w);
    }
    Ok(SymplecticMap {
        space,
        r,
        t,
        provenance: Provenance::Lie,
    })
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    /// `(ε, D(ε))` rows.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `log D` against `log ε`; `None` when every
    /// difference is exactly zero.
    pub slope: Option<f64>,
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `D(ε)` = displacement majorant of `lie(εf)^{-1} ∘ gen(εf)` at `radius`.
pub fn compare_gen_vs_lie(f: &Series, eps: &[f64], radius: f64) -> Result<CompareReport> {
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let g = f.scale_re(e);
        let gen = from_generating(&g)?;
        let lie = lie_time_one(&g)?;
        let diff = lie.invert()?.compose(&gen)?;
        rows.push((e, diff.displacement_majorant(radius)));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let slope = if ys.iter().all(|y| *y == 0.0) {
        None
    } else {
        loglog_slope(&xs, &ys)
    };
    Ok(CompareReport { rows, slope })
}
