//! Birkhoff normal form, degeneracy rank and Rüssmann transversality.
//!
//! `H = ⟨ω₀, zw⟩ + O³` is conjugated degree by degree. At degree `m` the
//! non-diagonal part `P` is removed by the generator `χ = (𝒟^{ω₀})^{-1} P`,
//! since `{⟨ω₀, zw⟩, χ} = −𝒟^{ω₀} χ`. Diagonal terms accumulate into
//! `N(zw)`. Action polynomials such as `N(r)` are stored as c-only series,
//! with `r^a` written `c^a`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{KamError, Result};
use crate::series::{c64, Mono, Series, Space, Var};
use crate::smalldiv::{dot_k, knorm};
use crate::symplectic::{from_generating, lie_series, lie_time_one, SymplecticMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Lie,
    Generating,
}

impl std::str::FromStr for Method {
    type Err = KamError;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "lie" => Ok(Method::Lie),
            "generating" => Ok(Method::Generating),
            _ => Err(KamError::Precondition(format!("unknown method '{s}'"))),
        }
    }
}

/// Checks the shape `⟨ω₀, zw⟩ + O³` with no c-dependence.
pub fn check_hamiltonian(h: &Series, omega0: &[f64]) -> Result<()> {
    let d = h.d();
    if omega0.len() != d {
        return Err(KamError::Precondition(format!("omega has {} entries, d={d}", omega0.len())));
    }
    for (m, c) in h.terms() {
        if m.c_degree(d) > 0 {
            return Err(KamError::Precondition(format!(
                "Hamiltonian depends on c at alpha={:?} beta={:?} gamma={:?}",
                m.alpha(d),
                m.beta(d),
                m.gamma(d)
            )));
        }
        let deg = m.zw_degree(d);
        if deg < 2 {
            return Err(KamError::Precondition(format!(
                "Hamiltonian has a term of degree {deg} at alpha={:?} beta={:?}",
                m.alpha(d),
                m.beta(d)
            )));
        }
        if deg == 2 {
            let ok = m.is_diagonal(d)
                && (0..d).any(|i| m.exp(i) == 1 && (c - c64(omega0[i], 0.0)).norm() <= 1e-13);
            if !ok {
                return Err(KamError::Precondition(format!(
                    "quadratic part must be <omega0, zw>; offending alpha={:?} beta={:?}",
                    m.alpha(d),
                    m.beta(d)
                )));
            }
        }
    }
    for i in 0..d {
        let mut a = vec![0; d];
        a[i] = 1;
        if h.coeff_of(&a, &a, &vec![0; d]) == c64(0.0, 0.0) && omega0[i] != 0.0 {
            return Err(KamError::Precondition(format!(
                "quadratic part must be <omega0, zw>; missing z{i}w{i}"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BnfResult {
    /// `N(zw)` as a diagonal series through the requested order.
    pub n_diag: Series,
    /// `N(r)` as a c-only series in the same space.
    pub n_actions: Series,
    pub normalizer: SymplecticMap,
    /// `H∘Z` as computed by the elimination.
    pub transformed: Series,
    /// Lowest degree at which `H∘Z − N(zw)` has a term (`N + 1` if none).
    pub residual_order: u32,
    pub order: u32,
}

/// `z^a w^a ↦ c^a`, dropping non-diagonal terms, into `target`.
pub fn diag_to_actions(f: &Series, target: Space) -> Series {
    let d = f.d();
    let zeros = vec![0; d];
    Series::from_terms(
        target,
        f.terms()
            .filter(|(m, _)| m.is_diagonal(d) && m.c_degree(d) == 0)
            .map(|(m, c)| (Mono::new(&zeros, &zeros, &m.alpha(d)), c)),
    )
}

/// `c^a ↦ z^a w^a` for a c-only series.
pub fn actions_to_diag(f: &Series, target: Space) -> Series {
    let d = f.d();
    let zeros = vec![0; d];
    Series::from_terms(
        target,
        f.terms().map(|(m, c)| {
            let g = m.gamma(d);
            (Mono::new(&g, &g, &zeros), c)
        }),
    )
}

fn eliminate(chunk: &Series, omega0: &[f64]) -> Result<Series> {
    let d = chunk.d();
    let mut out = Vec::new();
    for (m, c) in chunk.terms() {
        let k = m.k(d);
        let div = dot_k(&k, omega0);
        if div == 0.0 {
            return Err(KamError::Resonance { k });
        }
        out.push((m, c / div));
    }
    Ok(Series::from_terms(chunk.space(), out))
}

/// Normalize through degree `order`. With `shuffle = Some(seed)` every
/// monomial is eliminated by its own generator, in a seeded random order.
pub fn birkhoff_normal_form(h: &Series, omega0: &[f64], order: u32, method: Method, shuffle: Option<u64>) -> Result<BnfResult> {
    check_hamiltonian(h, omega0)?;
    let space = h.space();
    let d = space.d();
    if order > space.n() {
        return Err(KamError::Precondition(format!("order {order} exceeds N={}", space.n())));
    }
    let mut rng = shuffle.map(ChaCha8Rng::seed_from_u64);
    let mut cur = h.clone();
    let mut normalizer = SymplecticMap::identity(space);
    for m in 3..=order {
        let part = cur.filter(|mono, _| mono.zw_degree(d) == m && !mono.is_diagonal(d));
        if part.is_zero() {
            continue;
        }
        let chunks: Vec<Series> = match rng.as_mut() {
            None => vec![part],
            Some(r) => {
                let mut terms: Vec<_> = part.terms().collect();
                terms.shuffle(r);
                terms
                    .into_iter()
                    .map(|t| Series::from_terms(space, [t]))
                    .collect()
            }
        };
        for chunk in chunks {
            // Same-degree monomials do not interact at degree m, so the
            // coefficient is re-read from the current Hamiltonian.
            let live = cur.filter(|mono, _| chunk.coeff(mono) != c64(0.0, 0.0));
            let chi = eliminate(&live, omega0)?;
            match method {
                Method::Lie => {
                    cur = lie_series(&cur, &chi);
                    normalizer = normalizer.compose(&lie_time_one(&chi)?)?;
                }
                Method::Generating => {
                    let phi = from_generating(&chi)?;
                    cur = phi.pullback(&cur)?;
                    normalizer = normalizer.compose(&phi)?;
                }
            }
        }
        // What is left at degree m is round-off.
        cur = cur.filter(|mono, _| mono.zw_degree(d) != m || mono.is_diagonal(d));
    }
    let n_diag = cur.filter(|mono, _| mono.is_diagonal(d) && mono.zw_degree(d) <= order);
    let residual = &cur - &n_diag;
    let residual_order = residual.min_degree().unwrap_or(space.n() + 1);
    Ok(BnfResult {
        n_actions: diag_to_actions(&n_diag, space),
        n_diag,
        normalizer,
        transformed: cur,
        residual_order,
        order,
    })
}

/// `∇N` as c-series.
pub fn gradient_actions(n_actions: &Series) -> Vec<Series> {
    (0..n_actions.d()).map(|i| n_actions.partial(Var::C(i))).collect()
}

#[derive(Clone, Debug)]
pub struct DegeneracyReport {
    pub j: usize,
    pub directions: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Highest action degree of `∂_r N` that entered the matrix.
    pub certified_order: u32,
}

pub const RANK_REL_THRESHOLD: f64 = 1e-9;

/// Rows: for each monomial `r^m` with `|m| ≥ 1`, the vector of its
/// coefficients in `∂_{r_1} N, …, ∂_{r_d} N`. `γ` is degenerate when it lies
/// in the kernel, i.e. `⟨∂_r N(r), γ⟩` does not depend on `r`. `j = d` for a
/// purely linear `N`.
pub fn degeneracy_rank(n_actions: &Series, rel_threshold: f64) -> DegeneracyReport {
    let d = n_actions.d();
    let grad = gradient_actions(n_actions);
    let mut monos: Vec<Mono> = grad
        .iter()
        .flat_map(|g| g.terms().map(|(m, _)| m))
        .filter(|m| *m != Mono::ONE)
        .collect();
    monos.sort();
    monos.dedup();
    let certified_order = monos.iter().map(|m| m.c_degree(d)).max().unwrap_or(0);
    // Zero rows pad the matrix to at least d rows so the SVD sees every
    // direction; working on M itself keeps small singular values accurate.
    let rows = monos.len().max(d);
    let m = DMatrix::from_fn(rows, d, |r, i| monos.get(r).map_or(0.0, |mo| grad[i].coeff(*mo).re));
    let svd = m.svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let v_t = svd.v_t.expect("requested V^T");
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = rel_threshold * smax;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| sv[*a].total_cmp(&sv[*b]));
    let mut directions = Vec::new();
    for &i in &order {
        if sv[i] <= threshold {
            let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
            // Fix the sign so the first sizeable entry is positive.
            if let Some(x) = v.iter().find(|x| x.abs() > 1e-12) {
                if *x < 0.0 {
                    v.iter_mut().for_each(|e| *e = -*e);
                }
            }
            directions.push(v);
        }
    }
    let mut singular_values: Vec<f64> = sv;
    singular_values.sort_by(|a, b| b.total_cmp(a));
    DegeneracyReport {
        j: directions.len(),
        directions,
        singular_values,
        threshold,
        certified_order,
    }
}

#[derive(Clone, Debug)]
pub struct TransverseEntry {
    pub k: Vec<i64>,
    pub u: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Transversality {
    pub p: u32,
    pub sigma: f64,
    pub k_range: u32,
    pub table: Vec<TransverseEntry>,
}

pub const TRANSVERSE_GRID: usize = 1000;

fn angles_to_unit(phi: &[f64]) -> Vec<f64> {
    let d = phi.len() + 1;
    let mut u = vec![0.0; d];
    let mut s = 1.0;
    for i in 0..d - 1 {
        u[i] = s * phi[i].cos();
        s *= phi[i].sin();
    }
    u[d - 1] = s;
    u
}

/// Per-degree polynomials `P_j(u) = [t^j] ∂_r N(t u)`, as c-series.
fn graded_gradient(n_actions: &Series, p: u32) -> Vec<Vec<Series>> {
    let d = n_actions.d();
    let grad = gradient_actions(n_actions);
    (0..=p)
        .map(|j| {
            grad.iter()
                .map(|g| g.filter(|m, _| m.c_degree(d) == j))
                .collect()
        })
        .collect()
}

fn functional(graded: &[Vec<Series>], khat: &[f64], u: &[f64]) -> f64 {
    let d = khat.len();
    let mut point = vec![c64(0.0, 0.0); 3 * d];
    for i in 0..d {
        point[2 * d + i] = c64(u[i], 0.0);
    }
    let mut best: f64 = 0.0;
    let mut fact = 1.0;
    for (j, comps) in graded.iter().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        let v: f64 = comps
            .iter()
            .zip(khat)
            .map(|(s, k)| k * s.eval(&point).re)
            .sum();
        best = best.max((fact * v).abs());
    }
    best
}

fn best_direction(graded: &[Vec<Series>], khat: &[f64]) -> (Vec<f64>, f64) {
    let d = khat.len();
    if d == 1 {
        let u = vec![1.0];
        let v = functional(graded, khat, &u);
        return (u, v);
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    // Kronecker sequence with generalized golden-ratio steps.
    let phi_d = {
        let mut x: f64 = 2.0;
        for _ in 0..64 {
            x = (1.0 + x).powf(1.0 / d as f64);
        }
        x
    };
    let steps: Vec<f64> = (1..d).map(|i| 1.0 / phi_d.powi(i as i32)).collect();
    let mut best_phi = vec![0.0; d - 1];
    let mut best = f64::NEG_INFINITY;
    for n in 0..TRANSVERSE_GRID {
        let phi: Vec<f64> = steps
            .iter()
            .map(|a| ((0.5 + n as f64 * a).fract()) * half_pi)
            .collect();
        let v = functional(graded, khat, &angles_to_unit(&phi));
        if v > best {
            best = v;
            best_phi = phi;
        }
    }
    // Endpoints of the patch are candidates too (coordinate axes).
    for i in 0..d {
        let mut u = vec![0.0; d];
        u[i] = 1.0;
        let v = functional(graded, khat, &u);
        if v > best {
            best = v;
            best_phi = unit_to_angles(&u);
        }
    }
    let mut h = 0.1;
    while h > 1e-9 {
        let mut improved = false;
        for i in 0..d - 1 {
            for s in [-1.0, 1.0] {
                let mut phi = best_phi.clone();
                phi[i] = (phi[i] + s * h).clamp(0.0, half_pi);
                let v = functional(graded, khat, &angles_to_unit(&phi));
                if v > best {
                    best = v;
                    best_phi = phi;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (angles_to_unit(&best_phi), best)
}

fn unit_to_angles(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut phi = vec![0.0; d - 1];
    for i in 0..d - 1 {
        let tail: f64 = u[i + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        phi[i] = tail.atan2(u[i]);
    }
    phi
}

/// Representatives of `±k` in the box `0 < |k|_∞ ≤ k_range`.
pub fn half_box(d: usize, k_range: u32) -> Vec<Vec<i64>> {
    let r = k_range as i64;
    let mut out = Vec::new();
    let mut k = vec![-r; d];
    loop {
        let first = k.iter().find(|x| **x != 0);
        if matches!(first, Some(x) if *x > 0) {
            out.push(k.clone());
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if k[i] < r {
                k[i] += 1;
                break;
            }
            k[i] = -r;
        }
    }
}

/// Smallest `p ∈ 1..=p_max` whose worst-case value over the `k`-box
/// reaches `floor`, with the maximizing positive-orthant directions.
pub fn transversality_params(n_actions: &Series, p_max: u32, k_range: u32, floor: f64) -> Result<Transversality> {
    let deg = degeneracy_rank(n_actions, RANK_REL_THRESHOLD);
    if deg.j != 0 {
        return Err(KamError::Precondition(format!(
            "transversality needs a non-degenerate normal form, found j={}",
            deg.j
        )));
    }
    let d = n_actions.d();
    let ks = half_box(d, k_range);
    for p in 1..=p_max {
        let graded = graded_gradient(n_actions, p);
        let table: Vec<TransverseEntry> = ks
            .par_iter()
            .map(|k| {
                let nk = knorm(k);
                let khat: Vec<f64> = k.iter().map(|x| *x as f64 / nk).collect();
                let (u, value) = best_direction(&graded, &khat);
                TransverseEntry { k: k.clone(), u, value }
            })
            .collect();
        let sigma = table.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        if sigma >= floor {
            return Ok(Transversality { p, sigma, k_range, table });
        }
    }
    Err(KamError::Precondition(format!(
        "no (p, sigma) with sigma >= {floor} up to p = {p_max}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::random_sigma_series;
    use rand_chacha::ChaCha8Rng;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn harmonic(sp: Space, omega: &[f64]) -> Series {
        let d = sp.d();
        let mut h = Series::zero(sp);
        for i in 0..d {
            h = &h + &(&Series::var(sp, Var::Z(i)) * &Series::var(sp, Var::W(i))).scale_re(omega[i]);
        }
        h
    }

    fn actions(sp: Space, terms: &[(&[u32], f64)]) -> Series {
        let d = sp.d();
        let zeros = vec![0; d];
        Series::from_terms(sp, terms.iter().map(|(g, c)| (Mono::new(&zeros, &zeros, g), c64(*c, 0.0))))
    }

    #[test]
    fn diagonal_input_is_already_normal() {
        let sp = Space::new(1, 6);
        let zw = harmonic(sp, &[1.0]);
        let h = &zw + &zw.pow(2);
        let res = birkhoff_normal_form(&h, &[1.0], 6, Method::Lie, None).unwrap();
        assert_eq!(res.n_diag, h);
        assert_eq!(res.normalizer.min_order(), None);
        assert_eq!(res.residual_order, 7);
    }

    /// Second-order perturbation theory by hand for `zw + a z³ + ā w³`,
    /// written on dense coefficient arrays so it shares no code with the
    /// elimination: the quartic diagonal term is `½ ℳ{P, 𝒟^{-1} P}`.
    fn quartic_oracle(a: crate::C64) -> f64 {
        // P and χ as dense arrays p[i][j] for z^i w^j, i + j = 3.
        let mut p = [[c64(0.0, 0.0); 4]; 4];
        p[3][0] = a;
        p[0][3] = a.conj();
        let mut chi = p;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    chi[i][j] = p[i][j] / (i as f64 - j as f64);
                }
            }
        }
        // {P, χ} coefficient of z²w²: Σ ∂_z P ∂_w χ − ∂_w P ∂_z χ.
        let mut acc = c64(0.0, 0.0);
        for (i1, j1) in [(3usize, 0usize), (0, 3)] {
            for (i2, j2) in [(3usize, 0usize), (0, 3)] {
                let zpow = (i1 + i2) as i64 - 1;
                let wpow = (j1 + j2) as i64 - 1;
                if zpow == 2 && wpow == 2 {
                    let t1 = p[i1][j1] * i1 as f64 * chi[i2][j2] * j2 as f64;
                    let t2 = p[i1][j1] * j1 as f64 * chi[i2][j2] * i2 as f64;
                    acc += t1 - t2;
                }
            }
        }
        0.5 * acc.re
    }

    #[test]
    fn cubic_example_matches_oracle() {
        let oracle = quartic_oracle(c64(1.0, 0.0));
        // Frozen: N(r) = r − 3 r² + …
        assert_eq!(oracle, -3.0);
        let sp = Space::new(1, 8);
        let h = &harmonic(sp, &[1.0])
            + &(&Series::var(sp, Var::Z(0)).pow(3) + &Series::var(sp, Var::W(0)).pow(3));
        for method in [Method::Lie, Method::Generating] {
            let res = birkhoff_normal_form(&h, &[1.0], 6, method, None).unwrap();
            let n4 = res.n_actions.coeff_of(&[0], &[0], &[2]);
            assert!((n4.re - oracle).abs() < 1e-12 && n4.im.abs() < 1e-12);
            assert!(res.residual_order >= 7);
            let direct = res.normalizer.pullback(&h).unwrap();
            let low = (&direct - &res.n_diag).filter(|m, _| m.zw_degree(1) <= 6);
            assert!(low.max_abs() < 1e-12);
        }
    }

    #[test]
    fn methods_and_orderings_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sp = Space::new(2, 7);
        let omega = [1.0, GOLDEN];
        let pert = random_sigma_series(sp, 6, 20, &mut rng)
            .filter(|m, _| m.c_degree(2) == 0 && m.zw_degree(2) >= 3);
        let h = &harmonic(sp, &omega) + &pert.scale_re(0.3);
        let a = birkhoff_normal_form(&h, &omega, 6, Method::Lie, None).unwrap();
        let b = birkhoff_normal_form(&h, &omega, 6, Method::Generating, None).unwrap();
        let c = birkhoff_normal_form(&h, &omega, 6, Method::Lie, Some(5)).unwrap();
        assert!(a.n_diag.max_abs_diff(&b.n_diag) < 1e-10);
        assert!(a.n_diag.max_abs_diff(&c.n_diag) < 1e-10);
        assert!(a.n_diag.max_imag() < 1e-12);
        assert!(a.normalizer.sigma_defect() < 1e-12);
        assert!(a.normalizer.symplectic_defect() < 1e-12);
    }

    #[test]
    fn resonance_is_reported() {
        let sp = Space::new(2, 5);
        let omega = [1.0, 1.0];
        let z0w1 = Series::monomial(sp, &[2, 0], &[1, 1], &[0, 0], c64(1.0, 0.0));
        let h = &harmonic(sp, &omega) + &(&z0w1 + &z0w1.sigma_conjugate());
        let err = birkhoff_normal_form(&h, &omega, 4, Method::Lie, None).unwrap_err();
        assert!(matches!(err, KamError::Resonance { .. }));
    }

    #[test]
    fn bad_quadratic_part_rejected() {
        let sp = Space::new(1, 4);
        let h = &harmonic(sp, &[1.0]) + &Series::var(sp, Var::Z(0)).pow(2);
        let err = check_hamiltonian(&h, &[1.0]).unwrap_err();
        assert!(err.to_string().contains("quadratic part must be <omega0, zw>"));
    }

    #[test]
    fn degeneracy_examples() {
        let sp = Space::new(2, 6);
        let w = [1.0, GOLDEN];
        let lin: [(&[u32], f64); 2] = [(&[1, 0], w[0]), (&[0, 1], w[1])];
        let n = actions(sp, &[lin[0], lin[1], (&[2, 0], 1.0)]);
        let rep = degeneracy_rank(&n, RANK_REL_THRESHOLD);
        assert_eq!(rep.j, 1);
        assert!((rep.directions[0][0]).abs() < 1e-12 && (rep.directions[0][1] - 1.0).abs() < 1e-12);

        let n = actions(sp, &[lin[0], lin[1], (&[2, 0], 0.5), (&[0, 2], 0.5)]);
        assert_eq!(degeneracy_rank(&n, RANK_REL_THRESHOLD).j, 0);

        // ⟨ω₀, r⟩ + ⟨ω₀, r⟩²: gradient confined to the line through ω₀.
        let n = actions(
            sp,
            &[lin[0], lin[1], (&[2, 0], w[0] * w[0]), (&[1, 1], 2.0 * w[0] * w[1]), (&[0, 2], w[1] * w[1])],
        );
        let rep = degeneracy_rank(&n, RANK_REL_THRESHOLD);
        assert_eq!(rep.j, 1);
        let g = &rep.directions[0];
        assert!((g[0] * w[0] + g[1] * w[1]).abs() < 1e-12);
    }

    #[test]
    fn transversality_example() {
        let sp = Space::new(2, 6);
        let n = actions(sp, &[(&[1, 0], 1.0), (&[0, 1], GOLDEN), (&[2, 0], 0.5), (&[0, 2], 0.5)]);
        let t = transversality_params(&n, 3, 6, 1e-8).unwrap();
        assert_eq!(t.p, 1);
        assert!(t.sigma >= std::f64::consts::FRAC_1_SQRT_2 - 1e-9, "{}", t.sigma);
        let deg = actions(sp, &[(&[1, 0], 1.0), (&[0, 1], GOLDEN), (&[2, 0], 1.0)]);
        assert!(transversality_params(&deg, 3, 6, 1e-8).is_err());
    }
}
