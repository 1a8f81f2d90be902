//! Benchmark Hamiltonians and the Hamiltonian file format.
//!
//! A Hamiltonian file is a series text (see [`Series::parse`]) with one
//! extra line `omega w_1 … w_d` giving the elliptic frequencies.

use std::path::Path;

use crate::bnf::check_hamiltonian;
use crate::error::{KamError, Result};
use crate::series::{c64, Series, Space, Var};
use crate::symplectic::lie_series;

pub const GOLDEN: f64 = 1.618_033_988_749_895;
pub const PRESETS: [&str; 4] = ["integrable-quadratic", "nondegenerate-cubic", "degenerate-r1", "russmann-line"];
pub const DEFAULT_N: u32 = 10;
const SIGMA_TOL: f64 = 1e-12;
const CUBIC_AMPLITUDE: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub name: String,
    pub h: Series,
    pub omega0: Vec<f64>,
}

fn zw(sp: Space, i: usize) -> Series {
    &Series::var(sp, Var::Z(i)) * &Series::var(sp, Var::W(i))
}

fn linear_part(sp: Space, omega: &[f64]) -> Series {
    let mut out = Series::zero(sp);
    for (i, w) in omega.iter().enumerate() {
        out = &out + &zw(sp, i).scale_re(*w);
    }
    out
}

/// `x + σx` for a monomial `x = z^α w^β` with real coefficient.
fn real_pair(sp: Space, alpha: &[u32], beta: &[u32], coeff: f64) -> Series {
    let zeros = vec![0; sp.d()];
    let a = Series::monomial(sp, alpha, beta, &zeros, c64(coeff, 0.0));
    let b = Series::monomial(sp, beta, alpha, &zeros, c64(coeff, 0.0));
    &a + &b
}

/// A real cubic mixing both modes.
fn cubic(sp: Space) -> Series {
    let parts = [
        real_pair(sp, &[3, 0], &[0, 0], 1.0),
        real_pair(sp, &[2, 0], &[0, 1], 0.8),
        real_pair(sp, &[1, 1], &[0, 1], 0.6),
        real_pair(sp, &[0, 3], &[0, 0], 0.5),
        real_pair(sp, &[1, 0], &[0, 2], 0.4),
    ];
    parts.iter().fold(Series::zero(sp), |acc, p| &acc + p)
}

/// Conjugating generator `−i·G/2` with `G` a real cubic: its time-one map is
/// real and symplectic.
fn conjugator(sp: Space) -> Series {
    let g = &(&real_pair(sp, &[2, 0], &[0, 1], 1.0) + &real_pair(sp, &[0, 2], &[1, 0], 0.7))
        + &real_pair(sp, &[1, 1], &[1, 0], 0.5);
    g.scale(c64(0.0, -0.5))
}

pub fn preset(name: &str, n: u32) -> Result<HamiltonianSpec> {
    let sp = Space::try_new(2, n, 1)?;
    let omega0 = vec![1.0, GOLDEN];
    let lin = linear_part(sp, &omega0);
    let h = match name {
        "integrable-quadratic" => &lin + &(&zw(sp, 0).pow(2) + &zw(sp, 1).pow(2)).scale_re(0.5),
        "nondegenerate-cubic" => &lin + &cubic(sp).scale_re(CUBIC_AMPLITUDE),
        "degenerate-r1" => lie_series(&(&lin + &zw(sp, 0).pow(2)), &conjugator(sp)),
        "russmann-line" => {
            let a = &lin;
            lie_series(&(a + &a.pow(2)), &conjugator(sp))
        }
        _ => {
            return Err(KamError::Precondition(format!(
                "unknown preset '{name}'; known: {}",
                PRESETS.join(", ")
            )))
        }
    };
    // Round-off in the Lie series leaves imaginary dust of order 1e-17.
    let h = h.map_coeffs(|_, c| if c.im.abs() < 1e-15 { c64(c.re, 0.0) } else { c }).chop(1e-15);
    Ok(HamiltonianSpec {
        name: name.to_string(),
        h,
        omega0,
    })
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.h.d();
        for (m, c) in self.h.terms() {
            let twin = self.h.coeff(m.swap_zw(d));
            if (twin.conj() - c).norm() > SIGMA_TOL * c.norm().max(1.0) {
                return Err(KamError::Precondition(format!(
                    "not sigma-symmetric at alpha={:?} beta={:?} gamma={:?}",
                    m.alpha(d),
                    m.beta(d),
                    m.gamma(d)
                )));
            }
        }
        check_hamiltonian(&self.h, &self.omega0)
    }

    pub fn to_text(&self) -> String {
        let body = self.h.to_text();
        let mut lines = body.lines();
        let header = lines.next().unwrap_or_default();
        let omega: Vec<String> = self.omega0.iter().map(|w| w.to_string()).collect();
        let mut out = format!("# {}\n{header}\nomega {}\n", self.name, omega.join(" "));
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, name: &str) -> Result<HamiltonianSpec> {
        let mut omega = None;
        let mut series_text = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if let Some(rest) = line.strip_prefix("omega") {
                if omega.is_some() {
                    return Err(KamError::parse(idx + 1, "duplicate omega line"));
                }
                let vals: std::result::Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
                omega = Some(vals.map_err(|_| KamError::parse(idx + 1, "bad omega value"))?);
                // Keep line numbers aligned for the series parser.
                series_text.push('\n');
            } else {
                series_text.push_str(raw);
                series_text.push('\n');
            }
        }
        let h = Series::parse(&series_text)?;
        let omega0 = omega.ok_or_else(|| KamError::parse(1, "missing omega line"))?;
        if omega0.len() != h.d() {
            return Err(KamError::parse(1, format!("omega has {} entries, d={}", omega0.len(), h.d())));
        }
        let spec = HamiltonianSpec {
            name: name.to_string(),
            h,
            omega0,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `preset:<name>` or a file path.
pub fn load_hamiltonian(source: &str, n: u32) -> Result<HamiltonianSpec> {
    if let Some(name) = source.strip_prefix("preset:") {
        let spec = preset(name, n)?;
        spec.validate()?;
        return Ok(spec);
    }
    let text = std::fs::read_to_string(Path::new(source))?;
    HamiltonianSpec::parse(&text, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnf::{birkhoff_normal_form, degeneracy_rank, Method, RANK_REL_THRESHOLD};

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let spec = preset(name, DEFAULT_N).unwrap();
            spec.validate().unwrap();
            let text = spec.to_text();
            let back = HamiltonianSpec::parse(&text, name).unwrap();
            assert_eq!(back.h.max_abs_diff(&spec.h), 0.0);
            assert_eq!(back.to_text(), text);
            assert_eq!(preset(name, DEFAULT_N).unwrap().to_text(), text);
        }
    }

    #[test]
    fn preset_degeneracy() {
        let expect = [("nondegenerate-cubic", 0), ("degenerate-r1", 1), ("russmann-line", 1)];
        for (name, j) in expect {
            let spec = preset(name, DEFAULT_N).unwrap();
            let b = birkhoff_normal_form(&spec.h, &spec.omega0, 10, Method::Lie, None).unwrap();
            assert_eq!(degeneracy_rank(&b.n_actions, RANK_REL_THRESHOLD).j, j, "{name}");
        }
    }

    #[test]
    fn bad_files_rejected() {
        let base = "space d=1 N=4\nomega 1\n1 | 1 | 0 | 1 0\n";
        assert!(HamiltonianSpec::parse(base, "ok").is_ok());
        let asym = format!("{base}3 | 0 | 0 | 1 0\n");
        let err = HamiltonianSpec::parse(&asym, "x").unwrap_err().to_string();
        assert!(err.contains("alpha=[3]"), "{err}");
        let offdiag = "space d=2 N=4\nomega 1 2\n1,0 | 1,0 | 0,0 | 1 0\n0,1 | 0,1 | 0,0 | 2 0\n1,0 | 0,1 | 0,0 | 1 0\n0,1 | 1,0 | 0,0 | 1 0\n";
        let err = HamiltonianSpec::parse(offdiag, "x").unwrap_err().to_string();
        assert!(err.contains("quadratic part must be <omega0, zw>"), "{err}");
        let e = HamiltonianSpec::parse("space d=1 N=4\n1 | 1 | 0 | 1 0\n", "x").unwrap_err();
        assert_eq!(e.class(), "parse");
    }
}
