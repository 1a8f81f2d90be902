//! `kamtori`: batch front end. Every command writes CSV tables and a
//! JSON-lines manifest into the output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use kamtori::bnf::{birkhoff_normal_form, degeneracy_rank, transversality_params, Method, RANK_REL_THRESHOLD};
use kamtori::experiments::{
    load_hamiltonian, num, record_scenario, rerun_scenario, ExperimentReport, HamiltonianSpec, ManifestLine, RunManifest, Table,
    DEFAULT_N,
};
use kamtori::kam::{
    build_torus, density_experiment, frequency_map, integrate_flow, measure_mc, prepare, run_scheme, DensityConfig,
    FlowConfig, KamConfig, MeasureConfig,
};
use kamtori::smalldiv::{dc_check, dc_margin, Diophantine, Frequency};
use kamtori::symplectic::compare_gen_vs_lie;
use kamtori::{c64, KamError, Series, C64};

const OUT_ENV: &str = "KAMTORI_OUT";

#[derive(Parser, Debug)]
#[command(name = "kamtori", version, about = "Truncated-order KAM tori near elliptic fixed points")]
struct Cli {
    /// Output directory (default: $KAMTORI_OUT, else ./kamtori-out).
    #[arg(long, global = true, env = OUT_ENV, default_value = "kamtori-out")]
    out: PathBuf,
    /// Seed for every random draw; always recorded.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Debug, Clone)]
struct Source {
    /// Hamiltonian file, or `preset:<name>`.
    #[arg(long, conflicts_with = "preset")]
    hamiltonian: Option<String>,
    /// Preset name, shorthand for `--hamiltonian preset:<name>`.
    #[arg(long)]
    preset: Option<String>,
    /// Truncation order used for presets.
    #[arg(long = "n", default_value_t = DEFAULT_N)]
    n: u32,
}

impl Source {
    fn load(&self) -> kamtori::Result<HamiltonianSpec> {
        let src = match (&self.hamiltonian, &self.preset) {
            (Some(h), _) => h.clone(),
            (None, Some(p)) => format!("preset:{p}"),
            (None, None) => return Err(KamError::Precondition("give --hamiltonian or --preset".into())),
        };
        load_hamiltonian(&src, self.n)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Lie,
    Generating,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OmegaMode {
    Jet,
    Grid,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Birkhoff normal form and degeneracy report.
    Bnf {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 6)]
        order: u32,
        #[arg(long, value_enum, default_value = "lie")]
        method: MethodArg,
    },
    /// Generating-function versus Lie map difference `D(ε)`.
    CompareMaps {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
    },
    /// Finite-range Diophantine check of a frequency vector.
    DcCheck {
        #[arg(long, value_delimiter = ',', required = true)]
        omega: Vec<f64>,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long = "dc-range", default_value_t = 10_000)]
        dc_range: u32,
    },
    /// Runs the counterterm scheme.
    NormalForm {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long = "omega-mode", value_enum, default_value = "jet")]
        omega_mode: OmegaMode,
        /// Grid mode: number of frequencies on a circle around ω₀ (0 = ω₀ only).
        #[arg(long = "grid-points", default_value_t = 0)]
        grid_points: usize,
        #[arg(long = "grid-radius", default_value_t = 1e-3)]
        grid_radius: f64,
    },
    /// Frequency map `Ω` as a jet, on a grid, and along degenerate directions.
    FreqMap {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 3)]
        q: u32,
        /// Highest c-order of the jet written out.
        #[arg(long = "jet-order", default_value_t = 6)]
        jet_order: u32,
        /// `<points per axis>:<c max>` over `[0, c max]^d`.
        #[arg(long, default_value = "5:0.05")]
        grid: String,
    },
    /// Torus candidate at `c★` with its invariance residual.
    Torus {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 3)]
        q: u32,
        /// Entries like `0.01`, `0.02i` or `0.01+0.02i`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        c: Vec<String>,
        #[arg(long = "theta-grid", default_value_t = 64)]
        theta_grid: usize,
        /// Integrate the real flow from the torus for this long (real `c★` only).
        #[arg(long)]
        flow: Option<f64>,
    },
    /// Monte-Carlo density of Diophantine frequencies.
    Density {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        kappas: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long = "k-range", default_value_t = 20)]
        k_range: u32,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long = "c-eta", default_value_t = 1.0)]
        c_eta: f64,
    },
    /// Monte-Carlo check of the measure lemma.
    MeasureMc {
        /// JSON object with any of the fields of the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// A named end-to-end scenario.
    Scenario {
        #[arg(long)]
        name: String,
    },
    /// Repeats the run recorded in a manifest into `--out`.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Lie => Method::Lie,
        MethodArg::Generating => Method::Generating,
    }
}

fn vecstr(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

fn cstr(z: C64) -> String {
    format!("{}{}{}i", num(z.re), if z.im.is_sign_negative() { "" } else { "+" }, num(z.im))
}

fn parse_complex(s: &str) -> kamtori::Result<C64> {
    let bad = || KamError::parse(1, format!("bad complex number '{s}'"));
    let t = s.trim();
    if let Some(body) = t.strip_suffix('i') {
        // Split at the last sign that is not part of an exponent.
        let bytes = body.as_bytes();
        let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        return match split {
            Some(k) => {
                let re: f64 = body[..k].parse().map_err(|_| bad())?;
                let im_txt = &body[k..];
                let im: f64 = if im_txt == "+" || im_txt == "-" { format!("{im_txt}1").parse().unwrap() } else { im_txt.parse().map_err(|_| bad())? };
                Ok(c64(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => body.parse().map_err(|_| bad())?,
                };
                Ok(c64(0.0, im))
            }
        };
    }
    Ok(c64(t.parse().map_err(|_| bad())?, 0.0))
}

struct Run {
    prefix: String,
    report: ExperimentReport,
    diagnostics: Vec<serde_json::Value>,
}

impl Run {
    fn new(prefix: &str) -> Run {
        Run {
            prefix: prefix.to_string(),
            report: ExperimentReport::new(prefix),
            diagnostics: Vec::new(),
        }
    }
}

fn input_of(run: &mut Run, spec: &HamiltonianSpec) {
    run.report.inputs.push((spec.name.clone(), spec.to_text()));
}

fn cmd_bnf(src: &Source, order: u32, m: MethodArg) -> kamtori::Result<Run> {
    let spec = src.load()?;
    let mut run = Run::new("bnf");
    input_of(&mut run, &spec);
    let res = birkhoff_normal_form(&spec.h, &spec.omega0, order, method(m), None)?;
    let d = spec.h.d();
    let mut t = Table::new("coefficients", &["gamma", "re", "im"]);
    for (mono, c) in res.n_actions.sorted_terms() {
        let g: Vec<String> = mono.gamma(d).iter().map(|x| x.to_string()).collect();
        t.push(vec![g.join(";"), num(c.re), num(c.im)]);
    }
    let deg = degeneracy_rank(&res.n_actions, RANK_REL_THRESHOLD);
    let mut s = Table::new("summary", &["order", "method", "residual_order", "degeneracy_j", "certified_order", "singular_values"]);
    s.push(vec![
        order.to_string(),
        format!("{m:?}").to_lowercase(),
        res.residual_order.to_string(),
        deg.j.to_string(),
        deg.certified_order.to_string(),
        vecstr(&deg.singular_values),
    ]);
    let mut dt = Table::new("directions", &["index", "direction"]);
    for (i, v) in deg.directions.iter().enumerate() {
        dt.push(vec![i.to_string(), vecstr(v)]);
    }
    run.report.tables.extend([s, t, dt]);
    Ok(run)
}

fn cmd_compare(series: &Path, eps: &[f64], radius: f64) -> kamtori::Result<Run> {
    let text = std::fs::read_to_string(series)?;
    let f = Series::parse(&text)?;
    let mut run = Run::new("compare-maps");
    run.report.inputs.push((series.display().to_string(), text));
    let rep = compare_gen_vs_lie(&f, eps, radius)?;
    let mut t = Table::new("difference", &["eps", "difference"]);
    for (e, dv) in &rep.rows {
        t.push(vec![num(*e), num(*dv)]);
    }
    let mut s = Table::new("slope", &["radius", "slope"]);
    s.push(vec![num(radius), rep.slope.map_or("none".into(), num)]);
    run.report.tables.extend([t, s]);
    Ok(run)
}

fn cmd_dc(omega: &[f64], kappa: f64, tau: f64, k: u32) -> kamtori::Result<Run> {
    let p = Diophantine::new(kappa, tau)?;
    let pass = dc_check(omega, &p, k);
    let (margin, witness) = dc_margin(omega, tau, k);
    let mut run = Run::new("dc-check");
    let mut t = Table::new("dc", &["omega", "kappa", "tau", "certified_range", "passes", "margin", "witness"]);
    let w: Vec<String> = witness.iter().map(|x| x.to_string()).collect();
    t.push(vec![vecstr(omega), num(kappa), num(tau), k.to_string(), pass.to_string(), num(margin), w.join(";")]);
    run.report.tables.push(t);
    Ok(run)
}

#[allow(clippy::too_many_arguments)]
fn cmd_normal_form(src: &Source, q: u32, kappa: Option<f64>, tau: f64, steps: usize, mode: OmegaMode, points: usize, radius: f64) -> kamtori::Result<Run> {
    let spec = src.load()?;
    let mut run = Run::new("normal-form");
    input_of(&mut run, &spec);
    let prep = prepare(&spec.h, &spec.omega0, q)?;
    let dioph = kappa.map(|k| Diophantine::new(k, tau)).transpose()?;
    let cfg = KamConfig { q, steps, dioph, ..Default::default() };
    let freqs: Vec<(String, Frequency)> = match mode {
        OmegaMode::Jet => vec![("jet".into(), Frequency::Jet(prep.grad_nq.clone()))],
        OmegaMode::Grid => {
            let mut v = vec![(vecstr(&spec.omega0), Frequency::Const(spec.omega0.clone()))];
            for j in 0..points {
                let a = std::f64::consts::TAU * j as f64 / points as f64;
                let mut w = spec.omega0.clone();
                w[0] += radius * a.cos();
                if w.len() > 1 {
                    w[1] += radius * a.sin();
                }
                v.push((vecstr(&w), Frequency::Const(w)));
            }
            v
        }
    };
    let mut t = Table::new(
        "steps",
        &["omega", "step", "delta", "majorant_in", "majorant_out", "m_residual", "lambda_iterations", "ledger", "sigma"],
    );
    for (label, freq) in freqs {
        let state = run_scheme(&prep.htilde, freq, &cfg)?;
        for dg in &state.diagnostics {
            t.push(vec![
                label.clone(),
                dg.step.to_string(),
                num(dg.delta),
                num(dg.bracket_in),
                num(dg.bracket_out),
                num(dg.m_residual),
                dg.lambda_iterations.to_string(),
                dg.ledger.map_or("skipped".into(), num),
                num(dg.sigma),
            ]);
            run.diagnostics.push(serde_json::json!({ "omega": label, "step": dg.step, "majorant_out": dg.bracket_out }));
        }
    }
    run.report.tables.push(t);
    Ok(run)
}

fn parse_grid(spec: &str) -> kamtori::Result<(usize, f64)> {
    let bad = || KamError::parse(1, format!("grid '{spec}' is not <points>:<c max>"));
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    let n: usize = a.parse().map_err(|_| bad())?;
    let m: f64 = b.parse().map_err(|_| bad())?;
    if n == 0 || !(m > 0.0) {
        return Err(bad());
    }
    Ok((n, m))
}

fn cmd_freq_map(src: &Source, q: u32, jet_order: u32, grid: &str) -> kamtori::Result<Run> {
    let spec = src.load()?;
    let (pts, cmax) = parse_grid(grid)?;
    let mut run = Run::new("freq-map");
    input_of(&mut run, &spec);
    let prep = prepare(&spec.h, &spec.omega0, q)?;
    let fj = frequency_map(&prep, &KamConfig { q, ..Default::default() })?;
    let d = prep.space.d();
    let mut jt = Table::new("jet", &["component", "gamma", "re", "im"]);
    for (i, s) in fj.jet.iter().enumerate() {
        for (mono, c) in s.sorted_terms() {
            if mono.c_degree(d) <= jet_order {
                let g: Vec<String> = mono.gamma(d).iter().map(|x| x.to_string()).collect();
                jt.push(vec![i.to_string(), g.join(";"), num(c.re), num(c.im)]);
            }
        }
    }
    let mut gt = Table::new("grid", &["c", "omega"]);
    let total = pts.pow(d as u32);
    for idx in 0..total {
        let mut rest = idx;
        let c: Vec<f64> = (0..d)
            .map(|_| {
                let k = rest % pts;
                rest /= pts;
                cmax * (k + 1) as f64 / pts as f64
            })
            .collect();
        gt.push(vec![vecstr(&c), vecstr(&fj.eval_real(&c))]);
    }
    let deg = degeneracy_rank(&prep.bnf.n_actions, RANK_REL_THRESHOLD);
    let mut dt = Table::new("degenerate", &["direction", "s_max", "grid_points", "max_abs_omega_minus_omega0"]);
    let a = 0.05 / 2f64.sqrt();
    for gamma in &deg.directions {
        let mut worst: f64 = 0.0;
        for i in 0..9 {
            for j in 0..9 {
                let s = c64(-a + 2.0 * a * i as f64 / 8.0, -a + 2.0 * a * j as f64 / 8.0);
                let c: Vec<C64> = gamma.iter().map(|g| s * g).collect();
                let w = fj.eval(&c);
                worst = worst.max(w.iter().zip(&spec.omega0).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
            }
        }
        dt.push(vec![vecstr(gamma), num(0.05), "81".into(), num(worst)]);
    }
    let mut st = Table::new("summary", &["q", "sweeps", "residual", "degeneracy_j"]);
    st.push(vec![q.to_string(), fj.iterations.to_string(), num(fj.residual), deg.j.to_string()]);
    run.report.tables.extend([st, jt, gt, dt]);
    Ok(run)
}

fn cmd_torus(src: &Source, q: u32, c: &[String], theta_grid: usize, flow: Option<f64>) -> kamtori::Result<Run> {
    let spec = src.load()?;
    let cs: Vec<C64> = c.iter().map(|s| parse_complex(s)).collect::<kamtori::Result<_>>()?;
    if cs.len() != spec.h.d() {
        return Err(KamError::Precondition(format!("--c needs {} entries", spec.h.d())));
    }
    let mut run = Run::new("torus");
    input_of(&mut run, &spec);
    let prep = prepare(&spec.h, &spec.omega0, q)?;
    let fj = frequency_map(&prep, &KamConfig { q, ..Default::default() })?;
    let omega = fj.eval(&cs);
    let torus = build_torus(&prep, &fj.state, &omega, &cs, theta_grid)?;
    let d = spec.h.d();
    let mut st = Table::new("summary", &["c", "omega", "theta_grid", "residual"]);
    let join = |v: &[C64]| v.iter().map(|z| cstr(*z)).collect::<Vec<_>>().join(";");
    st.push(vec![join(&cs), join(&omega), theta_grid.to_string(), num(torus.residual)]);
    let mut pt = Table::new("points", &["index", "z", "w"]);
    for (i, p) in torus.points.iter().enumerate() {
        pt.push(vec![i.to_string(), join(&p[..d]), join(&p[d..])]);
    }
    run.report.tables.extend([st, pt]);
    if let Some(t_end) = flow {
        if cs.iter().any(|z| z.im != 0.0) {
            return Err(KamError::Precondition("--flow needs a real c".into()));
        }
        let rep = integrate_flow(&prep.h, &torus.points[0][..d], &FlowConfig { t_end, ..Default::default() }, Some(&torus.map))?;
        let mut ft = Table::new("flow", &["t", "energy_drift", "actions", "torus_distance"]);
        for s in &rep.samples {
            ft.push(vec![num(s.t), num(s.energy_drift), vecstr(&s.actions), s.torus_distance.map_or("none".into(), num)]);
        }
        run.report.tables.push(ft);
    }
    Ok(run)
}

#[allow(clippy::too_many_arguments)]
fn cmd_density(src: &Source, q: u32, kappas: &[f64], tau: f64, k_range: u32, samples: usize, c_eta: f64, seed: u64) -> kamtori::Result<Run> {
    let spec = src.load()?;
    let mut run = Run::new("density");
    input_of(&mut run, &spec);
    let prep = prepare(&spec.h, &spec.omega0, q)?;
    let fj = frequency_map(&prep, &KamConfig { q, ..Default::default() })?;
    let tr = transversality_params(&prep.bnf.n_actions, 3, k_range, 1e-8)?;
    let cfg = DensityConfig {
        kappas: kappas.to_vec(),
        tau,
        k_range,
        samples,
        seed,
        p: tr.p,
        sigma: tr.sigma,
        c_eta,
        fit_points: 5,
    };
    let dr = density_experiment(&fj.jet, &cfg)?;
    let mut t = Table::new("density", &["kappa", "eta", "passing", "samples", "fraction", "lemma_sum"]);
    for r in &dr.rows {
        t.push(vec![num(r.kappa), num(r.eta), r.passing.to_string(), r.samples.to_string(), num(r.fraction), num(r.lemma_sum)]);
    }
    let mut ft = Table::new("exponent", &["eps", "excluded_fraction"]);
    for (e, f) in dr.fit.eps.iter().zip(&dr.fit.fractions) {
        ft.push(vec![num(*e), num(*f)]);
    }
    let mut pt = Table::new("transversality", &["p", "sigma", "k_range", "slope", "expected"]);
    pt.push(vec![tr.p.to_string(), num(tr.sigma), k_range.to_string(), dr.fit.slope.map_or("none".into(), num), num(dr.fit.expected)]);
    run.report.tables.extend([t, ft, pt]);
    Ok(run)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    d: Option<usize>,
    eta: Option<f64>,
    samples: Option<usize>,
    density: Option<f64>,
    stripes: Option<u32>,
    amplitude: Option<f64>,
    validation_samples: Option<usize>,
}

fn cmd_measure(config: Option<&Path>, samples: Option<usize>, density: Option<f64>, amplitude: Option<f64>, seed: u64) -> kamtori::Result<Run> {
    let mut run = Run::new("measure-mc");
    let file: MeasureFile = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            run.report.inputs.push((p.display().to_string(), text.clone()));
            serde_json::from_str(&text).map_err(|e| KamError::parse(e.line(), e.to_string()))?
        }
        None => MeasureFile::default(),
    };
    let base = MeasureConfig::default();
    let cfg = MeasureConfig {
        d: file.d.unwrap_or(base.d),
        eta: file.eta.unwrap_or(base.eta),
        samples: samples.or(file.samples).unwrap_or(base.samples),
        seed,
        density: density.or(file.density).unwrap_or(base.density),
        stripes: file.stripes.unwrap_or(base.stripes),
        amplitude: amplitude.or(file.amplitude),
        validation_samples: file.validation_samples.unwrap_or(base.validation_samples),
    };
    let r = measure_mc(&cfg)?;
    let mut t = Table::new(
        "measure",
        &["d", "eta", "density", "amplitude", "bound_ratio", "samples", "hits", "ratio", "half_width", "unresolved"],
    );
    t.push(vec![
        cfg.d.to_string(),
        num(cfg.eta),
        num(cfg.density),
        num(r.amplitude),
        num(r.bound_ratio),
        r.samples.to_string(),
        r.hits.to_string(),
        num(r.ratio),
        num(r.half_width),
        r.unresolved.to_string(),
    ]);
    run.report.tables.push(t);
    Ok(run)
}

/// Writes tables and the manifest of a non-scenario command.
fn finish(run: Run, out: &Path, argv: &[String], seed: u64, secs: f64) -> kamtori::Result<()> {
    let files = run.report.write_tables(out, &run.prefix)?;
    let mut m = RunManifest::new(&run.prefix, serde_json::json!({ "argv": argv }), seed, secs);
    for (label, text) in &run.report.inputs {
        m.add_input(label, text);
    }
    m.add_outputs(&files)?;
    for d in run.diagnostics {
        m.push(ManifestLine::Diagnostic(d));
    }
    m.write(&out.join(format!("{}.manifest.jsonl", run.prefix)))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

enum Failure {
    Error(KamError),
    Checks(Vec<String>),
}

impl From<KamError> for Failure {
    fn from(e: KamError) -> Self {
        Failure::Error(e)
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<(), Failure> {
    let start = Instant::now();
    let out = cli.out.clone();
    let seed = cli.seed;
    let run = match cli.cmd {
        Cmd::Bnf { src, order, method } => cmd_bnf(&src, order, method)?,
        Cmd::CompareMaps { series, eps, radius } => cmd_compare(&series, &eps, radius)?,
        Cmd::DcCheck { omega, kappa, tau, dc_range } => cmd_dc(&omega, kappa, tau, dc_range)?,
        Cmd::NormalForm {
            src,
            q,
            kappa,
            tau,
            steps,
            omega_mode,
            grid_points,
            grid_radius,
        } => cmd_normal_form(&src, q, kappa, tau, steps, omega_mode, grid_points, grid_radius)?,
        Cmd::FreqMap { src, q, jet_order, grid } => cmd_freq_map(&src, q, jet_order, &grid)?,
        Cmd::Torus { src, q, c, theta_grid, flow } => cmd_torus(&src, q, &c, theta_grid, flow)?,
        Cmd::Density {
            src,
            q,
            kappas,
            tau,
            k_range,
            samples,
            c_eta,
        } => cmd_density(&src, q, &kappas, tau, k_range, samples, c_eta, seed)?,
        Cmd::MeasureMc {
            config,
            samples,
            density,
            amplitude,
        } => cmd_measure(config.as_deref(), samples, density, amplitude, seed)?,
        Cmd::Scenario { name } => {
            let (rep, _) = record_scenario(&name, seed, &out)?;
            return report_checks(&rep);
        }
        Cmd::Rerun { manifest } => return rerun(&manifest, &out),
    };
    finish(run, &out, &argv, seed, start.elapsed().as_secs_f64())?;
    Ok(())
}

fn report_checks(rep: &ExperimentReport) -> Result<(), Failure> {
    for c in &rep.checks {
        println!("criterion {:>2} {} {}", c.criterion, if c.pass { "PASS" } else { "FAIL" }, c.describe());
    }
    let failed: Vec<String> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.describe()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn rerun(manifest: &Path, out: &Path) -> Result<(), Failure> {
    let m = RunManifest::read(manifest)?;
    let (command, params, _) = m.command().expect("parsed manifests have a run line");
    if command == "scenario" {
        let (rep, _) = rerun_scenario(manifest, out)?;
        return report_checks(&rep);
    }
    let argv: Vec<String> = params
        .get("argv")
        .and_then(|a| serde_json::from_value(a.clone()).ok())
        .ok_or_else(|| KamError::parse(1, "manifest has no argv"))?;
    let mut cli = Cli::try_parse_from(std::iter::once("kamtori".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| KamError::parse(1, e.to_string()))?;
    if matches!(cli.cmd, Cmd::Rerun { .. }) {
        return Err(KamError::Precondition("a manifest cannot record a rerun".into()).into());
    }
    cli.out = out.to_path_buf();
    execute(cli, argv)
}

fn exit_code(class: &str) -> u8 {
    match class {
        "small-divisor" => 3,
        "contraction-failure" => 4,
        "parse" => 5,
        _ => 6,
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match execute(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            let line = serde_json::json!({ "error": e.class(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(exit_code(e.class()))
        }
        Err(Failure::Checks(failed)) => {
            let line = serde_json::json!({ "error": "check-failure", "message": failed.join("; ") });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_entries() {
        assert_eq!(parse_complex("0.5").unwrap(), c64(0.5, 0.0));
        assert_eq!(parse_complex("0.02i").unwrap(), c64(0.0, 0.02));
        assert_eq!(parse_complex("1e-2-3e-3i").unwrap(), c64(0.01, -0.003));
        assert_eq!(parse_complex("-i").unwrap(), c64(0.0, -1.0));
        assert_eq!(parse_complex("2-i").unwrap(), c64(2.0, -1.0));
        assert_eq!(parse_complex("x").unwrap_err().class(), "parse");
    }

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("5:0.05").unwrap(), (5, 0.05));
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
