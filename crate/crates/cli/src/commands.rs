use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde_json::{json, Value};

use nonlocal_core::grid::{read_field, write_field, GridSpec, VectorField};
use nonlocal_core::kernel::{KernelConfig, KernelSpec, Profile};
use nonlocal_core::linalg::{max_abs, min_hermitian_eigenvalue, CMat};
use nonlocal_core::norms::{ensemble_member, lp_norm, EnsembleConfig};
use nonlocal_core::operator::rel_l2;
use nonlocal_core::solver_elliptic::{elliptic_residual, solve_direct, solve_homotopy};
use nonlocal_core::solver_parabolic::{ensemble_forcing, solve_duhamel, Forcing, TimeGrid, TimeScheme};
use nonlocal_core::symbol::{derive_lame_constants, frac_scale, symbol_general, symbol_lame, tabulate_symbol, SymbolQuadrature};
use nonlocal_core::verify::{self, resolve_suites, VerifyConfig};
use nonlocal_core::Error;

use crate::config::{self, config_hash, BenchConfig, EllipticConfig, EllipticMethod, ForcingKind, GridConfig, ParabolicConfig, SymbolConfig};
use crate::Failure;

/// 17 significant digits: lossless for doubles.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Io),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing to stdout")
            .map_err(Failure::Io),
    }
}

fn build_kernel(cfg: &KernelConfig) -> Result<KernelSpec, Failure> {
    KernelSpec::new(cfg.clone()).map_err(Failure::config)
}

/// Coefficient of the fractional Lamé closed form when the kernel is
/// `α(1-s)|y|^{-d-2s}`.
fn closed_form_alpha(kernel: &KernelSpec) -> Option<f64> {
    match kernel.profile() {
        Profile::Constant { value } if kernel.is_pure_power() => Some(value.unwrap_or(kernel.alpha1())),
        _ => None,
    }
}

pub fn symbol(path: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let cfg: SymbolConfig = config::load(path)?;
    let kernel = build_kernel(&cfg.kernel)?;
    let grid = cfg.grid.build()?;
    let d = grid.dim();
    if d != kernel.dim() {
        return Err(Failure::config(anyhow!("grid dimension {d} differs from kernel dimension {}", kernel.dim())));
    }
    // evaluated at each listed frequency; the solver tables pair Nyquist modes instead
    let rows: Vec<(Vec<f64>, CMat)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let xi = grid.frequency(idx)?;
            let m = symbol_general(&xi, &kernel, &cfg.quadrature)?.entries;
            Ok((xi, m))
        })
        .collect::<Result<_, Error>>()
        .map_err(Failure::solver)?;
    let closed = match closed_form_alpha(&kernel) {
        Some(alpha) => Some((derive_lame_constants(d, kernel.s(), &cfg.quadrature).map_err(Failure::solver)?, alpha)),
        None => None,
    };
    let mut out = String::from("index");
    for c in 0..d {
        write!(out, ",xi_{}", c + 1).unwrap();
    }
    for i in 0..d {
        for j in 0..d {
            write!(out, ",m{}{}_re,m{}{}_im", i + 1, j + 1, i + 1, j + 1).unwrap();
        }
    }
    out.push_str(",coercive_ratio,closed_form_deviation\n");
    for (idx, (xi, m)) in rows.iter().enumerate() {
        write!(out, "{idx}").unwrap();
        for v in xi {
            write!(out, ",{}", num(*v)).unwrap();
        }
        for i in 0..d {
            for j in 0..d {
                write!(out, ",{},{}", num(m[(i, j)].re), num(m[(i, j)].im)).unwrap();
            }
        }
        let scale = frac_scale(xi, kernel.s());
        let ratio = if scale > 0.0 { min_hermitian_eigenvalue(m) / scale } else { 0.0 };
        write!(out, ",{}", num(ratio)).unwrap();
        match &closed {
            Some((consts, alpha)) => {
                let dev = max_abs(&(m - &symbol_lame(xi, consts, *alpha).entries));
                writeln!(out, ",{}", num(dev)).unwrap();
            }
            None => out.push_str(",\n"),
        }
    }
    emit(output, &out)
}

fn read_input(path: &Path) -> Result<VectorField, Failure> {
    read_field(path)
        .with_context(|| format!("reading field {}", path.display()))
        .map_err(Failure::Io)
}

fn synthesized(grid: &Option<GridConfig>, d: usize, seed: u64) -> Result<VectorField, Failure> {
    let g = grid
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("config needs a grid when no input field is given")))?
        .build()?;
    let ens = EnsembleConfig {
        size: 1,
        seed,
        ..EnsembleConfig::default()
    };
    ensemble_member(&g, d, &ens, 0).map_err(Failure::solver)
}

fn check_shape(f: &VectorField, kernel: &KernelSpec) -> Result<(), Failure> {
    let d = kernel.dim();
    if f.grid().dim() != d || f.components() != d {
        return Err(Failure::config(anyhow!(
            "field is {}-dimensional with {} components, kernel needs {d} and {d}",
            f.grid().dim(),
            f.components()
        )));
    }
    Ok(())
}

fn manifest_path(output: &Path, manifest: Option<&Path>) -> PathBuf {
    match manifest {
        Some(p) => p.to_path_buf(),
        None => {
            let mut s = output.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
    }
}

fn write_output(field: &VectorField, path: &Path) -> Result<(), Failure> {
    write_field(field, path)
        .with_context(|| format!("writing field {}", path.display()))
        .map_err(Failure::Io)
}

fn write_manifest(path: &Path, mut manifest: Value, timings: Option<Value>) -> Result<(), Failure> {
    if let Some(t) = timings {
        manifest["timings_seconds"] = t;
    }
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    emit(Some(path), &text)
}

fn grid_json(g: &GridSpec) -> Value {
    json!({ "n": g.n(), "box_len": g.box_len() })
}

pub fn solve_elliptic(
    path: &Path,
    input: Option<&Path>,
    output: &Path,
    manifest: Option<&Path>,
    timings: bool,
) -> Result<(), Failure> {
    let start = Instant::now();
    let cfg: EllipticConfig = config::load(path)?;
    let kernel = build_kernel(&cfg.kernel)?;
    let f = match input {
        Some(p) => read_input(p)?,
        None => synthesized(&cfg.grid, kernel.dim(), cfg.seed)?,
    };
    check_shape(&f, &kernel)?;
    let t0 = Instant::now();
    let table = tabulate_symbol(f.grid(), &kernel, &cfg.quadrature).map_err(Failure::solver)?;
    let tabulate = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let (u, iterations) = match cfg.method {
        EllipticMethod::Direct => (solve_direct(&f, &table, cfg.lambda).map_err(Failure::solver)?, None),
        EllipticMethod::Homotopy => {
            let (u, trace) = solve_homotopy(&f, &kernel, &table, cfg.lambda, &cfg.homotopy, &cfg.quadrature)
                .map_err(|e| Failure::solver(e.error))?;
            (u, Some(trace.total_iterations()))
        }
    };
    let solve = t0.elapsed().as_secs_f64();
    let residual = elliptic_residual(&u, &f, &table, cfg.lambda).map_err(Failure::solver)?;
    write_output(&u, output)?;
    let m = json!({
        "command": "solve-elliptic",
        "config_sha256": config_hash(&cfg),
        "input": input.map(|p| p.display().to_string()).unwrap_or_else(|| "synthesized".into()),
        "output": output.display().to_string(),
        "grid": grid_json(f.grid()),
        "method": cfg.method,
        "lambda": cfg.lambda,
        "iterations": iterations,
        "residuals": { "relative": residual },
    });
    let t = timings.then(|| json!({ "tabulate": tabulate, "solve": solve, "total": start.elapsed().as_secs_f64() }));
    write_manifest(&manifest_path(output, manifest), m, t)
}

pub fn solve_parabolic(
    path: &Path,
    input: Option<&Path>,
    output: &Path,
    manifest: Option<&Path>,
    trajectory: Option<&Path>,
    timings: bool,
) -> Result<(), Failure> {
    let start = Instant::now();
    let cfg: ParabolicConfig = config::load(path)?;
    let kernel = build_kernel(&cfg.kernel)?;
    let d = kernel.dim();
    let tg = TimeGrid::new(cfg.horizon, cfg.steps, cfg.scheme).map_err(Failure::config)?;
    let forcing: Vec<VectorField> = match (cfg.forcing, input) {
        (ForcingKind::Constant, Some(p)) => vec![read_input(p)?],
        (ForcingKind::Constant, None) => vec![synthesized(&cfg.grid, d, cfg.seed)?],
        (ForcingKind::Oscillating, Some(_)) => {
            return Err(Failure::config(anyhow!("oscillating forcing is synthesized; drop the input file")));
        }
        (ForcingKind::Oscillating, None) => {
            let g = cfg
                .grid
                .as_ref()
                .ok_or_else(|| Failure::config(anyhow!("oscillating forcing needs a grid")))?
                .build()?;
            let ens = EnsembleConfig {
                size: 1,
                seed: cfg.seed,
                ..EnsembleConfig::default()
            };
            ensemble_forcing(&g, &tg, &ens, 0).map_err(Failure::solver)?
        }
    };
    check_shape(&forcing[0], &kernel)?;
    let grid = forcing[0].grid().clone();
    let t0 = Instant::now();
    let table = tabulate_symbol(&grid, &kernel, &cfg.quadrature).map_err(Failure::solver)?;
    let tabulate = t0.elapsed().as_secs_f64();
    let g = match cfg.forcing {
        ForcingKind::Constant => Forcing::Constant(&forcing[0]),
        ForcingKind::Oscillating => Forcing::Sequence(&forcing),
    };
    let t0 = Instant::now();
    let traj = solve_duhamel(g, &table, cfg.lambda, &tg).map_err(Failure::solver)?;
    let solve = t0.elapsed().as_secs_f64();
    let last = traj.last().expect("trajectories include t = 0");
    let closed_form = match cfg.forcing {
        ForcingKind::Constant => {
            let exact_grid = TimeGrid::new(cfg.horizon, 1, TimeScheme::ExactPerMode).map_err(Failure::config)?;
            let exact = solve_duhamel(g, &table, cfg.lambda, &exact_grid).map_err(Failure::solver)?;
            Some(rel_l2(last, exact.last().expect("nonempty")))
        }
        ForcingKind::Oscillating => None,
    };
    write_output(last, output)?;
    if let Some(p) = trajectory {
        let mut csv = String::from("t,l2_norm\n");
        for (t, u) in tg.times().iter().zip(&traj) {
            writeln!(csv, "{},{}", num(*t), num(lp_norm(u, 2.0).map_err(Failure::solver)?)).unwrap();
        }
        emit(Some(p), &csv)?;
    }
    let m = json!({
        "command": "solve-parabolic",
        "config_sha256": config_hash(&cfg),
        "input": input.map(|p| p.display().to_string()).unwrap_or_else(|| "synthesized".into()),
        "output": output.display().to_string(),
        "grid": grid_json(&grid),
        "lambda": cfg.lambda,
        "horizon": cfg.horizon,
        "steps": cfg.steps,
        "scheme": cfg.scheme,
        "forcing": cfg.forcing,
        "residuals": { "closed_form_relative": closed_form },
        "final_l2_norm": lp_norm(last, 2.0).map_err(Failure::solver)?,
    });
    let t = timings.then(|| json!({ "tabulate": tabulate, "solve": solve, "total": start.elapsed().as_secs_f64() }));
    write_manifest(&manifest_path(output, manifest), m, t)
}

/// Invalid inputs surface as config errors, everything else as solver errors.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidKernel(_)
        | Error::InvalidParameter(_)
        | Error::InvalidGrid(_)
        | Error::CancellationViolated { .. } => Failure::config(e),
        other => Failure::solver(other),
    }
}

pub fn verify(path: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let cfg: VerifyConfig = config::load(path)?;
    resolve_suites(&cfg.suites).map_err(Failure::config)?;
    if let Some(k) = &cfg.kernel {
        build_kernel(k)?;
    }
    let report = verify::run(&cfg).map_err(classify)?;
    for c in &report.checks {
        eprintln!(
            "{} {}/{}: {:.6e} (bound {:.6e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.measured,
            c.bound
        );
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(output, &text)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

pub fn bench(path: Option<&Path>, output: Option<&Path>) -> Result<(), Failure> {
    let cfg: BenchConfig = match path {
        Some(p) => config::load(p)?,
        None => BenchConfig::default(),
    };
    let kernel = build_kernel(&cfg.kernel)?;
    let d = kernel.dim();
    let quad: &SymbolQuadrature = &cfg.quadrature;
    let ens = EnsembleConfig {
        size: 1,
        seed: cfg.seed,
        ..EnsembleConfig::default()
    };
    let tg = TimeGrid::new(1.0, cfg.steps, TimeScheme::ExponentialEuler).map_err(Failure::config)?;
    let mut csv = String::from("n,modes,threads,tabulate_seconds,elliptic_seconds,parabolic_seconds\n");
    for &n in &cfg.sizes {
        let grid = GridSpec::cube(d, n, 1.0).map_err(Failure::config)?;
        let f = ensemble_member(&grid, d, &ens, 0).map_err(Failure::solver)?;
        let t0 = Instant::now();
        let table = tabulate_symbol(&grid, &kernel, quad).map_err(Failure::solver)?;
        let tab = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        solve_direct(&f, &table, cfg.lambda).map_err(Failure::solver)?;
        let ell = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        solve_duhamel(Forcing::Constant(&f), &table, cfg.lambda, &tg).map_err(Failure::solver)?;
        let par = t0.elapsed().as_secs_f64();
        writeln!(
            csv,
            "{n},{},{},{},{},{}",
            grid.len(),
            rayon::current_num_threads(),
            num(tab),
            num(ell),
            num(par)
        )
        .unwrap();
        eprintln!("n = {n}: tabulate {tab:.3}s, elliptic {ell:.3}s, parabolic {par:.3}s");
    }
    emit(output, &csv)
}
