//! Browser demo bindings: symbol evaluation, heat-kernel integrals and a
//! small periodic elliptic solve. Every entry point returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nonlocal_core::kernel::{builtin_kernels, KernelSpec};
use nonlocal_core::linalg::min_hermitian_eigenvalue;
use nonlocal_core::norms::{ensemble_member, EnsembleConfig};
use nonlocal_core::solver_elliptic::{elliptic_residual, solve_direct};
use nonlocal_core::solver_parabolic::{heat_kernel_time_integral_check, sample_frequencies};
use nonlocal_core::grid::GridSpec;
use nonlocal_core::symbol::{
    coercivity_constant, derive_lame_constants, frac_scale, growth_bound, symbol_general, tabulate_symbol, SymbolQuadrature,
};

fn kernel(name: &str, s: f64) -> Result<KernelSpec, String> {
    builtin_kernels(2, s)
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, k)| k)
        .ok_or_else(|| format!("no built-in kernel '{name}' at s = {s}"))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize)]
struct SymbolView {
    /// Row-major `[re, im]` pairs.
    matrix: Vec<[f64; 2]>,
    coercive_ratio: f64,
    coercivity_constant: f64,
    growth_ratio: f64,
    growth_bound: f64,
}

pub fn kernel_names(s: f64) -> Result<String, String> {
    let names: Vec<String> = builtin_kernels(2, s).map_err(|e| e.to_string())?.into_iter().map(|(n, _)| n).collect();
    Ok(to_json(&names))
}

pub fn symbol_view(name: &str, s: f64, xi1: f64, xi2: f64) -> Result<String, String> {
    let k = kernel(name, s)?;
    let q = SymbolQuadrature::default();
    let xi = [xi1, xi2];
    let m = symbol_general(&xi, &k, &q).map_err(|e| e.to_string())?.entries;
    let c = coercivity_constant(2, s, k.alpha1(), 64, &q).map_err(|e| e.to_string())?.c;
    let a = frac_scale(&xi, s);
    let b = growth_bound(&k, xi1.hypot(xi2));
    let (coercive_ratio, growth_ratio) = if a > 0.0 {
        (min_hermitian_eigenvalue(&m) / a, m.norm() / a)
    } else {
        (0.0, 0.0)
    };
    Ok(to_json(&SymbolView {
        matrix: (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| [m[(i, j)].re, m[(i, j)].im]).collect(),
        coercive_ratio,
        coercivity_constant: c,
        growth_ratio,
        growth_bound: b,
    }))
}

#[derive(Serialize)]
struct HeatRow {
    xi_norm: f64,
    w_integral: f64,
    w_bound: f64,
    dw_integral: f64,
    dw_bound: f64,
    pass: bool,
}

pub fn heat_kernel_rows(s: f64, horizon: f64) -> Result<String, String> {
    let consts = derive_lame_constants(2, s, &SymbolQuadrature::default()).map_err(|e| e.to_string())?;
    let xis = sample_frequencies(2, 50, 0.01, 100.0);
    let rep = heat_kernel_time_integral_check(&xis, horizon, &consts, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let rows: Vec<HeatRow> = rep
        .rows
        .iter()
        .map(|r| HeatRow {
            xi_norm: r.xi_norm,
            w_integral: r.w_integral,
            w_bound: r.w_bound,
            dw_integral: r.dw_integral,
            dw_bound: r.dw_bound,
            pass: r.pass,
        })
        .collect();
    Ok(to_json(&rows))
}

#[derive(Serialize)]
struct SolveView {
    n: usize,
    residual: f64,
    /// Pointwise `|f|` and `|u|`, row-major.
    f: Vec<f64>,
    u: Vec<f64>,
}

pub fn elliptic_view(name: &str, s: f64, n: usize, lambda: f64, seed: u32) -> Result<String, String> {
    if !(4..=64).contains(&n) {
        return Err(format!("grid size {n} outside 4..=64"));
    }
    let k = kernel(name, s)?;
    let grid = GridSpec::cube(2, n, 1.0).map_err(|e| e.to_string())?;
    let ens = EnsembleConfig {
        size: 1,
        seed: seed as u64,
        ..EnsembleConfig::default()
    };
    let f = ensemble_member(&grid, 2, &ens, 0).map_err(|e| e.to_string())?;
    let table = tabulate_symbol(&grid, &k, &SymbolQuadrature::default()).map_err(|e| e.to_string())?;
    let u = solve_direct(&f, &table, lambda).map_err(|e| e.to_string())?;
    let residual = elliptic_residual(&u, &f, &table, lambda).map_err(|e| e.to_string())?;
    let magnitude = |v: &nonlocal_core::grid::VectorField| (0..grid.len()).map(|j| v.at(j)[0].hypot(v.at(j)[1])).collect();
    Ok(to_json(&SolveView {
        n,
        residual,
        f: magnitude(&f),
        u: magnitude(&u),
    }))
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// JSON array of the built-in kernel names at `s`.
#[wasm_bindgen(js_name = kernelNames)]
pub fn kernel_names_js(s: f64) -> Result<String, JsError> {
    js(kernel_names(s))
}

/// `M(ξ)` with its coercivity and growth ratios.
#[wasm_bindgen(js_name = symbolAt)]
pub fn symbol_at_js(name: &str, s: f64, xi1: f64, xi2: f64) -> Result<String, JsError> {
    js(symbol_view(name, s, xi1, xi2))
}

/// Time-integrated heat-kernel norms at 50 frequencies.
#[wasm_bindgen(js_name = heatKernel)]
pub fn heat_kernel_js(s: f64, horizon: f64) -> Result<String, JsError> {
    js(heat_kernel_rows(s, horizon))
}

/// Solve `(L + λ)u = f` for a random band-limited `f` on an `n × n` grid.
#[wasm_bindgen(js_name = solveElliptic)]
pub fn solve_elliptic_js(name: &str, s: f64, n: usize, lambda: f64, seed: u32) -> Result<String, JsError> {
    js(elliptic_view(name, s, n, lambda, seed))
}
