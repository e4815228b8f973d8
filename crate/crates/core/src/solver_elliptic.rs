//! `𝕃u + λu = f` on the periodic grid: direct per-mode inversion and a
//! continuation solver from the fractional Lamé operator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, GridSpec, SpectralField, VectorField};
use crate::kernel::KernelSpec;
use crate::linalg::{condition_number, hermitian_part, min_hermitian_eigenvalue, op_norm, singular_values, CMat, CVec};
use crate::norms::{ensemble_member, lp_norm, EnsembleConfig, EstimateReport};
use crate::operator::{apply_fraclap, apply_matrix_multiplier, apply_spectral, fraclap_multiplier};
use crate::symbol::{derive_lame_constants, symbol_lame, SymbolField, SymbolQuadrature};

/// Per-mode condition numbers above this are refused.
pub const MAX_CONDITION: f64 = 1e12;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_field(f: &VectorField, table: &SymbolField) -> Result<()> {
    if f.grid() != &table.grid {
        return Err(Error::GridMismatch("right-hand side and symbol table live on different grids".into()));
    }
    if f.components() != table.dim() {
        return Err(Error::GridMismatch(format!(
            "{} components vs symbol dimension {}",
            f.components(),
            table.dim()
        )));
    }
    Ok(())
}

fn shifted(m: &CMat, lambda: f64) -> CMat {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    a
}

/// `(M(ξ) + λI)⁻¹ f̂(ξ)` at every mode, in frequency space.
pub fn solve_direct_spectral(fhat: &SpectralField, table: &SymbolField, lambda: f64) -> Result<SpectralField> {
    check_lambda(lambda)?;
    let grid = fhat.grid().clone();
    let d = table.dim();
    let mut out = SpectralField::zeros(&grid, d);
    for j in 0..grid.len() {
        let a = shifted(table.at(j), lambda);
        let cond = condition_number(&a);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned { index: j, cond });
        }
        let v = fhat.mode(j);
        let rhs = CVec::from_iterator(d, v[..d].iter().copied());
        let x = a.lu().solve(&rhs).ok_or(Error::IllConditioned {
            index: j,
            cond: f64::INFINITY,
        })?;
        out.set_mode(j, x.as_slice());
    }
    Ok(out)
}

/// `u = F⁻¹[(M + λI)⁻¹ f̂]`.
pub fn solve_direct(f: &VectorField, table: &SymbolField, lambda: f64) -> Result<VectorField> {
    check_field(f, table)?;
    let fhat = forward_transform(f)?;
    inverse_transform(&solve_direct_spectral(&fhat, table, lambda)?)
}

/// `‖𝕃u + λu − f‖₂ / ‖f‖₂`.
pub fn elliptic_residual(u: &VectorField, f: &VectorField, table: &SymbolField, lambda: f64) -> Result<f64> {
    let lu = apply_spectral(u, table, lambda)?;
    let r = lu.combine(1.0, f, -1.0)?;
    let num = r.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = f.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if den == 0.0 { num } else { num / den })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub tau: f64,
    pub iterations: usize,
    pub relaxation: f64,
    /// Bound on the per-iteration contraction of the preconditioned error.
    pub contraction: f64,
    pub residual: f64,
    pub preconditioned_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub steps: Vec<ContinuationStep>,
    /// Residual history of the step that failed, if any.
    pub failed_history: Vec<f64>,
}

impl ContinuationTrace {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomotopyConfig {
    pub tau_steps: usize,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        HomotopyConfig {
            tau_steps: 8,
            tol: 1e-9,
            max_iterations: 2000,
        }
    }
}

/// A failed continuation run: the error and the trace up to the failure.
#[derive(Debug)]
pub struct HomotopyFailure {
    pub error: Error,
    pub trace: ContinuationTrace,
}

impl std::fmt::Display for HomotopyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} continuation steps)", self.error, self.trace.steps.len())
    }
}

impl std::error::Error for HomotopyFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for HomotopyFailure {
    fn from(error: Error) -> Self {
        HomotopyFailure {
            error,
            trace: ContinuationTrace::default(),
        }
    }
}

/// Per-mode data for the continuation: the model operator
/// `Υ₀ = α₁M^Δ + λ`, its inverse and inverse square root, and the symbol
/// `M` of the target kernel.
struct ModeData {
    model: CMat,
    model_inv: CMat,
    model_inv_sqrt: CMat,
    target: CMat,
}

fn mode_data(grid: &GridSpec, table: &SymbolField, alpha1: f64, lambda: f64, quad: &SymbolQuadrature, s: f64) -> Result<Vec<ModeData>> {
    let d = grid.dim();
    let consts = derive_lame_constants(d, s, quad)?;
    (0..grid.len())
        .map(|j| {
            let xi = grid.frequency(j)?;
            let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let model = shifted(&symbol_lame(&xi, &consts, alpha1).entries, lambda);
            // Υ₀ = p⊥(I − ξ̂ξ̂) + p∥ξ̂ξ̂, so powers act on the two eigenvalues
            let sc = if n > 0.0 { alpha1 * (2.0 * PI * n).powf(2.0 * s) } else { 0.0 };
            let (pt, pl) = (sc * consts.transverse() + lambda, sc * consts.longitudinal() + lambda);
            let power = |e: f64| {
                CMat::from_fn(d, d, |a, b| {
                    let proj = if n > 0.0 { xi[a] * xi[b] / (n * n) } else { 0.0 };
                    let id = if a == b { 1.0 } else { 0.0 };
                    let v = if d == 1 {
                        pl.powf(e)
                    } else {
                        pt.powf(e) * (id - proj) + pl.powf(e) * proj
                    };
                    Complex64::new(v, 0.0)
                })
            };
            Ok(ModeData {
                model,
                model_inv: power(-1.0),
                model_inv_sqrt: power(-0.5),
                target: table.at(j).clone(),
            })
        })
        .collect()
}

/// Smallest `max_k ‖I − ωP_k‖` over `ω`, with `P_k = Υ₀^{-1/2}Υ_τΥ₀^{-1/2}`.
/// The objective is convex in `ω`, so a golden-section search finds it.
fn optimal_relaxation(ps: &[CMat]) -> (f64, f64) {
    let d = ps[0].nrows();
    let contraction = |w: f64| -> f64 {
        ps.iter()
            .map(|p| op_norm(&(CMat::identity(d, d) - p * Complex64::new(w, 0.0))))
            .fold(0.0, f64::max)
    };
    let mx = ps.iter().map(op_norm).fold(0.0, f64::max);
    let lo_h = ps
        .iter()
        .map(|p| min_hermitian_eigenvalue(&hermitian_part(p)))
        .fold(f64::INFINITY, f64::min);
    let all_hermitian = ps.iter().all(|p| crate::linalg::is_hermitian(p, 1e-12));
    if all_hermitian && lo_h > 0.0 {
        let w = 2.0 / (lo_h + mx);
        return (w, contraction(w));
    }
    let (mut a, mut b) = (0.0, 2.0 / mx);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (contraction(c), contraction(e));
    for _ in 0..60 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = contraction(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = contraction(e);
        }
    }
    if fc < fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

fn mode_vec(spec: &SpectralField, j: usize, d: usize) -> CVec {
    CVec::from_iterator(d, spec.mode(j)[..d].iter().copied())
}

/// Continuation from the fractional Lamé operator: for `τ` marching to 1
/// over `tau_steps`, solve
/// `Υ_τ u = ((1−τ)α₁(−Δ̊)^s + τ𝕃 + λ)u = f` by relaxed Richardson iteration
/// `u ← u + ωΥ₀⁻¹(f − Υ_τ u)`, warm-started from the previous `τ`.
///
/// `ω` minimizes the contraction bound `max_k ‖I − ωΥ₀^{-1/2}Υ_τΥ₀^{-1/2}‖`
/// (for the fractional base kernel `ω = 1`). A step converges when both the
/// relative residual and the update `‖Υ₀⁻¹(f − Υ_τu)‖/‖u‖` fall below `tol`.
pub fn solve_homotopy(
    f: &VectorField,
    kernel: &KernelSpec,
    table: &SymbolField,
    lambda: f64,
    cfg: &HomotopyConfig,
    quad: &SymbolQuadrature,
) -> std::result::Result<(VectorField, ContinuationTrace), HomotopyFailure> {
    check_lambda(lambda)?;
    check_field(f, table)?;
    if cfg.tau_steps == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("need tau_steps >= 1 and tol > 0".into()).into());
    }
    let grid = f.grid().clone();
    let d = grid.dim();
    let len = grid.len();
    let alpha1 = kernel.alpha1();
    let modes = mode_data(&grid, table, alpha1, lambda, quad, kernel.s())?;
    let fhat = forward_transform(f)?;
    let fv: Vec<CVec> = (0..len).map(|j| mode_vec(&fhat, j, d)).collect();
    let fnorm = fv.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    if fnorm == 0.0 {
        return Ok((VectorField::zeros(&grid, d), ContinuationTrace::default()));
    }

    // τ = 0 is solved exactly by the model inverse
    let mut u: Vec<CVec> = modes.iter().zip(&fv).map(|(m, f)| &m.model_inv * f).collect();
    let mut trace = ContinuationTrace::default();
    for step in 1..=cfg.tau_steps {
        let tau = step as f64 / cfg.tau_steps as f64;
        let ups: Vec<CMat> = modes
            .iter()
            .map(|m| &m.model * Complex64::new(1.0 - tau, 0.0) + shifted(&m.target, 0.0) * Complex64::new(tau, 0.0) + CMat::identity(d, d) * Complex64::new(tau * lambda, 0.0))
            .collect();
        let ps: Vec<CMat> = modes
            .iter()
            .zip(&ups)
            .map(|(m, a)| &m.model_inv_sqrt * a * &m.model_inv_sqrt)
            .collect();
        let (omega, contraction) = optimal_relaxation(&ps);
        let measure = |u: &[CVec]| -> (f64, f64, Vec<CVec>) {
            let mut r2 = 0.0;
            let mut z2 = 0.0;
            let mut u2 = 0.0;
            let mut zs = Vec::with_capacity(len);
            for j in 0..len {
                let r = &fv[j] - &ups[j] * &u[j];
                let z = &modes[j].model_inv * &r;
                r2 += r.norm_squared();
                z2 += z.norm_squared();
                u2 += u[j].norm_squared();
                zs.push(z);
            }
            let rel_update = if u2 > 0.0 { (z2 / u2).sqrt() } else { f64::INFINITY };
            (r2.sqrt() / fnorm, rel_update, zs)
        };
        let (mut res, mut upd, mut zs) = measure(&u);
        let mut history = vec![res];
        let mut iterations = 0;
        let mut growth = 0;
        while !(res <= cfg.tol && upd <= cfg.tol) {
            if iterations == cfg.max_iterations {
                trace.failed_history = history;
                return Err(HomotopyFailure {
                    error: Error::NotConverged {
                        tau,
                        iterations,
                        residual: res,
                    },
                    trace,
                });
            }
            for (uj, zj) in u.iter_mut().zip(&zs) {
                *uj += zj * Complex64::new(omega, 0.0);
            }
            iterations += 1;
            let prev = res;
            (res, upd, zs) = measure(&u);
            history.push(res);
            growth = if res > prev { growth + 1 } else { 0 };
            if growth >= 5 || !res.is_finite() {
                trace.failed_history = history;
                return Err(HomotopyFailure {
                    error: Error::Diverged {
                        tau,
                        iterations,
                        residual: res,
                    },
                    trace,
                });
            }
        }
        trace.steps.push(ContinuationStep {
            tau,
            iterations,
            relaxation: omega,
            contraction,
            residual: res,
            preconditioned_residual: upd,
        });
    }
    let coeffs: Vec<Complex64> = (0..d).flat_map(|c| u.iter().map(move |v| v[c])).collect();
    let uhat = SpectralField::new(grid, d, coeffs)?;
    Ok((inverse_transform(&uhat)?, trace))
}

/// `((2π|ξ|)^{2s}+λ)·σ_max((M+λI)⁻¹)`-type quantities over the nonzero
/// lower-band modes: `(sup σ_max(a(M+λ)⁻¹), sup σ_max(λ(M+λ)⁻¹))` with
/// `a = (2π|ξ|)^{2s}`. Their sum bounds the `p = 2` elliptic ratio.
pub fn elliptic_mode_suprema(table: &SymbolField, s: f64, lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    let grid = &table.grid;
    let mut sa = 0.0f64;
    let mut sl = 0.0f64;
    for j in 0..grid.len() {
        if !grid.in_lower_band(j) {
            continue;
        }
        let inv = shifted(table.at(j), lambda).try_inverse().ok_or(Error::IllConditioned {
            index: j,
            cond: f64::INFINITY,
        })?;
        let smax = singular_values(&inv).into_iter().fold(0.0, f64::max);
        sa = sa.max(fraclap_multiplier(grid, j, s) * smax);
        sl = sl.max(lambda * smax);
    }
    Ok((sa, sl))
}

/// Empirical `max (‖(−Δ)^s u‖_p + λ‖u‖_p)/‖f‖_p` over a doubled ensemble of
/// random band-limited `f`, with `u` from [`solve_direct`]. At `p = 2` the
/// report carries the rigorous per-mode bound.
pub fn estimate_ratio_elliptic(
    kernel: &KernelSpec,
    table: &SymbolField,
    lambda: f64,
    p: f64,
    ens: &EnsembleConfig,
) -> Result<EstimateReport> {
    check_lambda(lambda)?;
    let grid = table.grid.clone();
    let d = grid.dim();
    let s = kernel.s();
    let big = ens.doubled();
    let mut samples = Vec::with_capacity(big.size);
    for i in 0..big.size {
        let f = ensemble_member(&grid, d, &big, i)?;
        let fnorm = lp_norm(&f, p)?;
        if fnorm == 0.0 {
            return Err(Error::DegenerateEnsemble(format!("member {i} is identically zero")));
        }
        let u = solve_direct(&f, table, lambda)?;
        let lhs = lp_norm(&apply_fraclap(&u, s)?, p)? + lambda * lp_norm(&u, p)?;
        samples.push(lhs / fnorm);
    }
    let mut rep = EstimateReport::from_samples("elliptic", &grid, p, lambda, ens.seed, samples)?;
    rep.kernel = Some(kernel.config());
    if p == 2.0 {
        let (a, b) = elliptic_mode_suprema(table, s, lambda)?;
        rep.bound = Some(a + b);
    }
    Ok(rep)
}

/// `f ↦ F⁻¹[(M+λ)⁻¹ f̂]` followed by `F⁻¹[(M+λ)û]`; used by tests of the
/// two-sided inverse property.
pub fn apply_then_solve(u: &VectorField, table: &SymbolField, lambda: f64) -> Result<VectorField> {
    solve_direct(&apply_spectral(u, table, lambda)?, table, lambda)
}

/// Multiply by `(M + λI)` in frequency space.
pub fn apply_shifted_spectral(spec: &SpectralField, table: &SymbolField, lambda: f64) -> Result<SpectralField> {
    apply_matrix_multiplier(spec, |j| shifted(table.at(j), lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::builtin_kernels;
    use crate::operator::rel_l2;
    use crate::symbol::{tabulate_lame, tabulate_symbol};

    fn setup(n: usize, s: f64, which: usize) -> (GridSpec, KernelSpec, SymbolField, SymbolQuadrature) {
        let g = GridSpec::cube(2, n, 1.0).unwrap();
        let q = SymbolQuadrature::default();
        let k = builtin_kernels(2, s).unwrap().swap_remove(which).1;
        let t = tabulate_symbol(&g, &k, &q).unwrap();
        (g, k, t, q)
    }

    #[test]
    fn constant_right_hand_side() {
        let (g, _, t, _) = setup(8, 0.5, 1);
        let f = VectorField::new(g.clone(), 2, [vec![2.0; g.len()], vec![-1.0; g.len()]].concat()).unwrap();
        let u = solve_direct(&f, &t, 4.0).unwrap();
        for j in 0..g.len() {
            let v = u.at(j);
            assert!((v[0] - 0.5).abs() < 1e-14 && (v[1] + 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn left_and_right_inverse() {
        let (g, _, t, _) = setup(16, 0.75, 4);
        let ens = EnsembleConfig::default();
        for lambda in [0.1, 1.0, 10.0] {
            let u = ensemble_member(&g, 2, &ens, 0).unwrap();
            let back = apply_then_solve(&u, &t, lambda).unwrap();
            assert!(rel_l2(&back, &u) < 1e-10);
            let sol = solve_direct(&u, &t, lambda).unwrap();
            assert!(elliptic_residual(&sol, &u, &t, lambda).unwrap() < 1e-10);
        }
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let (g, _, t, _) = setup(8, 0.5, 0);
        let f = VectorField::zeros(&g, 2);
        assert!(matches!(solve_direct(&f, &t, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(solve_direct(&f, &t, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn lame_gradient_mode() {
        let g = GridSpec::cube(2, 16, 1.0).unwrap();
        let q = SymbolQuadrature::default();
        let s = 0.25;
        let c = derive_lame_constants(2, s, &q).unwrap();
        let t = tabulate_lame(&g, &c, 1.0).unwrap();
        let k = [3.0, 1.0];
        let f = VectorField::from_fn(&g, 2, |x, out| {
            let ph = (2.0 * PI * (k[0] * x[0] + k[1] * x[1])).cos();
            out[0] = k[0] * ph;
            out[1] = k[1] * ph;
        });
        let lambda = 0.7;
        let u = solve_direct(&f, &t, lambda).unwrap();
        let kn = (k[0] * k[0] + k[1] * k[1]).sqrt();
        let factor = 1.0 / ((2.0 * PI * kn).powf(2.0 * s) * c.longitudinal() + lambda);
        assert!(rel_l2(&u, &f.scaled(factor)) < 1e-12);
    }

    #[test]
    fn fractional_base_converges_immediately() {
        let (g, k, t, q) = setup(16, 0.5, 0);
        let f = ensemble_member(&g, 2, &EnsembleConfig::default(), 1).unwrap();
        let cfg = HomotopyConfig {
            tol: 1e-9,
            ..Default::default()
        };
        let (u, trace) = solve_homotopy(&f, &k, &t, 1.0, &cfg, &q).unwrap();
        assert!(trace.steps.iter().all(|s| s.iterations <= 1), "{trace:?}");
        let direct = solve_direct(&f, &t, 1.0).unwrap();
        assert!(rel_l2(&u, &direct) < 10.0 * cfg.tol);
    }

    #[test]
    fn homotopy_matches_direct_and_is_path_independent() {
        let (g, k, t, q) = setup(16, 0.75, 1);
        let f = ensemble_member(&g, 2, &EnsembleConfig::default(), 2).unwrap();
        let direct = solve_direct(&f, &t, 1.0).unwrap();
        let mut counts = Vec::new();
        for steps in [1, 8] {
            let cfg = HomotopyConfig {
                tau_steps: steps,
                tol: 1e-9,
                ..Default::default()
            };
            let (u, trace) = solve_homotopy(&f, &k, &t, 1.0, &cfg, &q).unwrap();
            assert!(rel_l2(&u, &direct) < 10.0 * cfg.tol);
            assert_eq!(trace.steps.len(), steps);
            counts.push(trace.total_iterations());
        }
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn iteration_cap_is_reported_with_trace() {
        let (g, k, t, q) = setup(8, 0.75, 2);
        let f = ensemble_member(&g, 2, &EnsembleConfig::default(), 0).unwrap();
        let cfg = HomotopyConfig {
            tau_steps: 2,
            tol: 1e-14,
            max_iterations: 3,
        };
        let err = solve_homotopy(&f, &k, &t, 1.0, &cfg, &q).unwrap_err();
        assert!(matches!(err.error, Error::NotConverged { iterations: 3, .. }));
        assert_eq!(err.trace.failed_history.len(), 4);
    }

    #[test]
    fn large_lambda_ratio_approaches_bound() {
        let (_, k, t, _) = setup(8, 0.5, 1);
        let ens = EnsembleConfig {
            size: 4,
            ..Default::default()
        };
        let rep = estimate_ratio_elliptic(&k, &t, 1e6, 2.0, &ens).unwrap();
        assert!(rep.ratio_max <= 1.0 + 1e-3);
        let small = estimate_ratio_elliptic(&k, &t, 0.5, 2.0, &ens).unwrap();
        assert!(small.ratio_max <= small.bound.unwrap() + 1e-8);
    }
}
