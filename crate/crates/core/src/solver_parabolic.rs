//! `∂ₜu + 𝕃u + λu = g` with `u(0) = 0`, solved per mode through the matrix
//! heat kernel `exp(−t(M(ξ)+λI))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, GridSpec, SpectralField, VectorField};
use crate::kernel::KernelSpec;
use crate::linalg::{is_hermitian, op_norm, CMat, CVec};
use crate::norms::{ensemble_spectrum, lp_norm, space_time_norm, EnsembleConfig, EstimateReport};
use crate::operator::apply_matrix_multiplier;
use crate::quadrature::adaptive_gk15;
use crate::symbol::{LameConstants, SymbolField};

#[derive(Clone, Debug, PartialEq)]
pub struct HeatKernelEval {
    pub t: f64,
    pub xi: Vec<f64>,
    pub matrix: CMat,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    Ok(())
}

/// `exp(−tα₁M^Δ(ξ)) = e^{−at}I + (e^{−bt} − e^{−at})ξ̂⊗ξ̂` with
/// `a = α₁ℓ₁(2π|ξ|)^{2s}` and `b = α₁(ℓ₁+ℓ₂)(2π|ξ|)^{2s}`.
pub fn heat_kernel_lame(t: f64, xi: &[f64], consts: &LameConstants, alpha1: f64) -> Result<HeatKernelEval> {
    check_time(t)?;
    let d = xi.len();
    let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sc = if n > 0.0 { alpha1 * (2.0 * PI * n).powf(2.0 * consts.s) } else { 0.0 };
    let ea = (-sc * consts.transverse() * t).exp();
    let eb = (-sc * consts.longitudinal() * t).exp();
    let matrix = CMat::from_fn(d, d, |i, j| {
        let v = if d == 1 {
            eb
        } else {
            let proj = if n > 0.0 { xi[i] * xi[j] / (n * n) } else { 0.0 };
            let id = if i == j { 1.0 } else { 0.0 };
            ea * id + (eb - ea) * proj
        };
        Complex64::new(v, 0.0)
    });
    Ok(HeatKernelEval {
        t,
        xi: xi.to_vec(),
        matrix,
    })
}

/// `f(A)` for Hermitian `A` through its eigendecomposition.
fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let h = (a + a.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let d = a.nrows();
    let diag = CMat::from_diagonal(&CVec::from_iterator(d, eig.eigenvalues.iter().map(|&l| Complex64::new(f(l), 0.0))));
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

fn checked_exp(m: &CMat) -> Result<CMat> {
    let e = m.exp();
    if e.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(e)
    } else {
        Err(Error::Exponential("scaling and squaring produced non-finite entries".into()))
    }
}

/// `exp(−t(M + λI))`. Hermitian symbols go through the eigendecomposition,
/// others through scaling-and-squaring Padé. The result is checked against
/// `‖·‖ ≤ e^{−tλ}`, which holds whenever the Hermitian part of `M` is
/// positive semidefinite.
pub fn heat_kernel_matrix(t: f64, m: &CMat, lambda: f64) -> Result<CMat> {
    check_time(t)?;
    let d = m.nrows();
    let w = if is_hermitian(m, 1e-13) {
        hermitian_function(m, |l| (-t * (l + lambda)).exp())
    } else {
        let mut a = m * Complex64::new(-t, 0.0);
        for i in 0..d {
            a[(i, i)] -= t * lambda;
        }
        checked_exp(&a)?
    };
    let bound = (-t * lambda).exp();
    let nrm = op_norm(&w);
    if nrm > bound * (1.0 + 1e-10) + 1e-14 {
        return Err(Error::Exponential(format!(
            "heat kernel norm {nrm:.6e} exceeds the contraction bound {bound:.6e}"
        )));
    }
    Ok(w)
}

pub fn heat_kernel_general(t: f64, table: &SymbolField, index: usize, lambda: f64) -> Result<HeatKernelEval> {
    let grid = &table.grid;
    if index >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: grid.len(),
        });
    }
    Ok(HeatKernelEval {
        t,
        xi: grid.frequency(index)?,
        matrix: heat_kernel_matrix(t, table.at(index), lambda)?,
    })
}

/// `∫₀^h exp(−rA) dr = A⁻¹(I − e^{−hA})`, continuous through singular `A`
/// (it is `hI` at `A = 0`).
pub fn phi1_integral(h: f64, a: &CMat) -> Result<CMat> {
    check_time(h)?;
    let d = a.nrows();
    if is_hermitian(a, 1e-13) {
        return Ok(hermitian_function(a, |l| {
            let z = h * l;
            if z.abs() < 1e-8 {
                h * (1.0 - 0.5 * z + z * z / 6.0)
            } else {
                -(-z).exp_m1() / l
            }
        }));
    }
    // exp([[−hA, hI], [0, 0]]) carries the integral in its upper-right block
    let mut big = CMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            big[(i, j)] = a[(i, j)] * (-h);
        }
        big[(i, d + i)] = Complex64::new(h, 0.0);
    }
    let e = checked_exp(&big)?;
    Ok(e.view((0, d), (d, d)).into_owned())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Closed form `û(t) = (M+λ)⁻¹(I − e^{−t(M+λ)})ĝ`; time-constant forcing only.
    ExactPerMode,
    /// `û(t+h) = Eû(t) + (M+λ)⁻¹(I−E)ĝ(t)` with `E = e^{−h(M+λ)}`.
    ExponentialEuler,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, scheme: TimeScheme) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs T > 0 and steps >= 1, got T = {horizon}, steps = {steps}"
            )));
        }
        Ok(TimeGrid { horizon, steps, scheme })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| n as f64 * self.step()).collect()
    }
}

/// Forcing for [`solve_duhamel`]: one field held constant in time, or the
/// values `g(t_n)` at the left end of each step (`steps` or `steps + 1`
/// samples; a trailing sample is ignored).
#[derive(Clone, Copy, Debug)]
pub enum Forcing<'a> {
    Constant(&'a VectorField),
    Sequence(&'a [VectorField]),
}

fn spectral_forcing(g: Forcing<'_>, tg: &TimeGrid, table: &SymbolField) -> Result<Vec<SpectralField>> {
    let fields: Vec<&VectorField> = match g {
        Forcing::Constant(f) => vec![f],
        Forcing::Sequence(seq) => {
            if seq.len() != tg.steps && seq.len() != tg.steps + 1 {
                return Err(Error::InvalidParameter(format!(
                    "forcing has {} samples, time grid needs {} or {}",
                    seq.len(),
                    tg.steps,
                    tg.steps + 1
                )));
            }
            seq[..tg.steps].iter().collect()
        }
    };
    fields
        .iter()
        .map(|f| {
            if f.grid() != &table.grid || f.components() != table.dim() {
                return Err(Error::GridMismatch("forcing and symbol table do not match".into()));
            }
            forward_transform(f)
        })
        .collect()
}

fn shifted(m: &CMat, lambda: f64) -> CMat {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    a
}

fn mode_vec(spec: &SpectralField, j: usize, d: usize) -> CVec {
    CVec::from_iterator(d, spec.mode(j)[..d].iter().copied())
}

/// Spectral trajectory at every node `t_0 = 0, …, t_N = T`.
pub fn solve_duhamel_spectral(g: Forcing<'_>, table: &SymbolField, lambda: f64, tg: &TimeGrid) -> Result<Vec<SpectralField>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    let gs = spectral_forcing(g, tg, table)?;
    let grid = table.grid.clone();
    let d = table.dim();
    let len = grid.len();
    let h = tg.step();
    let times = tg.times();
    let mut traj: Vec<Vec<CVec>> = vec![vec![CVec::zeros(d); len]; tg.steps + 1];
    match tg.scheme {
        TimeScheme::ExactPerMode => {
            if gs.len() != 1 {
                return Err(Error::InvalidParameter(
                    "the exact per-mode scheme needs time-constant forcing".into(),
                ));
            }
            for j in 0..len {
                let a = shifted(table.at(j), lambda);
                let gj = mode_vec(&gs[0], j, d);
                for (n, &t) in times.iter().enumerate().skip(1) {
                    traj[n][j] = phi1_integral(t, &a).map_err(|e| Error::at_mode(j, e))? * &gj;
                }
            }
        }
        TimeScheme::ExponentialEuler => {
            for j in 0..len {
                let a = shifted(table.at(j), lambda);
                let e = heat_kernel_matrix(h, table.at(j), lambda).map_err(|e| Error::at_mode(j, e))?;
                let f = phi1_integral(h, &a).map_err(|e| Error::at_mode(j, e))?;
                for n in 0..tg.steps {
                    let gn = mode_vec(&gs[n.min(gs.len() - 1)], j, d);
                    traj[n + 1][j] = &e * &traj[n][j] + &f * gn;
                }
            }
        }
    }
    traj.into_iter()
        .map(|modes| {
            let coeffs: Vec<Complex64> = (0..d).flat_map(|c| modes.iter().map(move |v| v[c])).collect();
            SpectralField::new(grid.clone(), d, coeffs)
        })
        .collect()
}

/// `u(t_n)` for `n = 0..=steps`.
pub fn solve_duhamel(g: Forcing<'_>, table: &SymbolField, lambda: f64, tg: &TimeGrid) -> Result<Vec<VectorField>> {
    solve_duhamel_spectral(g, table, lambda, tg)?
        .iter()
        .map(inverse_transform)
        .collect()
}

/// One row of [`heat_kernel_time_integral_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelRow {
    pub xi: Vec<f64>,
    pub xi_norm: f64,
    /// `∫₀ᵀ‖W(t,ξ)‖dt` and its bound.
    pub w_integral: f64,
    pub w_bound: f64,
    /// `∫₀ᵀ‖∂ₜW(t,ξ)‖dt` and its bound.
    pub dw_integral: f64,
    pub dw_bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelReport {
    pub horizon: f64,
    pub slack: f64,
    pub rows: Vec<HeatKernelRow>,
    pub pass: bool,
}

impl HeatKernelReport {
    pub fn failures(&self) -> impl Iterator<Item = &HeatKernelRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

/// Integrates the operator norms of `W = exp(−tα₁M^Δ)` and `∂ₜW` over
/// `(0,T)` adaptively and compares them with `3` (for `|ξ| ≤ 1`),
/// `3(α₁ℓ₁)⁻¹(2π|ξ|)^{−2s}` (for `|ξ| > 1`) and `3` respectively.
pub fn heat_kernel_time_integral_check(
    xi_samples: &[Vec<f64>],
    horizon: f64,
    consts: &LameConstants,
    alpha1: f64,
    slack: f64,
) -> Result<HeatKernelReport> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {horizon}")));
    }
    let s = consts.s;
    let mut rows = Vec::with_capacity(xi_samples.len());
    for xi in xi_samples {
        let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let m = crate::symbol::symbol_lame(xi, consts, alpha1).entries;
        let norm_w = |t: f64| op_norm(&heat_kernel_lame(t, xi, consts, alpha1).expect("t >= 0").matrix);
        let norm_dw = |t: f64| op_norm(&(&m * heat_kernel_lame(t, xi, consts, alpha1).expect("t >= 0").matrix));
        // panels doubling from a fraction of the fastest decay time, so the
        // initial layer of width ~1/‖M‖ is resolved
        let mut breaks = vec![0.0];
        let mut t = 1e-3 / op_norm(&m).max(1e-300);
        while t < horizon {
            breaks.push(t);
            t *= 2.0;
        }
        // ‖∂ₜW‖ = max_i μ_i e^{−tμ_i} has kinks where two branches cross
        let mu = crate::linalg::hermitian_eigenvalues(&m);
        for (i, &a) in mu.iter().enumerate() {
            for &b in &mu[i + 1..] {
                if a > 0.0 && b > 0.0 && (b - a).abs() > 1e-12 * b {
                    let tc = (b / a).ln() / (b - a);
                    if tc > 0.0 && tc < horizon {
                        breaks.push(tc);
                    }
                }
            }
        }
        breaks.push(horizon);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let tol = 1e-3 * slack / breaks.len() as f64;
        let (mut w, mut dw) = (0.0, 0.0);
        for p in breaks.windows(2) {
            w += adaptive_gk15(p[0], p[1], tol, 1e-12, 2000, norm_w)?.value;
            dw += adaptive_gk15(p[0], p[1], tol, 1e-12, 2000, norm_dw)?.value;
        }
        let w_bound = if n <= 1.0 {
            3.0
        } else {
            3.0 / (alpha1 * consts.ell1) * (2.0 * PI * n).powf(-2.0 * s)
        };
        let dw_bound = 3.0;
        let pass = w <= w_bound + slack && dw <= dw_bound + slack;
        rows.push(HeatKernelRow {
            xi: xi.clone(),
            xi_norm: n,
            w_integral: w,
            w_bound,
            dw_integral: dw,
            dw_bound,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(HeatKernelReport {
        horizon,
        slack,
        rows,
        pass,
    })
}

/// Deterministic frequencies with `|ξ|` log-spaced in `[lo, hi]` and
/// golden-angle directions (the first axis in one dimension).
pub fn sample_frequencies(d: usize, count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            let r = lo * (hi / lo).powf(f);
            let th = golden * i as f64;
            match d {
                1 => vec![r],
                2 => vec![r * th.cos(), r * th.sin()],
                _ => {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    vec![r * rho * th.cos(), r * rho * th.sin(), r * z]
                }
            }
        })
        .collect()
}

/// Trapezoid weights on the nodes of a uniform time grid.
pub fn trapezoid_weights(tg: &TimeGrid) -> Vec<f64> {
    let h = tg.step();
    (0..=tg.steps)
        .map(|n| if n == 0 || n == tg.steps { 0.5 * h } else { h })
        .collect()
}

/// Which operator appears in the evolution and which in the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParabolicVariant {
    /// `∂ₜu + 𝕃u + λu = g`, measuring `‖(−Δ)^s u‖`.
    KernelEvolution,
    /// `∂ₜu + (−Δ)^s u + λu = g`, measuring `‖𝕃u‖`.
    FracLaplacianEvolution,
}

/// Space-time forcing for ensemble member `index`:
/// `g(t) = G₀ + cos(2πt/T + φ)·G₁` with `G₀, G₁` band-limited ensemble
/// fields and `φ` from the member index.
pub fn ensemble_forcing(grid: &GridSpec, tg: &TimeGrid, ens: &EnsembleConfig, index: usize) -> Result<Vec<VectorField>> {
    let d = grid.dim();
    let g0 = inverse_transform(&ensemble_spectrum(grid, d, ens, 2 * index))?;
    let g1 = inverse_transform(&ensemble_spectrum(grid, d, ens, 2 * index + 1))?;
    let phase = 0.7 * index as f64;
    tg.times()
        .iter()
        .map(|&t| g0.combine(1.0, &g1, (2.0 * PI * t / tg.horizon + phase).cos()))
        .collect()
}

/// Per-mode bound on the `p = 2` parabolic ratio: with `A = M+λI`,
/// `κ = ∫₀ᵀ‖e^{−tA}‖dt ≤ (1−e^{−μT})/μ` (`μ` the smallest Hermitian
/// eigenvalue of `A`), Young's inequality gives `‖u‖ ≤ κ‖g‖`,
/// `‖Au‖ ≤ ‖A‖κ‖g‖` and `‖∂ₜu‖ ≤ (1 + ‖A‖κ)‖g‖` mode by mode.
pub fn parabolic_mode_bound(measure: &SymbolField, evolution: &SymbolField, lambda: f64, horizon: f64) -> Result<f64> {
    let grid = &evolution.grid;
    let (mut sd, mut sm, mut sl) = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..grid.len() {
        if !grid.in_lower_band(j) {
            continue;
        }
        let a = shifted(evolution.at(j), lambda);
        let mu = crate::linalg::min_hermitian_eigenvalue(&a).max(0.0);
        let kappa = if mu * horizon < 1e-12 {
            horizon
        } else {
            -(-mu * horizon).exp_m1() / mu
        };
        sd = sd.max(1.0 + op_norm(&a) * kappa);
        sm = sm.max(op_norm(measure.at(j)) * kappa);
        sl = sl.max(lambda * kappa);
    }
    Ok(sd + sm + sl)
}

/// Empirical `max (‖∂ₜu‖_p + ‖Bu‖_p + λ‖u‖_p)/‖g‖_p` in space-time `L^p`
/// (`L^p` in time of spatial `L^p` norms, trapezoid in time) over a doubled
/// ensemble, where the evolution operator and `B` are chosen by `variant`.
/// At `p = 2` the report carries [`parabolic_mode_bound`].
#[allow(clippy::too_many_arguments)]
pub fn estimate_ratio_parabolic(
    kernel: &KernelSpec,
    table: &SymbolField,
    lambda: f64,
    p: f64,
    tg: &TimeGrid,
    ens: &EnsembleConfig,
    variant: ParabolicVariant,
) -> Result<EstimateReport> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    let grid = table.grid.clone();
    let s = kernel.s();
    let frac = crate::norms::tabulate_fraclap(&grid, s);
    let (evolution, measure) = match variant {
        ParabolicVariant::KernelEvolution => (table, &frac),
        ParabolicVariant::FracLaplacianEvolution => (&frac, table),
    };
    let tg = TimeGrid {
        scheme: TimeScheme::ExponentialEuler,
        ..*tg
    };
    let weights = trapezoid_weights(&tg);
    let big = ens.doubled();
    let mut samples = Vec::with_capacity(big.size);
    for i in 0..big.size {
        let g = ensemble_forcing(&grid, &tg, &big, i)?;
        let traj = solve_duhamel_spectral(Forcing::Sequence(&g), evolution, lambda, &tg)?;
        let mut gn = Vec::with_capacity(g.len());
        let (mut dn, mut bn, mut un) = (Vec::new(), Vec::new(), Vec::new());
        for (n, uh) in traj.iter().enumerate() {
            // ∂ₜu = g − (A + λ)u at the node, with g its value on the step starting there
            let gidx = n.min(tg.steps - 1);
            let au = apply_matrix_multiplier(uh, |j| shifted(evolution.at(j), lambda))?;
            let gh = forward_transform(&g[gidx])?;
            let mut dt = gh.clone();
            for (z, a) in dt.coeffs_mut().iter_mut().zip(au.coeffs()) {
                *z -= a;
            }
            let bu = apply_matrix_multiplier(uh, |j| measure.at(j).clone())?;
            gn.push(lp_norm(&g[n], p)?);
            dn.push(lp_norm(&inverse_transform(&dt)?, p)?);
            bn.push(lp_norm(&inverse_transform(&bu)?, p)?);
            un.push(lp_norm(&inverse_transform(uh)?, p)?);
        }
        let gnorm = space_time_norm(&gn, &weights, p);
        if gnorm == 0.0 {
            return Err(Error::DegenerateEnsemble(format!("member {i} has zero forcing")));
        }
        let lhs = space_time_norm(&dn, &weights, p) + space_time_norm(&bn, &weights, p) + lambda * space_time_norm(&un, &weights, p);
        samples.push(lhs / gnorm);
    }
    let label = match variant {
        ParabolicVariant::KernelEvolution => "parabolic",
        ParabolicVariant::FracLaplacianEvolution => "parabolic-frac-laplacian",
    };
    let mut rep = EstimateReport::from_samples(label, &grid, p, lambda, ens.seed, samples)?;
    rep.kernel = Some(kernel.config());
    if p == 2.0 {
        rep.bound = Some(parabolic_mode_bound(measure, evolution, lambda, tg.horizon)?);
    }
    Ok(rep)
}
