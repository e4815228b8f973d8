//! Fourier matrix symbols.
//!
//! Sign convention: `M(ξ)` is the symbol of `𝕃` itself, so that
//! `(𝕃u)^(ξ) = M(ξ) û(ξ)` and
//! `M(ξ) = ∫ (ŷ⊗ŷ)(1 - e^{2πiξ·y} + 2πiξ·y χ(y)) K(y) dy`.
//! Its Hermitian part `M^e = ∫ (ŷ⊗ŷ)(1 - cos 2πξ·y) K^e(y) dy` is positive
//! semidefinite.

pub mod angular;
pub mod radial;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::kernel::{dot, KernelSpec};
use crate::linalg::{self, CMat};
use crate::quadrature::sphere_area;

pub use angular::{adapted_rule, AngularConfig};
pub(crate) use angular::frame as angular_frame;
pub use radial::{unit_integral, RadialConfig, RadialFactors, Weight};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct SymbolQuadrature {
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub angular: AngularConfig,
}

impl SymbolQuadrature {
    /// A strictly finer configuration, used as the second level of
    /// two-level checks.
    pub fn refined(&self) -> Self {
        let mut q = self.clone();
        q.radial.tol *= 0.1;
        q.radial.panel_width *= 0.5;
        q.radial.u_max *= 2.0;
        q.radial.inner_eps *= 0.1;
        q.angular.order += 8;
        q.angular.min_width *= 1e-2;
        q.angular.max_width *= 0.5;
        q.angular.azimuth *= 2;
        q
    }
}

/// `M(ξ)` at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMatrix {
    pub xi: Vec<f64>,
    pub entries: CMat,
}

impl SymbolMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.entries)
    }

    pub fn hermitian_part(&self) -> CMat {
        linalg::hermitian_part(&self.entries)
    }

    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.entries)
    }

    /// Largest `|Im M_ij|`.
    pub fn max_imag(&self) -> f64 {
        self.entries.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// `(2π|ξ|)^{2s}`.
    pub fn scale(&self, s: f64) -> f64 {
        frac_scale(&self.xi, s)
    }
}

/// `(2π|ξ|)^{2s}`.
pub fn frac_scale(xi: &[f64], s: f64) -> f64 {
    let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        0.0
    } else {
        (2.0 * PI * n).powf(2.0 * s)
    }
}

fn pad(xi: &[f64], d: usize) -> Result<(Vec3, f64)> {
    if xi.len() != d {
        return Err(Error::InvalidParameter(format!(
            "frequency has {} components, kernel dimension is {d}",
            xi.len()
        )));
    }
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite frequency".into()));
    }
    let mut v = [0.0; 3];
    v[..d].copy_from_slice(xi);
    let n = dot(&v, &v).sqrt();
    Ok((v, n))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    Full,
    Even,
}

fn radial_factors(kernel: &KernelSpec, part: Part, quad: &SymbolQuadrature) -> Result<RadialFactors> {
    let (amp, omega) = kernel.radial().log_params();
    let odd = part == Part::Full && !kernel.is_even();
    RadialFactors::new(kernel.s(), amp, omega, odd, &quad.radial)
}

/// Sum over an adapted angular rule. `weight` receives `ŷ` and the scalar
/// angular-radial integrand and accumulates it.
fn angular_sum(
    xi: &[f64],
    kernel: &KernelSpec,
    part: Part,
    quad: &SymbolQuadrature,
    mut acc: impl FnMut(&Vec3, Complex64),
) -> Result<()> {
    let d = kernel.dim();
    let (v, n) = pad(xi, d)?;
    if n == 0.0 {
        return Ok(());
    }
    let f = radial_factors(kernel, part, quad)?;
    let axis = [v[0] / n, v[1] / n, v[2] / n];
    let rule = adapted_rule(d, &axis, &kernel.profile_breaks_2d(), &quad.angular);
    let norm = 1.0 - kernel.s();
    for (y, w) in &rule {
        let c = 2.0 * PI * dot(&v, y);
        let (ae, ao) = kernel.profile_parts(y);
        let re = if ae != 0.0 { ae * f.re(c) } else { 0.0 };
        let im = if part == Part::Full && ao != 0.0 { -ao * f.im(c) } else { 0.0 };
        acc(y, Complex64::new(re, im) * (w * norm));
    }
    Ok(())
}

fn matrix_symbol(xi: &[f64], kernel: &KernelSpec, part: Part, quad: &SymbolQuadrature) -> Result<SymbolMatrix> {
    let d = kernel.dim();
    let mut m = CMat::zeros(d, d);
    angular_sum(xi, kernel, part, quad, |y, z| {
        for i in 0..d {
            for j in i..d {
                m[(i, j)] += z * (y[i] * y[j]);
            }
        }
    })?;
    for i in 0..d {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    Ok(SymbolMatrix {
        xi: xi.to_vec(),
        entries: m,
    })
}

/// `M(ξ)` for a general kernel.
pub fn symbol_general(xi: &[f64], kernel: &KernelSpec, quad: &SymbolQuadrature) -> Result<SymbolMatrix> {
    let m = matrix_symbol(xi, kernel, Part::Full, quad)?;
    let (_, n) = pad(xi, kernel.dim())?;
    if n > 0.0 {
        let bound = growth_bound(kernel, n) * frac_scale(xi, kernel.s());
        let norm = m.norm();
        if norm > bound * (1.0 + 1e-8) {
            return Err(Error::CertificationFailed { bound: norm, tol: bound });
        }
    }
    Ok(m)
}

/// `M^e(ξ)`, the symbol of the even part of the kernel.
pub fn symbol_even_part(xi: &[f64], kernel: &KernelSpec, quad: &SymbolQuadrature) -> Result<SymbolMatrix> {
    matrix_symbol(xi, kernel, Part::Even, quad)
}

/// Symbol of the scalar operator with the same kernel (weight 1 instead of
/// `ŷ⊗ŷ`), acting componentwise.
pub fn symbol_scalar(xi: &[f64], kernel: &KernelSpec, quad: &SymbolQuadrature) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    angular_sum(xi, kernel, Part::Full, quad, |_, z| acc += z)?;
    Ok(acc)
}

/// Root of `u³ = 6(u + 1)`, where `u³/6` stops being the sharper bound
/// for `|sin u - u|`.
fn cubic_crossover() -> f64 {
    let mut u: f64 = 3.0;
    for _ in 0..60 {
        u -= (u * u * u - 6.0 * u - 6.0) / (3.0 * u * u - 6.0);
    }
    u
}

/// Bound on `|Iim(c)|` at `s = 1/2` for `c > 0`; increasing in `c`.
fn half_order_odd_bound(c: f64) -> f64 {
    let us = cubic_crossover();
    let m = c.min(us);
    let mut g = m * m / 12.0;
    if c > us {
        g += (c / us).ln() + 1.0 / us - 1.0 / c;
    }
    // beyond c: |sin u| ≤ min(u, 1)
    g += if c < 1.0 { 1.0 - c.ln() } else { 1.0 / c };
    c * g
}

/// `B` with `‖M(ξ)‖ ≤ B·(2π|ξ|)^{2s}`.
///
/// Uses `1 - cos u ≤ min(u²/2, 2)`, `|sin u| ≤ min(u, 1)` (s < 1/2),
/// `|sin u - u| ≤ min(u³/6, u + 1)` (s > 1/2), `a^e·m ≤ α₂` and
/// `|a^o|·m ≤ (α₂ - α₁)/2`. At `s = 1/2` with an odd profile the bound
/// depends on `|ξ|`.
pub fn growth_bound(kernel: &KernelSpec, xi_norm: f64) -> f64 {
    let s = kernel.s();
    let (a1, a2) = (kernel.alpha1(), kernel.alpha2());
    let area = sphere_area(kernel.dim());
    let g_re = 2f64.powf(2.0 - 2.0 * s) / (4.0 - 4.0 * s) + 2f64.powf(-2.0 * s) / s;
    let g_im = if kernel.is_even() {
        0.0
    } else if s < 0.5 {
        1.0 / (1.0 - 2.0 * s) + 1.0 / (2.0 * s)
    } else if s > 0.5 {
        let u = cubic_crossover();
        u.powf(3.0 - 2.0 * s) / (6.0 * (3.0 - 2.0 * s)) + u.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0)
            + u.powf(-2.0 * s) / (2.0 * s)
    } else {
        let c = 2.0 * PI * xi_norm;
        if c > 0.0 {
            half_order_odd_bound(c) / c
        } else {
            0.0
        }
    };
    (1.0 - s) * area * (a2 * g_re + 0.5 * (a2 - a1) * g_im)
}

/// Constants of the fractional Lamé symbol
/// `(2π|ξ|)^{2s}(ℓ₁ I + ℓ₂ ξ̂⊗ξ̂)`. In one dimension only `ℓ₁ + ℓ₂` is
/// identifiable; it is stored in `ell1` and `ell2` is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LameConstants {
    pub d: usize,
    pub s: f64,
    pub ell1: f64,
    pub ell2: Option<f64>,
}

impl LameConstants {
    /// Eigenvalue along `ξ̂`, divided by `(2π|ξ|)^{2s}`.
    pub fn longitudinal(&self) -> f64 {
        self.ell1 + self.ell2.unwrap_or(0.0)
    }

    /// Eigenvalue on `ξ^⊥`, divided by `(2π|ξ|)^{2s}`.
    pub fn transverse(&self) -> f64 {
        self.ell1
    }
}

pub fn symbol_lame(xi: &[f64], consts: &LameConstants, alpha: f64) -> SymbolMatrix {
    let d = xi.len();
    let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut m = CMat::zeros(d, d);
    if n > 0.0 {
        let sc = alpha * (2.0 * PI * n).powf(2.0 * consts.s);
        let l2 = consts.ell2.unwrap_or(0.0);
        for i in 0..d {
            for j in 0..d {
                let mut v = l2 * xi[i] * xi[j] / (n * n);
                if i == j {
                    v += consts.ell1;
                }
                m[(i, j)] = Complex64::new(sc * v, 0.0);
            }
        }
    }
    SymbolMatrix {
        xi: xi.to_vec(),
        entries: m,
    }
}

type LameKey = (usize, u64, String);

fn lame_cache() -> &'static Mutex<HashMap<LameKey, LameConstants>> {
    static CACHE: OnceLock<Mutex<HashMap<LameKey, LameConstants>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn lame_once(d: usize, s: f64, quad: &SymbolQuadrature) -> Result<(f64, f64)> {
    let k = KernelSpec::fractional(d, s)?;
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let m = symbol_general(&e1, &k, quad)?;
    let sc = (2.0 * PI).powf(2.0 * s);
    let long = m.entries[(0, 0)].re / sc;
    let trans = if d > 1 { m.entries[(1, 1)].re / sc } else { f64::NAN };
    Ok((long, trans))
}

/// `ℓ₁, ℓ₂` from the general quadrature with the kernel `(1-s)|y|^{-(d+2s)}`,
/// checked against a refined quadrature. Cached per `(d, s, quad)`.
pub fn derive_lame_constants(d: usize, s: f64, quad: &SymbolQuadrature) -> Result<LameConstants> {
    let key = (d, s.to_bits(), format!("{quad:?}"));
    if let Some(c) = lame_cache().lock().unwrap().get(&key) {
        return Ok(*c);
    }
    let (l0, t0) = lame_once(d, s, quad)?;
    let (l1, t1) = lame_once(d, s, &quad.refined())?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    if rel(l0, l1) > 1e-6 {
        return Err(Error::QuadratureNotConverged { coarse: l0, fine: l1 });
    }
    if d > 1 && rel(t0, t1) > 1e-6 {
        return Err(Error::QuadratureNotConverged { coarse: t0, fine: t1 });
    }
    let consts = if d == 1 {
        LameConstants {
            d,
            s,
            ell1: l1,
            ell2: None,
        }
    } else {
        LameConstants {
            d,
            s,
            ell1: t1,
            ell2: Some(l1 - t1),
        }
    };
    lame_cache().lock().unwrap().insert(key, consts);
    Ok(consts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoercivityResult {
    /// `(1-s)·α₁·min Ψ`.
    pub c: f64,
    pub psi_min: f64,
    /// `∫_0^∞ (1 - cos u) u^{-1-2s} du`.
    pub i1: f64,
    pub argmin_nu: Vec<f64>,
    pub argmin_mu: Vec<f64>,
    pub scan_points: usize,
    pub angular_nodes: usize,
}

/// `∫_S (μ·ŷ)² |ν·ŷ|^{2s} dS`.
fn psi_angular(d: usize, s: f64, nu: &Vec3, mu: &Vec3, quad: &SymbolQuadrature) -> (f64, usize) {
    let rule = adapted_rule(d, nu, &[], &quad.angular);
    let v = rule
        .iter()
        .map(|(y, w)| w * dot(mu, y).powi(2) * dot(nu, y).abs().powf(2.0 * s))
        .sum();
    (v, rule.len())
}

/// `Ψ(ν, μ) = ∫ (1 - cos h·ν)|h|^{-d-2s}|μ·ĥ|² dh`.
pub fn psi(d: usize, s: f64, nu: &[f64], mu: &[f64], quad: &SymbolQuadrature) -> Result<f64> {
    let (n, _) = pad(nu, d)?;
    let (m, _) = pad(mu, d)?;
    let i1 = unit_integral(Weight::OneMinusCos, s, 0.0, &quad.radial)?.value.re;
    Ok(i1 * psi_angular(d, s, &n, &m, quad).0)
}

/// Coercivity constant `C` with `λ_min(M^e(ξ)) ≥ C (2π|ξ|)^{2s}` for every
/// kernel whose ellipticity floor is `alpha1`. `Ψ` only depends on the angle
/// between `ν` and `μ`, so the minimum is found by scanning that angle.
pub fn coercivity_constant(
    d: usize,
    s: f64,
    alpha1: f64,
    scan_points: usize,
    quad: &SymbolQuadrature,
) -> Result<CoercivityResult> {
    if scan_points == 0 {
        return Err(Error::InvalidParameter("empty angle scan".into()));
    }
    if !(1..=3).contains(&d) || !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("(d, s) = ({d}, {s})")));
    }
    let i1 = unit_integral(Weight::OneMinusCos, s, 0.0, &quad.radial)?.value.re;
    let nu = [1.0, 0.0, 0.0];
    let mut best = (f64::INFINITY, nu);
    let mut nodes = 0;
    let steps = if d == 1 { 1 } else { scan_points };
    for k in 0..steps {
        let phi = if steps == 1 { 0.0 } else { 0.5 * PI * k as f64 / (steps - 1) as f64 };
        let mu = [phi.cos(), if d > 1 { phi.sin() } else { 0.0 }, 0.0];
        let (v, n) = psi_angular(d, s, &nu, &mu, quad);
        nodes = n;
        if v < best.0 {
            best = (v, mu);
        }
    }
    let psi_min = i1 * best.0;
    Ok(CoercivityResult {
        c: (1.0 - s) * alpha1 * psi_min,
        psi_min,
        i1,
        argmin_nu: nu[..d].to_vec(),
        argmin_mu: best.1[..d].to_vec(),
        scan_points: steps,
        angular_nodes: nodes,
    })
}

/// Low-resolution direction set: axis and face-diagonal directions.
pub fn coarse_directions(d: usize) -> Vec<Vec3> {
    match d {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => (0..8)
            .map(|k| {
                let t = PI * k as f64 / 8.0;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        _ => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut v = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                for sg in [1.0, -1.0] {
                    let mut e = [0.0; 3];
                    e[i] = h;
                    e[j] = sg * h;
                    v.push(e);
                }
            }
            v
        }
    }
}

/// `(1-s)·α₁·min Ψ` over all pairs of [`coarse_directions`], without the
/// rotational reduction.
pub fn coercivity_product_grid(d: usize, s: f64, alpha1: f64, quad: &SymbolQuadrature) -> Result<f64> {
    let i1 = unit_integral(Weight::OneMinusCos, s, 0.0, &quad.radial)?.value.re;
    let dirs = coarse_directions(d);
    let mut best = f64::INFINITY;
    for nu in &dirs {
        for mu in &dirs {
            best = best.min(psi_angular(d, s, nu, mu, quad).0);
        }
    }
    Ok((1.0 - s) * alpha1 * i1 * best)
}

/// Per-frequency symbol table over a grid's lattice.
#[derive(Clone, Debug)]
pub struct SymbolField {
    pub grid: GridSpec,
    pub entries: Vec<CMat>,
}

impl SymbolField {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn at(&self, j: usize) -> &CMat {
        &self.entries[j]
    }

    /// Build a table from a per-frequency function, in parallel when the
    /// `parallel` feature is on. Errors carry the lowest failing index.
    pub fn from_fn<F>(grid: &GridSpec, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<CMat> + Sync + Send,
    {
        let run = |j: usize| -> Result<CMat> {
            let xi = grid.frequency(j)?;
            f(&xi).map_err(|e| Error::at_mode(j, e))
        };
        #[cfg(feature = "parallel")]
        let results: Vec<Result<CMat>> = {
            use rayon::prelude::*;
            (0..grid.len()).into_par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<CMat>> = (0..grid.len()).map(run).collect();
        let mut entries = results.into_iter().collect::<Result<Vec<_>>>()?;
        enforce_hermitian_pairs(grid, &mut entries);
        Ok(SymbolField {
            grid: grid.clone(),
            entries,
        })
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> SymbolField {
        SymbolField {
            grid: self.grid.clone(),
            entries: self.entries.iter().map(f).collect(),
        }
    }
}

/// Lattice indices carrying a Nyquist component have a conjugate partner
/// that is not the negated frequency. Give such pairs conjugate symbols so
/// that real fields map to real fields.
fn enforce_hermitian_pairs(grid: &GridSpec, entries: &mut [CMat]) {
    let d = grid.dim();
    for j in 0..grid.len() {
        let m = grid.modes(j);
        let nyq = (0..d).any(|a| 2 * m[a] == grid.n()[a] as i64);
        if !nyq {
            continue;
        }
        let c = grid.conjugate_index(j);
        if c == j {
            entries[j] = entries[j].map(|z| Complex64::new(z.re, 0.0));
        } else if j < c {
            entries[c] = entries[j].map(|z| z.conj());
        }
    }
}

/// `M(ξ)` over every lattice frequency of `grid`.
pub fn tabulate_symbol(grid: &GridSpec, kernel: &KernelSpec, quad: &SymbolQuadrature) -> Result<SymbolField> {
    if grid.dim() != kernel.dim() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} vs kernel dimension {}",
            grid.dim(),
            kernel.dim()
        )));
    }
    SymbolField::from_fn(grid, |xi| symbol_general(xi, kernel, quad).map(|m| m.entries))
}

/// `α·` fractional Lamé symbol over the lattice.
pub fn tabulate_lame(grid: &GridSpec, consts: &LameConstants, alpha: f64) -> Result<SymbolField> {
    SymbolField::from_fn(grid, |xi| Ok(symbol_lame(xi, consts, alpha).entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::builtin_kernels;
    use statrs::function::gamma::gamma;

    fn unit_oracle(s: f64) -> f64 {
        PI / (2.0 * gamma(1.0 + 2.0 * s) * (PI * s).sin())
    }

    #[test]
    fn unit_integral_matches_closed_form() {
        let q = SymbolQuadrature::default();
        for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let got = unit_integral(Weight::OneMinusCos, s, 0.0, &q.radial).unwrap().value;
            assert!((got.re - unit_oracle(s)).abs() < 1e-9 * unit_oracle(s), "s={s}: {got}");
            assert!(got.im.abs() < 1e-14);
        }
    }

    #[test]
    fn zero_frequency_is_zero() {
        let q = SymbolQuadrature::default();
        for d in 1..=3 {
            for (_, k) in builtin_kernels(d, 0.75).unwrap() {
                let m = symbol_general(&vec![0.0; d], &k, &q).unwrap();
                assert!(m.entries.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
            }
        }
    }

    #[test]
    fn lame_constants_match_gamma_oracle() {
        // ∫_0^{2π} cos²θ |cos θ|^{2s} dθ = 2B(1/2, s+3/2),
        // ∫_0^{2π} sin²θ |cos θ|^{2s} dθ = 2B(3/2, s+1/2)
        let beta = |a: f64, b: f64| gamma(a) * gamma(b) / gamma(a + b);
        let q = SymbolQuadrature::default();
        for s in [0.25, 0.5, 0.75] {
            let c = derive_lame_constants(2, s, &q).unwrap();
            let i1 = unit_oracle(s);
            let long = (1.0 - s) * i1 * 2.0 * beta(0.5, s + 1.5);
            let trans = (1.0 - s) * i1 * 2.0 * beta(1.5, s + 0.5);
            assert!((c.longitudinal() - long).abs() < 1e-8 * long);
            assert!((c.transverse() - trans).abs() < 1e-8 * trans);
            assert!(c.ell2.unwrap() > 0.0 && c.ell1 != c.ell2.unwrap());
        }
        let c1 = derive_lame_constants(1, 0.5, &q).unwrap();
        assert!(c1.ell2.is_none());
        assert!((c1.ell1 - 0.5 * unit_oracle(0.5) * 2.0).abs() < 1e-9);
    }

    #[test]
    fn lame_closed_form_properties() {
        let c = LameConstants {
            d: 2,
            s: 0.3,
            ell1: 0.7,
            ell2: Some(0.4),
        };
        let xi = [0.3, -1.1];
        let a = symbol_lame(&xi, &c, 1.5);
        let b = symbol_lame(&[0.6, -2.2], &c, 1.5);
        for (x, y) in a.entries.iter().zip(b.entries.iter()) {
            assert!((y - x * 2f64.powf(0.6)).norm() < 1e-14 * y.norm().max(1.0));
        }
        let ev = linalg::hermitian_eigenvalues(&a.entries);
        let sc = 1.5 * frac_scale(&xi, 0.3);
        assert!((ev[0] - sc * 0.7).abs() < 1e-12 && (ev[1] - sc * 1.1).abs() < 1e-12);
        assert!(symbol_lame(&[0.0, 0.0], &c, 1.0).norm() == 0.0);
    }

    #[test]
    fn even_kernels_give_real_symmetric_psd() {
        let q = SymbolQuadrature::default();
        for (name, k) in builtin_kernels(2, 0.5).unwrap() {
            let m = symbol_general(&[0.7, -0.4], &k, &q).unwrap();
            assert!(m.max_imag() <= 1e-10 * m.norm(), "{name}");
            assert!(m.min_hermitian_eigenvalue() >= -1e-10);
            let e = symbol_even_part(&[0.7, -0.4], &k, &q).unwrap();
            assert!((&m.entries - &e.entries).norm() <= 1e-12 * m.norm(), "{name}");
        }
    }

    #[test]
    fn parity_split_is_imaginary() {
        let q = SymbolQuadrature::default();
        for s in [0.25, 0.75] {
            let ks = builtin_kernels(3, s).unwrap();
            let (_, k) = ks.iter().find(|(n, _)| n == "skewed").unwrap();
            let xi = [0.4, 0.2, -0.9];
            let m = symbol_general(&xi, k, &q).unwrap();
            let e = symbol_even_part(&xi, k, &q).unwrap();
            let diff = &m.entries - &e.entries;
            let re = diff.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
            assert!(re <= 1e-12 * m.norm());
            assert!(diff.iter().map(|z| z.im.abs()).fold(0.0, f64::max) > 1e-3 * m.norm());
        }
    }

    #[test]
    fn homogeneity_for_pure_power_kernels() {
        let q = SymbolQuadrature::default();
        for s in [0.25, 0.5, 0.75] {
            for (name, k) in builtin_kernels(2, s).unwrap() {
                if !k.is_pure_power() {
                    continue;
                }
                let a = symbol_general(&[0.3, 0.45], &k, &q).unwrap();
                for c in [2.0, 4.0] {
                    let b = symbol_general(&[0.3 * c, 0.45 * c], &k, &q).unwrap();
                    let want = a.entries.scale(c.powf(2.0 * s));
                    assert!((&b.entries - &want).norm() <= 1e-9 * want.norm(), "{name} s={s} c={c}");
                }
            }
        }
    }

    #[test]
    fn coercivity_scan_matches_product_grid() {
        let q = SymbolQuadrature::default();
        for d in 1..=3 {
            for s in [0.25, 0.5, 0.75] {
                let r = coercivity_constant(d, s, 1.0, 33, &q).unwrap();
                assert!(r.c > 0.0);
                let g = coercivity_product_grid(d, s, 1.0, &q).unwrap();
                assert!((r.c - g).abs() <= 1e-6 * g, "d={d} s={s}: {} vs {g}", r.c);
            }
        }
    }

    #[test]
    fn growth_bound_dominates_half_order_odd_integral() {
        let q = SymbolQuadrature::default();
        let f = RadialFactors::new(0.5, 0.0, 0.0, true, &q.radial).unwrap();
        for c in [1e-4, 0.01, 0.5, 1.0, 2.0, 2.9, 10.0, 300.0] {
            assert!(f.im(c).abs() <= half_order_odd_bound(c), "c={c}");
        }
    }
}
