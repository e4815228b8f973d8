//! Applying `𝕃`, `(−Δ)^s` and the fractional Lamé operator to fields.

pub mod probe;
pub mod realspace;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, GridSpec, SpectralField, VectorField};
use crate::kernel::KernelSpec;
use crate::linalg::CMat;
use crate::symbol::{tabulate_symbol, LameConstants, SymbolField, SymbolQuadrature};

pub use probe::{delta_s, SmoothProbe, TrigTerm};
pub use realspace::{apply_realspace, apply_realspace_at, sample_realspace, RealspaceConfig, RealspaceValue};

/// Relative energy above which a field counts as not band-limited.
pub const BAND_TOL: f64 = 1e-20;

fn check_grid(field: &VectorField, grid: &GridSpec) -> Result<()> {
    if field.grid() != grid {
        return Err(Error::GridMismatch("field and table live on different grids".into()));
    }
    Ok(())
}

/// Multiply each mode's vector of coefficients by a matrix.
pub fn apply_matrix_multiplier(spec: &SpectralField, f: impl Fn(usize) -> CMat) -> Result<SpectralField> {
    let grid = spec.grid().clone();
    let d = spec.components();
    let mut out = SpectralField::zeros(&grid, d);
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for j in 0..grid.len() {
        let m = f(j);
        let v = spec.mode(j);
        for i in 0..d {
            buf[i] = (0..d).map(|k| m[(i, k)] * v[k]).sum();
        }
        out.set_mode(j, &buf);
    }
    Ok(out)
}

/// Multiply every component of each mode by a scalar.
pub fn apply_scalar_multiplier(spec: &SpectralField, f: impl Fn(usize) -> Complex64) -> SpectralField {
    let grid = spec.grid().clone();
    let len = grid.len();
    let mut out = spec.clone();
    let coeffs = out.coeffs_mut();
    for j in 0..len {
        let m = f(j);
        for c in 0..spec.components() {
            coeffs[c * len + j] *= m;
        }
    }
    out
}

/// `F⁻¹[(M(ξ) + λI) û(ξ)]`.
pub fn apply_spectral(field: &VectorField, table: &SymbolField, lambda: f64) -> Result<VectorField> {
    check_grid(field, &table.grid)?;
    if field.components() != table.dim() {
        return Err(Error::GridMismatch(format!(
            "{} components vs symbol dimension {}",
            field.components(),
            table.dim()
        )));
    }
    let spec = forward_transform(field)?;
    let d = table.dim();
    let out = apply_matrix_multiplier(&spec, |j| {
        let mut m = table.at(j).clone();
        for i in 0..d {
            m[(i, i)] += lambda;
        }
        m
    })?;
    inverse_transform(&out)
}

/// `(2π|ξ|)^{2s}` at one lattice index.
pub fn fraclap_multiplier(grid: &GridSpec, j: usize, s: f64) -> f64 {
    let xi = grid.freq3(j);
    let n = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    if n == 0.0 {
        0.0
    } else {
        (2.0 * PI * n).powf(2.0 * s)
    }
}

/// `(−Δ)^s` componentwise.
pub fn apply_fraclap(field: &VectorField, s: f64) -> Result<VectorField> {
    let spec = forward_transform(field)?;
    let grid = field.grid().clone();
    let out = apply_scalar_multiplier(&spec, |j| Complex64::new(fraclap_multiplier(&grid, j, s), 0.0));
    inverse_transform(&out)
}

/// `(2π|ξ|)^{2s}(ℓ₁I + ℓ₂ξ̂⊗ξ̂)`, i.e. `ℓ₁(−Δ)^s + ℓ₂(𝓡⊗𝓡)(−Δ)^s` with
/// the Riesz transform `𝓡`. In one dimension this is `(ℓ₁+ℓ₂)(−Δ)^s`.
pub fn apply_lame_riesz(field: &VectorField, consts: &LameConstants) -> Result<VectorField> {
    let grid = field.grid().clone();
    let d = grid.dim();
    if field.components() != d || consts.d != d {
        return Err(Error::GridMismatch("fractional Lamé operator needs d components".into()));
    }
    let spec = forward_transform(field)?;
    let out = apply_matrix_multiplier(&spec, |j| {
        let xi = grid.freq3(j);
        let n2: f64 = xi.iter().map(|v| v * v).sum();
        let f = fraclap_multiplier(&grid, j, consts.s);
        CMat::from_fn(d, d, |a, b| {
            let mut v = if n2 > 0.0 { consts.ell2.unwrap_or(0.0) * xi[a] * xi[b] / n2 } else { 0.0 };
            if a == b {
                v += consts.ell1;
            }
            Complex64::new(f * v, 0.0)
        })
    })?;
    inverse_transform(&out)
}

/// Periodic convolution `(u∗v)(x) = Σ_y u(x−y) v(y)·cell_volume` with a
/// scalar filter `v`.
pub fn convolve(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    if u.grid() != v.grid() || v.components() != 1 {
        return Err(Error::GridMismatch("convolution needs a scalar filter on the same grid".into()));
    }
    let vh = forward_transform(v)?;
    let cell = u.grid().cell_volume();
    let uh = forward_transform(u)?;
    let out = apply_scalar_multiplier(&uh, |j| vh.coeffs()[j] * cell);
    inverse_transform(&out)
}

/// `‖a − b‖₂ / ‖b‖₂` over all samples.
pub fn rel_l2(a: &VectorField, b: &VectorField) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.data().iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Discrete `L²` inner product (cell-volume weighted).
pub fn inner(a: &VectorField, b: &VectorField) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>() * a.grid().cell_volume()
}

/// Errors with `NotBandLimited` if the field has energy in the top third of
/// the spectrum.
pub fn check_band_limited(field: &VectorField) -> Result<()> {
    let spec = forward_transform(field)?;
    let grid = field.grid();
    let len = grid.len();
    let total = spec.energy();
    let mut high = 0.0;
    for c in 0..spec.components() {
        for j in 0..len {
            if !grid.in_lower_band(j) {
                high += spec.coeffs()[c * len + j].norm_sqr();
            }
        }
    }
    if high > BAND_TOL * total.max(f64::MIN_POSITIVE) {
        return Err(Error::NotBandLimited {
            energy: high / total,
        });
    }
    Ok(())
}

/// How `𝕃` is applied on the `(−Δ)^s` side of a commutation test.
#[derive(Clone, Debug)]
pub enum CommutationMode {
    /// Both compositions use the tabulated symbol.
    Spectral,
    /// `𝕃` is applied by real-space quadrature at every grid point.
    Realspace(RealspaceConfig),
}

/// `(a, b)`: the relative `L²` differences between `𝕃(−Δ)^s u` and
/// `(−Δ)^s 𝕃u`, and between `𝕃(u∗v)` and `(𝕃u)∗v`. The probe must be
/// trigonometric and band-limited on `grid`.
pub fn commutation_residual(
    probe: &SmoothProbe,
    filter: &VectorField,
    kernel: &KernelSpec,
    s: f64,
    grid: &GridSpec,
    quad: &SymbolQuadrature,
    mode: &CommutationMode,
) -> Result<(f64, f64)> {
    let u = probe.sample(grid)?;
    check_band_limited(&u)?;
    let table = tabulate_symbol(grid, kernel, quad)?;
    let a = match mode {
        CommutationMode::Spectral => {
            let lhs = apply_spectral(&apply_fraclap(&u, s)?, &table, 0.0)?;
            let rhs = apply_fraclap(&apply_spectral(&u, &table, 0.0)?, s)?;
            rel_l2(&lhs, &rhs)
        }
        CommutationMode::Realspace(cfg) => {
            let lhs = sample_realspace(&probe.fraclap(s)?, grid, kernel, cfg)?;
            let rhs = apply_fraclap(&sample_realspace(probe, grid, kernel, cfg)?, s)?;
            rel_l2(&lhs, &rhs)
        }
    };
    let lhs = apply_spectral(&convolve(&u, filter)?, &table, 0.0)?;
    let rhs = convolve(&apply_spectral(&u, &table, 0.0)?, filter)?;
    Ok((a, rel_l2(&lhs, &rhs)))
}

/// A smooth radially decaying scalar filter `exp(−|x|²/(2w²))`, periodized
/// about the origin of the box.
pub fn gaussian_filter(grid: &GridSpec, width: f64) -> Result<VectorField> {
    let d = grid.dim();
    let l = grid.box_len().to_vec();
    Ok(VectorField::from_fn(grid, 1, |x, out| {
        let mut r2 = 0.0;
        for k in 0..d {
            let mut z = x[k];
            if z > 0.5 * l[k] {
                z -= l[k];
            }
            r2 += z * z;
        }
        out[0] = (-r2 / (2.0 * width * width)).exp();
    }))
}

/// The all-pass filter `δ/cell_volume`, for which convolution is the identity.
pub fn delta_filter(grid: &GridSpec) -> VectorField {
    let mut v = VectorField::zeros(grid, 1);
    v.data_mut()[0] = 1.0 / grid.cell_volume();
    v
}
