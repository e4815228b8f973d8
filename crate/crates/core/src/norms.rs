//! Discrete norms, random band-limited ensembles and empirical estimate
//! reports.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, GridSpec, SpectralField, VectorField};
use crate::kernel::{KernelConfig, KernelSpec};
use crate::linalg::{singular_values, CMat};
use crate::operator::{apply_scalar_multiplier, apply_spectral, fraclap_multiplier};
use crate::symbol::{derive_lame_constants, tabulate_lame, tabulate_symbol, SymbolField, SymbolQuadrature};

/// Pairwise summation, so reductions are independent of thread count and
/// accurate for long vectors.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormVariant {
    Lp,
    /// `‖F⁻¹[(1+4π²|ξ|²)^s û]‖_p`.
    Bessel,
    /// `‖F⁻¹[(4π²|ξ|²)^s û]‖_p`.
    Seminorm,
    /// `Σ|u(x)|ψ(x)·cell` with `ψ(x) = 1/(1+|x−c|^{d+2s})`, `c` the box
    /// centre. Diagnostic only.
    WeightedL1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    pub p: f64,
    pub s: f64,
    pub variant: NormVariant,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (1, ∞)")));
    }
    Ok(())
}

fn pointwise_lengths(field: &VectorField) -> Result<Vec<f64>> {
    let len = field.grid().len();
    let data = field.data();
    let mut out = vec![0.0; len];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for c in 0..field.components() {
            let v = data[c * len + j];
            if !v.is_finite() {
                return Err(Error::NonFinite { index: c * len + j });
            }
            acc += v * v;
        }
        *o = acc.sqrt();
    }
    Ok(out)
}

/// `(Σ|u(x)|^p·cell)^{1/p}` with `|·|` the Euclidean length of the vector.
pub fn lp_norm(field: &VectorField, p: f64) -> Result<f64> {
    check_p(p)?;
    let lens = pointwise_lengths(field)?;
    let top = lens.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    // scale first so large p cannot overflow
    let terms: Vec<f64> = lens.iter().map(|v| (v / top).powf(p)).collect();
    Ok(top * (pairwise_sum(&terms) * field.grid().cell_volume()).powf(1.0 / p))
}

/// Space-time `L^p` norm `(Σ_n w_n ‖u_n‖_p^p)^{1/p}` with time weights `w`.
pub fn space_time_norm(spatial: &[f64], weights: &[f64], p: f64) -> f64 {
    let top = spatial.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let terms: Vec<f64> = spatial.iter().zip(weights).map(|(v, w)| w * (v / top).powf(p)).collect();
    top * pairwise_sum(&terms).powf(1.0 / p)
}

fn multiplier_field(field: &VectorField, f: impl Fn(f64) -> f64) -> Result<VectorField> {
    let spec = forward_transform(field)?;
    let grid = field.grid().clone();
    let out = apply_scalar_multiplier(&spec, |j| {
        let xi = grid.freq3(j);
        let n2 = xi.iter().map(|v| v * v).sum::<f64>();
        Complex64::new(f(4.0 * PI * PI * n2), 0.0)
    });
    inverse_transform(&out)
}

pub fn norm(field: &VectorField, cfg: &NormConfig) -> Result<f64> {
    check_p(cfg.p)?;
    let s = cfg.s;
    match cfg.variant {
        NormVariant::Lp => lp_norm(field, cfg.p),
        NormVariant::Bessel => lp_norm(&multiplier_field(field, |q| (1.0 + q).powf(s))?, cfg.p),
        NormVariant::Seminorm => lp_norm(
            &multiplier_field(field, |q| if q == 0.0 { 0.0 } else { q.powf(s) })?,
            cfg.p,
        ),
        NormVariant::WeightedL1 => {
            let grid = field.grid();
            let d = grid.dim();
            let lens = pointwise_lengths(field)?;
            let terms: Vec<f64> = lens
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let x = grid.point(j);
                    let r = (0..d)
                        .map(|k| (x[k] - 0.5 * grid.box_len()[k]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    v / (1.0 + r.powf(d as f64 + 2.0 * s))
                })
                .collect();
            Ok(pairwise_sum(&terms) * grid.cell_volume())
        }
    }
}

/// Random band-limited fields. Member `i` draws from its own ChaCha stream,
/// so members are reproducible individually and independent of ensemble size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub size: usize,
    pub seed: u64,
    /// Coefficient amplitudes scale like `(1+|m|²)^{-decay/2}`.
    pub decay: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            size: 32,
            seed: 20240601,
            decay: 1.0,
        }
    }
}

impl EnsembleConfig {
    pub fn doubled(&self) -> Self {
        EnsembleConfig {
            size: 2 * self.size,
            ..self.clone()
        }
    }
}

/// Spectral coefficients of ensemble member `index`: uniform in
/// `[-½, ½]²` times the decay weight on the lower band, Hermitian-symmetric,
/// zero elsewhere.
pub fn ensemble_spectrum(grid: &GridSpec, components: usize, cfg: &EnsembleConfig, index: usize) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let len = grid.len();
    let d = grid.dim();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); components * len];
    for c in 0..components {
        for j in 0..len {
            if !grid.in_lower_band(j) {
                continue;
            }
            let m = grid.modes(j);
            let m2: f64 = (0..d).map(|k| (m[k] * m[k]) as f64).sum();
            let amp = (1.0 + m2).powf(-0.5 * cfg.decay);
            let (a, b): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            coeffs[c * len + j] = Complex64::new(a, b) * amp;
        }
    }
    let raw = coeffs.clone();
    for c in 0..components {
        for j in 0..len {
            let k = grid.conjugate_index(j);
            coeffs[c * len + j] = 0.5 * (raw[c * len + j] + raw[c * len + k].conj());
        }
    }
    SpectralField::new(grid.clone(), components, coeffs).expect("shape is consistent")
}

pub fn ensemble_member(grid: &GridSpec, components: usize, cfg: &EnsembleConfig, index: usize) -> Result<VectorField> {
    inverse_transform(&ensemble_spectrum(grid, components, cfg, index))
}

/// Empirical stand-in for an unspecified estimate constant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub label: String,
    pub kernel: Option<KernelConfig>,
    pub grid: GridSpec,
    pub p: f64,
    pub lambda: f64,
    pub ratio_max: f64,
    pub ratio_min: f64,
    pub ratio_samples: Vec<f64>,
    pub argmax_index: usize,
    pub seed: u64,
    /// Maximum over the first half of the samples.
    pub ratio_max_half: f64,
    /// True when doubling the ensemble moved the maximum by less than 20%.
    pub stable: bool,
    /// Rigorous bound from per-mode eigenvalue computations (p = 2 only).
    pub bound: Option<f64>,
    /// Predicted `[min, max]` band for the ratio (p = 2 only).
    pub band: Option<(f64, f64)>,
}

/// Relative change that still counts as stable under ensemble doubling.
pub const STABILITY_TOL: f64 = 0.2;

impl EstimateReport {
    /// Build a report from samples computed over a doubled ensemble.
    pub fn from_samples(label: &str, grid: &GridSpec, p: f64, lambda: f64, seed: u64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::DegenerateEnsemble("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateEnsemble(format!("sample {i} has a non-finite ratio")));
        }
        let half = samples.len().div_ceil(2);
        let (argmax_index, ratio_max) = samples
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        let ratio_min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio_max_half = samples[..half].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let stable = (ratio_max - ratio_max_half).abs() < STABILITY_TOL * ratio_max_half.abs();
        Ok(EstimateReport {
            label: label.to_string(),
            kernel: None,
            grid: grid.clone(),
            p,
            lambda,
            ratio_max,
            ratio_min,
            ratio_samples: samples,
            argmax_index,
            seed,
            ratio_max_half,
            stable,
            bound: None,
            band: None,
        })
    }
}

/// The four operators compared by [`norm_equivalence_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceOperator {
    /// Fractional Lamé operator with unit coefficient.
    FracLame,
    /// The vector operator of the kernel.
    Kernel,
    /// Componentwise fractional Laplacian.
    FracLaplacian,
    /// Componentwise scalar operator with the same kernel.
    Scalar,
}

impl EquivalenceOperator {
    pub const ALL: [EquivalenceOperator; 4] = [
        EquivalenceOperator::FracLame,
        EquivalenceOperator::Kernel,
        EquivalenceOperator::FracLaplacian,
        EquivalenceOperator::Scalar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EquivalenceOperator::FracLame => "frac-lame",
            EquivalenceOperator::Kernel => "kernel",
            EquivalenceOperator::FracLaplacian => "frac-laplacian",
            EquivalenceOperator::Scalar => "scalar",
        }
    }
}

/// `m(ξ)·I` with `m` the scalar symbol of the kernel.
pub fn tabulate_scalar_symbol(grid: &GridSpec, kernel: &KernelSpec, quad: &SymbolQuadrature) -> Result<SymbolField> {
    let d = grid.dim();
    SymbolField::from_fn(grid, |xi| {
        let m = crate::symbol::symbol_scalar(xi, kernel, quad)?;
        Ok(CMat::from_diagonal_element(d, d, m))
    })
}

/// `(2π|ξ|)^{2s}·I`.
pub fn tabulate_fraclap(grid: &GridSpec, s: f64) -> SymbolField {
    let d = grid.dim();
    SymbolField {
        grid: grid.clone(),
        entries: (0..grid.len())
            .map(|j| CMat::from_diagonal_element(d, d, Complex64::new(fraclap_multiplier(grid, j, s), 0.0)))
            .collect(),
    }
}

/// Per-mode singular value range of `A_k B_k⁻¹` over nonzero lower-band
/// modes: the exact range of `‖Au‖₂/‖Bu‖₂` over band-limited `u`.
pub fn pair_band(a: &SymbolField, b: &SymbolField) -> Result<(f64, f64)> {
    let grid = &a.grid;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for j in 0..grid.len() {
        if !grid.in_lower_band(j) || grid.modes(j).iter().all(|&m| m == 0) {
            continue;
        }
        let binv = b.at(j).clone().try_inverse().ok_or_else(|| Error::IllConditioned {
            index: j,
            cond: f64::INFINITY,
        })?;
        let sv = singular_values(&(a.at(j) * binv));
        lo = lo.min(sv.iter().copied().fold(f64::INFINITY, f64::min));
        hi = hi.max(sv.iter().copied().fold(0.0, f64::max));
    }
    Ok((lo, hi))
}

/// All six pairwise ratios `‖Au‖_p/‖Bu‖_p` among the four operators of
/// [`EquivalenceOperator`], each over a doubled ensemble. At `p = 2` every
/// report carries the predicted band.
pub fn norm_equivalence_report(
    grid: &GridSpec,
    kernel: &KernelSpec,
    p: f64,
    ens: &EnsembleConfig,
    quad: &SymbolQuadrature,
) -> Result<Vec<EstimateReport>> {
    check_p(p)?;
    let d = grid.dim();
    let s = kernel.s();
    let consts = derive_lame_constants(d, s, quad)?;
    let tables = [
        tabulate_lame(grid, &consts, 1.0)?,
        tabulate_symbol(grid, kernel, quad)?,
        tabulate_fraclap(grid, s),
        tabulate_scalar_symbol(grid, kernel, quad)?,
    ];
    let big = ens.doubled();
    let mut norms = vec![[0.0; 4]; big.size];
    for (i, row) in norms.iter_mut().enumerate() {
        let u = ensemble_member(grid, d, &big, i)?;
        for (t, table) in tables.iter().enumerate() {
            row[t] = lp_norm(&apply_spectral(&u, table, 0.0)?, p)?;
        }
    }
    let mut out = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            let samples: Vec<f64> = norms
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    if r[b] == 0.0 {
                        Err(Error::DegenerateEnsemble(format!("member {i} is annihilated")))
                    } else {
                        Ok(r[a] / r[b])
                    }
                })
                .collect::<Result<_>>()?;
            let label = format!(
                "{}/{}",
                EquivalenceOperator::ALL[a].name(),
                EquivalenceOperator::ALL[b].name()
            );
            let mut rep = EstimateReport::from_samples(&label, grid, p, 0.0, ens.seed, samples)?;
            rep.kernel = Some(kernel.config());
            if p == 2.0 {
                rep.band = Some(pair_band(&tables[a], &tables[b])?);
            }
            out.push(rep);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(&[16, 12], &[1.0, 2.0]).unwrap()
    }

    #[test]
    fn zero_and_constant_fields() {
        let g = grid();
        let z = VectorField::zeros(&g, 2);
        for variant in [NormVariant::Lp, NormVariant::Bessel, NormVariant::Seminorm, NormVariant::WeightedL1] {
            let cfg = NormConfig { p: 3.0, s: 0.4, variant };
            assert_eq!(norm(&z, &cfg).unwrap(), 0.0);
        }
        let c = VectorField::new(g.clone(), 2, [vec![3.0; g.len()], vec![4.0; g.len()]].concat()).unwrap();
        let semi = NormConfig { p: 3.0, s: 0.4, variant: NormVariant::Seminorm };
        assert!(norm(&c, &semi).unwrap() < 1e-12);
        let lp = lp_norm(&c, 3.0).unwrap();
        assert!((lp - 5.0 * 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn plancherel_for_bessel_norm() {
        let g = grid();
        let ens = EnsembleConfig::default();
        let spec = ensemble_spectrum(&g, 2, &ens, 3);
        let u = inverse_transform(&spec).unwrap();
        let s = 0.3;
        let space = norm(&u, &NormConfig { p: 2.0, s, variant: NormVariant::Bessel }).unwrap();
        let len = g.len();
        let mut acc = 0.0;
        for c in 0..2 {
            for j in 0..len {
                let xi = g.freq3(j);
                let q = 4.0 * PI * PI * xi.iter().map(|v| v * v).sum::<f64>();
                acc += (1.0 + q).powf(2.0 * s) * spec.coeffs()[c * len + j].norm_sqr();
            }
        }
        // unnormalized DFT: Σ|u|²·cell = volume·Σ|û|²/N²
        let freq = (acc * g.volume() / (len * len) as f64).sqrt();
        assert!((space - freq).abs() < 1e-10 * freq, "{space} vs {freq}");
    }

    #[test]
    fn ensembles_are_reproducible_and_band_limited() {
        let g = grid();
        let ens = EnsembleConfig::default();
        let a = ensemble_member(&g, 2, &ens, 5).unwrap();
        let b = ensemble_member(&g, 2, &ens.doubled(), 5).unwrap();
        assert_eq!(a, b);
        crate::operator::check_band_limited(&a).unwrap();
        assert!(a.max_abs() > 0.0);
        assert_ne!(a, ensemble_member(&g, 2, &ens, 6).unwrap());
    }

    #[test]
    fn report_flags_and_degenerate_samples() {
        let g = grid();
        let r = EstimateReport::from_samples("x", &g, 2.0, 1.0, 0, vec![1.0, 2.0, 2.1, 0.5]).unwrap();
        assert_eq!(r.ratio_max, 2.1);
        assert_eq!(r.argmax_index, 2);
        assert_eq!(r.ratio_max_half, 2.0);
        assert!(r.stable);
        let r = EstimateReport::from_samples("x", &g, 2.0, 1.0, 0, vec![1.0, 1.0, 3.0, 0.5]).unwrap();
        assert!(!r.stable);
        assert!(EstimateReport::from_samples("x", &g, 2.0, 1.0, 0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn frac_lame_against_fraclap_band() {
        let g = GridSpec::cube(2, 12, 1.0).unwrap();
        let k = KernelSpec::fractional(2, 0.5).unwrap();
        let q = SymbolQuadrature::default();
        let c = derive_lame_constants(2, 0.5, &q).unwrap();
        let reps = norm_equivalence_report(&g, &k, 2.0, &EnsembleConfig { size: 4, ..Default::default() }, &q).unwrap();
        let r = reps.iter().find(|r| r.label == "frac-lame/frac-laplacian").unwrap();
        let (lo, hi) = r.band.unwrap();
        let (a, b) = (c.transverse().min(c.longitudinal()), c.transverse().max(c.longitudinal()));
        assert!((lo - a).abs() < 1e-12 && (hi - b).abs() < 1e-12);
        for v in &r.ratio_samples {
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
        let r = reps.iter().find(|r| r.label == "frac-lame/kernel").unwrap();
        for v in &r.ratio_samples {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }
}
