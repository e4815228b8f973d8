//! Separable interaction kernels `K(y) = (1-s)·a(ŷ)·m(|y|)·|y|^{-(d+2s)}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::quadrature::sphere_rule;

/// Relative size of the first angular moment above which an `s = 1/2`
/// kernel is rejected.
pub const CANCELLATION_TOL: f64 = 1e-10;

const SAMPLE_ORDER_2D: usize = 2048;
const SAMPLE_ORDER_3D: usize = 48;

/// One zonal term `coeff · (e·ŷ)^power`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZonalTerm {
    pub direction: Vec<f64>,
    pub power: u32,
    pub coeff: f64,
}

/// Angular profile `a(ŷ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// Constant value; defaults to `alpha1` when omitted.
    Constant {
        #[serde(default)]
        value: Option<f64>,
    },
    /// `base + Σ coeff·(e·ŷ)^power`, clipped to `[alpha1, alpha2]`.
    Harmonic { base: f64, terms: Vec<ZonalTerm> },
    /// `peak` inside the double cone `|ŷ·axis| ≥ cos(half_angle)`, `floor` elsewhere.
    Cone {
        axis: Vec<f64>,
        half_angle: f64,
        floor: f64,
        peak: f64,
    },
}

/// Radial modulation `m(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadialModulation {
    #[default]
    Constant,
    /// `1 + amplitude · sin(frequency · ln r)`.
    Logosc { amplitude: f64, frequency: f64 },
}

impl RadialModulation {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialModulation::Constant => 1.0,
            RadialModulation::Logosc {
                amplitude,
                frequency,
            } => 1.0 + amplitude * (frequency * r.ln()).sin(),
        }
    }

    /// `(amplitude, frequency)`, with zero amplitude for the constant case.
    pub fn log_params(&self) -> (f64, f64) {
        match *self {
            RadialModulation::Constant => (0.0, 0.0),
            RadialModulation::Logosc {
                amplitude,
                frequency,
            } => (amplitude, frequency),
        }
    }

    pub fn range(&self) -> (f64, f64) {
        let (a, _) = self.log_params();
        (1.0 - a.abs(), 1.0 + a.abs())
    }

    pub fn is_constant(&self) -> bool {
        self.log_params().0 == 0.0
    }
}

/// The raw kernel description as it appears in JSON configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub s: f64,
    pub d: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub profile: Profile,
    #[serde(default)]
    pub radial: RadialModulation,
}

/// A validated kernel. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    s: f64,
    d: usize,
    alpha1: f64,
    alpha2: f64,
    profile: Profile,
    radial: RadialModulation,
    // normalized directions, cached
    dirs: Vec<Vec3>,
    even: bool,
    // 2-d angles where a harmonic profile meets its clamp bounds
    clamp_breaks: Vec<f64>,
}

fn normalize(v: &[f64], d: usize) -> Result<Vec3> {
    if v.len() != d {
        return Err(Error::InvalidKernel(format!(
            "direction has {} components, expected {d}",
            v.len()
        )));
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidKernel("zero or non-finite direction".into()));
    }
    let mut out = [0.0; 3];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x / n;
    }
    Ok(out)
}

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl KernelSpec {
    pub fn new(cfg: KernelConfig) -> Result<Self> {
        let KernelConfig {
            s,
            d,
            alpha1,
            alpha2,
            profile,
            radial,
        } = cfg;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidKernel(format!("s = {s} not in (0,1)")));
        }
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidKernel(format!("dimension {d} not in 1..=3")));
        }
        if !(alpha1.is_finite() && alpha2.is_finite() && alpha1 > 0.0 && alpha1 <= alpha2) {
            return Err(Error::InvalidKernel(format!(
                "need 0 < alpha1 <= alpha2, got ({alpha1}, {alpha2})"
            )));
        }
        let mut dirs = Vec::new();
        let even = match &profile {
            Profile::Constant { value } => {
                if let Some(v) = value {
                    if !v.is_finite() {
                        return Err(Error::InvalidKernel("non-finite profile value".into()));
                    }
                }
                true
            }
            Profile::Harmonic { base, terms } => {
                if !base.is_finite() {
                    return Err(Error::InvalidKernel("non-finite harmonic base".into()));
                }
                for t in terms {
                    if !t.coeff.is_finite() {
                        return Err(Error::InvalidKernel("non-finite harmonic coefficient".into()));
                    }
                    dirs.push(normalize(&t.direction, d)?);
                }
                terms.iter().all(|t| t.power % 2 == 0 || t.coeff == 0.0)
            }
            Profile::Cone {
                axis,
                half_angle,
                floor,
                peak,
            } => {
                dirs.push(normalize(axis, d)?);
                if !(*half_angle > 0.0 && *half_angle < PI / 2.0) {
                    return Err(Error::InvalidKernel(format!(
                        "cone half-angle {half_angle} not in (0, pi/2)"
                    )));
                }
                if !(floor.is_finite() && peak.is_finite()) {
                    return Err(Error::InvalidKernel("non-finite cone values".into()));
                }
                true
            }
        };
        let (amp, freq) = radial.log_params();
        if !(amp.is_finite() && freq.is_finite() && amp.abs() < 1.0) {
            return Err(Error::InvalidKernel(format!(
                "log-oscillation amplitude {amp} must satisfy |A| < 1"
            )));
        }
        let spec = KernelSpec {
            s,
            d,
            alpha1,
            alpha2,
            profile,
            radial,
            dirs,
            even,
            clamp_breaks: Vec::new(),
        };
        let mut spec = spec;
        spec.clamp_breaks = spec.harmonic_clamp_roots();

        // dense deterministic sample of the profile
        let order = if d == 3 { SAMPLE_ORDER_3D } else { SAMPLE_ORDER_2D };
        let rule = sphere_rule(d, order);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (y, _) in &rule {
            let a = spec.profile_at(y);
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let slack = 1e-12 * alpha2;
        if lo < alpha1 - slack || hi > alpha2 + slack {
            return Err(Error::InvalidKernel(format!(
                "profile range [{lo}, {hi}] leaves [{alpha1}, {alpha2}]"
            )));
        }
        let (mlo, mhi) = spec.radial.range();
        if lo * mlo < alpha1 - slack || hi * mhi > alpha2 + slack {
            return Err(Error::InvalidKernel(format!(
                "profile x radial range [{}, {}] leaves [{alpha1}, {alpha2}]",
                lo * mlo,
                hi * mhi
            )));
        }

        if s == 0.5 && !spec.even {
            let fine = sphere_rule(d, if d == 3 { 96 } else { 8192 });
            let moment = profile_first_moment(&spec, &fine);
            if moment > CANCELLATION_TOL {
                return Err(Error::CancellationViolated { moment });
            }
        }
        Ok(spec)
    }

    /// The fractional Lamé kernel `(1-s)|y|^{-(d+2s)}`.
    pub fn fractional(d: usize, s: f64) -> Result<Self> {
        Self::constant(d, s, 1.0)
    }

    /// Constant profile `alpha`, with `alpha1 = alpha2 = alpha`.
    pub fn constant(d: usize, s: f64, alpha: f64) -> Result<Self> {
        Self::new(KernelConfig {
            s,
            d,
            alpha1: alpha,
            alpha2: alpha,
            profile: Profile::Constant { value: None },
            radial: RadialModulation::Constant,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn radial(&self) -> &RadialModulation {
        &self.radial
    }

    pub fn config(&self) -> KernelConfig {
        KernelConfig {
            s: self.s,
            d: self.d,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            profile: self.profile.clone(),
            radial: self.radial.clone(),
        }
    }

    /// True when `a(-ŷ) = a(ŷ)` structurally.
    pub fn is_even(&self) -> bool {
        self.even
    }

    /// True when `K(y) |y|^{d+2s}` does not depend on `|y|`.
    pub fn is_pure_power(&self) -> bool {
        self.radial.is_constant()
    }

    /// Angular profile `a(ŷ)` at a unit vector.
    pub fn profile_at(&self, yhat: &Vec3) -> f64 {
        match &self.profile {
            Profile::Constant { value } => value.unwrap_or(self.alpha1),
            Profile::Harmonic { base, terms } => {
                let mut v = *base;
                for (t, e) in terms.iter().zip(&self.dirs) {
                    v += t.coeff * dot(e, yhat).powi(t.power as i32);
                }
                v.clamp(self.alpha1, self.alpha2)
            }
            Profile::Cone {
                half_angle,
                floor,
                peak,
                ..
            } => {
                if dot(&self.dirs[0], yhat).abs() >= half_angle.cos() {
                    *peak
                } else {
                    *floor
                }
            }
        }
    }

    /// Even and odd parts `(a^e, a^o)` of the profile at `ŷ`.
    pub fn profile_parts(&self, yhat: &Vec3) -> (f64, f64) {
        let a = self.profile_at(yhat);
        if self.even {
            return (a, 0.0);
        }
        let b = self.profile_at(&[-yhat[0], -yhat[1], -yhat[2]]);
        (0.5 * (a + b), 0.5 * (a - b))
    }

    fn harmonic_unclamped(&self, t: f64) -> f64 {
        let y = [t.cos(), t.sin(), 0.0];
        match &self.profile {
            Profile::Harmonic { base, terms } => {
                base + terms
                    .iter()
                    .zip(&self.dirs)
                    .map(|(t, e)| t.coeff * dot(e, &y).powi(t.power as i32))
                    .sum::<f64>()
            }
            _ => 0.0,
        }
    }

    /// Roots of `p(θ) − α₁` and `p(θ) − α₂` for the unclamped 2-d harmonic
    /// polynomial `p`, with their antipodes when the profile is not even.
    fn harmonic_clamp_roots(&self) -> Vec<f64> {
        if self.d != 2 || !matches!(self.profile, Profile::Harmonic { .. }) {
            return Vec::new();
        }
        let n = 2048;
        let h = 2.0 * PI / n as f64;
        let mut out = Vec::new();
        for level in [self.alpha1, self.alpha2] {
            let g = |t: f64| self.harmonic_unclamped(t) - level;
            for k in 0..n {
                let (mut a, mut b) = (k as f64 * h, (k + 1) as f64 * h);
                let (mut ga, gb) = (g(a), g(b));
                if ga == 0.0 {
                    out.push(a);
                    continue;
                }
                if ga * gb >= 0.0 {
                    continue;
                }
                while b - a > 1e-15 {
                    let m = 0.5 * (a + b);
                    let gm = g(m);
                    if gm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if (gm < 0.0) == (ga < 0.0) {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        if !self.even {
            let n = out.len();
            for i in 0..n {
                out.push((out[i] + PI).rem_euclid(2.0 * PI));
            }
        }
        out
    }

    /// Angles in `[0, 2π)` where the 2-d profile jumps or has a kink from
    /// clamping.
    pub fn profile_breaks_2d(&self) -> Vec<f64> {
        match &self.profile {
            Profile::Cone { half_angle, .. } if self.d == 2 => {
                let beta = self.dirs[0][1].atan2(self.dirs[0][0]);
                [beta - half_angle, beta + half_angle]
                    .iter()
                    .flat_map(|&t| [t, t + PI])
                    .map(|t| t.rem_euclid(2.0 * PI))
                    .collect()
            }
            _ => self.clamp_breaks.clone(),
        }
    }

    /// `K(y)`; `y` is padded to three components.
    pub fn eval(&self, y: &Vec3) -> Result<f64> {
        let r = dot(y, y).sqrt();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("kernel evaluated at |y| = {r}")));
        }
        let yhat = [y[0] / r, y[1] / r, y[2] / r];
        Ok(self.eval_polar(&yhat, r))
    }

    pub(crate) fn eval_polar(&self, yhat: &Vec3, r: f64) -> f64 {
        (1.0 - self.s)
            * self.profile_at(yhat)
            * self.radial.eval(r)
            * r.powf(-(self.d as f64 + 2.0 * self.s))
    }

    /// Ellipticity band `[(1-s)α₁, (1-s)α₂]` for `K(y)|y|^{d+2s}`.
    pub fn band(&self) -> (f64, f64) {
        ((1.0 - self.s) * self.alpha1, (1.0 - self.s) * self.alpha2)
    }
}

fn profile_first_moment(spec: &KernelSpec, rule: &[(Vec3, f64)]) -> f64 {
    let mut m = [0.0; 3];
    let mut total = 0.0;
    for (y, w) in rule {
        let a = spec.profile_at(y);
        total += w * a;
        for k in 0..3 {
            m[k] += w * a * y[k];
        }
    }
    dot(&m, &m).sqrt() / total
}

/// Compensator switch `χ^(s)(y)`.
pub fn chi_s(s: f64, y: &[f64]) -> u8 {
    if s < 0.5 {
        0
    } else if s == 0.5 {
        let r2: f64 = y.iter().map(|x| x * x).sum();
        u8::from(r2 < 1.0)
    } else {
        1
    }
}

/// Maximum over `radii` of `|∫_{∂B_r} y K dS| / ∫_{∂B_r} K dS`, with a
/// product sphere rule of the given order.
pub fn check_cancellation(spec: &KernelSpec, radii: &[f64], sphere_order: usize) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("empty radius list".into()));
    }
    if sphere_order == 0 {
        return Err(Error::InvalidParameter("sphere rule order must be positive".into()));
    }
    let rule = sphere_rule(spec.d, sphere_order);
    let jac_pow = spec.d as f64 - 1.0;
    let mut worst: f64 = 0.0;
    for &r in radii {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("radius {r} must be positive")));
        }
        let jac = r.powf(jac_pow);
        let mut num = [0.0; 3];
        let mut den = 0.0;
        for (y, w) in &rule {
            let k = spec.eval_polar(y, r) * w * jac;
            den += k;
            for c in 0..3 {
                num[c] += k * r * y[c];
            }
        }
        worst = worst.max(dot(&num, &num).sqrt() / den);
    }
    Ok(worst)
}

/// How the `τ`-dependent model term is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomotopyNormalization {
    /// `α₁(1-τ)|y|^{-(d+2s)} + τK(y)`.
    Verbatim,
    /// `α₁(1-τ)(1-s)|y|^{-(d+2s)} + τK(y)`, which stays inside the
    /// ellipticity band of `K`.
    Banded,
}

#[derive(Clone, Debug)]
pub struct HomotopyKernel {
    pub tau: f64,
    pub base: KernelSpec,
    pub normalization: HomotopyNormalization,
}

pub fn homotopy_kernel(base: &KernelSpec, tau: f64) -> Result<HomotopyKernel> {
    homotopy_kernel_with(base, tau, HomotopyNormalization::Verbatim)
}

pub fn homotopy_kernel_with(
    base: &KernelSpec,
    tau: f64,
    normalization: HomotopyNormalization,
) -> Result<HomotopyKernel> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in [0,1]")));
    }
    Ok(HomotopyKernel {
        tau,
        base: base.clone(),
        normalization,
    })
}

impl HomotopyKernel {
    fn model_coeff(&self) -> f64 {
        let b = &self.base;
        match self.normalization {
            HomotopyNormalization::Verbatim => b.alpha1 * (1.0 - self.tau),
            HomotopyNormalization::Banded => b.alpha1 * (1.0 - self.tau) * (1.0 - b.s),
        }
    }

    pub fn eval(&self, y: &Vec3) -> Result<f64> {
        let k = self.base.eval(y)?;
        let r = dot(y, y).sqrt();
        let p = self.base.d as f64 + 2.0 * self.base.s;
        Ok(self.model_coeff() * r.powf(-p) + self.tau * k)
    }

    /// Bounds on `K_τ(y)|y|^{d+2s}` valid for this `τ`.
    pub fn band(&self) -> (f64, f64) {
        let (lo, hi) = self.base.band();
        let m = self.model_coeff();
        (m + self.tau * lo, m + self.tau * hi)
    }

    /// Bounds valid uniformly over `τ ∈ [0,1]`.
    pub fn uniform_band(&self) -> (f64, f64) {
        let (lo, hi) = self.base.band();
        let a1 = self.base.alpha1;
        match self.normalization {
            HomotopyNormalization::Verbatim => (lo.min(a1), hi.max(a1)),
            HomotopyNormalization::Banded => (lo, hi),
        }
    }
}

fn harmonic(d: usize, s: f64, a1: f64, a2: f64, base: f64, terms: Vec<ZonalTerm>) -> KernelConfig {
    KernelConfig {
        s,
        d,
        alpha1: a1,
        alpha2: a2,
        profile: Profile::Harmonic { base, terms },
        radial: RadialModulation::Constant,
    }
}

fn direction(d: usize, angle: f64) -> Vec<f64> {
    match d {
        1 => vec![1.0],
        2 => vec![angle.cos(), angle.sin()],
        _ => vec![angle.cos(), angle.sin() * 0.6, angle.sin() * 0.8],
    }
}

/// The library's built-in kernel families for a given `(d, s)`. Odd
/// profiles are only included when `s != 1/2`.
pub fn builtin_kernels(d: usize, s: f64) -> Result<Vec<(String, KernelSpec)>> {
    let mut out = vec![("fractional".to_string(), KernelSpec::fractional(d, s)?)];
    let e = direction(d, 0.3);
    out.push((
        "harmonic-2".into(),
        KernelSpec::new(harmonic(
            d,
            s,
            1.0,
            2.0,
            1.0,
            vec![ZonalTerm {
                direction: e.clone(),
                power: 2,
                coeff: 1.0,
            }],
        ))?,
    ));
    out.push((
        "harmonic-4".into(),
        KernelSpec::new(harmonic(
            d,
            s,
            1.0,
            4.0,
            0.8,
            vec![
                ZonalTerm {
                    direction: e.clone(),
                    power: 2,
                    coeff: 3.5,
                },
                ZonalTerm {
                    direction: direction(d, 1.1),
                    power: 4,
                    coeff: -0.6,
                },
            ],
        ))?,
    ));
    if d >= 2 {
        out.push((
            "cone".into(),
            KernelSpec::new(KernelConfig {
                s,
                d,
                alpha1: 1.0,
                alpha2: 4.0,
                profile: Profile::Cone {
                    axis: direction(d, 0.7),
                    half_angle: PI / 6.0,
                    floor: 1.0,
                    peak: 4.0,
                },
                radial: RadialModulation::Constant,
            })?,
        ));
    }
    out.push((
        "logosc".into(),
        KernelSpec::new(KernelConfig {
            s,
            d,
            alpha1: 1.0,
            alpha2: 2.0,
            profile: Profile::Constant { value: Some(1.4) },
            radial: RadialModulation::Logosc {
                amplitude: 0.25,
                frequency: 2.0,
            },
        })?,
    ));
    if s != 0.5 {
        out.push((
            "skewed".into(),
            KernelSpec::new(harmonic(
                d,
                s,
                1.0,
                2.0,
                1.3,
                vec![
                    ZonalTerm {
                        direction: e.clone(),
                        power: 1,
                        coeff: 0.4,
                    },
                    ZonalTerm {
                        direction: direction(d, 1.9),
                        power: 2,
                        coeff: 0.25,
                    },
                ],
            ))?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chi_switch() {
        assert_eq!(chi_s(0.25, &[3.0, 0.0]), 0);
        assert_eq!(chi_s(0.5, &[0.5, 0.0]), 1);
        assert_eq!(chi_s(0.5, &[2.0, 0.0]), 0);
        assert_eq!(chi_s(0.75, &[1e-3]), 1);
    }

    #[test]
    fn unit_radius_value() {
        for d in 1..=3 {
            let k = KernelSpec::fractional(d, 0.3).unwrap();
            assert!((k.eval(&[1.0, 0.0, 0.0]).unwrap() - 0.7).abs() < 1e-15);
            assert!(k.eval(&[0.0; 3]).is_err());
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut cfg = KernelSpec::fractional(2, 0.5).unwrap().config();
        cfg.s = 1.0;
        assert!(KernelSpec::new(cfg.clone()).is_err());
        cfg.s = 0.5;
        cfg.alpha2 = 0.5;
        assert!(KernelSpec::new(cfg.clone()).is_err());
        cfg.alpha2 = 1.0;
        cfg.profile = Profile::Constant { value: Some(1.5) };
        assert!(KernelSpec::new(cfg).is_err());
    }

    #[test]
    fn odd_profile_rejected_at_half() {
        let cfg = harmonic(
            2,
            0.5,
            0.7,
            1.3,
            1.0,
            vec![ZonalTerm {
                direction: vec![1.0, 0.0],
                power: 1,
                coeff: 0.3,
            }],
        );
        match KernelSpec::new(cfg.clone()) {
            Err(Error::CancellationViolated { moment }) => assert!((moment - 0.15).abs() < 1e-9),
            other => panic!("expected rejection, got {other:?}"),
        }
        let mut ok = cfg;
        ok.s = 0.4;
        let k = KernelSpec::new(ok).unwrap();
        // a = 1 + 0.3cosθ: |∫ŷ a| / ∫a = 0.3π / 2π at every radius
        let m = check_cancellation(&k, &[1.0], 4096).unwrap();
        assert!((m - 0.15).abs() < 1e-9, "{m}");
    }

    #[test]
    fn builtins_are_valid_and_even_ones_cancel() {
        for d in 1..=3 {
            for s in [0.25, 0.5, 0.75] {
                for (name, k) in builtin_kernels(d, s).unwrap() {
                    if k.is_even() {
                        let m = check_cancellation(&k, &[0.1, 1.0, 7.0], 32).unwrap();
                        assert!(m <= 1e-12, "{name} d={d} s={s}: {m}");
                    }
                }
            }
        }
    }

    #[test]
    fn homotopy_endpoints() {
        let k = &builtin_kernels(2, 0.25).unwrap()[2].1;
        let h0 = homotopy_kernel(k, 0.0).unwrap();
        let h1 = homotopy_kernel(k, 1.0).unwrap();
        let y = [0.3, -1.2, 0.0];
        let r: f64 = (0.09f64 + 1.44).sqrt();
        assert!((h0.eval(&y).unwrap() - r.powf(-2.5)).abs() < 1e-14);
        assert_eq!(h1.eval(&y).unwrap(), k.eval(&y).unwrap());
        assert!(homotopy_kernel(k, 1.5).is_err());
        let (lo, hi) = h0.uniform_band();
        assert_eq!((lo, hi), (0.75, 3.0));
    }

    #[test]
    fn json_roundtrip() {
        for (_, k) in builtin_kernels(2, 0.75).unwrap() {
            let text = serde_json::to_string(&k.config()).unwrap();
            let back: KernelConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(KernelSpec::new(back).unwrap().config(), k.config());
        }
        let cfg: KernelConfig = serde_json::from_str(
            r#"{"s":0.5,"d":2,"alpha1":1,"alpha2":2,"profile":{"kind":"constant"}}"#,
        )
        .unwrap();
        assert_eq!(KernelSpec::new(cfg).unwrap().profile_at(&[1.0, 0.0, 0.0]), 1.0);
    }

    proptest! {
        #[test]
        fn ellipticity_band_holds(
            d in 1usize..=3, si in 0usize..3, which in 0usize..6,
            x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0, scale in -6.0f64..6.0,
        ) {
            let s = [0.25, 0.5, 0.75][si];
            let ks = builtin_kernels(d, s).unwrap();
            let (_, k) = &ks[which % ks.len()];
            let mut v = [x, y, z];
            for c in v.iter_mut().skip(d) { *c = 0.0; }
            let n = dot(&v, &v).sqrt();
            prop_assume!(n > 1e-3);
            let r = 10f64.powf(scale);
            let v = [v[0] / n * r, v[1] / n * r, v[2] / n * r];
            let val = k.eval(&v).unwrap() * r.powf(d as f64 + 2.0 * s);
            let (lo, hi) = k.band();
            prop_assert!(val >= lo * (1.0 - 1e-12) && val <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn homotopy_is_monotone_in_tau(t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, x in 0.1f64..3.0) {
            // base kernel dominates the α₁ floor pointwise: K|y|^{d+2s} ≥ α₁
            let k = KernelSpec::new(KernelConfig {
                s: 0.25, d: 2, alpha1: 1.0, alpha2: 4.0,
                profile: Profile::Constant { value: Some(4.0) },
                radial: RadialModulation::Constant,
            }).unwrap();
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let y = [x, 0.5, 0.0];
            let a = homotopy_kernel(&k, lo).unwrap().eval(&y).unwrap();
            let b = homotopy_kernel(&k, hi).unwrap().eval(&y).unwrap();
            prop_assert!(b >= a * (1.0 - 1e-14));
        }
    }
}
