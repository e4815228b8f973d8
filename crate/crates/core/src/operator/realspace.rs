//! Direct singular quadrature of `𝕃u(x)` for closed-form probes.
//!
//! In polar form,
//! `𝕃u(x) = −(1−s) ∫_S a(ŷ) ŷ ∫_0^∞ ŷ·δ_s[u](x, rŷ) m(r) r^{−1−2s} dr dS`.
//! Each ray is split into an inner piece `(0, r₀]` handled by the Taylor
//! expansion of `u` with a certified remainder, graded and uniform
//! Gauss–Legendre panels on `(r₀, R]`, and a tail beyond `R` that is either
//! integrated asymptotically (oscillatory terms) or bounded.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::probe::SmoothProbe;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3, VectorField};
use crate::kernel::{dot, KernelSpec};
use crate::quadrature::GaussLegendre;
use crate::symbol::angular::{adapted_rule, AngularConfig};
use crate::symbol::radial::{oscillatory_tail, power_integral};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealspaceConfig {
    /// Largest admissible certified remainder (absolute).
    pub tol: f64,
    pub angular: AngularConfig,
    /// Gauss–Legendre points per radial panel.
    pub order: usize,
    /// Radial panels per oscillation period of the probe along a ray.
    pub panels_per_period: f64,
    /// Phase `|c|·R` at which the asymptotic tail takes over.
    pub tail_phase: f64,
    pub max_radius: f64,
    pub max_panels: usize,
}

impl Default for RealspaceConfig {
    fn default() -> Self {
        RealspaceConfig {
            tol: 1e-8,
            angular: AngularConfig {
                order: 16,
                ratio: 0.25,
                min_width: 1e-6,
                max_width: 0.25,
                azimuth: 32,
            },
            order: 16,
            panels_per_period: 4.0,
            tail_phase: 2.0 * PI * 16.0,
            max_radius: 1e7,
            max_panels: 100_000,
        }
    }
}

impl RealspaceConfig {
    /// A deliberately low-resolution level, the start of refinement studies.
    pub fn coarse() -> Self {
        RealspaceConfig {
            tol: 1e-6,
            angular: AngularConfig {
                order: 4,
                ratio: 0.25,
                min_width: 1e-3,
                max_width: 0.5,
                azimuth: 8,
            },
            order: 4,
            panels_per_period: 2.0,
            tail_phase: 2.0 * PI * 4.0,
            max_radius: 1e7,
            max_panels: 100_000,
        }
    }

    /// Next level of a refinement study.
    pub fn refined(&self) -> Self {
        let mut c = self.clone();
        c.angular.order *= 2;
        c.angular.min_width *= 0.1;
        c.angular.max_width *= 0.5;
        c.angular.azimuth *= 2;
        c.order *= 2;
        c.panels_per_period *= 2.0;
        c.tail_phase *= 2.0;
        c
    }
}

/// `𝕃u(x)` together with the certified bound on the truncated pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealspaceValue {
    pub value: Vec3,
    pub remainder: f64,
}

/// `∫_lo^hi m(r) r^q dr` for `m = 1 + A sin(ω ln r)`.
fn mpow(lo: f64, hi: f64, q: f64, amp: f64, omega: f64) -> f64 {
    let mut v = power_integral(lo, hi, Complex64::new(q, 0.0)).re;
    if amp != 0.0 {
        v += amp * power_integral(lo, hi, Complex64::new(q, omega)).im;
    }
    v
}

struct Ray<'a> {
    probe: &'a SmoothProbe,
    x: Vec3,
    s: f64,
    amp: f64,
    omega: f64,
    gl: &'a GaussLegendre,
    cfg: &'a RealspaceConfig,
}

impl Ray<'_> {
    fn m(&self, r: f64) -> f64 {
        1.0 + self.amp * (self.omega * r.ln()).sin()
    }

    fn compensated(&self, r: f64) -> bool {
        self.s > 0.5 || (self.s == 0.5 && r < 1.0)
    }

    /// `∫_0^∞ ŷ·δ_s m r^{−1−2s} dr` and its certified remainder.
    fn integrate(&self, yhat: &Vec3, r0: f64) -> Result<(f64, f64)> {
        let s = self.s;
        let (amp, omega) = (self.amp, self.omega);
        let mmax = 1.0 + amp.abs();
        let p = self.probe;
        let u0 = dot(yhat, &p.value(&self.x));
        let g = p.grad(&self.x);
        let q1: f64 = (0..3).map(|i| yhat[i] * dot(&g[i], yhat)).sum();
        let q2 = dot(yhat, &p.second_directional(&self.x, yhat));

        // inner (0, r0]: second-order Taylor polynomial, third-order remainder
        let mut total = 0.5 * q2 * mpow(0.0, r0, 1.0 - 2.0 * s, amp, omega);
        if s < 0.5 {
            total += q1 * mpow(0.0, r0, -2.0 * s, amp, omega);
        }
        let mut remainder = p.derivative_bound(3) / 6.0 * mmax * r0.powf(3.0 - 2.0 * s) / (3.0 - 2.0 * s);

        // panel layout
        let freqs = p.ray_frequencies(yhat);
        let h = match (freqs, p) {
            (Some((hi, _)), _) if hi > 0.0 => 2.0 * PI / hi / self.cfg.panels_per_period,
            (_, SmoothProbe::Gaussian { sigma, .. }) => sigma / self.cfg.panels_per_period,
            _ => f64::INFINITY,
        };
        let far = match (freqs, p) {
            (Some((_, lo)), _) if lo.is_finite() => (self.cfg.tail_phase / lo).max(2.0),
            (
                _,
                SmoothProbe::Gaussian {
                    center, sigma, ..
                },
            ) => {
                let z = [self.x[0] - center[0], self.x[1] - center[1], self.x[2] - center[2]];
                (dot(&z, &z).sqrt() + 12.0 * sigma).max(2.0)
            }
            _ => 2.0,
        };
        let far = far.min(self.cfg.max_radius);
        let mut pts = vec![r0];
        let mut a = r0;
        while a < far {
            let step = (3.0 * a).min(h);
            let mut b = (a + step).min(far);
            if s == 0.5 && a < 1.0 && b > 1.0 {
                b = 1.0;
            }
            pts.push(b);
            a = b;
            if pts.len() > self.cfg.max_panels {
                return Err(Error::InvalidParameter(format!(
                    "ray needs more than {} panels",
                    self.cfg.max_panels
                )));
            }
        }

        let f = |r: f64| -> f64 {
            p.ray_increment(&self.x, yhat, r, self.compensated(r)) * self.m(r) * r.powf(-1.0 - 2.0 * s)
        };
        for w in pts.windows(2) {
            total += self.gl.integrate(w[0], w[1], f);
        }

        // tail (far, ∞)
        let beta = -1.0 - 2.0 * s;
        total -= u0 * mpow(far, f64::INFINITY, beta, amp, omega);
        if s > 0.5 {
            total -= q1 * mpow(far, f64::INFINITY, -2.0 * s, amp, omega);
        }
        match p {
            SmoothProbe::Trig(terms) => {
                for t in terms {
                    let wy = dot(&t.amplitude, yhat);
                    if wy == 0.0 {
                        continue;
                    }
                    let th = 2.0 * PI * dot(&t.wavevector, &self.x) + t.phase;
                    let c = 2.0 * PI * dot(&t.wavevector, yhat);
                    if c == 0.0 {
                        total += wy * th.cos() * mpow(far, f64::INFINITY, beta, amp, omega);
                    } else if c.abs() * far >= 0.5 * self.cfg.tail_phase {
                        let b = Complex64::new(beta, 0.0);
                        let (mut val, mut bound) = oscillatory_tail(far, b, c);
                        if amp != 0.0 {
                            let (vp, bp) = oscillatory_tail(far, b + Complex64::new(0.0, omega), c);
                            let (vm, bm) = oscillatory_tail(far, b - Complex64::new(0.0, omega), c);
                            val += amp * (vp - vm) / Complex64::new(0.0, 2.0);
                            bound += amp.abs() * 0.5 * (bp + bm);
                        }
                        total += wy * (Complex64::from_polar(1.0, th) * val).re;
                        remainder += wy.abs() * bound;
                    } else {
                        remainder += wy.abs() * mmax * far.powf(-2.0 * s) / (2.0 * s);
                    }
                }
            }
            SmoothProbe::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let z = [self.x[0] - center[0], self.x[1] - center[1], self.x[2] - center[2]];
                let gap = (far - dot(&z, &z).sqrt()).max(0.0);
                let sup = dot(amplitude, amplitude).sqrt() * (-gap * gap / (2.0 * sigma * sigma)).exp();
                remainder += sup * mmax * far.powf(-2.0 * s) / (2.0 * s);
            }
            SmoothProbe::Affine { .. } => unreachable!("affine probes are handled in closed form"),
        }
        Ok((total, remainder))
    }
}

fn affine_value(a: &[[f64; 3]; 3], s: f64, d: usize) -> Result<RealspaceValue> {
    // ŷ·δ_s = r (1 − χ) ŷ·A ŷ, and ŷ·Aŷ only sees the symmetric part
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sym = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            sym = sym.max((a[i][j] + a[j][i]).abs() * 0.5);
        }
    }
    if s > 0.5 || sym <= 1e-15 * scale {
        Ok(RealspaceValue {
            value: [0.0; 3],
            remainder: 0.0,
        })
    } else {
        Err(Error::Domain(
            "affine field with a symmetric gradient is outside the domain for s <= 1/2".into(),
        ))
    }
}

/// `𝕃u(x)` by direct quadrature.
pub fn apply_realspace(
    probe: &SmoothProbe,
    x: &[f64],
    kernel: &KernelSpec,
    cfg: &RealspaceConfig,
) -> Result<RealspaceValue> {
    let d = kernel.dim();
    if x.len() != d {
        return Err(Error::InvalidParameter(format!(
            "point has {} components, kernel dimension is {d}",
            x.len()
        )));
    }
    let s = kernel.s();
    if let SmoothProbe::Affine { a, .. } = probe {
        return affine_value(a, s, d);
    }
    let mut xp = [0.0; 3];
    xp[..d].copy_from_slice(x);
    let (amp, omega) = kernel.radial().log_params();
    let gl = GaussLegendre::get(cfg.order);
    let ray = Ray {
        probe,
        x: xp,
        s,
        amp,
        omega,
        gl: &gl,
        cfg,
    };
    let mut axis = probe.preferred_axis().unwrap_or([1.0, 0.0, 0.0]);
    axis[d..].iter_mut().for_each(|v| *v = 0.0);
    let n = dot(&axis, &axis).sqrt();
    let axis = if n > 0.0 { axis.map(|v| v / n) } else { [1.0, 0.0, 0.0] };
    let rule = adapted_rule(d, &axis, &kernel.profile_breaks_2d(), &cfg.angular);

    let d2 = probe.derivative_bound(2);
    let mut r0 = if d2 > 0.0 {
        (cfg.tol / d2).powf(1.0 / (2.0 - 2.0 * s)).min(0.1)
    } else {
        0.1
    };
    let weight_sum: f64 = rule.iter().map(|(y, w)| w * kernel.profile_at(y)).sum::<f64>() * (1.0 - s);
    let inner_bound = |r0: f64| {
        weight_sum * probe.derivative_bound(3) / 6.0 * (1.0 + amp.abs()) * r0.powf(3.0 - 2.0 * s)
            / (3.0 - 2.0 * s)
    };
    let mut halvings = 0;
    while inner_bound(r0) > 0.5 * cfg.tol {
        if halvings == 6 {
            return Err(Error::CertificationFailed {
                bound: inner_bound(r0),
                tol: cfg.tol,
            });
        }
        r0 *= 0.5;
        halvings += 1;
    }

    let mut value = [0.0; 3];
    let mut remainder = 0.0;
    for (y, w) in &rule {
        let (j, rem) = ray.integrate(y, r0)?;
        let wa = w * kernel.profile_at(y) * (1.0 - s);
        for c in 0..3 {
            value[c] -= wa * y[c] * j;
        }
        remainder += wa * rem;
    }
    if !(remainder <= cfg.tol) {
        return Err(Error::CertificationFailed {
            bound: remainder,
            tol: cfg.tol,
        });
    }
    Ok(RealspaceValue { value, remainder })
}

/// [`apply_realspace`] at many points, in parallel when enabled.
pub fn apply_realspace_at(
    probe: &SmoothProbe,
    points: &[Vec<f64>],
    kernel: &KernelSpec,
    cfg: &RealspaceConfig,
) -> Result<Vec<RealspaceValue>> {
    let run = |x: &Vec<f64>| apply_realspace(probe, x, kernel, cfg);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(run).collect()
    }
}

/// `𝕃u` sampled at every grid point.
pub fn sample_realspace(
    probe: &SmoothProbe,
    grid: &GridSpec,
    kernel: &KernelSpec,
    cfg: &RealspaceConfig,
) -> Result<VectorField> {
    let d = grid.dim();
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|j| grid.point(j)[..d].to_vec()).collect();
    let vals = apply_realspace_at(probe, &points, kernel, cfg)?;
    let mut data = vec![0.0; d * grid.len()];
    for (j, v) in vals.iter().enumerate() {
        for c in 0..d {
            data[c * grid.len() + j] = v.value[c];
        }
    }
    VectorField::new(grid.clone(), d, data)
}
