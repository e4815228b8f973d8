//! Brute-force oracles. Each uses a different discretization from the
//! production routine it certifies, so agreement is evidence rather than
//! repetition.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::kernel::KernelSpec;
use crate::linalg::{singular_values, CMat, CVec};
use crate::quadrature::GaussLegendre;
use crate::symbol::{symbol_general, SymbolQuadrature};

/// `∫_R^∞ m(r) r^q dr` for `m = 1 + A sin(ω ln r)`, `q < −1`.
fn tail_power(r: f64, q: f64, amp: f64, omega: f64) -> f64 {
    let mut v = r.powf(q + 1.0) / -(q + 1.0);
    if amp != 0.0 {
        let z = Complex64::new(q + 1.0, omega);
        let rz = (z * r.ln()).exp();
        v += amp * (-rz / z).im;
    }
    v
}

/// Euler transform of an alternating series given by its partial sums:
/// repeated pairwise averaging.
fn euler_limit(mut sums: Vec<f64>) -> f64 {
    while sums.len() > 1 {
        sums = sums.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    sums[0]
}

struct RadialOracle {
    s: f64,
    amp: f64,
    omega: f64,
    gl: std::sync::Arc<GaussLegendre>,
    split: usize,
}

impl RadialOracle {
    fn m(&self, r: f64) -> f64 {
        1.0 + self.amp * (self.omega * r.ln()).sin()
    }

    fn chi(&self, r: f64) -> f64 {
        if self.s < 0.5 {
            0.0
        } else if self.s > 0.5 || r < 1.0 {
            1.0
        } else {
            0.0
        }
    }

    fn integrate(&self, a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / self.split as f64;
        (0..self.split)
            .map(|k| self.gl.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, f))
            .sum()
    }

    /// `(∫(1−cos cr)m r^{−1−2s}dr, ∫(sin cr − crχ)m r^{−1−2s}dr)` for `c > 0`.
    fn pair(&self, c: f64, want_im: bool) -> (f64, f64) {
        let beta = -1.0 - 2.0 * self.s;
        let half = PI / c;
        let re_f = |r: f64| 2.0 * (0.5 * c * r).sin().powi(2) * self.m(r) * r.powf(beta);
        let im_f = |r: f64| {
            let x = c * r;
            let sm = if x < 1e-3 {
                -x * x * x / 6.0 * (1.0 - x * x / 20.0)
            } else {
                x.sin() - x
            };
            let v = if self.chi(r) == 1.0 { sm } else { x.sin() };
            v * self.m(r) * r.powf(beta)
        };

        // geometric panels toward 0, then doubling up to the first half period
        let r1 = half.min(1.0);
        let mut pts = vec![r1];
        while *pts.last().unwrap() > 1e-30 * r1 {
            let last = *pts.last().unwrap();
            pts.push(0.5 * last);
        }
        pts.reverse();
        let mut r = r1;
        while r < half {
            r = (2.0 * r).min(half);
            pts.push(r);
        }
        // whole half periods until well past r = 2
        let mut k = (r / half).round().max(1.0);
        let kmin = k + 40.0;
        loop {
            k += 1.0;
            let b = k * half;
            if self.s == 0.5 && pts.last().unwrap() < &1.0 && b > 1.0 {
                pts.push(1.0);
            }
            pts.push(b);
            if k >= kmin && b >= 2.0 {
                break;
            }
        }
        let big_r = *pts.last().unwrap();
        let mut re = 0.0;
        let mut im = 0.0;
        for w in pts.windows(2) {
            re += self.integrate(w[0], w[1], &re_f);
            if want_im {
                im += self.integrate(w[0], w[1], &im_f);
            }
        }

        // oscillatory tails as alternating series over half periods
        let tail = |g: &dyn Fn(f64) -> f64| -> f64 {
            let mut acc = 0.0;
            let sums: Vec<f64> = (0..24)
                .map(|j| {
                    let a = big_r + j as f64 * half;
                    acc += self.integrate(a, a + half, &g);
                    acc
                })
                .collect();
            euler_limit(sums)
        };
        re += tail_power(big_r, beta, self.amp, self.omega);
        re -= tail(&|r: f64| (c * r).cos() * self.m(r) * r.powf(beta));
        if want_im {
            im += tail(&|r: f64| (c * r).sin() * self.m(r) * r.powf(beta));
            if self.s > 0.5 {
                im -= c * tail_power(big_r, beta + 1.0, self.amp, self.omega);
            }
        }
        (re, im)
    }
}

/// Gauss panels uniform in `u` on `[a, b]` under the smoothstep map
/// `t = a + (b − a)(10u³ − 15u⁴ + 6u⁵)`, which flattens endpoint kinks.
fn smoothstep_nodes(a: f64, b: f64, panels: usize, out: &mut Vec<(f64, f64)>) {
    let gl = GaussLegendre::get(12);
    let mut us = Vec::new();
    let h = 1.0 / panels as f64;
    for k in 0..panels {
        gl.push_mapped(k as f64 * h, (k + 1) as f64 * h, &mut us);
    }
    for (u, w) in us {
        let g = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let dg = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        out.push((a + (b - a) * g, w * (b - a) * dg));
    }
}

/// Angular nodes: smoothstep-graded panels between the kinks at `ξ·ŷ = 0`
/// and the profile jumps (2-d); graded panels in `cos θ` times a trapezoid
/// in azimuth about `ξ̂` (3-d).
fn oracle_sphere(d: usize, axis: &Vec3, breaks: &[f64], level: usize) -> Vec<(Vec3, f64)> {
    let mut out = Vec::new();
    match d {
        1 => {
            out.push(([1.0, 0.0, 0.0], 1.0));
            out.push(([-1.0, 0.0, 0.0], 1.0));
        }
        2 => {
            let th = axis[1].atan2(axis[0]);
            let mut cuts: Vec<f64> = [th + 0.5 * PI, th + 1.5 * PI]
                .iter()
                .chain(breaks)
                .map(|t| t.rem_euclid(2.0 * PI))
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let first = cuts[0];
            cuts.push(first + 2.0 * PI);
            let panels = 8 << level;
            let mut nodes = Vec::new();
            for w in cuts.windows(2) {
                smoothstep_nodes(w[0], w[1], panels, &mut nodes);
            }
            for (t, w) in nodes {
                out.push(([t.cos(), t.sin(), 0.0], w));
            }
        }
        _ => {
            let (e1, e2) = crate::symbol::angular_frame(axis);
            let panels = 8 << level;
            let mut ts = Vec::new();
            for (a, b) in [(-1.0, 0.0), (0.0, 1.0)] {
                smoothstep_nodes(a, b, panels, &mut ts);
            }
            let nphi = 48 << level;
            for (t, wt) in ts {
                let rho = (1.0 - t * t).max(0.0).sqrt();
                for k in 0..nphi {
                    let phi = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                    let y: Vec3 = std::array::from_fn(|i| t * axis[i] + rho * (phi.cos() * e1[i] + phi.sin() * e2[i]));
                    out.push((y, wt * 2.0 * PI / nphi as f64));
                }
            }
        }
    }
    out
}

/// Angles where a 2-d profile enters or leaves its clamp bounds: a scan
/// for changes of clamp state refined by bisection. These are the kinks
/// and jumps of the angular integrand.
fn clamp_transitions_2d(kernel: &KernelSpec) -> Vec<f64> {
    let (lo, hi) = (kernel.alpha1(), kernel.alpha2());
    let state = |t: f64| {
        let v = kernel.profile_at(&[t.cos(), t.sin(), 0.0]);
        if v <= lo {
            -1
        } else if v >= hi {
            1
        } else {
            0
        }
    };
    let n = 4096;
    let h = 2.0 * PI / n as f64;
    let mut out = Vec::new();
    for k in 0..n {
        let (mut a, mut b) = (k as f64 * h, (k + 1) as f64 * h);
        let sa = state(a);
        if sa == state(b) {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if state(m) == sa {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    // the odd part also samples the profile at −ŷ
    let n = out.len();
    for i in 0..n {
        out.push(out[i] + PI);
    }
    out
}

fn oracle_level(xi: &[f64], kernel: &KernelSpec, level: usize) -> CMat {
    let d = kernel.dim();
    let mut v = [0.0; 3];
    v[..d].copy_from_slice(xi);
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let mut m = CMat::zeros(d, d);
    if n == 0.0 {
        return m;
    }
    let (amp, omega) = kernel.radial().log_params();
    let radial = RadialOracle {
        s: kernel.s(),
        amp,
        omega,
        gl: GaussLegendre::get(10 + 6 * level),
        split: 1 << level,
    };
    let axis = [v[0] / n, v[1] / n, v[2] / n];
    let breaks = if d == 2 { clamp_transitions_2d(kernel) } else { Vec::new() };
    for (y, w) in oracle_sphere(d, &axis, &breaks, level) {
        let c = 2.0 * PI * (v[0] * y[0] + v[1] * y[1] + v[2] * y[2]);
        if c == 0.0 {
            continue;
        }
        let (ae, ao) = kernel.profile_parts(&y);
        let (re, im) = radial.pair(c.abs(), ao != 0.0);
        let z = Complex64::new(ae * re, -ao * im * c.signum()) * (w * (1.0 - kernel.s()));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += z * (y[i] * y[j]);
            }
        }
    }
    m
}

/// Independent symbol quadrature.
#[derive(Clone, Debug)]
pub struct OracleSymbol {
    pub matrix: CMat,
    /// Difference between this level and the next coarser one.
    pub error_estimate: f64,
}

/// `M(ξ)` by direct quadrature in `r` (no scaling to unit integrals, Euler
/// transform for the oscillatory tail) on a uniform angular rule, at
/// `level` and `level − 1` for an error estimate.
pub fn oracle_symbol_quadrature(xi: &[f64], kernel: &KernelSpec, level: usize) -> Result<OracleSymbol> {
    if xi.len() != kernel.dim() || xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("frequency does not match the kernel dimension".into()));
    }
    let level = level.max(1);
    let fine = oracle_level(xi, kernel, level);
    let coarse = oracle_level(xi, kernel, level - 1);
    let error_estimate = (&fine - &coarse).norm();
    Ok(OracleSymbol {
        matrix: fine,
        error_estimate,
    })
}

/// Relative discrepancy between the production symbol and the oracle.
/// Above `1e-4` this is a hard failure naming `ξ`.
pub fn check_symbol_against_oracle(xi: &[f64], kernel: &KernelSpec, quad: &SymbolQuadrature, level: usize) -> Result<f64> {
    let prod = symbol_general(xi, kernel, quad)?.entries;
    let oracle = oracle_symbol_quadrature(xi, kernel, level)?.matrix;
    let scale = oracle.norm();
    let disc = if scale == 0.0 {
        prod.norm()
    } else {
        (&prod - &oracle).norm() / scale
    };
    if disc > 1e-4 {
        return Err(Error::OracleDisagreement {
            xi: xi.to_vec(),
            discrepancy: disc,
        });
    }
    Ok(disc)
}

/// `σ_max(((2π|ξ|)^{2s} + λ)(M(ξ) + λI)⁻¹)`: the exact single-mode value
/// of `(‖(−Δ)^s u‖₂ + λ‖u‖₂)/‖f‖₂`.
pub fn oracle_mode_ratio(m: &CMat, xi: &[f64], s: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = if n == 0.0 { 0.0 } else { (2.0 * PI * n).powf(2.0 * s) };
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] += lambda;
    }
    let inv = shifted.try_inverse().expect("M + λI is invertible when its Hermitian part is positive");
    Ok(singular_values(&(inv * Complex64::new(a + lambda, 0.0)))
        .into_iter()
        .fold(0.0, f64::max))
}

/// `û(t_n) = ∫₀^{t_n} e^{−(t_n−r)(M+λ)}ĝ(r) dr` by the composite trapezoid
/// rule on `fine_steps` uniform steps, at every fine node, using the
/// recursion `U_n = E U_{n−1} + h/2 (E g_{n−1} + g_n)`, `E = e^{−h(M+λ)}`.
pub fn oracle_time_quadrature(
    forcing: impl Fn(f64) -> CVec,
    m: &CMat,
    lambda: f64,
    horizon: f64,
    fine_steps: usize,
) -> Vec<CVec> {
    let d = m.nrows();
    let h = horizon / fine_steps as f64;
    let mut a = m * Complex64::new(-h, 0.0);
    for i in 0..d {
        a[(i, i)] -= h * lambda;
    }
    let e = a.exp();
    let half = Complex64::new(0.5 * h, 0.0);
    let mut out = Vec::with_capacity(fine_steps + 1);
    let mut u = CVec::zeros(d);
    let mut g_prev = forcing(0.0);
    out.push(u.clone());
    for n in 1..=fine_steps {
        let g = forcing(n as f64 * h);
        u = &e * (u + &g_prev * half) + &g * half;
        out.push(u.clone());
        g_prev = g;
    }
    out
}

/// Least-squares slope of `log err` against `log steps`.
pub fn loglog_slope(steps: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::builtin_kernels;
    use crate::symbol::{derive_lame_constants, symbol_lame};

    #[test]
    fn euler_transform_sums_alternating_series() {
        // 1 - 1/2 + 1/3 - ... = ln 2
        let mut acc = 0.0;
        let sums: Vec<f64> = (1..=24)
            .map(|k| {
                acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                acc
            })
            .collect();
        assert!((euler_limit(sums) - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn oracle_matches_lame_closed_form() {
        let q = SymbolQuadrature::default();
        for s in [0.25, 0.5, 0.75] {
            let k = KernelSpec::fractional(2, s).unwrap();
            let c = derive_lame_constants(2, s, &q).unwrap();
            let xi = [1.0, 0.0];
            let o = oracle_symbol_quadrature(&xi, &k, 1).unwrap();
            let want = symbol_lame(&xi, &c, 1.0).entries;
            let rel = (&o.matrix - &want).norm() / want.norm();
            assert!(rel < 1e-6, "s={s}: {rel} (estimate {})", o.error_estimate);
        }
        let k = KernelSpec::fractional(2, 0.5).unwrap();
        assert_eq!(oracle_symbol_quadrature(&[0.0, 0.0], &k, 1).unwrap().matrix.norm(), 0.0);
    }

    #[test]
    fn oracle_agrees_with_production_for_builtins() {
        let q = SymbolQuadrature::default();
        for s in [0.25, 0.75] {
            for (name, k) in builtin_kernels(2, s).unwrap() {
                let disc = check_symbol_against_oracle(&[1.0, 2.0], &k, &q, 1).unwrap();
                assert!(disc < 1e-9, "{name} s={s}: {disc}");
                if k.is_even() {
                    let o = oracle_symbol_quadrature(&[1.0, 2.0], &k, 1).unwrap();
                    assert!(o.matrix.iter().all(|z| z.im.abs() <= 1e-10));
                }
            }
        }
    }

    #[test]
    fn mode_ratio_examples() {
        let q = SymbolQuadrature::default();
        let c = derive_lame_constants(2, 0.5, &q).unwrap();
        let xi = [0.0, 2.0];
        let m = symbol_lame(&xi, &c, 1.0).entries;
        let a = (2.0 * PI * 2.0f64).powf(1.0);
        let lambda = 0.3;
        let r = oracle_mode_ratio(&m, &xi, 0.5, lambda).unwrap();
        let par = (a + lambda) / (a * c.longitudinal() + lambda);
        let perp = (a + lambda) / (a * c.transverse() + lambda);
        assert!((r - par.max(perp)).abs() < 1e-12);
        assert!((oracle_mode_ratio(&m, &xi, 0.5, 1e12).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn time_oracle_constant_and_zero_forcing() {
        let m = crate::linalg::real_matrix(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let g = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.2)]);
        let traj = oracle_time_quadrature(|_| g.clone(), &m, 0.1, 1.0, 16384);
        let mut a = m.clone();
        a[(0, 0)] += 0.1;
        a[(1, 1)] += 0.1;
        let e = (a.clone() * Complex64::new(-1.0, 0.0)).exp();
        let want = a.try_inverse().unwrap() * (CMat::identity(2, 2) - e) * &g;
        assert!((traj.last().unwrap() - want).norm() < 1e-8);
        let zero = oracle_time_quadrature(|_| CVec::zeros(2), &m, 0.1, 1.0, 64);
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn slope_of_power_law() {
        let steps = [8.0, 16.0, 32.0, 64.0];
        let errs: Vec<f64> = steps.iter().map(|n: &f64| 3.0 * n.powf(-1.0)).collect();
        assert!((loglog_slope(&steps, &errs) + 1.0).abs() < 1e-12);
    }
}
