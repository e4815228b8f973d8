//! Closed-form vector fields with exact derivatives, used as inputs to the
//! real-space operator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3, VectorField};
use crate::kernel::{chi_s, dot};

pub type Mat3 = [[f64; 3]; 3];

/// `amplitude · cos(2π k·x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: Vec3,
    pub wavevector: Vec3,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SmoothProbe {
    Trig(Vec<TrigTerm>),
    /// `amplitude · exp(-|x - center|²/(2σ²))`
    Gaussian { amplitude: Vec3, center: Vec3, sigma: f64 },
    /// `A x + b`
    Affine { a: Mat3, b: Vec3 },
}

fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

impl SmoothProbe {
    /// One lattice mode of `grid`: `amplitude · cos(2π ξ_j·x + phase)`.
    pub fn mode(grid: &GridSpec, index: usize, amplitude: Vec3, phase: f64) -> Self {
        SmoothProbe::Trig(vec![TrigTerm {
            amplitude,
            wavevector: grid.freq3(index),
            phase,
        }])
    }

    pub fn constant(value: Vec3) -> Self {
        SmoothProbe::Affine {
            a: [[0.0; 3]; 3],
            b: value,
        }
    }

    pub fn value(&self, x: &Vec3) -> Vec3 {
        match self {
            SmoothProbe::Trig(terms) => {
                let mut v = [0.0; 3];
                for t in terms {
                    let c = (2.0 * PI * dot(&t.wavevector, x) + t.phase).cos();
                    for i in 0..3 {
                        v[i] += t.amplitude[i] * c;
                    }
                }
                v
            }
            SmoothProbe::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let z = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let g = (-dot(&z, &z) / (2.0 * sigma * sigma)).exp();
                amplitude.map(|a| a * g)
            }
            SmoothProbe::Affine { a, b } => {
                let mut v = *b;
                for i in 0..3 {
                    v[i] += dot(&a[i], x);
                }
                v
            }
        }
    }

    /// `∇u`, with `grad[i][j] = ∂_j u_i`.
    pub fn grad(&self, x: &Vec3) -> Mat3 {
        let mut g = [[0.0; 3]; 3];
        match self {
            SmoothProbe::Trig(terms) => {
                for t in terms {
                    let sn = -(2.0 * PI * dot(&t.wavevector, x) + t.phase).sin();
                    for i in 0..3 {
                        for j in 0..3 {
                            g[i][j] += t.amplitude[i] * 2.0 * PI * t.wavevector[j] * sn;
                        }
                    }
                }
            }
            SmoothProbe::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let z = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let s2 = sigma * sigma;
                let e = (-dot(&z, &z) / (2.0 * s2)).exp();
                for i in 0..3 {
                    for j in 0..3 {
                        g[i][j] = -amplitude[i] * z[j] / s2 * e;
                    }
                }
            }
            SmoothProbe::Affine { a, .. } => g = *a,
        }
        g
    }

    /// `D[u] = (∇u + ∇uᵀ)/2`, symmetric by construction.
    pub fn sym_grad(&self, x: &Vec3) -> Mat3 {
        let g = self.grad(x);
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v = 0.5 * (g[i][j] + g[j][i]);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }

    /// `d²/dr² u(x + rŷ)` at `r = 0`.
    pub fn second_directional(&self, x: &Vec3, yhat: &Vec3) -> Vec3 {
        match self {
            SmoothProbe::Trig(terms) => {
                let mut v = [0.0; 3];
                for t in terms {
                    let c = 2.0 * PI * dot(&t.wavevector, yhat);
                    let cs = (2.0 * PI * dot(&t.wavevector, x) + t.phase).cos();
                    for i in 0..3 {
                        v[i] -= t.amplitude[i] * c * c * cs;
                    }
                }
                v
            }
            SmoothProbe::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let z = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let s2 = sigma * sigma;
                let e = (-dot(&z, &z) / (2.0 * s2)).exp();
                let p = dot(&z, yhat) / s2;
                let f = (p * p - 1.0 / s2) * e;
                amplitude.map(|a| a * f)
            }
            SmoothProbe::Affine { .. } => [0.0; 3],
        }
    }

    /// `ŷ·[u(x+rŷ) − u(x) − r ∇u(x)ŷ]` (the linear term only when
    /// `linear`), evaluated without cancellation for small `r`.
    pub fn ray_increment(&self, x: &Vec3, yhat: &Vec3, r: f64, linear: bool) -> f64 {
        match self {
            SmoothProbe::Trig(terms) => {
                let mut v = 0.0;
                for t in terms {
                    let th = 2.0 * PI * dot(&t.wavevector, x) + t.phase;
                    let cr = 2.0 * PI * dot(&t.wavevector, yhat) * r;
                    let h = (0.5 * cr).sin();
                    // cos(θ+cr) − cos θ = −2cos θ sin²(cr/2) − sin θ sin cr
                    let sn = if linear { sin_minus_linear(cr) } else { cr.sin() };
                    v += dot(&t.amplitude, yhat) * (-2.0 * th.cos() * h * h - th.sin() * sn);
                }
                v
            }
            SmoothProbe::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let z = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let s2 = sigma * sigma;
                let e0 = (-dot(&z, &z) / (2.0 * s2)).exp();
                let p = dot(&z, yhat);
                let t = -(2.0 * r * p + r * r) / (2.0 * s2);
                let inc = if linear {
                    // e^t − 1 − (linear part of t)
                    expm1_minus_linear(t) - r * r / (2.0 * s2)
                } else {
                    t.exp_m1()
                };
                dot(amplitude, yhat) * e0 * inc
            }
            SmoothProbe::Affine { a, .. } => {
                if linear {
                    0.0
                } else {
                    let mut v = 0.0;
                    for i in 0..3 {
                        v += yhat[i] * dot(&a[i], yhat) * r;
                    }
                    v
                }
            }
        }
    }

    /// `sup |u|` (Euclidean norm of the vector value).
    pub fn sup_norm(&self) -> f64 {
        match self {
            SmoothProbe::Trig(terms) => terms.iter().map(|t| norm(&t.amplitude)).sum(),
            SmoothProbe::Gaussian { amplitude, .. } => norm(amplitude),
            SmoothProbe::Affine { .. } => f64::INFINITY,
        }
    }

    /// Bound on every `k`-th directional derivative along unit vectors.
    pub fn derivative_bound(&self, k: u32) -> f64 {
        match self {
            SmoothProbe::Trig(terms) => terms
                .iter()
                .map(|t| norm(&t.amplitude) * (2.0 * PI * norm(&t.wavevector)).powi(k as i32))
                .sum(),
            SmoothProbe::Gaussian { amplitude, sigma, .. } => {
                // sup_t |d^k/dt^k e^{-t²/2}| for k = 0..3
                let c = [1.0, 0.61, 1.0, 1.39][k.min(3) as usize];
                let c = if k > 3 { 3f64.powi(k as i32) } else { c };
                norm(amplitude) * c / sigma.powi(k as i32)
            }
            SmoothProbe::Affine { a, .. } => match k {
                0 => f64::INFINITY,
                1 => a.iter().map(|r| dot(r, r)).sum::<f64>().sqrt(),
                _ => 0.0,
            },
        }
    }

    /// Largest and smallest nonzero `|2π k·ŷ|` over trigonometric terms.
    pub fn ray_frequencies(&self, yhat: &Vec3) -> Option<(f64, f64)> {
        match self {
            SmoothProbe::Trig(terms) => {
                let cs: Vec<f64> = terms
                    .iter()
                    .map(|t| (2.0 * PI * dot(&t.wavevector, yhat)).abs())
                    .collect();
                let hi = cs.iter().copied().fold(0.0, f64::max);
                let lo = cs.iter().copied().filter(|&c| c > 0.0).fold(f64::INFINITY, f64::min);
                Some((hi, lo))
            }
            _ => None,
        }
    }

    /// Direction along which the angular integrand is least smooth.
    pub fn preferred_axis(&self) -> Option<Vec3> {
        match self {
            SmoothProbe::Trig(terms) => terms.iter().find(|t| norm(&t.wavevector) > 0.0).map(|t| {
                let n = norm(&t.wavevector);
                t.wavevector.map(|k| k / n)
            }),
            _ => None,
        }
    }

    /// `(−Δ)^σ` applied to a trigonometric probe.
    pub fn fraclap(&self, sigma: f64) -> Result<SmoothProbe> {
        match self {
            SmoothProbe::Trig(terms) => Ok(SmoothProbe::Trig(
                terms
                    .iter()
                    .map(|t| {
                        let k = norm(&t.wavevector);
                        let f = if k == 0.0 { 0.0 } else { (2.0 * PI * k).powf(2.0 * sigma) };
                        TrigTerm {
                            amplitude: t.amplitude.map(|a| a * f),
                            wavevector: t.wavevector,
                            phase: t.phase,
                        }
                    })
                    .collect(),
            )),
            _ => Err(Error::InvalidParameter(
                "fractional Laplacian of a probe needs a trigonometric probe".into(),
            )),
        }
    }

    /// Sample the first `grid.dim()` components at the grid points.
    pub fn sample(&self, grid: &GridSpec) -> Result<VectorField> {
        let d = grid.dim();
        VectorField::new(
            grid.clone(),
            d,
            (0..d)
                .flat_map(|c| (0..grid.len()).map(move |j| (c, j)))
                .map(|(c, j)| self.value(&grid.point(j))[c])
                .collect(),
        )
    }
}

fn sin_minus_linear(u: f64) -> f64 {
    if u.abs() < 0.25 {
        let u2 = u * u;
        u * u2
            * (-1.0 / 6.0
                + u2 * (1.0 / 120.0
                    + u2 * (-1.0 / 5040.0 + u2 * (1.0 / 362880.0 - u2 / 39916800.0))))
    } else {
        u.sin() - u
    }
}

/// `e^t − 1 − t`.
fn expm1_minus_linear(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let mut term = t * t / 2.0;
        let mut sum = 0.0;
        for k in 3..12 {
            sum += term;
            term *= t / k as f64;
        }
        sum
    } else {
        t.exp_m1() - t
    }
}

/// `δ_s[u](x, y) = u(x+y) − u(x) − D[u](x)·y·χ^(s)(y)`.
pub fn delta_s(probe: &SmoothProbe, x: &Vec3, y: &Vec3, s: f64) -> Result<Vec3> {
    if norm(y) == 0.0 {
        return Err(Error::Domain("δ_s evaluated at y = 0".into()));
    }
    let mut v = probe.value(&add(x, y));
    let u0 = probe.value(x);
    for i in 0..3 {
        v[i] -= u0[i];
    }
    if chi_s(s, y) == 1 {
        let dm = probe.sym_grad(x);
        for i in 0..3 {
            v[i] -= dot(&dm[i], y);
        }
    }
    Ok(v)
}
