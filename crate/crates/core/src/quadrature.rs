//! Gauss–Legendre rules, composite panel integration and adaptive
//! Gauss–Kronrod integration on finite intervals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Shared, cached rule of order `n`.
    pub fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap();
        map.entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
            .clone()
    }

    /// Newton iteration on the three-term recurrence.
    pub fn compute(n: usize) -> GaussLegendre {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                dp = 1.0;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n == 1 {
            nodes[0] = 0.0;
            weights[0] = 2.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Mapped nodes and weights on `[a, b]`, appended to `out`.
    pub fn push_mapped(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        out.extend(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| (mid + half * x, w * half)),
        );
    }
}

/// Breakpoints of panels on `[a, b]` that shrink geometrically by `ratio`
/// toward `a` until narrower than `min_width`, followed by equal panels of
/// width at most `max_width` up to `b`.
pub fn graded_breakpoints(a: f64, b: f64, ratio: f64, min_width: f64, max_width: f64) -> Vec<f64> {
    debug_assert!(b > a && ratio > 0.0 && ratio < 1.0);
    let outer = (b - a).min(max_width);
    let mut dist = vec![outer];
    while *dist.last().unwrap() >= min_width {
        let next = dist.last().unwrap() * ratio;
        dist.push(next);
    }
    let mut pts = vec![a];
    pts.extend(dist.iter().rev().map(|&r| a + r));
    let start = a + outer;
    let rest = b - start;
    if rest > 0.0 {
        let k = (rest / max_width).ceil().max(1.0) as usize;
        pts.extend((1..=k).map(|i| start + rest * i as f64 / k as f64));
    }
    *pts.last_mut().unwrap() = b;
    pts
}

/// Breakpoints graded toward both ends of `[a, b]`.
pub fn two_sided_breakpoints(a: f64, b: f64, ratio: f64, min_width: f64, max_width: f64) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let mut pts = graded_breakpoints(a, mid, ratio, min_width, max_width);
    let n = pts.len();
    for i in (0..n - 1).rev() {
        pts.push(b - (pts[i] - a));
    }
    pts[n - 1] = mid;
    *pts.last_mut().unwrap() = b;
    pts
}

/// Product rule on the unit sphere `S^{d-1}`, symmetric under `ŷ -> -ŷ`.
///
/// `d = 1`: the two points `±1`. `d = 2`: `n` equispaced angles (`n` is
/// rounded up to even). `d = 3`: `n`-point Gauss–Legendre in `cos θ` times
/// `2n` equispaced azimuths.
pub fn sphere_rule(d: usize, n: usize) -> Vec<([f64; 3], f64)> {
    use std::f64::consts::PI;
    match d {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => {
            let n = n.max(2).next_multiple_of(2);
            (0..n)
                .map(|j| {
                    let th = 2.0 * PI * j as f64 / n as f64;
                    ([th.cos(), th.sin(), 0.0], 2.0 * PI / n as f64)
                })
                .collect()
        }
        3 => {
            let gl = GaussLegendre::get(n.max(1));
            let nphi = 2 * n.max(1);
            let mut out = Vec::with_capacity(gl.nodes.len() * nphi);
            for (&t, &wt) in gl.nodes.iter().zip(&gl.weights) {
                let st = (1.0 - t * t).max(0.0).sqrt();
                for k in 0..nphi {
                    let ph = 2.0 * PI * k as f64 / nphi as f64;
                    out.push(([st * ph.cos(), st * ph.sin(), t], wt * 2.0 * PI / nphi as f64));
                }
            }
            out
        }
        _ => panic!("sphere_rule: unsupported dimension {d}"),
    }
}

/// Surface measure of `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("sphere_area: unsupported dimension {d}"),
    }
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = KRONROD_WEIGHTS[7] * fc;
    let mut g = GAUSS7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let s = f(mid - dx) + f(mid + dx);
        k += KRONROD_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += GAUSS7_WEIGHTS[i / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive G7/K15 integration of `f` over `[a, b]`.
pub fn adaptive_gk15(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
    mut f: impl FnMut(f64) -> f64,
) -> Result<Adaptive> {
    let mut segs = vec![(a, b, gk15(a, b, &mut f))];
    loop {
        let value: f64 = segs.iter().map(|s| s.2 .0).sum();
        let error: f64 = segs.iter().map(|s| s.2 .1).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Adaptive {
                value,
                error,
                intervals: segs.len(),
            });
        }
        if segs.len() >= max_intervals {
            return Err(Error::QuadratureNotConverged {
                coarse: value - error,
                fine: value + error,
            });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        segs.push((lo, mid, gk15(lo, mid, &mut f)));
        segs.push((mid, hi, gk15(mid, hi, &mut f)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1, 2, 5, 16, 24] {
            let gl = GaussLegendre::compute(n);
            assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - exact).abs() < 1e-13, "n={n}");
            let even = 2 * n - 2;
            let got = gl.integrate(0.0, 1.0, |x| x.powi(even as i32));
            assert!((got - 1.0 / (even as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn graded_panels_cover_interval() {
        let pts = graded_breakpoints(0.0, 3.0, 0.25, 1e-12, 0.5);
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 3.0);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
        assert!(pts[1] <= 1e-12 * 1.0001);
        assert!(pts.windows(2).all(|w| w[1] - w[0] <= 0.5 + 1e-12));
        let two = two_sided_breakpoints(1.0, 2.0, 0.5, 1e-9, 0.2);
        assert!(two.windows(2).all(|w| w[1] > w[0]));
        assert!((two[1] - 1.0) <= 1e-9 * 1.0001 && (2.0 - two[two.len() - 2]) <= 1e-9 * 1.0001);
    }

    #[test]
    fn graded_panels_resolve_endpoint_singularity() {
        let gl = GaussLegendre::get(16);
        let pts = graded_breakpoints(0.0, 1.0, 0.25, 1e-14, 1.0);
        let sum: f64 = pts.windows(2).skip(1).map(|w| gl.integrate(w[0], w[1], |x| x.powf(-0.5))).sum();
        let missing = 2.0 * pts[1].sqrt();
        assert!((sum + missing - 2.0).abs() < 1e-12, "{}", sum + missing - 2.0);
    }

    #[test]
    fn sphere_rules_integrate_moments() {
        for d in 1..=3 {
            let rule = sphere_rule(d, 12);
            let area: f64 = rule.iter().map(|p| p.1).sum();
            assert!((area - sphere_area(d)).abs() < 1e-12);
            // second moment of each coordinate is |S|/d
            let m2: f64 = rule.iter().map(|(y, w)| w * y[0] * y[0]).sum();
            assert!((m2 - sphere_area(d) / d as f64).abs() < 1e-12);
            let m1: f64 = rule.iter().map(|(y, w)| w * y[0]).sum();
            assert!(m1.abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let r = adaptive_gk15(0.0, 10.0, 1e-12, 1e-12, 500, |t| (-3.0 * t).exp()).unwrap();
        assert!((r.value - (1.0 - (-30.0f64).exp()) / 3.0).abs() < 1e-12);
        let r = adaptive_gk15(-1.0, 1.0, 1e-10, 1e-10, 500, |x| 1.0 / (1e-4 + x * x)).unwrap();
        assert!((r.value - 2.0 * (1.0f64 / 1e-2).atan() / 1e-2).abs() < 1e-7);
    }
}
