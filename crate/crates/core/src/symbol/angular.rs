//! Angular quadrature on `S^{d-1}` adapted to a frequency direction: the
//! radial factors are non-smooth where `ξ·ŷ = 0`, so panels are graded
//! toward that set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::Vec3;
use crate::quadrature::{two_sided_breakpoints, GaussLegendre};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularConfig {
    pub order: usize,
    pub ratio: f64,
    pub min_width: f64,
    pub max_width: f64,
    /// Azimuthal trapezoid points (3-d only).
    pub azimuth: usize,
}

impl Default for AngularConfig {
    fn default() -> Self {
        AngularConfig {
            order: 16,
            ratio: 0.25,
            min_width: 1e-10,
            max_width: 0.25,
            azimuth: 64,
        }
    }
}

fn push_panels(pts: &[f64], gl: &GaussLegendre, out: &mut Vec<(f64, f64)>) {
    for w in pts.windows(2) {
        gl.push_mapped(w[0], w[1], out);
    }
}

/// Orthonormal frame `(e1, e2, n)` with `n` the given unit vector.
pub(crate) fn frame(n: &Vec3) -> (Vec3, Vec3) {
    let pick = if n[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dp = pick[0] * n[0] + pick[1] * n[1] + pick[2] * n[2];
    let mut e1 = [pick[0] - dp * n[0], pick[1] - dp * n[1], pick[2] - dp * n[2]];
    let l = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|x| *x /= l);
    let e2 = [
        n[1] * e1[2] - n[2] * e1[1],
        n[2] * e1[0] - n[0] * e1[2],
        n[0] * e1[1] - n[1] * e1[0],
    ];
    (e1, e2)
}

/// Nodes and weights on `S^{d-1}` graded toward the great sphere
/// perpendicular to `axis` (a unit vector). In 2-d, `breaks` lists extra
/// angles where the integrand jumps.
pub fn adapted_rule(d: usize, axis: &Vec3, breaks: &[f64], cfg: &AngularConfig) -> Vec<(Vec3, f64)> {
    let gl = GaussLegendre::get(cfg.order);
    match d {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => {
            let th = axis[1].atan2(axis[0]);
            let mut cuts: Vec<f64> = [th + 0.5 * PI, th + 1.5 * PI]
                .into_iter()
                .chain(breaks.iter().copied())
                .map(|t| t.rem_euclid(2.0 * PI))
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
            let mut arcs = Vec::new();
            for i in 0..cuts.len() {
                let a = cuts[i];
                let mut b = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + 2.0 * PI };
                if cuts.len() == 1 {
                    b = a + 2.0 * PI;
                }
                if b - a > 1e-13 {
                    arcs.push((a, b));
                }
            }
            let mut nodes = Vec::new();
            for (a, b) in arcs {
                let pts = two_sided_breakpoints(a, b, cfg.ratio, cfg.min_width, cfg.max_width);
                push_panels(&pts, &gl, &mut nodes);
            }
            nodes
                .into_iter()
                .map(|(t, w)| ([t.cos(), t.sin(), 0.0], w))
                .collect()
        }
        3 => {
            let (e1, e2) = frame(axis);
            let mut ts = Vec::new();
            for (a, b) in [(-1.0, 0.0), (0.0, 1.0)] {
                let pts = two_sided_breakpoints(a, b, cfg.ratio, cfg.min_width, cfg.max_width);
                push_panels(&pts, &gl, &mut ts);
            }
            let nphi = cfg.azimuth.max(4);
            let dphi = 2.0 * PI / nphi as f64;
            let mut out = Vec::with_capacity(ts.len() * nphi);
            for &(t, wt) in &ts {
                let st = (1.0 - t * t).max(0.0).sqrt();
                for k in 0..nphi {
                    let (sp, cp) = ((k as f64 + 0.5) * dphi).sin_cos();
                    let mut y = [0.0; 3];
                    for c in 0..3 {
                        y[c] = t * axis[c] + st * (cp * e1[c] + sp * e2[c]);
                    }
                    out.push((y, wt * dphi));
                }
            }
            out
        }
        _ => panic!("adapted_rule: unsupported dimension {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere_area;

    #[test]
    fn adapted_rules_have_full_measure() {
        let cfg = AngularConfig::default();
        for d in 1..=3 {
            for axis in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.6, 0.8]] {
                if d < 3 && axis[2] != 0.0 {
                    continue;
                }
                let axis = if d == 1 { [1.0, 0.0, 0.0] } else { axis };
                let rule = adapted_rule(d, &axis, &[0.3, 2.0], &cfg);
                let area: f64 = rule.iter().map(|p| p.1).sum();
                assert!((area - sphere_area(d)).abs() < 1e-12, "d={d}: {area}");
                for (y, _) in &rule {
                    let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                    assert!((n - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn resolves_fractional_power_of_cosine() {
        // ∫_0^{2π} |cos θ|^{0.5} dθ = 2 B(1/2, 3/4)
        let cfg = AngularConfig::default();
        let rule = adapted_rule(2, &[1.0, 0.0, 0.0], &[], &cfg);
        let got: f64 = rule.iter().map(|(y, w)| w * y[0].abs().sqrt()).sum();
        use statrs::function::gamma::gamma;
        let want = 2.0 * gamma(0.5) * gamma(0.75) / gamma(1.25);
        assert!((got - want).abs() < 1e-12, "{got}");
    }
}
