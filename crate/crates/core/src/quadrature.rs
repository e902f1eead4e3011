//! Quadrature rules: Gauss–Hermite for integrals against `e^{−x²}` and
//! adaptive Gauss–Kronrod (7/15) on finite intervals.

use alloc::vec::Vec;

use libm::{fabs, sqrt};

/// Nodes and weights of the `n`-point Gauss–Hermite rule,
/// `∫ e^{−x²} g(x) dx ≈ Σ wᵢ g(xᵢ)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots are bracketed by Sturm-sequence bisection on the Jacobi
    /// matrix (off-diagonal `√(k/2)`), polished by Newton on the
    /// orthonormal Hermite recurrence, which also yields the weights.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Hermite rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let bound = sqrt(2.0 * n as f64 + 1.0) + 1.0;
        for i in 0..n.div_ceil(2) {
            // Node i is the (n − 1 − i)-th smallest eigenvalue.
            let k = n - 1 - i;
            let (mut lo, mut hi) = (0.0, if i == 0 { bound } else { nodes[i - 1] });
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eigen_count_below(n, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut pp = hermite_eval(n, z).1;
            for _ in 0..3 {
                let (p, d) = hermite_eval(n, z);
                pp = d;
                let step = p / d;
                if !step.is_finite() || fabs(step) > hi - lo + 1e-12 {
                    break;
                }
                z -= step;
            }
            if i == n - 1 - i {
                z = 0.0;
                pp = hermite_eval(n, 0.0).1;
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Number of eigenvalues of the `n × n` Hermite Jacobi matrix below `x`.
fn eigen_count_below(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut d = -x;
    for k in 1..=n {
        if d < 0.0 {
            count += 1;
        }
        if k == n {
            break;
        }
        let dd = if d == 0.0 { f64::MIN_POSITIVE } else { d };
        d = -x - (k as f64 / 2.0) / dd;
    }
    count
}

/// Orthonormal Hermite value `p̃ₙ(z)` and `√(2n)·p̃ₙ₋₁(z)`, its derivative.
fn hermite_eval(n: usize, z: f64) -> (f64, f64) {
    const PI_M4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut p1 = PI_M4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * sqrt(2.0 / (jf + 1.0)) * p2 - sqrt(jf / (jf + 1.0)) * p3;
    }
    (p1, sqrt(2.0 * n as f64) * p2)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, fabs((k - g) * h))
}

/// Result of [`adaptive_gk`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod integration over the consecutive
/// segments of `breaks` (sorted, at least two points). Bisects the
/// segment with the largest error estimate until the total error is
/// below `max(abs_tol, rel_tol·|value|)` or `max_segments` is reached.
///
/// A feature much narrower than the node spacing of its starting segment
/// is invisible to the error estimate, so `breaks` must already resolve
/// the integrand's length scales.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Integral {
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = kronrod15(&mut f, w[0], w[1]);
            segs.push((w[0], w[1], v, e));
        }
    }
    loop {
        let value: f64 = segs.iter().map(|s| s.2).sum();
        let error: f64 = segs.iter().map(|s| s.3).sum();
        if error <= abs_tol.max(rel_tol * fabs(value)) {
            return Integral {
                value,
                error,
                converged: true,
            };
        }
        if segs.len() >= max_segments {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, be), (i, s)| {
                if s.3 > be {
                    (i, s.3)
                } else {
                    (bi, be)
                }
            });
        let (a, b, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            // Segment can no longer be split in floating point.
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (v1, e1) = kronrod15(&mut f, a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, b);
        segs.push((a, mid, v1, e1));
        segs.push((mid, b, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn hermite_rules_integrate_even_moments() {
        for &n in &[1usize, 2, 5, 16, 64, 128, 256] {
            let r = GaussHermite::new(n);
            let m0: f64 = r.weights.iter().sum();
            assert!(fabs(m0 - sqrt(PI)) < 1e-12, "n = {n}: {m0}");
            if n >= 2 {
                let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
                assert!(fabs(m2 - sqrt(PI) / 2.0) < 1e-12, "n = {n}: {m2}");
            }
            if n >= 3 {
                let m4: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x * x * x * x)
                    .sum();
                assert!(fabs(m4 - 3.0 * sqrt(PI) / 4.0) < 1e-11, "n = {n}: {m4}");
            }
        }
    }

    #[test]
    fn hermite_nodes_are_sorted_and_symmetric() {
        let r = GaussHermite::new(64);
        for i in 0..32 {
            assert_eq!(r.nodes[i], -r.nodes[63 - i]);
            assert!(r.nodes[i] > r.nodes[i + 1]);
        }
    }

    #[test]
    fn kronrod_handles_kinks_at_breakpoints() {
        let r = adaptive_gk(|x| fabs(x) * libm::exp(-x * x), &[-10.0, 0.0, 10.0], 1e-13, 0.0, 500);
        assert!(r.converged);
        assert!(fabs(r.value - 1.0) < 1e-12, "{}", r.value);
    }

    #[test]
    fn kronrod_adapts_to_a_narrow_peak() {
        let s = 1e-3;
        let r = adaptive_gk(
            |x| libm::exp(-0.5 * (x - 0.3) * (x - 0.3) / (s * s)) / (s * sqrt(2.0 * PI)),
            &[-5.0, 0.3 - 8.0 * s, 0.3 - 3.0 * s, 0.3 - s, 0.3, 0.3 + s, 0.3 + 3.0 * s, 0.3 + 8.0 * s, 5.0],
            1e-12,
            0.0,
            2000,
        );
        assert!(r.converged);
        assert!(fabs(r.value - 1.0) < 1e-11, "{}", r.value);
    }
}
