//! One-dimensional quadrature building blocks.
//!
//! Two families are provided: fixed composite Gauss-Legendre rules (used to
//! build reusable radial node tables) and a globally adaptive Gauss-Kronrod
//! (7, 15) integrator for complex-valued integrands with known breakpoints.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// A fixed node/weight table on an interval, assembled from equal panels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// `panels` equal panels on `[a, b]`, each carrying an `order`-point Gauss-Legendre rule.
    pub fn gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * width;
            let half = 0.5 * width;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + half * (xi + 1.0));
                weights.push(half * wi);
            }
        }
        CompositeRule { nodes, weights }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
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

/// Stopping rule for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-11,
            max_segments: 4000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs_value: f64,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_value = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += (f1 + f2) * WGK[j];
        abs_value += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Segment {
        a,
        b,
        value,
        error,
        abs_value: abs_value * half.abs(),
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[points[0], points.last()]`,
/// with the interior entries of `points` used as initial breakpoints.
///
/// Convergence is declared when the summed error estimate falls below
/// `max(abs, rel * |I|)` or below the round-off floor `50 eps * int |f|`.
pub fn integrate_adaptive<F: Fn(f64) -> Complex64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let (estimate, failure) = adaptive_core(&f, points, tol);
    match failure {
        None => Ok(estimate),
        Some(context) => Err(Error::QuadratureNotConverged {
            context,
            estimate: estimate.error,
        }),
    }
}

/// Like [`integrate_adaptive`] but always returns the best estimate, flagged
/// with whether the tolerance was met. Used for inner integrals of nested rules.
pub fn integrate_adaptive_lenient<F: Fn(f64) -> Complex64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
) -> (Estimate, bool) {
    let (estimate, failure) = adaptive_core(&f, points, tol);
    (estimate, failure.is_none())
}

fn adaptive_core<F: Fn(f64) -> Complex64>(
    f: &F,
    points: &[f64],
    tol: Tolerance,
) -> (Estimate, Option<String>) {
    let mut segments: Vec<Segment> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(f, w[0], w[1]))
        .collect();
    let mut evaluations = 15 * segments.len();
    loop {
        let value: Complex64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let abs_value: f64 = segments.iter().map(|s| s.abs_value).sum();
        let estimate = Estimate {
            value,
            error,
            evaluations,
        };
        let target = tol
            .abs
            .max(tol.rel * value.norm())
            .max(50.0 * f64::EPSILON * abs_value);
        if error <= target {
            return (estimate, None);
        }
        if !error.is_finite() {
            return (estimate, Some("non-finite integrand".into()));
        }
        if segments.len() >= tol.max_segments {
            return (
                estimate,
                Some(format!("{} segments exhausted", tol.max_segments)),
            );
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("nonempty");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            segments.push(s);
            return (
                estimate,
                Some("segment width reached machine resolution".into()),
            );
        }
        segments.push(gk15(f, s.a, mid));
        segments.push(gk15(f, mid, s.b));
        evaluations += 30;
    }
}

/// Real-valued convenience wrapper around [`integrate_adaptive`].
pub fn integrate_adaptive_real<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    integrate_adaptive(|x| Complex64::new(f(x), 0.0), points, tol).map(|e| e.value.re)
}
