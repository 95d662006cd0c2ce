//! Paley-Wiener space `PW_pi` through its integer samples.
//!
//! The shifted sincs `sin(pi (z - n)) / (pi (z - n))` form an orthonormal
//! basis, so a function is stored as its samples `f(n)`, `|n| <= M`, and inner
//! products are finite sums. The module also provides
//! `S(z) = sin(pi z) / (z (z^2 - 1))`, the system `{S / (. - mu)}` over the
//! integers with `|mu| >= 2`, and the real-line Q-transform.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, Tolerance};
use crate::systems::{defect_of, NULL_CUTOFF};

/// Radius around `0` and `+-1` inside which `S` switches to its local expansion.
pub const SERIES_RADIUS: f64 = 1e-4;
/// Samples `|n| <= LOW_MODES` count as low modes in the completeness sweep.
pub const LOW_MODES: i64 = 5;

/// Samples `f(-M), ..., f(M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PWFunction {
    pub m: usize,
    samples: Vec<Complex64>,
    /// `sum |f(n)|^2` over `M < |n| <= 8M` when the function is known beyond
    /// the window, zero otherwise.
    pub tail_estimate: f64,
}

impl PWFunction {
    pub fn new(m: usize, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != 2 * m + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * m + 1,
                found: samples.len(),
            });
        }
        Ok(PWFunction {
            m,
            samples,
            tail_estimate: 0.0,
        })
    }

    /// Samples a function known in closed form and records its tail.
    pub fn from_fn<F: Fn(i64) -> Complex64>(m: usize, f: F) -> Self {
        let mi = m as i64;
        let samples = (-mi..=mi).map(&f).collect();
        let tail_estimate = (mi + 1..=8 * mi.max(1))
            .map(|n| f(n).norm_sqr() + f(-n).norm_sqr())
            .sum();
        PWFunction {
            m,
            samples,
            tail_estimate,
        }
    }

    /// `sinc(. - k)`, whose samples are `delta_{n,k}`.
    pub fn sinc(k: i64, m: usize) -> Self {
        PWFunction::from_fn(m, |n| Complex64::new(if n == k { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn zero(m: usize) -> Self {
        PWFunction::from_fn(m, |_| Complex64::new(0.0, 0.0))
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `f(n)`, zero outside the window.
    pub fn sample(&self, n: i64) -> Complex64 {
        let m = self.m as i64;
        if n.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[(n + m) as usize]
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Shannon series `sum f(n) sinc(t - n)`.
    pub fn eval(&self, t: f64) -> Complex64 {
        let m = self.m as i64;
        (-m..=m).map(|n| self.sample(n) * sinc(t - n as f64)).sum()
    }
}

/// `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - (PI * x).powi(2) / 6.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// `sum f(n) conj(g(n))`.
pub fn pw_inner(f: &PWFunction, g: &PWFunction) -> Result<Complex64> {
    if f.m != g.m {
        return Err(Error::DimensionMismatch {
            expected: f.m,
            found: g.m,
        });
    }
    Ok(f.samples
        .iter()
        .zip(&g.samples)
        .map(|(a, b)| a * b.conj())
        .sum())
}

/// `sin(pi u) / u` by its Taylor polynomial through `u^6`.
fn sine_quotient_series(u: Complex64) -> Complex64 {
    let u2 = u * u;
    let p2 = PI * PI;
    PI * (1.0 - u2 * p2 / 6.0 * (1.0 - u2 * p2 / 20.0 * (1.0 - u2 * p2 / 42.0)))
}

/// `S(z) = sin(pi z) / (z (z^2 - 1))`.
///
/// Within [`SERIES_RADIUS`] of `0`, `1` and `-1` the vanishing factor is
/// divided out analytically:
/// `S = -[sin(pi z)/z] / (1 - z^2)`, `S = -[sin(pi u)/u] / ((1 + u)(2 + u))` with
/// `u = z - 1`, and `S = -[sin(pi u)/u] / ((u - 1)(u - 2))` with `u = z + 1`.
pub fn s_eval(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z.norm() < SERIES_RADIUS {
        return -sine_quotient_series(z) / (one - z * z);
    }
    let u = z - 1.0;
    if u.norm() < SERIES_RADIUS {
        return -sine_quotient_series(u) / ((one + u) * (u + 2.0));
    }
    let u = z + 1.0;
    if u.norm() < SERIES_RADIUS {
        return -sine_quotient_series(u) / ((u - 1.0) * (u - 2.0));
    }
    (PI * z).sin() / (z * (z * z - 1.0))
}

/// `S(n)` at an integer: `-pi`, `-pi/2`, `-pi/2` at `0, 1, -1` and zero elsewhere.
pub fn s_at_integer(n: i64) -> f64 {
    match n {
        0 => -PI,
        1 | -1 => -PI / 2.0,
        _ => 0.0,
    }
}

/// `S'(mu) = pi (-1)^mu / (mu (mu^2 - 1))` at an integer `|mu| >= 2`.
pub fn s_derivative_at_integer(mu: i64) -> f64 {
    let sign = if mu % 2 == 0 { 1.0 } else { -1.0 };
    let m = mu as f64;
    PI * sign / (m * (m * m - 1.0))
}

/// `S / (. - mu)` for every integer `2 <= |mu| <= M`, as samples on `[-M, M]`.
///
/// At `n = mu` the sample is `S'(mu)`; at other integers with `|n| >= 2` it is
/// exactly zero.
pub fn punctured_system(m: usize) -> Result<Vec<(i64, PWFunction)>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "punctured system needs M >= 2, got {m}"
        )));
    }
    let mi = m as i64;
    Ok((-mi..=mi)
        .filter(|mu| mu.abs() >= 2)
        .map(|mu| {
            let f = PWFunction::from_fn(m, |n| {
                let v = if n == mu {
                    s_derivative_at_integer(mu)
                } else {
                    s_at_integer(n) / (n - mu) as f64
                };
                Complex64::new(v, 0.0)
            });
            (mu, f)
        })
        .collect())
}

/// One row of [`pw_completeness_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwSweepRow {
    pub m: usize,
    /// Smallest singular value of the Gram matrix of the normalized system.
    pub sigma_min: f64,
    /// Dimension of the orthogonal complement of the system in the `2M + 1` samples.
    pub null_dim: usize,
    /// Largest norm of the restriction to `|n| <= 5` of a unit vector in that complement.
    pub low_mode_norm: f64,
}

/// Completeness diagnostics of the punctured system for each `M`.
///
/// Members are normalized before the Gram matrix is formed; this does not
/// change their span.
pub fn pw_completeness_sweep(ms: &[usize]) -> Result<Vec<PwSweepRow>> {
    ms.par_iter()
        .map(|&m| {
            let family = punctured_system(m)?;
            let dim = 2 * m + 1;
            let cols: Vec<Vec<Complex64>> = family
                .iter()
                .map(|(_, f)| {
                    let norm = f.norm_sqr().sqrt();
                    f.samples().iter().map(|s| s / norm).collect()
                })
                .collect();
            let k = cols.len();
            let a = DMatrix::from_fn(dim, k, |i, j| cols[j][i]);
            let gram = a.adjoint() * &a;
            let defect = defect_of(&gram);
            let span = &a * a.adjoint();
            let eig = SymmetricEigen::new(span);
            let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let null: Vec<usize> = (0..dim)
                .filter(|&i| eig.eigenvalues[i] < NULL_CUTOFF * max)
                .collect();
            let lo = m as i64 - LOW_MODES.min(m as i64);
            let hi = m as i64 + LOW_MODES.min(m as i64);
            let rows: Vec<usize> = (lo as usize..=hi as usize).collect();
            let restricted = DMatrix::from_fn(rows.len(), null.len(), |i, j| {
                eig.eigenvectors[(rows[i], null[j])]
            });
            let low_mode_norm = if null.is_empty() {
                0.0
            } else {
                restricted
                    .singular_values()
                    .iter()
                    .cloned()
                    .fold(0.0, f64::max)
            };
            Ok(PwSweepRow {
                m,
                sigma_min: defect.sigma_min,
                null_dim: null.len(),
                low_mode_norm,
            })
        })
        .collect()
}

/// An entire function given in closed form, with its derivative and the zeros
/// relevant to a check.
#[derive(Clone)]
pub struct PwClosedForm {
    pub name: String,
    eval: Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>,
    pub zeros: Vec<f64>,
}

impl fmt::Debug for PwClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PwClosedForm")
            .field("name", &self.name)
            .field("zeros", &self.zeros)
            .finish()
    }
}

impl PwClosedForm {
    pub fn new<F>(name: impl Into<String>, eval: F, zeros: Vec<f64>) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        PwClosedForm {
            name: name.into(),
            eval: Arc::new(eval),
            zeros,
        }
    }

    /// `sin(pi z)` with zeros at the integers in `[-k, k]`.
    pub fn sine(k: i64) -> Self {
        PwClosedForm::new(
            "sin(pi z)",
            |z| (PI * z).sin(),
            (-k..=k).map(|n| n as f64).collect(),
        )
    }

    /// `S` with zeros at the integers `2 <= |n| <= k`.
    pub fn s_function(k: i64) -> Self {
        PwClosedForm::new(
            "S",
            s_eval,
            (-k..=k)
                .filter(|n| n.abs() >= 2)
                .map(|n| n as f64)
                .collect(),
        )
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.eval)(z)
    }
}

/// Settings of [`pw_q_transform`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwQuadConfig {
    /// Outermost truncation; `None` uses `max(10 max |z|, 64)`.
    pub t_max: Option<f64>,
    /// Near `t = z` (real `z`) the difference quotient is replaced by
    /// `G(z) S'(xi) - G'(xi) S(z)` at the midpoint `xi` inside this radius.
    pub hole: Option<f64>,
    pub rel_tol: f64,
}

impl Default for PwQuadConfig {
    fn default() -> Self {
        PwQuadConfig {
            t_max: None,
            hole: None,
            rel_tol: 1e-12,
        }
    }
}

/// Output of [`pw_q_transform`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwQResult {
    pub grid: Vec<Complex64>,
    pub q: Vec<Complex64>,
    /// Size of the extrapolation correction at each grid point, a proxy for the
    /// truncation error left after extrapolation is far smaller.
    pub tail_bound: Vec<f64>,
    pub t_max: f64,
    /// `(lambda, |Q(lambda)|)` for the listed zeros of `G` inside the grid's reach.
    pub residuals: Vec<(f64, f64)>,
}

fn derivative(f: &dyn Fn(Complex64) -> Complex64, x: Complex64) -> Complex64 {
    let d = 1e-5;
    (f(x + d) - f(x - d)) / (2.0 * d)
}

/// `Q(z) = int_R (G(z) S(t) - G(t) S(z)) / (t - z) conj(H(t)) dt`.
///
/// The integral is truncated to `[-T, T]` for `T = t_max / 4, t_max / 2, t_max`
/// (integers) and extrapolated. The leading tails behave like `a / T + b / T^3`
/// because `sin^2(pi t)` averages exactly over whole periods, and both terms are
/// eliminated.
pub fn pw_q_transform(
    g: &PwClosedForm,
    h: &PWFunction,
    z_grid: &[Complex64],
    cfg: PwQuadConfig,
) -> Result<PwQResult> {
    let reach = z_grid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let t_max = cfg.t_max.unwrap_or((10.0 * reach).max(64.0));
    let t_max = 4.0 * (t_max / 4.0).ceil();
    let rows = z_grid
        .par_iter()
        .map(|&z| q_point(g, h, z, t_max, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (q, tail_bound): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let residuals = g
        .zeros
        .iter()
        .filter(|l| l.abs() <= reach.max(1.0))
        .map(|&l| q_point(g, h, Complex64::new(l, 0.0), t_max, cfg).map(|(v, _)| (l, v.norm())))
        .collect::<Result<Vec<_>>>()?;
    Ok(PwQResult {
        grid: z_grid.to_vec(),
        q,
        tail_bound,
        t_max,
        residuals,
    })
}

fn q_point(
    g: &PwClosedForm,
    h: &PWFunction,
    z: Complex64,
    t_max: f64,
    cfg: PwQuadConfig,
) -> Result<(Complex64, f64)> {
    let gz = g.eval(z);
    let sz = s_eval(z);
    let real_z = z.im == 0.0;
    let hole = cfg.hole.filter(|_| real_z);
    let g_fn = |x: Complex64| g.eval(x);
    let integrand = |t: f64| -> Complex64 {
        let tc = Complex64::new(t, 0.0);
        let quotient = match hole {
            Some(eta) if (t - z.re).abs() < eta => {
                let xi = Complex64::new(0.5 * (t + z.re), 0.0);
                gz * derivative(&s_eval, xi) - derivative(&g_fn, xi) * sz
            }
            _ => (gz * s_eval(tc) - g.eval(tc) * sz) / (tc - z),
        };
        quotient * h.eval(t).conj()
    };
    let tol = Tolerance {
        abs: 1e-15,
        rel: cfg.rel_tol,
        max_segments: 20_000,
    };
    let integral_to = |limit: f64| -> Result<Complex64> {
        let n = limit as i64;
        let mut pts: Vec<f64> = (-n..=n).map(|k| k as f64).collect();
        if real_z && z.re.abs() < limit {
            pts.push(z.re);
            if let Some(eta) = hole {
                pts.push(z.re - eta);
                pts.push(z.re + eta);
            }
        }
        pts.retain(|p| p.abs() <= limit);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(integrate_adaptive(integrand, &pts, tol)?.value)
    };
    let i1 = integral_to(t_max / 4.0)?;
    let i2 = integral_to(t_max / 2.0)?;
    let i4 = integral_to(t_max)?;
    let r1 = 2.0 * i2 - i1;
    let r2 = 2.0 * i4 - i2;
    let value = (8.0 * r2 - r1) / 7.0;
    Ok((value, (value - i4).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sinc_inner_products() {
        assert_eq!(
            pw_inner(&PWFunction::sinc(5, 10), &PWFunction::sinc(5, 10)).unwrap(),
            c(1.0, 0.0)
        );
        assert_eq!(
            pw_inner(&PWFunction::sinc(0, 10), &PWFunction::sinc(1, 10)).unwrap(),
            c(0.0, 0.0)
        );
        assert!(pw_inner(&PWFunction::sinc(0, 10), &PWFunction::sinc(0, 11)).is_err());
    }

    #[test]
    fn norm_of_s() {
        let s = PWFunction::from_fn(50, |n| c(s_at_integer(n), 0.0));
        assert!((s.norm_sqr() - 1.5 * PI * PI).abs() < 1e-12);
        assert_eq!(s.tail_estimate, 0.0);
    }

    #[test]
    fn s_special_values() {
        assert!(s_eval(c(2.0, 0.0)).norm() < 1e-15);
        assert!((s_eval(c(0.0, 0.0)) + PI).norm() < 1e-15);
        assert!((s_eval(c(1.0, 0.0)) + PI / 2.0).norm() < 1e-15);
        assert!((s_eval(c(-1.0, 0.0)) + PI / 2.0).norm() < 1e-15);
        for n in -6..=6 {
            assert!((s_eval(c(n as f64, 0.0)) - s_at_integer(n)).norm() < 1e-14);
        }
    }

    #[test]
    fn s_is_continuous_across_series_switch() {
        for p in [0.0, 1.0, -1.0] {
            for dir in [c(1.0, 0.0), c(0.0, 1.0), c(-0.6, 0.8)] {
                let inside = s_eval(c(p, 0.0) + dir * (0.999 * SERIES_RADIUS));
                let outside = s_eval(c(p, 0.0) + dir * (1.001 * SERIES_RADIUS));
                assert!((inside - outside).norm() < 1e-6 * inside.norm());
            }
        }
    }

    #[test]
    fn s_is_even() {
        for x in [0.3, 1.7, 2.5, 7.2] {
            assert!((s_eval(c(x, 0.0)) - s_eval(c(-x, 0.0))).norm() < 1e-15);
        }
    }

    #[test]
    fn s_cubic_decay() {
        // |S(x)| |x|^3 = |sin(pi x)| x^2 / (x^2 - 1) <= 4/3 for |x| >= 2
        let c_emp = (0..20_000)
            .map(|k| 2.0 + k as f64 * 0.005)
            .map(|x| s_eval(c(x, 0.0)).norm() * x.powi(3))
            .fold(0.0, f64::max);
        assert!(c_emp <= 4.0 / 3.0);
    }

    #[test]
    fn punctured_samples() {
        let fam = punctured_system(10).unwrap();
        let f2 = &fam.iter().find(|(mu, _)| *mu == 2).unwrap().1;
        assert!((f2.sample(2).re - PI / 6.0).abs() < 1e-15);
        assert_eq!(f2.sample(5), c(0.0, 0.0));
        assert!((f2.sample(0).re - PI / 2.0).abs() < 1e-15);
        for (mu, f) in &fam {
            for n in -10..=10i64 {
                if n.abs() >= 2 && n != *mu {
                    assert_eq!(f.sample(n), c(0.0, 0.0));
                }
            }
            // the derivative formula matches a central difference of S
            let fd = (s_eval(c(*mu as f64 + 1e-5, 0.0)) - s_eval(c(*mu as f64 - 1e-5, 0.0))) / 2e-5;
            assert!((fd.re - f.sample(*mu).re).abs() < 1e-8 * fd.norm());
        }
        assert!(punctured_system(1).is_err());
    }

    #[test]
    fn completeness_sweep() {
        let rows = pw_completeness_sweep(&[2, 10, 20, 40]).unwrap();
        assert_eq!(rows[0].null_dim, 3);
        assert!(rows.iter().all(|r| r.null_dim == 3));
        assert!(
            rows[1].low_mode_norm > rows[2].low_mode_norm
                && rows[2].low_mode_norm > rows[3].low_mode_norm
        );
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let fam = punctured_system(6).unwrap();
        let k = fam.len();
        let g = DMatrix::from_fn(k, k, |i, j| pw_inner(&fam[j].1, &fam[i].1).unwrap());
        assert!((g.clone() - g.adjoint()).norm() == 0.0);
        let eig = SymmetricEigen::new(g);
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn shannon_series_reproduces_sinc_combinations() {
        let coeffs = [(-2i64, c(0.5, 0.1)), (0, c(1.0, 0.0)), (3, c(-0.2, 0.7))];
        let closed = |t: f64| {
            coeffs
                .iter()
                .map(|(k, a)| a * sinc(t - *k as f64))
                .sum::<Complex64>()
        };
        let f = PWFunction::from_fn(8, |n| closed(n as f64));
        let g = PWFunction::from_fn(8, |n| closed(n as f64) * c(0.0, 2.0));
        let exact: Complex64 = coeffs
            .iter()
            .map(|(_, a)| a * (a * c(0.0, 2.0)).conj())
            .sum();
        assert!((pw_inner(&f, &g).unwrap() - exact).norm() < 1e-15);
        for t in [0.25, 1.5, -2.7] {
            assert!((f.eval(t) - closed(t)).norm() < 1e-15);
        }
    }

    #[test]
    fn q_transform_of_zero_is_zero() {
        let r = pw_q_transform(
            &PwClosedForm::sine(3),
            &PWFunction::zero(5),
            &[c(0.5, 0.0), c(1.0, 1.0)],
            PwQuadConfig::default(),
        )
        .unwrap();
        assert!(r.q.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sine_and_sinc_zero() {
        // Q(lambda) = -S(lambda) int sin(pi t) sinc(t) / (t - lambda) dt
        //           = -pi (-1)^lambda S(lambda) H(lambda),
        // so Q(0) = pi^2 and Q vanishes at every other integer
        let g = PwClosedForm::sine(5);
        let h = PWFunction::sinc(0, 12);
        let r =
            pw_q_transform(&g, &h, &[c(0.0, 0.0), c(5.0, 0.0)], PwQuadConfig::default()).unwrap();
        assert!((r.q[0] - PI * PI).norm() < 1e-7, "{}", r.q[0]);
        for &(l, res) in &r.residuals {
            if l != 0.0 {
                assert!(res < 1e-7, "Q({l}) = {res}");
            }
        }
    }

    #[test]
    fn hole_does_not_change_the_answer() {
        let g = PwClosedForm::s_function(4);
        let h = PWFunction::from_fn(6, |n| c(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
        let z = [c(0.4, 0.0), c(3.0, 0.0)];
        let plain = pw_q_transform(&g, &h, &z, PwQuadConfig::default()).unwrap();
        let holed = pw_q_transform(
            &g,
            &h,
            &z,
            PwQuadConfig {
                hole: Some(1e-3),
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in plain.q.iter().zip(&holed.q) {
            assert!((a - b).norm() < 1e-6 * a.norm().max(1.0));
        }
    }
}
