//! Dimension-`N` polynomial model of a radial weighted Fock space.
//!
//! Monomials are mutually orthogonal for any radial weight, so the whole
//! geometry of the truncated space is carried by the moments
//! `m_n = 2 pi int_0^inf r^(2n+1) exp(-h(r)) dr`. Inner products, kernels and
//! norms reduce to finite sums against them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;
use crate::quadrature::CompositeRule;
use crate::weights::RadialWeight;

/// Gauss-Legendre points per radial panel.
const PANEL_ORDER: usize = 20;
/// Refinement stops once two successive panel doublings agree to this level.
const MOMENT_AGREEMENT: f64 = 1e-12;
/// Certified relative accuracy of each moment.
pub const MOMENT_TOLERANCE: f64 = 1e-10;
/// The top integrand `r^(2N-1) exp(-h)` must fall below this fraction of its peak.
const TAIL_FRACTION: f64 = 1e-18;
const MAX_CUTOFF: f64 = 1e5;
const MAX_PANELS: usize = 8192;

/// A polynomial of degree `< dim` in the monomial basis, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct CoeffFunction {
    coeffs: Vec<Complex64>,
}

impl From<Vec<[f64; 2]>> for CoeffFunction {
    fn from(v: Vec<[f64; 2]>) -> Self {
        CoeffFunction {
            coeffs: v
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        }
    }
}

impl From<CoeffFunction> for Vec<[f64; 2]> {
    fn from(f: CoeffFunction) -> Self {
        f.coeffs.iter().map(|c| [c.re, c.im]).collect()
    }
}

impl CoeffFunction {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        CoeffFunction { coeffs }
    }

    pub fn zeros(dim: usize) -> Self {
        CoeffFunction {
            coeffs: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// `z^n` inside a space of dimension `dim`.
    pub fn monomial(n: usize, dim: usize) -> Self {
        assert!(
            n < dim,
            "monomial degree {n} does not fit in dimension {dim}"
        );
        let mut f = Self::zeros(dim);
        f.coeffs[n] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        poly::horner(&self.coeffs, z)
    }

    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        poly::horner_with_derivative(&self.coeffs, z).1
    }

    /// Zero-padded copy living in a space of dimension `dim >= self.dim()`.
    pub fn padded(&self, dim: usize) -> Self {
        assert!(dim >= self.dim());
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(dim, Complex64::new(0.0, 0.0));
        CoeffFunction { coeffs }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        CoeffFunction {
            coeffs: poly::scale(&self.coeffs, s),
        }
    }

    pub fn add(&self, other: &CoeffFunction) -> Self {
        CoeffFunction {
            coeffs: poly::add(&self.coeffs, &other.coeffs),
        }
    }
}

/// Truncated model of `F_h`: moments, cutoff radius and the certified radial rule.
#[derive(Debug, Clone)]
pub struct TruncatedFockSpace {
    weight: RadialWeight,
    moments: Vec<f64>,
    cutoff_radius: f64,
    quad_rule: CompositeRule,
    panels: usize,
    certified_error: f64,
}

/// JSON descriptor of a truncated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub weight: String,
    pub dim: usize,
    pub moments: Vec<f64>,
}

/// Builds the dimension-`n` model of `F_h`.
///
/// Moments are integrated with composite Gauss-Legendre panels on `[0, R]`,
/// doubling the panel count until two levels agree to `1e-12` relative.
pub fn compute_moments(w: &RadialWeight, n: usize) -> Result<TruncatedFockSpace> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "space dimension must be at least 1".into(),
        ));
    }
    let power = (2 * n - 1) as f64;
    let cutoff_radius = find_cutoff(w, power)?;

    let mut panels = 8;
    let mut rule = CompositeRule::gauss_legendre(0.0, cutoff_radius, panels, PANEL_ORDER);
    let mut moments = moments_with(&rule, w, n);
    loop {
        let finer_rule = CompositeRule::gauss_legendre(0.0, cutoff_radius, 2 * panels, PANEL_ORDER);
        let finer = moments_with(&finer_rule, w, n);
        let diff = finer
            .iter()
            .zip(&moments)
            .map(|(a, b)| ((a - b) / a).abs())
            .fold(0.0, f64::max);
        panels *= 2;
        rule = finer_rule;
        moments = finer;
        if diff < MOMENT_AGREEMENT {
            if let Some(k) = moments.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
                return Err(Error::QuadratureNotConverged {
                    context: format!(
                        "moment m_{k} = {} is not a positive finite number",
                        moments[k]
                    ),
                    estimate: f64::INFINITY,
                });
            }
            return Ok(TruncatedFockSpace {
                weight: w.clone(),
                moments,
                cutoff_radius,
                quad_rule: rule,
                panels,
                certified_error: diff,
            });
        }
        if panels >= MAX_PANELS {
            return Err(Error::QuadratureNotConverged {
                context: format!("moments still moving after {panels} radial panels"),
                estimate: diff,
            });
        }
    }
}

fn moments_with(rule: &CompositeRule, w: &RadialWeight, n: usize) -> Vec<f64> {
    // Neumaier-compensated sums: the kernel coefficients conj(lambda)^n / m_n
    // amplify moment errors by up to exp(|w| - Re w) with w = pi z conj(lambda)
    let mut m = vec![0.0; n];
    let mut carry = vec![0.0; n];
    for (&r, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let mut term = 2.0 * PI * wt * r * (-w.h(r)).exp();
        let r2 = r * r;
        for (mk, ck) in m.iter_mut().zip(carry.iter_mut()) {
            let t = *mk + term;
            *ck += if mk.abs() >= term.abs() {
                (*mk - t) + term
            } else {
                (term - t) + *mk
            };
            *mk = t;
            term *= r2;
        }
    }
    m.iter().zip(&carry).map(|(a, b)| a + b).collect()
}

/// Smallest radius past the peak of `r^power exp(-h(r))` where it has decayed
/// below `TAIL_FRACTION` of the peak.
fn find_cutoff(w: &RadialWeight, power: f64) -> Result<f64> {
    let log_integrand = |r: f64| power * r.ln() - w.h(r);
    let ratio = 1.02f64;
    let mut r = 1e-3;
    let mut best = f64::NEG_INFINITY;
    let mut best_r = r;
    let threshold = TAIL_FRACTION.ln();
    while r <= MAX_CUTOFF {
        let v = log_integrand(r);
        if v > best {
            best = v;
            best_r = r;
        } else if r > best_r && v < best + threshold {
            // guard against a later rebound of the integrand
            let probe = log_integrand(2.0 * r);
            if probe < best + threshold {
                return Ok(r);
            }
        }
        r *= ratio;
    }
    Err(Error::CutoffTooSmall {
        max_radius: MAX_CUTOFF,
    })
}

impl TruncatedFockSpace {
    pub fn weight(&self) -> &RadialWeight {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius
    }

    pub fn quad_rule(&self) -> &CompositeRule {
        &self.quad_rule
    }

    /// Largest relative change of any moment at the final refinement step.
    pub fn certified_error(&self) -> f64 {
        self.certified_error
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        SpaceDescriptor {
            weight: self.weight.name().to_string(),
            dim: self.dim(),
            moments: self.moments.clone(),
        }
    }

    /// Same weight, rebuilt with dimension `dim`.
    pub fn with_dim(&self, dim: usize) -> Result<TruncatedFockSpace> {
        compute_moments(&self.weight, dim)
    }

    fn check_member(&self, f: &CoeffFunction) -> Result<()> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: f.dim(),
            });
        }
        Ok(())
    }

    /// `<f, g> = sum_n a_n conj(b_n) m_n`.
    pub fn inner_product(&self, f: &CoeffFunction, g: &CoeffFunction) -> Result<Complex64> {
        self.check_member(f)?;
        self.check_member(g)?;
        Ok(f.coeffs
            .iter()
            .zip(&g.coeffs)
            .zip(&self.moments)
            .map(|((a, b), m)| a * b.conj() * *m)
            .sum())
    }

    /// Pairing `sum_k p_k conj(q_k) m_k` of two coefficient slices of any length;
    /// indices beyond the space dimension must carry zero coefficients in one of them.
    pub(crate) fn pair_slices(&self, p: &[Complex64], q: &[Complex64]) -> Complex64 {
        p.iter()
            .zip(q)
            .zip(&self.moments)
            .map(|((a, b), m)| a * b.conj() * *m)
            .sum()
    }

    /// `sum_k |p_k| |q_k| m_k`, the floating-point scale of [`Self::pair_slices`].
    pub(crate) fn pair_scale(&self, p: &[Complex64], q: &[Complex64]) -> f64 {
        p.iter()
            .zip(q)
            .zip(&self.moments)
            .map(|((a, b), m)| a.norm() * b.norm() * m)
            .sum()
    }

    /// `int |p|(r) |q|(r) exp(-h)` where `|p|(r) = sum_k |p_k| r^k`: bounds the
    /// pointwise rounding of `p conj(q)` integrated by [`Self::planar_integral`].
    pub(crate) fn absolute_pair_scale(&self, p: &[Complex64], q: &[Complex64]) -> f64 {
        let majorant =
            |c: &[Complex64], r: f64| c.iter().rev().fold(0.0, |acc, x| acc * r + x.norm());
        self.quad_rule
            .nodes
            .iter()
            .zip(&self.quad_rule.weights)
            .map(|(&r, &w)| {
                2.0 * PI * w * r * (-self.weight.h(r)).exp() * majorant(p, r) * majorant(q, r)
            })
            .sum()
    }

    pub fn norm(&self, f: &CoeffFunction) -> Result<f64> {
        Ok(self.inner_product(f, f)?.re.max(0.0).sqrt())
    }

    /// `z^n / sqrt(m_n)`.
    pub fn normalized_monomial(&self, n: usize) -> CoeffFunction {
        CoeffFunction::monomial(n, self.dim())
            .scaled(Complex64::new(1.0 / self.moments[n].sqrt(), 0.0))
    }

    /// Reproducing kernel at `lambda`: coefficients `conj(lambda)^n / m_n`.
    pub fn kernel(&self, lambda: Complex64) -> CoeffFunction {
        let lc = lambda.conj();
        let mut power = Complex64::new(1.0, 0.0);
        let coeffs = self
            .moments
            .iter()
            .map(|m| {
                let c = power / *m;
                power *= lc;
                c
            })
            .collect();
        CoeffFunction::new(coeffs)
    }

    /// `int F(zeta) exp(-h(zeta)) dm_2(zeta)` over the cutoff disc, with the
    /// certified radial rule and an `angular`-point trapezoid rule in angle.
    ///
    /// The angular rule is exact for trigonometric polynomials of degree `< angular`.
    pub fn planar_integral<F: Fn(Complex64) -> Complex64>(
        &self,
        f: F,
        angular: usize,
    ) -> Complex64 {
        let dtheta = 2.0 * PI / angular as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for (&r, &wt) in self.quad_rule.nodes.iter().zip(&self.quad_rule.weights) {
            let radial = wt * r * (-self.weight.h(r)).exp();
            let ring: Complex64 = (0..angular)
                .map(|k| f(Complex64::from_polar(r, dtheta * k as f64)))
                .sum();
            total += ring * (radial * dtheta);
        }
        total
    }

    /// Norm computed by direct planar quadrature of `|f|^2 exp(-h)`.
    pub fn quadrature_norm(&self, f: &CoeffFunction) -> f64 {
        let angular = 2 * f.dim() + 2;
        self.planar_integral(|z| Complex64::new(f.eval(z).norm_sqr(), 0.0), angular)
            .re
            .max(0.0)
            .sqrt()
    }

    /// Incomplete moments `2 pi int r^(2k+1) exp(-h) dr` over `[0, s]` and
    /// `[s, R]`, for `k < count`, using panels no wider than the certified rule's.
    pub fn partial_moments(&self, s: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
        let width = self.cutoff_radius / self.panels as f64;
        let s = s.max(0.0);
        let lower_end = s.min(self.cutoff_radius);
        let lower_rule = CompositeRule::gauss_legendre(
            0.0,
            lower_end,
            ((lower_end / width).ceil() as usize).max(1),
            PANEL_ORDER,
        );
        let lower = moments_with(&lower_rule, &self.weight, count);
        let upper = if s >= self.cutoff_radius {
            vec![0.0; count]
        } else {
            let upper_rule = CompositeRule::gauss_legendre(
                s,
                self.cutoff_radius,
                (((self.cutoff_radius - s) / width).ceil() as usize).max(1),
                PANEL_ORDER,
            );
            moments_with(&upper_rule, &self.weight, count)
        };
        (lower, upper)
    }
}

/// Result of the pointwise growth bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    /// `max (|f| + |f'|) exp(-(1/2 + eps) h) / ||f||` over the grid; the empirical constant.
    pub max_ratio: f64,
    pub argmax: Complex64,
    pub grid_max_radius: f64,
    pub pass: bool,
}

/// Empirical constant in `|f(z)| + |f'(z)| <= C exp((1/2 + eps) h(z)) ||f||`.
///
/// Passes when the constant is finite and attained strictly inside the grid.
pub fn growth_bound_check(
    sp: &TruncatedFockSpace,
    f: &CoeffFunction,
    eps: f64,
    grid: &[Complex64],
) -> Result<GrowthReport> {
    let norm = sp.norm(f)?;
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax = grid[0];
    for &z in grid {
        let (v, d) = poly::horner_with_derivative(f.coeffs(), z);
        let ratio = (v.norm() + d.norm()) * (-(0.5 + eps) * sp.weight().at(z)).exp() / norm;
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = z;
        }
    }
    let grid_max_radius = grid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pass = max_ratio.is_finite() && argmax.norm() < grid_max_radius * (1.0 - 1e-9);
    Ok(GrowthReport {
        max_ratio,
        argmax,
        grid_max_radius,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::polar_grid;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn classical_moment_examples() {
        let sp = compute_moments(&RadialWeight::classical(), 6).unwrap();
        assert!((sp.moments()[0] - 1.0).abs() < 1e-12);
        assert!((sp.moments()[5] - 120.0 / PI.powi(5)).abs() < 1e-12);
        assert!((sp.moments()[5] - 0.39213).abs() < 1e-5);
        assert!(sp.certified_error() < MOMENT_TOLERANCE);
    }

    #[test]
    fn linear_weight_first_moment() {
        let sp = compute_moments(&RadialWeight::power(2.0, 1.0), 3).unwrap();
        assert!((sp.moments()[0] - PI / 2.0).abs() < 1e-12);
        // m_2 = pi * 5! / 2^5
        assert!((sp.moments()[2] - PI * factorial(5) / 32.0).abs() < 1e-10 * sp.moments()[2]);
    }

    #[test]
    fn constant_weight_has_no_cutoff() {
        let err = compute_moments(&RadialWeight::constant(1.0), 2).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall { .. }));
    }

    #[test]
    fn cutoff_meets_tail_criterion() {
        for w in crate::weights::builtin_weights() {
            let sp = compute_moments(&w, 10).unwrap();
            let r = sp.cutoff_radius();
            let log_at = |t: f64| 19.0 * t.ln() - w.h(t);
            let peak = (1..2000)
                .map(|k| log_at(k as f64 * r / 2000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(log_at(r) < peak + TAIL_FRACTION.ln() + 1e-9, "{}", w.name());
        }
    }

    #[test]
    fn inner_product_examples() {
        let sp = compute_moments(&RadialWeight::classical(), 4).unwrap();
        let z0 = CoeffFunction::monomial(0, 4);
        let z1 = CoeffFunction::monomial(1, 4);
        let z3 = CoeffFunction::monomial(3, 4);
        assert_eq!(sp.inner_product(&z3, &z3).unwrap(), c(sp.moments()[3], 0.0));
        assert_eq!(sp.inner_product(&z0, &z1).unwrap(), c(0.0, 0.0));
        let e2 = sp.normalized_monomial(2);
        assert!((sp.inner_product(&e2, &e2).unwrap() - 1.0).norm() < 1e-15);
        let wrong = CoeffFunction::monomial(0, 3);
        assert!(matches!(
            sp.inner_product(&z0, &wrong),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kernel_examples() {
        let sp = compute_moments(&RadialWeight::classical(), 60).unwrap();
        let k0 = sp.kernel(c(0.0, 0.0));
        assert!((k0.coeffs()[0] - 1.0 / sp.moments()[0]).norm() < 1e-15);
        assert!(k0.coeffs()[1..].iter().all(|x| x.norm() == 0.0));
        let k1 = sp.kernel(c(1.0, 0.0));
        assert!((k1.eval(c(1.0, 0.0)).re - PI.exp()).abs() < 1e-8 * PI.exp());
        assert!((k1.eval(c(0.0, 0.0)) - 1.0).norm() < 1e-12);

        let small = compute_moments(&RadialWeight::classical(), 4).unwrap();
        let f = CoeffFunction::new(vec![c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let lambda = c(0.7, -0.3);
        let got = small.inner_product(&f, &small.kernel(lambda)).unwrap();
        assert!((got - f.eval(lambda)).norm() < 1e-12);
    }

    #[test]
    fn evaluation_examples() {
        let f = CoeffFunction::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(f.eval(c(2.0, 0.0)), c(5.0, 0.0));
        assert_eq!(f.eval_derivative(c(2.0, 0.0)), c(4.0, 0.0));
    }

    #[test]
    fn quadrature_norm_agrees_with_moments() {
        for w in crate::weights::builtin_weights() {
            let sp = compute_moments(&w, 12).unwrap();
            for n in 0..12 {
                let f = CoeffFunction::monomial(n, 12);
                let a = sp.norm(&f).unwrap();
                let b = sp.quadrature_norm(&f);
                assert!(((a - b) / a).abs() < 1e-8, "{} n={n}", w.name());
            }
        }
    }

    #[test]
    fn partial_moments_sum_to_full() {
        let sp = compute_moments(&RadialWeight::log_damped(), 8).unwrap();
        let (lo, hi) = sp.partial_moments(1.7, 8);
        for k in 0..8 {
            assert!(((lo[k] + hi[k]) / sp.moments()[k] - 1.0).abs() < 1e-12);
        }
        let (lo, hi) = sp.partial_moments(2.0 * sp.cutoff_radius(), 8);
        assert!(hi.iter().all(|&x| x == 0.0));
        assert!((lo[3] / sp.moments()[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growth_bound_constant_function() {
        let sp = compute_moments(&RadialWeight::classical(), 3).unwrap();
        let one = CoeffFunction::monomial(0, 3);
        let grid: Vec<Complex64> = std::iter::once(c(0.0, 0.0))
            .chain(polar_grid(3.0, 30, 8))
            .collect();
        let rep = growth_bound_check(&sp, &one, 0.1, &grid).unwrap();
        assert!((rep.max_ratio - 1.0).abs() < 1e-12);
        assert_eq!(rep.argmax, c(0.0, 0.0));
        assert!(rep.pass);
        let zero = CoeffFunction::zeros(3);
        assert!(matches!(
            growth_bound_check(&sp, &zero, 0.1, &grid),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn growth_bound_ignores_padding() {
        let sp = compute_moments(&RadialWeight::classical(), 5).unwrap();
        let big = compute_moments(&RadialWeight::classical(), 9).unwrap();
        let f = CoeffFunction::new(vec![
            c(1.0, 0.5),
            c(0.0, -1.0),
            c(0.3, 0.0),
            c(0.0, 0.0),
            c(0.1, 0.1),
        ]);
        let grid = polar_grid(4.0, 40, 12);
        let a = growth_bound_check(&sp, &f, 0.1, &grid).unwrap();
        let b = growth_bound_check(&big, &f.padded(9), 0.1, &grid).unwrap();
        assert!(((a.max_ratio - b.max_ratio) / a.max_ratio).abs() < 1e-12);
        assert_eq!(a.argmax, b.argmax);
        assert_eq!(a.pass, b.pass);
    }

    #[test]
    fn coefficient_json_shape() {
        let f = CoeffFunction::new(vec![c(1.0, -2.0), c(0.5, 0.0)]);
        let s = serde_json_like(&f);
        assert_eq!(s, vec![[1.0, -2.0], [0.5, 0.0]]);
    }

    fn serde_json_like(f: &CoeffFunction) -> Vec<[f64; 2]> {
        f.clone().into()
    }
}
