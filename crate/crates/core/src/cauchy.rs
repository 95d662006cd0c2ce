//! Planar Cauchy transform `C[phi](z) = int phi(zeta) / (z - zeta) dm_2(zeta)`.
//!
//! Two independent routes are provided. [`planar_cauchy`] integrates in polar
//! coordinates centred at `z`, where the Jacobian cancels the singularity, and
//! subtracts `phi(z)` inside a small hole (the subtracted term integrates to
//! zero over the hole). [`cauchy_exact`] handles densities of the form
//! `p(zeta) conj(q(zeta)) exp(-h(|zeta|))` by expanding into angular modes,
//! which reduces everything to incomplete radial moments.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::TruncatedFockSpace;
use crate::grid::polar_grid;
use crate::poly;
use crate::quadrature::{integrate_adaptive, integrate_adaptive_lenient, Tolerance};
use crate::weights::RadialWeight;

/// Relative growth of the bound constant over the outer quarter of a sweep
/// that still counts as stable.
pub const STABILITY_GROWTH: f64 = 0.05;
/// Smallest hole radius used by the growth-bound verifier.
pub const MIN_HOLE_RADIUS: f64 = 1e-300;
/// Fraction of the peak below which a density is treated as zero.
const NEGLIGIBLE: f64 = 1e-16;

type Eval = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// `p(zeta) conj(q(zeta)) exp(-h(|zeta|))` with coefficients in a truncated space.
#[derive(Debug, Clone)]
pub struct WeightedPair {
    pub space: TruncatedFockSpace,
    pub p: Vec<Complex64>,
    pub q: Vec<Complex64>,
}

/// A complex density on the plane together with the geometric data the
/// quadrature needs.
#[derive(Clone)]
pub struct DensityFunction {
    eval: Eval,
    /// `|phi|` is treated as zero beyond this radius.
    pub support_radius: f64,
    /// Bound on the gradient norm over the support (infinite for discontinuous densities).
    pub smoothness_scale: f64,
    /// Circles `|zeta| = c` across which `phi` is not smooth.
    pub radial_breaks: Vec<f64>,
    /// Declared `C` in `|phi| + |grad phi| <= C (1 + |zeta|)^-3`, if any.
    pub decay_constant: Option<f64>,
    /// Rough size of `sup |phi|`, used to scale absolute tolerances.
    pub magnitude: f64,
    pair: Option<Arc<WeightedPair>>,
}

impl fmt::Debug for DensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityFunction")
            .field("support_radius", &self.support_radius)
            .field("smoothness_scale", &self.smoothness_scale)
            .field("radial_breaks", &self.radial_breaks)
            .field("decay_constant", &self.decay_constant)
            .field("magnitude", &self.magnitude)
            .finish()
    }
}

impl DensityFunction {
    pub fn new<F>(eval: F, support_radius: f64, smoothness_scale: f64) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        let eval: Eval = Arc::new(eval);
        let magnitude = polar_grid(support_radius, 48, 48)
            .into_iter()
            .chain(std::iter::once(Complex64::new(0.0, 0.0)))
            .map(|z| eval(z).norm())
            .fold(0.0, f64::max);
        DensityFunction {
            eval,
            support_radius,
            smoothness_scale,
            radial_breaks: Vec::new(),
            decay_constant: None,
            magnitude,
            pair: None,
        }
    }

    pub fn zero() -> Self {
        DensityFunction::new(|_| Complex64::new(0.0, 0.0), 1.0, 0.0)
    }

    /// Indicator of the closed disc of the given radius about the origin.
    pub fn disc_indicator(radius: f64) -> Self {
        let eval =
            move |z: Complex64| Complex64::new(if z.norm() <= radius { 1.0 } else { 0.0 }, 0.0);
        DensityFunction::new(eval, radius, f64::INFINITY).with_breaks(vec![radius])
    }

    /// `p conj(q) exp(-h)` for coefficient vectors of a truncated space.
    ///
    /// The support radius, the gradient bound and the decay constant are
    /// read off a radial majorant built from `|p_j|`, `|q_k|` and `|h'|`.
    pub fn weighted_pair(
        sp: &TruncatedFockSpace,
        p: &[Complex64],
        q: &[Complex64],
    ) -> Result<Self> {
        if q.len() > sp.dim() {
            return Err(Error::DimensionMismatch {
                expected: sp.dim(),
                found: q.len(),
            });
        }
        let w = sp.weight().clone();
        let envelope = pair_envelope(&w, p, q)?;
        let pair = Arc::new(WeightedPair {
            space: sp.clone(),
            p: p.to_vec(),
            q: q.to_vec(),
        });
        let inner = pair.clone();
        let eval = move |z: Complex64| {
            poly::horner(&inner.p, z) * poly::horner(&inner.q, z).conj() * (-w.h(z.norm())).exp()
        };
        let mut phi = DensityFunction::new(eval, envelope.support_radius, envelope.gradient_bound);
        phi.decay_constant = Some(envelope.decay_constant);
        phi.magnitude = phi.magnitude.max(envelope.value_bound);
        phi.pair = Some(pair);
        Ok(phi)
    }

    pub fn with_breaks(mut self, mut breaks: Vec<f64>) -> Self {
        breaks.retain(|&c| c > 0.0 && c <= self.support_radius);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        self.radial_breaks = breaks;
        self
    }

    pub fn with_decay_constant(mut self, c: f64) -> Self {
        self.decay_constant = Some(c);
        self
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.eval)(z)
    }

    /// Polynomial data when the density came from [`Self::weighted_pair`].
    pub fn pair(&self) -> Option<&WeightedPair> {
        self.pair.as_deref()
    }

    /// `1e-3` times the local feature scale.
    pub fn default_hole_radius(&self) -> f64 {
        1e-3 * self.support_radius.min(1.0)
    }

    /// Central-difference estimate of `sqrt(|d_x phi|^2 + |d_y phi|^2)`.
    pub fn gradient_norm(&self, z: Complex64) -> f64 {
        let d = 1e-6 * z.norm().max(1.0);
        let dx = (self.eval(z + d) - self.eval(z - d)) / (2.0 * d);
        let i = Complex64::new(0.0, d);
        let dy = (self.eval(z + i) - self.eval(z - i)) / (2.0 * d);
        (dx.norm_sqr() + dy.norm_sqr()).sqrt()
    }
}

struct Envelope {
    support_radius: f64,
    value_bound: f64,
    gradient_bound: f64,
    decay_constant: f64,
}

fn abs_sums(c: &[Complex64], r: f64) -> (f64, f64) {
    // sum |c_j| r^j and sum j |c_j| r^(j-1)
    let mut value = 0.0;
    let mut slope = 0.0;
    for cj in c.iter().rev() {
        slope = slope * r + value;
        value = value * r + cj.norm();
    }
    (value, slope)
}

fn pair_envelope(w: &RadialWeight, p: &[Complex64], q: &[Complex64]) -> Result<Envelope> {
    let mut value_bound: f64 = 0.0;
    let mut gradient_bound: f64 = 0.0;
    let mut decay_constant: f64 = 0.0;
    let mut peak_radius = 0.0;
    let mut r: f64 = 0.0;
    loop {
        let (pv, ps) = abs_sums(p, r);
        let (qv, qs) = abs_sums(q, r);
        let e = (-w.h(r)).exp();
        let value = pv * qv * e;
        // |d_x f| + |d_y f| <= 2 (|p'||q| + |p||q'| + |h'||p||q|) exp(-h)
        let grad = 2.0 * (ps * qv + pv * qs + w.h_prime(r).abs() * pv * qv) * e;
        if value > value_bound {
            value_bound = value;
            peak_radius = r;
        }
        gradient_bound = gradient_bound.max(grad);
        decay_constant = decay_constant.max((value + grad) * (1.0 + r).powi(3));
        if r > peak_radius
            && value <= NEGLIGIBLE * value_bound
            && grad <= NEGLIGIBLE * gradient_bound
        {
            break;
        }
        if value_bound == 0.0 && r > 1.0 {
            break;
        }
        if r > 1e6 {
            return Err(Error::CutoffTooSmall { max_radius: r });
        }
        r = if r < 1.0 { r + 0.005 } else { r * 1.005 };
    }
    const SLACK: f64 = 1.05;
    Ok(Envelope {
        support_radius: r.max(1e-3),
        value_bound,
        gradient_bound: SLACK * gradient_bound,
        decay_constant: SLACK * decay_constant,
    })
}

/// Exact Cauchy transform of `p conj(q) exp(-h)` at `z`.
///
/// With `zeta = r e^{it}` the mode `zeta^j conj(zeta)^k` contributes
/// `2 pi z^(j-k-1) int_0^|z| r^(2k+1) e^-h dr` when `j <= k` and
/// `-2 pi z^(j-k-1) int_|z|^R r^(2k+1) e^-h dr` when `j > k`.
pub fn cauchy_exact(
    sp: &TruncatedFockSpace,
    p: &[Complex64],
    q: &[Complex64],
    z: Complex64,
) -> Result<Complex64> {
    if q.len() > sp.dim() {
        return Err(Error::DimensionMismatch {
            expected: sp.dim(),
            found: q.len(),
        });
    }
    let (lower, upper) = sp.partial_moments(z.norm(), q.len());
    Ok(cauchy_from_moments(p, q, z, &lower, &upper))
}

/// Same as [`cauchy_exact`] for many points on one circle `|z| = s`, sharing
/// the incomplete moments.
pub fn cauchy_exact_on_circle(
    sp: &TruncatedFockSpace,
    p: &[Complex64],
    q: &[Complex64],
    zs: &[Complex64],
) -> Result<Vec<Complex64>> {
    if q.len() > sp.dim() {
        return Err(Error::DimensionMismatch {
            expected: sp.dim(),
            found: q.len(),
        });
    }
    let Some(first) = zs.first() else {
        return Ok(Vec::new());
    };
    let (lower, upper) = sp.partial_moments(first.norm(), q.len());
    Ok(zs
        .iter()
        .map(|&z| cauchy_from_moments(p, q, z, &lower, &upper))
        .collect())
}

fn cauchy_from_moments(
    p: &[Complex64],
    q: &[Complex64],
    z: Complex64,
    lower: &[f64],
    upper: &[f64],
) -> Complex64 {
    if z.norm() == 0.0 {
        // only the j = k + 1 modes survive, each giving -m_k
        return q
            .iter()
            .enumerate()
            .filter_map(|(k, qk)| p.get(k + 1).map(|pj| -pj * qk.conj() * upper[k]))
            .sum();
    }
    let zinv = z.inv();
    let mut total = Complex64::new(0.0, 0.0);
    for (k, qk) in q.iter().enumerate() {
        if qk.norm() == 0.0 {
            continue;
        }
        let qc = qk.conj();
        for (j, pj) in p.iter().enumerate() {
            let e = j as i32 - k as i32 - 1;
            let power = if e >= 0 { z.powi(e) } else { zinv.powi(-e) };
            let radial = if j <= k { lower[k] } else { -upper[k] };
            total += pj * qc * power * radial;
        }
    }
    total
}

/// Stopping rules for the nested quadrature of [`planar_cauchy_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyTolerance {
    pub rel_inner: f64,
    pub rel_outer: f64,
    pub max_segments: usize,
}

impl Default for CauchyTolerance {
    fn default() -> Self {
        CauchyTolerance {
            rel_inner: 1e-13,
            rel_outer: 1e-11,
            max_segments: 2000,
        }
    }
}

/// `int phi(zeta) / (z - zeta) dm_2(zeta)` with a hole of radius `hole_radius` about `z`.
pub fn planar_cauchy(phi: &DensityFunction, z: Complex64, hole_radius: f64) -> Result<Complex64> {
    planar_cauchy_with(phi, z, hole_radius, CauchyTolerance::default())
}

/// Ray parameters `rho > 0` where `z + rho e^{it}` crosses the circle `|zeta| = c`.
fn ray_crossings(z: Complex64, dir: Complex64, c: f64) -> Option<(f64, f64)> {
    let b = (z.conj() * dir).re;
    let disc = b * b - (z.norm_sqr() - c * c);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

pub fn planar_cauchy_with(
    phi: &DensityFunction,
    z: Complex64,
    hole_radius: f64,
    tol: CauchyTolerance,
) -> Result<Complex64> {
    if !(hole_radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hole radius must be positive, got {hole_radius}"
        )));
    }
    if phi.magnitude == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let eta = hole_radius;
    let support = phi.support_radius;
    let center = phi.eval(z);
    let abs_z = z.norm();
    let size = phi.magnitude * support.max(1.0);
    let mut circles = phi.radial_breaks.clone();
    circles.push(support);

    let inner_tol = Tolerance {
        abs: 1e-16 * size,
        rel: tol.rel_inner,
        max_segments: tol.max_segments,
    };
    let outer_tol = Tolerance {
        abs: 1e-15 * size * 2.0 * PI,
        rel: tol.rel_outer,
        max_segments: tol.max_segments,
    };
    let inner_failed = Cell::new(false);

    let ray = |theta: f64| -> Complex64 {
        let dir = Complex64::from_polar(1.0, theta);
        let mut hole_pts = vec![0.0];
        let mut outer_pts = Vec::new();
        let mut rho_in = 0.0;
        let mut rho_out = 0.0;
        let mut hits_support = false;
        for &c in &circles {
            if let Some((lo, hi)) = ray_crossings(z, dir, c) {
                for rho in [lo, hi] {
                    if rho > 0.0 && rho < eta {
                        hole_pts.push(rho);
                    } else if rho > eta {
                        outer_pts.push(rho);
                    }
                }
                if c == support && hi > 0.0 {
                    hits_support = true;
                    rho_in = lo.max(0.0);
                    rho_out = hi;
                }
            }
        }
        hole_pts.push(eta);
        hole_pts.sort_by(f64::total_cmp);
        let (hole, ok) = integrate_adaptive_lenient(
            |rho| phi.eval(z + dir * rho) - center,
            &hole_pts,
            inner_tol,
        );
        let mut total = hole.value;
        if !ok {
            inner_failed.set(true);
        }
        let start = rho_in.max(eta);
        if hits_support && rho_out > start {
            let mut pts = vec![start];
            pts.extend(outer_pts.into_iter().filter(|&r| r > start && r < rho_out));
            pts.push(rho_out);
            pts.sort_by(f64::total_cmp);
            let (outer, ok) =
                integrate_adaptive_lenient(|rho| phi.eval(z + dir * rho), &pts, inner_tol);
            total += outer.value;
            if !ok {
                inner_failed.set(true);
            }
        }
        -Complex64::from_polar(1.0, -theta) * total
    };

    // tangent directions to every circle not containing z bound the smooth pieces
    let theta0 = if abs_z > 0.0 { (-z).arg() } else { 0.0 };
    let mut angles = vec![theta0 - PI, theta0 + PI];
    for &c in &circles {
        if c < abs_z {
            let a = (c / abs_z).asin();
            angles.push(theta0 - a);
            angles.push(theta0 + a);
        }
    }
    angles.sort_by(f64::total_cmp);

    let mut total = Complex64::new(0.0, 0.0);
    for w in angles.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // theta = a + (b - a)(1 - cos pi u)/2 removes square-root endpoint behaviour
        let est = integrate_adaptive(
            |u| {
                let theta = a + 0.5 * (b - a) * (1.0 - (PI * u).cos());
                let jac = 0.5 * (b - a) * PI * (PI * u).sin();
                if jac == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    ray(theta) * jac
                }
            },
            &[0.0, 0.5, 1.0],
            outer_tol,
        )?;
        total += est.value;
    }
    if inner_failed.get() {
        return Err(Error::QuadratureNotConverged {
            context: format!("radial integral of the Cauchy transform at z = {z}"),
            estimate: f64::NAN,
        });
    }
    Ok(total)
}

/// `int_{D(z, r)} 1 / (z - zeta) dm_2(zeta)` in polar coordinates centred at `z`.
///
/// With `zeta - z = rho e^{it}` the integrand times the Jacobian is
/// `-e^{-it}`, integrated here with Gauss-Legendre in `rho` and the trapezoid
/// rule in `t`.
pub fn disc_mean_value_check(_z: Complex64, r: f64) -> Complex64 {
    const ANGLES: usize = 64;
    let (nodes, weights) = crate::quadrature::gauss_legendre(8);
    let dtheta = 2.0 * PI / ANGLES as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..ANGLES {
        let dir = Complex64::from_polar(1.0, dtheta * k as f64);
        for (x, w) in nodes.iter().zip(&weights) {
            let rho = 0.5 * r * (x + 1.0);
            let integrand = -(dir * rho).inv() * rho;
            total += integrand * (0.5 * r * w * dtheta);
        }
    }
    total
}

/// One point of a Cauchy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauchySample {
    pub z: Complex64,
    pub value: Complex64,
    pub bound_ratio: f64,
}

/// Empirical constant of a bound verified along a grid sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub samples: Vec<CauchySample>,
    /// Supremum of the bound ratio over the whole grid.
    pub constant: f64,
    /// Supremum over grid points within 75% of the largest radius.
    pub inner_constant: f64,
    /// `constant / inner_constant - 1`.
    pub growth: f64,
    pub stable: bool,
}

impl BoundReport {
    fn from_samples(samples: Vec<CauchySample>) -> Self {
        let r_max = samples.iter().map(|s| s.z.norm()).fold(0.0, f64::max);
        let constant = samples.iter().map(|s| s.bound_ratio).fold(0.0, f64::max);
        let inner_constant = samples
            .iter()
            .filter(|s| s.z.norm() <= 0.75 * r_max)
            .map(|s| s.bound_ratio)
            .fold(0.0, f64::max);
        let growth = if constant == 0.0 {
            0.0
        } else if inner_constant == 0.0 {
            f64::INFINITY
        } else {
            constant / inner_constant - 1.0
        };
        let stable = constant.is_finite() && growth < STABILITY_GROWTH;
        BoundReport {
            samples,
            constant,
            inner_constant,
            growth,
            stable,
        }
    }
}

/// Sweeps `|C[phi](z)| (1 + |z|)` over the grid.
///
/// When `phi` declares a decay constant, the hypothesis
/// `|phi| + |grad phi| <= C (1 + |z|)^-3` is first checked on the grid.
pub fn verify_decay_bound(phi: &DensityFunction, z_grid: &[Complex64]) -> Result<BoundReport> {
    if let Some(c) = phi.decay_constant {
        for &z in z_grid {
            let lhs = phi.eval(z).norm() + phi.gradient_norm(z);
            let rhs = c * (1.0 + z.norm()).powi(-3);
            if lhs > rhs * (1.0 + 1e-6) + 1e-10 * phi.magnitude {
                return Err(Error::HypothesisViolated(format!(
                    "|phi| + |grad phi| = {lhs:.6e} exceeds {c:.6e} (1+|z|)^-3 = {rhs:.6e} at z = {z}"
                )));
            }
        }
    }
    let eta = phi.default_hole_radius();
    let samples = z_grid
        .par_iter()
        .map(|&z| {
            let value = planar_cauchy(phi, z, eta)?;
            Ok(CauchySample {
                z,
                value,
                bound_ratio: value.norm() * (1.0 + z.norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_samples(samples))
}

/// Result of [`verify_growth_bound`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthBoundReport {
    pub bound: BoundReport,
    pub alpha: f64,
    /// Grid points where `exp(-alpha h(z))` underflowed and the hole was clamped.
    pub clamped: usize,
}

/// Sweeps `|C[psi](z)| exp(-alpha h(z))` with the hole radius `exp(-alpha h(z))`.
///
/// The gradient envelope `|grad psi| <= smoothness_scale exp(alpha h)` is
/// checked on the grid first.
pub fn verify_growth_bound(
    psi: &DensityFunction,
    alpha: f64,
    w: &RadialWeight,
    z_grid: &[Complex64],
) -> Result<GrowthBoundReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    for &z in z_grid {
        let grad = psi.gradient_norm(z);
        let allowed = psi.smoothness_scale * (alpha * w.h(z.norm())).exp();
        if grad > allowed * (1.0 + 1e-6) + 1e-10 * psi.magnitude {
            return Err(Error::HypothesisViolated(format!(
                "|grad psi| = {grad:.6e} exceeds the envelope {allowed:.6e} at z = {z}"
            )));
        }
    }
    let rows = z_grid
        .par_iter()
        .map(|&z| {
            let damping = (-alpha * w.h(z.norm())).exp();
            let clamped = damping < MIN_HOLE_RADIUS;
            let eta = damping.max(MIN_HOLE_RADIUS);
            let value = planar_cauchy(psi, z, eta)?;
            Ok((
                CauchySample {
                    z,
                    value,
                    bound_ratio: value.norm() * damping,
                },
                clamped,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let clamped = rows.iter().filter(|r| r.1).count();
    if clamped > 0 {
        log::info!("hole radius clamped to {MIN_HOLE_RADIUS:e} at {clamped} grid points");
    }
    let bound = BoundReport::from_samples(rows.into_iter().map(|r| r.0).collect());
    Ok(GrowthBoundReport {
        bound,
        alpha,
        clamped,
    })
}
