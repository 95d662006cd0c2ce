//! The Q-transform
//! `Q(z) = int (G(z) P(zeta) - G(zeta) P(z)) / (z - zeta) conj(H(zeta)) exp(-h) dm_2(zeta)`
//! for a vector `H` orthogonal to the biorthogonal family of a point system.
//!
//! In the truncated model every ingredient is a polynomial, so each value of
//! `Q` is computed twice: as a finite moment sum and by planar quadrature. The
//! split `Q = A1 + A2` is evaluated through the exact Cauchy transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cauchy::{cauchy_exact, cauchy_exact_on_circle, DensityFunction};
use crate::error::{Error, Result};
use crate::fock::{CoeffFunction, TruncatedFockSpace};
use crate::grid::polar_grid;
use crate::poly;
use crate::systems::{biorthogonal, PointSystem};

/// Relative size below which a pairing `<H, z^n>` counts as zero.
pub const INDEX_THRESHOLD: f64 = 1e-8;
/// Largest accepted `|<g_lambda, H>| / (|g_lambda| |H|)` for a supplied `H`.
pub const ORTHOGONALITY_THRESHOLD: f64 = 1e-10;
/// Minimum distance of the zeros of `P` from `Lambda` and from each other.
pub const ZERO_CLEARANCE: f64 = 1e-6;
/// `max |Q(lambda)|` must stay below this fraction of its pairing scale.
pub const RESIDUAL_THRESHOLD: f64 = 1e-8;
/// `T` is nonzero when `max |T|` exceeds this fraction of `|G|_inf |H|`.
pub const NONZERO_THRESHOLD: f64 = 1e-6;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `Lambda`, the orthogonal vector `H` in the inflated space and the
/// annihilating polynomial `P`.
#[derive(Debug, Clone)]
pub struct YoungInstance {
    pub system: PointSystem,
    /// Truncated space of dimension `N + d` in which `H` lives.
    pub ambient: TruncatedFockSpace,
    pub inflation: usize,
    pub h: CoeffFunction,
    /// Orthonormal basis of the complement of the biorthogonal family.
    pub complement: Vec<CoeffFunction>,
    pub n_index: usize,
    /// Monic, degree `n + 1`.
    pub p: Vec<Complex64>,
    pub p_zeros: Vec<Complex64>,
}

fn ambient_for(system: &PointSystem, d: usize) -> Result<TruncatedFockSpace> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "inflation d must be at least 1".into(),
        ));
    }
    system.space().with_dim(system.len() + d)
}

/// Orthonormal basis of the orthogonal complement of `family` in `sp`,
/// by modified Gram-Schmidt in the coordinates `c_k sqrt(m_k)`.
pub fn orthogonal_complement(
    sp: &TruncatedFockSpace,
    family: &[CoeffFunction],
) -> Result<Vec<CoeffFunction>> {
    let dim = sp.dim();
    let roots: Vec<f64> = sp.moments().iter().map(|m| m.sqrt()).collect();
    let to_unit = |f: &CoeffFunction| -> Vec<Complex64> {
        f.coeffs().iter().zip(&roots).map(|(c, r)| c * r).collect()
    };
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    };
    let norm = |a: &[Complex64]| dot(a, a).re.sqrt();
    let project_out = |v: &mut Vec<Complex64>, basis: &[Vec<Complex64>]| {
        for _ in 0..2 {
            for q in basis {
                let c = dot(v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
    };
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for f in family {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
        let mut v = to_unit(f);
        let original = norm(&v);
        project_out(&mut v, &basis);
        let n = norm(&v);
        if n > 1e-10 * original {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut complement = Vec::new();
    while basis.len() < dim {
        // greedily take the coordinate direction with the largest residual
        let best = (0..dim)
            .map(|i| {
                let mut e = vec![Complex64::new(0.0, 0.0); dim];
                e[i] = Complex64::new(1.0, 0.0);
                project_out(&mut e, &basis);
                let n = norm(&e);
                (n, e)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("dim > 0");
        if best.0 < 1e-6 {
            break;
        }
        let q: Vec<Complex64> = best.1.into_iter().map(|x| x / best.0).collect();
        complement.push(CoeffFunction::new(
            q.iter().zip(&roots).map(|(c, r)| c / r).collect(),
        ));
        basis.push(q);
    }
    Ok(complement)
}

impl YoungInstance {
    /// Complement of the biorthogonal family inside dimension `N + d`.
    pub fn complement_of(
        system: &PointSystem,
        d: usize,
    ) -> Result<(TruncatedFockSpace, Vec<CoeffFunction>)> {
        let ambient = ambient_for(system, d)?;
        let family: Vec<CoeffFunction> = biorthogonal(system)?
            .functions
            .iter()
            .map(|g| g.padded(ambient.dim()))
            .collect();
        let complement = orthogonal_complement(&ambient, &family)?;
        if complement.is_empty() {
            return Err(Error::NoOrthogonalVector);
        }
        Ok((ambient, complement))
    }

    /// Uses a caller-supplied `H`, which must be orthogonal to every `g_lambda`.
    pub fn with_h(system: &PointSystem, d: usize, h: CoeffFunction) -> Result<YoungInstance> {
        let (ambient, complement) = YoungInstance::complement_of(system, d)?;
        if h.dim() != ambient.dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.dim(),
                found: h.dim(),
            });
        }
        let h_norm = ambient.norm(&h)?;
        if h_norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let mut worst: f64 = 0.0;
        for g in &biorthogonal(system)?.functions {
            let g = g.padded(ambient.dim());
            let cos = ambient.inner_product(&g, &h)?.norm() / (ambient.norm(&g)? * h_norm);
            worst = worst.max(cos);
        }
        if worst > ORTHOGONALITY_THRESHOLD {
            return Err(Error::NotOrthogonal { worst });
        }
        let n_index = usable_index(&ambient, &h)?;
        Ok(assemble(system.clone(), ambient, d, h, complement, n_index))
    }

    /// Assembles an instance without validating `H` or the index `n`.
    ///
    /// Intended for degenerate test cases such as `H = 0`.
    pub fn from_parts_unchecked(
        system: &PointSystem,
        d: usize,
        h: CoeffFunction,
        n_index: usize,
    ) -> Result<YoungInstance> {
        let (ambient, complement) = YoungInstance::complement_of(system, d)?;
        if h.dim() != ambient.dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.dim(),
                found: h.dim(),
            });
        }
        Ok(assemble(system.clone(), ambient, d, h, complement, n_index))
    }

    pub fn g_coeffs(&self) -> &[Complex64] {
        self.system.gen_coeffs()
    }

    pub fn h_norm(&self) -> f64 {
        self.ambient.norm(&self.h).unwrap_or(0.0)
    }

    /// Polar grid reaching past the zeros of `P`, clipped to the truncation disc.
    pub fn default_grid(&self, n_radii: usize, n_angles: usize) -> Vec<Complex64> {
        let reach = self
            .system
            .points()
            .iter()
            .chain(&self.p_zeros)
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        polar_grid(
            (1.1 * reach).min(self.ambient.cutoff_radius()),
            n_radii,
            n_angles,
        )
    }

    /// `p conj(H) exp(-h)`, the density of the first term of the split.
    pub fn a1_density(&self) -> Result<DensityFunction> {
        DensityFunction::weighted_pair(&self.ambient, &self.p, self.h.coeffs())
    }

    /// `G conj(H) exp(-h) / (zeta - lambda_j)`.
    pub fn psi_density(&self, j: usize) -> Result<DensityFunction> {
        let (quotient, _) = poly::divide_linear(self.g_coeffs(), self.system.points()[j]);
        DensityFunction::weighted_pair(&self.ambient, &quotient, self.h.coeffs())
    }

    /// `zeta -> (G(z) P(zeta) - G(zeta) P(z)) / (z - zeta)`, a polynomial in `zeta`.
    pub fn difference_quotient(&self, z: Complex64) -> Vec<Complex64> {
        let g = self.g_coeffs();
        let f = poly::add(
            &poly::scale(&self.p, poly::horner(g, z)),
            &poly::scale(g, -poly::horner(&self.p, z)),
        );
        let (quotient, _) = poly::divide_linear(&f, z);
        poly::scale(&quotient, Complex64::new(-1.0, 0.0))
    }

    /// Majorant of the difference quotient: the same synthetic division applied
    /// to `|G|(|z|) |P_k| + |P|(|z|) |G_k|`, which bounds every intermediate
    /// quantity of [`Self::difference_quotient`].
    pub fn difference_quotient_majorant(&self, z: Complex64) -> Vec<Complex64> {
        let r = z.norm();
        let abs_poly = |c: &[Complex64]| -> Vec<Complex64> {
            c.iter().map(|x| Complex64::new(x.norm(), 0.0)).collect()
        };
        let g = abs_poly(self.g_coeffs());
        let p = abs_poly(&self.p);
        let at = |c: &[Complex64]| poly::horner(c, Complex64::new(r, 0.0));
        let f = poly::add(&poly::scale(&p, at(&g)), &poly::scale(&g, at(&p)));
        poly::divide_linear(&f, Complex64::new(r, 0.0)).0
    }

    /// `Q(z)` as a moment sum, with the rounding scale of the whole
    /// computation, `sum_k Dmaj_k |H_k| m_k`.
    pub fn q_moment(&self, z: Complex64) -> (Complex64, f64) {
        let d = self.difference_quotient(z);
        let h = self.h.coeffs();
        let majorant = self.difference_quotient_majorant(z);
        (
            self.ambient.pair_slices(&d, h),
            self.ambient.pair_scale(&majorant, h),
        )
    }

    /// Coefficients of `Q`: the coefficient of `z^a` is `<P dG_a - G dP_a, H>`
    /// where `dF_a(zeta) = sum_{i > a} f_i zeta^(i-1-a)`.
    pub fn q_coeffs(&self) -> Vec<Complex64> {
        let g = self.g_coeffs();
        let p = &self.p;
        let tail = |f: &[Complex64], a: usize| -> Vec<Complex64> {
            f.iter().skip(a + 1).copied().collect()
        };
        let degree = g.len().max(p.len()) - 1;
        (0..degree)
            .map(|a| {
                let combined = poly::add(
                    &poly::mul(p, &tail(g, a)),
                    &poly::scale(&poly::mul(g, &tail(p, a)), -Complex64::new(1.0, 0.0)),
                );
                self.ambient.pair_slices(&combined, self.h.coeffs())
            })
            .collect()
    }
}

fn usable_index(sp: &TruncatedFockSpace, h: &CoeffFunction) -> Result<usize> {
    let h_norm = sp.norm(h)?;
    h.coeffs()
        .iter()
        .zip(sp.moments())
        .position(|(c, m)| (c * m).norm() > INDEX_THRESHOLD * h_norm * m.sqrt())
        .ok_or(Error::NoUsableIndex)
}

fn place_zeros(points: &[Complex64], count: usize) -> Vec<Complex64> {
    let max = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let radius = 1.5 * if max > 0.0 { max } else { 1.0 };
    let mut phase = 0.0;
    loop {
        let zeros: Vec<Complex64> = (0..count)
            .map(|j| Complex64::from_polar(radius, phase + GOLDEN_ANGLE * j as f64))
            .collect();
        let clear_of_nodes = zeros
            .iter()
            .all(|w| points.iter().all(|l| (w - l).norm() > ZERO_CLEARANCE));
        let simple = zeros.iter().enumerate().all(|(i, w)| {
            zeros[i + 1..]
                .iter()
                .all(|v| (w - v).norm() > ZERO_CLEARANCE)
        });
        if clear_of_nodes && simple {
            return zeros;
        }
        phase += 1e-3;
    }
}

fn assemble(
    system: PointSystem,
    ambient: TruncatedFockSpace,
    inflation: usize,
    h: CoeffFunction,
    complement: Vec<CoeffFunction>,
    n_index: usize,
) -> YoungInstance {
    let p_zeros = place_zeros(system.points(), n_index + 1);
    let p = poly::from_roots(&p_zeros);
    YoungInstance {
        system,
        ambient,
        inflation,
        h,
        complement,
        n_index,
        p,
        p_zeros,
    }
}

/// Inflates the space by `d`, draws `H` as a seeded random unit vector of the
/// complement of `{g_lambda}`, and fixes `n` and `P`.
pub fn make_instance(system: &PointSystem, d: usize, seed: u64) -> Result<YoungInstance> {
    let (ambient, complement) = YoungInstance::complement_of(system, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = CoeffFunction::zeros(ambient.dim());
    for e in &complement {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        h = h.add(&e.scaled(Complex64::new(re, im)));
    }
    let norm = ambient.norm(&h)?;
    if norm == 0.0 {
        return Err(Error::NoOrthogonalVector);
    }
    let h = h.scaled(Complex64::new(1.0 / norm, 0.0));
    let n_index = usable_index(&ambient, &h)?;
    Ok(assemble(system.clone(), ambient, d, h, complement, n_index))
}

/// Quadrature settings for [`q_transform`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Lower bound on the angular trapezoid size; raised automatically to
    /// integrate the polynomial integrand exactly in angle.
    pub min_angular: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { min_angular: 16 }
    }
}

/// Samples of `Q`, of the two terms of its split, and of `T = Q / G`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QResult {
    pub grid: Vec<Complex64>,
    /// Moment-sum values.
    pub q: Vec<Complex64>,
    /// Planar-quadrature values.
    pub q_quadrature: Vec<Complex64>,
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
    /// Floating-point scale `sum |D_k| |H_k| m_k` of each moment sum.
    pub pairing_scales: Vec<f64>,
    /// `|Q(lambda)|` for each node.
    pub residuals_on_lambda: Vec<f64>,
    /// Rounding scale of each `Q(lambda)`, see [`YoungInstance::q_moment`].
    pub residual_scales: Vec<f64>,
    /// `Q / G` at grid points at least `0.1` separation away from every node.
    pub t_estimate: Vec<Option<Complex64>>,
    /// `int |Q|^2 exp(-h)` over the truncation disc.
    pub norm_estimate: f64,
    pub q_coeffs: Vec<Complex64>,
    pub t_coeffs: Vec<Complex64>,
    /// Largest remainder coefficient of `Q / G`, relative to `max |Q_k|`.
    pub division_residual: f64,
    /// Largest `|Q_moment - Q_quadrature|` relative to `int |D|(r) |H|(r) exp(-h)`,
    /// the rounding scale of the pointwise integrand.
    pub quadrature_deviation: f64,
    /// Largest `|Q - A1 - A2| / max(|Q|, |A1|, |A2|)`.
    pub split_deviation: f64,
}

impl QResult {
    /// Largest `|Q(lambda)|` relative to its pairing scale.
    pub fn worst_residual(&self) -> f64 {
        self.residuals_on_lambda
            .iter()
            .zip(&self.residual_scales)
            .map(|(r, s)| {
                if *s > 0.0 {
                    r / s
                } else if *r > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn q_transform(inst: &YoungInstance, z_grid: &[Complex64], cfg: QuadConfig) -> Result<QResult> {
    let g = inst.g_coeffs();
    let h = inst.h.coeffs();
    let sp = &inst.ambient;
    let angular = cfg.min_angular.max(2 * sp.dim() + 2);
    let rows = z_grid
        .par_iter()
        .map(|&z| {
            let d = inst.difference_quotient(z);
            let q = sp.pair_slices(&d, h);
            let scale = sp.pair_scale(&d, h);
            let q_quad = sp.planar_integral(
                |zeta| poly::horner(&d, zeta) * inst.h.eval(zeta).conj(),
                angular,
            );
            let quad_scale = sp.absolute_pair_scale(&d, h);
            let a1 = poly::horner(g, z) * cauchy_exact(sp, &inst.p, h, z)?;
            let a2 = -poly::horner(&inst.p, z) * cauchy_exact(sp, g, h, z)?;
            Ok((q, q_quad, scale, quad_scale, a1, a2))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut q = Vec::with_capacity(rows.len());
    let mut q_quadrature = Vec::with_capacity(rows.len());
    let mut pairing_scales = Vec::with_capacity(rows.len());
    let mut a1 = Vec::with_capacity(rows.len());
    let mut a2 = Vec::with_capacity(rows.len());
    let mut quadrature_deviation: f64 = 0.0;
    let mut split_deviation: f64 = 0.0;
    for (qm, qq, s, qs, x1, x2) in rows {
        if qs > 0.0 {
            quadrature_deviation = quadrature_deviation.max((qm - qq).norm() / qs);
        }
        let size = qm.norm().max(x1.norm()).max(x2.norm());
        if size > 0.0 {
            split_deviation = split_deviation.max((qm - x1 - x2).norm() / size);
        }
        q.push(qm);
        q_quadrature.push(qq);
        pairing_scales.push(s);
        a1.push(x1);
        a2.push(x2);
    }

    let (residuals_on_lambda, residual_scales) = inst
        .system
        .points()
        .iter()
        .map(|&l| {
            let (v, s) = inst.q_moment(l);
            (v.norm(), s)
        })
        .unzip();

    let sep = inst.system.separation();
    let t_estimate = z_grid
        .iter()
        .zip(&q)
        .map(|(&z, &qz)| {
            let far = inst
                .system
                .points()
                .iter()
                .all(|l| (z - l).norm() > 0.1 * sep);
            far.then(|| qz / poly::horner(g, z))
        })
        .collect();

    let q_coeffs = inst.q_coeffs();
    let (t_coeffs, remainder) = poly::div_rem(&q_coeffs, g);
    let q_max = poly::max_abs(&q_coeffs);
    let division_residual = if q_max > 0.0 {
        poly::max_abs(&remainder) / q_max
    } else {
        0.0
    };
    let norm_estimate = sp
        .planar_integral(
            |z| Complex64::new(poly::horner(&q_coeffs, z).norm_sqr(), 0.0),
            2 * q_coeffs.len() + 2,
        )
        .re;

    Ok(QResult {
        grid: z_grid.to_vec(),
        q,
        q_quadrature,
        a1,
        a2,
        pairing_scales,
        residuals_on_lambda,
        residual_scales,
        t_estimate,
        norm_estimate,
        q_coeffs,
        t_coeffs,
        division_residual,
        quadrature_deviation,
        split_deviation,
    })
}

/// `T = Q / G` on the grid and at the nodes, and whether it vanishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TFactorization {
    pub t_samples: Vec<Option<Complex64>>,
    /// `Q'(lambda) / G'(lambda)` with a central difference for `Q'`.
    pub t_at_lambda: Vec<Complex64>,
    /// Largest relative gap between `t_at_lambda` and the mean of `Q/G` at four
    /// nearby off-node points.
    pub continuity_deviation: f64,
    /// Largest gap between sampled `Q/G` and the quotient polynomial, relative to `max |T|`.
    pub polynomial_deviation: f64,
    pub max_abs_t: f64,
    /// `|G|_inf` over the grid times `|H|`.
    pub scale: f64,
    pub threshold: f64,
    pub nonzero: bool,
}

pub fn factor_t(result: &QResult, inst: &YoungInstance) -> Result<TFactorization> {
    let worst = result.worst_residual();
    if worst > RESIDUAL_THRESHOLD {
        return Err(Error::ResidualTooLarge {
            residual: worst,
            threshold: RESIDUAL_THRESHOLD,
        });
    }
    let g = inst.g_coeffs();
    let sep = inst.system.separation();
    let q_at = |z: Complex64| inst.q_moment(z).0;

    let mut t_at_lambda = Vec::new();
    let mut continuity_deviation: f64 = 0.0;
    for (&l, &gp) in inst.system.points().iter().zip(inst.system.gen_derivs()) {
        let delta = 1e-3 * sep;
        let dq = (q_at(l + delta) - q_at(l - delta)) / (2.0 * delta);
        let t_l = dq / gp;
        let offset = 0.15 * sep;
        let nearby: Complex64 = [1.0, -1.0]
            .iter()
            .flat_map(|&s| {
                [
                    Complex64::new(s * offset, 0.0),
                    Complex64::new(0.0, s * offset),
                ]
            })
            .map(|o| q_at(l + o) / poly::horner(g, l + o))
            .sum::<Complex64>()
            / 4.0;
        let size = nearby.norm().max(t_l.norm());
        if size > 0.0 {
            continuity_deviation = continuity_deviation.max((t_l - nearby).norm() / size);
        }
        t_at_lambda.push(t_l);
    }

    let mut max_abs_t = t_at_lambda.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let mut gap: f64 = 0.0;
    for (t, &z) in result.t_estimate.iter().zip(&result.grid) {
        if let Some(t) = t {
            max_abs_t = max_abs_t.max(t.norm());
            gap = gap.max((t - poly::horner(&result.t_coeffs, z)).norm());
        }
    }
    let polynomial_deviation = if max_abs_t > 0.0 {
        gap / max_abs_t
    } else {
        gap
    };
    let g_inf = result
        .grid
        .iter()
        .map(|&z| poly::horner(g, z).norm())
        .fold(0.0, f64::max);
    let scale = g_inf * inst.h_norm();
    let threshold = NONZERO_THRESHOLD * scale;
    Ok(TFactorization {
        t_samples: result.t_estimate.clone(),
        t_at_lambda,
        continuity_deviation,
        polynomial_deviation,
        max_abs_t,
        scale,
        threshold,
        nonzero: max_abs_t > threshold,
    })
}

/// Pairings `c_j = <H, P / (w_j - .)>` and the partial-fraction route back to `<H, z^n>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContradictionReport {
    pub c: Vec<Complex64>,
    pub max_abs_c: f64,
    /// `<H, z^n>` computed directly.
    pub direct: Complex64,
    /// `-sum conj(a_j) c_j` with `a_j = w_j^n / P'(w_j)`.
    pub reconstructed: Complex64,
    pub reconstruction_deviation: f64,
    /// Largest `|T(w_j) - conj(c_j)|` relative to `max |c_j|`.
    pub t_at_zeros_deviation: f64,
    /// `T` vanishing identically would force every `c_j` to vanish; true when
    /// some `c_j` is clearly nonzero, so that this implication fails.
    pub implication_fails: bool,
}

pub fn contradiction_check(inst: &YoungInstance, result: &QResult) -> ContradictionReport {
    let sp = &inst.ambient;
    let h = inst.h.coeffs();
    let n = inst.n_index;
    let c: Vec<Complex64> = inst
        .p_zeros
        .iter()
        .map(|&w| {
            // P(zeta) / (w - zeta) = -P(zeta) / (zeta - w)
            let (quotient, _) = poly::divide_linear(&inst.p, w);
            sp.pair_slices(h, &poly::scale(&quotient, Complex64::new(-1.0, 0.0)))
        })
        .collect();
    let reconstructed: Complex64 = inst
        .p_zeros
        .iter()
        .zip(&c)
        .map(|(&w, cj)| {
            let dp = poly::horner_with_derivative(&inst.p, w).1;
            let a = w.powi(n as i32) / dp;
            -a.conj() * cj
        })
        .sum();
    let direct = h.get(n).copied().unwrap_or_default() * sp.moments()[n];
    let reconstruction_deviation = if direct.norm() > 0.0 {
        (reconstructed - direct).norm() / direct.norm()
    } else {
        (reconstructed - direct).norm()
    };
    let max_abs_c = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let gap = inst
        .p_zeros
        .iter()
        .zip(&c)
        .map(|(&w, cj)| (poly::horner(&result.t_coeffs, w) - cj.conj()).norm())
        .fold(0.0, f64::max);
    let t_at_zeros_deviation = if max_abs_c > 0.0 {
        gap / max_abs_c
    } else {
        gap
    };
    let threshold = INDEX_THRESHOLD * inst.h_norm() * sp.moments()[n].sqrt();
    ContradictionReport {
        c,
        max_abs_c,
        direct,
        reconstructed,
        reconstruction_deviation,
        t_at_zeros_deviation,
        implication_fails: max_abs_c > threshold,
    }
}

/// Empirical constants for the two terms of the split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitBoundReport {
    /// `sup |A1| (1 + |z|) / |G(z)|` over off-node grid points.
    pub a1_constant: f64,
    /// Same supremum over grid points within 75% of the largest radius.
    pub a1_inner_constant: f64,
    pub a1_stable: bool,
    /// Largest relative deviation in
    /// `C[G conj(H) e^-h](z) = (z - lambda) C[psi](z) - int psi`.
    pub identity_deviation: f64,
    pub identity_points: usize,
    /// `(int |A2|^2 exp(-h))^(1/2)` over the truncation disc and over 3/4 of it.
    pub a2_norm: f64,
    pub a2_norm_inner: f64,
    pub a2_finite: bool,
}

pub fn a1_a2_bounds(inst: &YoungInstance, result: &QResult, seed: u64) -> Result<SplitBoundReport> {
    let g = inst.g_coeffs();
    let h = inst.h.coeffs();
    let sp = &inst.ambient;
    let sep = inst.system.separation();

    let r_max = result.grid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut a1_constant: f64 = 0.0;
    let mut a1_inner_constant: f64 = 0.0;
    for (&z, a1) in result.grid.iter().zip(&result.a1) {
        if inst
            .system
            .points()
            .iter()
            .any(|l| (z - l).norm() <= 0.1 * sep)
        {
            continue;
        }
        let ratio = a1.norm() * (1.0 + z.norm()) / poly::horner(g, z).norm();
        a1_constant = a1_constant.max(ratio);
        if z.norm() <= 0.75 * r_max {
            a1_inner_constant = a1_inner_constant.max(ratio);
        }
    }
    let a1_stable = a1_constant.is_finite()
        && (a1_constant == 0.0
            || (a1_inner_constant > 0.0
                && a1_constant / a1_inner_constant - 1.0 < crate::cauchy::STABILITY_GROWTH));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = inst
        .system
        .points()
        .iter()
        .map(|l| l.norm())
        .fold(1.0, f64::max)
        * 2.0;
    let mut identity_deviation: f64 = 0.0;
    let mut identity_points = 0;
    for &l in inst.system.points() {
        let (quotient, _) = poly::divide_linear(g, l);
        let mass = sp.pair_slices(&quotient, h);
        for _ in 0..20 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let z = Complex64::new(re, im) * (0.5 * reach);
            let lhs = cauchy_exact(sp, g, h, z)?;
            let first = (z - l) * cauchy_exact(sp, &quotient, h, z)?;
            let size = lhs.norm().max(first.norm()).max(mass.norm());
            if size > 0.0 {
                identity_deviation = identity_deviation.max((lhs - (first - mass)).norm() / size);
            }
            identity_points += 1;
        }
    }

    let rule = sp.quad_rule();
    let angular = 2 * (g.len() + inst.p.len() + h.len()) + 2;
    let dtheta = 2.0 * PI / angular as f64;
    let cutoff = sp.cutoff_radius();
    let mut full = 0.0;
    let mut inner = 0.0;
    for (&r, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let zs: Vec<Complex64> = (0..angular)
            .map(|k| Complex64::from_polar(r, dtheta * k as f64))
            .collect();
        let cauchy = cauchy_exact_on_circle(sp, g, h, &zs)?;
        let ring: f64 = zs
            .iter()
            .zip(&cauchy)
            .map(|(&z, cz)| (poly::horner(&inst.p, z) * cz).norm_sqr())
            .sum();
        let contribution = ring * wt * r * (-sp.weight().h(r)).exp() * dtheta;
        full += contribution;
        if r <= 0.75 * cutoff {
            inner += contribution;
        }
    }
    let a2_norm = full.sqrt();
    let a2_norm_inner = inner.sqrt();
    Ok(SplitBoundReport {
        a1_constant,
        a1_inner_constant,
        a1_stable,
        identity_deviation,
        identity_points,
        a2_norm,
        a2_norm_inner,
        a2_finite: a2_norm.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::compute_moments;
    use crate::systems::{build_system, lattice_points};
    use crate::weights::RadialWeight;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lattice_instance(w: RadialWeight, n: usize, d: usize, seed: u64) -> YoungInstance {
        let sp = compute_moments(&w, n).unwrap();
        let ps = build_system(lattice_points(n, 0.8, c(0.11, 0.07)), &sp).unwrap();
        make_instance(&ps, d, seed).unwrap()
    }

    #[test]
    fn two_point_complement() {
        // with Lambda = {0, 1} the family spans {1, z}, so in dimension 3 the
        // complement is spanned by z^2: solving the 3x3 Gram system for a vector
        // orthogonal to 1 - z and z gives (0, 0, 1) up to scale
        let sp = compute_moments(&RadialWeight::classical(), 2).unwrap();
        let ps = build_system(vec![c(0.0, 0.0), c(1.0, 0.0)], &sp).unwrap();
        let inst = make_instance(&ps, 1, 5).unwrap();
        assert_eq!(inst.complement.len(), 1);
        let hc = inst.h.coeffs();
        assert!(hc[0].norm() < 1e-14 && hc[1].norm() < 1e-14);
        assert!((hc[2].norm() * inst.ambient.moments()[2].sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(inst.n_index, 2);
        assert_eq!(inst.p.len(), 4);
    }

    #[test]
    fn in_span_vector_is_rejected() {
        let sp = compute_moments(&RadialWeight::classical(), 3).unwrap();
        let ps = build_system(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)], &sp).unwrap();
        let g0 = biorthogonal(&ps).unwrap().functions[0].padded(5);
        assert!(matches!(
            YoungInstance::with_h(&ps, 2, g0),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let inst = lattice_instance(RadialWeight::classical(), 4, 2, 1);
        let e = &inst.complement;
        assert_eq!(e.len(), 2);
        assert!(inst.ambient.inner_product(&e[0], &e[1]).unwrap().norm() < 1e-12);
        for v in e {
            assert!((inst.ambient.norm(v).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zeros_of_p_are_clear() {
        let inst = lattice_instance(RadialWeight::power(1.0, 3.0), 6, 3, 2);
        for w in &inst.p_zeros {
            assert!(inst
                .system
                .points()
                .iter()
                .all(|l| (w - l).norm() > ZERO_CLEARANCE));
            assert!(poly::horner(&inst.p, *w).norm() < 1e-10);
        }
        assert_eq!(inst.p_zeros.len(), inst.n_index + 1);
    }

    #[test]
    fn q_vanishes_on_lambda_and_splits() {
        let inst = lattice_instance(RadialWeight::classical(), 4, 1, 3);
        let grid = inst.default_grid(6, 8);
        let r = q_transform(&inst, &grid, QuadConfig::default()).unwrap();
        assert!(r.worst_residual() < RESIDUAL_THRESHOLD);
        assert!(r.split_deviation < 1e-10, "{}", r.split_deviation);
        assert!(r.quadrature_deviation < 1e-9, "{}", r.quadrature_deviation);
        assert!(r.division_residual < 1e-10);
        for (z, qz) in grid.iter().zip(&r.q) {
            let exact = poly::horner(&r.q_coeffs, *z);
            assert!(
                (exact - qz).norm() < 1e-10 * r.pairing_scales.iter().cloned().fold(0.0, f64::max)
            );
        }
        let t = factor_t(&r, &inst).unwrap();
        assert!(t.nonzero);
        assert!(t.continuity_deviation < 1e-4);
    }

    #[test]
    fn q_at_zeros_of_p() {
        // Q(w_j) = G(w_j) int P(zeta) conj(H) e^-h / (w_j - zeta), evaluated by the
        // exact Cauchy route and compared with the moment sum for Q
        let inst = lattice_instance(RadialWeight::log_damped(), 6, 2, 4);
        for &w in &inst.p_zeros {
            let (q, scale) = inst.q_moment(w);
            let direct = poly::horner(inst.g_coeffs(), w)
                * cauchy_exact(&inst.ambient, &inst.p, inst.h.coeffs(), w).unwrap();
            assert!((q - direct).norm() < 1e-8 * q.norm().max(scale));
        }
    }

    #[test]
    fn zero_vector_gives_zero_everything() {
        let sp = compute_moments(&RadialWeight::classical(), 4).unwrap();
        let ps = build_system(lattice_points(4, 1.0, c(0.1, 0.1)), &sp).unwrap();
        let inst = YoungInstance::from_parts_unchecked(&ps, 1, CoeffFunction::zeros(5), 0).unwrap();
        let grid = inst.default_grid(3, 4);
        let r = q_transform(&inst, &grid, QuadConfig::default()).unwrap();
        assert!(r
            .q
            .iter()
            .chain(&r.a1)
            .chain(&r.a2)
            .all(|v| v.norm() == 0.0));
        let t = factor_t(&r, &inst).unwrap();
        assert!(!t.nonzero && t.max_abs_t == 0.0);
    }

    #[test]
    fn linearity_and_phase() {
        let sp = compute_moments(&RadialWeight::classical(), 4).unwrap();
        let ps = build_system(lattice_points(4, 0.9, c(0.05, 0.1)), &sp).unwrap();
        let base = make_instance(&ps, 2, 7).unwrap();
        let (e0, e1) = (&base.complement[0], &base.complement[1]);
        let n = base.n_index;
        let h1 = e0.scaled(c(0.6, 0.2));
        let h2 = e1.scaled(c(-0.3, 0.9));
        let inst = |h: CoeffFunction| YoungInstance::from_parts_unchecked(&ps, 2, h, n).unwrap();
        let grid = base.default_grid(3, 5);
        let q = |h: CoeffFunction| {
            q_transform(&inst(h), &grid, QuadConfig::default())
                .unwrap()
                .q
        };
        let (q1, q2, q12) = (q(h1.clone()), q(h2.clone()), q(h1.add(&h2)));
        for i in 0..grid.len() {
            assert!((q12[i] - q1[i] - q2[i]).norm() < 1e-10 * q12[i].norm().max(1.0));
        }
        let theta = 0.7;
        let rotated = q(h1.scaled(Complex64::from_polar(1.0, theta)));
        for i in 0..grid.len() {
            assert!(
                (rotated[i] - q1[i] * Complex64::from_polar(1.0, -theta)).norm()
                    < 1e-12 * q1[i].norm().max(1.0)
            );
        }
    }

    #[test]
    fn contradiction_route() {
        let inst = lattice_instance(RadialWeight::classical(), 4, 3, 11);
        let r = q_transform(&inst, &inst.default_grid(4, 6), QuadConfig::default()).unwrap();
        let report = contradiction_check(&inst, &r);
        assert!(report.reconstruction_deviation < 1e-8);
        assert!(report.t_at_zeros_deviation < 1e-8);
        assert!(report.implication_fails);
        let scaled = YoungInstance::from_parts_unchecked(
            &inst.system,
            3,
            inst.h.scaled(c(2.0, 0.0)),
            inst.n_index,
        )
        .unwrap();
        let report2 = contradiction_check(&scaled, &r);
        for (a, b) in report.c.iter().zip(&report2.c) {
            assert!((b - a * 2.0).norm() < 1e-13 * a.norm().max(1.0));
        }
    }

    #[test]
    fn partial_fraction_single_zero() {
        // n = 0: P = z - w_1 and c_1 = <H, -1>, so the reconstruction is <H, 1>
        let sp = compute_moments(&RadialWeight::classical(), 2).unwrap();
        let ps = build_system(vec![c(0.5, 0.0), c(-0.5, 0.0)], &sp).unwrap();
        let h = CoeffFunction::new(vec![c(0.3, 0.4), c(0.0, 0.0), c(1.0, 0.0)]);
        let inst = YoungInstance::from_parts_unchecked(&ps, 1, h, 0).unwrap();
        let r = q_transform(&inst, &[c(0.1, 0.2)], QuadConfig::default()).unwrap();
        let report = contradiction_check(&inst, &r);
        assert_eq!(report.c.len(), 1);
        assert!((report.c[0] + c(0.3, 0.4) * sp.moments()[0]).norm() < 1e-14);
        assert!(report.reconstruction_deviation < 1e-14);
    }

    #[test]
    fn split_bounds() {
        let inst = lattice_instance(RadialWeight::classical(), 6, 1, 9);
        let grid = polar_grid(8.0, 16, 8);
        let r = q_transform(&inst, &grid, QuadConfig::default()).unwrap();
        let b = a1_a2_bounds(&inst, &r, 1).unwrap();
        assert!(b.identity_deviation < 1e-8, "{}", b.identity_deviation);
        assert_eq!(b.identity_points, 120);
        assert!(b.a1_constant.is_finite() && b.a1_stable);
        assert!(b.a2_finite && b.a2_norm >= b.a2_norm_inner);
    }
}
