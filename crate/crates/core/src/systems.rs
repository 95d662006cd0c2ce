//! Finite point systems `Lambda`, their generating function `G`, the
//! biorthogonal family `g_lambda = G / (G'(lambda) (z - lambda))`, the
//! Lagrange series built from it, and Gram-matrix completeness diagnostics.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{CoeffFunction, TruncatedFockSpace};
use crate::poly;

/// Points closer than this are treated as coincident.
pub const COALESCENCE_THRESHOLD: f64 = 1e-10;
/// `|G'(lambda)|` below this fraction of its local scale invalidates the system.
pub const SIMPLE_ZERO_THRESHOLD: f64 = 1e-12;
/// `|G'(lambda)|` below this fraction of its local scale makes the biorthogonal
/// element numerically meaningless.
pub const NEAR_DOUBLE_ZERO_THRESHOLD: f64 = 1e-8;
/// Vandermonde condition estimate above which results are reported as ill conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;
/// Relative singular-value cutoff for counting null directions.
pub const NULL_CUTOFF: f64 = 1e-10;

/// A finite set of distinct nodes with its monic generating polynomial.
#[derive(Debug, Clone)]
pub struct PointSystem {
    points: Vec<Complex64>,
    space: TruncatedFockSpace,
    gen_coeffs: Vec<Complex64>,
    gen_derivs: Vec<Complex64>,
    local_scales: Vec<f64>,
    cond_estimate: f64,
    generating_residual: f64,
}

/// Validates `points` against `sp` and expands `G(z) = prod (z - lambda_j)`.
///
/// Requires exactly `sp.dim()` points, so that the kernels at the nodes form
/// a complete and minimal system of the truncated space.
pub fn build_system(points: Vec<Complex64>, sp: &TruncatedFockSpace) -> Result<PointSystem> {
    let n = points.len();
    if n != sp.dim() {
        return Err(Error::DimensionMismatch {
            expected: sp.dim(),
            found: n,
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            let distance = (points[i] - points[j]).norm();
            if !(distance > COALESCENCE_THRESHOLD) {
                return Err(Error::DuplicatePoints {
                    i,
                    j,
                    distance,
                    threshold: COALESCENCE_THRESHOLD,
                });
            }
        }
    }
    let gen_coeffs = poly::from_roots(&points);
    let mut gen_derivs = Vec::with_capacity(n);
    let mut local_scales = Vec::with_capacity(n);
    for (j, &lj) in points.iter().enumerate() {
        let mut d = Complex64::new(1.0, 0.0);
        let mut scale = 1.0;
        for (k, &lk) in points.iter().enumerate() {
            if k != j {
                d *= lj - lk;
                scale *= lj.norm() + lk.norm();
            }
        }
        if !(d.norm() > SIMPLE_ZERO_THRESHOLD * scale) {
            return Err(Error::NearDoubleZero {
                index: j,
                magnitude: d.norm(),
                threshold: SIMPLE_ZERO_THRESHOLD,
            });
        }
        gen_derivs.push(d);
        local_scales.push(scale);
    }
    let cmax = poly::max_abs(&gen_coeffs);
    let generating_residual = points
        .iter()
        .map(|&l| poly::horner(&gen_coeffs, l).norm() / (cmax * l.norm().max(1.0).powi(n as i32)))
        .fold(0.0, f64::max);
    let cond_estimate = vandermonde_condition(&points);
    Ok(PointSystem {
        points,
        space: sp.clone(),
        gen_coeffs,
        gen_derivs,
        local_scales,
        cond_estimate,
        generating_residual,
    })
}

fn vandermonde_condition(points: &[Complex64]) -> f64 {
    let n = points.len();
    let v = DMatrix::from_fn(n, n, |i, k| points[i].powi(k as i32));
    let sv = v.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl PointSystem {
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn space(&self) -> &TruncatedFockSpace {
        &self.space
    }

    /// Monic `G`, degree `N`, lowest coefficient first.
    pub fn gen_coeffs(&self) -> &[Complex64] {
        &self.gen_coeffs
    }

    /// `G'(lambda_j)` from the product formula.
    pub fn gen_derivs(&self) -> &[Complex64] {
        &self.gen_derivs
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.cond_estimate > ILL_CONDITIONED
    }

    /// `max_j |G(lambda_j)| / (max|coeff| max(1, |lambda_j|)^N)`.
    pub fn generating_residual(&self) -> f64 {
        self.generating_residual
    }

    pub fn generating(&self, z: Complex64) -> Complex64 {
        poly::horner(&self.gen_coeffs, z)
    }

    /// Smallest pairwise node distance.
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                best = best.min((self.points[i] - self.points[j]).norm());
            }
        }
        best
    }

    /// Same space, nodes moved by `offsets`.
    pub fn perturbed(&self, offsets: &[Complex64]) -> Result<PointSystem> {
        if offsets.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: offsets.len(),
            });
        }
        let pts = self
            .points
            .iter()
            .zip(offsets)
            .map(|(p, o)| p + o)
            .collect();
        build_system(pts, &self.space)
    }
}

/// The family `{g_lambda}` biorthogonal to the kernels at the nodes.
#[derive(Debug, Clone)]
pub struct BiorthogonalFamily {
    pub functions: Vec<CoeffFunction>,
    pub points: Vec<Complex64>,
}

pub fn biorthogonal(ps: &PointSystem) -> Result<BiorthogonalFamily> {
    let functions = ps
        .points
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let d = ps.gen_derivs[j];
            if d.norm() < NEAR_DOUBLE_ZERO_THRESHOLD * ps.local_scales[j] {
                return Err(Error::NearDoubleZero {
                    index: j,
                    magnitude: d.norm(),
                    threshold: NEAR_DOUBLE_ZERO_THRESHOLD,
                });
            }
            let (quotient, _) = poly::divide_linear(&ps.gen_coeffs, lambda);
            Ok(CoeffFunction::new(poly::scale(&quotient, d.inv())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BiorthogonalFamily {
        functions,
        points: ps.points.clone(),
    })
}

impl BiorthogonalFamily {
    /// `[<k_lambda_i, g_mu_j>]`, which should be the identity.
    pub fn biorthogonality_matrix(&self, sp: &TruncatedFockSpace) -> Result<DMatrix<Complex64>> {
        let n = self.functions.len();
        let kernels: Vec<CoeffFunction> = self.points.iter().map(|&l| sp.kernel(l)).collect();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = sp.inner_product(&kernels[i], &self.functions[j])?;
            }
        }
        Ok(m)
    }

    /// Each member scaled to unit norm.
    pub fn normalized(&self, sp: &TruncatedFockSpace) -> Result<Vec<CoeffFunction>> {
        self.functions
            .iter()
            .map(|g| {
                let n = sp.norm(g)?;
                if n == 0.0 {
                    return Err(Error::ZeroNorm);
                }
                Ok(g.scaled(Complex64::new(1.0 / n, 0.0)))
            })
            .collect()
    }
}

/// `sum_lambda f(lambda) g_lambda`; reproduces every `f` of degree `< N`.
pub fn lagrange_reconstruct(f: &CoeffFunction, ps: &PointSystem) -> Result<CoeffFunction> {
    if f.dim() != ps.len() {
        return Err(Error::DimensionMismatch {
            expected: ps.len(),
            found: f.dim(),
        });
    }
    if ps.is_ill_conditioned() {
        log::warn!(
            "Lagrange reconstruction on an ill-conditioned node set (cond estimate {:.3e})",
            ps.cond_estimate
        );
    }
    let family = biorthogonal(ps)?;
    Ok(lagrange_with(f, &family))
}

pub(crate) fn lagrange_with(f: &CoeffFunction, family: &BiorthogonalFamily) -> CoeffFunction {
    let dim = family.points.len();
    family
        .points
        .iter()
        .zip(&family.functions)
        .fold(CoeffFunction::zeros(dim), |acc, (&l, g)| {
            acc.add(&g.scaled(f.eval(l)))
        })
}

/// `G_ij = <f_j, f_i>`, Hermitian.
pub fn gram_matrix(
    family: &[CoeffFunction],
    sp: &TruncatedFockSpace,
) -> Result<DMatrix<Complex64>> {
    let n = family.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sp.inner_product(&family[j], &family[i])?;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessDefect {
    pub sigma_min: f64,
    pub null_dim: usize,
    pub singular_values: Vec<f64>,
}

/// Smallest singular value of the Gram matrix and the number of singular
/// values below `1e-10` times the largest.
pub fn completeness_defect(
    family: &[CoeffFunction],
    sp: &TruncatedFockSpace,
) -> Result<CompletenessDefect> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let g = gram_matrix(family, sp)?;
    Ok(defect_of(&g))
}

pub(crate) fn defect_of(g: &DMatrix<Complex64>) -> CompletenessDefect {
    let mut sv: Vec<f64> = g.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max = sv[0];
    let null_dim = sv.iter().filter(|&&s| s < NULL_CUTOFF * max).count();
    CompletenessDefect {
        sigma_min: *sv.last().expect("nonempty"),
        null_dim,
        singular_values: sv,
    }
}

/// Diagnostics recorded at one step of [`perturb_and_track`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub sigma_min: f64,
    pub cond_estimate: f64,
}

/// Moves the nodes by each offset vector in `schedule` (offsets relative to the
/// original nodes) and records the smallest Gram singular value of the
/// normalized biorthogonal family and the Vandermonde condition estimate.
pub fn perturb_and_track(
    ps: &PointSystem,
    schedule: &[Vec<Complex64>],
) -> Result<Vec<StepDiagnostics>> {
    schedule
        .iter()
        .map(|offsets| {
            let moved = ps.perturbed(offsets)?;
            let family = biorthogonal(&moved)?.normalized(&moved.space)?;
            let defect = completeness_defect(&family, &moved.space)?;
            Ok(StepDiagnostics {
                sigma_min: defect.sigma_min,
                cond_estimate: moved.cond_estimate,
            })
        })
        .collect()
}

/// Schedule sliding node `i` toward node `j` along the segment between them;
/// the last step leaves the pair at `final_gap` times their initial distance.
pub fn coalescence_schedule(
    ps: &PointSystem,
    i: usize,
    j: usize,
    steps: usize,
    final_gap: f64,
) -> Vec<Vec<Complex64>> {
    let delta = ps.points[j] - ps.points[i];
    (0..=steps)
        .map(|s| {
            // geometric approach so that the late steps resolve the collapse
            let remaining = final_gap.powf(s as f64 / steps as f64);
            let mut offsets = vec![Complex64::new(0.0, 0.0); ps.len()];
            offsets[i] = delta * (1.0 - remaining);
            offsets
        })
        .collect()
}

/// Schedule rotating every node by the given angles.
pub fn rotation_schedule(ps: &PointSystem, angles: &[f64]) -> Vec<Vec<Complex64>> {
    angles
        .iter()
        .map(|&a| {
            let rot = Complex64::from_polar(1.0, a);
            ps.points.iter().map(|&p| p * rot - p).collect()
        })
        .collect()
}

/// The `count` points of `spacing * (Z + iZ) + offset` closest to the origin.
pub fn lattice_points(count: usize, spacing: f64, offset: Complex64) -> Vec<Complex64> {
    let k = ((count as f64).sqrt().ceil() as i64) + 2;
    let mut pts = Vec::new();
    for a in -k..=k {
        for b in -k..=k {
            pts.push(Complex64::new(a as f64, b as f64) * spacing + offset);
        }
    }
    pts.sort_by(|p, q| {
        p.norm()
            .total_cmp(&q.norm())
            .then(p.arg().total_cmp(&q.arg()))
    });
    pts.truncate(count);
    pts
}

/// `radius * exp(i (phase + 2 pi k / count))`.
pub fn roots_of_unity(count: usize, radius: f64, phase: f64) -> Vec<Complex64> {
    (0..count)
        .map(|k| Complex64::from_polar(radius, phase + 2.0 * PI * k as f64 / count as f64))
        .collect()
}

/// Uniform random points in the disc of the given radius.
pub fn random_disc(count: usize, radius: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let t = 2.0 * PI * rng.gen::<f64>();
            Complex64::from_polar(r, t)
        })
        .collect()
}

/// Parses CSV text with header `re,im`.
pub fn points_from_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty point table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["re", "im"] {
        return Err(Error::InvalidArgument(format!(
            "point table header must be `re,im`, found `{header}`"
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "point table row {} has {} columns",
                    i + 2,
                    parts.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("point table row {}: {e}", i + 2)))
            };
            Ok(Complex64::new(parse(parts[0])?, parse(parts[1])?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::compute_moments;
    use crate::weights::RadialWeight;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn classical(n: usize) -> TruncatedFockSpace {
        compute_moments(&RadialWeight::classical(), n).unwrap()
    }

    #[test]
    fn two_point_system() {
        let sp = classical(2);
        let ps = build_system(vec![c(0.0, 0.0), c(1.0, 0.0)], &sp).unwrap();
        assert_eq!(ps.gen_coeffs(), &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(ps.gen_derivs(), &[c(-1.0, 0.0), c(1.0, 0.0)]);
        let fam = biorthogonal(&ps).unwrap();
        assert_eq!(fam.functions[0].coeffs(), &[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(fam.functions[1].coeffs(), &[c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn roots_of_unity_system() {
        let n = 6;
        let sp = classical(n);
        let pts = roots_of_unity(n, 1.0, 0.0);
        let ps = build_system(pts.clone(), &sp).unwrap();
        let g = ps.gen_coeffs();
        assert!((g[0] + 1.0).norm() < 1e-14 && (g[n] - 1.0).norm() < 1e-14);
        assert!(g[1..n].iter().all(|x| x.norm() < 1e-14));
        for (d, l) in ps.gen_derivs().iter().zip(&pts) {
            assert!((d - l.powi(n as i32 - 1) * n as f64).norm() < 1e-13);
        }
        assert!((ps.cond_estimate() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_point() {
        let sp = classical(1);
        let ps = build_system(vec![c(0.0, 0.0)], &sp).unwrap();
        assert_eq!(ps.gen_coeffs(), &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(ps.gen_derivs(), &[c(1.0, 0.0)]);
    }

    #[test]
    fn rejects_bad_input() {
        let sp = classical(3);
        let dup = build_system(vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1e-12)], &sp);
        assert!(matches!(
            dup,
            Err(Error::DuplicatePoints { i: 1, j: 2, .. })
        ));
        let short = build_system(vec![c(0.0, 0.0)], &sp);
        assert!(matches!(short, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn nearly_coalescing_nodes_are_refused() {
        let sp = classical(3);
        let ps = build_system(vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1e-9)], &sp).unwrap();
        assert!(matches!(
            biorthogonal(&ps),
            Err(Error::NearDoubleZero { index: 1, .. })
        ));
    }

    #[test]
    fn delta_and_biorthogonality() {
        let sp = classical(8);
        let ps = build_system(lattice_points(8, 0.7, c(0.13, 0.07)), &sp).unwrap();
        let fam = biorthogonal(&ps).unwrap();
        for (i, &l) in ps.points().iter().enumerate() {
            for (j, g) in fam.functions.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g.eval(l) - expect).norm() < 1e-10);
            }
        }
        let m = fam.biorthogonality_matrix(&sp).unwrap();
        assert!((m - DMatrix::identity(8, 8)).norm() < 1e-8);
        assert!(ps.generating_residual() < 1e-10);
    }

    #[test]
    fn lagrange_examples() {
        let sp = classical(4);
        let ps = build_system(roots_of_unity(4, 2.0, 0.0), &sp).unwrap();
        let one = CoeffFunction::monomial(0, 4);
        let r = lagrange_reconstruct(&one, &ps).unwrap();
        assert!(
            (r.coeffs()[0] - 1.0).norm() < 1e-12
                && r.coeffs()[1..].iter().all(|x| x.norm() < 1e-12)
        );
        let f = CoeffFunction::new(vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = lagrange_reconstruct(&f, &ps).unwrap();
        let err = r
            .coeffs()
            .iter()
            .zip(f.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
        let k = sp.kernel(ps.points()[1]);
        let r = lagrange_reconstruct(&k, &ps).unwrap();
        let err = r
            .coeffs()
            .iter()
            .zip(k.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn gram_examples() {
        let sp = classical(5);
        let onb: Vec<_> = (0..5).map(|n| sp.normalized_monomial(n)).collect();
        let d = completeness_defect(&onb, &sp).unwrap();
        assert!((d.sigma_min - 1.0).abs() < 1e-12 && d.null_dim == 0);
        let e0 = sp.normalized_monomial(0);
        let d = completeness_defect(&[e0.clone(), e0], &sp).unwrap();
        assert!(d.sigma_min < 1e-14 && d.null_dim == 1);
        let ps = build_system(roots_of_unity(5, 1.0, 0.0), &sp).unwrap();
        let fam = biorthogonal(&ps).unwrap();
        assert_eq!(
            completeness_defect(&fam.functions, &sp).unwrap().null_dim,
            0
        );
    }

    #[test]
    fn zero_perturbation_is_neutral() {
        let sp = classical(4);
        let ps = build_system(lattice_points(4, 1.0, c(0.1, 0.2)), &sp).unwrap();
        let track = perturb_and_track(&ps, &[vec![c(0.0, 0.0); 4], vec![c(0.0, 0.0); 4]]).unwrap();
        assert_eq!(track[0], track[1]);
        assert_eq!(track[0].cond_estimate, ps.cond_estimate());
    }

    #[test]
    fn coalescence_drives_sigma_min_to_zero() {
        let sp = classical(3);
        let ps = build_system(vec![c(-0.5, 0.0), c(0.5, 0.0), c(0.0, 0.8)], &sp).unwrap();
        let sched = coalescence_schedule(&ps, 0, 1, 12, 1e-4);
        let track = perturb_and_track(&ps, &sched).unwrap();
        let last: Vec<f64> = track[6..].iter().map(|t| t.sigma_min).collect();
        assert!(last.windows(2).all(|w| w[1] < w[0]), "{last:?}");
        assert!(*last.last().unwrap() < 1e-6);
    }

    #[test]
    fn rotation_leaves_sigma_min_invariant() {
        let sp = classical(6);
        let ps = build_system(lattice_points(6, 0.8, c(0.05, 0.11)), &sp).unwrap();
        let track = perturb_and_track(&ps, &rotation_schedule(&ps, &[0.0, 0.3, 1.1, 2.5])).unwrap();
        for t in &track {
            assert!((t.sigma_min - track[0].sigma_min).abs() < 1e-10 * track[0].sigma_min.max(1.0));
        }
    }

    #[test]
    fn lattice_and_csv_generators() {
        let pts = lattice_points(5, 1.0, c(0.0, 0.0));
        assert_eq!(pts[0], c(0.0, 0.0));
        assert!(pts[1..].iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
        let parsed = points_from_csv("re,im\n1,2\n-0.5, 3e-1\n").unwrap();
        assert_eq!(parsed, vec![c(1.0, 2.0), c(-0.5, 0.3)]);
        assert!(points_from_csv("x,y\n1,2").is_err());
        let r = random_disc(50, 2.0, 9);
        assert!(r.iter().all(|p| p.norm() <= 2.0));
        assert_eq!(r, random_disc(50, 2.0, 9));
    }
}
