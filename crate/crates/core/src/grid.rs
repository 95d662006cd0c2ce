//! Sample grids in the plane.

use std::f64::consts::PI;

use num_complex::Complex64;

/// `n_radii` equispaced radii in `(0, r_max]` times `n_angles` equispaced angles.
///
/// The angular offset is shifted by half a step on alternate rings so that no
/// two rings share a ray. Points are ordered ring by ring, innermost first.
pub fn polar_grid(r_max: f64, n_radii: usize, n_angles: usize) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(n_radii * n_angles);
    for i in 1..=n_radii {
        let r = r_max * i as f64 / n_radii as f64;
        let shift = if i % 2 == 0 { 0.5 } else { 0.0 };
        for k in 0..n_angles {
            let theta = 2.0 * PI * (k as f64 + shift) / n_angles as f64 + 0.1;
            pts.push(Complex64::from_polar(r, theta));
        }
    }
    pts
}

/// Equispaced points on a segment of the real axis.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}
