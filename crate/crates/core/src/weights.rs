//! Radial weights `h` and the two regularity statements made about them:
//! the growth condition `log(t + |h'| + |h''|) = o(h(t))` and the small
//! oscillation of `h` on exponentially small discs.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial weight `h: [0, inf) -> [0, inf)` together with its first two derivatives.
///
/// The weight is extended to the plane by `h(z) = h(|z|)`.
#[derive(Clone)]
pub struct RadialWeight {
    name: String,
    h: RealFn,
    h_prime: RealFn,
    h_second: RealFn,
    classical: bool,
}

impl fmt::Debug for RadialWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialWeight")
            .field("name", &self.name)
            .field("classical", &self.classical)
            .finish()
    }
}

impl RadialWeight {
    /// A user-defined weight. Derivatives are taken as supplied; see
    /// [`RadialWeight::check_derivatives`].
    pub fn custom<H, H1, H2>(name: impl Into<String>, h: H, h_prime: H1, h_second: H2) -> Self
    where
        H: Fn(f64) -> f64 + Send + Sync + 'static,
        H1: Fn(f64) -> f64 + Send + Sync + 'static,
        H2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        RadialWeight {
            name: name.into(),
            h: Arc::new(h),
            h_prime: Arc::new(h_prime),
            h_second: Arc::new(h_second),
            classical: false,
        }
    }

    /// The Bargmann-Segal-Fock weight `h(r) = pi r^2`.
    pub fn classical() -> Self {
        RadialWeight {
            classical: true,
            ..Self::custom("classical", |r| PI * r * r, |r| 2.0 * PI * r, |_| 2.0 * PI)
        }
    }

    /// `h(r) = scale * r^alpha`.
    pub fn power(scale: f64, alpha: f64) -> Self {
        let name = if scale == 1.0 {
            format!("r^{alpha}")
        } else {
            format!("{scale}*r^{alpha}")
        };
        Self::custom(
            name,
            move |r| scale * r.powf(alpha),
            move |r| {
                if alpha == 1.0 {
                    scale
                } else {
                    scale * alpha * r.powf(alpha - 1.0)
                }
            },
            move |r| {
                if alpha == 1.0 {
                    0.0
                } else if alpha == 2.0 {
                    2.0 * scale
                } else {
                    scale * alpha * (alpha - 1.0) * r.powf(alpha - 2.0)
                }
            },
        )
    }

    /// `h(r) = r^2 / (1 + log(1 + r))`, a weight just below quadratic growth.
    pub fn log_damped() -> Self {
        Self::custom(
            "r^2/(1+log(1+r))",
            |r| r * r / (1.0 + r.ln_1p()),
            |r| {
                let d = 1.0 + r.ln_1p();
                let dp = 1.0 / (1.0 + r);
                (2.0 * r * d - r * r * dp) / (d * d)
            },
            |r| {
                let d = 1.0 + r.ln_1p();
                let dp = 1.0 / (1.0 + r);
                let dpp = -dp * dp;
                let num = 2.0 * r * d - r * r * dp;
                let num_p = 2.0 * d - r * r * dpp;
                (num_p * d - 2.0 * num * dp) / (d * d * d)
            },
        )
    }

    /// `h = c`; never admissible, kept as a negative control.
    pub fn constant(c: f64) -> Self {
        Self::custom(format!("constant {c}"), move |_| c, |_| 0.0, |_| 0.0)
    }

    /// Weight interpolated from samples `(t, h, h', h'')` sorted by `t`.
    ///
    /// `h` and `h'` use cubic Hermite interpolation (with `h'` and `h''` as
    /// slopes), `h''` is linear. Outside the table the last (or first) sample is
    /// continued by its second-order Taylor polynomial.
    pub fn tabulated(name: impl Into<String>, samples: Vec<[f64; 4]>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated weight needs at least two samples".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidArgument(
                "tabulated t values must be strictly increasing".into(),
            ));
        }
        let table = Arc::new(samples);
        let (t0, t1, t2) = (table.clone(), table.clone(), table);
        Ok(Self::custom(
            name,
            move |t| tabulated_eval(&t0, t, 0),
            move |t| tabulated_eval(&t1, t, 1),
            move |t| tabulated_eval(&t2, t, 2),
        ))
    }

    /// Parses CSV text with header `t,h,hp,hpp`.
    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty weight table".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["t", "h", "hp", "hpp"] {
            return Err(Error::InvalidArgument(format!(
                "weight table header must be `t,h,hp,hpp`, found `{header}`"
            )));
        }
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| {
                Error::InvalidArgument(format!("weight table row {}: {e}", lineno + 2))
            })?;
            if vals.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "weight table row {} has {} columns",
                    lineno + 2,
                    vals.len()
                )));
            }
            samples.push([vals[0], vals[1], vals[2], vals[3]]);
        }
        Self::tabulated(name, samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_classical(&self) -> bool {
        self.classical
    }

    pub fn h(&self, t: f64) -> f64 {
        (self.h)(t)
    }

    pub fn h_prime(&self, t: f64) -> f64 {
        (self.h_prime)(t)
    }

    pub fn h_second(&self, t: f64) -> f64 {
        (self.h_second)(t)
    }

    /// `h(z) = h(|z|)`.
    pub fn at(&self, z: Complex64) -> f64 {
        self.h(z.norm())
    }

    /// Compares the supplied derivatives against centered finite differences
    /// on `grid`, to relative tolerance `1e-6`.
    pub fn check_derivatives(&self, grid: &[f64]) -> Result<()> {
        for &t in grid {
            let step = 1e-4 * t.max(1.0);
            let lo = (t - step).max(0.0);
            let hi = t + step;
            let fd1 = (self.h(hi) - self.h(lo)) / (hi - lo);
            let fd2 = (self.h_prime(hi) - self.h_prime(lo)) / (hi - lo);
            for (which, supplied, estimated) in
                [("h'", self.h_prime(t), fd1), ("h''", self.h_second(t), fd2)]
            {
                let scale = supplied.abs().max(estimated.abs()).max(1.0);
                if !supplied.is_finite() || (supplied - estimated).abs() > 1e-6 * scale {
                    return Err(Error::InconsistentDerivative {
                        which,
                        t,
                        supplied,
                        estimated,
                    });
                }
            }
        }
        Ok(())
    }
}

fn tabulated_eval(table: &[[f64; 4]], t: f64, order: usize) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    let taylor = |s: &[f64; 4], dt: f64| match order {
        0 => s[1] + s[2] * dt + 0.5 * s[3] * dt * dt,
        1 => s[2] + s[3] * dt,
        _ => s[3],
    };
    if t <= first[0] {
        return taylor(&first, t - first[0]);
    }
    if t >= last[0] {
        return taylor(&last, t - last[0]);
    }
    let k = table.partition_point(|s| s[0] <= t) - 1;
    let (a, b) = (table[k], table[k + 1]);
    let width = b[0] - a[0];
    let u = (t - a[0]) / width;
    let hermite = |y0: f64, y1: f64, m0: f64, m1: f64| {
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * width * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * width * m1
    };
    match order {
        0 => hermite(a[1], b[1], a[2], b[2]),
        1 => hermite(a[2], b[2], a[3], b[3]),
        _ => a[3] + u * (b[3] - a[3]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Ratios `log(t + |h'(t)| + |h''(t)|) / h(t)` on a geometric grid.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: Verdict,
    /// Least-squares slope of the ratio against `ln t` over the last half of the grid.
    pub tail_slope: f64,
    pub threshold: f64,
}

pub const DEFAULT_REGULARITY_THRESHOLD: f64 = 0.1;

pub fn regularity_check(w: &RadialWeight, t_max: f64, n_points: usize) -> Result<RegularityReport> {
    regularity_check_with(w, t_max, n_points, DEFAULT_REGULARITY_THRESHOLD)
}

/// Finite-horizon version of the growth condition: passes when the ratio at
/// `t_max` is below `threshold` and trends down over the last half of the grid.
pub fn regularity_check_with(
    w: &RadialWeight,
    t_max: f64,
    n_points: usize,
    threshold: f64,
) -> Result<RegularityReport> {
    if !(t_max >= 10.0) {
        return Err(Error::InvalidArgument(format!(
            "t_max must be at least 10, got {t_max}"
        )));
    }
    if n_points < 4 {
        return Err(Error::InvalidArgument(
            "regularity grid needs at least 4 points".into(),
        ));
    }
    let grid: Vec<f64> = (0..n_points)
        .map(|k| t_max.powf(k as f64 / (n_points - 1) as f64))
        .collect();
    let mut ratios = Vec::with_capacity(n_points);
    for &t in &grid {
        let h = w.h(t);
        if !(h > 0.0) {
            return Err(Error::NonpositiveWeight { t, value: h });
        }
        let growth = t + w.h_prime(t).abs() + w.h_second(t).abs();
        ratios.push(growth.ln() / h);
    }
    let half = n_points / 2;
    let xs: Vec<f64> = grid[half..].iter().map(|t| t.ln()).collect();
    let tail_slope = least_squares_slope(&xs, &ratios[half..]);
    let last = *ratios.last().expect("nonempty grid");
    let verdict = if last < threshold && tail_slope < 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(RegularityReport {
        grid,
        ratios,
        verdict,
        tail_slope,
        threshold,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Oscillation of `h` on the disc `D(z, exp(-eps h(z)))` for one sample.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationSample {
    pub z: Complex64,
    pub radius: f64,
    /// Largest `|h(w) - h(z)|` over the probe points.
    pub sup: f64,
    pub flagged: bool,
    pub note: Option<String>,
}

pub const DEFAULT_OSCILLATION_THRESHOLD: f64 = 1e-3;
/// Samples with `|z|` below this are measured but never flagged.
pub const OSCILLATION_LARGE_RADIUS: f64 = 10.0;

pub fn oscillation_check(
    w: &RadialWeight,
    z_samples: &[Complex64],
    eps: f64,
) -> Result<Vec<OscillationSample>> {
    oscillation_check_with(w, z_samples, eps, DEFAULT_OSCILLATION_THRESHOLD)
}

/// Probes 16 points on the boundary circle and 8 at half radius.
pub fn oscillation_check_with(
    w: &RadialWeight,
    z_samples: &[Complex64],
    eps: f64,
    threshold: f64,
) -> Result<Vec<OscillationSample>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(z_samples
        .iter()
        .map(|&z| {
            let hz = w.at(z);
            let radius = (-eps * hz).exp();
            if radius == 0.0 {
                return OscillationSample {
                    z,
                    radius,
                    sup: 0.0,
                    flagged: false,
                    note: Some("probe radius underflows to zero; vacuously satisfied".into()),
                };
            }
            let boundary =
                (0..16).map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / 16.0));
            let interior =
                (0..8).map(|k| Complex64::from_polar(0.5 * radius, PI * (2 * k + 1) as f64 / 8.0));
            let sup = boundary
                .chain(interior)
                .map(|dw| (w.at(z + dw) - hz).abs())
                .fold(0.0, f64::max);
            let flagged = z.norm() >= OSCILLATION_LARGE_RADIUS && sup > threshold;
            OscillationSample {
                z,
                radius,
                sup,
                flagged,
                note: None,
            }
        })
        .collect())
}

/// The built-in weights, in a fixed order.
pub fn builtin_weights() -> Vec<RadialWeight> {
    vec![
        RadialWeight::classical(),
        RadialWeight::power(1.0, 1.0),
        RadialWeight::power(1.0, 2.0),
        RadialWeight::power(1.0, 3.0),
        RadialWeight::log_damped(),
    ]
}
