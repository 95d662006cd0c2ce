//! Dense complex polynomials in the monomial basis, lowest degree first.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

/// Value and first derivative in a single pass.
pub fn horner_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut value = ZERO;
    let mut deriv = ZERO;
    for &c in coeffs.iter().rev() {
        deriv = deriv * z + value;
        value = value * z + c;
    }
    (value, deriv)
}

pub fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Synthetic division by `(z - root)`. Returns the quotient and the remainder,
/// which equals the polynomial's value at `root`.
pub fn divide_linear(coeffs: &[Complex64], root: Complex64) -> (Vec<Complex64>, Complex64) {
    if coeffs.is_empty() {
        return (Vec::new(), ZERO);
    }
    let n = coeffs.len();
    let mut quotient = vec![ZERO; n - 1];
    let mut carry = ZERO;
    for k in (1..n).rev() {
        carry = carry * root + coeffs[k];
        quotient[k - 1] = carry;
    }
    let remainder = carry * root + coeffs[0];
    (quotient, remainder)
}

/// Monic polynomial with the given roots.
pub fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

pub fn mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn scale(a: &[Complex64], s: Complex64) -> Vec<Complex64> {
    a.iter().map(|&c| c * s).collect()
}

/// `a + b`, padding the shorter operand with zeros.
pub fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or(ZERO) + b.get(k).copied().unwrap_or(ZERO))
        .collect()
}

/// Long division `num = q * den + r` with `deg r < deg den`.
///
/// `den` must have a nonzero leading coefficient.
pub fn div_rem(num: &[Complex64], den: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let dn = den.len();
    assert!(
        dn > 0 && den[dn - 1] != ZERO,
        "divisor must have a nonzero leading coefficient"
    );
    if num.len() < dn {
        return (Vec::new(), num.to_vec());
    }
    let lead = den[dn - 1];
    let mut rem = num.to_vec();
    let mut quot = vec![ZERO; num.len() - dn + 1];
    for k in (0..quot.len()).rev() {
        let c = rem[k + dn - 1] / lead;
        quot[k] = c;
        for (j, &d) in den.iter().enumerate() {
            rem[k + j] -= c * d;
        }
    }
    rem.truncate(dn - 1);
    (quot, rem)
}

/// Largest coefficient modulus.
pub fn max_abs(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn expands_roots() {
        let g = from_roots(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(g, vec![c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn synthetic_division_remainder_is_value() {
        let p = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0), c(2.0, 0.0)];
        let root = c(0.3, -0.7);
        let (q, r) = divide_linear(&p, root);
        assert!((r - horner(&p, root)).norm() < 1e-14);
        let back = add(&mul(&q, &[-root, ONE]), &[r]);
        for (a, b) in back.iter().zip(&p) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn long_division_reconstructs() {
        let num = vec![
            c(1.0, 0.0),
            c(2.0, -1.0),
            c(0.5, 0.0),
            c(0.0, 3.0),
            c(1.0, 1.0),
        ];
        let den = vec![c(-1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)];
        let (q, r) = div_rem(&num, &den);
        assert_eq!(r.len(), 2);
        let back = add(&mul(&q, &den), &r);
        for (a, b) in back.iter().zip(&num) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_horner() {
        let p = vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let (v, d) = horner_with_derivative(&p, c(2.0, 0.0));
        assert_eq!(v, c(5.0, 0.0));
        assert_eq!(d, c(4.0, 0.0));
        assert_eq!(horner(&derivative(&p), c(2.0, 0.0)), c(4.0, 0.0));
    }
}
