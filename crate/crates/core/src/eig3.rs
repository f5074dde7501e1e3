//! Eigenvalues of real 3x3 matrices with possibly extreme magnitude
//! separation (the return-map spectra span many orders of magnitude, which
//! defeats generic balancing-free QR at f64 precision).

use nalgebra::{Complex, Matrix3};

/// Characteristic polynomial coefficients: `l^3 - c2 l^2 + c1 l - c0`.
fn char_coeffs(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let c2 = m.trace();
    let c1 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    let c0 = m.determinant();
    (c2, c1, c0)
}

fn poly(c2: f64, c1: f64, c0: f64, x: f64) -> f64 {
    ((x - c2) * x + c1) * x - c0
}

fn poly_d(c2: f64, c1: f64, x: f64) -> f64 {
    (3.0 * x - 2.0 * c2) * x + c1
}

/// Newton from beyond all roots and critical points; monotone convergence to
/// the extreme real root on the chosen side.
fn extreme_root(c2: f64, c1: f64, c0: f64, from_right: bool) -> f64 {
    let bound = 2.0 * (1.0 + c2.abs().max(c1.abs().sqrt()).max(c0.abs().cbrt()));
    let mut x = if from_right { bound } else { -bound };
    for _ in 0..300 {
        let d = poly_d(c2, c1, x);
        if d == 0.0 {
            break;
        }
        let step = poly(c2, c1, c0, x) / d;
        let next = x - step;
        if !next.is_finite() || next == x {
            break;
        }
        x = next;
    }
    x
}

/// Eigenvalues sorted by descending modulus.
pub fn eigenvalues(m: &Matrix3<f64>) -> [Complex<f64>; 3] {
    let (c2, c1, c0) = char_coeffs(m);
    let right = extreme_root(c2, c1, c0, true);
    let left = extreme_root(c2, c1, c0, false);
    // deflate by the largest-modulus real root so the remaining quadratic
    // l^2 + p l + q is well conditioned: q = c0/r exactly, and p recovered
    // from c1 = r*(-p) + q rather than from the cancellation-prone c2 - r
    let r = if right.abs() >= left.abs() { right } else { left };
    let (p, q) = if r != 0.0 {
        let q = c0 / r;
        ((q - c1) / r, q)
    } else {
        (-c2, c1)
    };
    let disc = p * p - 4.0 * q;
    let mut roots: [Complex<f64>; 3] = if disc >= 0.0 {
        let s = disc.sqrt();
        let big = if p >= 0.0 { -0.5 * (p + s) } else { -0.5 * (p - s) };
        let small = if big != 0.0 { q / big } else { 0.0 };
        [Complex::new(r, 0.0), Complex::new(big, 0.0), Complex::new(small, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [
            Complex::new(r, 0.0),
            Complex::new(-0.5 * p, im),
            Complex::new(-0.5 * p, -im),
        ]
    };
    roots.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    // restore the smallest real root from the exactly-known product
    if roots.iter().all(|z| z.im == 0.0) {
        let prod = roots[0].re * roots[1].re;
        if prod != 0.0 && (c0 / prod).is_finite() {
            roots[2] = Complex::new(c0 / prod, 0.0);
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_spectrum() {
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(1e-8, 0.5, -1e7));
        let ev = eigenvalues(&m);
        assert_relative_eq!(ev[0].re, -1e7, max_relative = 1e-10);
        assert_relative_eq!(ev[1].re, 0.5, max_relative = 1e-10);
        assert_relative_eq!(ev[2].re, 1e-8, max_relative = 1e-10);
    }

    #[test]
    fn extreme_separation() {
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(1e20, -2.0, 1e-20));
        let ev = eigenvalues(&m);
        assert_relative_eq!(ev[0].re, 1e20, max_relative = 1e-12);
        assert_relative_eq!(ev[1].re, -2.0, max_relative = 1e-8);
        assert_relative_eq!(ev[2].re, 1e-20, max_relative = 1e-6);
    }

    #[test]
    fn negative_dominant() {
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1e15, 0.3, -1e-9));
        let ev = eigenvalues(&m);
        assert_relative_eq!(ev[0].re, -1e15, max_relative = 1e-12);
        assert_relative_eq!(ev[1].re, 0.3, max_relative = 1e-8);
        assert_relative_eq!(ev[2].re, -1e-9, max_relative = 1e-6);
    }

    #[test]
    fn complex_pair() {
        // rotation by 90 degrees in the plane + 0.5 on the axis
        let m = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5);
        let ev = eigenvalues(&m);
        assert_relative_eq!(ev[0].norm(), 1.0, max_relative = 1e-10);
        assert!(ev[0].im != 0.0 && ev[1].im != 0.0);
        assert_relative_eq!(ev[2].re, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn nonsymmetric_known_spectrum() {
        // companion matrix of (l-1)(l-2)(l-3)
        let m = Matrix3::new(0.0, 0.0, 6.0, 1.0, 0.0, -11.0, 0.0, 1.0, 6.0);
        let mut got: Vec<f64> = eigenvalues(&m).iter().map(|z| z.re).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*g, e, max_relative = 1e-8);
        }
    }

    #[test]
    fn similarity_transformed_spectrum() {
        // conjugate a wide-spectrum diagonal by a mild shear
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(-4e3, 0.7, 5e-4));
        let t = Matrix3::new(1.0, 0.3, 0.0, 0.2, 1.0, 0.1, 0.0, -0.4, 1.0);
        let m = t * d * t.try_inverse().unwrap();
        let ev = eigenvalues(&m);
        assert_relative_eq!(ev[0].re, -4e3, max_relative = 1e-8);
        assert_relative_eq!(ev[1].re, 0.7, max_relative = 1e-8);
        assert_relative_eq!(ev[2].re, 5e-4, max_relative = 1e-6);
    }
}
