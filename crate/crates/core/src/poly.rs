//! Polynomial rooting helpers shared by the MODE and root-MUSIC estimators.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Roots of `a*x^2 + b*x + c`, avoiding cancellation between `-b` and the
/// discriminant. The first root is `q / a`, the second `c / q`, where
/// `q = -(b + sqrt(b^2 - 4ac)) / 2` with the sign of the square root chosen
/// to add constructively to `b`.
///
/// Returns `None` when `a` is zero or both roots are undefined.
pub fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> Option<(Complex64, Complex64)> {
    if a == Complex64::new(0.0, 0.0) {
        return None;
    }
    let mut disc = (b * b - 4.0 * a * c).sqrt();
    if (b.conj() * disc).re < 0.0 {
        disc = -disc;
    }
    let q = -0.5 * (b + disc);
    if q == Complex64::new(0.0, 0.0) {
        // b = 0 and b^2 = 4ac force c = 0: double root at zero.
        return Some((q, q));
    }
    Some((q / a, c / q))
}

/// All roots of `coeffs[0] + coeffs[1] x + ... + coeffs[n] x^n` from the
/// eigenvalues of the companion matrix.
///
/// Leading coefficients that are exactly zero are dropped first, so the
/// number of returned roots is the actual degree.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let degree = coeffs.iter().rposition(|c| *c != zero)?;
    if degree == 0 {
        return Some(Vec::new());
    }
    let lead = coeffs[degree];
    let mut companion = DMatrix::<Complex64>::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -coeffs[degree - 1 - j] / lead;
    }
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let eig = Schur::new(companion).eigenvalues()?;
    let roots: Vec<Complex64> = eig.iter().copied().collect();
    roots.iter().all(|r| r.re.is_finite() && r.im.is_finite()).then_some(roots)
}

/// Evaluates the polynomial at `x` by Horner's rule.
pub fn eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}
