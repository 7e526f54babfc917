//! Gridless subspace baselines on the same decomposition MODE uses.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mode::root_to_frequency;
use crate::poly::{polynomial_roots, quadratic_roots};
use crate::subspace::{SubspaceDecomposition, SIGNAL_DIM};

/// Root-MUSIC.
///
/// With `a(w) = [1, w, ..., w^(P-1)]` and `E = G_N G_N^H`, the null spectrum
/// `a(w)^H E a(w)` on the unit circle equals `sum_m e_m w^m`, where `e_m` is
/// the sum of the m-th diagonal of `E`. Its roots come in conjugate
/// reciprocal pairs `(w, 1/w*)`; the two pairs closest to the unit circle give
/// the tones. Each pair is mapped inside the circle and averaged, which keeps
/// the phase of the inside root while staying well conditioned when the pair
/// collapses onto the circle.
pub fn root_music(decomp: &SubspaceDecomposition, symbol_period_s: f64) -> Result<(f64, f64)> {
    let p = decomp.dim();
    if p < SIGNAL_DIM + 1 {
        return Err(Error::Input("root-MUSIC needs P >= 3".into()));
    }
    let gn = &decomp.noise_subspace;
    let e = gn * gn.adjoint();
    // coeffs[k] multiplies w^k after scaling by w^(P-1); k = m + P - 1.
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * p - 1];
    for m in -(p as isize - 1)..=(p as isize - 1) {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..p as isize {
            let l = i + m;
            if (0..p as isize).contains(&l) {
                s += e[(i as usize, l as usize)];
            }
        }
        coeffs[(m + p as isize - 1) as usize] = s;
    }
    let roots = polynomial_roots(&coeffs).ok_or_else(|| Error::EstimationFailure("root-MUSIC rooting failed".into()))?;
    let reps = reciprocal_pairs(&roots);
    if reps.len() < SIGNAL_DIM {
        return Err(Error::EstimationFailure(format!("root-MUSIC found {} admissible roots", reps.len())));
    }
    Ok((root_to_frequency(reps[0], symbol_period_s), root_to_frequency(reps[1], symbol_period_s)))
}

/// Groups roots into conjugate reciprocal pairs and returns one inside-circle
/// representative per pair, sorted by closeness to the unit circle.
fn reciprocal_pairs(roots: &[Complex64]) -> Vec<Complex64> {
    let inside = |z: Complex64| if z.norm() <= 1.0 { z } else { 1.0 / z.conj() };
    let reps: Vec<Complex64> = roots.iter().copied().filter(|z| z.norm() > 0.0).map(inside).collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            candidates.push(((reps[i] - reps[j]).norm(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used = vec![false; reps.len()];
    let mut paired = Vec::new();
    for (_, i, j) in candidates {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            paired.push(0.5 * (reps[i] + reps[j]));
        }
    }
    paired.sort_by(|a, b| (1.0 - a.norm()).abs().total_cmp(&(1.0 - b.norm()).abs()));
    paired
}

/// Least-squares ESPRIT on the signal subspace.
///
/// Consecutive rows of the Doppler manifold differ by `exp(-j 2 pi mu Ts)`,
/// so rows 1..P of `G_s` equal rows 0..P-1 times a 2x2 matrix whose
/// eigenvalues are those roots.
pub fn esprit(decomp: &SubspaceDecomposition, symbol_period_s: f64) -> Result<(f64, f64)> {
    let gs = &decomp.signal_subspace;
    let p = gs.nrows();
    if p < SIGNAL_DIM + 1 {
        return Err(Error::Input("ESPRIT needs P >= 3".into()));
    }
    let upper: DMatrix<Complex64> = gs.rows(0, p - 1).into_owned();
    let lower: DMatrix<Complex64> = gs.rows(1, p - 1).into_owned();
    let svd = upper.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::EstimationFailure("ESPRIT subspace block is rank deficient".into()));
    }
    let rotation = svd
        .solve(&lower, 0.0)
        .map_err(|e| Error::EstimationFailure(format!("ESPRIT least squares failed: {e}")))?;
    // Eigenvalues of the 2x2 rotation: x^2 - tr x + det = 0.
    let tr = rotation[(0, 0)] + rotation[(1, 1)];
    let det = rotation[(0, 0)] * rotation[(1, 1)] - rotation[(0, 1)] * rotation[(1, 0)];
    let (w1, w2) = quadratic_roots(Complex64::new(1.0, 0.0), -tr, det)
        .ok_or_else(|| Error::EstimationFailure("ESPRIT eigenvalues undefined".into()))?;
    if [w1, w2].iter().any(|w| !(w.norm() > 0.0) || !w.re.is_finite() || !w.im.is_finite()) {
        return Err(Error::EstimationFailure("ESPRIT produced a degenerate rotation".into()));
    }
    Ok((root_to_frequency(w1, symbol_period_s), root_to_frequency(w2, symbol_period_s)))
}
