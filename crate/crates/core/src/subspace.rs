//! Hankel stacking of stage-two snapshots, the sample covariance and its
//! signal/noise subspace split.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::SnapshotSet;

/// Number of tones carried by the stage-two snapshots.
pub const SIGNAL_DIM: usize = 2;

/// Windows `[z_k, z_{k-1}, ..., z_{k-P+1}]` for k = P-1 .. N_r-1 (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSnapshots {
    vectors: Vec<DVector<Complex64>>,
    window: usize,
}

impl StackedSnapshots {
    pub fn vectors(&self) -> &[DVector<Complex64>] {
        &self.vectors
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn stack(z_r: &SnapshotSet, p: usize) -> Result<StackedSnapshots> {
    let n = z_r.len();
    if p < 3 || p > n {
        return Err(Error::Config(format!("stack dimension P = {p} must satisfy 3 <= P <= {n}")));
    }
    let vectors = (p - 1..n)
        .map(|k| DVector::from_iterator(p, (0..p).map(|i| z_r.values[k - i])))
        .collect();
    Ok(StackedSnapshots { vectors, window: p })
}

/// Average of the outer products of the stacked vectors.
pub fn sample_covariance(s: &StackedSnapshots) -> Result<DMatrix<Complex64>> {
    if s.is_empty() {
        return Err(Error::Input("no stacked snapshots".into()));
    }
    let p = s.window;
    let mut r = DMatrix::<Complex64>::zeros(p, p);
    for z in &s.vectors {
        r += z * z.adjoint();
    }
    r /= Complex64::from(s.len() as f64);
    // Exact Hermitian symmetry regardless of rounding in the outer products.
    let r = (&r + r.adjoint()) * Complex64::from(0.5);
    Ok(r)
}

/// Eigen-structure of a sample covariance split into the two-tone signal
/// subspace and the noise subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceDecomposition {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// P x 2, eigenvectors of the two largest eigenvalues.
    pub signal_subspace: DMatrix<Complex64>,
    /// P x (P-2).
    pub noise_subspace: DMatrix<Complex64>,
    /// Mean of the P-2 smallest eigenvalues.
    pub noise_power: f64,
    /// lambda_j^-1 (lambda_j - noise_power)^2 for the two signal eigenvalues.
    pub gamma: [f64; SIGNAL_DIM],
}

impl SubspaceDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

pub fn decompose(r_hat: &DMatrix<Complex64>) -> Result<SubspaceDecomposition> {
    let p = r_hat.nrows();
    if p != r_hat.ncols() || p < SIGNAL_DIM + 1 {
        return Err(Error::Input(format!("covariance must be square with P >= 3, got {}x{}", p, r_hat.ncols())));
    }
    let scale = r_hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return Err(Error::Input("covariance contains non-finite entries".into()));
    }
    let skew = (r_hat - r_hat.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if skew > 1e-8 * scale.max(1.0) {
        return Err(Error::Input(format!("covariance is not Hermitian (max |R - R^H| = {skew:e})")));
    }
    let hermitian = (r_hat + r_hat.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(hermitian);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let column = |i: usize| eig.eigenvectors.column(order[i]).into_owned();
    let signal_subspace = DMatrix::from_columns(&(0..SIGNAL_DIM).map(column).collect::<Vec<_>>());
    let noise_subspace = DMatrix::from_columns(&(SIGNAL_DIM..p).map(column).collect::<Vec<_>>());

    let noise_power = eigenvalues[SIGNAL_DIM..].iter().sum::<f64>() / (p - SIGNAL_DIM) as f64;
    let mut gamma = [0.0; SIGNAL_DIM];
    for (g, &lambda) in gamma.iter_mut().zip(&eigenvalues) {
        *g = if lambda > 0.0 { (lambda - noise_power).powi(2) / lambda } else { 0.0 };
    }

    Ok(SubspaceDecomposition { eigenvalues, signal_subspace, noise_subspace, noise_power, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{doppler_steering, Stage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    const TS: f64 = 0.5e-3;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tones(spec: &[(f64, Complex64)], n: usize) -> SnapshotSet {
        let values = (0..n)
            .map(|k| spec.iter().map(|(mu, b)| b * Complex64::from_polar(1.0, TAU * mu * k as f64 * TS)).sum())
            .collect();
        SnapshotSet { values, stage: Stage::Combined, symbol_period_s: TS }
    }

    #[test]
    fn stack_layout() {
        let z = SnapshotSet { values: (0..16).map(|i| c(i as f64, 0.0)).collect(), stage: Stage::Combined, symbol_period_s: TS };
        let s = stack(&z, 8).unwrap();
        assert_eq!(s.len(), 9);
        for (j, v) in s.vectors().iter().enumerate() {
            let k = j + 7;
            for p in 0..8 {
                assert_eq!(v[p], z.values[k - p]);
            }
        }
        assert_eq!(stack(&z, 16).unwrap().len(), 1);
        assert!(stack(&z, 2).is_err());
        assert!(stack(&z, 17).is_err());
    }

    #[test]
    fn stacked_single_tone_is_scaled_doppler_steering() {
        let (mu, beta) = (321.0, c(1.5, -0.5));
        let z = tones(&[(mu, beta)], 16);
        let s = stack(&z, 6).unwrap();
        let a = doppler_steering(mu, 6, TS);
        for (j, v) in s.vectors().iter().enumerate() {
            let k = j + 5;
            let expect = &a * (beta * Complex64::from_polar(1.0, TAU * mu * k as f64 * TS));
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn covariance_of_single_vector_and_single_tone() {
        let z = SnapshotSet { values: vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0)], stage: Stage::Combined, symbol_period_s: TS };
        let s = stack(&z, 3).unwrap();
        let r = sample_covariance(&s).unwrap();
        let v = &s.vectors()[0];
        assert!((&r - v * v.adjoint()).norm() < 1e-15);
        assert_eq!(r, r.adjoint());

        let beta = c(2.0, 1.0);
        let r = sample_covariance(&stack(&tones(&[(150.0, beta)], 16), 8).unwrap()).unwrap();
        let d = decompose(&r).unwrap();
        assert!((d.eigenvalues[0] - 8.0 * beta.norm_sqr()).abs() < 1e-10 * d.eigenvalues[0]);
        assert!(d.eigenvalues[1..].iter().all(|l| l.abs() < 1e-10 * d.eigenvalues[0]));
    }

    #[test]
    fn identity_decomposition() {
        let d = decompose(&DMatrix::<Complex64>::identity(5, 5)).unwrap();
        assert!(d.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-14));
        assert!((d.noise_power - 1.0).abs() < 1e-14);
        assert!(d.gamma.iter().all(|g| g.abs() < 1e-14));
        assert_eq!(d.noise_subspace.ncols(), 3);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::<Complex64>::identity(4, 4);
        m[(0, 1)] = c(0.0, 1.0);
        assert!(matches!(decompose(&m), Err(Error::Input(_))));
    }

    #[test]
    fn random_matrix_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [3usize, 5, 8, 12] {
            let x = DMatrix::<Complex64>::from_fn(p, 2 * p, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let r = &x * x.adjoint();
            let d = decompose(&r).unwrap();
            assert!(d.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let mut basis = d.signal_subspace.clone().resize_horizontally(p, c(0.0, 0.0));
            basis.columns_mut(2, p - 2).copy_from(&d.noise_subspace);
            let gram = basis.adjoint() * &basis;
            assert!((gram - DMatrix::identity(p, p)).norm() < 1e-10);
            let mut rec = DMatrix::<Complex64>::zeros(p, p);
            for i in 0..p {
                let g = basis.column(i);
                rec += g * g.adjoint() * Complex64::from(d.eigenvalues[i]);
            }
            assert!((rec - &r).norm() / r.norm() < 1e-10);
            assert!(d.gamma.iter().all(|g| *g >= 0.0));
        }
    }

    #[test]
    fn noiseless_two_tones_span_the_doppler_manifold() {
        let (mu_d, mu_r) = (692.82, 546.41);
        let z = tones(&[(mu_d, c(180.0, 20.0)), (mu_r, c(-2000.0, 7000.0))], 16);
        let d = decompose(&sample_covariance(&stack(&z, 8).unwrap()).unwrap()).unwrap();
        let top = d.eigenvalues[0];
        assert!(d.eigenvalues[2..].iter().all(|l| l.abs() < 1e-10 * top));
        assert!(d.noise_power.abs() < 1e-10 * top);
        let gs = &d.signal_subspace;
        let proj = gs * gs.adjoint();
        for mu in [mu_d, mu_r] {
            let a = doppler_steering(mu, 8, TS);
            assert!((&a - &proj * &a).norm() < 1e-8);
        }
    }
}
