//! Two-tone MODE estimator: the tones are encoded as the roots of
//! `1 + c1 w + c2 w^2`, whose coefficient band annihilates the Doppler
//! manifold. The coefficients are found by alternating between building the
//! banded matrix `C` from the current estimate and solving a weighted least
//! squares problem in `c = [c1, c2]` with weight
//! `Gamma (x) (C C^H)^-1`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DopplerPair;
use crate::poly::quadratic_roots;
use crate::subspace::{SubspaceDecomposition, SIGNAL_DIM};

/// |c2| at or below this means one root has escaped to infinity.
pub const ROOT_EPS: f64 = 1e-12;

/// Coefficients of `1 + c1 w + c2 w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyCoeffs {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl PolyCoeffs {
    pub const fn new(c1: Complex64, c2: Complex64) -> Self {
        Self { c1, c2 }
    }

    /// Coefficients whose roots are exp(-j 2 pi mu Ts) for both tones.
    pub fn from_tones(mu_a: f64, mu_b: f64, symbol_period_s: f64) -> Self {
        let ea = Complex64::from_polar(1.0, TAU * mu_a * symbol_period_s);
        let eb = Complex64::from_polar(1.0, TAU * mu_b * symbol_period_s);
        Self { c1: -(ea + eb), c2: ea * eb }
    }

    pub fn norm(&self) -> f64 {
        (self.c1.norm_sqr() + self.c2.norm_sqr()).sqrt()
    }

    pub fn distance(&self, other: &PolyCoeffs) -> f64 {
        ((self.c1 - other.c1).norm_sqr() + (self.c2 - other.c2).norm_sqr()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        [self.c1, self.c2].iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn as_vector(&self) -> Vector2<Complex64> {
        Vector2::new(self.c1, self.c2)
    }
}

/// Starting point: one root at the coarse direct-link Doppler, the other at zero Doppler.
pub fn init_c(mu_coarse: f64, symbol_period_s: f64) -> PolyCoeffs {
    PolyCoeffs::from_tones(mu_coarse, 0.0, symbol_period_s)
}

/// (P-2) x P banded matrix whose rows are shifted copies of [1, c1, c2].
pub fn build_c_matrix(c: &PolyCoeffs, p: usize) -> DMatrix<Complex64> {
    assert!(p >= 3, "C matrix needs P >= 3");
    let mut m = DMatrix::<Complex64>::zeros(p - 2, p);
    for i in 0..p - 2 {
        m[(i, i)] = Complex64::new(1.0, 0.0);
        m[(i, i + 1)] = c.c1;
        m[(i, i + 2)] = c.c2;
    }
    m
}

/// Rearranges the signal subspace so that `vec(C G_s) = psi * c - q`.
///
/// Block j of `psi` holds rows `[g_{i+1,j}, g_{i+2,j}]` and block j of `q`
/// holds `-g_{i,j}`, for i = 0..P-2.
pub fn build_psi_q(g_s: &DMatrix<Complex64>) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let p = g_s.nrows();
    assert!(p >= 3, "signal subspace needs P >= 3 rows");
    let rows = p - 2;
    let cols = g_s.ncols();
    let mut psi = DMatrix::<Complex64>::zeros(cols * rows, 2);
    let mut q = DVector::<Complex64>::zeros(cols * rows);
    for j in 0..cols {
        for i in 0..rows {
            psi[(j * rows + i, 0)] = g_s[(i + 1, j)];
            psi[(j * rows + i, 1)] = g_s[(i + 2, j)];
            q[j * rows + i] = -g_s[(i, j)];
        }
    }
    (psi, q)
}

/// Cholesky factor of C C^H, with a small ridge on failure.
fn band_gram(c: &PolyCoeffs, p: usize) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let cm = build_c_matrix(c, p);
    let gram = &cm * cm.adjoint();
    if let Some(ch) = gram.clone().cholesky() {
        return Ok(ch);
    }
    let ridge = 1e-12 * gram.trace().re / (p - 2) as f64;
    let rows = gram.nrows();
    (gram + DMatrix::<Complex64>::identity(rows, rows) * Complex64::from(ridge))
        .cholesky()
        .ok_or_else(|| Error::EstimationFailure("C C^H is singular".into()))
}

/// Weighted residual `(psi c - q)^H W (psi c - q)` with the weight built from
/// `c_weight`.
pub fn wls_objective(
    psi: &DMatrix<Complex64>,
    q: &DVector<Complex64>,
    c_weight: &PolyCoeffs,
    gamma: &[f64; SIGNAL_DIM],
    c: &PolyCoeffs,
) -> Result<f64> {
    let rows = psi.nrows() / SIGNAL_DIM;
    let chol = band_gram(c_weight, rows + 2)?;
    let resid = psi * c.as_vector() - q;
    let mut total = 0.0;
    for (j, g) in gamma.iter().enumerate() {
        let r = resid.rows(j * rows, rows).into_owned();
        let wr = chol.solve(&r);
        total += g * r.dotc(&wr).re;
    }
    Ok(total)
}

/// One weighted least squares update with the weight evaluated at `c_prev`.
///
/// The weight is block diagonal, `gamma_j (C C^H)^-1` per subspace column,
/// so the 2x2 normal equations are accumulated block by block.
pub fn wls_step(
    psi: &DMatrix<Complex64>,
    q: &DVector<Complex64>,
    c_prev: &PolyCoeffs,
    gamma: &[f64; SIGNAL_DIM],
) -> Result<PolyCoeffs> {
    let rows = psi.nrows() / SIGNAL_DIM;
    let chol = band_gram(c_prev, rows + 2)?;
    let mut normal = Matrix2::<Complex64>::zeros();
    let mut rhs = Vector2::<Complex64>::zeros();
    for (j, &g) in gamma.iter().enumerate() {
        let psi_j = psi.rows(j * rows, rows).into_owned();
        let q_j = q.rows(j * rows, rows).into_owned();
        let w_psi = chol.solve(&psi_j);
        let w_q = chol.solve(&q_j);
        let g = Complex64::from(g);
        let n_j = psi_j.adjoint() * w_psi;
        let r_j = psi_j.adjoint() * w_q;
        normal += Matrix2::new(n_j[(0, 0)], n_j[(0, 1)], n_j[(1, 0)], n_j[(1, 1)]) * g;
        rhs += Vector2::new(r_j[0], r_j[1]) * g;
    }
    let sol = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::EstimationFailure("weighted normal equations are singular".into()))?;
    let c = PolyCoeffs::new(sol[0], sol[1]);
    if !c.is_finite() {
        return Err(Error::EstimationFailure("non-finite polynomial coefficients".into()));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeOptions {
    /// Stop once ||c_(t+1) - c_(t)|| falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeStatus {
    Converged,
    /// Ran out of iterations; the last iterate is still usable.
    MaxIterations,
    /// A step failed or produced non-finite coefficients.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeOutcome {
    pub coeffs: PolyCoeffs,
    /// D_t = ||c_(t+1) - c_(t)|| for every completed update.
    pub trace: Vec<f64>,
    pub status: ModeStatus,
}

impl ModeOutcome {
    pub fn converged(&self) -> bool {
        self.status == ModeStatus::Converged
    }
}

/// Alternates the banded-matrix update and the weighted least squares
/// solve, starting from `c0`.
pub fn mode_iterate(decomp: &SubspaceDecomposition, c0: PolyCoeffs, opts: &ModeOptions) -> ModeOutcome {
    let (psi, q) = build_psi_q(&decomp.signal_subspace);
    let mut c = c0;
    let mut trace = Vec::with_capacity(opts.max_iter);
    if !c.is_finite() {
        return ModeOutcome { coeffs: c, trace, status: ModeStatus::Diverged };
    }
    for _ in 0..opts.max_iter {
        let next = match wls_step(&psi, &q, &c, &decomp.gamma) {
            Ok(next) => next,
            Err(_) => return ModeOutcome { coeffs: c, trace, status: ModeStatus::Diverged },
        };
        let step = next.distance(&c);
        trace.push(step);
        c = next;
        if step < opts.tol {
            return ModeOutcome { coeffs: c, trace, status: ModeStatus::Converged };
        }
    }
    ModeOutcome { coeffs: c, trace, status: ModeStatus::MaxIterations }
}

/// Doppler whose Doppler-domain root is `omega = exp(-j 2 pi mu Ts)`,
/// wrapped to [-1/(2Ts), 1/(2Ts)).
pub fn root_to_frequency(omega: Complex64, symbol_period_s: f64) -> f64 {
    let nyquist = 0.5 / symbol_period_s;
    let mu = -omega.arg() / (TAU * symbol_period_s);
    if mu >= nyquist {
        mu - 2.0 * nyquist
    } else if mu < -nyquist {
        mu + 2.0 * nyquist
    } else {
        mu
    }
}

/// Roots of `1 + c1 w + c2 w^2` read out as Doppler frequencies. The first
/// returned tone comes from the larger-magnitude root of the numerically
/// stable quadratic formula, the second from the product relation.
pub fn roots_and_freqs(c: &PolyCoeffs, symbol_period_s: f64) -> Result<(f64, f64)> {
    if !(c.c2.norm() > ROOT_EPS) {
        return Err(Error::DegeneratePolynomial(format!("|c2| = {:e} too small", c.c2.norm())));
    }
    let (w1, w2) = quadratic_roots(c.c2, c.c1, Complex64::new(1.0, 0.0))
        .ok_or_else(|| Error::DegeneratePolynomial("no roots".into()))?;
    Ok((root_to_frequency(w1, symbol_period_s), root_to_frequency(w2, symbol_period_s)))
}

/// Assigns the tone closest to the coarse direct-link estimate to the direct
/// link; exact ties go to `mu1`.
pub fn match_tones(mu1: f64, mu2: f64, mu_coarse: f64) -> DopplerPair {
    if (mu1 - mu_coarse).abs() <= (mu2 - mu_coarse).abs() {
        DopplerPair::new(mu1, mu2)
    } else {
        DopplerPair::new(mu2, mu1)
    }
}
