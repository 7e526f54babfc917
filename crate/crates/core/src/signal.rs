//! Echo synthesis for the two pilot stages.
//!
//! The BS probes with `f = a(theta_tb)`. In stage one only the direct link is
//! present and the receiver combines with `w_d = a(theta_tb)`; in stage two
//! the IRS is on and the combiner `w_r = a(theta_tb) + a(theta_bi)` listens
//! toward both the target and the IRS. Array noise is CN(0, sigma^2/N) per
//! element and combiners are scaled by `sqrt(N) / ||w||`, which leaves the
//! combined noise at CN(0, sigma^2) for any combiner.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DopplerPair, SceneGeometry};
use crate::SPEED_OF_LIGHT;

/// Array sizes, waveform timing, noise and channel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// BS antennas, N.
    pub n_bs: usize,
    /// IRS elements, M.
    pub m_irs: usize,
    pub carrier_hz: f64,
    pub wavelength_m: f64,
    /// Element spacing of both arrays.
    pub spacing_m: f64,
    pub symbol_period_s: f64,
    pub n_pilots_stage1: usize,
    pub n_pilots_stage2: usize,
    /// Window length P used to stack stage-two snapshots.
    pub stack_dim: usize,
    /// Direct-link SNR, E|alpha_d|^2 / sigma_r^2.
    pub snr_db: f64,
    pub sigma_d_sq: f64,
    pub sigma_r_sq: f64,
    pub rician_factor_db: f64,
    pub n_nlos_paths: usize,
    /// |alpha_r| / |alpha_d|.
    pub irs_gain_ratio: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        let carrier_hz = 3e9;
        let wavelength_m = SPEED_OF_LIGHT / carrier_hz;
        Self {
            n_bs: 16,
            m_irs: 32,
            carrier_hz,
            wavelength_m,
            spacing_m: 0.5 * wavelength_m,
            symbol_period_s: 0.5e-3,
            n_pilots_stage1: 16,
            n_pilots_stage2: 16,
            stack_dim: 8,
            snr_db: 0.0,
            sigma_d_sq: 1.0,
            sigma_r_sq: 1.0,
            rician_factor_db: 13.2,
            n_nlos_paths: 3,
            irs_gain_ratio: 1.0,
        }
    }
}

impl SystemParams {
    /// Sets the SNR and both noise powers from it (|alpha_d| = 1).
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self.sigma_r_sq = 10f64.powf(-snr_db / 10.0);
        self.sigma_d_sq = self.sigma_r_sq;
        self
    }

    /// Sets the carrier and re-derives wavelength and half-wavelength spacing.
    pub fn with_carrier_hz(mut self, carrier_hz: f64) -> Self {
        self.carrier_hz = carrier_hz;
        self.wavelength_m = SPEED_OF_LIGHT / carrier_hz;
        self.spacing_m = 0.5 * self.wavelength_m;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.sigma_d_sq = 0.0;
        self.sigma_r_sq = 0.0;
        self
    }

    pub fn rician_factor_linear(&self) -> f64 {
        10f64.powf(self.rician_factor_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_bs == 0 || self.m_irs == 0 {
            return fail("n_bs and m_irs must be at least 1".into());
        }
        if !(self.symbol_period_s > 0.0) || !(self.spacing_m > 0.0) || !(self.wavelength_m > 0.0) {
            return fail("symbol period, spacing and wavelength must be positive".into());
        }
        if self.n_pilots_stage1 < 2 {
            return fail(format!("n_pilots_stage1 = {} must be >= 2", self.n_pilots_stage1));
        }
        if self.stack_dim < 3 || self.stack_dim > self.n_pilots_stage2 {
            return fail(format!(
                "stack_dim = {} must satisfy 3 <= P <= n_pilots_stage2 = {}",
                self.stack_dim, self.n_pilots_stage2
            ));
        }
        if !(self.sigma_d_sq >= 0.0) || !(self.sigma_r_sq >= 0.0) {
            return fail("noise powers must be non-negative".into());
        }
        if !(self.irs_gain_ratio >= 0.0) || !self.rician_factor_db.is_finite() {
            return fail("irs_gain_ratio must be >= 0 and rician_factor_db finite".into());
        }
        Ok(())
    }
}

/// One draw of the BS-IRS channel, the IRS configuration and the target gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// N x M BS-IRS channel.
    pub g_matrix: DMatrix<Complex64>,
    /// Diagonal of the IRS phase-shift matrix, unit modulus.
    pub psi_phases: Vec<Complex64>,
    pub alpha_d: Complex64,
    pub alpha_r: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// IRS off, direct link only.
    DirectOnly,
    /// IRS on, both links.
    Combined,
}

/// Combined receiver outputs over one pilot block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSet {
    pub values: Vec<Complex64>,
    pub stage: Stage,
    pub symbol_period_s: f64,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn unit(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// ULA response with entries exp(j 2 pi d i cos(theta) / lambda).
pub fn steering(theta: f64, n: usize, spacing_m: f64, wavelength_m: f64) -> DVector<Complex64> {
    let step = TAU * spacing_m * theta.cos() / wavelength_m;
    DVector::from_iterator(n, (0..n).map(|i| unit(step * i as f64)))
}

/// BS array steering vector a(theta).
pub fn steering_bs(theta: f64, n: usize, spacing_m: f64, wavelength_m: f64) -> DVector<Complex64> {
    steering(theta, n, spacing_m, wavelength_m)
}

/// IRS response vector b(theta); same form as the BS array.
pub fn steering_irs(theta: f64, m: usize, spacing_m: f64, wavelength_m: f64) -> DVector<Complex64> {
    steering(theta, m, spacing_m, wavelength_m)
}

/// Doppler-domain steering vector with entries exp(-j 2 pi mu k Ts).
pub fn doppler_steering(mu: f64, length: usize, symbol_period_s: f64) -> DVector<Complex64> {
    let step = -TAU * mu * symbol_period_s;
    DVector::from_iterator(length, (0..length).map(|k| unit(step * k as f64)))
}

/// IRS phases steering the BS-facing side toward the target: the cascaded
/// line-of-sight gain b(theta_ib)^H diag(psi) b(theta_it) equals M.
pub fn phase_shifter(theta_it: f64, theta_ib: f64, m: usize, spacing_m: f64, wavelength_m: f64) -> Vec<Complex64> {
    let toward_target = steering_irs(theta_it, m, spacing_m, wavelength_m);
    let toward_bs = steering_irs(theta_ib, m, spacing_m, wavelength_m);
    toward_bs.iter().zip(toward_target.iter()).map(|(b, t)| b * t.conj()).collect()
}

/// Standard circularly-symmetric complex Gaussian, unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws the Rician BS-IRS channel, the target gains and the IRS phases.
///
/// `G = sqrt(K/(K+1)) a(theta_bi) b(theta_ib)^H
///    + sqrt(1/(K+1)) / sqrt(Np) * sum_p gamma_p a(phi_p) b(psi_p)^H`
/// with gamma_p ~ CN(0, 1) and angles uniform on [-pi/2, pi/2]. With no
/// scattered paths the channel is the bare line-of-sight outer product.
pub fn gen_channel<R: Rng + ?Sized>(params: &SystemParams, scene: &SceneGeometry, rng: &mut R) -> ChannelRealization {
    let (n, m, d, lambda) = (params.n_bs, params.m_irs, params.spacing_m, params.wavelength_m);

    let alpha_d = unit(rng.gen_range(0.0..TAU));
    let alpha_r = params.irs_gain_ratio * unit(rng.gen_range(0.0..TAU));

    let los = steering_bs(scene.theta_bi, n, d, lambda) * steering_irs(scene.theta_ib, m, d, lambda).adjoint();
    let g_matrix = if params.n_nlos_paths == 0 {
        los
    } else {
        let k = params.rician_factor_linear();
        let mut scatter = DMatrix::<Complex64>::zeros(n, m);
        for _ in 0..params.n_nlos_paths {
            let gain = complex_gaussian(rng);
            let aoa = rng.gen_range(-PI / 2.0..=PI / 2.0);
            let aod = rng.gen_range(-PI / 2.0..=PI / 2.0);
            scatter += steering_bs(aoa, n, d, lambda) * steering_irs(aod, m, d, lambda).adjoint() * gain;
        }
        let los_w = (k / (k + 1.0)).sqrt();
        let nlos_w = (1.0 / (k + 1.0)).sqrt() / (params.n_nlos_paths as f64).sqrt();
        los * Complex64::from(los_w) + scatter * Complex64::from(nlos_w)
    };

    ChannelRealization {
        g_matrix,
        psi_phases: phase_shifter(scene.theta_it, scene.theta_ib, m, d, lambda),
        alpha_d,
        alpha_r,
    }
}

/// Stage-one combiner, a(theta_tb).
pub fn combiner_stage1(params: &SystemParams, scene: &SceneGeometry) -> DVector<Complex64> {
    steering_bs(scene.theta_tb, params.n_bs, params.spacing_m, params.wavelength_m)
}

/// Stage-two combiner, a(theta_tb) + a(theta_bi).
pub fn combiner_stage2(params: &SystemParams, scene: &SceneGeometry) -> DVector<Complex64> {
    let (n, d, l) = (params.n_bs, params.spacing_m, params.wavelength_m);
    steering_bs(scene.theta_tb, n, d, l) + steering_bs(scene.theta_bi, n, d, l)
}

/// Applies combiner `w` to an array snapshot: sqrt(N)/||w|| * w^H y.
pub fn combine(w: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    let scale = (w.len() as f64).sqrt() / w.norm();
    w.dotc(y) * scale
}

/// Complex amplitude of the direct-link tone after the stage-one combiner.
pub fn stage1_gain(params: &SystemParams, scene: &SceneGeometry, channel: &ChannelRealization) -> Complex64 {
    let a_tb = steering_bs(scene.theta_tb, params.n_bs, params.spacing_m, params.wavelength_m);
    let w = combiner_stage1(params, scene);
    // a^H(theta_tb) f = N since f = a(theta_tb)
    let tx = Complex64::from(params.n_bs as f64);
    channel.alpha_d * combine(&w, &a_tb) * tx
}

/// Complex amplitudes (direct, IRS) of the two tones after the stage-two combiner.
pub fn stage2_gains(params: &SystemParams, scene: &SceneGeometry, channel: &ChannelRealization) -> (Complex64, Complex64) {
    let (n, m, d, l) = (params.n_bs, params.m_irs, params.spacing_m, params.wavelength_m);
    let a_tb = steering_bs(scene.theta_tb, n, d, l);
    let b_it = steering_irs(scene.theta_it, m, d, l);
    let w = combiner_stage2(params, scene);
    let tx = Complex64::from(n as f64);
    let reflected = DVector::from_iterator(m, channel.psi_phases.iter().zip(b_it.iter()).map(|(p, b)| p * b));
    let irs_path = &channel.g_matrix * reflected;
    (channel.alpha_d * combine(&w, &a_tb) * tx, channel.alpha_r * combine(&w, &irs_path) * tx)
}

fn tone(amplitude: Complex64, mu: f64, k: usize, ts: f64) -> Complex64 {
    amplitude * unit(TAU * mu * k as f64 * ts)
}

fn add_noise<R: Rng + ?Sized>(values: &mut [Complex64], sigma_sq: f64, rng: &mut R) {
    let sigma = sigma_sq.sqrt();
    // Always consume the draws so noise realizations line up across SNRs.
    for v in values.iter_mut() {
        *v += complex_gaussian(rng) * sigma;
    }
}

/// Stage-one snapshots: z_k = beta_d exp(j 2 pi mu_d k Ts) + n_k, k = 0..N_d.
pub fn synth_stage1<R: Rng + ?Sized>(
    params: &SystemParams,
    scene: &SceneGeometry,
    channel: &ChannelRealization,
    mu_d: f64,
    rng: &mut R,
) -> Result<SnapshotSet> {
    DopplerPair::new(mu_d, 0.0).check_unambiguous(params.symbol_period_s)?;
    let ts = params.symbol_period_s;
    let beta = stage1_gain(params, scene, channel);
    let mut values: Vec<Complex64> = (0..params.n_pilots_stage1).map(|k| tone(beta, mu_d, k, ts)).collect();
    add_noise(&mut values, params.sigma_d_sq, rng);
    Ok(SnapshotSet { values, stage: Stage::DirectOnly, symbol_period_s: ts })
}

/// Stage-two snapshots: the direct-link and IRS-link tones seen through the
/// stage-two combiner, plus CN(0, sigma_r^2) noise.
pub fn synth_stage2<R: Rng + ?Sized>(
    params: &SystemParams,
    scene: &SceneGeometry,
    channel: &ChannelRealization,
    mu: DopplerPair,
    rng: &mut R,
) -> Result<SnapshotSet> {
    mu.check_unambiguous(params.symbol_period_s)?;
    let ts = params.symbol_period_s;
    let (beta_d, beta_r) = stage2_gains(params, scene, channel);
    let mut values: Vec<Complex64> = (0..params.n_pilots_stage2)
        .map(|k| tone(beta_d, mu.mu_d, k, ts) + tone(beta_r, mu.mu_r, k, ts))
        .collect();
    add_noise(&mut values, params.sigma_r_sq, rng);
    Ok(SnapshotSet { values, stage: Stage::Combined, symbol_period_s: ts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scene() -> SceneGeometry {
        SceneGeometry::from_angles(Point::new(0.0, 0.0), Point::new(20.0, 0.0), 30f64.to_radians(), 120f64.to_radians())
            .unwrap()
    }

    #[test]
    fn steering_examples() {
        let broadside = steering_bs(PI / 2.0, 8, 0.05, 0.1);
        assert!(broadside.iter().all(|e| (e - c(1.0, 0.0)).norm() < 1e-14));
        let v = steering_bs(60f64.to_radians(), 4, 0.05, 0.1);
        for (got, want) in v.iter().zip([c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]) {
            assert!((got - want).norm() < 1e-12);
        }
        let w = steering_irs(1.234, 13, 0.05, 0.1);
        assert_eq!(w[0], c(1.0, 0.0));
        assert!(w.iter().all(|e| (e.norm() - 1.0).abs() < 1e-14));
        assert_eq!(steering_irs(0.4, 1, 0.05, 0.1).as_slice(), &[c(1.0, 0.0)]);
        assert_eq!(steering_irs(0.4, 6, 0.05, 0.1), steering_bs(0.4, 6, 0.05, 0.1));
    }

    #[test]
    fn doppler_steering_examples() {
        assert!(doppler_steering(0.0, 5, 1e-3).iter().all(|e| *e == c(1.0, 0.0)));
        let a = doppler_steering(123.4, 9, 0.5e-3);
        let b = doppler_steering(-123.4, 9, 0.5e-3);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x.conj() - y).norm() < 1e-15);
        }
        let q = doppler_steering(1.0 / (4.0 * 0.5e-3), 4, 0.5e-3);
        for (got, want) in q.iter().zip([c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)]) {
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_shifter_cascade_gain() {
        let ones = phase_shifter(PI / 2.0, PI / 2.0, 7, 0.05, 0.1);
        assert!(ones.iter().all(|p| (p - c(1.0, 0.0)).norm() < 1e-15));
        for (it, ib, m) in [(2.0, PI, 32usize), (0.3, -1.1, 5), (1.0, 2.0, 1)] {
            let psi = phase_shifter(it, ib, m, 0.05, 0.1);
            assert!(psi.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
            let b_ib = steering_irs(ib, m, 0.05, 0.1);
            let b_it = steering_irs(it, m, 0.05, 0.1);
            let gain: Complex64 = (0..m).map(|i| b_ib[i].conj() * psi[i] * b_it[i]).sum();
            assert!((gain - c(m as f64, 0.0)).norm() < 1e-12 * m as f64);
        }
    }

    #[test]
    fn pure_los_channel() {
        let p = SystemParams { n_nlos_paths: 0, ..SystemParams::default() };
        let s = scene();
        let ch = gen_channel(&p, &s, &mut ChaCha8Rng::seed_from_u64(1));
        let los = steering_bs(s.theta_bi, p.n_bs, p.spacing_m, p.wavelength_m)
            * steering_irs(s.theta_ib, p.m_irs, p.spacing_m, p.wavelength_m).adjoint();
        assert!((&ch.g_matrix - &los).norm() < 1e-12);
        assert!((ch.alpha_d.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn huge_rician_factor_approaches_los() {
        let p = SystemParams { rician_factor_db: 200.0, ..SystemParams::default() };
        let s = scene();
        let ch = gen_channel(&p, &s, &mut ChaCha8Rng::seed_from_u64(2));
        let los = steering_bs(s.theta_bi, p.n_bs, p.spacing_m, p.wavelength_m)
            * steering_irs(s.theta_ib, p.m_irs, p.spacing_m, p.wavelength_m).adjoint();
        assert!((&ch.g_matrix - &los).norm() / los.norm() < 1e-6);
    }

    #[test]
    fn channel_power_normalization() {
        let p = SystemParams::default();
        let s = scene();
        let los = steering_bs(s.theta_bi, p.n_bs, p.spacing_m, p.wavelength_m)
            * steering_irs(s.theta_ib, p.m_irs, p.spacing_m, p.wavelength_m).adjoint();
        let k = p.rician_factor_linear();
        let los_part = los * Complex64::from((k / (k + 1.0)).sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 10_000;
        let (mut total, mut scatter) = (0.0, 0.0);
        for _ in 0..trials {
            let g = gen_channel(&p, &s, &mut rng).g_matrix;
            total += g.norm_squared();
            scatter += (g - &los_part).norm_squared();
        }
        let nm = (p.n_bs * p.m_irs) as f64;
        let mean_total = total / trials as f64;
        assert!((mean_total / nm - 1.0).abs() < 0.02, "E||G||^2 / NM = {}", mean_total / nm);
        let frac = scatter / total;
        assert!((frac * (k + 1.0) - 1.0).abs() < 0.03, "nlos fraction {frac}");
        assert_relative_eq!(1.0 / (k + 1.0), 0.0457, epsilon = 2e-4);
    }

    #[test]
    fn stage1_noiseless_structure() {
        let p = SystemParams::default().noiseless();
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = gen_channel(&p, &s, &mut rng);
        let mu = 692.820_323;
        let z = synth_stage1(&p, &s, &ch, mu, &mut rng).unwrap();
        assert_eq!(z.len(), p.n_pilots_stage1);
        let beta = ch.alpha_d * (p.n_bs * p.n_bs) as f64;
        assert!((z.values[0] - beta).norm() < 1e-10 * beta.norm());
        assert!(z.values.iter().all(|v| (v.norm() - beta.norm()).abs() < 1e-9 * beta.norm()));
        let step = (z.values[1] / z.values[0]).arg();
        let want = (TAU * mu * p.symbol_period_s + PI).rem_euclid(TAU) - PI;
        assert_relative_eq!(step, want, epsilon = 1e-9);
        assert_relative_eq!(mu * p.symbol_period_s, 0.346_410, epsilon = 1e-6);
    }

    #[test]
    fn aliasing_rejected() {
        let p = SystemParams::default();
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = gen_channel(&p, &s, &mut rng);
        assert!(matches!(synth_stage1(&p, &s, &ch, 1000.0, &mut rng), Err(Error::Config(_))));
        assert!(synth_stage2(&p, &s, &ch, DopplerPair::new(10.0, -1000.0), &mut rng).is_err());
    }

    /// Matrix-level evaluation of the stage-two echo: array snapshot built from
    /// the full channel and diag(psi), then combined.
    fn stage2_by_matrices(p: &SystemParams, s: &SceneGeometry, ch: &ChannelRealization, mu: DopplerPair) -> Vec<Complex64> {
        let (n, m, d, l) = (p.n_bs, p.m_irs, p.spacing_m, p.wavelength_m);
        let a_tb = steering_bs(s.theta_tb, n, d, l);
        let f = a_tb.clone();
        let b_it = steering_irs(s.theta_it, m, d, l);
        let psi = DMatrix::from_diagonal(&DVector::from_vec(ch.psi_phases.clone()));
        let w = combiner_stage2(p, s);
        let direct = &a_tb * a_tb.adjoint() * &f;
        let irs = &ch.g_matrix * psi * &b_it * a_tb.adjoint() * &f;
        (0..p.n_pilots_stage2)
            .map(|k| {
                let t = (k as f64) * p.symbol_period_s;
                let y = &direct * (ch.alpha_d * unit(TAU * mu.mu_d * t)) + &irs * (ch.alpha_r * unit(TAU * mu.mu_r * t));
                w.dotc(&y) * ((n as f64).sqrt() / w.norm())
            })
            .collect()
    }

    #[test]
    fn stage2_matches_matrix_pipeline() {
        let p = SystemParams::default().noiseless();
        let s = scene();
        let mu = DopplerPair::new(692.820_323, 546.410_161);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = gen_channel(&p, &s, &mut rng);
            let fast = synth_stage2(&p, &s, &ch, mu, &mut rng).unwrap();
            let slow = stage2_by_matrices(&p, &s, &ch, mu);
            for (a, b) in fast.values.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-10 * b.norm(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn stage2_special_cases() {
        let s = scene();
        let p = SystemParams::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = gen_channel(&p, &s, &mut rng);
        let (bd, br) = stage2_gains(&p, &s, &ch);
        let z = synth_stage2(&p, &s, &ch, DopplerPair::new(100.0, 100.0), &mut rng).unwrap();
        assert!(z.values.iter().all(|v| (v.norm() - (bd + br).norm()).abs() < 1e-9 * (bd + br).norm()));

        let off = SystemParams { irs_gain_ratio: 0.0, ..p.clone() };
        let ch_off = gen_channel(&off, &s, &mut rng);
        let (bd, br) = stage2_gains(&off, &s, &ch_off);
        assert_eq!(br, c(0.0, 0.0));
        let z = synth_stage2(&off, &s, &ch_off, DopplerPair::new(200.0, -300.0), &mut rng).unwrap();
        for (k, v) in z.values.iter().enumerate() {
            assert!((v - tone(bd, 200.0, k, off.symbol_period_s)).norm() < 1e-9 * bd.norm());
        }
    }

    #[test]
    fn combined_noise_variance() {
        // Full array noise CN(0, sigma^2/N I) through the scaled combiner.
        let p = SystemParams::default().with_snr_db(3.0);
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for w in [combiner_stage1(&p, &s), combiner_stage2(&p, &s)] {
            let draws = 100_000;
            let per_element = (p.sigma_r_sq / p.n_bs as f64).sqrt();
            let mut acc = 0.0;
            for _ in 0..draws {
                let noise = DVector::from_iterator(p.n_bs, (0..p.n_bs).map(|_| complex_gaussian(&mut rng) * per_element));
                acc += combine(&w, &noise).norm_sqr();
            }
            let var = acc / draws as f64;
            assert!((var / p.sigma_r_sq - 1.0).abs() < 0.02, "variance ratio {}", var / p.sigma_r_sq);
        }
        // Scalar fast path draws CN(0, sigma^2) directly.
        let mut v = vec![c(0.0, 0.0); 100_000];
        add_noise(&mut v, p.sigma_d_sq, &mut rng);
        let var = v.iter().map(|x| x.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((var / p.sigma_d_sq - 1.0).abs() < 0.02);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let p = SystemParams::default();
        let s = scene();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let ch = gen_channel(&p, &s, &mut rng);
            synth_stage2(&p, &s, &ch, DopplerPair::new(10.0, 20.0), &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::default().validate().is_ok());
        assert!(SystemParams { stack_dim: 2, ..SystemParams::default() }.validate().is_err());
        assert!(SystemParams { stack_dim: 17, ..SystemParams::default() }.validate().is_err());
        assert!(SystemParams { n_bs: 0, ..SystemParams::default() }.validate().is_err());
        let p = SystemParams::default().with_snr_db(-10.0);
        assert_relative_eq!(p.sigma_r_sq, 10.0, max_relative = 1e-12);
    }
}
