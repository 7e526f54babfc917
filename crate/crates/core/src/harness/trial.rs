use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::baselines::{esprit, root_music};
use crate::coarse::{coarse_estimate, refine_peak, CoarseGrid};
use crate::error::{Error, Result};
use crate::geometry::{forward_dopplers, radial_velocity_no_irs, recover_velocity, DopplerPair, VelocityVector};
use crate::mode::{init_c, match_tones, mode_iterate, roots_and_freqs, ModeStatus, PolyCoeffs};
use crate::signal::{gen_channel, synth_stage1, synth_stage2};
use crate::subspace::{decompose, sample_covariance, stack};

/// Outcome of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial_index: u64,
    pub method: Method,
    pub true_dopplers: DopplerPair,
    pub true_velocity: VelocityVector,
    /// Stage-one grid estimate of the direct-link Doppler.
    pub coarse_mu: f64,
    pub refined: Option<DopplerPair>,
    /// Direct-link Doppler refined from stage one alone (no-IRS method only).
    pub radial_mu_d: Option<f64>,
    pub velocity: Option<VelocityVector>,
    /// MODE step sizes ||c_(t+1) - c_(t)||; empty for the other methods.
    pub d_trace: Vec<f64>,
    pub final_coeffs: Option<PolyCoeffs>,
    pub converged: bool,
    /// ||v - v_hat||^2 / ||v||^2 for successful trials.
    pub sq_error: Option<f64>,
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.sq_error.is_some()
    }

    /// Normalized squared error recomputed from the stored vectors.
    pub fn recompute_sq_error(&self) -> Option<f64> {
        let v = self.velocity?;
        Some(self.true_velocity.distance(&v).powi(2) / self.true_velocity.speed().powi(2))
    }
}

/// Independent random stream for one trial: the base seed picks the key and
/// the trial index picks the ChaCha stream, so trials can run in any order
/// or on any thread.
pub fn trial_rng(base_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial_index);
    rng
}

/// Runs the two-stage pipeline once.
///
/// Configuration problems (aliasing Doppler, bad geometry) are returned as
/// errors; estimator breakdowns are recorded in the trial as a failure.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    let params = config.effective_system();
    let scene = &config.scene;
    let lambda = params.wavelength_m;
    let ts = params.symbol_period_s;
    let truth = forward_dopplers(&config.velocity, scene, lambda);
    truth.check_unambiguous(ts)?;

    let mut rng = trial_rng(config.base_seed, trial_index);
    let channel = gen_channel(&params, scene, &mut rng);

    let z_d = synth_stage1(&params, scene, &channel, truth.mu_d, &mut rng)?;
    let grid = CoarseGrid::new(params.n_pilots_stage1, ts, config.coarse_oversample)?;
    let coarse_mu = coarse_estimate(&z_d, &grid)?;

    let mut record = TrialRecord {
        seed: config.base_seed,
        trial_index,
        method: config.method,
        true_dopplers: truth,
        true_velocity: config.velocity,
        coarse_mu,
        refined: None,
        radial_mu_d: None,
        velocity: None,
        d_trace: Vec::new(),
        final_coeffs: None,
        converged: false,
        sq_error: None,
        failure: None,
    };

    if config.method == Method::NoIrs {
        let mu_d = refine_peak(&z_d, coarse_mu, grid.bin_width());
        record.radial_mu_d = Some(mu_d);
        record.converged = true;
        finish(&mut record, Ok(radial_velocity_no_irs(mu_d, scene.theta_tb, lambda)));
        return Ok(record);
    }

    let z_r = synth_stage2(&params, scene, &channel, truth, &mut rng)?;
    let r_hat = sample_covariance(&stack(&z_r, params.stack_dim)?)?;
    let decomp = decompose(&r_hat)?;

    let tones = match config.method {
        Method::Mode => {
            let outcome = mode_iterate(&decomp, init_c(coarse_mu, ts), &config.mode);
            record.d_trace = outcome.trace.clone();
            record.final_coeffs = Some(outcome.coeffs);
            record.converged = outcome.converged();
            if outcome.status == ModeStatus::Diverged {
                Err(Error::EstimationFailure("MODE iteration diverged".into()))
            } else {
                roots_and_freqs(&outcome.coeffs, ts)
            }
        }
        Method::RootMusic => root_music(&decomp, ts),
        Method::Esprit => esprit(&decomp, ts),
        Method::NoIrs => unreachable!("handled above"),
    };
    if !matches!(config.method, Method::Mode) {
        record.converged = tones.is_ok();
    }

    let velocity = tones.and_then(|(mu1, mu2)| {
        let pair = match_tones(mu1, mu2, coarse_mu);
        record.refined = Some(pair);
        recover_velocity(pair, scene.theta_tb, scene.theta_it, lambda)
    });
    finish(&mut record, velocity);
    Ok(record)
}

fn finish(record: &mut TrialRecord, velocity: Result<VelocityVector>) {
    match velocity {
        Ok(v) => {
            record.velocity = Some(v);
            record.sq_error = record.recompute_sq_error().filter(|e| e.is_finite());
            if record.sq_error.is_none() {
                record.failure = Some("non-finite velocity error".into());
            }
        }
        Err(e) => record.failure = Some(e.to_string()),
    }
}
