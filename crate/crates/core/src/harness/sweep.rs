use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Method, SweepAxis};
use super::trial::{run_trial, TrialRecord};
use crate::error::{Error, Result};
use crate::geometry::VelocityVector;
use crate::mode::ModeOptions;

/// One output row per (axis point, method).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub method: Method,
    /// `None` when every trial at this point failed.
    pub nmse: Option<f64>,
    pub n_success: usize,
    pub n_fail: usize,
    pub seed: u64,
}

/// Per-iteration spread of the MODE step size across trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// 1-based: row t summarizes ||c_(t) - c_(t-1)||.
    pub iteration: usize,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

/// Runs trials 0..n_trials in parallel. Records come back in trial order
/// whatever the thread count.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.n_trials as u64).into_par_iter().map(|i| run_trial(config, i)).collect()
}

/// sqrt of the mean normalized squared error over successful trials.
pub fn nmse(records: &[TrialRecord]) -> Result<f64> {
    let errors: Vec<f64> = records.iter().filter_map(|r| r.sq_error).collect();
    if errors.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok((errors.iter().sum::<f64>() / errors.len() as f64).sqrt())
}

/// Runs `methods` at every point of `axis`. Each (point, method) pair reuses
/// the same per-trial random streams, so the curves are paired comparisons.
pub fn sweep(config: &ExperimentConfig, axis: &SweepAxis, methods: &[Method]) -> Result<Vec<SweepRow>> {
    if methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    let points: Vec<(f64, ExperimentConfig)> = match axis {
        SweepAxis::None => return Err(Error::Config("no sweep axis configured".into())),
        SweepAxis::SnrDb(values) => values
            .iter()
            .map(|&snr| (snr, ExperimentConfig { system: config.system.clone().with_snr_db(snr), ..config.clone() }))
            .collect(),
        SweepAxis::Speed(values) => values
            .iter()
            .map(|&speed| {
                let velocity = VelocityVector::new(speed, config.velocity.heading());
                (speed, ExperimentConfig { velocity, ..config.clone() })
            })
            .collect(),
    };
    if points.is_empty() {
        return Err(Error::Config("sweep values must not be empty".into()));
    }

    let mut rows = Vec::with_capacity(points.len() * methods.len());
    for (axis_value, point) in &points {
        for &method in methods {
            let c = ExperimentConfig { method, ..point.clone() };
            let records = run_trials(&c)?;
            let n_success = records.iter().filter(|r| r.succeeded()).count();
            rows.push(SweepRow {
                axis_value: *axis_value,
                method,
                nmse: nmse(&records).ok(),
                n_success,
                n_fail: records.len() - n_success,
                seed: config.base_seed,
            });
        }
    }
    Ok(rows)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// 1-based index of the first step below `threshold`, if any.
pub fn first_below(trace: &[f64], threshold: f64) -> Option<usize> {
    trace.iter().position(|d| *d < threshold).map(|i| i + 1)
}

/// Runs MODE for exactly `max_iter` updates per trial (no early stop) and
/// summarizes the step sizes per iteration. Diverged trials are dropped.
pub fn convergence(config: &ExperimentConfig) -> Result<(Vec<ConvergenceRow>, Vec<TrialRecord>)> {
    let c = ExperimentConfig {
        method: Method::Mode,
        mode: ModeOptions { tol: 0.0, max_iter: config.mode.max_iter },
        ..config.clone()
    };
    let records = run_trials(&c)?;
    let full: Vec<&TrialRecord> = records.iter().filter(|r| r.d_trace.len() == c.mode.max_iter).collect();
    if full.is_empty() {
        return Err(Error::EmptyResult);
    }
    let rows = (0..c.mode.max_iter)
        .map(|t| {
            let mut col: Vec<f64> = full.iter().map(|r| r.d_trace[t]).collect();
            col.sort_by(f64::total_cmp);
            ConvergenceRow { iteration: t + 1, median: quantile(&col, 0.5), q10: quantile(&col, 0.1), q90: quantile(&col, 0.9) }
        })
        .collect();
    Ok((rows, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DopplerPair;

    fn record(sq: Option<f64>) -> TrialRecord {
        TrialRecord {
            seed: 0,
            trial_index: 0,
            method: Method::Mode,
            true_dopplers: DopplerPair::new(0.0, 0.0),
            true_velocity: VelocityVector::new(1.0, 0.0),
            coarse_mu: 0.0,
            refined: None,
            radial_mu_d: None,
            velocity: None,
            d_trace: vec![],
            final_coeffs: None,
            converged: true,
            sq_error: sq,
            failure: None,
        }
    }

    #[test]
    fn nmse_examples() {
        assert_eq!(nmse(&[record(Some(0.0)), record(Some(0.0))]).unwrap(), 0.0);
        assert_eq!(nmse(&[record(Some(1.0))]).unwrap(), 1.0);
        let v = nmse(&[record(Some(0.04)), record(Some(0.16))]).unwrap();
        assert!((v - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((v - 0.3162).abs() < 1e-4);
        // Failures are excluded.
        assert_eq!(nmse(&[record(Some(1.0)), record(None)]).unwrap(), 1.0);
        assert!(matches!(nmse(&[record(None)]), Err(Error::EmptyResult)));
        assert!(matches!(nmse(&[]), Err(Error::EmptyResult)));
    }

    #[test]
    fn quantiles_and_first_below() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert!((quantile(&s, 0.1) - 1.4).abs() < 1e-12);
        assert_eq!(first_below(&[1.0, 0.1, 1e-9], 1e-6), Some(3));
        assert_eq!(first_below(&[1.0], 1e-6), None);
    }

    #[test]
    fn sweep_accounting_and_thread_independence() {
        let config = ExperimentConfig { n_trials: 24, base_seed: 5, ..ExperimentConfig::default() };
        let axis = SweepAxis::SnrDb(vec![-10.0, 10.0]);
        let methods = [Method::Mode, Method::Esprit];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sweep(&config, &axis, &methods)).unwrap();
        let b = many.install(|| sweep(&config, &axis, &methods)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|r| r.n_success + r.n_fail == 24));

        // Parallel aggregation equals a plain sequential loop.
        let c = ExperimentConfig { system: config.system.clone().with_snr_db(-10.0), ..config.clone() };
        let seq: Vec<TrialRecord> = (0..24).map(|i| run_trial(&c, i).unwrap()).collect();
        assert_eq!(a[0].nmse.unwrap(), nmse(&seq).unwrap());
    }

    #[test]
    fn sweep_requires_axis_and_methods() {
        let config = ExperimentConfig { n_trials: 2, ..ExperimentConfig::default() };
        assert!(sweep(&config, &SweepAxis::None, &[Method::Mode]).is_err());
        assert!(sweep(&config, &SweepAxis::SnrDb(vec![0.0]), &[]).is_err());
    }

    #[test]
    fn convergence_rows_cover_every_iteration() {
        let config = ExperimentConfig {
            n_trials: 16,
            mode: ModeOptions { tol: 1e-8, max_iter: 12 },
            ..ExperimentConfig::default()
        };
        let (rows, records) = convergence(&config).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(records.len(), 16);
        assert!(rows.iter().all(|r| r.q10 <= r.median && r.median <= r.q90));
        assert!(rows.last().unwrap().median < rows[0].median);
    }
}
