//! Stage-one matched-filter search for the direct-link Doppler.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::SnapshotSet;

/// Default grid oversampling relative to the 1/(N_d Ts) resolution.
pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Uniform candidate frequencies covering [-1/(2Ts), 1/(2Ts)).
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    frequencies: Vec<f64>,
    bin_width: f64,
}

impl CoarseGrid {
    pub fn new(n_pilots: usize, symbol_period_s: f64, oversample: usize) -> Result<Self> {
        if n_pilots == 0 || oversample == 0 || !(symbol_period_s > 0.0) {
            return Err(Error::Config(format!(
                "coarse grid needs n_pilots, oversample >= 1 and Ts > 0 (got {n_pilots}, {oversample}, {symbol_period_s})"
            )));
        }
        let count = n_pilots * oversample;
        let bin_width = 1.0 / (count as f64 * symbol_period_s);
        let start = -0.5 / symbol_period_s;
        let frequencies = (0..count).map(|i| start + i as f64 * bin_width).collect();
        Ok(Self { frequencies, bin_width })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }
}

/// |z^T a_f(mu)|^2 = |sum_k z_k exp(-j 2 pi mu k Ts)|^2.
pub fn matched_filter_power(z: &[Complex64], mu: f64, symbol_period_s: f64) -> f64 {
    let step = -TAU * mu * symbol_period_s;
    z.iter()
        .enumerate()
        .map(|(k, zk)| zk * Complex64::from_polar(1.0, step * k as f64))
        .sum::<Complex64>()
        .norm_sqr()
}

/// Grid point maximizing the matched-filter power. Near-equal peaks (within
/// 1e-12 relative) go to the candidate with the smaller |mu|.
pub fn coarse_estimate(z_d: &SnapshotSet, grid: &CoarseGrid) -> Result<f64> {
    if z_d.len() < 2 {
        return Err(Error::Input(format!("coarse search needs at least 2 snapshots, got {}", z_d.len())));
    }
    let ts = z_d.symbol_period_s;
    let mut best: Option<(f64, f64)> = None;
    for &mu in grid.frequencies() {
        let power = matched_filter_power(&z_d.values, mu, ts);
        if !power.is_finite() {
            return Err(Error::Input("snapshots contain non-finite values".into()));
        }
        best = match best {
            None => Some((mu, power)),
            Some((bmu, bp)) => {
                let tie = (power - bp).abs() <= 1e-12 * bp.max(power);
                if (tie && mu.abs() < bmu.abs()) || (!tie && power > bp) {
                    Some((mu, power))
                } else {
                    Some((bmu, bp))
                }
            }
        };
    }
    best.map(|(mu, _)| mu).ok_or_else(|| Error::Input("empty coarse grid".into()))
}

/// Continuous maximization of the matched-filter power within one bin of a
/// grid estimate (golden-section search). This is the single-tone maximum
/// likelihood Doppler that a lone mono-static BS can reach from its own
/// stage-one pilots.
pub fn refine_peak(z_d: &SnapshotSet, coarse_mu: f64, bin_width: f64) -> f64 {
    let ts = z_d.symbol_period_s;
    let f = |mu: f64| matched_filter_power(&z_d.values, mu, ts);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (coarse_mu - bin_width, coarse_mu + bin_width);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-9 * bin_width.max(1.0) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}
