use std::fmt::Write;

use super::sweep::{ConvergenceRow, SweepRow};

pub const SWEEP_HEADER: &str = "axis_value,method,nmse,n_success,n_fail,seed";
pub const CONVERGENCE_HEADER: &str = "iteration,median_Dt,q10_Dt,q90_Dt";

/// Scientific notation with 9 significant digits; non-finite values print as `nan`/`inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.8e}")
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_float(r.axis_value),
            r.method,
            format_float(r.nmse.unwrap_or(f64::NAN)),
            r.n_success,
            r.n_fail,
            r.seed
        );
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.iteration, format_float(r.median), format_float(r.q10), format_float(r.q90));
    }
    out
}
