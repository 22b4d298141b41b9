//! CSV rendering of trajectories, observer runs and sweep results.
//!
//! Every number is written with 17 significant digits so files round-trip
//! exactly and identical runs produce byte-identical output.

use std::fmt::Write;

use crate::estimator::{DetCertificate, GramianReport};
use crate::harness::{CicoReport, ExperimentResult};
use crate::numerics::Trajectory;
use crate::observer::ObserverRun;
use crate::Result;

/// Formats `v` with 17 significant digits; non-finite values become `NaN`,
/// `inf` or `-inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn header(out: &mut String, columns: &[String]) {
    out.push_str(&columns.join(","));
    out.push('\n');
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = String>) {
    let row: Vec<String> = values.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

/// `t,x1..xn,y1..yk`; rows stop at the last finite sample and a
/// `# diverged_at=<t>` line follows when the run blew up.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    let mut cols = vec!["t".to_string()];
    cols.extend(numbered("x", traj.x.dim()));
    cols.extend(numbered("y", traj.y.dim()));
    header(&mut out, &cols);
    for j in 0..traj.valid_len() {
        let row = std::iter::once(traj.x.time(j))
            .chain(traj.x.at(j).iter().copied())
            .chain(traj.y.at(j).iter().copied());
        push_row(&mut out, row.map(fmt_num));
    }
    if let Some(t) = traj.diverged_at {
        let _ = writeln!(out, "# diverged_at={}", fmt_num(t));
    }
    out
}

/// `t,x1..xn,z1..zn[,y1..yk,w1..wk],err_norm,is_reset` for an observer run
/// against the true trajectory.
pub fn observer_csv(run: &ObserverRun, truth: &Trajectory) -> Result<String> {
    let errors = run.error_norms(truth)?;
    let (n, k) = (run.z.dim(), truth.y.dim());
    let mut out = String::new();
    let mut cols = vec!["t".to_string()];
    cols.extend(numbered("x", n));
    cols.extend(numbered("z", n));
    if run.w.is_some() {
        cols.extend(numbered("y", k));
        cols.extend(numbered("w", k));
    }
    cols.push("err_norm".into());
    cols.push("is_reset".into());
    header(&mut out, &cols);
    for (j, err) in errors.iter().enumerate() {
        let mut row: Vec<String> = vec![fmt_num(run.z.time(j))];
        row.extend(truth.x.at(j).iter().chain(run.z.at(j)).map(|&v| fmt_num(v)));
        if let Some(w) = &run.w {
            row.extend(truth.y.at(j).iter().chain(w.at(j)).map(|&v| fmt_num(v)));
        }
        row.push(fmt_num(*err));
        row.push(u8::from(run.is_reset_node(j)).to_string());
        push_row(&mut out, row);
    }
    Ok(out)
}

/// One row per sweep record, in amplitude order.
pub fn sweep_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    out.push_str("delta,seed,sup_err,final_window_err,last_reset_err,final_window_noise,diverged,observability_failed\n");
    for r in &result.records {
        push_row(
            &mut out,
            [
                fmt_num(r.delta),
                r.seed.to_string(),
                fmt_num(r.sup_err),
                fmt_num(r.final_window_err),
                fmt_num(r.last_reset_err),
                fmt_num(r.final_window_noise),
                u8::from(r.diverged).to_string(),
                u8::from(r.observability_failed).to_string(),
            ],
        );
    }
    out
}

/// `t,reset_err` for every reset of a converging-input run.
pub fn reset_trace_csv(report: &CicoReport) -> String {
    let mut out = String::from("t,reset_err\n");
    for &(t, e) in &report.reset_trace {
        push_row(&mut out, [fmt_num(t), fmt_num(e)]);
    }
    out
}

/// Single-row summary of a window check.
pub fn check_csv(report: &GramianReport, certificate: Option<&DetCertificate>) -> String {
    let mut out = String::from("det_Q,min_eig,distinguishable,tolerance,det_times,det\n");
    let (times, det) = match certificate {
        Some(c) => (
            c.times
                .iter()
                .map(|&t| fmt_num(t))
                .collect::<Vec<_>>()
                .join(" "),
            fmt_num(c.det),
        ),
        None => (String::new(), String::new()),
    };
    push_row(
        &mut out,
        [
            fmt_num(report.det_q),
            fmt_num(report.min_eig),
            u8::from(report.distinguishable).to_string(),
            fmt_num(report.tolerance_used),
            times,
            det,
        ],
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{SampleGrid, Signal};

    #[test]
    fn numbers_keep_17_digits() {
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        for v in [std::f64::consts::PI, -1.234e-300, 6.02e23] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn trajectory_rows_stop_at_divergence() {
        let grid = SampleGrid::new(0.0, 0.5, 5).unwrap();
        let mut x = Signal::from_fn(grid, 1, |t| vec![t]).unwrap();
        let y = Signal::zeros(grid, 1);
        let values: Vec<f64> = x
            .values()
            .iter()
            .enumerate()
            .map(|(j, &v)| if j >= 3 { f64::NAN } else { v })
            .collect();
        x = Signal::new(grid, 1, values).unwrap();
        let csv = trajectory_csv(&Trajectory {
            x,
            y,
            diverged_at: Some(1.0),
        });
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,y1");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "# diverged_at=1.0000000000000000e0");
    }
}
