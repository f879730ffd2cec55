//! CSV emission: training logs, per-view metric reports, threshold curves.

use std::io::Write;
use std::path::Path;

use pcsod_core::metrics::{threshold_grid, MetricsReport};
use pcsod_core::train::RunLog;

use crate::error::CliError;

/// Metrics measured during training, attached to the step that ran them.
#[derive(Clone, Debug)]
pub struct TrainEval {
    pub step: u64,
    pub mae: f64,
    pub max_f: f64,
    pub max_e: f64,
    pub iou: f64,
}

pub fn write_runlog(path: &Path, log: &RunLog, evals: &[TrainEval]) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,epoch,loss,elapsed_sec,mae,max_f,max_e,iou")?;
    for rec in &log.records {
        let eval = evals.iter().find(|e| e.step == rec.step);
        match eval {
            Some(e) => writeln!(
                w,
                "{},{},{:.6},{:.3},{:.6},{:.6},{:.6},{:.6}",
                rec.step, rec.epoch, rec.loss, rec.elapsed_sec, e.mae, e.max_f, e.max_e, e.iou
            )?,
            None => writeln!(
                w,
                "{},{},{:.6},{:.3},,,,",
                rec.step, rec.epoch, rec.loss, rec.elapsed_sec
            )?,
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per view plus exactly one aggregate row.
pub fn write_report(
    path: &Path,
    rows: &[(String, MetricsReport)],
    aggregate: &MetricsReport,
) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "view_id,mae,iou,max_f,mean_f,max_e,mean_e")?;
    for (id, r) in rows {
        writeln!(
            w,
            "{id},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.mae, r.iou, r.max_f, r.mean_f, r.max_e, r.mean_e
        )?;
    }
    writeln!(
        w,
        "aggregate,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        aggregate.mae,
        aggregate.iou,
        aggregate.max_f,
        aggregate.mean_f,
        aggregate.max_e,
        aggregate.mean_e
    )?;
    w.flush()?;
    Ok(())
}

/// The aggregate F/E values over the full threshold grid, one row per
/// threshold, for plotting.
pub fn write_curves(path: &Path, aggregate: &MetricsReport) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "threshold,f,e")?;
    for ((t, f), e) in threshold_grid()
        .iter()
        .zip(&aggregate.f_curve)
        .zip(&aggregate.e_curve)
    {
        writeln!(w, "{t:.6},{f:.6},{e:.6}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcsod_core::metrics::{evaluate, MetricsConfig};
    use pcsod_core::train::StepRecord;

    #[test]
    fn runlog_rows_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let mut log = RunLog::default();
        log.push(StepRecord {
            step: 1,
            epoch: 0,
            loss: 0.7,
            elapsed_sec: 0.5,
        });
        log.push(StepRecord {
            step: 2,
            epoch: 0,
            loss: 0.6,
            elapsed_sec: 1.0,
        });
        write_runlog(
            &path,
            &log,
            &[TrainEval {
                step: 2,
                mae: 0.1,
                max_f: 0.9,
                max_e: 0.8,
                iou: 0.7,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,epoch,loss,elapsed_sec,mae,max_f,max_e,iou");
        assert!(lines[1].ends_with(",,,,"));
        assert!(lines[2].contains("0.100000"));
    }

    #[test]
    fn report_has_single_aggregate_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let r = evaluate(&[1.0, 0.0], &[1, 0], &MetricsConfig::default()).unwrap();
        write_report(&path, &[("v0".into(), r.clone())], &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().filter(|l| l.starts_with("aggregate,")).count(),
            1
        );
    }

    #[test]
    fn curves_have_256_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let r = evaluate(&[1.0, 0.0], &[1, 0], &MetricsConfig::default()).unwrap();
        write_curves(&path, &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 257);
    }
}
