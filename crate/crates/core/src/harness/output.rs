//! CSV writers.  Angles are in degrees; floats use Rust's shortest
//! round-trip formatting so equal results give byte-identical files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::Writer;

use super::config::{AlgorithmKind, SweepPoint};
use super::runner::ExperimentResult;
use super::HarnessError;
use crate::array::SnapshotMatrix;
use crate::record::TrialRecord;

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x}")
    }
}

fn indexed(prefix: &str, suffix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|k| format!("{prefix}{k}{suffix}")).collect()
}

/// `iteration, llf, theta_1_deg, ..., algo`, one row per iteration and algorithm.
pub fn write_trace<W: Write>(
    out: W,
    runs: &[(AlgorithmKind, &TrialRecord)],
) -> Result<(), HarnessError> {
    let m = runs.first().map_or(0, |(_, r)| r.final_theta.len());
    let mut w = Writer::from_writer(out);
    let mut header = vec!["iteration".to_string(), "llf".to_string()];
    header.extend(indexed("theta_", "_deg", m));
    header.push("algo".into());
    w.write_record(&header)?;
    for (algo, record) in runs {
        for (b, (llf, theta)) in record.llf.iter().zip(&record.theta_deg).enumerate() {
            let mut row = vec![b.to_string(), num(*llf)];
            row.extend(theta.iter().map(|x| num(*x)));
            row.push(algo.name().into());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `trial, algo, theta_hat_1_deg, ..., wanted, converged, iterations, sweep_value`.
pub fn write_scatter<W: Write>(out: W, result: &ExperimentResult) -> Result<(), HarnessError> {
    let m = result.config.sources();
    let mut w = Writer::from_writer(out);
    let mut header = vec!["trial".to_string(), "algo".to_string()];
    header.extend(indexed("theta_hat_", "_deg", m));
    header.extend(["wanted", "converged", "iterations", "sweep_value"].map(String::from));
    w.write_record(&header)?;
    for point in &result.points {
        for o in &point.outcomes {
            let mut row = vec![o.trial.to_string(), o.algorithm.name().into()];
            row.extend(o.record.final_theta_deg().iter().map(|x| num(*x)));
            row.push(o.wanted.to_string());
            row.push(o.record.converged.to_string());
            row.push(o.record.iterations.to_string());
            row.push(num(point.point.value));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per sweep point and algorithm.  `rmse_deg` and the per-source
/// columns use converged trials only (`trials_used` of them); `rmse_all_deg`
/// uses every trial.
pub fn write_rmse<W: Write>(out: W, result: &ExperimentResult) -> Result<(), HarnessError> {
    let m = result.config.sources();
    let mut w = Writer::from_writer(out);
    let mut header: Vec<String> = [
        "sweep_value",
        "algo",
        "rmse_deg",
        "crlb_sqrt_deg",
        "trials_used",
    ]
    .map(String::from)
    .into();
    header.push("rmse_all_deg".into());
    header.extend(indexed("rmse_", "_deg", m));
    header.extend(indexed("crlb_sqrt_", "_deg", m));
    header.extend(["trials", "wanted", "mean_iterations"].map(String::from));
    w.write_record(&header)?;
    for point in &result.points {
        let bound = point.crlb.clone();
        let crlb = point.crlb_sqrt_deg().map_or(String::new(), num);
        for &algo in &result.config.algorithm.names {
            let s = point.summary(algo);
            let mut row = vec![
                num(point.point.value),
                algo.name().into(),
                num(s.rmse_deg),
                crlb.clone(),
                s.converged.to_string(),
                num(s.rmse_all_deg),
            ];
            row.extend(s.rmse_per_source_deg.iter().map(|x| num(*x)));
            match &bound {
                Some(b) => row.extend(b.iter().map(|v| num(v.sqrt().to_degrees()))),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row.push(s.trials.to_string());
            row.push(s.wanted.to_string());
            row.push(num(s.mean_iterations));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per sweep point and algorithm: counts, iteration statistics and RMSE.
pub fn write_summary<W: Write>(out: W, result: &ExperimentResult) -> Result<(), HarnessError> {
    let mut w = Writer::from_writer(out);
    w.write_record([
        "sweep_value",
        "algo",
        "trials",
        "converged",
        "wanted",
        "mean_iterations",
        "median_iterations",
        "rmse_deg",
        "rmse_all_deg",
        "crlb_sqrt_deg",
    ])?;
    for point in &result.points {
        let crlb = point.crlb_sqrt_deg().map_or(String::new(), num);
        for &algo in &result.config.algorithm.names {
            let s = point.summary(algo);
            w.write_record([
                num(point.point.value),
                algo.name().into(),
                s.trials.to_string(),
                s.converged.to_string(),
                s.wanted.to_string(),
                num(s.mean_iterations),
                num(s.median_iterations),
                num(s.rmse_deg),
                num(s.rmse_all_deg),
                crlb.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `sweep_value, crlb_sqrt_deg, crlb_sqrt_1_deg, ...`; empty cells when no
/// bound applies.
pub fn write_crlb<W: Write>(
    out: W,
    curve: &[(SweepPoint, Option<Vec<f64>>)],
    m: usize,
) -> Result<(), HarnessError> {
    let mut w = Writer::from_writer(out);
    let mut header = vec!["sweep_value".to_string(), "crlb_sqrt_deg".to_string()];
    header.extend(indexed("crlb_sqrt_", "_deg", m));
    w.write_record(&header)?;
    for (point, bound) in curve {
        let mut row = vec![num(point.value)];
        match bound {
            Some(b) => {
                let pooled = (b.iter().sum::<f64>() / b.len() as f64).sqrt().to_degrees();
                row.push(num(pooled));
                row.extend(b.iter().map(|v| num(v.sqrt().to_degrees())));
            }
            None => row.extend(std::iter::repeat_n(String::new(), m + 1)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `sensor, snapshot, re, im`, one row per entry in column-major order.
pub fn write_snapshots<W: Write>(out: W, v: &SnapshotMatrix) -> Result<(), HarnessError> {
    let mut w = Writer::from_writer(out);
    w.write_record(["sensor", "snapshot", "re", "im"])?;
    let x = v.matrix();
    for t in 0..x.ncols() {
        for n in 0..x.nrows() {
            let z = x[(n, t)];
            w.write_record([n.to_string(), t.to_string(), num(z.re), num(z.im)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn create(dir: &Path, name: &str) -> Result<File, HarnessError> {
    std::fs::create_dir_all(dir)?;
    Ok(File::create(dir.join(name))?)
}
