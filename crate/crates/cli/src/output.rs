//! Per-run CSV logs, prediction grids and the experiment summary.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{bounds_name, ExperimentConfig};
use crate::runner::RunOutcome;
use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.txt";

/// Stage value written for a run that stopped on an error.
pub const ERROR_STAGE: &str = "error";

pub fn run_csv_name(seed: u64) -> String {
    format!("run_seed{seed}.csv")
}

pub fn grid_csv_name(seed: u64) -> String {
    format!("grid_seed{seed}.csv")
}

pub fn csv_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["run_seed".into(), "iteration".into(), "stage".into()];
    h.extend((0..dim).map(|k| format!("x_{k}")));
    h.extend(
        [
            "label",
            "pred_mean",
            "pred_var",
            "beta",
            "gamma",
            "f1_global",
            "f1_explored",
            "wall_time_s",
        ]
        .map(String::from),
    );
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_run_csv<W: Write>(out: W, dim: usize, outcome: &RunOutcome) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(dim))?;
    let curve: HashMap<usize, _> = outcome.curve.iter().map(|p| (p.iteration, p)).collect();
    for r in &outcome.records {
        let mut row = vec![outcome.seed.to_string(), r.iteration.to_string(), r.stage.to_string()];
        row.extend(r.point.iter().map(|x| x.to_string()));
        let point = curve.get(&r.iteration);
        row.extend([
            r.label.as_i8().to_string(),
            opt(r.prediction.map(|p| p.mean)),
            opt(r.prediction.map(|p| p.variance)),
            opt(r.beta),
            opt(r.gamma),
            opt(point.map(|p| p.global)),
            opt(point.and_then(|p| p.explored)),
            r.wall_time.to_string(),
        ]);
        w.write_record(&row)?;
    }
    if outcome.error.is_some() {
        let mut row = vec![outcome.seed.to_string(), String::new(), ERROR_STAGE.to_string()];
        row.extend(std::iter::repeat(String::new()).take(dim + 8));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_csv<W: Write>(out: W, grid: &[[f64; 4]]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x0", "x1", "mean", "variance"])?;
    for row in grid {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and half-width `1.96 * stderr`; the half-width is 0 for one value.
pub fn mean_ci95(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, 1.96 * (var / n).sqrt()))
}

/// `key: value` lines.
pub fn summary_text(config: &ExperimentConfig, outcomes: &[RunOutcome]) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(s, "{k}: {v}");
    };
    line("strategy", &config.strategy.as_str());
    line("problem", &config.problem.name());
    line("dim", &config.problem.dim());
    line("noise", &config.noise.map_or("none".to_string(), |n| n.to_string()));
    line("bounds", &config.bounds.map_or("none", bounds_name));
    line("epsilon", &config.epsilon);
    line("eta", &config.eta);
    line("length_scale", &config.length_scale);
    line("pool_size", &config.pool_size);
    line("budget", &config.budget);
    line("runs", &outcomes.len());
    line("runs_failed", &outcomes.iter().filter(|o| !o.completed()).count());

    let finals: Vec<f64> = outcomes.iter().filter_map(RunOutcome::final_f1).collect();
    if let Some((mean, half)) = mean_ci95(&finals) {
        line("final_f1_mean", &format!("{mean:.6}"));
        line("final_f1_ci95", &format!("{half:.6}"));
        line("final_f1_min", &format!("{:.6}", finals.iter().cloned().fold(f64::INFINITY, f64::min)));
        line("final_f1_max", &format!("{:.6}", finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)));
    }
    let explored: Vec<f64> = outcomes.iter().filter_map(RunOutcome::final_explored_f1).collect();
    if let Some((mean, half)) = mean_ci95(&explored) {
        line("explored_f1_mean", &format!("{mean:.6}"));
        line("explored_f1_ci95", &format!("{half:.6}"));
    }
    let times: Vec<f64> = outcomes.iter().map(|o| o.wall_time).collect();
    if let Some((mean, _)) = mean_ci95(&times) {
        line("wall_time_mean_s", &format!("{mean:.3}"));
        line("wall_time_total_s", &format!("{:.3}", times.iter().sum::<f64>()));
    }
    for o in outcomes {
        if let Some(f1) = o.final_f1() {
            line(&format!("seed_{}_final_f1", o.seed), &format!("{f1:.6}"));
        }
        if let Some(e) = &o.error {
            line(&format!("seed_{}_error", o.seed), &e.replace('\n', " "));
        }
    }
    s
}

/// Writes every artifact into `config.output`; returns the files written.
pub fn write_outputs(config: &ExperimentConfig, outcomes: &[RunOutcome]) -> Result<Vec<PathBuf>, CliError> {
    let dir: &Path = &config.output;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for o in outcomes {
        let path = dir.join(run_csv_name(o.seed));
        write_run_csv(fs::File::create(&path)?, config.problem.dim(), o)?;
        written.push(path);
        if !o.grid.is_empty() {
            let path = dir.join(grid_csv_name(o.seed));
            write_grid_csv(fs::File::create(&path)?, &o.grid)?;
            written.push(path);
        }
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary_text(config, outcomes))?;
    written.push(path);
    Ok(written)
}

/// Parses a summary file back into its key/value pairs.
pub fn read_summary(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use aes_core::evaluation::CurvePoint;
    use aes_core::{Label, Prediction, QueryRecord, Stage};

    fn outcome(error: Option<&str>) -> RunOutcome {
        RunOutcome {
            seed: 7,
            records: vec![
                QueryRecord {
                    iteration: 0,
                    point: vec![3.0, 3.0],
                    label: Label::Feasible,
                    stage: Stage::Init,
                    beta: None,
                    gamma: None,
                    prediction: None,
                    wall_time: 0.5,
                },
                QueryRecord {
                    iteration: 1,
                    point: vec![1.5, -2.0],
                    label: Label::Infeasible,
                    stage: Stage::Explore,
                    beta: Some(1.87),
                    gamma: None,
                    prediction: Some(Prediction { mean: 0.1, variance: 0.75 }),
                    wall_time: 0.25,
                },
            ],
            curve: vec![CurvePoint {
                iteration: 1,
                global: 0.5,
                explored: None,
                explored_count: 0,
            }],
            wall_time: 0.75,
            error: error.map(String::from),
            grid: Vec::new(),
        }
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_run_csv(&mut buf, 2, &outcome(None)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "run_seed,iteration,stage,x_0,x_1,label,pred_mean,pred_var,beta,gamma,f1_global,f1_explored,wall_time_s"
        );
        assert_eq!(lines[1], "7,0,init,3,3,1,,,,,,,0.5");
        assert_eq!(lines[2], "7,1,explore,1.5,-2,-1,0.1,0.75,1.87,,0.5,,0.25");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn error_row_has_full_width() {
        let mut buf = Vec::new();
        write_run_csv(&mut buf, 2, &outcome(Some("stalled"))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let last = text.lines().last().unwrap();
        assert_eq!(last, "7,,error,,,,,,,,,,");
        assert_eq!(last.split(',').count(), csv_header(2).len());
    }

    #[test]
    fn confidence_interval() {
        assert_eq!(mean_ci95(&[]), None);
        assert_eq!(mean_ci95(&[0.4]), Some((0.4, 0.0)));
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        // sample sd sqrt(5/3), stderr sqrt(5/12)
        assert!((h - 1.96 * (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
