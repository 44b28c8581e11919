//! Cartesian parameter sweeps over district runs, several seeds per cell.

use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::{MetricReport, METRIC_NAMES};

use super::config::ExperimentConfig;
use super::run::run_district;

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub assignments: Vec<(String, Value)>,
    /// Seed and report of every successful run.
    pub runs: Vec<(u64, MetricReport)>,
    /// Seed and message of every failed run.
    pub failures: Vec<(u64, String)>,
}

impl CellResult {
    pub fn total_scores(&self) -> Vec<f64> {
        self.runs.iter().map(|(_, r)| r.total_score).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutputs {
    pub keys: Vec<String>,
    pub cells: Vec<CellResult>,
}

/// Cells in odometer order over the grid's keys, last key fastest.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<Vec<(String, Value)>> {
    let mut cells = vec![Vec::new()];
    for (key, values) in &cfg.sweep.grid {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c: Vec<(String, Value)> = cell.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every cell for seeds `seed .. seed + sweep.seeds`. A failing run is
/// recorded against its cell and the sweep goes on.
pub fn run_sweep(base: &ExperimentConfig) -> Result<SweepOutputs> {
    base.validate()?;
    let cells = grid_cells(base);
    let seeds: Vec<u64> = (0..base.sweep.seeds as u64).map(|i| base.seed.wrapping_add(i)).collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |s| (c, *s)))
        .collect();
    let results: Vec<std::result::Result<MetricReport, String>> = jobs
        .par_iter()
        .map(|(c, seed)| {
            let mut overrides = cells[*c].clone();
            overrides.push(("seed".into(), Value::from(*seed)));
            let cfg = base.with_overrides(&overrides).map_err(|e| e.to_string())?;
            let out = run_district(&cfg).map_err(|e| e.to_string())?;
            out.report.ok_or_else(|| "run produced no report".to_string())
        })
        .collect();

    let mut out: Vec<CellResult> = cells
        .into_iter()
        .map(|assignments| CellResult {
            assignments,
            runs: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for ((c, seed), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(rep) => out[c].runs.push((seed, rep)),
            Err(msg) => out[c].failures.push((seed, msg)),
        }
    }
    Ok(SweepOutputs {
        keys: base.sweep.grid.keys().cloned().collect(),
        cells: out,
    })
}

fn csv_string(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl SweepOutputs {
    pub fn summary_csv(&self) -> Result<String> {
        let mut header = vec!["cell".to_string()];
        header.extend(self.keys.iter().cloned());
        header.extend(["runs", "failures", "mean_total_score", "std_total_score", "mean_coordination_score", "std_coordination_score"].map(String::from));
        for n in METRIC_NAMES {
            header.push(format!("mean_{n}_ratio"));
            header.push(format!("std_{n}_ratio"));
        }
        let rows = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut row = vec![i.to_string()];
                row.extend(c.assignments.iter().map(|(_, v)| v.to_string()));
                row.push(c.runs.len().to_string());
                row.push(c.failures.len().to_string());
                let (m, s) = mean_std(&c.total_scores());
                row.extend([m.to_string(), s.to_string()]);
                let coord: Vec<f64> = c.runs.iter().map(|(_, r)| r.coordination_score).collect();
                let (m, s) = mean_std(&coord);
                row.extend([m.to_string(), s.to_string()]);
                for k in 0..METRIC_NAMES.len() {
                    let v: Vec<f64> = c.runs.iter().map(|(_, r)| r.ratios[k]).collect();
                    let (m, s) = mean_std(&v);
                    row.extend([m.to_string(), s.to_string()]);
                }
                row
            })
            .collect();
        csv_string(header, rows)
    }

    /// One row per seed of cell `i`, failures included.
    pub fn cell_csv(&self, i: usize) -> Result<String> {
        let c = &self.cells[i];
        let header = vec!["seed".to_string(), "status".into(), "total_score".into(), "coordination_score".into(), "message".into()];
        let mut rows: Vec<(u64, Vec<String>)> = c
            .runs
            .iter()
            .map(|(s, r)| (*s, vec![s.to_string(), "ok".into(), r.total_score.to_string(), r.coordination_score.to_string(), String::new()]))
            .chain(c.failures.iter().map(|(s, m)| (*s, vec![s.to_string(), "failed".into(), String::new(), String::new(), m.clone()])))
            .collect();
        rows.sort_by_key(|(s, _)| *s);
        csv_string(header, rows.into_iter().map(|(_, r)| r).collect())
    }

    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<()> {
        std::fs::create_dir_all(dir.join("cells")).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            (dir.join("config.json"), config.to_json_pretty() + "\n"),
            (dir.join("sweep_summary.csv"), self.summary_csv()?),
        ];
        for i in 0..self.cells.len() {
            files.push((dir.join("cells").join(format!("cell_{i:03}.csv")), self.cell_csv(i)?));
        }
        for (path, body) in files {
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
