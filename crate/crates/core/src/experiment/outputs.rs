//! Run results and their on-disk form. Rendering is pure, so identical
//! results always give identical bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

use super::config::ExperimentConfig;
use super::run::SpanSeries;

pub const DISTRICT: &str = "district";

pub const CURVE_HEADER: &str = "iteration,week,building_id,best_reward,mean_reward,ramping_ratio,load_factor_ratio,avg_peak_ratio,peak_ratio,consumption_ratio,carbon_ratio,total_score";

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    pub week: usize,
    /// Building id, or [`DISTRICT`] for the whole district.
    pub building_id: String,
    pub best_reward: f64,
    pub mean_reward: f64,
    /// Running ratios against the baseline up to this point; NaN where the
    /// baseline metric is still zero.
    pub ratios: [f64; 6],
    pub total_score: f64,
}

/// Per building and day, only for days where something went wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub day: usize,
    pub building_id: usize,
    pub clipped_hours: usize,
    pub infeasible_plans: usize,
    pub unmet_heat_kwh: f64,
    pub unmet_cool_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRow {
    pub building_id: usize,
    pub best_reward: f64,
    pub theta: Vec<f64>,
}

/// One seed of one blackbox case.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackboxRecord {
    pub case: String,
    pub seed: u64,
    pub best: Vec<f64>,
    pub best_value: f64,
    pub best_distance: f64,
    /// Share of the final generation within the concentration radius of the maximizer.
    pub final_concentration: f64,
    /// First iteration whose best-so-far lies within the accuracy radius.
    pub iterations_to_accuracy: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackboxSummary {
    pub case: String,
    pub seeds: usize,
    /// Seeds with at least 90% of the final generation concentrated.
    pub concentrated_seeds: usize,
    /// Seeds whose best candidate is within the accuracy radius.
    pub accurate_seeds: usize,
    pub median_iterations_to_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub config: ExperimentConfig,
    /// District report; absent for blackbox runs.
    pub report: Option<MetricReport>,
    pub building_reports: Vec<(usize, Option<MetricReport>)>,
    pub learning_curve: Vec<CurveRow>,
    pub events: Vec<EventRow>,
    pub theta: Vec<ThetaRow>,
    pub blackbox: Vec<BlackboxRecord>,
    pub blackbox_summary: Vec<BlackboxSummary>,
    /// Net consumption series; kept in memory only.
    pub series: Option<SpanSeries>,
}

fn f(v: f64) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), T::to_string)
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.split(','))?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl RunOutputs {
    pub fn learning_curve_csv(&self) -> Result<String> {
        csv(
            CURVE_HEADER,
            self.learning_curve.iter().map(|r| {
                let mut v = vec![
                    r.iteration.to_string(),
                    r.week.to_string(),
                    r.building_id.clone(),
                    f(r.best_reward),
                    f(r.mean_reward),
                ];
                v.extend(r.ratios.iter().map(|x| f(*x)));
                v.push(f(r.total_score));
                v
            }),
        )
    }

    pub fn metrics_csv(&self) -> Result<String> {
        let header = format!("scope,{}", MetricReport::csv_header());
        let mut rows = Vec::new();
        if let Some(r) = &self.report {
            rows.push(format!("{DISTRICT},{}", r.csv_row()));
        }
        for (id, r) in &self.building_reports {
            if let Some(r) = r {
                rows.push(format!("{id},{}", r.csv_row()));
            }
        }
        csv(&header, rows.into_iter().map(|r| r.split(',').map(str::to_string).collect()))
    }

    pub fn events_csv(&self) -> Result<String> {
        csv(
            "day,building_id,clipped_hours,infeasible_plans,unmet_heat_kwh,unmet_cool_kwh",
            self.events.iter().map(|e| {
                vec![
                    e.day.to_string(),
                    e.building_id.to_string(),
                    e.clipped_hours.to_string(),
                    e.infeasible_plans.to_string(),
                    f(e.unmet_heat_kwh),
                    f(e.unmet_cool_kwh),
                ]
            }),
        )
    }

    pub fn theta_csv(&self) -> Result<String> {
        let mut header = "building_id,best_reward".to_string();
        for h in 1..=24 {
            header += &format!(",theta_{h}");
        }
        csv(
            &header,
            self.theta.iter().map(|t| {
                let mut v = vec![t.building_id.to_string(), f(t.best_reward)];
                v.extend(t.theta.iter().map(|x| f(*x)));
                v
            }),
        )
    }

    pub fn blackbox_csv(&self) -> Result<String> {
        csv(
            "case,seed,best,best_value,best_distance,final_concentration,iterations_to_accuracy",
            self.blackbox.iter().map(|r| {
                vec![
                    r.case.clone(),
                    r.seed.to_string(),
                    r.best.iter().map(|x| f(*x)).collect::<Vec<_>>().join(" "),
                    f(r.best_value),
                    f(r.best_distance),
                    f(r.final_concentration),
                    opt(&r.iterations_to_accuracy),
                ]
            }),
        )
    }

    pub fn blackbox_summary_csv(&self) -> Result<String> {
        csv(
            "case,seeds,concentrated_seeds,accurate_seeds,median_iterations_to_accuracy",
            self.blackbox_summary.iter().map(|s| {
                vec![
                    s.case.clone(),
                    s.seeds.to_string(),
                    s.concentrated_seeds.to_string(),
                    s.accurate_seeds.to_string(),
                    opt(&s.median_iterations_to_accuracy),
                ]
            }),
        )
    }

    /// File names and contents, in writing order.
    pub fn render(&self) -> Result<Vec<(&'static str, String)>> {
        let mut files = vec![("config.json", self.config.to_json_pretty() + "\n")];
        if self.blackbox.is_empty() {
            files.push(("learning_curve.csv", self.learning_curve_csv()?));
            files.push(("metrics.csv", self.metrics_csv()?));
            files.push(("events.csv", self.events_csv()?));
            files.push(("theta.csv", self.theta_csv()?));
        } else {
            files.push(("blackbox.csv", self.blackbox_csv()?));
            files.push(("blackbox_summary.csv", self.blackbox_summary_csv()?));
        }
        Ok(files)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in self.render()? {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
