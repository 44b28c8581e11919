//! Long-format trace CSV: one row per building and absolute hour.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BuildingTrace;
use crate::error::{Error, Result};

pub const TRACE_COLUMNS: [&str; 8] = [
    "building_id",
    "hour",
    "nonshiftable_kw",
    "dhw_kw",
    "cooling_kw",
    "solar_kw",
    "outdoor_temp_c",
    "carbon_kg_per_kwh",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    building_id: usize,
    hour: usize,
    nonshiftable_kw: f64,
    dhw_kw: f64,
    cooling_kw: f64,
    solar_kw: f64,
    outdoor_temp_c: f64,
    carbon_kg_per_kwh: f64,
}

pub fn write_traces_csv<W: Write>(traces: &[BuildingTrace], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for tr in traces {
        for t in 0..tr.len() {
            out.serialize(Row {
                building_id: tr.building_id,
                hour: t,
                nonshiftable_kw: tr.nonshiftable[t],
                dhw_kw: tr.dhw[t],
                cooling_kw: tr.cooling[t],
                solar_kw: tr.solar[t],
                outdoor_temp_c: tr.outdoor_temp[t],
                carbon_kg_per_kwh: tr.carbon[t],
            })?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Reads and validates a trace file. Buildings come back in ascending id
/// order; each must cover hours `0..n` exactly once, with the same `n` for all.
pub fn load_traces_csv(path: &Path) -> Result<Vec<BuildingTrace>> {
    let fail = |message: String| Error::TraceLoad {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    for col in TRACE_COLUMNS {
        if !headers.iter().any(|h| h.trim() == col) {
            return Err(fail(format!("missing column {col}")));
        }
    }

    let mut by_building: BTreeMap<usize, Vec<Row>> = BTreeMap::new();
    for (i, rec) in reader.deserialize::<Row>().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let row = rec.map_err(|e| fail(format!("row {line}: {e}")))?;
        let values = [
            ("nonshiftable_kw", row.nonshiftable_kw),
            ("dhw_kw", row.dhw_kw),
            ("cooling_kw", row.cooling_kw),
            ("solar_kw", row.solar_kw),
            ("outdoor_temp_c", row.outdoor_temp_c),
            ("carbon_kg_per_kwh", row.carbon_kg_per_kwh),
        ];
        for (name, v) in values {
            if !v.is_finite() {
                return Err(fail(format!("row {line}: {name} is not a finite number")));
            }
        }
        for (name, v) in &values[..4] {
            if *v < 0.0 {
                return Err(fail(format!("row {line}: {name} is negative ({v})")));
            }
        }
        by_building.entry(row.building_id).or_default().push(row);
    }
    if by_building.is_empty() {
        return Err(fail("no data rows".into()));
    }

    let mut traces = Vec::with_capacity(by_building.len());
    for (id, mut rows) in by_building {
        rows.sort_by_key(|r| r.hour);
        for (expected, r) in rows.iter().enumerate() {
            if r.hour != expected {
                return Err(fail(format!(
                    "building {id}: expected hour {expected}, found hour {}",
                    r.hour
                )));
            }
        }
        traces.push(BuildingTrace {
            building_id: id,
            nonshiftable: rows.iter().map(|r| r.nonshiftable_kw).collect(),
            dhw: rows.iter().map(|r| r.dhw_kw).collect(),
            cooling: rows.iter().map(|r| r.cooling_kw).collect(),
            solar: rows.iter().map(|r| r.solar_kw).collect(),
            outdoor_temp: rows.iter().map(|r| r.outdoor_temp_c).collect(),
            carbon: rows.iter().map(|r| r.carbon_kg_per_kwh).collect(),
        });
    }
    super::validate_traces(&traces).map_err(|e| fail(e.to_string()))?;
    Ok(traces)
}
