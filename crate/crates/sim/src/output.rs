//! CSV persistence of result tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{FilterKind, Variant};
use crate::error::SimResult;
use crate::experiment::{mean, ResultTable};

pub const STEP_HEADER: [&str; 11] = [
    "run",
    "step",
    "sensor",
    "filter_kind",
    "mode",
    "t_fit",
    "ospa",
    "ospa_loc",
    "ospa_card",
    "n_est",
    "n_true",
];

pub const AGGREGATE_HEADER: [&str; 8] = [
    "mode",
    "t_fit",
    "sensor",
    "filter_kind",
    "mean_ospa",
    "mean_loc",
    "mean_card",
    "mean_fusion_time_ns",
];

pub const STEPS_FILE: &str = "steps.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variant: Variant,
    pub sensor: usize,
    pub filter_kind: FilterKind,
    pub mean_ospa: f64,
    pub mean_loc: f64,
    pub mean_card: f64,
    /// Zero when the variant never fuses.
    pub mean_fusion_time_ns: f64,
}

/// Means over runs and steps for every (variant, sensor), in table order.
pub fn aggregate(table: &ResultTable) -> Vec<AggregateRow> {
    let mut keys: Vec<(Variant, usize, FilterKind)> = Vec::new();
    for r in &table.records {
        let key = (r.variant(), r.sensor, r.filter_kind);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(variant, sensor, filter_kind)| {
            let rows: Vec<_> = table
                .records
                .iter()
                .filter(|r| r.variant() == variant && r.sensor == sensor)
                .collect();
            let avg = |f: &dyn Fn(&&crate::experiment::StepRecord) -> f64| mean(rows.iter().map(f)).unwrap_or(0.0);
            AggregateRow {
                variant,
                sensor,
                filter_kind,
                mean_ospa: avg(&|r| r.ospa),
                mean_loc: avg(&|r| r.ospa_loc),
                mean_card: avg(&|r| r.ospa_card),
                mean_fusion_time_ns: mean(rows.iter().filter_map(|r| r.fusion_time_ns.map(|t| t as f64))).unwrap_or(0.0),
            }
        })
        .collect()
}

pub fn write_steps(table: &ResultTable, out: impl Write) -> SimResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEP_HEADER)?;
    for r in &table.records {
        w.write_record([
            r.run.to_string(),
            r.step.to_string(),
            r.sensor.to_string(),
            r.filter_kind.as_str().to_string(),
            r.mode.as_str().to_string(),
            r.t_fit.to_string(),
            r.ospa.to_string(),
            r.ospa_loc.to_string(),
            r.ospa_card.to_string(),
            r.n_est.to_string(),
            r.n_true.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate(table: &ResultTable, out: impl Write) -> SimResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for a in aggregate(table) {
        w.write_record([
            a.variant.mode.as_str().to_string(),
            a.variant.t_fit.to_string(),
            a.sensor.to_string(),
            a.filter_kind.as_str().to_string(),
            a.mean_ospa.to_string(),
            a.mean_loc.to_string(),
            a.mean_card.to_string(),
            a.mean_fusion_time_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `steps.csv` and `aggregate.csv` into `dir`, creating it if needed.
pub fn write_results(table: &ResultTable, dir: &Path) -> SimResult<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let steps = dir.join(STEPS_FILE);
    let agg = dir.join(AGGREGATE_FILE);
    write_steps(table, std::io::BufWriter::new(std::fs::File::create(&steps)?))?;
    write_aggregate(table, std::io::BufWriter::new(std::fs::File::create(&agg)?))?;
    Ok((steps, agg))
}
