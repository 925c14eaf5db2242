//! Report files: `metrics.csv`, `verdicts.json`, `series/<mr>.csv` and
//! `run.json`. Numbers in CSV files use six decimals and `\n` line endings.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{derive, ConfusionCounts, MetricRecord, Task};
use crate::pipeline::{write_run_json, RunRecord};
use crate::testgen::{params_for, MrId, TcId, TransformParams};
use crate::transforms::OcclusionArtifact;
use crate::verify::MrVerdict;

pub const METRICS_FILE: &str = "metrics.csv";
pub const VERDICTS_FILE: &str = "verdicts.json";
pub const SERIES_DIR: &str = "series";
pub const RUN_FILE: &str = "run.json";

const METRICS_HEADER: [&str; 9] = [
    "model", "tc_id", "task", "tp", "fp", "fn", "precision", "recall", "f1",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse {
            path: path.to_path_buf(),
            entry: e.position().map(|p| format!("line {}", p.line())),
            message: e.to_string(),
        }
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_metrics_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([
            r.model.clone(),
            r.tc_id.to_string(),
            r.task.to_string(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.fn_.to_string(),
            fixed(r.precision),
            fixed(r.recall),
            fixed(r.f1),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `metrics.csv` back. Ratios are recomputed from the counts, so the
/// records are exact rather than limited to the printed precision.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            entry: Some("header".into()),
            message: format!("expected columns {}", METRICS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            entry: Some(format!("line {}", i + 2)),
            message,
        };
        let tc: TcId = row[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let task: Task = row[2].parse().map_err(bad)?;
        let count = |j: usize| -> Result<u64> {
            row[j].parse().map_err(|_| bad(format!("bad count `{}`", &row[j])))
        };
        let counts = ConfusionCounts {
            tp: count(3)?,
            fp: count(4)?,
            fn_: count(5)?,
        };
        out.push(derive(&row[0], tc, task, counts));
    }
    Ok(out)
}

pub fn write_verdicts_json(path: &Path, verdicts: &[MrVerdict]) -> Result<()> {
    let mut json = serde_json::to_string_pretty(verdicts).expect("verdicts serialize");
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_verdicts_json(path: &Path) -> Result<Vec<MrVerdict>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        entry: None,
        message: e.to_string(),
    })
}

/// Every distinct metric record a set of verdicts was computed from.
pub fn verdict_records(verdicts: &[MrVerdict]) -> Vec<MetricRecord> {
    let mut seen: BTreeMap<(String, TcId, Task), MetricRecord> = BTreeMap::new();
    for v in verdicts {
        for r in &v.records {
            seen.entry((r.model.clone(), r.tc_id, r.task))
                .or_insert_with(|| r.clone());
        }
    }
    seen.into_values().collect()
}

fn series_label(mr: MrId) -> &'static str {
    match mr {
        MrId::Mr1 => "level",
        MrId::Mr2 => "finger",
        MrId::Mr3 => "gamma",
        MrId::Mr4 => "direction",
    }
}

fn series_x(tc: TcId) -> String {
    match (tc, params_for(tc, &OcclusionArtifact::default(), 1)) {
        (TcId::Occlusion(n), _) => n.to_string(),
        (TcId::Numbered(n @ 2..=6), _) => crate::dataset::Finger::ALL[n as usize - 2]
            .name()
            .to_string(),
        (_, TransformParams::Gamma { gamma }) => gamma.value().to_string(),
        (_, TransformParams::MotionBlur { direction, .. }) => direction.to_string(),
        _ => String::new(),
    }
}

/// Writes one plot-ready series per relation present in `records`: a row per
/// (model, test case) with precision, recall and F1 for both tasks.
pub fn write_series(dir: &Path, records: &[MetricRecord]) -> Result<Vec<std::path::PathBuf>> {
    let mut by_key: BTreeMap<(MrId, &str, TcId), BTreeMap<Task, &MetricRecord>> = BTreeMap::new();
    for r in records {
        if let Some(mr) = r.tc_id.mr() {
            by_key
                .entry((mr, r.model.as_str(), r.tc_id))
                .or_default()
                .insert(r.task, r);
        }
    }
    let mut written = Vec::new();
    for mr in MrId::ALL {
        let rows: Vec<_> = by_key.iter().filter(|((m, ..), _)| *m == mr).collect();
        if rows.is_empty() {
            continue;
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.csv", mr.as_str().to_ascii_lowercase()));
        let mut w = csv_writer(&path)?;
        let mut header = vec!["model".to_string()];
        if mr != MrId::Mr1 {
            header.push("tc_id".into());
        }
        header.push(series_label(mr).into());
        for task in Task::ALL {
            for m in ["precision", "recall", "f1"] {
                header.push(format!("{task}_{m}"));
            }
        }
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        for ((_, model, tc), tasks) in rows {
            let mut row = vec![model.to_string()];
            if mr != MrId::Mr1 {
                row.push(tc.to_string());
            }
            row.push(series_x(*tc));
            for task in Task::ALL {
                match tasks.get(&task) {
                    Some(r) => row.extend([fixed(r.precision), fixed(r.recall), fixed(r.f1)]),
                    None => row.extend(std::iter::repeat_n(String::new(), 3)),
                }
            }
            w.write_record(&row).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes every report file for a run into `out_dir`.
pub fn emit_reports(record: &RunRecord, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_metrics_csv(&out_dir.join(METRICS_FILE), &record.metrics)?;
    write_verdicts_json(&out_dir.join(VERDICTS_FILE), &record.verdicts)?;
    write_series(&out_dir.join(SERIES_DIR), &record.metrics)?;
    write_run_json(record, out_dir)
}
