//! CSV and text writers for run artifacts.
//!
//! Every file is written to a sibling temporary path and renamed into place,
//! so a crash never leaves a partially written artifact behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::archive::{Container, Individual};
use crate::env::TraceStep;
use crate::error::{Error, Result};
use crate::evolution::MetricsLog;
use crate::relevance::RelevanceBuffer;

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Float formatting shared by every CSV: shortest round-trip representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Builds a CSV document in memory and writes it atomically.
fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(path, e))?;
    write_atomic(path, &bytes)
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

/// Archive: id, parent, genotype, descriptor, fitness, relevance, and final
/// pose columns, one row per member ordered by id.
pub fn write_archive(path: &Path, container: &Container, genotype_dim: usize) -> Result<()> {
    let mut header = vec!["id".to_string(), "parent".to_string()];
    header.extend(numbered("g", genotype_dim));
    header.extend(numbered("bd", container.dim()));
    header.extend(
        ["fitness", "relevance", "x", "y", "theta", "duty", "mean_abs_turn"]
            .iter()
            .map(|s| s.to_string()),
    );
    let rows = container.sorted_by_id().into_iter().map(archive_row);
    write_csv(path, &header, rows)
}

fn archive_row(m: &Individual) -> Vec<String> {
    let mut row = vec![m.id.to_string(), m.parent.map(|p| p.to_string()).unwrap_or_default()];
    row.extend(m.genotype.iter().map(|&v| fmt_f64(v)));
    row.extend(m.descriptor.iter().map(|&v| fmt_f64(v)));
    let s = &m.summary;
    row.extend(
        [m.fitness, m.relevance, s.x, s.y, s.theta, s.duty, s.mean_abs_turn]
            .into_iter()
            .map(fmt_f64),
    );
    row
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveRecord {
    pub id: u64,
    pub genotype: Vec<f64>,
    pub descriptor: Vec<f64>,
    pub fitness: f64,
}

/// Reads the id, genotype, descriptor and fitness columns of an archive CSV.
pub fn read_archive(path: &Path) -> Result<Vec<ArchiveRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols = |prefix: &str| -> Vec<usize> {
        header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
            .map(|(i, _)| i)
            .collect()
    };
    let (g_cols, bd_cols) = (cols("g"), cols("bd"));
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(path, format!("missing column `{name}`")))
    };
    let (id_col, fit_col) = (col("id")?, col("fitness")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|e| csv_err(path, e)) };
        out.push(ArchiveRecord {
            id: rec[id_col].parse().map_err(|e| csv_err(path, e))?,
            genotype: g_cols.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            descriptor: bd_cols.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            fitness: num(fit_col)?,
        });
    }
    Ok(out)
}

pub const METRICS_HEADER: [&str; 10] = [
    "iteration",
    "container_size",
    "d_min",
    "mean_fitness",
    "task_score",
    "container_score",
    "wall_time_ms",
    "qd_score",
    "encoder_update",
    "task_solve",
];

pub fn write_metrics(path: &Path, log: &MetricsLog) -> Result<()> {
    let header: Vec<String> = METRICS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = log.rows.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            r.container_size.to_string(),
            fmt_f64(r.d_min),
            fmt_opt(r.mean_fitness),
            fmt_opt(r.task_score),
            fmt_f64(r.container_score),
            r.wall_time_ms.to_string(),
            fmt_f64(r.qd_score),
            u8::from(r.encoder_update).to_string(),
            u8::from(r.task_solve).to_string(),
        ]
    });
    write_csv(path, &header, rows)
}

/// Buffer dump: push index, id and descriptor, oldest first.
pub fn write_buffer(path: &Path, buffer: &RelevanceBuffer, descriptor_dim: usize) -> Result<()> {
    let mut header = vec!["push_index".to_string(), "id".to_string()];
    header.extend(numbered("bd", descriptor_dim));
    let rows = buffer.iter_ordered().map(|e| {
        let mut row = vec![e.push_index.to_string(), e.id.to_string()];
        row.extend(e.descriptor.iter().map(|&v| fmt_f64(v)));
        row
    });
    write_csv(path, &header, rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub replication: usize,
    pub variant: String,
    pub task: String,
    pub iteration: u64,
    pub task_score: Option<f64>,
    pub container_score: f64,
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let header: Vec<String> = ["replication", "variant", "task", "iteration", "task_score", "container_score"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = rows.iter().map(|r| {
        vec![
            r.replication.to_string(),
            r.variant.clone(),
            r.task.clone(),
            r.iteration.to_string(),
            fmt_opt(r.task_score),
            fmt_f64(r.container_score),
        ]
    });
    write_csv(path, &header, rows)
}

/// Coverage curves: (variant, f_min, coverage) with an extra run column.
pub fn write_coverage(path: &Path, rows: &[(String, String, f64, f64)]) -> Result<()> {
    let header: Vec<String> = ["run", "variant", "f_min", "coverage"].iter().map(|s| s.to_string()).collect();
    let rows = rows
        .iter()
        .map(|(run, variant, f, c)| vec![run.clone(), variant.clone(), fmt_f64(*f), fmt_f64(*c)]);
    write_csv(path, &header, rows)
}

pub fn write_trace(path: &Path, trace: &[TraceStep]) -> Result<()> {
    let header: Vec<String> = ["t", "x", "y", "theta", "v", "omega"].iter().map(|s| s.to_string()).collect();
    let rows = trace
        .iter()
        .map(|s| [s.t, s.x, s.y, s.theta, s.v, s.omega].into_iter().map(fmt_f64).collect());
    write_csv(path, &header, rows)
}
