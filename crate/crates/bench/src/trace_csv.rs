//! Convergence traces as CSV:
//! `iter,mismatch_norm,gen_load_error,objective,lambda_<i>...,mu_<j>...,wall_time_s`
//! where `<i>` is a boundary bus id and `<j>` a 1-based line number.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the in-memory trace bit for bit.

use crate::run::BenchError;
use sced_core::trace::{ConvergenceTrace, TraceRecord};
use std::io::{Read, Write};
use std::path::Path;

pub fn trace_header(trace: &ConvergenceTrace) -> Vec<String> {
    let mut h: Vec<String> = ["iter", "mismatch_norm", "gen_load_error", "objective"].map(String::from).to_vec();
    h.extend(trace.lambda_labels.iter().map(|i| format!("lambda_{i}")));
    h.extend(trace.mu_labels.iter().map(|j| format!("mu_{j}")));
    h.push("wall_time_s".into());
    h
}

fn csv_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Csv(e.to_string())
}

pub fn write_trace<W: Write>(trace: &ConvergenceTrace, w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trace_header(trace)).map_err(csv_err)?;
    for r in &trace.records {
        let mut row = vec![r.iter.to_string(), r.mismatch_norm.to_string(), r.gen_load_error.to_string(), r.objective.to_string()];
        row.extend(r.lambda.iter().map(f64::to_string));
        row.extend(r.mu.iter().map(f64::to_string));
        row.push(r.wall_time_s.to_string());
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn labels(headers: &[&str], prefix: &str) -> Result<Vec<usize>, BenchError> {
    headers
        .iter()
        .filter_map(|h| h.strip_prefix(prefix))
        .map(|id| id.parse().map_err(|_| csv_err(format!("bad column label `{prefix}{id}`"))))
        .collect()
}

pub fn read_trace<R: Read>(r: R) -> Result<ConvergenceTrace, BenchError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let lambda_labels = labels(&cols, "lambda_")?;
    let mu_labels = labels(&cols, "mu_")?;
    let trace = ConvergenceTrace { lambda_labels, mu_labels, records: Vec::new() };
    if cols != trace_header(&trace).iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(csv_err(format!("unexpected header `{}`", cols.join(","))));
    }
    let (nl, nm) = (trace.lambda_labels.len(), trace.mu_labels.len());
    let mut records = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| -> Result<f64, BenchError> {
            rec[i].parse::<f64>().map_err(|e| csv_err(format!("line {}: {e}", records.len() + 2)))
        };
        let vec_at = |from: usize, n: usize| (from..from + n).map(f).collect::<Result<Vec<_>, _>>();
        records.push(TraceRecord {
            iter: rec[0].parse().map_err(csv_err)?,
            mismatch_norm: f(1)?,
            gen_load_error: f(2)?,
            objective: f(3)?,
            lambda: vec_at(4, nl)?,
            mu: vec_at(4 + nl, nm)?,
            wall_time_s: f(4 + nl + nm)?,
        });
    }
    Ok(ConvergenceTrace { records, ..trace })
}

pub fn save_trace(trace: &ConvergenceTrace, path: impl AsRef<Path>) -> Result<(), BenchError> {
    write_trace(trace, std::fs::File::create(path)?)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ConvergenceTrace, BenchError> {
    read_trace(std::fs::File::open(path)?)
}
