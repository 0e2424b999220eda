//! Metrics CSV files.

use std::path::Path;

use ctxparse_core::learner::{EvalRow, IterationMetrics};
use serde::Serialize;

use crate::error::CliError;

#[derive(Serialize)]
struct TrainRow<'a> {
    iteration: usize,
    split: &'a str,
    #[serde(rename = "L")]
    l: usize,
    accuracy: f64,
    oracle: f64,
    skipped: usize,
}

#[derive(Serialize)]
struct EvalLine {
    #[serde(rename = "L")]
    l: usize,
    accuracy: f64,
    oracle: f64,
    beam_falloff: f64,
}

const TRAIN_HEADER: [&str; 6] = ["iteration", "split", "L", "accuracy", "oracle", "skipped"];
const EVAL_HEADER: [&str; 4] = ["L", "accuracy", "oracle", "beam_falloff"];

// The header is written by hand so that a file without rows still has one.
fn write_rows<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = T>,
) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    w.write_record(header).map_err(|e| CliError::Internal(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One `train` row per iteration (L is the curriculum prefix) followed by
/// `test` rows for the final parameters, if any. Test rows count examples
/// whose target is unknown as skipped.
pub fn write_train_metrics(
    path: &Path,
    iterations: &[IterationMetrics],
    test: &[EvalRow],
    test_size: usize,
) -> Result<(), CliError> {
    let last = iterations.last().map_or(0, |m| m.iteration);
    let train = iterations.iter().map(|m| TrainRow {
        iteration: m.iteration,
        split: "train",
        l: m.prefix,
        accuracy: m.accuracy,
        oracle: m.oracle,
        skipped: m.skipped,
    });
    let test = test.iter().map(|r| TrainRow {
        iteration: last,
        split: "test",
        l: r.l,
        accuracy: r.accuracy,
        oracle: r.oracle,
        skipped: test_size - r.examples,
    });
    write_rows(path, &TRAIN_HEADER, train.chain(test))
}

pub fn write_eval_metrics(path: &Path, rows: &[EvalRow]) -> Result<(), CliError> {
    write_rows(
        path,
        &EVAL_HEADER,
        rows.iter().map(|r| EvalLine {
            l: r.l,
            accuracy: r.accuracy,
            oracle: r.oracle,
            beam_falloff: r.beam_falloff,
        }),
    )
}
