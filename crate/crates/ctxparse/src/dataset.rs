//! JSON-lines datasets: one example per line.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ctxparse_core::logic::{execute_flat, project_bc, Context, FlatLogicalForm, LogicalForm};
use ctxparse_core::text::{Example, PosTag, Utterance, Vocab};
use ctxparse_core::worlds::{parse_state, serialize_state, Domain, WorldState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CliError;

/// On-disk form of an example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub id: String,
    pub domain: String,
    pub world_0: String,
    pub utterances: Vec<String>,
    pub world_final: String,
    /// Flat logical form of each utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_lfs: Option<Vec<String>>,
    /// World after each utterance; the last equals `world_final`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worlds: Option<Vec<String>>,
    /// Per-token tags of each utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tags: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("unknown domain `{0}`")]
    Domain(String),
    #[error("{field}: {msg}")]
    State { field: String, msg: String },
    #[error("example has no utterances")]
    Empty,
    #[error("{field} has {found} entries for {expected} utterances")]
    Count {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("utterance {0}: tag count does not match its tokens")]
    Tags(usize),
    #[error("gold form {index}: {msg}")]
    Gold { index: usize, msg: String },
    #[error("world {0} disagrees with the gold forms")]
    Inconsistent(usize),
    #[error("the last world differs from world_final")]
    Final,
    #[error("{0}")]
    Unsupported(String),
}

fn state(field: &str, s: &str, domain: Domain) -> Result<WorldState, DataError> {
    parse_state(s, domain).map_err(|e| DataError::State {
        field: field.to_string(),
        msg: e.to_string(),
    })
}

impl ExampleRecord {
    pub fn from_example(ex: &Example) -> Self {
        let worlds = ex
            .targets
            .iter()
            .map(|t| t.as_ref().map(serialize_state))
            .collect::<Option<Vec<_>>>();
        let pos_tags = ex
            .utterances
            .iter()
            .map(|u| {
                u.tags
                    .as_ref()
                    .map(|t| t.iter().map(|x| x.name().to_string()).collect())
            })
            .collect::<Option<Vec<Vec<String>>>>();
        ExampleRecord {
            id: ex.id.clone(),
            domain: ex.domain.name().to_string(),
            world_0: serialize_state(&ex.initial),
            utterances: ex.utterances.iter().map(|u| u.text.clone()).collect(),
            world_final: serialize_state(ex.final_state()),
            gold_lfs: ex
                .gold
                .as_ref()
                .map(|g| g.iter().map(ToString::to_string).collect()),
            worlds,
            pos_tags,
        }
    }

    /// Validates the record and builds an example. Gold forms are replayed
    /// to recover intermediate worlds and must reach `world_final`.
    pub fn to_example(&self, vocab: &mut Vocab) -> Result<Example, DataError> {
        let domain =
            Domain::from_name(&self.domain).ok_or_else(|| DataError::Domain(self.domain.clone()))?;
        let n = self.utterances.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        let check = |field, found| {
            if found == n {
                Ok(())
            } else {
                Err(DataError::Count {
                    field,
                    expected: n,
                    found,
                })
            }
        };
        let initial = Arc::new(state("world_0", &self.world_0, domain)?);
        let last = state("world_final", &self.world_final, domain)?;
        let mut utterances = Vec::with_capacity(n);
        for (i, text) in self.utterances.iter().enumerate() {
            let u = Utterance::new(text, vocab);
            let u = match self.pos_tags.as_ref().map(|t| t.get(i)) {
                None => u,
                Some(None) => return Err(DataError::Count {
                    field: "pos_tags",
                    expected: n,
                    found: self.pos_tags.as_ref().map_or(0, Vec::len),
                }),
                Some(Some(tags)) => u
                    .with_tags(tags.iter().map(|t| PosTag::from_name(t)).collect())
                    .ok_or(DataError::Tags(i + 1))?,
            };
            utterances.push(u);
        }
        if let Some(t) = &self.pos_tags {
            check("pos_tags", t.len())?;
        }
        let mut targets: Vec<Option<WorldState>> = match &self.worlds {
            Some(ws) => {
                check("worlds", ws.len())?;
                ws.iter()
                    .enumerate()
                    .map(|(i, s)| state(&format!("worlds[{i}]"), s, domain).map(Some))
                    .collect::<Result<_, _>>()?
            }
            None => vec![None; n],
        };
        let gold = match &self.gold_lfs {
            None => None,
            Some(lfs) => {
                check("gold_lfs", lfs.len())?;
                let mut ctx = Context::from_shared(initial.clone());
                let mut flats: Vec<FlatLogicalForm> = Vec::with_capacity(n);
                for (i, s) in lfs.iter().enumerate() {
                    let err = |msg: String| DataError::Gold { index: i + 1, msg };
                    let lf = LogicalForm::parse(s).map_err(|e| err(e.to_string()))?;
                    let flat = project_bc(&lf, &ctx).map_err(|e| err(e.to_string()))?;
                    let (next, record) =
                        execute_flat(&flat, &ctx).map_err(|e| err(e.to_string()))?;
                    match &targets[i] {
                        Some(w) if *w != *next => return Err(DataError::Inconsistent(i + 1)),
                        _ => targets[i] = Some((*next).clone()),
                    }
                    ctx.history.push(record);
                    flats.push(flat);
                }
                Some(flats)
            }
        };
        match &targets[n - 1] {
            Some(w) if *w != last => return Err(DataError::Final),
            _ => targets[n - 1] = Some(last),
        }
        Ok(Example {
            id: self.id.clone(),
            domain,
            initial,
            utterances,
            targets,
            gold,
        })
    }
}

/// Input formats. Only JSON lines is read natively; other formats go through
/// a [`Converter`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Jsonl,
    SconeTsv,
}

/// Turns a foreign dataset file into records.
pub trait Converter {
    fn convert(&self, text: &str) -> Result<Vec<ExampleRecord>, DataError>;
}

/// Hook for the released tab-separated human datasets. The conversion itself
/// is done externally; this stub only reports that.
pub struct SconeTsv;

impl Converter for SconeTsv {
    fn convert(&self, _text: &str) -> Result<Vec<ExampleRecord>, DataError> {
        Err(DataError::Unsupported(
            "scone-tsv input must be converted to JSON lines first".into(),
        ))
    }
}

pub fn read_records(path: &Path, format: Format) -> Result<Vec<ExampleRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match format {
        Format::SconeTsv => SconeTsv
            .convert(&text)
            .map_err(|e| CliError::format(path, 0, e)),
        Format::Jsonl => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::format(path, i + 1, e)))
            .collect(),
    }
}

/// Reads and validates a dataset; line numbers are reported on failure.
pub fn read_dataset(path: &Path, format: Format, vocab: &mut Vocab) -> Result<Vec<Example>, CliError> {
    read_records(path, format)?
        .iter()
        .enumerate()
        .map(|(i, r)| r.to_example(vocab).map_err(|e| CliError::format(path, i + 1, e)))
        .collect()
}

pub fn write_dataset(path: &Path, examples: &[Example]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for ex in examples {
        let line = serde_json::to_string(&ExampleRecord::from_example(ex))
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}
