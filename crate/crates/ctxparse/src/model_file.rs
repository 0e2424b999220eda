//! Versioned text format for trained parameters.
//!
//! ```text
//! ctxparse-model v1 mode=C features=F1,F2,F3 config=3f2a...
//! F1|contains:mix|mix	0.25	1.5
//! ```
//!
//! Lines after the header are `feature<TAB>weight<TAB>accumulator`, sorted by
//! feature name. Numbers use the shortest representation that round-trips.

use std::fs;
use std::path::Path;

use ctxparse_core::model::{FeatureConfig, FeatureKey, Mode, Params};
use ctxparse_core::text::Vocab;
use sha2::{Digest, Sha256};

use crate::error::CliError;

const MAGIC: &str = "ctxparse-model";
const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelHeader {
    pub mode: Mode,
    pub features: FeatureConfig,
    /// Digest of the configuration that produced the model.
    pub config: String,
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn render_model(header: &ModelHeader, params: &Params, vocab: &Vocab) -> String {
    let mut out = format!(
        "{MAGIC} {VERSION} mode={} features={} config={}\n",
        header.mode, header.features, header.config
    );
    for (name, w, a) in params.sorted_entries(vocab) {
        out.push_str(&format!("{name}\t{w:?}\t{a:?}\n"));
    }
    out
}

pub fn write_model(
    path: &Path,
    header: &ModelHeader,
    params: &Params,
    vocab: &Vocab,
) -> Result<(), CliError> {
    fs::write(path, render_model(header, params, vocab)).map_err(|e| CliError::io(path, e))
}

fn parse_header(line: &str) -> Result<ModelHeader, String> {
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err("not a model file".into());
    }
    match parts.next() {
        Some(VERSION) => {}
        v => return Err(format!("unsupported model version {}", v.unwrap_or(""))),
    }
    let (mut mode, mut features, mut config) = (None, None, None);
    for p in parts {
        match p.split_once('=') {
            Some(("mode", m)) => mode = Mode::from_name(m),
            Some(("features", f)) => features = FeatureConfig::parse(f),
            Some(("config", c)) => config = Some(c.to_string()),
            _ => return Err(format!("bad header field `{p}`")),
        }
    }
    match (mode, features, config) {
        (Some(mode), Some(features), Some(config)) => Ok(ModelHeader {
            mode,
            features,
            config,
        }),
        _ => Err("incomplete header".into()),
    }
}

pub fn parse_model(text: &str, vocab: &mut Vocab) -> Result<(ModelHeader, Params), (usize, String)> {
    let mut lines = text.lines();
    let header = parse_header(lines.next().unwrap_or("")).map_err(|e| (1, e))?;
    let mut params = Params::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let mut cols = line.split('\t');
        let (Some(name), Some(w), Some(a), None) = (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err((n, "expected three tab-separated columns".into()));
        };
        let key = FeatureKey::parse(name, vocab).map_err(|e| (n, format!("{name}: {e}")))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| (n, format!("bad number `{s}`")))
        };
        let (w, a) = (num(w)?, num(a)?);
        if a < 0.0 {
            return Err((n, "negative accumulator".into()));
        }
        if w != 0.0 {
            params.weights.insert(key, w);
        }
        if a != 0.0 {
            params.accum.insert(key, a);
        }
    }
    Ok((header, params))
}

pub fn read_model(path: &Path, vocab: &mut Vocab) -> Result<(ModelHeader, Params), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_model(&text, vocab).map_err(|(line, msg)| CliError::format(path, line, msg))
}
