//! Command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctxparse_core::datagen::{gen_dataset, GenConfig, TemplateSet};
use ctxparse_core::learner::{aggregate, evaluate_example, train, ExampleEval, TrainConfig};
use ctxparse_core::logic::{project_bc, Context, Derivation, LogicalForm};
use ctxparse_core::model::{featurize, FeatureConfig, Item, Mode, Params};
use ctxparse_core::parser::{parse_text, BeamConfig, Parse, TraceSink};
use ctxparse_core::text::{Example, Utterance, Vocab};
use ctxparse_core::worlds::{parse_state, serialize_state, Domain};
use rayon::prelude::*;
use serde_json::json;

use crate::dataset::{read_dataset, write_dataset, Format};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::metrics::{write_eval_metrics, write_train_metrics};
use crate::model_file::{digest, read_model, write_model, ModelHeader};

#[derive(Debug, Parser)]
#[command(
    name = "ctxparse",
    version,
    about = "Context-dependent semantic parsing learned from final world states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an artificial train/test dataset.
    Generate(GenerateArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Accuracy, oracle accuracy and beam fall-off per prefix length.
    Eval(EvalArgs),
    /// Dump the best parse of every example.
    Parse(ParseArgs),
    /// List model weights or the features of one logical form.
    InspectFeatures(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::A => Mode::A,
            ModeArg::B => Mode::B,
            ModeArg::C => Mode::C,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Alchemy,
    Scene,
    Tangrams,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Domain {
        match d {
            DomainArg::Alchemy => Domain::Alchemy,
            DomainArg::Scene => Domain::Scene,
            DomainArg::Tangrams => Domain::Tangrams,
        }
    }
}

fn parse_features(s: &str) -> Result<FeatureConfig, String> {
    FeatureConfig::parse(s).ok_or_else(|| format!("bad feature set `{s}` (try F1-F3 or all)"))
}

fn parse_curriculum(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

/// Search settings shared by the commands that parse.
#[derive(Clone, Debug, Args)]
pub struct SearchArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Beam width within an utterance.
    #[arg(long)]
    pub beam: Option<usize>,
    /// Beam width between utterances; defaults to --beam.
    #[arg(long)]
    pub inter_beam: Option<usize>,
    #[arg(long)]
    pub max_predicates: Option<usize>,
    /// Feature families, e.g. `F1-F3`, `F1,F2,F8` or `all`.
    #[arg(long, value_parser = parse_features)]
    pub features: Option<FeatureConfig>,
    /// Restrict anchors by part-of-speech tags (mode A).
    #[arg(long)]
    pub constraints: bool,
}

const DEFAULT_BEAM: usize = 40;

impl SearchArgs {
    fn resolve(
        &self,
        mode: Mode,
        features: FeatureConfig,
    ) -> Result<(BeamConfig, FeatureConfig), CliError> {
        let mode = self.mode.map_or(mode, Mode::from);
        let k = self.beam.unwrap_or(DEFAULT_BEAM);
        let mut cfg = BeamConfig::new(mode, k, self.inter_beam.unwrap_or(k));
        if let Some(b) = self.max_predicates {
            cfg.max_predicates = b;
        }
        cfg.constraints = self.constraints;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok((cfg, self.features.unwrap_or(features)))
    }
}

fn search_json(cfg: &BeamConfig, features: FeatureConfig) -> serde_json::Value {
    json!({
        "mode": cfg.mode.to_string(),
        "beam": cfg.k_intra,
        "inter_beam": cfg.k_inter,
        "max_predicates": cfg.max_predicates,
        "constraints": cfg.constraints,
        "features": features.to_string(),
    })
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    #[arg(long, default_value_t = 500)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    /// Utterances per example.
    #[arg(long = "L", alias = "length", default_value_t = 5)]
    pub length: usize,
    /// Weight multiplier for reusing the previous action or its entities.
    #[arg(long, default_value_t = 5.0)]
    pub recency_boost: f64,
    /// Template file (`action<TAB>surface<TAB>tags`); built-in templates otherwise.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluated with the final parameters; rows go to the metrics file.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value_t = 6)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.001)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Prefix length per iteration; the last value repeats.
    #[arg(long, value_parser = parse_curriculum, default_value = "1,1,2")]
    pub curriculum: std::vec::Vec<usize>,
    /// Initialize from a saved model (normally a mode-C model).
    #[arg(long)]
    pub bootstrap_from: Option<PathBuf>,
    /// Longest prefix evaluated on --test.
    #[arg(long)]
    pub max_l: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
    /// Mode and features default to the model's.
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub max_l: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub max_l: Option<usize>,
    /// Only the first N examples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Also write the surviving hypotheses of every search step.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of weights listed, largest magnitude first.
    #[arg(long, default_value_t = 50)]
    pub top: usize,
    /// Keep features whose name contains this string.
    #[arg(long)]
    pub filter: Option<String>,
    /// Featurize this logical form instead of listing weights.
    #[arg(long, requires_all = ["domain", "world", "utterance"])]
    pub lf: Option<String>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long)]
    pub world: Option<String>,
    #[arg(long)]
    pub utterance: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_parser = parse_features)]
    pub features: Option<FeatureConfig>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write `features.tsv` and a manifest here instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli)));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => 4,
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => eval(a),
        Command::Parse(a) => parse(a),
        Command::InspectFeatures(a) => inspect(a),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let domain = Domain::from(a.domain);
    let mut cfg = GenConfig::new(domain);
    cfg.n_train = a.n_train;
    cfg.n_test = a.n_test;
    cfg.length = a.length;
    cfg.recency_boost = a.recency_boost;
    cfg.seed = a.seed;
    let mut inputs = Vec::new();
    if let Some(p) = &a.templates {
        let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        cfg.templates = TemplateSet::parse(&text).map_err(|e| CliError::format(p, 0, e))?;
        inputs.push(path_str(p));
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new(
        "generate",
        a.seed,
        json!({
            "domain": domain.name(),
            "n_train": cfg.n_train,
            "n_test": cfg.n_test,
            "L": cfg.length,
            "recency_boost": cfg.recency_boost,
            "templates": digest(&cfg.templates.render_file()),
        }),
    );
    manifest.inputs = inputs;
    let mut vocab = Vocab::new();
    let (train_set, test_set) = manifest
        .time("generate", || gen_dataset(&cfg, &mut vocab))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    create_dir(&a.out)?;
    write_dataset(&a.out.join("train.jsonl"), &train_set)?;
    write_dataset(&a.out.join("test.jsonl"), &test_set)?;
    write_file(&a.out.join("templates.tsv"), &cfg.templates.render_file())?;
    manifest.outputs = ["train.jsonl", "test.jsonl", "templates.tsv"].map(String::from).to_vec();
    manifest.write(&a.out)
}

fn check_finite(params: &Params) -> Result<(), CliError> {
    if params
        .weights
        .values()
        .chain(params.accum.values())
        .all(|x| x.is_finite())
    {
        Ok(())
    } else {
        Err(CliError::Internal("non-finite parameter after training".into()))
    }
}

fn evaluate_parallel(
    data: &[Example],
    params: &Params,
    features: FeatureConfig,
    cfg: &BeamConfig,
    max_l: usize,
) -> Vec<ctxparse_core::learner::EvalRow> {
    let evals: Vec<ExampleEval> = data
        .par_iter()
        .map(|ex| evaluate_example(ex, params, features, cfg, max_l))
        .collect();
    aggregate(&evals)
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let mut vocab = Vocab::new();
    let data = read_dataset(&a.data, a.format, &mut vocab)?;
    let test = match &a.test {
        Some(p) => Some(read_dataset(p, a.format, &mut vocab)?),
        None => None,
    };
    let init = match &a.bootstrap_from {
        Some(p) => {
            let (h, params) = read_model(p, &mut vocab)?;
            if h.mode != Mode::C {
                eprintln!("note: bootstrapping from a mode-{} model", h.mode);
            }
            params
        }
        None => Params::new(),
    };
    let (beam, features) = a.search.resolve(Mode::C, FeatureConfig::ALL)?;
    let mut cfg = TrainConfig::new(beam);
    cfg.iterations = a.iterations;
    cfg.l1 = a.l1;
    cfg.eta = a.eta;
    cfg.curriculum = a.curriculum.clone();
    cfg.features = features;
    cfg.seed = a.seed;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let max_l = a.max_l.unwrap_or(usize::MAX);
    let mut config = search_json(&cfg.beam, features);
    let extra = json!({
        "iterations": cfg.iterations,
        "l1": cfg.l1,
        "eta": cfg.eta,
        "curriculum": cfg.curriculum,
        "max_l": a.max_l,
        "bootstrap": a.bootstrap_from.is_some(),
    });
    config
        .as_object_mut()
        .expect("object")
        .extend(extra.as_object().expect("object").clone());
    let mut manifest = RunManifest::new("train", a.seed, config.clone());
    manifest.inputs = std::iter::once(&a.data)
        .chain(&a.test)
        .chain(&a.bootstrap_from)
        .map(|p| path_str(p))
        .collect();
    let (params, iterations) = manifest.time("train", || train(&data, &cfg, init));
    check_finite(&params)?;
    let test_rows = match &test {
        Some(t) => manifest.time("test", || {
            evaluate_parallel(t, &params, features, &cfg.beam, max_l)
        }),
        None => Vec::new(),
    };
    create_dir(&a.out)?;
    let header = ModelHeader {
        mode: cfg.beam.mode,
        features,
        config: digest(&config.to_string()),
    };
    write_model(&a.out.join("model.tsv"), &header, &params, &vocab)?;
    write_train_metrics(
        &a.out.join("metrics.csv"),
        &iterations,
        &test_rows,
        test.as_ref().map_or(0, Vec::len),
    )?;
    manifest.outputs = ["model.tsv", "metrics.csv"].map(String::from).to_vec();
    manifest.write(&a.out)
}

/// Loads a model and a dataset sharing one vocabulary.
fn load(
    model: &Path,
    data: &Path,
    format: Format,
    search: &SearchArgs,
) -> Result<(Params, Vec<Example>, BeamConfig, FeatureConfig), CliError> {
    let mut vocab = Vocab::new();
    let examples = read_dataset(data, format, &mut vocab)?;
    let (header, params) = read_model(model, &mut vocab)?;
    let (cfg, features) = search.resolve(header.mode, header.features)?;
    Ok((params, examples, cfg, features))
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (params, data, cfg, features) = load(&a.model, &a.data, a.format, &a.search)?;
    let max_l = a.max_l.unwrap_or(usize::MAX);
    let mut config = search_json(&cfg, features);
    config["max_l"] = json!(a.max_l);
    let mut manifest = RunManifest::new("eval", a.seed, config);
    manifest.inputs = vec![path_str(&a.model), path_str(&a.data)];
    let rows = manifest.time("eval", || {
        evaluate_parallel(&data, &params, features, &cfg, max_l)
    });
    create_dir(&a.out)?;
    write_eval_metrics(&a.out.join("eval.csv"), &rows)?;
    manifest.outputs = vec!["eval.csv".into()];
    manifest.write(&a.out)
}

/// Collects trace events as text lines.
#[derive(Default)]
pub struct TextTrace(pub String);

impl TraceSink for TextTrace {
    fn hypothesis(&mut self, utterance: usize, step: usize, mode: Mode, stack: &str, score: f64) {
        let _ = writeln!(self.0, "{utterance}.{step} {mode} {score:.6} {stack}");
    }

    fn step(&mut self, utterance: usize, step: usize, mode: Mode, generated: usize, kept: usize) {
        let _ = writeln!(
            self.0,
            "{utterance}.{step} {mode} generated={generated} kept={kept}"
        );
    }
}

/// One line per utterance of a parse.
pub fn render_parse(p: &Parse, mode: Mode) -> String {
    let mut out = String::new();
    for (i, step) in p.steps().iter().enumerate() {
        let _ = write!(out, "{}\t{}", i + 1, step.derivation.lf);
        if mode == Mode::A {
            let anchors: Vec<String> = step
                .derivation
                .anchors
                .iter()
                .map(|a| a.map_or("_".to_string(), |s| s.to_string()))
                .collect();
            let _ = write!(out, " @[{}]", anchors.join(","));
        }
        let _ = writeln!(out, "\t=> {}", step.flat);
    }
    out
}

fn parse_one(ex: &Example, params: &Params, features: FeatureConfig, cfg: &BeamConfig, max_l: usize, trace: bool) -> (String, String) {
    let n = ex.len().min(max_l);
    let mut sink = TextTrace::default();
    let out = parse_text(
        &ex.utterances[..n],
        &ex.initial,
        params,
        features,
        cfg,
        if trace {
            Some(&mut sink as &mut dyn TraceSink)
        } else {
            None
        },
    );
    let mut text = String::new();
    match out.beam(n) {
        Ok(beam) if !beam.is_empty() => {
            let best = &beam[0];
            let status = match ex.target(n) {
                Some(t) if t == best.final_state() => "CORRECT",
                Some(_) => "WRONG",
                None => "UNKNOWN",
            };
            let _ = writeln!(text, "# {} {status} score={:.6}", ex.id, best.score);
            text.push_str(&render_parse(best, cfg.mode));
            let _ = writeln!(text, "final\t{}", serialize_state(best.final_state()));
        }
        _ => {
            let _ = writeln!(text, "# {} PARSE_FAIL", ex.id);
        }
    }
    text.push('\n');
    let trace = if trace {
        format!("# {}\n{}", ex.id, sink.0)
    } else {
        String::new()
    };
    (text, trace)
}

fn parse(a: ParseArgs) -> Result<(), CliError> {
    let (params, mut data, cfg, features) = load(&a.model, &a.data, a.format, &a.search)?;
    if let Some(n) = a.limit {
        data.truncate(n);
    }
    let max_l = a.max_l.unwrap_or(usize::MAX);
    let mut config = search_json(&cfg, features);
    config["max_l"] = json!(a.max_l);
    config["limit"] = json!(a.limit);
    config["trace"] = json!(a.trace);
    let mut manifest = RunManifest::new("parse", a.seed, config);
    manifest.inputs = vec![path_str(&a.model), path_str(&a.data)];
    let results: Vec<(String, String)> = manifest.time("parse", || {
        data.par_iter()
            .map(|ex| parse_one(ex, &params, features, &cfg, max_l, a.trace))
            .collect()
    });
    create_dir(&a.out)?;
    let dump: String = results.iter().map(|r| r.0.as_str()).collect();
    write_file(&a.out.join("parses.txt"), &dump)?;
    manifest.outputs = vec!["parses.txt".into()];
    if a.trace {
        let trace: String = results.iter().map(|r| r.1.as_str()).collect();
        write_file(&a.out.join("trace.txt"), &trace)?;
        manifest.outputs.push("trace.txt".into());
    }
    manifest.write(&a.out)
}

fn inspect(a: InspectArgs) -> Result<(), CliError> {
    let mut vocab = Vocab::new();
    let (header, params) = match &a.model {
        Some(p) => {
            let (h, params) = read_model(p, &mut vocab)?;
            (Some(h), params)
        }
        None => (None, Params::new()),
    };
    let keep = |name: &str| a.filter.as_deref().map_or(true, |f| name.contains(f));
    let mut text = String::new();
    let config = match &a.lf {
        Some(lf_text) => {
            let domain = Domain::from(a.domain.expect("required by clap"));
            let world = a.world.as_deref().expect("required by clap");
            let utt = a.utterance.as_deref().expect("required by clap");
            let mode = a
                .mode
                .map(Mode::from)
                .or(header.as_ref().map(|h| h.mode))
                .unwrap_or(Mode::B);
            let features = a
                .features
                .or(header.as_ref().map(|h| h.features))
                .unwrap_or(FeatureConfig::ALL);
            let state = parse_state(world, domain).map_err(|e| CliError::Usage(e.to_string()))?;
            let lf = LogicalForm::parse(lf_text).map_err(|e| CliError::Usage(e.to_string()))?;
            let ctx = Context::new(state);
            let utterance = Utterance::new(utt, &mut vocab);
            let bad = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
            let flat = project_bc(&lf, &ctx).map_err(|e| bad(&e))?;
            let derivation = Derivation::unanchored(Arc::new(lf.clone()));
            let item = match mode {
                Mode::A => Item::Derivation(&derivation),
                Mode::B => Item::LogicalForm(&lf),
                Mode::C => Item::Flat(&flat),
            };
            let fv = featurize(item, &utterance, &ctx, mode, features).map_err(|e| bad(&e))?;
            let mut rows: Vec<(String, f64, f64)> = fv
                .entries()
                .iter()
                .map(|(k, v)| (k.name(&vocab), *v, params.weight(k)))
                .filter(|(n, _, _)| keep(n))
                .collect();
            rows.sort_by(|x, y| x.0.cmp(&y.0));
            let total: f64 = rows.iter().map(|r| r.1 * r.2).sum();
            let _ = writeln!(text, "# {lf} => {flat} mode={mode} score={total:?}");
            for (name, v, w) in rows {
                let _ = writeln!(text, "{name}\t{v:?}\t{w:?}");
            }
            json!({
                "lf": lf_text, "domain": domain.name(), "world": world, "utterance": utt,
                "mode": mode.to_string(), "features": features.to_string(), "filter": a.filter,
            })
        }
        None => {
            let mut rows: Vec<(String, f64, f64)> = params
                .sorted_entries(&vocab)
                .into_iter()
                .filter(|(n, w, _)| *w != 0.0 && keep(n))
                .collect();
            rows.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()).then_with(|| x.0.cmp(&y.0)));
            rows.truncate(a.top);
            for (name, w, acc) in rows {
                let _ = writeln!(text, "{w:?}\t{acc:?}\t{name}");
            }
            json!({ "top": a.top, "filter": a.filter })
        }
    };
    match &a.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join("features.tsv"), &text)?;
            let mut manifest = RunManifest::new("inspect-features", a.seed, config);
            manifest.inputs = a.model.iter().map(|p| path_str(p)).collect();
            manifest.outputs = vec!["features.tsv".into()];
            manifest.write(dir)
        }
    }
}
