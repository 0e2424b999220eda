//! Training from final-state supervision: beam-restricted marginal likelihood,
//! AdaGrad with lazily applied L1 shrinkage, and a prefix-length curriculum.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    beam_softmax, featurize_sequence, score, FeatureConfig, FeatureKey, FeatureVector, FxMap, Item,
    Mode, Params,
};
use crate::parser::{parse_text, BeamConfig, Parse};
use crate::text::Example;


#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub l1: f64,
    pub eta: f64,
    /// Prefix length per iteration; the last entry repeats.
    pub curriculum: Vec<usize>,
    pub beam: BeamConfig,
    pub features: FeatureConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(beam: BeamConfig) -> Self {
        TrainConfig {
            iterations: 6,
            l1: 0.001,
            eta: 0.1,
            curriculum: alloc::vec![1, 1, 2],
            beam,
            features: FeatureConfig::ALL,
            seed: 0,
        }
    }

    /// Prefix length used in 0-based iteration `i`.
    pub fn prefix(&self, i: usize) -> usize {
        self.curriculum
            .get(i)
            .or(self.curriculum.last())
            .copied()
            .unwrap_or(usize::MAX)
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.l1 >= 0.0) {
            return Err("l1 coefficient must be nonnegative");
        }
        if !(self.eta > 0.0) {
            return Err("step size must be positive");
        }
        if self.curriculum.contains(&0) {
            return Err("curriculum prefixes must be positive");
        }
        self.beam.validate()
    }
}

/// Per-iteration training statistics, measured on the beams used for the updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    /// 1-based.
    pub iteration: usize,
    pub prefix: usize,
    pub accuracy: f64,
    pub oracle: f64,
    /// Examples without an update: empty beam, no consistent parse or unknown target.
    pub skipped: usize,
    pub examples: usize,
}

/// Feature vectors of a beam with the consistency of each hypothesis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrozenBeam {
    pub phis: Vec<FeatureVector>,
    pub consistent: Vec<bool>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + log(xs.map(|x| exp(x - m)).sum())
}

impl FrozenBeam {
    fn scores(&self, params: &Params) -> Vec<f64> {
        self.phis.iter().map(|f| score(f, params)).collect()
    }

    /// `log Σ_C exp(θ·φ) − log Σ_N exp(θ·φ)`; `-inf` when nothing is consistent.
    pub fn objective(&self, params: &Params) -> f64 {
        let s = self.scores(params);
        let c = s
            .iter()
            .zip(&self.consistent)
            .filter(|(_, &c)| c)
            .map(|(x, _)| *x);
        log_sum_exp(c) - log_sum_exp(s.iter().copied())
    }

    /// `E_{p|C}[φ] − E_{p|N}[φ]`, sorted by key. `None` when nothing is consistent.
    pub fn gradient(&self, params: &Params) -> Option<Vec<(FeatureKey, f64)>> {
        if !self.consistent.iter().any(|&c| c) {
            return None;
        }
        if self.consistent.iter().all(|&c| c) {
            return Some(Vec::new());
        }
        let p = beam_softmax(&self.scores(params));
        let zc: f64 = p
            .iter()
            .zip(&self.consistent)
            .filter(|(_, &c)| c)
            .map(|(x, _)| x)
            .sum();
        let mut g: FxMap<FeatureKey, f64> = FxMap::default();
        for ((phi, &pi), &c) in self.phis.iter().zip(&p).zip(&self.consistent) {
            let w = if c { pi / zc - pi } else { -pi };
            for (k, v) in phi.entries() {
                *g.entry(*k).or_insert(0.0) += w * v;
            }
        }
        let mut out: Vec<(FeatureKey, f64)> = g.into_iter().filter(|(_, v)| *v != 0.0).collect();
        out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Some(out)
    }
}

/// AdaGrad ascent with L1 soft-thresholding applied lazily: a coordinate
/// catches up on the shrinkage it missed the next time it is touched.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub eta: f64,
    pub l1: f64,
    step: u64,
    last: FxMap<FeatureKey, u64>,
}

const EPSILON: f64 = 1e-8;

fn shrink(w: f64, by: f64) -> f64 {
    if w > by {
        w - by
    } else if w < -by {
        w + by
    } else {
        0.0
    }
}

impl Optimizer {
    pub fn new(eta: f64, l1: f64) -> Self {
        Optimizer {
            eta,
            l1,
            step: 0,
            last: FxMap::default(),
        }
    }

    fn catch_up(&self, params: &mut Params, k: &FeatureKey, upto: u64) {
        let last = self.last.get(k).copied().unwrap_or(0);
        let g = params.accum.get(k).copied().unwrap_or(0.0);
        if upto <= last || g == 0.0 || self.l1 == 0.0 {
            return;
        }
        let by = (upto - last) as f64 * self.l1 * self.eta / (sqrt(g) + EPSILON);
        if let Some(w) = params.weights.get_mut(k) {
            *w = shrink(*w, by);
        }
    }

    /// One ascent step along `grad` (sorted, as from `FrozenBeam::gradient`).
    pub fn update(&mut self, params: &mut Params, grad: &[(FeatureKey, f64)]) {
        self.step += 1;
        let t = self.step;
        for (k, g) in grad {
            self.catch_up(params, k, t - 1);
            let acc = params.accum.entry(*k).or_insert(0.0);
            *acc += g * g;
            let scale = self.eta / (sqrt(*acc) + EPSILON);
            let w = params.weights.entry(*k).or_insert(0.0);
            *w = shrink(*w + scale * g, self.l1 * scale);
            self.last.insert(*k, t);
        }
    }

    /// Applies all pending shrinkage and drops zero weights.
    pub fn flush(&mut self, params: &mut Params) {
        let mut keys: Vec<FeatureKey> = params.weights.keys().copied().collect();
        keys.sort_unstable();
        for k in &keys {
            self.catch_up(params, k, self.step);
            self.last.insert(*k, self.step);
        }
        params.weights.retain(|_, w| *w != 0.0);
    }
}

/// Per-utterance items of a parse, as featurized in `mode`.
pub fn parse_items(p: &Parse, mode: Mode) -> Vec<Item<'_>> {
    p.steps()
        .into_iter()
        .map(|l| match mode {
            Mode::C => Item::Flat(&l.flat),
            _ => Item::Derivation(&l.derivation),
        })
        .collect()
}

/// Features and consistency of each hypothesis on a beam of parses of the
/// first `prefix` utterances of `ex`.
pub fn freeze_beam(
    beam: &[Parse],
    ex: &Example,
    prefix: usize,
    mode: Mode,
    features: FeatureConfig,
) -> FrozenBeam {
    let target = ex.target(prefix);
    let mut out = FrozenBeam::default();
    for p in beam {
        let fv = featurize_sequence(
            &parse_items(p, mode),
            &ex.utterances[..prefix],
            &ex.initial,
            p.records(),
            mode,
            features,
        )
        .expect("beam parses evaluate in their own context");
        out.phis.push(fv);
        out.consistent
            .push(target.is_some_and(|t| t == p.final_state()));
    }
    out
}

/// Trains from `init`; returns the parameters and per-iteration metrics.
pub fn train(data: &[Example], cfg: &TrainConfig, init: Params) -> (Params, Vec<IterationMetrics>) {
    let mut params = init;
    let mut opt = Optimizer::new(cfg.eta, cfg.l1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut metrics = Vec::new();
    for it in 0..cfg.iterations {
        order.shuffle(&mut rng);
        let mut m = IterationMetrics {
            iteration: it + 1,
            prefix: cfg.prefix(it),
            accuracy: 0.0,
            oracle: 0.0,
            skipped: 0,
            examples: data.len(),
        };
        let (mut correct, mut oracle) = (0usize, 0usize);
        for &i in &order {
            let ex = &data[i];
            let prefix = m.prefix.min(ex.len());
            if ex.target(prefix).is_none() {
                m.skipped += 1;
                continue;
            }
            let out = parse_text(
                &ex.utterances[..prefix],
                &ex.initial,
                &params,
                cfg.features,
                &cfg.beam,
                None,
            );
            let Ok(beam) = out.beam(prefix) else {
                m.skipped += 1;
                continue;
            };
            let frozen = freeze_beam(beam, ex, prefix, cfg.beam.mode, cfg.features);
            correct += usize::from(frozen.consistent[0]);
            oracle += usize::from(frozen.consistent.iter().any(|&c| c));
            match frozen.gradient(&params) {
                Some(g) => opt.update(&mut params, &g),
                None => m.skipped += 1,
            }
        }
        opt.flush(&mut params);
        let n = data.len().max(1) as f64;
        m.accuracy = correct as f64 / n;
        m.oracle = oracle as f64 / n;
        metrics.push(m);
    }
    (params, metrics)
}

/// Trains the flat model, then the anchored model starting from its weights
/// and accumulators.
pub fn bootstrap(
    data: &[Example],
    cfg_c: &TrainConfig,
    cfg_a: &TrainConfig,
) -> (Params, Vec<IterationMetrics>, Vec<IterationMetrics>) {
    let (c, mc) = train(data, cfg_c, Params::new());
    let (a, ma) = train(data, cfg_a, c);
    (a, mc, ma)
}

/// Outcome on one example for each prefix length `1..=len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExampleEval {
    /// `None` where the target for that prefix is unknown.
    pub per_l: Vec<Option<Outcome>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub correct: bool,
    pub oracle: bool,
    /// The gold sequence (if any) or every consistent parse is missing from the beam.
    pub fell_off: bool,
}

pub fn evaluate_example(
    ex: &Example,
    params: &Params,
    features: FeatureConfig,
    cfg: &BeamConfig,
    max_l: usize,
) -> ExampleEval {
    let n = ex.len().min(max_l);
    let out = parse_text(
        &ex.utterances[..n],
        &ex.initial,
        params,
        features,
        cfg,
        None,
    );
    let per_l = (1..=n)
        .map(|l| {
            let target = ex.target(l)?;
            let beam = out.beam(l).unwrap_or(&[]);
            let correct = beam.first().is_some_and(|p| p.final_state() == target);
            let oracle = beam.iter().any(|p| p.final_state() == target);
            let fell_off = match &ex.gold {
                Some(gold) => !beam
                    .iter()
                    .any(|p| p.steps().iter().zip(&gold[..l]).all(|(s, g)| s.flat == *g)),
                None => !oracle,
            };
            Some(Outcome {
                correct,
                oracle,
                fell_off,
            })
        })
        .collect();
    ExampleEval { per_l }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub l: usize,
    pub accuracy: f64,
    pub oracle: f64,
    pub beam_falloff: f64,
    pub examples: usize,
}

/// Aggregates per-example outcomes into one row per prefix length.
pub fn aggregate(evals: &[ExampleEval]) -> Vec<EvalRow> {
    let max_l = evals.iter().map(|e| e.per_l.len()).max().unwrap_or(0);
    (1..=max_l)
        .filter_map(|l| {
            let outcomes: Vec<Outcome> = evals
                .iter()
                .filter_map(|e| e.per_l.get(l - 1).copied().flatten())
                .collect();
            if outcomes.is_empty() {
                return None;
            }
            let n = outcomes.len() as f64;
            let frac =
                |f: fn(&Outcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
            Some(EvalRow {
                l,
                accuracy: frac(|o| o.correct),
                oracle: frac(|o| o.oracle),
                beam_falloff: frac(|o| o.fell_off),
                examples: outcomes.len(),
            })
        })
        .collect()
}

/// Sequential evaluation of a dataset.
pub fn evaluate(
    data: &[Example],
    params: &Params,
    features: FeatureConfig,
    cfg: &BeamConfig,
    max_l: usize,
) -> Vec<EvalRow> {
    let evals: Vec<ExampleEval> = data
        .iter()
        .map(|ex| evaluate_example(ex, params, features, cfg, max_l))
        .collect();
    aggregate(&evals)
}
