//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! gating criterion fails. `ACCEPTANCE_ONLY=1,4` restricts the run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use ctxparse::dataset::{read_dataset, Format};
use ctxparse_core::datagen::{gen_dataset, GenConfig};
use ctxparse_core::learner::{bootstrap, evaluate, freeze_beam, train, EvalRow, FrozenBeam, TrainConfig};
use ctxparse_core::logic::{execute_flat, execute_root, project_ab, project_bc, Context, Derivation, LogicalForm, Span};
use ctxparse_core::model::{featurize, project_features, FeatureConfig, FeatureKey, Item, Mode, Params};
use ctxparse_core::parser::{parse_text, BeamConfig};
use ctxparse_core::text::{Example, Utterance, Vocab};
use ctxparse_core::worlds::{parse_state, serialize_state, ActionName, Color, Domain, EntityId, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and sizes.
const EXEC_TRIPLES: usize = 1000;
const COMMUTE_DERIVATIONS: usize = 500;
const PROJECTION_UTTERANCES: usize = 20;
const SEARCH_EXAMPLES: usize = 20;
/// Wide enough that the floating space is nearly exhausted, as in the
/// reference counts; a narrow beam caps every mode at K times the branching.
const SEARCH_BEAM: usize = 10_000;
const SEARCH_RATIO: f64 = 10.0;
const GRAD_SETTINGS: usize = 100;
const GRAD_TOLERANCE: f64 = 1e-5;
const GRAD_STEP: f64 = 1e-5;
const CURVE_N: usize = 500;
const C_SMALL_BEAM: usize = 40;
const C_SMALL_MIN: f64 = 0.85;
const LARGE_BEAM: usize = 400;
/// Constrained A may trail the best of B and C by at most one test example.
const LARGE_TOLERANCE: f64 = 1.0 / CURVE_N as f64;
const BOOT_BEAM: usize = 80;
const BOOT_GAIN: f64 = 0.20;
/// Prefix length at which the learning-curve criteria are gated.
const GATE_L: usize = 1;
const ORACLE_BEAMS: [usize; 4] = [40, 80, 160, 260];
const ORACLE_EXAMPLES: usize = 60;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: Some(pass),
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. Executor against a naive interpreter on state strings.

mod reference {
    //! Written from the action definitions alone; shares nothing with the
    //! crate but the state-string format.

    pub const CAPACITY: usize = 4;
    const PAINTS: &str = "groybp";

    #[derive(Clone, Debug)]
    pub enum Arg {
        Beaker(u8),
        Person(char),
        Figure(u8),
        Num(u32),
        Color(char),
    }

    fn slots(s: &str) -> Vec<String> {
        s.split(' ')
            .filter(|f| !f.is_empty())
            .map(|f| f.split_once(':').unwrap().1.to_string())
            .collect()
    }

    fn join(slots: &[String]) -> String {
        slots
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}:{}", i + 1, s))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn alchemy(state: &str, action: &str, args: &[Arg]) -> Option<String> {
        let mut b: Vec<String> = slots(state)
            .into_iter()
            .map(|s| if s == "_" { String::new() } else { s })
            .collect();
        let idx = |a: &Arg| match *a {
            Arg::Beaker(i) if i >= 1 && usize::from(i) <= b.len() => Some(usize::from(i) - 1),
            _ => None,
        };
        match (action, args) {
            ("pour", [x, y]) => {
                let (s, d) = (idx(x)?, idx(y)?);
                if s == d || b[s].is_empty() || b[s].len() + b[d].len() > CAPACITY {
                    return None;
                }
                let moved = std::mem::take(&mut b[s]);
                b[d].push_str(&moved);
            }
            ("drain", [x, Arg::Num(k)]) => {
                let i = idx(x)?;
                let k = *k as usize;
                if k == 0 || k > b[i].len() {
                    return None;
                }
                let keep = b[i].len() - k;
                b[i].truncate(keep);
            }
            ("mix", [x]) => {
                let i = idx(x)?;
                if b[i].is_empty() {
                    return None;
                }
                b[i] = "n".repeat(b[i].len());
            }
            _ => return None,
        }
        let out: Vec<String> = b
            .into_iter()
            .map(|s| if s.is_empty() { "_".into() } else { s })
            .collect();
        Some(join(&out))
    }

    pub fn scene(state: &str, action: &str, args: &[Arg]) -> Option<String> {
        let mut st = slots(state);
        let find = |st: &[String], c: char| st.iter().position(|s| s.starts_with(c) && c != '_');
        let free = |st: &[String], n: u32| {
            let i = n as usize;
            (i >= 1 && i <= st.len() && st[i - 1] == "__").then(|| i - 1)
        };
        match (action, args) {
            ("enter", [Arg::Color(c), Arg::Num(n)]) => {
                if !PAINTS.contains(*c) || find(&st, *c).is_some() {
                    return None;
                }
                let i = free(&st, *n)?;
                st[i] = format!("{c}_");
            }
            ("leave", [Arg::Person(c)]) => {
                let i = find(&st, *c)?;
                st[i] = "__".into();
            }
            ("move", [Arg::Person(c), Arg::Num(n)]) => {
                let i = find(&st, *c)?;
                let j = free(&st, *n)?;
                st[j] = std::mem::replace(&mut st[i], "__".into());
            }
            ("trade-hats", [Arg::Person(a), Arg::Person(b)]) => {
                let (i, j) = (find(&st, *a)?, find(&st, *b)?);
                let (hi, hj) = (st[i].chars().nth(1)?, st[j].chars().nth(1)?);
                if i == j || (hi == '_' && hj == '_') {
                    return None;
                }
                st[i] = format!("{a}{hj}");
                st[j] = format!("{b}{hi}");
            }
            _ => return None,
        }
        Some(join(&st))
    }

    pub fn tangrams(state: &str, action: &str, args: &[Arg]) -> Option<String> {
        let mut figs: Vec<String> = slots(state);
        let find = |f: &[String], x: u8| f.iter().position(|s| *s == x.to_string());
        match (action, args) {
            ("add", [Arg::Figure(x), Arg::Num(n)]) => {
                if *x > 9 || find(&figs, *x).is_some() {
                    return None;
                }
                let n = *n as usize;
                if n == 0 || n > figs.len() + 1 {
                    return None;
                }
                figs.insert(n - 1, x.to_string());
            }
            ("remove", [Arg::Figure(x)]) => {
                let i = find(&figs, *x)?;
                figs.remove(i);
            }
            ("swap", [Arg::Figure(x), Arg::Figure(y)]) => {
                let (i, j) = (find(&figs, *x)?, find(&figs, *y)?);
                if i == j {
                    return None;
                }
                figs.swap(i, j);
            }
            _ => return None,
        }
        Some(join(&figs))
    }
}

fn random_state(domain: Domain, rng: &mut ChaCha8Rng) -> String {
    const LETTERS: &[u8] = b"groybpn";
    const PAINTS: &[u8] = b"groybp";
    let fields: Vec<String> = match domain {
        Domain::Alchemy => (0..rng.gen_range(1..=7))
            .map(|_| {
                let n = rng.gen_range(0..=reference::CAPACITY);
                if n == 0 {
                    "_".into()
                } else {
                    (0..n).map(|_| *LETTERS.choose(rng).unwrap() as char).collect()
                }
            })
            .collect(),
        Domain::Scene => {
            let mut shirts = PAINTS.to_vec();
            shirts.shuffle(rng);
            (0..10)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        if let Some(s) = shirts.pop() {
                            let hat = if rng.gen_bool(0.4) { '_' } else { *PAINTS.choose(rng).unwrap() as char };
                            return format!("{}{hat}", s as char);
                        }
                    }
                    "__".into()
                })
                .collect()
        }
        Domain::Tangrams => {
            let mut shapes: Vec<u8> = (0..10).collect();
            shapes.shuffle(rng);
            shapes.truncate(rng.gen_range(0..=10));
            shapes.iter().map(u8::to_string).collect()
        }
    };
    fields
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{}:{f}", i + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_call(domain: Domain, rng: &mut ChaCha8Rng) -> (&'static str, Vec<reference::Arg>) {
    use reference::Arg;
    let colors = ['g', 'r', 'o', 'y', 'b', 'p', 'n'];
    let beaker = |rng: &mut ChaCha8Rng| Arg::Beaker(rng.gen_range(0..=8));
    let num = |rng: &mut ChaCha8Rng| Arg::Num(rng.gen_range(0..=11));
    let person = |rng: &mut ChaCha8Rng| Arg::Person(*colors.choose(rng).unwrap());
    let figure = |rng: &mut ChaCha8Rng| Arg::Figure(rng.gen_range(0..=9));
    match domain {
        Domain::Alchemy => match rng.gen_range(0..3) {
            0 => ("pour", vec![beaker(rng), beaker(rng)]),
            1 => ("drain", vec![beaker(rng), Arg::Num(rng.gen_range(0..=5))]),
            _ => ("mix", vec![beaker(rng)]),
        },
        Domain::Scene => match rng.gen_range(0..4) {
            0 => ("enter", vec![Arg::Color(*colors.choose(rng).unwrap()), num(rng)]),
            1 => ("leave", vec![person(rng)]),
            2 => ("move", vec![person(rng), num(rng)]),
            _ => ("trade-hats", vec![person(rng), person(rng)]),
        },
        Domain::Tangrams => match rng.gen_range(0..3) {
            0 => ("add", vec![figure(rng), num(rng)]),
            1 => ("remove", vec![figure(rng)]),
            _ => ("swap", vec![figure(rng), figure(rng)]),
        },
    }
}

fn to_value(a: &reference::Arg) -> Value {
    use reference::Arg;
    let color = |c: char| Color::from_letter(c).unwrap();
    match *a {
        Arg::Beaker(i) => Value::Entity(EntityId::beaker(i)),
        Arg::Person(c) => Value::Entity(EntityId::person(color(c))),
        Arg::Figure(f) => Value::Entity(EntityId::figure(f)),
        Arg::Num(n) => Value::Num(n),
        Arg::Color(c) => Value::Color(color(c)),
    }
}

fn executor_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    let mut succeeded = 0;
    for domain in Domain::ALL {
        for _ in 0..EXEC_TRIPLES {
            let state = random_state(domain, &mut rng);
            let (action, args) = random_call(domain, &mut rng);
            let expected = match domain {
                Domain::Alchemy => reference::alchemy(&state, action, &args),
                Domain::Scene => reference::scene(&state, action, &args),
                Domain::Tangrams => reference::tangrams(&state, action, &args),
            };
            let w = parse_state(&state, domain).expect("generated states are valid");
            let values: Vec<Value> = args.iter().map(to_value).collect();
            let got = w
                .exec_action(ActionName::from_name(action).unwrap(), &values)
                .ok()
                .map(|n| serialize_state(&n));
            succeeded += usize::from(got.is_some());
            if got != expected {
                mismatches.push(format!("{state} {action}{args:?}: {got:?} vs {expected:?}"));
            }
        }
    }
    let n = 3 * EXEC_TRIPLES;
    outcome(
        mismatches.is_empty(),
        format!(
            "{} of {n} triples disagree ({succeeded} executed){}",
            mismatches.len(),
            mismatches.first().map_or(String::new(), |m| format!("; first: {m}"))
        ),
    )
}

// ---------------------------------------------------------------------------
// Shared data.

fn small_dataset(domain: Domain, n: usize, seed: u64, vocab: &mut Vocab) -> Vec<Example> {
    let mut cfg = GenConfig::new(domain);
    cfg.n_train = n;
    cfg.n_test = 1;
    cfg.seed = seed;
    gen_dataset(&cfg, vocab).unwrap().0
}

fn context_of(initial: &Arc<ctxparse_core::worlds::WorldState>, records: &[ctxparse_core::logic::Record]) -> Context {
    Context {
        initial: initial.clone(),
        history: records.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// 2. Executing a derivation agrees with executing its projections.

fn commutation() -> Outcome {
    let mut vocab = Vocab::new();
    let per_domain = COMMUTE_DERIVATIONS.div_ceil(3);
    let mut checked = 0;
    let mut failures = Vec::new();
    for domain in Domain::ALL {
        let data = small_dataset(domain, 40, 2, &mut vocab);
        let cfg = BeamConfig::new(Mode::A, 12, 3);
        let mut seen = 0;
        'examples: for ex in &data {
            let out = parse_text(&ex.utterances[..3], &ex.initial, &Params::new(), FeatureConfig::ALL, &cfg, None);
            for l in 1..=out.beams.len() {
                for p in out.beam(l).unwrap() {
                    let steps = p.steps();
                    let i = l - 1;
                    let ctx = context_of(&ex.initial, &p.records()[..i]);
                    let d = &steps[i].derivation;
                    // Compositional execution of the anchored tree, ignoring anchors.
                    let direct = execute_root(&d.lf, &ctx);
                    // Π_AB then Π_BC then the flat executor.
                    let b = project_ab(d);
                    let projected = project_bc(&b, &ctx).and_then(|f| execute_flat(&f, &ctx).map(|r| (f, r)));
                    let parser_state = &p.records()[i].state;
                    let ok = match (&direct, &projected) {
                        (Ok((s1, _)), Ok((flat, (s2, _)))) => {
                            s1 == s2 && s2 == parser_state && *flat == steps[i].flat
                        }
                        _ => false,
                    };
                    if !ok {
                        failures.push(format!("{} step {l}: {}", ex.id, d.lf));
                    }
                    checked += 1;
                    seen += 1;
                    if seen == per_domain {
                        break 'examples;
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty() && checked >= COMMUTE_DERIVATIONS,
        format!(
            "{checked} derivations, {} disagreements{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Mode-B features equal the component-wise max over mode-A derivations.

fn spans(len: usize) -> Vec<Span> {
    let mut out = Vec::new();
    for s in 0..len {
        for e in s + 1..=len {
            out.push(Span::new(s, e));
        }
    }
    out
}

fn enumerate_derivations(lf: &Arc<LogicalForm>, len: usize) -> Vec<Derivation> {
    fn go(
        i: usize,
        n: usize,
        all: &[Span],
        cur: &mut Vec<Option<Span>>,
        lf: &Arc<LogicalForm>,
        out: &mut Vec<Derivation>,
    ) {
        if i == n {
            out.push(Derivation::new(lf.clone(), cur.clone()).unwrap());
            return;
        }
        cur.push(None);
        go(i + 1, n, all, cur, lf, out);
        cur.pop();
        for s in all {
            if cur.iter().flatten().any(|t| t.overlaps(s)) {
                continue;
            }
            cur.push(Some(*s));
            go(i + 1, n, all, cur, lf, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, lf.leaf_count(), &spans(len), &mut Vec::new(), lf, &mut out);
    out
}

fn feature_projection() -> Outcome {
    // F8 (span order) has no counterpart without anchors, so the comparison
    // covers the families both modes define.
    let features = FeatureConfig::parse("F1-F7").unwrap();
    let short: [(Domain, &[&str]); 3] = [
        (Domain::Alchemy, &["mix it", "pour it into 2", "drain one unit", "then the red", "throw out two", "mix the last", "pour into beaker 3"]),
        (Domain::Scene, &["he leaves", "move to 3", "the red one leaves", "trade hats", "enter at 5", "then to 1", "swap hats again"]),
        (Domain::Tangrams, &["remove it", "add it back", "swap them", "remove the first", "delete figure 2", "put it first"]),
    ];
    let mut vocab = Vocab::new();
    let mut utterances = 0;
    let (mut lfs, mut derivations, mut mismatches) = (0, 0, Vec::new());
    let cfg = BeamConfig::new(Mode::B, 16, 4);
    'outer: for (d_i, (domain, texts)) in short.iter().enumerate() {
        let data = small_dataset(*domain, texts.len(), 10 + d_i as u64, &mut vocab);
        for (ex, text) in data.iter().zip(texts.iter()) {
            if utterances == PROJECTION_UTTERANCES {
                break 'outer;
            }
            let utt = Utterance::new(text, &mut vocab);
            assert!(utt.len() <= 4);
            // Odd utterances follow a first utterance so context features fire.
            let seq: Vec<Utterance> = if utterances % 2 == 1 {
                vec![ex.utterances[0].clone(), utt.clone()]
            } else {
                vec![utt.clone()]
            };
            utterances += 1;
            let out = parse_text(&seq, &ex.initial, &Params::new(), features, &cfg, None);
            let Ok(beam) = out.beam(seq.len()) else { continue };
            for p in beam.iter().take(3) {
                let i = seq.len() - 1;
                let ctx = context_of(&ex.initial, &p.records()[..i]);
                let lf = p.steps()[i].derivation.lf.clone();
                let b = featurize(Item::LogicalForm(&lf), &utt, &ctx, Mode::B, features).unwrap();
                let all = enumerate_derivations(&lf, utt.len());
                let vectors: Vec<_> = all
                    .iter()
                    .map(|d| featurize(Item::Derivation(d), &utt, &ctx, Mode::A, features).unwrap())
                    .collect();
                let max = project_features(&vectors).unwrap();
                lfs += 1;
                derivations += all.len();
                if max != b {
                    mismatches.push(format!("`{text}` {lf}"));
                }
            }
        }
    }
    outcome(
        mismatches.is_empty() && utterances == PROJECTION_UTTERANCES && lfs > 0,
        format!(
            "{utterances} utterances, {lfs} logical forms, {derivations} derivations, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map_or(String::new(), |m| format!("; first: {m}"))
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Search-space sizes per mode.

fn search_space() -> Outcome {
    let mut vocab = Vocab::new();
    let data = small_dataset(Domain::Alchemy, SEARCH_EXAMPLES, 4, &mut vocab);
    let mut totals = [0u64; 3];
    let mut per_example_ok = 0;
    for ex in &data {
        let mut counts = [0u64; 3];
        for (i, mode) in [Mode::A, Mode::B, Mode::C].into_iter().enumerate() {
            let cfg = BeamConfig::new(mode, SEARCH_BEAM, SEARCH_BEAM);
            let out = parse_text(&ex.utterances[..1], &ex.initial, &Params::new(), FeatureConfig::ALL, &cfg, None);
            counts[i] = out.candidates[0];
        }
        let ok = counts[0] as f64 >= SEARCH_RATIO * counts[1] as f64
            && counts[1] as f64 >= SEARCH_RATIO * counts[2] as f64;
        per_example_ok += usize::from(ok);
        for i in 0..3 {
            totals[i] += counts[i];
        }
    }
    let n = data.len() as f64;
    let [a, b, c] = totals.map(|t| t as f64 / n);
    outcome(
        a >= SEARCH_RATIO * b && b >= SEARCH_RATIO * c && per_example_ok == data.len(),
        format!(
            "mean candidates A={a:.0} B={b:.0} C={c:.0} (A/B={:.1}, B/C={:.1}); {per_example_ok}/{} examples satisfy both gaps individually",
            a / b,
            b / c,
            data.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Analytic gradient against central differences.

fn beams_for_gradient() -> Vec<FrozenBeam> {
    let mut vocab = Vocab::new();
    let mut beams = Vec::new();
    for domain in Domain::ALL {
        let data = small_dataset(domain, 30, 6, &mut vocab);
        for ex in &data {
            for mode in [Mode::B, Mode::C] {
                let cfg = BeamConfig::new(mode, 8, 6);
                let out = parse_text(&ex.utterances[..2], &ex.initial, &Params::new(), FeatureConfig::ALL, &cfg, None);
                if let Ok(beam) = out.beam(2) {
                    let fb = freeze_beam(beam, ex, 2, mode, FeatureConfig::ALL);
                    let n_ok = fb.consistent.iter().filter(|&&c| c).count();
                    if n_ok > 0 && n_ok < fb.consistent.len() {
                        beams.push(fb);
                    }
                }
            }
        }
    }
    beams
}

fn gradient_check() -> Outcome {
    let beams = beams_for_gradient();
    if beams.is_empty() {
        return outcome(false, "no beam with both consistent and inconsistent parses");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for s in 0..GRAD_SETTINGS {
        let beam = &beams[s % beams.len()];
        let mut keys: Vec<FeatureKey> = beam.phis.iter().flat_map(|f| f.entries().iter().map(|e| e.0)).collect();
        keys.sort();
        keys.dedup();
        // Scores of order one keep the beam distribution away from saturation,
        // where the gradient vanishes and relative errors are meaningless.
        let active = beam.phis.iter().map(|f| f.len()).max().unwrap_or(1) as f64;
        let scale = [0.5, 1.0, 2.0][s % 3] / active.sqrt();
        let mut params = Params::new();
        for k in &keys {
            params.weights.insert(*k, rng.gen_range(-scale..scale));
        }
        let analytic: BTreeMap<FeatureKey, f64> = beam.gradient(&params).unwrap().into_iter().collect();
        let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
        for k in &keys {
            let w = params.weights[k];
            params.weights.insert(*k, w + GRAD_STEP);
            let up = beam.objective(&params);
            params.weights.insert(*k, w - GRAD_STEP);
            let down = beam.objective(&params);
            params.weights.insert(*k, w);
            let numeric = (up - down) / (2.0 * GRAD_STEP);
            let a = analytic.get(k).copied().unwrap_or(0.0);
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
        let denom = norm_a.sqrt().max(norm_n.sqrt()).max(1e-12);
        worst = worst.max(diff.sqrt() / denom);
    }
    outcome(
        worst < GRAD_TOLERANCE,
        format!(
            "{GRAD_SETTINGS} settings over {} beams, worst relative error {worst:.2e} (limit {GRAD_TOLERANCE:.0e})",
            beams.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Learning curves on artificial alchemy data.

struct CurveData {
    train: Vec<Example>,
    test: Vec<Example>,
    c_small: OnceLock<Params>,
    a_large: OnceLock<Params>,
    b_large: OnceLock<Params>,
}

fn curve_data() -> &'static CurveData {
    static DATA: OnceLock<CurveData> = OnceLock::new();
    DATA.get_or_init(|| {
        let mut cfg = GenConfig::new(Domain::Alchemy);
        cfg.n_train = CURVE_N;
        cfg.n_test = CURVE_N;
        let mut vocab = Vocab::new();
        let (train, test) = gen_dataset(&cfg, &mut vocab).unwrap();
        CurveData {
            train,
            test,
            c_small: OnceLock::new(),
            a_large: OnceLock::new(),
            b_large: OnceLock::new(),
        }
    })
}

fn train_config(mode: Mode, beam: usize, constraints: bool) -> TrainConfig {
    let mut b = BeamConfig::new(mode, beam, beam);
    b.constraints = constraints;
    let mut t = TrainConfig::new(b);
    t.features = FeatureConfig::LEXICAL;
    t
}

/// Mode A additionally gets F8, its span-order feature, which has no
/// counterpart in B or C. Without it A cannot tell the arguments of `pour`
/// apart by position.
fn large_config(mode: Mode) -> TrainConfig {
    let mut cfg = train_config(mode, LARGE_BEAM, mode == Mode::A);
    if mode == Mode::A {
        cfg.features = FeatureConfig::parse("F1,F2,F3,F8").unwrap();
    }
    cfg
}

fn large_params(mode: Mode) -> &'static Params {
    let d = curve_data();
    let cell = match mode {
        Mode::A => &d.a_large,
        Mode::B => &d.b_large,
        Mode::C => unreachable!("C is trained at the small beam"),
    };
    cell.get_or_init(|| train(&d.train, &large_config(mode), Params::new()).0)
}

fn c_small_params() -> &'static Params {
    let d = curve_data();
    d.c_small
        .get_or_init(|| train(&d.train, &train_config(Mode::C, C_SMALL_BEAM, false), Params::new()).0)
}

fn at_l(rows: &[EvalRow], l: usize) -> f64 {
    rows.iter().find(|r| r.l == l).map_or(0.0, |r| r.accuracy)
}

fn curve(rows: &[EvalRow]) -> String {
    rows.iter()
        .map(|r| format!("{:.3}", r.accuracy))
        .collect::<Vec<_>>()
        .join("/")
}

fn eval_rows(params: &Params, cfg: &TrainConfig) -> Vec<EvalRow> {
    evaluate(&curve_data().test, params, cfg.features, &cfg.beam, usize::MAX)
}

fn curve_c_small() -> Outcome {
    let cfg = train_config(Mode::C, C_SMALL_BEAM, false);
    let rows = eval_rows(c_small_params(), &cfg);
    let acc = at_l(&rows, GATE_L);
    outcome(
        acc >= C_SMALL_MIN,
        format!("C beam {C_SMALL_BEAM}: accuracy at L=1..5 {} (gate L={GATE_L}: {acc:.3} >= {C_SMALL_MIN})", curve(&rows)),
    )
}

fn curve_large_beam() -> Outcome {
    let d = curve_data();
    let mut accs = Vec::new();
    let mut text = Vec::new();
    for (mode, name) in [(Mode::A, "A+constraints"), (Mode::B, "B"), (Mode::C, "C")] {
        let cfg = large_config(mode);
        let owned;
        let params = if mode == Mode::C {
            owned = train(&d.train, &cfg, Params::new()).0;
            &owned
        } else {
            large_params(mode)
        };
        let rows = eval_rows(params, &cfg);
        accs.push(at_l(&rows, GATE_L));
        text.push(format!("{name} {}", curve(&rows)));
    }
    let best = accs[1].max(accs[2]);
    outcome(
        accs[0] + LARGE_TOLERANCE >= best,
        format!(
            "beam {LARGE_BEAM}: {} (gate L={GATE_L}: A {:.3} >= max(B, C) {best:.3} - {LARGE_TOLERANCE:.3})",
            text.join("; "),
            accs[0]
        ),
    )
}

fn curve_bootstrap() -> Outcome {
    let d = curve_data();
    let cfg_a = train_config(Mode::A, BOOT_BEAM, false);
    let plain = train(&d.train, &cfg_a, Params::new()).0;
    let plain_rows = eval_rows(&plain, &cfg_a);
    let (boot, _, _) = bootstrap(&d.train, &train_config(Mode::C, BOOT_BEAM, false), &cfg_a);
    let boot_rows = eval_rows(&boot, &cfg_a);
    let gain = at_l(&boot_rows, GATE_L) - at_l(&plain_rows, GATE_L);
    outcome(
        gain >= BOOT_GAIN,
        format!(
            "A beam {BOOT_BEAM}: plain {}, bootstrapped {} (gate L={GATE_L}: gain {gain:+.3} >= {BOOT_GAIN})",
            curve(&plain_rows),
            curve(&boot_rows)
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Oracle accuracy grows with the beam.

/// Each mode is searched with parameters trained in that mode, so the beam
/// ranks hypotheses the way it would in use.
fn oracle_monotonicity() -> Outcome {
    let d = curve_data();
    let test = &d.test[..ORACLE_EXAMPLES];
    let mut violations = Vec::new();
    let mut lines = Vec::new();
    for mode in [Mode::A, Mode::B, Mode::C] {
        let mut prev: Option<Vec<EvalRow>> = None;
        let mut per_beam = Vec::new();
        let (params, cfg) = match mode {
            Mode::C => (c_small_params(), train_config(Mode::C, C_SMALL_BEAM, false)),
            m => (large_params(m), large_config(m)),
        };
        for k in ORACLE_BEAMS {
            let mut beam = cfg.beam;
            beam.k_intra = k;
            beam.k_inter = k;
            let rows = evaluate(test, params, cfg.features, &beam, usize::MAX);
            if let Some(p) = &prev {
                for (a, b) in p.iter().zip(&rows) {
                    if b.oracle < a.oracle {
                        violations.push(format!("{mode} L={} beam {k}: {:.3} < {:.3}", b.l, b.oracle, a.oracle));
                    }
                }
            }
            per_beam.push(format!("{:.2}", rows.last().map_or(0.0, |r| r.oracle)));
            prev = Some(rows);
        }
        lines.push(format!("{mode} {}", per_beam.join("/")));
    }
    outcome(
        violations.is_empty(),
        format!(
            "oracle at L=5 over beams {ORACLE_BEAMS:?}: {}; {} violations{}",
            lines.join(", "),
            violations.len(),
            violations.first().map_or(String::new(), |v| format!("; first: {v}"))
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Real-data trend (optional).

fn real_data() -> Outcome {
    let Ok(dir) = std::env::var("CTXPARSE_REAL_DATA") else {
        return Outcome {
            pass: None,
            detail: "set CTXPARSE_REAL_DATA to a directory with {alchemy,scene}-{train,test}.jsonl".into(),
        };
    };
    let mut text = Vec::new();
    let mut ok = true;
    for domain in ["alchemy", "scene"] {
        let mut vocab = Vocab::new();
        let load = |split: &str, vocab: &mut Vocab| {
            read_dataset(&Path::new(&dir).join(format!("{domain}-{split}.jsonl")), Format::Jsonl, vocab)
        };
        let (Ok(train_d), Ok(test_d)) = (load("train", &mut vocab), load("test", &mut vocab)) else {
            return outcome(false, format!("could not read {domain} data in {dir}"));
        };
        let mut acc = Vec::new();
        for mode in [Mode::B, Mode::C] {
            let cfg = train_config(mode, 40, false);
            let p = train(&train_d, &cfg, Params::new()).0;
            let rows = evaluate(&test_d, &p, cfg.features, &cfg.beam, 5);
            acc.push(at_l(&rows, 5));
        }
        ok &= acc[1] > acc[0];
        text.push(format!("{domain} B={:.3} C={:.3}", acc[0], acc[1]));
    }
    Outcome {
        pass: Some(ok),
        detail: format!("(non-gating) L=5 {}", text.join(", ")),
    }
}

// ---------------------------------------------------------------------------
// 9. Every command is byte-for-byte reproducible.

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = fs::read(&p).unwrap();
            if p.file_name().is_some_and(|n| n == "manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("timings_ms");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(p.strip_prefix(dir).unwrap().display().to_string(), bytes);
        }
    }
    out
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let s = |p: &str| dir.join(p).display().to_string();
    let commands: Vec<Vec<String>> = [
        vec!["generate", "--domain", "alchemy", "--n-train", "20", "--n-test", "10", "--seed", "7", "--out", &s("data")],
        vec!["train", "--data", &s("data/train.jsonl"), "--test", &s("data/test.jsonl"), "--mode", "B", "--beam", "10", "--iterations", "2", "--seed", "3", "--out", &s("model")],
        vec!["eval", "--model", &s("model/model.tsv"), "--data", &s("data/test.jsonl"), "--mode", "A", "--beam", "10", "--out", &s("eval")],
        vec!["parse", "--model", &s("model/model.tsv"), "--data", &s("data/test.jsonl"), "--limit", "3", "--trace", "--out", &s("parse")],
        vec!["inspect-features", "--model", &s("model/model.tsv"), "--top", "20", "--out", &s("inspect")],
    ]
    .into_iter()
    .map(|c| c.into_iter().map(String::from).collect())
    .collect();
    for c in commands {
        let out = Command::new(env!("CARGO_BIN_EXE_ctxparse"))
            .args(&c)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", c[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut snaps = Vec::new();
    for _ in 0..2 {
        if let Err(e) = run_pipeline(dir.path()) {
            return outcome(false, e);
        }
        snaps.push(snapshot(dir.path()));
        for e in fs::read_dir(dir.path()).unwrap() {
            fs::remove_dir_all(e.unwrap().path()).unwrap();
        }
    }
    let differing: Vec<&String> = snaps[0]
        .iter()
        .filter(|(k, v)| snaps[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    outcome(
        differing.is_empty() && snaps[0].len() == snaps[1].len(),
        format!("{} files compared (manifest timings excluded), {} differ {differing:?}", snaps[0].len(), differing.len()),
    )
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, &str, Check); 11] = [
        ("1", "executor matches a reference interpreter", executor_oracle),
        ("2", "derivations commute with their projections", commutation),
        ("3", "mode-B features are the max over mode-A derivations", feature_projection),
        ("4", "search space A >= 10x B >= 10x C", search_space),
        ("5", "gradient matches finite differences", gradient_check),
        ("6a", "C at a small beam learns artificial data", curve_c_small),
        ("6b", "constrained A at a large beam matches B and C", curve_large_beam),
        ("6c", "bootstrapping lifts A at a small beam", curve_bootstrap),
        ("7", "oracle accuracy is monotone in the beam", oracle_monotonicity),
        ("8", "real-data trend C > B", real_data),
        ("9", "commands are deterministic", determinism),
    ];
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id || id.starts_with(x.as_str()))) {
            continue;
        }
        let t = Instant::now();
        let r = check();
        let status = match r.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        // Written to the raw handle so the report shows without --nocapture.
        let line = format!("{status} [{id}] {name}: {} ({:.1}s)\n", r.detail, t.elapsed().as_secs_f64());
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if r.pass == Some(false) && id != "8" {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
