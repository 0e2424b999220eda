//! Indicator features over derivations, their projections to the floating and
//! flat spaces, and log-linear scoring.
//!
//! A feature is a condition on the derivation (the `F1`..`F8` families)
//! conjoined with an n-gram of the utterance. In the anchored space the
//! n-grams come from the spans the referenced parts are aligned to; in the
//! floating and flat spaces they range over the whole utterance. Both also
//! include the empty conjunct, which is exactly what the component-wise
//! maximum over anchored derivations produces.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use rustc_hash::FxBuildHasher;
use smallvec::SmallVec;
use thiserror::Error;

use crate::logic::{
    hull, Context, Derivation, Extremum, FlatLogicalForm, LogicalForm, Record, Span,
};
use crate::text::{ngrams_in, pack_ngram, unpack_ngram, Lex, Utterance, Vocab, EMPTY_LEX};
use crate::worlds::{ActionName, Color, EntityId, Property, Value, WorldState};

mod names;

pub use names::FeatureNameError;

pub type FxMap<K, V> = hashbrown::HashMap<K, V, FxBuildHasher>;

/// Which search space a parser or feature extractor works in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Anchored derivations.
    A,
    /// Floating logical forms.
    B,
    /// Flat logical forms.
    C,
}

impl Mode {
    pub fn from_name(s: &str) -> Option<Mode> {
        match s {
            "A" | "a" => Some(Mode::A),
            "B" | "b" => Some(Mode::B),
            "C" | "c" => Some(Mode::C),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::A => "A",
            Mode::B => "B",
            Mode::C => "C",
        })
    }
}

/// Set of enabled feature families, bit `k - 1` for `Fk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureConfig(u8);

impl FeatureConfig {
    pub const ALL: FeatureConfig = FeatureConfig(0xff);
    /// F1 through F3.
    pub const LEXICAL: FeatureConfig = FeatureConfig(0b111);

    pub fn new(families: &[u8]) -> FeatureConfig {
        FeatureConfig(
            families
                .iter()
                .filter(|&&k| (1..=8).contains(&k))
                .fold(0, |m, &k| m | 1 << (k - 1)),
        )
    }

    pub fn has(self, family: u8) -> bool {
        (1..=8).contains(&family) && self.0 & (1 << (family - 1)) != 0
    }

    pub fn families(self) -> impl Iterator<Item = u8> {
        (1..=8).filter(move |&k| self.has(k))
    }

    /// Parses `F1,F2,F3`, `F1-F3` or `all`.
    pub fn parse(s: &str) -> Option<FeatureConfig> {
        if s.eq_ignore_ascii_case("all") {
            return Some(FeatureConfig::ALL);
        }
        let family = |t: &str| -> Option<u8> {
            let k: u8 = t.trim().strip_prefix(['F', 'f'])?.parse().ok()?;
            (1..=8).contains(&k).then_some(k)
        };
        let mut mask = 0u8;
        for part in s.split(',') {
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (family(a)?, family(b)?);
                    if a > b {
                        return None;
                    }
                    for k in a..=b {
                        mask |= 1 << (k - 1);
                    }
                }
                None => mask |= 1 << (family(part)? - 1),
            }
        }
        (mask != 0).then_some(FeatureConfig(mask))
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.families().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "F{k}")?;
        }
        Ok(())
    }
}

/// A predicate as it appears in `F1`. Context references are relative to
/// the utterance being parsed (`back = 1` is the previous utterance).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    Action(ActionName),
    ContextAction { back: u8 },
    ContextArg { back: u8, arg: u8 },
    Num(u32),
    Color(Color),
    Shape(u8),
    Entity(EntityId),
    Property(Property),
    Extremum(Extremum),
}

impl Predicate {
    /// Predicate of a leaf or superlative node, for an utterance with
    /// `history` executed records before it.
    pub fn of(node: &LogicalForm, history: usize) -> Option<Predicate> {
        let back = |i: u8| (history + 1).saturating_sub(usize::from(i)).min(255) as u8;
        Some(match *node {
            LogicalForm::Action(a) => Predicate::Action(a),
            LogicalForm::ContextAction(i) => Predicate::ContextAction { back: back(i) },
            LogicalForm::ContextArg(i, j) => Predicate::ContextArg {
                back: back(i),
                arg: j,
            },
            LogicalForm::Num(n) => Predicate::Num(n),
            LogicalForm::Color(c) => Predicate::Color(c),
            LogicalForm::Shape(s) => Predicate::Shape(s),
            LogicalForm::Entity(e) => Predicate::Entity(e),
            LogicalForm::Property(p) => Predicate::Property(p),
            LogicalForm::Superlative(ext, ..) => Predicate::Extremum(ext),
            _ => return None,
        })
    }
}

/// What an argument looks like: a property of it, or (for primitive values)
/// the value itself. `value == None` means the property is undefined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub property: Option<Property>,
    pub value: Option<Value>,
}

/// Facts about an argument value in state `w`.
pub fn facts(w: &WorldState, v: &Value) -> SmallVec<[Fact; 3]> {
    match v {
        Value::Entity(e) => w
            .domain()
            .properties()
            .iter()
            .map(|&p| Fact {
                property: Some(p),
                value: w.lookup_property(*e, p).ok().flatten(),
            })
            .collect(),
        _ => smallvec::smallvec![Fact {
            property: None,
            value: Some(*v),
        }],
    }
}

/// A derivation condition (the part of a feature before lexical conjunction).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// F1: the logical form contains a predicate.
    Contains(Predicate),
    /// F2: a fact about argument `arg`.
    ArgProperty { arg: u8, fact: Fact },
    /// F3: the action together with a fact about argument `arg`.
    ActionArgProperty {
        action: ActionName,
        arg: u8,
        fact: Fact,
    },
    /// F4: facts about both arguments.
    ArgPair { first: Fact, second: Fact },
    /// F5: argument `arg` equals argument `prev_arg` of the previous utterance.
    ArgReused { arg: u8, prev_arg: u8 },
    /// F6: the action equals the previous action.
    ActionReused,
    /// F7: a fact about argument `arg` and one about the previous argument `prev_arg`.
    ArgFollows {
        arg: u8,
        fact: Fact,
        prev_arg: u8,
        prev_fact: Fact,
    },
    /// F8: the argument spans are in order and do not overlap.
    SpansOrdered,
}

impl Condition {
    pub fn family(&self) -> u8 {
        match self {
            Condition::Contains(_) => 1,
            Condition::ArgProperty { .. } => 2,
            Condition::ActionArgProperty { .. } => 3,
            Condition::ArgPair { .. } => 4,
            Condition::ArgReused { .. } => 5,
            Condition::ActionReused => 6,
            Condition::ArgFollows { .. } => 7,
            Condition::SpansOrdered => 8,
        }
    }
}

/// A feature: condition plus packed n-gram (`EMPTY_LEX` for none).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureKey {
    pub cond: Condition,
    pub lex: Lex,
}

impl FeatureKey {
    /// Canonical name such as `F2|arg1.color=green|green beaker`.
    pub fn name(&self, vocab: &Vocab) -> String {
        let mut s = String::new();
        names::write_condition(&mut s, &self.cond);
        s.push('|');
        if self.lex == EMPTY_LEX {
            s.push('∅');
        } else {
            for (i, t) in unpack_ngram(self.lex).into_iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                s.push_str(vocab.word(t).unwrap_or("<unk>"));
            }
        }
        s
    }

    /// Inverse of `name`; unseen words are interned.
    pub fn parse(name: &str, vocab: &mut Vocab) -> Result<FeatureKey, FeatureNameError> {
        let (cond, lex) = name.rsplit_once('|').ok_or(FeatureNameError::Malformed)?;
        let cond = names::parse_condition(cond)?;
        let lex = if lex == "∅" {
            EMPTY_LEX
        } else {
            let ids: Vec<u32> = lex.split(' ').map(|w| vocab.intern(w)).collect();
            if ids.is_empty() || ids.len() > 3 || lex.split(' ').any(str::is_empty) {
                return Err(FeatureNameError::Malformed);
            }
            pack_ngram(&ids)
        };
        Ok(FeatureKey { cond, lex })
    }
}

/// Sparse feature vector, sorted by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(FeatureKey, f64)>,
}

impl FeatureVector {
    pub fn from_indicators(keys: BTreeSet<FeatureKey>) -> Self {
        FeatureVector {
            entries: keys.into_iter().map(|k| (k, 1.0)).collect(),
        }
    }

    /// Builds a vector from arbitrary entries, summing duplicates and dropping zeros.
    pub fn from_entries(mut entries: Vec<(FeatureKey, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(FeatureKey, f64)> = Vec::with_capacity(entries.len());
        for (k, v) in entries {
            match out.last_mut() {
                Some((last, acc)) if *last == k => *acc += v,
                _ => out.push((k, v)),
            }
        }
        out.retain(|(_, v)| *v != 0.0);
        FeatureVector { entries: out }
    }

    pub fn entries(&self) -> &[(FeatureKey, f64)] {
        &self.entries
    }

    pub fn get(&self, k: &FeatureKey) -> f64 {
        self.entries
            .binary_search_by(|(x, _)| x.cmp(k))
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of two vectors.
    pub fn add(&self, other: &FeatureVector) -> FeatureVector {
        let mut e = self.entries.clone();
        e.extend_from_slice(&other.entries);
        FeatureVector::from_entries(e)
    }

    /// `name<TAB>value` lines sorted by name.
    pub fn dump(&self, vocab: &Vocab) -> String {
        let mut lines: Vec<(String, f64)> = self
            .entries
            .iter()
            .map(|(k, v)| (k.name(vocab), *v))
            .collect();
        lines.sort_by(|a, b| a.0.cmp(&b.0));
        let mut s = String::new();
        for (n, v) in lines {
            let _ = writeln!(s, "{n}\t{v}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("cannot project an empty set of feature vectors")]
pub struct EmptyInputSet;

/// Component-wise maximum; absent keys count as zero.
pub fn project_features(vectors: &[FeatureVector]) -> Result<FeatureVector, EmptyInputSet> {
    if vectors.is_empty() {
        return Err(EmptyInputSet);
    }
    let keys: BTreeSet<FeatureKey> = vectors
        .iter()
        .flat_map(|v| v.entries.iter().map(|e| e.0))
        .collect();
    let entries = keys
        .into_iter()
        .map(|k| {
            (
                k,
                vectors
                    .iter()
                    .map(|v| v.get(&k))
                    .fold(f64::NEG_INFINITY, f64::max),
            )
        })
        .filter(|(_, x)| *x != 0.0)
        .collect();
    Ok(FeatureVector { entries })
}

/// Model parameters with AdaGrad accumulators.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    pub weights: FxMap<FeatureKey, f64>,
    pub accum: FxMap<FeatureKey, f64>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weight(&self, k: &FeatureKey) -> f64 {
        self.weights.get(k).copied().unwrap_or(0.0)
    }

    /// Entries sorted by canonical name: `(name, weight, accumulator)`.
    pub fn sorted_entries(&self, vocab: &Vocab) -> Vec<(String, f64, f64)> {
        let mut keys: Vec<&FeatureKey> = self.weights.keys().chain(self.accum.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut out: Vec<(String, f64, f64)> = keys
            .into_iter()
            .map(|k| {
                let a = self.accum.get(k).copied().unwrap_or(0.0);
                (k.name(vocab), self.weight(k), a)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// `θ · φ`.
pub fn score(fv: &FeatureVector, params: &Params) -> f64 {
    fv.entries.iter().map(|(k, v)| v * params.weight(k)).sum()
}

/// Softmax over beam scores with max subtraction.
pub fn beam_softmax(scores: &[f64]) -> Vec<f64> {
    let Some(max) = scores.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let exps: Vec<f64> = scores.iter().map(|s| libm::exp(s - max)).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Where a condition's lexical conjuncts come from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LexSource {
    /// Every n-gram of the utterance plus the empty conjunct.
    Utterance,
    /// Union of the n-grams inside each span; `None` contributes the empty conjunct.
    /// Kept sorted and deduplicated.
    Spans(SmallVec<[Option<Span>; 2]>),
}

impl LexSource {
    pub fn spans(spans: &[Option<Span>]) -> LexSource {
        let mut v: SmallVec<[Option<Span>; 2]> = spans.iter().copied().collect();
        v.sort();
        v.dedup();
        LexSource::Spans(v)
    }
}

/// Distinct lexical conjuncts of `src` for `tokens`.
pub fn lex_set(tokens: &[u32], src: &LexSource, out: &mut Vec<Lex>) {
    match src {
        LexSource::Utterance => {
            out.push(EMPTY_LEX);
            ngrams_in(tokens, 0, tokens.len(), out);
        }
        LexSource::Spans(spans) => {
            for s in spans {
                match s {
                    None => {
                        if !out.contains(&EMPTY_LEX) {
                            out.push(EMPTY_LEX);
                        }
                    }
                    Some(s) => ngrams_in(tokens, usize::from(s.start), usize::from(s.end), out),
                }
            }
        }
    }
}

/// Parts of a root a condition refers to; they determine its lexical source in
/// the anchored space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Referent {
    Action,
    Arg(u8),
    ActionArg(u8),
    BothArgs,
}

fn emit_arg_facts(
    cfg: FeatureConfig,
    action: ActionName,
    arg: u8,
    fs: &[Fact],
    emit: &mut impl FnMut(Condition, Referent),
) {
    for &fact in fs {
        if cfg.has(2) {
            emit(Condition::ArgProperty { arg, fact }, Referent::Arg(arg));
        }
        if cfg.has(3) {
            emit(
                Condition::ActionArgProperty { action, arg, fact },
                Referent::ActionArg(arg),
            );
        }
    }
}

/// The F2 and F3 conditions of a single argument. They depend only on that
/// argument, so a parser may score them before the root is complete.
pub fn arg_conditions(
    cfg: FeatureConfig,
    ctx: &Context,
    action: ActionName,
    arg: u8,
    value: &Value,
    mut emit: impl FnMut(Condition, Referent),
) {
    emit_arg_facts(cfg, action, arg, &facts(ctx.current(), value), &mut emit);
}

/// Enumerates the root-level conditions (F2..F7) of executing `flat` in `ctx`.
pub fn root_conditions(
    cfg: FeatureConfig,
    ctx: &Context,
    flat: &FlatLogicalForm,
    mut emit: impl FnMut(Condition, Referent),
) {
    let w = ctx.current();
    let arg_facts: SmallVec<[SmallVec<[Fact; 3]>; 2]> =
        flat.args.iter().map(|v| facts(w, v)).collect();
    for (j, fs) in arg_facts.iter().enumerate() {
        emit_arg_facts(cfg, flat.action, j as u8 + 1, fs, &mut emit);
    }
    if cfg.has(4) && arg_facts.len() == 2 {
        for &first in &arg_facts[0] {
            for &second in &arg_facts[1] {
                emit(Condition::ArgPair { first, second }, Referent::BothArgs);
            }
        }
    }
    let Some(prev) = ctx.previous() else {
        return;
    };
    if cfg.has(5) {
        for (j, v) in flat.args.iter().enumerate() {
            for (k, pv) in prev.args.iter().enumerate() {
                if v == pv {
                    emit(
                        Condition::ArgReused {
                            arg: j as u8 + 1,
                            prev_arg: k as u8 + 1,
                        },
                        Referent::Arg(j as u8 + 1),
                    );
                }
            }
        }
    }
    if cfg.has(6) && prev.action == flat.action {
        emit(Condition::ActionReused, Referent::Action);
    }
    if cfg.has(7) {
        let before_prev = ctx.state_before(ctx.history.len() - 1);
        let prev_facts: SmallVec<[SmallVec<[Fact; 3]>; 2]> =
            prev.args.iter().map(|v| facts(before_prev, v)).collect();
        for (j, fs) in arg_facts.iter().enumerate() {
            for &fact in fs {
                for (k, pfs) in prev_facts.iter().enumerate() {
                    for &prev_fact in pfs {
                        emit(
                            Condition::ArgFollows {
                                arg: j as u8 + 1,
                                fact,
                                prev_arg: k as u8 + 1,
                                prev_fact,
                            },
                            Referent::Arg(j as u8 + 1),
                        );
                    }
                }
            }
        }
    }
}

/// Lexical source of a referent in an anchored derivation.
pub fn anchored_source(d: &Derivation, r: Referent) -> LexSource {
    let h = |k: usize| hull(d.child_anchors(k));
    match r {
        Referent::Action => LexSource::spans(&[h(0)]),
        Referent::Arg(j) => LexSource::spans(&[h(usize::from(j))]),
        Referent::ActionArg(j) => LexSource::spans(&[h(0), h(usize::from(j))]),
        Referent::BothArgs => LexSource::spans(&[h(1), h(2)]),
    }
}

/// Whether F8 fires for an anchored root: both argument hulls exist and the
/// first ends before the second starts.
pub fn spans_ordered(d: &Derivation) -> bool {
    match (hull(d.child_anchors(1)), hull(d.child_anchors(2))) {
        (Some(a), Some(b)) => a.end <= b.start,
        _ => false,
    }
}

/// F1 occurrences of a derivation: predicate plus its own span (leaves) or
/// the hull of its anchored leaves (superlatives).
pub fn predicate_occurrences(d: &Derivation, history: usize) -> Vec<(Predicate, Option<Span>)> {
    fn walk(
        node: &LogicalForm,
        anchors: &[Option<Span>],
        history: usize,
        out: &mut Vec<(Predicate, Option<Span>)>,
    ) {
        if node.is_leaf() {
            if let Some(p) = Predicate::of(node, history) {
                out.push((p, anchors[0]));
            }
            return;
        }
        if let Some(p) = Predicate::of(node, history) {
            out.push((p, hull(anchors)));
        }
        let mut start = 0;
        for c in node.children() {
            let n = c.leaf_count();
            walk(c, &anchors[start..start + n], history, out);
            start += n;
        }
    }
    let mut out = Vec::new();
    walk(&d.lf, &d.anchors, history, &mut out);
    out
}

/// What was parsed for one utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item<'a> {
    Derivation(&'a Derivation),
    LogicalForm(&'a LogicalForm),
    Flat(&'a FlatLogicalForm),
}

/// Features of one utterance's parse in `mode`. The item must evaluate in `ctx`.
pub fn featurize(
    item: Item<'_>,
    utt: &Utterance,
    ctx: &Context,
    mode: Mode,
    cfg: FeatureConfig,
) -> Result<FeatureVector, crate::logic::EvalError> {
    let mut keys = BTreeSet::new();
    let mut lex = Vec::new();
    let mut add = |cond: Condition, src: &LexSource, keys: &mut BTreeSet<FeatureKey>| {
        lex.clear();
        lex_set(&utt.tokens, src, &mut lex);
        for &l in &lex {
            keys.insert(FeatureKey { cond, lex: l });
        }
    };
    let history = ctx.history.len();
    let unanchored;
    let (deriv, flat) = match item {
        Item::Derivation(d) => (Some(d), crate::logic::project_bc(&d.lf, ctx)?),
        Item::LogicalForm(lf) => {
            unanchored = Derivation::unanchored(alloc::sync::Arc::new(lf.clone()));
            (Some(&unanchored), crate::logic::project_bc(lf, ctx)?)
        }
        Item::Flat(f) => (None, f.clone()),
    };
    let mode = if deriv.is_none() { Mode::C } else { mode };
    if cfg.has(1) {
        match (mode, deriv) {
            (Mode::A, Some(d)) => {
                for (p, s) in predicate_occurrences(d, history) {
                    add(Condition::Contains(p), &LexSource::spans(&[s]), &mut keys);
                }
            }
            (Mode::B, Some(d)) => {
                for (p, _) in predicate_occurrences(d, history) {
                    add(Condition::Contains(p), &LexSource::Utterance, &mut keys);
                }
            }
            _ => add(
                Condition::Contains(Predicate::Action(flat.action)),
                &LexSource::Utterance,
                &mut keys,
            ),
        }
    }
    root_conditions(cfg, ctx, &flat, |cond, r| {
        let src = match (mode, deriv) {
            (Mode::A, Some(d)) => anchored_source(d, r),
            _ => LexSource::Utterance,
        };
        add(cond, &src, &mut keys);
    });
    if cfg.has(8) && mode == Mode::A && deriv.is_some_and(spans_ordered) {
        keys.insert(FeatureKey {
            cond: Condition::SpansOrdered,
            lex: EMPTY_LEX,
        });
    }
    Ok(FeatureVector::from_indicators(keys))
}

/// Features of a whole sequence of parsed utterances: the sum of the per-utterance vectors.
pub fn featurize_sequence(
    items: &[Item<'_>],
    utterances: &[Utterance],
    initial: &alloc::sync::Arc<WorldState>,
    records: &[Record],
    mode: Mode,
    cfg: FeatureConfig,
) -> Result<FeatureVector, crate::logic::EvalError> {
    let mut ctx = Context::from_shared(initial.clone());
    let mut entries = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let fv = featurize(item.clone(), &utterances[i], &ctx, mode, cfg)?;
        entries.extend_from_slice(fv.entries());
        ctx.history.push(records[i].clone());
    }
    Ok(FeatureVector::from_entries(entries))
}

/// Memoized `Σ_g θ(cond, g)` over the lexical conjuncts of a source, for one
/// utterance and fixed parameters.
pub struct UtteranceScorer<'a> {
    params: &'a Params,
    tokens: &'a [u32],
    memo: FxMap<(Condition, LexSource), f64>,
    scratch: Vec<Lex>,
}

impl<'a> UtteranceScorer<'a> {
    pub fn new(params: &'a Params, tokens: &'a [u32]) -> Self {
        UtteranceScorer {
            params,
            tokens,
            memo: FxMap::default(),
            scratch: Vec::new(),
        }
    }

    pub fn tokens(&self) -> &'a [u32] {
        self.tokens
    }

    pub fn score(&mut self, cond: Condition, src: LexSource) -> f64 {
        if self.params.weights.is_empty() {
            return 0.0;
        }
        if let Some(&s) = self.memo.get(&(cond, src.clone())) {
            return s;
        }
        self.scratch.clear();
        lex_set(self.tokens, &src, &mut self.scratch);
        let s = self
            .scratch
            .iter()
            .map(|&lex| self.params.weight(&FeatureKey { cond, lex }))
            .sum();
        self.memo.insert((cond, src), s);
        s
    }

    /// Score of the conjuncts of `new` that are not already among those of `existing`.
    pub fn score_difference(
        &mut self,
        cond: Condition,
        new: Option<Span>,
        existing: &[Option<Span>],
    ) -> f64 {
        if self.params.weights.is_empty() {
            return 0.0;
        }
        if existing.is_empty() {
            return self.score(cond, LexSource::spans(&[new]));
        }
        let mut old = Vec::new();
        lex_set(self.tokens, &LexSource::spans(existing), &mut old);
        let mut fresh = Vec::new();
        lex_set(self.tokens, &LexSource::spans(&[new]), &mut fresh);
        fresh
            .into_iter()
            .filter(|g| !old.contains(g))
            .map(|lex| self.params.weight(&FeatureKey { cond, lex }))
            .sum()
    }

    pub fn weight(&self, k: &FeatureKey) -> f64 {
        self.params.weight(k)
    }
}
