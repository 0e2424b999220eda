//! Left-to-right beam parser over a sequence of utterances.
//!
//! Each utterance is parsed by a sequence of build steps on a small stack.
//! The first fragment is always the action; after it the stack holds one of
//! the partial shapes of the grammar (`p`, `p v`, `s`, `s p`, `s i`, `v`).
//! Applying the root rule executes the logical form and shifts to the next
//! utterance.
//!
//! Successors are first produced as lightweight moves carrying their score;
//! only the best `k_intra` of them are turned into hypotheses.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;
use core::hash::{Hash, Hasher};

use rustc_hash::FxHasher;
use smallvec::SmallVec;
use thiserror::Error;

use crate::logic::{
    coerce, execute_flat, fits, flat_candidates, hull, index, select, superlative, Context,
    Derivation, Extremum, FlatLogicalForm, LogicalForm, Record, Span,
};
use crate::model::{
    arg_conditions, root_conditions, Condition, FeatureConfig, FeatureKey, FxMap, LexSource, Mode,
    Params, Predicate, Referent, UtteranceScorer,
};
use crate::text::{PosTag, Utterance, EMPTY_LEX};
use crate::worlds::{ActionName, Domain, EntityList, Kind, Property, Value, WorldState};


/// Search budget and space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeamConfig {
    /// Hypotheses kept after each build step.
    pub k_intra: usize,
    /// Completed parses kept between utterances.
    pub k_inter: usize,
    /// Predicates that may be built per utterance.
    pub max_predicates: usize,
    pub mode: Mode,
    /// Restrict anchors by part-of-speech (anchored mode, tagged utterances only).
    pub constraints: bool,
}

impl BeamConfig {
    pub fn new(mode: Mode, k_intra: usize, k_inter: usize) -> Self {
        BeamConfig {
            k_intra,
            k_inter,
            max_predicates: 8,
            mode,
            constraints: false,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.k_inter == 0 || self.k_intra < self.k_inter {
            return Err("beam widths must satisfy k_intra >= k_inter >= 1");
        }
        if self.max_predicates == 0 || self.max_predicates > 64 {
            return Err("max predicates must be in 1..=64");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no hypothesis survived utterance {utterance}")]
    EmptyBeam { utterance: usize },
}

/// One parsed utterance in a chain of parses.
#[derive(Debug)]
pub struct ChainLink {
    pub prev: Option<Arc<ChainLink>>,
    /// Unanchored in the floating space; a flat form rendered as a tree in the flat space.
    pub derivation: Derivation,
    pub flat: FlatLogicalForm,
}

/// A complete parse of a prefix of the text.
#[derive(Clone, Debug)]
pub struct Parse {
    pub score: f64,
    pub ctx: Arc<Context>,
    pub chain: Option<Arc<ChainLink>>,
    key: u64,
}

impl Parse {
    pub fn final_state(&self) -> &WorldState {
        self.ctx.current()
    }

    /// Per-utterance derivations, first utterance first.
    pub fn steps(&self) -> Vec<&ChainLink> {
        let mut out = Vec::new();
        let mut cur = self.chain.as_deref();
        while let Some(link) = cur {
            out.push(link);
            cur = link.prev.as_deref();
        }
        out.reverse();
        out
    }

    pub fn records(&self) -> &[Record] {
        &self.ctx.history
    }

    /// Structural hash of the executed history; used to break score ties.
    pub fn key(&self) -> u64 {
        self.key
    }
}

/// Receives parser progress; used for debugging dumps and search-space counts.
pub trait TraceSink {
    /// A hypothesis that survived pruning at `step` of `utterance` (both 1-based).
    fn hypothesis(&mut self, utterance: usize, step: usize, mode: Mode, stack: &str, score: f64);
    /// Number of successors generated at `step`.
    fn step(&mut self, utterance: usize, step: usize, mode: Mode, generated: usize, kept: usize);
}

/// Result of parsing a text.
#[derive(Clone, Debug, Default)]
pub struct ParseOutput {
    /// Beam after each utterance, best first. Shorter than the text when the
    /// beam emptied.
    pub beams: Vec<Vec<Parse>>,
    /// Successors generated per utterance.
    pub candidates: Vec<u64>,
}

impl ParseOutput {
    pub fn beam(&self, l: usize) -> Result<&[Parse], ParseError> {
        match l.checked_sub(1).and_then(|i| self.beams.get(i)) {
            Some(b) => Ok(b),
            None => Err(ParseError::EmptyBeam {
                utterance: self.beams.len() + 1,
            }),
        }
    }
}

/// What a fragment denotes.
#[derive(Clone, Debug, PartialEq)]
enum Den {
    Action(ActionName),
    Partial(ActionName, Value),
    Property(Property),
    Value(Value),
    Set(EntityList),
}

#[derive(Debug)]
struct Fragment {
    lf: Arc<LogicalForm>,
    anchors: SmallVec<[Option<Span>; 4]>,
    /// F1 occurrences inside the fragment.
    preds: SmallVec<[(Predicate, Option<Span>); 4]>,
    den: Den,
    hash: u64,
}

type Stack = SmallVec<[Arc<Fragment>; 3]>;

struct Start {
    ctx: Arc<Context>,
    chain: Option<Arc<ChainLink>>,
    score: f64,
    key: u64,
}

struct Hyp {
    start: u32,
    stack: Stack,
    score: f64,
    hash: u64,
    used: u128,
    leaves: u8,
}

enum MoveKind {
    Push {
        leaf: LogicalForm,
        anchor: Option<Span>,
        den: Den,
        pred: Predicate,
    },
    Combine {
        pops: u8,
        frag: Arc<Fragment>,
    },
}

struct Move {
    parent: u32,
    score: f64,
    hash: u64,
    kind: MoveKind,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a rotated combination
    let mut z = a.rotate_left(26) ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_of<T: Hash>(t: &T) -> u64 {
    let mut h = FxHasher::default();
    t.hash(&mut h);
    mix(h.finish(), 0)
}

fn stack_hash(history: u64, frags: impl Iterator<Item = u64>) -> u64 {
    frags.fold(mix(history, 1), mix)
}

fn record_key(prev: u64, r: &Record) -> u64 {
    mix(prev, hash_of(&(r.action, &r.args, &*r.state)))
}

/// Best first: higher score, then smaller hash, then earlier.
fn rank(a: (f64, u64, usize), b: (f64, u64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Keeps the best `k` items (by `key`) in rank order.
fn top_k<T>(items: &mut Vec<T>, k: usize, key: impl Fn(&T, usize) -> (f64, u64, usize)) -> Vec<T> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let cmp = |&a: &usize, &b: &usize| rank(key(&items[a], a), key(&items[b], b));
    if idx.len() > k {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    let mut slots: Vec<Option<T>> = core::mem::take(items).into_iter().map(Some).collect();
    idx.into_iter()
        .map(|i| slots[i].take().expect("indices are distinct"))
        .collect()
}

/// Tags a leaf may anchor to under linguistic constraints; `None` leaves
/// the leaf free.
fn allowed_tags(leaf: &LogicalForm) -> Option<&'static [PosTag]> {
    match leaf {
        LogicalForm::Action(_) | LogicalForm::ContextAction(_) => Some(&[PosTag::Verb]),
        LogicalForm::Color(_) => Some(&[PosTag::Adjective]),
        LogicalForm::Shape(_) => Some(&[PosTag::Noun, PosTag::Adjective]),
        LogicalForm::Num(_) => Some(&[PosTag::Number, PosTag::Adjective]),
        _ => None,
    }
}

struct Search<'a> {
    utt: &'a Utterance,
    cfg: &'a BeamConfig,
    features: FeatureConfig,
    scorer: UtteranceScorer<'a>,
    history: usize,
    /// Precomputed anchor options: all spans of length 1..=3 with their masks.
    spans: Vec<(Span, u128)>,
}

impl<'a> Search<'a> {
    fn f1(&mut self, pred: Predicate, anchor: Option<Span>, stack: &[Arc<Fragment>]) -> f64 {
        if !self.features.has(1) {
            return 0.0;
        }
        let existing: SmallVec<[Option<Span>; 4]> = stack
            .iter()
            .flat_map(|f| f.preds.iter())
            .filter(|(p, _)| *p == pred)
            .map(|(_, s)| *s)
            .collect();
        match self.cfg.mode {
            Mode::A => self
                .scorer
                .score_difference(Condition::Contains(pred), anchor, &existing),
            _ if existing.is_empty() => self
                .scorer
                .score(Condition::Contains(pred), LexSource::Utterance),
            _ => 0.0,
        }
    }

    fn anchors_for(&self, leaf: &LogicalForm, used: u128) -> SmallVec<[Option<Span>; 32]> {
        let mut out: SmallVec<[Option<Span>; 32]> = smallvec::smallvec![None];
        if self.cfg.mode != Mode::A {
            return out;
        }
        let constrained = self.cfg.constraints && self.utt.tags.is_some();
        let tags = allowed_tags(leaf);
        for &(span, mask) in &self.spans {
            if used & mask != 0 {
                continue;
            }
            if constrained && tags.is_some_and(|t| !self.utt.span_has_tag(span, t)) {
                continue;
            }
            out.push(Some(span));
        }
        out
    }

    fn push_moves(
        &mut self,
        parent: u32,
        h: &Hyp,
        leaves: &[(LogicalForm, Den)],
        moves: &mut Vec<Move>,
    ) {
        if usize::from(h.leaves) >= self.cfg.max_predicates {
            return;
        }
        for (leaf, den) in leaves {
            let pred = Predicate::of(leaf, self.history).expect("leaves have predicates");
            let leaf_hash = hash_of(leaf);
            for anchor in self.anchors_for(leaf, h.used) {
                let delta = self.f1(pred, anchor, &h.stack);
                let frag_hash = mix(leaf_hash, hash_of(&anchor));
                moves.push(Move {
                    parent,
                    score: h.score + delta,
                    hash: stack_hash(
                        h.hash,
                        h.stack
                            .iter()
                            .map(|f| f.hash)
                            .chain(core::iter::once(frag_hash)),
                    ),
                    kind: MoveKind::Push {
                        leaf: leaf.clone(),
                        anchor,
                        den: den.clone(),
                        pred,
                    },
                });
            }
        }
    }

    /// F2 and F3 of a binary action's first argument, scored when the
    /// argument attaches.
    fn first_arg_score(
        &mut self,
        ctx: &Context,
        action: ActionName,
        action_anchors: &[Option<Span>],
        arg_anchors: &[Option<Span>],
        v: &Value,
    ) -> f64 {
        let mode = self.cfg.mode;
        let (a, x) = (hull(action_anchors), hull(arg_anchors));
        let scorer = &mut self.scorer;
        let mut total = 0.0;
        arg_conditions(self.features, ctx, action, 1, v, |cond, r| {
            let src = match (mode, r) {
                (Mode::A, Referent::ActionArg(_)) => LexSource::spans(&[a, x]),
                (Mode::A, _) => LexSource::spans(&[x]),
                _ => LexSource::Utterance,
            };
            total += scorer.score(cond, src);
        });
        total
    }

    fn combine_move(
        &mut self,
        parent: u32,
        h: &Hyp,
        pops: u8,
        frag: Fragment,
        delta: f64,
        moves: &mut Vec<Move>,
    ) {
        let keep = h.stack.len() - usize::from(pops);
        moves.push(Move {
            parent,
            score: h.score + delta,
            hash: stack_hash(
                h.hash,
                h.stack[..keep]
                    .iter()
                    .map(|f| f.hash)
                    .chain(core::iter::once(frag.hash)),
            ),
            kind: MoveKind::Combine {
                pops,
                frag: Arc::new(frag),
            },
        });
    }
}

fn node(
    lf: LogicalForm,
    parts: &[&Fragment],
    den: Den,
    tag: u64,
    extra: Option<(Predicate, Option<Span>)>,
) -> Fragment {
    let mut anchors = SmallVec::new();
    let mut preds = SmallVec::new();
    let mut hash = tag;
    for p in parts {
        anchors.extend_from_slice(&p.anchors);
        preds.extend_from_slice(&p.preds);
        hash = mix(hash, p.hash);
    }
    preds.extend(extra);
    Fragment {
        lf: Arc::new(lf),
        anchors,
        preds,
        den,
        hash,
    }
}

/// Leaf values of `kind` that may be pushed in `ctx`.
fn value_leaves(ctx: &Context, kind: Kind, out: &mut Vec<(LogicalForm, Den)>) {
    let w = ctx.current();
    let domain = w.domain();
    match kind {
        Kind::Num => out.extend(
            (1..=w.number_limit()).map(|n| (LogicalForm::Num(n), Den::Value(Value::Num(n)))),
        ),
        Kind::Color => out.extend(
            domain
                .colors()
                .iter()
                .map(|&c| (LogicalForm::Color(c), Den::Value(Value::Color(c)))),
        ),
        Kind::Shape => {
            if domain == Domain::Tangrams {
                out.extend(
                    (0..crate::worlds::SHAPES)
                        .map(|s| (LogicalForm::Shape(s), Den::Value(Value::Shape(s)))),
                );
            }
        }
        Kind::Entity => {
            if domain == Domain::Tangrams {
                out.extend(
                    (0..crate::worlds::SHAPES)
                        .map(|s| (LogicalForm::Shape(s), Den::Value(Value::Shape(s)))),
                );
            }
        }
    }
    for (i, r) in ctx.history.iter().enumerate() {
        for (j, v) in r.args.iter().enumerate() {
            if fits(domain, kind, &coerce(domain, kind, *v)) {
                out.push((
                    LogicalForm::ContextArg(i as u8 + 1, j as u8 + 1),
                    Den::Value(*v),
                ));
            }
        }
    }
}

/// Parses `utterances` left to right from `initial`.
pub fn parse_text(
    utterances: &[Utterance],
    initial: &Arc<WorldState>,
    params: &Params,
    features: FeatureConfig,
    cfg: &BeamConfig,
    mut trace: Option<&mut dyn TraceSink>,
) -> ParseOutput {
    let mut out = ParseOutput::default();
    let mut starts = alloc::vec![Start {
        ctx: Arc::new(Context::from_shared(initial.clone())),
        chain: None,
        score: 0.0,
        key: mix(hash_of(&**initial), 2),
    }];
    for (u, utt) in utterances.iter().enumerate() {
        let (completed, count) = match cfg.mode {
            Mode::C => parse_flat(
                utt,
                &starts,
                params,
                features,
                cfg,
                u + 1,
                trace.as_mut().map(|t| &mut **t as &mut dyn TraceSink),
            ),
            _ => parse_utterance(
                utt,
                &starts,
                params,
                features,
                cfg,
                u + 1,
                trace.as_mut().map(|t| &mut **t as &mut dyn TraceSink),
            ),
        };
        out.candidates.push(count);
        let beam = prune_completed(completed, cfg.k_inter);
        if beam.is_empty() {
            break;
        }
        starts = beam
            .iter()
            .map(|p| Start {
                ctx: p.ctx.clone(),
                chain: p.chain.clone(),
                score: p.score,
                key: p.key,
            })
            .collect();
        out.beams.push(beam);
    }
    out
}

/// Ranks completed parses, merges those with identical histories and keeps `k`.
fn prune_completed(mut completed: Vec<Parse>, k: usize) -> Vec<Parse> {
    let n = completed.len();
    let ranked = top_k(&mut completed, n, |p, i| (p.score, p.key, i));
    let mut seen: FxMap<u64, SmallVec<[usize; 1]>> = FxMap::default();
    let mut beam: Vec<Parse> = Vec::new();
    for p in ranked {
        if beam.len() == k {
            break;
        }
        let dup = seen
            .get(&p.key)
            .is_some_and(|idx| idx.iter().any(|&i| beam[i].ctx.history == p.ctx.history));
        if dup {
            continue;
        }
        seen.entry(p.key).or_default().push(beam.len());
        beam.push(p);
    }
    beam
}

fn complete(
    start: &Start,
    derivation: Derivation,
    flat: FlatLogicalForm,
    record: Record,
    score: f64,
) -> Parse {
    let key = record_key(start.key, &record);
    let ctx = Arc::new(start.ctx.extended(record));
    Parse {
        score,
        ctx,
        chain: Some(Arc::new(ChainLink {
            prev: start.chain.clone(),
            derivation,
            flat,
        })),
        key,
    }
}

fn root_score(
    scorer: &mut UtteranceScorer<'_>,
    features: FeatureConfig,
    mode: Mode,
    ctx: &Context,
    d: &Derivation,
    flat: &FlatLogicalForm,
    scored_first: bool,
) -> f64 {
    let mut total = 0.0;
    root_conditions(features, ctx, flat, |cond, r| {
        if scored_first
            && matches!(
                cond,
                Condition::ArgProperty { arg: 1, .. } | Condition::ActionArgProperty { arg: 1, .. }
            )
        {
            return;
        }
        let src = match mode {
            Mode::A => crate::model::anchored_source(d, r),
            _ => LexSource::Utterance,
        };
        total += scorer.score(cond, src);
    });
    if mode == Mode::A && features.has(8) && crate::model::spans_ordered(d) {
        total += scorer.weight(&FeatureKey {
            cond: Condition::SpansOrdered,
            lex: EMPTY_LEX,
        });
    }
    total
}

fn parse_flat(
    utt: &Utterance,
    starts: &[Start],
    params: &Params,
    features: FeatureConfig,
    cfg: &BeamConfig,
    u: usize,
    trace: Option<&mut dyn TraceSink>,
) -> (Vec<Parse>, u64) {
    let mut scorer = UtteranceScorer::new(params, &utt.tokens);
    let mut completed = Vec::new();
    for s in starts {
        for (flat, _, record) in flat_candidates(&s.ctx) {
            let mut score = s.score;
            if features.has(1) {
                score += scorer.score(
                    Condition::Contains(Predicate::Action(flat.action)),
                    LexSource::Utterance,
                );
            }
            let d = Derivation::unanchored(Arc::new(flat.to_logical_form()));
            score += root_score(&mut scorer, features, Mode::C, &s.ctx, &d, &flat, false);
            completed.push(complete(s, d, flat, record, score));
        }
    }
    let count = completed.len() as u64;
    if let Some(t) = trace {
        t.step(
            u,
            1,
            cfg.mode,
            completed.len(),
            completed.len().min(cfg.k_inter),
        );
        for p in &completed {
            let mut line = String::new();
            let _ = write!(
                line,
                "{}",
                p.chain
                    .as_ref()
                    .expect("completed parses have a chain")
                    .flat
            );
            t.hypothesis(u, 1, cfg.mode, &line, p.score);
        }
    }
    (completed, count)
}

fn render_stack(stack: &[Arc<Fragment>], mode: Mode) -> String {
    let mut s = String::new();
    for (i, f) in stack.iter().enumerate() {
        if i > 0 {
            s.push_str(" | ");
        }
        let _ = write!(s, "{}", f.lf);
        if mode == Mode::A {
            s.push_str(" @");
            for (k, a) in f.anchors.iter().enumerate() {
                s.push(if k == 0 { '[' } else { ',' });
                match a {
                    Some(a) => {
                        let _ = write!(s, "{a}");
                    }
                    None => s.push('_'),
                }
            }
            s.push(']');
        }
    }
    s
}

fn parse_utterance(
    utt: &Utterance,
    starts: &[Start],
    params: &Params,
    features: FeatureConfig,
    cfg: &BeamConfig,
    u: usize,
    mut trace: Option<&mut dyn TraceSink>,
) -> (Vec<Parse>, u64) {
    let n = utt.tokens.len().min(128);
    let mut spans = Vec::new();
    for len in 1..=3 {
        for start in 0..n {
            if start + len <= n {
                let s = Span::new(start, start + len);
                spans.push((s, s.mask()));
            }
        }
    }
    let mut search = Search {
        utt,
        cfg,
        features,
        scorer: UtteranceScorer::new(params, &utt.tokens),
        history: starts.first().map_or(0, |s| s.ctx.history.len()),
        spans,
    };
    let mut frontier: Vec<Hyp> = starts
        .iter()
        .enumerate()
        .map(|(i, s)| Hyp {
            start: i as u32,
            stack: Stack::new(),
            score: s.score,
            hash: s.key,
            used: 0,
            leaves: 0,
        })
        .collect();
    let mut completed: Vec<Parse> = Vec::new();
    let mut count = 0u64;
    let mut step = 0;
    let mut leaves: Vec<(LogicalForm, Den)> = Vec::new();
    while !frontier.is_empty() {
        step += 1;
        let mut moves: Vec<Move> = Vec::new();
        let before = completed.len();
        for (pi, h) in frontier.iter().enumerate() {
            let start = &starts[h.start as usize];
            expand(
                &mut search,
                pi as u32,
                h,
                start,
                &mut leaves,
                &mut moves,
                &mut completed,
            );
        }
        let generated = moves.len() + completed.len() - before;
        count += generated as u64;
        let kept = top_k(&mut moves, cfg.k_intra, |m, i| (m.score, m.hash, i));
        let next: Vec<Hyp> = kept
            .into_iter()
            .map(|m| materialize(&frontier[m.parent as usize], m))
            .collect();
        if let Some(t) = trace.as_deref_mut() {
            t.step(u, step, cfg.mode, generated, next.len());
            for h in &next {
                t.hypothesis(
                    u,
                    step,
                    cfg.mode,
                    &render_stack(&h.stack, cfg.mode),
                    h.score,
                );
            }
            for p in &completed[before..] {
                let link = p.chain.as_ref().expect("completed parses have a chain");
                let mut line = String::new();
                let _ = write!(line, "{} => {}", link.derivation.lf, link.flat);
                t.hypothesis(u, step, cfg.mode, &line, p.score);
            }
        }
        frontier = next;
    }
    (completed, count)
}

fn materialize(parent: &Hyp, m: Move) -> Hyp {
    match m.kind {
        MoveKind::Push {
            leaf,
            anchor,
            den,
            pred,
        } => {
            let leaf_hash = hash_of(&leaf);
            let frag = Fragment {
                lf: Arc::new(leaf),
                anchors: smallvec::smallvec![anchor],
                preds: smallvec::smallvec![(pred, anchor)],
                den,
                hash: mix(leaf_hash, hash_of(&anchor)),
            };
            let mut stack = parent.stack.clone();
            stack.push(Arc::new(frag));
            Hyp {
                start: parent.start,
                stack,
                score: m.score,
                hash: parent.hash,
                used: parent.used | anchor.map_or(0, |a| a.mask()),
                leaves: parent.leaves + 1,
            }
        }
        MoveKind::Combine { pops, frag } => {
            let keep = parent.stack.len() - usize::from(pops);
            let mut stack: Stack = parent.stack[..keep].iter().cloned().collect();
            stack.push(frag);
            Hyp {
                start: parent.start,
                stack,
                score: m.score,
                hash: parent.hash,
                used: parent.used,
                leaves: parent.leaves,
            }
        }
    }
}

const TAG_SELECT: u64 = 11;
const TAG_ARGMIN: u64 = 12;
const TAG_ARGMAX: u64 = 13;
const TAG_INDEX: u64 = 14;
const TAG_LIFT: u64 = 15;
const TAG_PARTIAL: u64 = 16;

fn expand(
    search: &mut Search<'_>,
    pi: u32,
    h: &Hyp,
    start: &Start,
    leaves: &mut Vec<(LogicalForm, Den)>,
    moves: &mut Vec<Move>,
    completed: &mut Vec<Parse>,
) {
    let ctx = &*start.ctx;
    let w = ctx.current();
    let domain = w.domain();
    leaves.clear();
    let Some(base) = h.stack.first() else {
        for &a in domain.actions() {
            leaves.push((LogicalForm::Action(a), Den::Action(a)));
        }
        for (i, r) in ctx.history.iter().enumerate() {
            leaves.push((
                LogicalForm::ContextAction(i as u8 + 1),
                Den::Action(r.action),
            ));
        }
        search.push_moves(pi, h, leaves, moves);
        return;
    };
    let (action, slot) = match base.den {
        Den::Action(a) => (a, 0),
        Den::Partial(a, _) => (a, 1),
        _ => unreachable!("the base is always an action"),
    };
    let kind = action.signature()[slot];
    let tail = &h.stack[1..];
    match tail {
        [] => {
            if kind == Kind::Entity {
                for &p in domain.properties() {
                    leaves.push((LogicalForm::Property(p), Den::Property(p)));
                }
            }
            value_leaves(ctx, kind, leaves);
            search.push_moves(pi, h, leaves, moves);
        }
        [p] => match (&p.den, &*p.lf) {
            (Den::Property(prop), _) => {
                value_leaves(ctx, prop.value_kind(), leaves);
                leaves.retain(|(_, d)| matches!(d, Den::Value(v) if v.kind() == prop.value_kind()));
                search.push_moves(pi, h, leaves, moves);
            }
            (Den::Set(set), _) => {
                if set.len() == 1 {
                    let frag = node(
                        (*p.lf).clone(),
                        &[p],
                        Den::Value(Value::Entity(set[0])),
                        TAG_LIFT,
                        None,
                    );
                    search.combine_move(pi, h, 1, frag, 0.0, moves);
                }
                for &prop in domain.properties() {
                    if prop.is_ordinal() {
                        leaves.push((LogicalForm::Property(prop), Den::Property(prop)));
                    }
                }
                if set.len() >= 2 {
                    leaves.extend(
                        (1..=set.len() as u32)
                            .map(|n| (LogicalForm::Num(n), Den::Value(Value::Num(n)))),
                    );
                }
                search.push_moves(pi, h, leaves, moves);
            }
            (Den::Value(v), _) => {
                let v = coerce(domain, kind, *v);
                if !fits(domain, kind, &v) {
                    return;
                }
                if slot + 1 < action.arity() {
                    let lf = LogicalForm::Apply(base.lf_action(), alloc::vec![p.lf.clone()]);
                    let delta = search.first_arg_score(ctx, action, &base.anchors, &p.anchors, &v);
                    let frag = node(lf, &[base, p], Den::Partial(action, v), TAG_PARTIAL, None);
                    search.combine_move(pi, h, 2, frag, delta, moves);
                } else {
                    finish_root(search, h, start, base, p, v, completed);
                }
            }
            _ => {}
        },
        [a, b] => match (&a.den, &b.den) {
            (Den::Property(prop), Den::Value(v)) => {
                let Ok(set) = select(w, *prop, *v) else {
                    return;
                };
                if set.is_empty() {
                    return;
                }
                let lf = LogicalForm::Select(a.lf.clone(), b.lf.clone());
                let frag = node(lf, &[a, b], Den::Set(set), TAG_SELECT, None);
                search.combine_move(pi, h, 2, frag, 0.0, moves);
            }
            (Den::Set(set), Den::Property(prop)) => {
                for ext in [Extremum::Argmin, Extremum::Argmax] {
                    let Ok(e) = superlative(w, ext, set, *prop) else {
                        continue;
                    };
                    let span = if search.cfg.mode == Mode::A {
                        hull(
                            a.anchors
                                .iter()
                                .chain(b.anchors.iter())
                                .copied()
                                .collect::<SmallVec<[_; 8]>>()
                                .as_slice(),
                        )
                    } else {
                        None
                    };
                    let pred = Predicate::Extremum(ext);
                    // the stack still holds both operands, so their predicates count as present
                    let delta = search.f1(pred, span, &h.stack);
                    let lf = LogicalForm::Superlative(ext, a.lf.clone(), b.lf.clone());
                    let tag = if ext == Extremum::Argmin {
                        TAG_ARGMIN
                    } else {
                        TAG_ARGMAX
                    };
                    let frag = node(
                        lf,
                        &[a, b],
                        Den::Value(Value::Entity(e)),
                        tag,
                        Some((pred, span)),
                    );
                    search.combine_move(pi, h, 2, frag, delta, moves);
                }
            }
            (Den::Set(set), Den::Value(Value::Num(i))) if matches!(*b.lf, LogicalForm::Num(_)) => {
                let Ok(e) = index(set, *i) else { return };
                let lf = LogicalForm::Index(a.lf.clone(), b.lf.clone());
                let frag = node(lf, &[a, b], Den::Value(Value::Entity(e)), TAG_INDEX, None);
                search.combine_move(pi, h, 2, frag, 0.0, moves);
            }
            _ => {}
        },
        _ => {}
    }
}

impl Fragment {
    /// The action node of an action or partial fragment.
    fn lf_action(&self) -> Arc<LogicalForm> {
        match &*self.lf {
            LogicalForm::Apply(a, _) => a.clone(),
            _ => self.lf.clone(),
        }
    }
}

fn finish_root(
    search: &mut Search<'_>,
    h: &Hyp,
    start: &Start,
    base: &Fragment,
    arg: &Fragment,
    v: Value,
    completed: &mut Vec<Parse>,
) {
    let ctx = &*start.ctx;
    let (action, args) = match &base.den {
        Den::Action(a) => (*a, SmallVec::<[Value; 2]>::from_slice(&[v])),
        Den::Partial(a, first) => (*a, SmallVec::from_slice(&[*first, v])),
        _ => return,
    };
    let flat = FlatLogicalForm { action, args };
    let Ok((_, record)) = execute_flat(&flat, ctx) else {
        return;
    };
    let (action_lf, mut arg_lfs) = match &*base.lf {
        LogicalForm::Apply(a, args) => (a.clone(), args.clone()),
        _ => (base.lf.clone(), Vec::new()),
    };
    arg_lfs.push(arg.lf.clone());
    let mut anchors: Vec<Option<Span>> = base.anchors.to_vec();
    anchors.extend_from_slice(&arg.anchors);
    let derivation = Derivation {
        lf: Arc::new(LogicalForm::Apply(action_lf, arg_lfs)),
        anchors,
    };
    // a partial base already paid for its first argument
    let scored_first = matches!(base.den, Den::Partial(..));
    let score = h.score
        + root_score(
            &mut search.scorer,
            search.features,
            search.cfg.mode,
            ctx,
            &derivation,
            &flat,
            scored_first,
        );
    completed.push(complete(start, derivation, flat, record, score));
}
