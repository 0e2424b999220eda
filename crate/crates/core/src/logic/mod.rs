//! Logical forms over the world ontologies, their evaluation against a
//! context of previously executed actions, and the projections from anchored
//! derivations to logical forms to flat logical forms.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use smallvec::SmallVec;
use thiserror::Error;

use crate::worlds::{
    ActionName, Domain, EntityId, EntityList, Kind, Property, Value, WorldError, WorldState,
};

mod render;

pub use render::LfParseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Extremum {
    Argmin,
    Argmax,
}

impl Extremum {
    pub fn name(self) -> &'static str {
        match self {
            Extremum::Argmin => "argmin",
            Extremum::Argmax => "argmax",
        }
    }
}

/// A logical form. Children are shared, so cloning is cheap.
///
/// Leaves are the predicates a parser builds; interior nodes are grammar
/// rule applications.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicalForm {
    Num(u32),
    Color(crate::worlds::Color),
    Shape(u8),
    /// Concrete entity; only appears in flat logical forms.
    Entity(EntityId),
    Property(Property),
    Action(ActionName),
    /// `actions[i]`, 1-based.
    ContextAction(u8),
    /// `args[i][j]`, both 1-based.
    ContextArg(u8, u8),
    /// `p(v)`: entities whose property `p` equals `v`.
    Select(Arc<LogicalForm>, Arc<LogicalForm>),
    /// `argmin(s,p)` / `argmax(s,p)`.
    Superlative(Extremum, Arc<LogicalForm>, Arc<LogicalForm>),
    /// `s[i]`, 1-based into the position-ordered set.
    Index(Arc<LogicalForm>, Arc<LogicalForm>),
    /// Top-level action applied to its arguments.
    Apply(Arc<LogicalForm>, Vec<Arc<LogicalForm>>),
}

impl LogicalForm {
    pub fn is_leaf(&self) -> bool {
        !matches!(
            self,
            LogicalForm::Select(..)
                | LogicalForm::Superlative(..)
                | LogicalForm::Index(..)
                | LogicalForm::Apply(..)
        )
    }

    pub fn is_root(&self) -> bool {
        matches!(self, LogicalForm::Apply(..))
    }

    /// Children in rendering order.
    pub fn children(&self) -> SmallVec<[&Arc<LogicalForm>; 3]> {
        match self {
            LogicalForm::Select(p, v) => smallvec::smallvec![p, v],
            LogicalForm::Superlative(_, s, p) => smallvec::smallvec![s, p],
            LogicalForm::Index(s, i) => smallvec::smallvec![s, i],
            LogicalForm::Apply(a, args) => core::iter::once(a).chain(args.iter()).collect(),
            _ => SmallVec::new(),
        }
    }

    /// Leaves in preorder; alignment vectors are indexed by this order.
    pub fn leaves(&self) -> Vec<&LogicalForm> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a LogicalForm>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for c in self.children() {
                c.collect_leaves(out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children().iter().map(|c| c.leaf_count()).sum()
        }
    }

    /// Parses the canonical rendering, e.g. `pour(argmin(color(green),pos),pos(2))`.
    pub fn parse(s: &str) -> Result<LogicalForm, LfParseError> {
        render::parse(s)
    }

    /// Root node from an action and arguments.
    pub fn apply(action: LogicalForm, args: Vec<LogicalForm>) -> LogicalForm {
        LogicalForm::Apply(Arc::new(action), args.into_iter().map(Arc::new).collect())
    }

    pub fn select(p: Property, v: LogicalForm) -> LogicalForm {
        LogicalForm::Select(Arc::new(LogicalForm::Property(p)), Arc::new(v))
    }

    pub fn from_value(v: Value) -> LogicalForm {
        match v {
            Value::Entity(e) => LogicalForm::Entity(e),
            Value::Num(n) => LogicalForm::Num(n),
            Value::Color(c) => LogicalForm::Color(c),
            Value::Shape(s) => LogicalForm::Shape(s),
        }
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render::write(self, f)
    }
}

/// One executed utterance: concrete action, argument values and the state it produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub action: ActionName,
    pub args: SmallVec<[Value; 2]>,
    pub state: Arc<WorldState>,
}

/// The initial world plus everything executed so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    pub initial: Arc<WorldState>,
    pub history: Vec<Record>,
}

impl Context {
    pub fn new(initial: WorldState) -> Self {
        Context {
            initial: Arc::new(initial),
            history: Vec::new(),
        }
    }

    pub fn from_shared(initial: Arc<WorldState>) -> Self {
        Context {
            initial,
            history: Vec::new(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.initial.domain()
    }

    /// The state the next utterance is executed against.
    pub fn current(&self) -> &WorldState {
        self.history.last().map_or(&self.initial, |r| &r.state)
    }

    pub fn current_shared(&self) -> &Arc<WorldState> {
        self.history.last().map_or(&self.initial, |r| &r.state)
    }

    /// State before record `i` (0-based) was executed.
    pub fn state_before(&self, i: usize) -> &WorldState {
        if i == 0 {
            &self.initial
        } else {
            &self.history[i - 1].state
        }
    }

    pub fn previous(&self) -> Option<&Record> {
        self.history.last()
    }

    /// Record of 1-based utterance `i`.
    pub fn record(&self, i: u8) -> Result<&Record, EvalError> {
        usize::from(i)
            .checked_sub(1)
            .and_then(|k| self.history.get(k))
            .ok_or(EvalError::DanglingReference { index: i })
    }

    pub fn extended(&self, record: Record) -> Context {
        let mut next = self.clone();
        next.history.push(record);
        next
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("empty denotation")]
    EmptyDenotation,
    #[error("set used as a value has more than one element")]
    NotSingleton,
    #[error("reference to utterance {index}, which is not in the context")]
    DanglingReference { index: u8 },
    #[error("ill-typed logical form: {0}")]
    TypeMismatch(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Result of evaluating a sub-form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Denotation {
    Value(Value),
    /// Position-ordered.
    Set(EntityList),
    Action(ActionName),
    Property(Property),
}

/// Entities of `w` whose property `p` equals `v`, in position order.
pub fn select(w: &WorldState, p: Property, v: Value) -> Result<EntityList, EvalError> {
    if v.kind() != p.value_kind() {
        return Err(EvalError::TypeMismatch("property value of the wrong kind"));
    }
    let mut out = EntityList::new();
    for e in w.entities() {
        if w.lookup_property(e, p)? == Some(v) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Element of `set` with the smallest (largest) `p`; ties go to the first
/// (last) element in position order.
pub fn superlative(
    w: &WorldState,
    ext: Extremum,
    set: &[EntityId],
    p: Property,
) -> Result<EntityId, EvalError> {
    if !p.is_ordinal() {
        return Err(EvalError::TypeMismatch(
            "superlative over a non-ordinal property",
        ));
    }
    let mut best: Option<(u32, EntityId)> = None;
    for &e in set {
        let Some(Value::Num(k)) = w.lookup_property(e, p)? else {
            continue;
        };
        let better = match (best, ext) {
            (None, _) => true,
            (Some((b, _)), Extremum::Argmin) => k < b,
            (Some((b, _)), Extremum::Argmax) => k >= b,
        };
        if better {
            best = Some((k, e));
        }
    }
    best.map(|(_, e)| e).ok_or(EvalError::EmptyDenotation)
}

/// `set[i]`, 1-based.
pub fn index(set: &[EntityId], i: u32) -> Result<EntityId, EvalError> {
    (i as usize)
        .checked_sub(1)
        .and_then(|k| set.get(k))
        .copied()
        .ok_or(EvalError::EmptyDenotation)
}

/// Evaluates any non-root sub-form in the current state of `ctx`.
pub fn evaluate(node: &LogicalForm, ctx: &Context) -> Result<Denotation, EvalError> {
    let w = ctx.current();
    Ok(match node {
        LogicalForm::Num(n) => Denotation::Value(Value::Num(*n)),
        LogicalForm::Color(c) => Denotation::Value(Value::Color(*c)),
        LogicalForm::Shape(s) => Denotation::Value(Value::Shape(*s)),
        LogicalForm::Entity(e) => Denotation::Value(Value::Entity(*e)),
        LogicalForm::Property(p) => {
            if !ctx.domain().has_property(*p) {
                return Err(WorldError::UnknownProperty {
                    property: *p,
                    domain: ctx.domain(),
                }
                .into());
            }
            Denotation::Property(*p)
        }
        LogicalForm::Action(a) => Denotation::Action(*a),
        LogicalForm::ContextAction(i) => Denotation::Action(ctx.record(*i)?.action),
        LogicalForm::ContextArg(i, j) => {
            let rec = ctx.record(*i)?;
            let v = usize::from(*j)
                .checked_sub(1)
                .and_then(|k| rec.args.get(k))
                .ok_or(EvalError::DanglingReference { index: *i })?;
            Denotation::Value(*v)
        }
        LogicalForm::Select(p, v) => {
            let p = expect_property(p, ctx)?;
            let v = expect_value(v, ctx)?;
            Denotation::Set(select(w, p, v)?)
        }
        LogicalForm::Superlative(ext, s, p) => {
            let s = expect_set(s, ctx)?;
            let p = expect_property(p, ctx)?;
            Denotation::Value(Value::Entity(superlative(w, *ext, &s, p)?))
        }
        LogicalForm::Index(s, i) => {
            let s = expect_set(s, ctx)?;
            let LogicalForm::Num(i) = **i else {
                return Err(EvalError::TypeMismatch("index must be a number literal"));
            };
            Denotation::Value(Value::Entity(index(&s, i)?))
        }
        LogicalForm::Apply(..) => return Err(EvalError::TypeMismatch("a root is not a value")),
    })
}

fn expect_property(node: &LogicalForm, ctx: &Context) -> Result<Property, EvalError> {
    match evaluate(node, ctx)? {
        Denotation::Property(p) => Ok(p),
        _ => Err(EvalError::TypeMismatch("expected a property")),
    }
}

fn expect_value(node: &LogicalForm, ctx: &Context) -> Result<Value, EvalError> {
    match evaluate(node, ctx)? {
        Denotation::Value(v) => Ok(v),
        _ => Err(EvalError::TypeMismatch("expected a value")),
    }
}

fn expect_set(node: &LogicalForm, ctx: &Context) -> Result<EntityList, EvalError> {
    match evaluate(node, ctx)? {
        Denotation::Set(s) => Ok(s),
        _ => Err(EvalError::TypeMismatch("expected a set")),
    }
}

/// Turns a denotation into an argument value: sets must be singletons.
pub fn as_argument(d: Denotation) -> Result<Value, EvalError> {
    match d {
        Denotation::Value(v) => Ok(v),
        Denotation::Set(s) => match s.as_slice() {
            [] => Err(EvalError::EmptyDenotation),
            [e] => Ok(Value::Entity(*e)),
            _ => Err(EvalError::NotSingleton),
        },
        _ => Err(EvalError::TypeMismatch("expected a value")),
    }
}

/// Adapts a value to an argument slot of `kind`: in Tangrams a shape literal
/// names the figure with that shape.
pub fn coerce(domain: Domain, kind: Kind, v: Value) -> Value {
    match (domain, kind, v) {
        (Domain::Tangrams, Kind::Entity, Value::Shape(s)) => Value::Entity(EntityId::figure(s)),
        _ => v,
    }
}

/// Checks an argument against its slot (after coercion).
pub fn fits(domain: Domain, kind: Kind, v: &Value) -> bool {
    v.kind() == kind && v.as_entity().map_or(true, |e| e.domain == domain)
}

/// Resolves a root to its concrete action and argument values.
pub fn project_bc(root: &LogicalForm, ctx: &Context) -> Result<FlatLogicalForm, EvalError> {
    let LogicalForm::Apply(action, args) = root else {
        return Err(EvalError::TypeMismatch("expected a root"));
    };
    let Denotation::Action(action) = evaluate(action, ctx)? else {
        return Err(EvalError::TypeMismatch("expected an action"));
    };
    let sig = action.signature();
    if sig.len() != args.len() {
        return Err(WorldError::ArityMismatch {
            action,
            expected: sig.len(),
            found: args.len(),
        }
        .into());
    }
    let domain = ctx.domain();
    let args = args
        .iter()
        .zip(sig)
        .map(|(a, &kind)| Ok(coerce(domain, kind, as_argument(evaluate(a, ctx)?)?)))
        .collect::<Result<_, EvalError>>()?;
    Ok(FlatLogicalForm { action, args })
}

/// Executes a root in `ctx`, returning the new state and the history record.
pub fn execute_root(
    root: &LogicalForm,
    ctx: &Context,
) -> Result<(Arc<WorldState>, Record), EvalError> {
    execute_flat(&project_bc(root, ctx)?, ctx)
}

/// Executes a flat form. Two-argument actions reject identical arguments.
pub fn execute_flat(
    flat: &FlatLogicalForm,
    ctx: &Context,
) -> Result<(Arc<WorldState>, Record), EvalError> {
    if flat.args.len() == 2 && flat.args[0] == flat.args[1] {
        return Err(WorldError::PreconditionViolation("identical arguments").into());
    }
    let state = Arc::new(ctx.current().exec_action(flat.action, &flat.args)?);
    let record = Record {
        action: flat.action,
        args: flat.args.clone(),
        state: state.clone(),
    };
    Ok((state, record))
}

/// Half-open token span `[start, end)` of an utterance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: u8,
    pub end: u8,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end && end <= u8::MAX as usize);
        Span {
            start: start as u8,
            end: end as u8,
        }
    }

    pub fn len(&self) -> usize {
        usize::from(self.end - self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Smallest span covering both.
    pub fn hull(&self, other: &Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    /// Token bitmask (tokens beyond 128 are not representable).
    pub fn mask(&self) -> u128 {
        let mut m = 0u128;
        for t in self.start..self.end.min(128) {
            m |= 1 << t;
        }
        m
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Hull of the anchored spans in `anchors`.
pub fn hull(anchors: &[Option<Span>]) -> Option<Span> {
    anchors.iter().flatten().copied().reduce(|a, b| a.hull(&b))
}

/// A logical form with optional span alignments on its leaves (preorder).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub lf: Arc<LogicalForm>,
    pub anchors: Vec<Option<Span>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DerivationError {
    #[error("expected {expected} anchors, got {found}")]
    AnchorCount { expected: usize, found: usize },
    #[error("span {0} lies outside the utterance")]
    OutOfRange(Span),
    #[error("spans {0} and {1} overlap")]
    Overlap(Span, Span),
}

impl Derivation {
    pub fn new(lf: Arc<LogicalForm>, anchors: Vec<Option<Span>>) -> Result<Self, DerivationError> {
        let expected = lf.leaf_count();
        if anchors.len() != expected {
            return Err(DerivationError::AnchorCount {
                expected,
                found: anchors.len(),
            });
        }
        Ok(Derivation { lf, anchors })
    }

    pub fn unanchored(lf: Arc<LogicalForm>) -> Self {
        let n = lf.leaf_count();
        Derivation {
            lf,
            anchors: alloc::vec![None; n],
        }
    }

    /// Checks that spans fit an utterance of `len` tokens and do not overlap.
    pub fn validate(&self, len: usize) -> Result<(), DerivationError> {
        let spans: Vec<Span> = self.anchors.iter().flatten().copied().collect();
        for (i, s) in spans.iter().enumerate() {
            if s.is_empty() || usize::from(s.end) > len {
                return Err(DerivationError::OutOfRange(*s));
            }
            if let Some(t) = spans[..i].iter().find(|t| t.overlaps(s)) {
                return Err(DerivationError::Overlap(*t, *s));
            }
        }
        Ok(())
    }

    /// Anchors of the `k`-th child of the root (0 = action).
    pub fn child_anchors(&self, k: usize) -> &[Option<Span>] {
        let mut start = 0;
        for (i, c) in self.lf.children().iter().enumerate() {
            let n = c.leaf_count();
            if i == k {
                return &self.anchors[start..start + n];
            }
            start += n;
        }
        &[]
    }
}

/// Drops the alignments.
pub fn project_ab(d: &Derivation) -> Arc<LogicalForm> {
    d.lf.clone()
}

/// A top-level action with fully evaluated arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlatLogicalForm {
    pub action: ActionName,
    pub args: SmallVec<[Value; 2]>,
}

impl FlatLogicalForm {
    pub fn new(action: ActionName, args: &[Value]) -> Self {
        FlatLogicalForm {
            action,
            args: args.iter().copied().collect(),
        }
    }

    pub fn to_logical_form(&self) -> LogicalForm {
        LogicalForm::apply(
            LogicalForm::Action(self.action),
            self.args
                .iter()
                .map(|&v| LogicalForm::from_value(v))
                .collect(),
        )
    }
}

impl fmt::Display for FlatLogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.action)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Every flat form that executes without error in the current state of `ctx`.
pub fn flat_candidates(ctx: &Context) -> Vec<(FlatLogicalForm, Arc<WorldState>, Record)> {
    let w = ctx.current();
    let domain = w.domain();
    let universe = w.entity_universe();
    let numbers: Vec<Value> = (1..=w.number_limit()).map(Value::Num).collect();
    let colors: Vec<Value> = domain.colors().iter().map(|&c| Value::Color(c)).collect();
    let pool = |k: Kind| -> Vec<Value> {
        match k {
            Kind::Entity => universe.iter().map(|&e| Value::Entity(e)).collect(),
            Kind::Num => numbers.clone(),
            Kind::Color => colors.clone(),
            Kind::Shape => Vec::new(),
        }
    };
    let mut out = Vec::new();
    for &action in domain.actions() {
        let sig = action.signature();
        let first = pool(sig[0]);
        let second = sig.get(1).map(|&k| pool(k));
        let mut try_push = |args: &[Value]| {
            let flat = FlatLogicalForm::new(action, args);
            if let Ok((state, record)) = execute_flat(&flat, ctx) {
                out.push((flat, state, record));
            }
        };
        for &a in &first {
            match &second {
                None => try_push(&[a]),
                Some(second) => {
                    for &b in second {
                        try_push(&[a, b]);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
