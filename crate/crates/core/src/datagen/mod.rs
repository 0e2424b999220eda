//! Synthetic examples: random worlds, recency-biased action sequences and
//! templated utterances with part-of-speech tags.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logic::{flat_candidates, Context, FlatLogicalForm};
use crate::text::{tokenize, Example, PosTag, Utterance, Vocab};
use crate::worlds::{
    ActionName, Beaker, Color, Domain, EntityId, Person, Value, WorldState, CAPACITY, SHAPES,
};


/// Surface words for the Tangrams shapes, by shape index.
pub const SHAPE_WORDS: [&str; SHAPES as usize] = [
    "arrow", "bird", "boat", "cat", "crown", "dog", "fish", "house", "star", "tree",
];

pub const ALCHEMY_BEAKERS: usize = 7;
pub const SCENE_SLOTS: usize = 10;
pub const TANGRAMS_FIGURES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attr {
    Pos,
    Color,
    Shirt,
    Hat,
    Shape,
}

impl Attr {
    fn from_name(s: &str) -> Option<Attr> {
        Some(match s {
            "pos" => Attr::Pos,
            "color" => Attr::Color,
            "shirt" => Attr::Shirt,
            "hat" => Attr::Hat,
            "shape" => Attr::Shape,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Attr::Pos => "pos",
            Attr::Color => "color",
            Attr::Shirt => "shirt",
            Attr::Hat => "hat",
            Attr::Shape => "shape",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Piece {
    Word(String),
    /// `{j}` or `{j.attr}`; `arg` is 1-based.
    Slot {
        arg: u8,
        attr: Option<Attr>,
    },
}

/// One surface pattern for an action; one tag per piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub action: ActionName,
    pub pieces: Vec<Piece>,
    pub tags: Vec<PosTag>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: expected `action<TAB>surface<TAB>tags`")]
    Columns { line: usize },
    #[error("line {line}: unknown action `{name}`")]
    Action { line: usize, name: String },
    #[error("line {line}: bad slot `{slot}`")]
    Slot { line: usize, slot: String },
    #[error("line {line}: {pieces} tokens but {tags} tags")]
    TagCount {
        line: usize,
        pieces: usize,
        tags: usize,
    },
    #[error("no template for {0}")]
    Missing(ActionName),
}

const ALCHEMY_TEMPLATES: &str = "\
pour\tpour the {1.pos} {1.color} beaker into the {2.pos} {2.color} beaker\tVB DT CD JJ NN IN DT CD JJ NN
pour\tadd the {1.pos} {1.color} beaker to the {2.pos} {2.color} beaker\tVB DT CD JJ NN IN DT CD JJ NN
drain\tdrain {2} from the {1.pos} {1.color} beaker\tVB CD IN DT CD JJ NN
drain\tremove {2} from the {1.pos} {1.color} beaker\tVB CD IN DT CD JJ NN
mix\tmix the {1.pos} {1.color} beaker\tVB DT CD JJ NN
mix\tstir the {1.pos} {1.color} beaker\tVB DT CD JJ NN
";

const SCENE_TEMPLATES: &str = "\
enter\ta person in a {1} shirt appears at {2}\tDT NN IN DT JJ NN VB IN CD
enter\ta {1} shirt enters at {2}\tDT JJ NN VB IN CD
leave\tthe person in the {1.shirt} shirt leaves\tDT NN IN DT JJ NN VB
leave\tthe {1.shirt} shirt exits\tDT JJ NN VB
move\tthe person in the {1.shirt} shirt moves to {2}\tDT NN IN DT JJ NN VB IN CD
move\tthe {1.shirt} shirt goes to {2}\tDT JJ NN VB IN CD
trade-hats\tthe {1.shirt} shirt trades hats with the {2.shirt} shirt\tDT JJ NN VB NN IN DT JJ NN
";

const TANGRAMS_TEMPLATES: &str = "\
add\tadd the {1.shape} at {2}\tVB DT NN IN CD
add\tput the {1.shape} back at {2}\tVB DT NN RB IN CD
remove\tremove the {1.shape}\tVB DT NN
remove\ttake away the {1.shape}\tVB RB DT NN
swap\tswap the {1.shape} and the {2.shape}\tVB DT NN CC DT NN
swap\texchange the {1.shape} with the {2.shape}\tVB DT NN IN DT NN
";

/// Templates grouped by action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    pub templates: Vec<Template>,
}

fn parse_slot(s: &str) -> Option<Piece> {
    let inner = s.strip_prefix('{')?.strip_suffix('}')?;
    let (arg, attr) = match inner.split_once('.') {
        Some((a, t)) => (a, Some(Attr::from_name(t)?)),
        None => (inner, None),
    };
    let arg: u8 = arg.parse().ok()?;
    (1..=2).contains(&arg).then_some(Piece::Slot { arg, attr })
}

impl TemplateSet {
    pub fn builtin(domain: Domain) -> TemplateSet {
        let text = match domain {
            Domain::Alchemy => ALCHEMY_TEMPLATES,
            Domain::Scene => SCENE_TEMPLATES,
            Domain::Tangrams => TANGRAMS_TEMPLATES,
        };
        TemplateSet::parse(text).expect("builtin templates are well formed")
    }

    /// One template per line: `action<TAB>surface<TAB>tags`. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<TemplateSet, TemplateError> {
        let mut templates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            let [action, surface, tags] = cols[..] else {
                return Err(TemplateError::Columns { line });
            };
            let action = ActionName::from_name(action).ok_or_else(|| TemplateError::Action {
                line,
                name: action.to_string(),
            })?;
            let mut pieces = Vec::new();
            for w in surface.split_whitespace() {
                if w.starts_with('{') {
                    let slot = parse_slot(w).ok_or_else(|| TemplateError::Slot {
                        line,
                        slot: w.to_string(),
                    })?;
                    if let Piece::Slot { arg, .. } = slot {
                        if usize::from(arg) > action.arity() {
                            return Err(TemplateError::Slot {
                                line,
                                slot: w.to_string(),
                            });
                        }
                    }
                    pieces.push(slot);
                } else {
                    pieces.push(Piece::Word(w.to_string()));
                }
            }
            let tags: Vec<PosTag> = tags.split_whitespace().map(PosTag::from_name).collect();
            if tags.len() != pieces.len() {
                return Err(TemplateError::TagCount {
                    line,
                    pieces: pieces.len(),
                    tags: tags.len(),
                });
            }
            templates.push(Template {
                action,
                pieces,
                tags,
            });
        }
        Ok(TemplateSet { templates })
    }

    pub fn render_file(&self) -> String {
        let mut out = String::new();
        for t in &self.templates {
            out.push_str(t.action.name());
            out.push('\t');
            for (i, p) in t.pieces.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                match p {
                    Piece::Word(w) => out.push_str(w),
                    Piece::Slot { arg, attr: None } => out.push_str(&format!("{{{arg}}}")),
                    Piece::Slot { arg, attr: Some(a) } => {
                        out.push_str(&format!("{{{arg}.{}}}", a.name()))
                    }
                }
            }
            out.push('\t');
            let tags: Vec<&str> = t.tags.iter().map(|t| t.name()).collect();
            out.push_str(&tags.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn for_action(&self, a: ActionName) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.action == a).collect()
    }

    /// Every action of `domain` has at least one template.
    pub fn check(&self, domain: Domain) -> Result<(), TemplateError> {
        match domain
            .actions()
            .iter()
            .find(|a| self.for_action(**a).is_empty())
        {
            Some(a) => Err(TemplateError::Missing(*a)),
            None => Ok(()),
        }
    }
}

fn beaker_color_word(b: &Beaker) -> &'static str {
    match b.color() {
        Some(c) => c.name(),
        None if b.amount() == 0 => "empty",
        None => "mixed",
    }
}

/// Surface form of `v` under `attr` in `w` (the state before the action).
fn render_value(w: &WorldState, v: Value, attr: Option<Attr>) -> Option<String> {
    let e = match v {
        Value::Num(n) => return Some(n.to_string()),
        Value::Color(c) => return Some(c.name().to_string()),
        Value::Shape(s) => return SHAPE_WORDS.get(usize::from(s)).map(|s| s.to_string()),
        Value::Entity(e) => e,
    };
    let attr = attr.unwrap_or(match w.domain() {
        Domain::Alchemy => Attr::Pos,
        Domain::Scene => Attr::Shirt,
        Domain::Tangrams => Attr::Shape,
    });
    Some(match (w, attr) {
        (_, Attr::Pos) => w.position(e)?.to_string(),
        (WorldState::Alchemy(_), Attr::Color) => {
            beaker_color_word(w.beaker(w.position(e)?)?).to_string()
        }
        (WorldState::Scene(_), Attr::Shirt | Attr::Color) => {
            Color::from_index(e.index)?.name().to_string()
        }
        (WorldState::Scene(slots), Attr::Hat) => {
            let p = slots
                .iter()
                .flatten()
                .find(|p| p.shirt.index() == e.index)?;
            p.hat.map_or("no", |h| h.name()).to_string()
        }
        (WorldState::Tangrams(_), Attr::Shape) => {
            SHAPE_WORDS.get(usize::from(e.index))?.to_string()
        }
        _ => return None,
    })
}

/// Renders `flat` executed in `w` with `t`; returns the text and one tag per token.
pub fn render(
    t: &Template,
    w: &WorldState,
    flat: &FlatLogicalForm,
) -> Option<(String, Vec<PosTag>)> {
    let mut words: Vec<String> = Vec::new();
    let mut tags = Vec::new();
    for (p, &tag) in t.pieces.iter().zip(&t.tags) {
        let s = match p {
            Piece::Word(s) => s.clone(),
            Piece::Slot { arg, attr } => {
                render_value(w, *flat.args.get(usize::from(*arg) - 1)?, *attr)?
            }
        };
        for tok in tokenize(&s) {
            words.push(tok);
            tags.push(tag);
        }
    }
    Some((words.join(" "), tags))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub domain: Domain,
    /// Utterances per example.
    pub length: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Multiplicative weight for reusing the previous action or one of its entities.
    pub recency_boost: f64,
    pub seed: u64,
    pub templates: TemplateSet,
}

impl GenConfig {
    pub fn new(domain: Domain) -> Self {
        GenConfig {
            domain,
            length: 5,
            n_train: 500,
            n_test: 500,
            recency_boost: 5.0,
            seed: 0,
            templates: TemplateSet::builtin(domain),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.recency_boost >= 1.0) {
            return Err(GenError::Config("recency boost must be at least 1"));
        }
        if self.length == 0 || self.n_train == 0 || self.n_test == 0 {
            return Err(GenError::Config("counts must be positive"));
        }
        self.templates.check(self.domain)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("no valid action found after {0} attempts")]
    RetryExhausted(usize),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// A random initial world of the standard size for `domain`.
pub fn sample_world(domain: Domain, rng: &mut impl Rng) -> WorldState {
    match domain {
        Domain::Alchemy => WorldState::Alchemy(
            (0..ALCHEMY_BEAKERS)
                .map(|_| {
                    let n = rng.gen_range(0..=CAPACITY);
                    let c = *Color::PAINTS.choose(rng).expect("paints are nonempty");
                    Beaker::from_units(&[c; CAPACITY][..n]).expect("within capacity")
                })
                .collect(),
        ),
        Domain::Scene => {
            let people = rng.gen_range(1..=Color::PAINTS.len().min(SCENE_SLOTS));
            let shirts: Vec<Color> = Color::PAINTS
                .choose_multiple(rng, people)
                .copied()
                .collect();
            let slots: Vec<usize> = rand::seq::index::sample(rng, SCENE_SLOTS, people).into_vec();
            let mut stage = alloc::vec![None; SCENE_SLOTS];
            for (shirt, slot) in shirts.into_iter().zip(slots) {
                let hat = if rng.gen_bool(0.5) {
                    Some(*Color::PAINTS.choose(rng).expect("paints are nonempty"))
                } else {
                    None
                };
                stage[slot] = Some(Person { shirt, hat });
            }
            WorldState::Scene(stage)
        }
        Domain::Tangrams => {
            let shapes: Vec<u8> =
                rand::seq::index::sample(rng, usize::from(SHAPES), TANGRAMS_FIGURES)
                    .into_iter()
                    .map(|s| s as u8)
                    .collect();
            WorldState::Tangrams(shapes)
        }
    }
}

fn entities(flat: &FlatLogicalForm) -> impl Iterator<Item = EntityId> + '_ {
    flat.args.iter().filter_map(Value::as_entity)
}

/// Sampling weight of each candidate after `prev`.
pub fn step_weights(
    candidates: &[FlatLogicalForm],
    prev: Option<&FlatLogicalForm>,
    boost: f64,
) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            let Some(p) = prev else { return 1.0 };
            let mut w = 1.0;
            if c.action == p.action {
                w *= boost;
            }
            if entities(c).any(|e| entities(p).any(|f| f == e)) {
                w *= boost;
            }
            w
        })
        .collect()
}

const MAX_RETRIES: usize = 100;

/// One example; the world is resampled when an action sequence gets stuck.
pub fn gen_example(
    cfg: &GenConfig,
    id: String,
    rng: &mut impl Rng,
    vocab: &mut Vocab,
) -> Result<Example, GenError> {
    'attempt: for _ in 0..MAX_RETRIES {
        let w0 = Arc::new(sample_world(cfg.domain, rng));
        let mut ctx = Context::from_shared(w0.clone());
        let mut utterances = Vec::new();
        let mut targets = Vec::new();
        let mut gold: Vec<FlatLogicalForm> = Vec::new();
        for _ in 0..cfg.length {
            let mut cands = flat_candidates(&ctx);
            if cands.is_empty() {
                continue 'attempt;
            }
            let flats: Vec<FlatLogicalForm> = cands.iter().map(|c| c.0.clone()).collect();
            let weights = step_weights(&flats, gold.last(), cfg.recency_boost);
            let pick = WeightedIndex::new(&weights)
                .expect("weights are positive")
                .sample(rng);
            let (flat, state, record) = cands.swap_remove(pick);
            let template = *cfg
                .templates
                .for_action(flat.action)
                .choose(rng)
                .ok_or(TemplateError::Missing(flat.action))?;
            let Some((text, tags)) = render(template, ctx.current(), &flat) else {
                continue 'attempt;
            };
            let utt = Utterance::new(&text, vocab)
                .with_tags(tags)
                .expect("one tag per rendered token");
            utterances.push(utt);
            targets.push(Some((*state).clone()));
            gold.push(flat);
            ctx.history.push(record);
        }
        return Ok(Example {
            id,
            domain: cfg.domain,
            initial: w0,
            utterances,
            targets,
            gold: Some(gold),
        });
    }
    Err(GenError::RetryExhausted(MAX_RETRIES))
}

fn same_text(a: &Example, b: &Example) -> bool {
    a.initial == b.initial
        && a.utterances
            .iter()
            .map(|u| &u.text)
            .eq(b.utterances.iter().map(|u| &u.text))
}

/// Seeded train and test splits; test examples never repeat a training example.
pub fn gen_dataset(
    cfg: &GenConfig,
    vocab: &mut Vocab,
) -> Result<(Vec<Example>, Vec<Example>), GenError> {
    cfg.validate()?;
    let domain = cfg.domain.name();
    let mut train = Vec::with_capacity(cfg.n_train);
    for i in 0..cfg.n_train {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        train.push(gen_example(
            cfg,
            format!("{domain}-train-{i:04}"),
            &mut rng,
            vocab,
        )?);
    }
    let mut test = Vec::with_capacity(cfg.n_test);
    for i in 0..cfg.n_test {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream((1 << 32) | i as u64);
        let mut attempts = 0;
        loop {
            let ex = gen_example(cfg, format!("{domain}-test-{i:04}"), &mut rng, vocab)?;
            if !train.iter().any(|t| same_text(t, &ex)) {
                test.push(ex);
                break;
            }
            attempts += 1;
            if attempts == MAX_RETRIES {
                return Err(GenError::RetryExhausted(attempts));
            }
        }
    }
    Ok((train, test))
}
