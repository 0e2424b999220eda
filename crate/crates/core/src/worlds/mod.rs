//! The three micro-domains: ontologies, world states and the action executor.
//!
//! Entity identity is derived from observable properties so that a state
//! string fully determines a state: beakers are identified by their position,
//! people by their (unique) shirt color and tangram figures by their (unique)
//! shape.

use alloc::vec::Vec;
use core::fmt;

use smallvec::SmallVec;
use thiserror::Error;

mod text;

pub use text::{parse_state, serialize_state, StateParseError};

#[cfg(test)]
pub(crate) use text::arb_state;

/// Beaker capacity in units.
pub const CAPACITY: usize = 4;

/// Size of the tangram shape alphabet.
pub const SHAPES: u8 = 10;

/// Entity lists are short; this keeps them on the stack.
pub type EntityList = SmallVec<[EntityId; 10]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Alchemy,
    Scene,
    Tangrams,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Alchemy, Domain::Scene, Domain::Tangrams];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Alchemy => "alchemy",
            Domain::Scene => "scene",
            Domain::Tangrams => "tangrams",
        }
    }

    pub fn from_name(name: &str) -> Option<Domain> {
        Domain::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn properties(self) -> &'static [Property] {
        match self {
            Domain::Alchemy => &[Property::Pos, Property::Color, Property::Amount],
            Domain::Scene => &[Property::Pos, Property::ShirtColor, Property::HatColor],
            Domain::Tangrams => &[Property::Pos, Property::Shape],
        }
    }

    pub fn actions(self) -> &'static [ActionName] {
        match self {
            Domain::Alchemy => &[ActionName::Pour, ActionName::Drain, ActionName::Mix],
            Domain::Scene => &[
                ActionName::Enter,
                ActionName::Leave,
                ActionName::Move,
                ActionName::TradeHats,
            ],
            Domain::Tangrams => &[ActionName::Add, ActionName::Remove, ActionName::Swap],
        }
    }

    pub fn has_property(self, p: Property) -> bool {
        self.properties().contains(&p)
    }

    /// Colors that may appear as literals in this domain.
    pub fn colors(self) -> &'static [Color] {
        match self {
            Domain::Alchemy => &Color::ALL,
            Domain::Scene => &Color::PAINTS,
            Domain::Tangrams => &[],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Green,
    Red,
    Orange,
    Yellow,
    Blue,
    Purple,
    /// Result of mixing a beaker.
    Brown,
}

impl Color {
    pub const ALL: [Color; 7] = [
        Color::Green,
        Color::Red,
        Color::Orange,
        Color::Yellow,
        Color::Blue,
        Color::Purple,
        Color::Brown,
    ];

    /// Colors used for freshly sampled worlds (everything but brown).
    pub const PAINTS: [Color; 6] = [
        Color::Green,
        Color::Red,
        Color::Orange,
        Color::Yellow,
        Color::Blue,
        Color::Purple,
    ];

    pub fn letter(self) -> char {
        match self {
            Color::Green => 'g',
            Color::Red => 'r',
            Color::Orange => 'o',
            Color::Yellow => 'y',
            Color::Blue => 'b',
            Color::Purple => 'p',
            Color::Brown => 'n',
        }
    }

    pub fn from_letter(c: char) -> Option<Color> {
        Color::ALL.into_iter().find(|col| col.letter() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Red => "red",
            Color::Orange => "orange",
            Color::Yellow => "yellow",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Brown => "brown",
        }
    }

    pub fn from_name(name: &str) -> Option<Color> {
        Color::ALL.into_iter().find(|col| col.name() == name)
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Color> {
        Color::ALL.get(usize::from(i)).copied()
    }
}

/// What kind of value an argument slot or a property holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Entity,
    Num,
    Color,
    Shape,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Entity => "entity",
            Kind::Num => "number",
            Kind::Color => "color",
            Kind::Shape => "shape",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Pos,
    Color,
    Amount,
    ShirtColor,
    HatColor,
    Shape,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Pos,
        Property::Color,
        Property::Amount,
        Property::ShirtColor,
        Property::HatColor,
        Property::Shape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Pos => "pos",
            Property::Color => "color",
            Property::Amount => "amount",
            Property::ShirtColor => "shirt-color",
            Property::HatColor => "hat-color",
            Property::Shape => "shape",
        }
    }

    pub fn from_name(name: &str) -> Option<Property> {
        Property::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Properties usable in argmin/argmax.
    pub fn is_ordinal(self) -> bool {
        matches!(self, Property::Pos | Property::Amount)
    }

    pub fn value_kind(self) -> Kind {
        match self {
            Property::Pos | Property::Amount => Kind::Num,
            Property::Color | Property::ShirtColor | Property::HatColor => Kind::Color,
            Property::Shape => Kind::Shape,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionName {
    Pour,
    Drain,
    Mix,
    Enter,
    Leave,
    Move,
    TradeHats,
    Add,
    Remove,
    Swap,
}

impl ActionName {
    pub const ALL: [ActionName; 10] = [
        ActionName::Pour,
        ActionName::Drain,
        ActionName::Mix,
        ActionName::Enter,
        ActionName::Leave,
        ActionName::Move,
        ActionName::TradeHats,
        ActionName::Add,
        ActionName::Remove,
        ActionName::Swap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionName::Pour => "pour",
            ActionName::Drain => "drain",
            ActionName::Mix => "mix",
            ActionName::Enter => "enter",
            ActionName::Leave => "leave",
            ActionName::Move => "move",
            ActionName::TradeHats => "trade-hats",
            ActionName::Add => "add",
            ActionName::Remove => "remove",
            ActionName::Swap => "swap",
        }
    }

    pub fn from_name(name: &str) -> Option<ActionName> {
        ActionName::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn domain(self) -> Domain {
        match self {
            ActionName::Pour | ActionName::Drain | ActionName::Mix => Domain::Alchemy,
            ActionName::Enter | ActionName::Leave | ActionName::Move | ActionName::TradeHats => {
                Domain::Scene
            }
            ActionName::Add | ActionName::Remove | ActionName::Swap => Domain::Tangrams,
        }
    }

    /// Argument kinds, in order.
    pub fn signature(self) -> &'static [Kind] {
        match self {
            ActionName::Pour | ActionName::TradeHats | ActionName::Swap => {
                &[Kind::Entity, Kind::Entity]
            }
            ActionName::Drain | ActionName::Move | ActionName::Add => &[Kind::Entity, Kind::Num],
            ActionName::Enter => &[Kind::Color, Kind::Num],
            ActionName::Mix | ActionName::Leave | ActionName::Remove => &[Kind::Entity],
        }
    }

    pub fn arity(self) -> usize {
        self.signature().len()
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Persistent entity identifier.
///
/// `index` is the beaker position (Alchemy), the shirt color index (Scene) or
/// the shape (Tangrams).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    pub domain: Domain,
    pub index: u8,
}

impl EntityId {
    pub fn new(domain: Domain, index: u8) -> Self {
        EntityId { domain, index }
    }

    pub fn beaker(pos: u8) -> Self {
        EntityId::new(Domain::Alchemy, pos)
    }

    pub fn person(shirt: Color) -> Self {
        EntityId::new(Domain::Scene, shirt.index())
    }

    pub fn figure(shape: u8) -> Self {
        EntityId::new(Domain::Tangrams, shape)
    }

    /// Parses the rendering produced by `Display` (`beaker2`, `person-red`, `figure3`).
    pub fn parse(s: &str) -> Option<EntityId> {
        if let Some(rest) = s.strip_prefix("beaker") {
            let pos: u8 = rest.parse().ok()?;
            (pos >= 1).then(|| EntityId::beaker(pos))
        } else if let Some(rest) = s.strip_prefix("person-") {
            Color::from_name(rest).map(EntityId::person)
        } else if let Some(rest) = s.strip_prefix("figure") {
            let shape: u8 = rest.parse().ok()?;
            (shape < SHAPES).then(|| EntityId::figure(shape))
        } else {
            None
        }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.domain {
            Domain::Alchemy => write!(f, "beaker{}", self.index),
            Domain::Scene => match Color::from_index(self.index) {
                Some(c) => write!(f, "person-{}", c.name()),
                None => write!(f, "person#{}", self.index),
            },
            Domain::Tangrams => write!(f, "figure{}", self.index),
        }
    }
}

/// A primitive value: an entity, a number, a color or a shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Entity(EntityId),
    Num(u32),
    Color(Color),
    Shape(u8),
}

impl Value {
    pub fn kind(&self) -> Kind {
        match self {
            Value::Entity(_) => Kind::Entity,
            Value::Num(_) => Kind::Num,
            Value::Color(_) => Kind::Color,
            Value::Shape(_) => Kind::Shape,
        }
    }

    pub fn as_entity(&self) -> Option<EntityId> {
        match *self {
            Value::Entity(e) => Some(e),
            _ => None,
        }
    }

    /// Parses a value rendering: a number, a color name, `shapeN` or an entity.
    pub fn parse(s: &str) -> Option<Value> {
        if let Ok(n) = s.parse::<u32>() {
            return Some(Value::Num(n));
        }
        if let Some(c) = Color::from_name(s) {
            return Some(Value::Color(c));
        }
        if let Some(rest) = s.strip_prefix("shape") {
            let shape: u8 = rest.parse().ok()?;
            return (shape < SHAPES).then_some(Value::Shape(shape));
        }
        EntityId::parse(s).map(Value::Entity)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Entity(e) => write!(f, "{e}"),
            Value::Num(n) => write!(f, "{n}"),
            Value::Color(c) => f.write_str(c.name()),
            Value::Shape(s) => write!(f, "shape{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(&'static str),
    #[error("`{action}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        action: ActionName,
        expected: usize,
        found: usize,
    },
    #[error("argument {index} of `{action}` must be a {expected}")]
    KindMismatch {
        action: ActionName,
        index: usize,
        expected: Kind,
    },
    #[error("unknown property `{property}` in {domain}")]
    UnknownProperty { property: Property, domain: Domain },
    #[error("action `{action}` is not defined in {domain}")]
    UnknownAction { action: ActionName, domain: Domain },
}

/// A beaker: a bottom-to-top list of color units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Beaker {
    /// Slots past `len` are always green, so derived equality sees contents only.
    units: [Color; CAPACITY],
    len: u8,
}

impl Default for Beaker {
    fn default() -> Self {
        Beaker::empty()
    }
}

impl Beaker {
    pub fn empty() -> Self {
        Beaker {
            units: [Color::Green; CAPACITY],
            len: 0,
        }
    }

    /// Returns `None` when `units` exceeds the capacity.
    pub fn from_units(units: &[Color]) -> Option<Self> {
        if units.len() > CAPACITY {
            return None;
        }
        let mut b = Beaker::empty();
        b.units[..units.len()].copy_from_slice(units);
        b.len = units.len() as u8;
        Some(b)
    }

    pub fn units(&self) -> &[Color] {
        &self.units[..usize::from(self.len)]
    }

    pub fn amount(&self) -> u32 {
        u32::from(self.len)
    }

    /// Defined only when the beaker is non-empty and all units share a color.
    pub fn color(&self) -> Option<Color> {
        let units = self.units();
        let first = *units.first()?;
        units.iter().all(|&u| u == first).then_some(first)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Person {
    pub shirt: Color,
    pub hat: Option<Color>,
}

/// A world state. States are immutable; `exec_action` returns a new one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WorldState {
    /// Beaker at position `i + 1` is `beakers[i]`.
    Alchemy(Vec<Beaker>),
    /// Stage slot `i + 1`.
    Scene(Vec<Option<Person>>),
    /// Shapes in position order; positions are always `1..=n`.
    Tangrams(Vec<u8>),
}

impl WorldState {
    pub fn domain(&self) -> Domain {
        match self {
            WorldState::Alchemy(_) => Domain::Alchemy,
            WorldState::Scene(_) => Domain::Scene,
            WorldState::Tangrams(_) => Domain::Tangrams,
        }
    }

    /// Present entities ordered by position.
    pub fn entities(&self) -> EntityList {
        match self {
            WorldState::Alchemy(beakers) => {
                (1..=beakers.len() as u8).map(EntityId::beaker).collect()
            }
            WorldState::Scene(slots) => slots
                .iter()
                .flatten()
                .map(|p| EntityId::person(p.shirt))
                .collect(),
            WorldState::Tangrams(shapes) => shapes.iter().map(|&s| EntityId::figure(s)).collect(),
        }
    }

    /// Every entity id that may appear as an argument, present or not.
    pub fn entity_universe(&self) -> EntityList {
        match self {
            WorldState::Alchemy(_) => self.entities(),
            WorldState::Scene(_) => Color::PAINTS.iter().map(|&c| EntityId::person(c)).collect(),
            WorldState::Tangrams(_) => (0..SHAPES).map(EntityId::figure).collect(),
        }
    }

    pub fn position(&self, e: EntityId) -> Option<u32> {
        if e.domain != self.domain() {
            return None;
        }
        let pos = match self {
            WorldState::Alchemy(beakers) => {
                let i = usize::from(e.index);
                (i >= 1 && i <= beakers.len()).then_some(i)
            }
            WorldState::Scene(slots) => slots
                .iter()
                .position(|s| matches!(s, Some(p) if p.shirt.index() == e.index))
                .map(|i| i + 1),
            WorldState::Tangrams(shapes) => {
                shapes.iter().position(|&s| s == e.index).map(|i| i + 1)
            }
        };
        pos.map(|p| p as u32)
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.position(e).is_some()
    }

    /// Number of stage slots (Scene), beakers (Alchemy) or figures (Tangrams).
    pub fn len(&self) -> usize {
        match self {
            WorldState::Alchemy(b) => b.len(),
            WorldState::Scene(s) => s.len(),
            WorldState::Tangrams(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest number literal worth considering in this state.
    pub fn number_limit(&self) -> u32 {
        match self {
            WorldState::Alchemy(b) => b.len().max(CAPACITY) as u32,
            WorldState::Scene(s) => s.len() as u32,
            WorldState::Tangrams(f) => f.len() as u32 + 1,
        }
    }

    pub fn beaker(&self, pos: u32) -> Option<&Beaker> {
        match self {
            WorldState::Alchemy(b) => b.get((pos as usize).checked_sub(1)?),
            _ => None,
        }
    }

    /// Looks up `p` on `e`. `Ok(None)` means the property is undefined for
    /// this entity (e.g. the color of a mixed beaker, the hat of a hatless
    /// person, the position of an absent figure).
    pub fn lookup_property(&self, e: EntityId, p: Property) -> Result<Option<Value>, WorldError> {
        let domain = self.domain();
        if !domain.has_property(p) {
            return Err(WorldError::UnknownProperty {
                property: p,
                domain,
            });
        }
        if p == Property::Pos {
            return Ok(self.position(e).map(Value::Num));
        }
        if e.domain != domain {
            return Ok(None);
        }
        let v = match (self, p) {
            (WorldState::Alchemy(_), Property::Color) => self
                .beaker(u32::from(e.index))
                .and_then(Beaker::color)
                .map(Value::Color),
            (WorldState::Alchemy(_), Property::Amount) => self
                .beaker(u32::from(e.index))
                .map(|b| Value::Num(b.amount())),
            (WorldState::Scene(_), Property::ShirtColor) => {
                Color::from_index(e.index).map(Value::Color)
            }
            (WorldState::Scene(slots), Property::HatColor) => slots
                .iter()
                .flatten()
                .find(|p| p.shirt.index() == e.index)
                .and_then(|p| p.hat)
                .map(Value::Color),
            (WorldState::Tangrams(_), Property::Shape) => Some(Value::Shape(e.index)),
            _ => None,
        };
        Ok(v)
    }

    /// Applies `action` to `args`, returning the successor state.
    pub fn exec_action(
        &self,
        action: ActionName,
        args: &[Value],
    ) -> Result<WorldState, WorldError> {
        let domain = self.domain();
        if action.domain() != domain {
            return Err(WorldError::UnknownAction { action, domain });
        }
        let sig = action.signature();
        if sig.len() != args.len() {
            return Err(WorldError::ArityMismatch {
                action,
                expected: sig.len(),
                found: args.len(),
            });
        }
        for (index, (&kind, arg)) in sig.iter().zip(args).enumerate() {
            let ok = arg.kind() == kind && arg.as_entity().map_or(true, |e| e.domain == domain);
            if !ok {
                return Err(WorldError::KindMismatch {
                    action,
                    index: index + 1,
                    expected: kind,
                });
            }
        }
        match self {
            WorldState::Alchemy(beakers) => exec_alchemy(beakers, action, args),
            WorldState::Scene(slots) => exec_scene(slots, action, args),
            WorldState::Tangrams(shapes) => exec_tangrams(shapes, action, args),
        }
        .map_err(WorldError::PreconditionViolation)
    }
}

fn entity(v: &Value) -> EntityId {
    v.as_entity()
        .expect("argument kinds are checked before dispatch")
}

fn num(v: &Value) -> u32 {
    match *v {
        Value::Num(n) => n,
        _ => unreachable!("argument kinds are checked before dispatch"),
    }
}

fn exec_alchemy(
    beakers: &[Beaker],
    action: ActionName,
    args: &[Value],
) -> Result<WorldState, &'static str> {
    let slot = |e: EntityId| -> Result<usize, &'static str> {
        let i = usize::from(e.index);
        if i >= 1 && i <= beakers.len() {
            Ok(i - 1)
        } else {
            Err("no such beaker")
        }
    };
    let mut next = beakers.to_vec();
    match action {
        ActionName::Pour => {
            let (src, dst) = (slot(entity(&args[0]))?, slot(entity(&args[1]))?);
            if src == dst {
                return Err("cannot pour a beaker into itself");
            }
            let moved = beakers[src];
            if moved.len == 0 {
                return Err("nothing to pour");
            }
            let target = &mut next[dst];
            if usize::from(target.len + moved.len) > CAPACITY {
                return Err("destination lacks capacity");
            }
            for &u in moved.units() {
                target.units[usize::from(target.len)] = u;
                target.len += 1;
            }
            next[src] = Beaker::empty();
        }
        ActionName::Drain => {
            let b = slot(entity(&args[0]))?;
            let k = num(&args[1]);
            if k == 0 || k > beakers[b].amount() {
                return Err("cannot drain that many units");
            }
            next[b].len -= k as u8;
            let n = usize::from(next[b].len);
            next[b].units[n..].fill(Color::Green);
        }
        ActionName::Mix => {
            let b = slot(entity(&args[0]))?;
            if next[b].len == 0 {
                return Err("nothing to mix");
            }
            let n = usize::from(next[b].len);
            next[b].units[..n].fill(Color::Brown);
        }
        _ => unreachable!("domain checked by caller"),
    }
    Ok(WorldState::Alchemy(next))
}

fn exec_scene(
    slots: &[Option<Person>],
    action: ActionName,
    args: &[Value],
) -> Result<WorldState, &'static str> {
    let find = |e: EntityId| {
        slots
            .iter()
            .position(|s| matches!(s, Some(p) if p.shirt.index() == e.index))
    };
    let target = |n: u32| -> Result<usize, &'static str> {
        let i = n as usize;
        if i == 0 || i > slots.len() {
            return Err("position off stage");
        }
        if slots[i - 1].is_some() {
            return Err("position occupied");
        }
        Ok(i - 1)
    };
    let mut next = slots.to_vec();
    match action {
        ActionName::Enter => {
            let shirt = match args[0] {
                Value::Color(c) => c,
                _ => unreachable!(),
            };
            if !Color::PAINTS.contains(&shirt) {
                return Err("no such shirt color");
            }
            if find(EntityId::person(shirt)).is_some() {
                return Err("someone with that shirt is already on stage");
            }
            let i = target(num(&args[1]))?;
            next[i] = Some(Person { shirt, hat: None });
        }
        ActionName::Leave => {
            let i = find(entity(&args[0])).ok_or("person not on stage")?;
            next[i] = None;
        }
        ActionName::Move => {
            let from = find(entity(&args[0])).ok_or("person not on stage")?;
            let to = target(num(&args[1]))?;
            next[to] = next[from].take();
        }
        ActionName::TradeHats => {
            let a = find(entity(&args[0])).ok_or("person not on stage")?;
            let b = find(entity(&args[1])).ok_or("person not on stage")?;
            if a == b {
                return Err("cannot trade hats with oneself");
            }
            let (pa, pb) = (slots[a].unwrap(), slots[b].unwrap());
            if pa.hat.is_none() && pb.hat.is_none() {
                return Err("neither person wears a hat");
            }
            next[a] = Some(Person { hat: pb.hat, ..pa });
            next[b] = Some(Person { hat: pa.hat, ..pb });
        }
        _ => unreachable!("domain checked by caller"),
    }
    Ok(WorldState::Scene(next))
}

fn exec_tangrams(
    shapes: &[u8],
    action: ActionName,
    args: &[Value],
) -> Result<WorldState, &'static str> {
    let find = |e: EntityId| shapes.iter().position(|&s| s == e.index);
    let mut next = shapes.to_vec();
    match action {
        ActionName::Add => {
            let f = entity(&args[0]);
            if f.index >= SHAPES {
                return Err("no such figure");
            }
            if find(f).is_some() {
                return Err("figure already present");
            }
            let pos = num(&args[1]) as usize;
            if pos == 0 || pos > shapes.len() + 1 {
                return Err("position out of range");
            }
            next.insert(pos - 1, f.index);
        }
        ActionName::Remove => {
            let i = find(entity(&args[0])).ok_or("figure not present")?;
            next.remove(i);
        }
        ActionName::Swap => {
            let a = find(entity(&args[0])).ok_or("figure not present")?;
            let b = find(entity(&args[1])).ok_or("figure not present")?;
            if a == b {
                return Err("cannot swap a figure with itself");
            }
            next.swap(a, b);
        }
        _ => unreachable!("domain checked by caller"),
    }
    Ok(WorldState::Tangrams(next))
}
