//! Compact state strings: `1:gg 2:_ 3:o` (Alchemy), `1:r_ 2:bg 3:__` (Scene),
//! `1:3 2:0` (Tangrams).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use super::{Beaker, Color, Domain, Person, WorldState, CAPACITY, SHAPES};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid {domain} state at byte {offset}: {message}")]
pub struct StateParseError {
    pub domain: Domain,
    pub offset: usize,
    pub message: &'static str,
}

pub fn serialize_state(w: &WorldState) -> String {
    let mut out = String::new();
    let sep = |out: &mut String, i: usize| {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{}:", i + 1);
    };
    match w {
        WorldState::Alchemy(beakers) => {
            for (i, b) in beakers.iter().enumerate() {
                sep(&mut out, i);
                if b.units().is_empty() {
                    out.push('_');
                }
                out.extend(b.units().iter().map(|c| c.letter()));
            }
        }
        WorldState::Scene(slots) => {
            for (i, s) in slots.iter().enumerate() {
                sep(&mut out, i);
                match s {
                    None => out.push_str("__"),
                    Some(p) => {
                        out.push(p.shirt.letter());
                        out.push(p.hat.map_or('_', Color::letter));
                    }
                }
            }
        }
        WorldState::Tangrams(shapes) => {
            for (i, s) in shapes.iter().enumerate() {
                sep(&mut out, i);
                let _ = write!(out, "{s}");
            }
        }
    }
    out
}

pub fn parse_state(s: &str, domain: Domain) -> Result<WorldState, StateParseError> {
    let err = |offset: usize, message: &'static str| StateParseError {
        domain,
        offset,
        message,
    };
    let mut slots: Vec<(usize, &str)> = Vec::new();
    let mut offset = 0;
    for field in s.split(' ') {
        let start = offset;
        offset += field.len() + 1;
        if field.is_empty() {
            if s.is_empty() {
                break;
            }
            return Err(err(start, "empty slot"));
        }
        let (pos, payload) = field
            .split_once(':')
            .ok_or(err(start, "expected `<pos>:<payload>`"))?;
        let pos: usize = pos
            .parse()
            .map_err(|_| err(start, "position is not a number"))?;
        if pos != slots.len() + 1 {
            return Err(err(start, "positions must be listed as 1, 2, 3, ..."));
        }
        slots.push((start + field.len() - payload.len(), payload));
    }
    match domain {
        Domain::Alchemy => {
            let mut beakers = Vec::with_capacity(slots.len());
            for (at, payload) in slots {
                if payload == "_" {
                    beakers.push(Beaker::empty());
                    continue;
                }
                let units: Vec<Color> = payload
                    .chars()
                    .map(|c| Color::from_letter(c).ok_or(err(at, "unknown color letter")))
                    .collect::<Result<_, _>>()?;
                if units.is_empty() {
                    return Err(err(at, "missing beaker contents"));
                }
                if units.len() > CAPACITY {
                    return Err(err(at, "beaker over capacity"));
                }
                beakers.push(Beaker::from_units(&units).expect("capacity checked"));
            }
            Ok(WorldState::Alchemy(beakers))
        }
        Domain::Scene => {
            let paint = |c: char, at: usize| {
                Color::from_letter(c)
                    .filter(|c| Color::PAINTS.contains(c))
                    .ok_or(err(at, "unknown color letter"))
            };
            let mut stage: Vec<Option<Person>> = Vec::with_capacity(slots.len());
            for (at, payload) in slots {
                let mut chars = payload.chars();
                let (Some(a), Some(b), None) = (chars.next(), chars.next(), chars.next()) else {
                    return Err(err(at, "expected two letters"));
                };
                let person = match (a, b) {
                    ('_', '_') => None,
                    ('_', _) => return Err(err(at, "hat without a person")),
                    (shirt, hat) => Some(Person {
                        shirt: paint(shirt, at)?,
                        hat: if hat == '_' {
                            None
                        } else {
                            Some(paint(hat, at)?)
                        },
                    }),
                };
                if let Some(p) = person {
                    if stage.iter().flatten().any(|q| q.shirt == p.shirt) {
                        return Err(err(at, "duplicate shirt color"));
                    }
                }
                stage.push(person);
            }
            Ok(WorldState::Scene(stage))
        }
        Domain::Tangrams => {
            let mut shapes: Vec<u8> = Vec::with_capacity(slots.len());
            for (at, payload) in slots {
                let shape: u8 = payload
                    .parse()
                    .map_err(|_| err(at, "shape is not a number"))?;
                if shape >= SHAPES {
                    return Err(err(at, "shape out of range"));
                }
                if shapes.contains(&shape) {
                    return Err(err(at, "duplicate figure"));
                }
                shapes.push(shape);
            }
            Ok(WorldState::Tangrams(shapes))
        }
    }
}

#[cfg(test)]
pub(crate) fn arb_state(domain: Domain) -> proptest::strategy::BoxedStrategy<WorldState> {
    use alloc::vec;
    use proptest::prelude::*;

    match domain {
        Domain::Alchemy => prop::collection::vec(
            prop::collection::vec(prop::sample::select(Color::ALL.to_vec()), 0..=CAPACITY),
            1..=7,
        )
        .prop_map(|bs| {
            WorldState::Alchemy(bs.iter().map(|u| Beaker::from_units(u).unwrap()).collect())
        })
        .boxed(),
        Domain::Scene => (
            prop::sample::subsequence(Color::PAINTS.to_vec(), 0..=6).prop_shuffle(),
            prop::collection::vec(
                prop::option::of(prop::sample::select(Color::PAINTS.to_vec())),
                6,
            ),
            prop::collection::vec(any::<bool>(), 10),
        )
            .prop_map(|(shirts, hats, occupied)| {
                let mut stage = vec![None; 10];
                let mut people = shirts.into_iter().zip(hats);
                for (slot, occ) in stage.iter_mut().zip(occupied) {
                    if occ {
                        if let Some((shirt, hat)) = people.next() {
                            *slot = Some(Person { shirt, hat });
                        }
                    }
                }
                WorldState::Scene(stage)
            })
            .boxed(),
        Domain::Tangrams => prop::sample::subsequence((0..SHAPES).collect::<Vec<_>>(), 0..=10)
            .prop_shuffle()
            .prop_map(WorldState::Tangrams)
            .boxed(),
    }
}
