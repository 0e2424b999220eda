//! Canonical rendering of feature conditions and its inverse.

use alloc::string::String;
use core::fmt::Write;

use thiserror::Error;

use super::{Condition, Fact, Predicate};
use crate::logic::Extremum;
use crate::worlds::{ActionName, Color, EntityId, Property, Value, SHAPES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum FeatureNameError {
    #[error("malformed feature name")]
    Malformed,
    #[error("unknown feature family")]
    UnknownFamily,
    #[error("unknown predicate")]
    UnknownPredicate,
    #[error("malformed argument fact")]
    BadFact,
}

fn write_predicate(s: &mut String, p: &Predicate) {
    let _ = match p {
        Predicate::Action(a) => write!(s, "{a}"),
        Predicate::ContextAction { back } => write!(s, "actions[-{back}]"),
        Predicate::ContextArg { back, arg } => write!(s, "args[-{back}][{arg}]"),
        Predicate::Num(n) => write!(s, "{n}"),
        Predicate::Color(c) => write!(s, "{}", c.name()),
        Predicate::Shape(x) => write!(s, "shape{x}"),
        Predicate::Entity(e) => write!(s, "{e}"),
        Predicate::Property(p) => write!(s, "{p}"),
        Predicate::Extremum(e) => write!(s, "{}", e.name()),
    };
}

fn write_fact(s: &mut String, prefix: &str, arg: u8, f: &Fact) {
    let _ = write!(s, "{prefix}arg{arg}");
    if let Some(p) = f.property {
        let _ = write!(s, ".{p}");
    }
    let _ = match f.value {
        Some(v) => write!(s, "={v}"),
        None => write!(s, "=none"),
    };
}

pub(super) fn write_condition(s: &mut String, c: &Condition) {
    let _ = write!(s, "F{}|", c.family());
    match c {
        Condition::Contains(p) => {
            s.push_str("contains:");
            write_predicate(s, p);
        }
        Condition::ArgProperty { arg, fact } => write_fact(s, "", *arg, fact),
        Condition::ActionArgProperty { action, arg, fact } => {
            let _ = write!(s, "{action}|");
            write_fact(s, "", *arg, fact);
        }
        Condition::ArgPair { first, second } => {
            write_fact(s, "", 1, first);
            s.push('|');
            write_fact(s, "", 2, second);
        }
        Condition::ArgReused { arg, prev_arg } => {
            let _ = write!(s, "arg{arg}=prev.arg{prev_arg}");
        }
        Condition::ActionReused => s.push_str("action=prev"),
        Condition::ArgFollows {
            arg,
            fact,
            prev_arg,
            prev_fact,
        } => {
            write_fact(s, "", *arg, fact);
            s.push('|');
            write_fact(s, "prev.", *prev_arg, prev_fact);
        }
        Condition::SpansOrdered => s.push_str("t1<s2"),
    }
}

fn parse_back(s: &str) -> Option<u8> {
    s.strip_prefix("[-")?.strip_suffix(']')?.parse().ok()
}

fn parse_predicate(s: &str) -> Result<Predicate, FeatureNameError> {
    let p = if let Some(a) = ActionName::from_name(s) {
        Predicate::Action(a)
    } else if let Some(rest) = s.strip_prefix("actions") {
        Predicate::ContextAction {
            back: parse_back(rest).ok_or(FeatureNameError::UnknownPredicate)?,
        }
    } else if let Some(rest) = s.strip_prefix("args") {
        let (b, j) = rest
            .split_once("][")
            .ok_or(FeatureNameError::UnknownPredicate)?;
        let back = parse_back(&[b, "]"].concat()).ok_or(FeatureNameError::UnknownPredicate)?;
        let arg = j
            .strip_suffix(']')
            .and_then(|j| j.parse().ok())
            .ok_or(FeatureNameError::UnknownPredicate)?;
        Predicate::ContextArg { back, arg }
    } else if let Ok(n) = s.parse() {
        Predicate::Num(n)
    } else if let Some(c) = Color::from_name(s) {
        Predicate::Color(c)
    } else if let Some(p) = Property::from_name(s) {
        Predicate::Property(p)
    } else if s == "argmin" {
        Predicate::Extremum(Extremum::Argmin)
    } else if s == "argmax" {
        Predicate::Extremum(Extremum::Argmax)
    } else if let Some(x) = s.strip_prefix("shape").and_then(|x| x.parse::<u8>().ok()) {
        if x >= SHAPES {
            return Err(FeatureNameError::UnknownPredicate);
        }
        Predicate::Shape(x)
    } else if let Some(e) = EntityId::parse(s) {
        Predicate::Entity(e)
    } else {
        return Err(FeatureNameError::UnknownPredicate);
    };
    Ok(p)
}

fn parse_fact(s: &str, prefix: &str) -> Result<(u8, Fact), FeatureNameError> {
    let bad = FeatureNameError::BadFact;
    let s = s
        .strip_prefix(prefix)
        .ok_or(bad)?
        .strip_prefix("arg")
        .ok_or(bad)?;
    let (lhs, value) = s.split_once('=').ok_or(bad)?;
    let (arg, property) = match lhs.split_once('.') {
        Some((a, p)) => (a, Some(Property::from_name(p).ok_or(bad)?)),
        None => (lhs, None),
    };
    let arg: u8 = arg.parse().map_err(|_| bad)?;
    let value = if value == "none" {
        None
    } else {
        Some(Value::parse(value).ok_or(bad)?)
    };
    if property.is_none() && value.is_none() {
        return Err(bad);
    }
    Ok((arg, Fact { property, value }))
}

pub(super) fn parse_condition(s: &str) -> Result<Condition, FeatureNameError> {
    let (family, body) = s.split_once('|').ok_or(FeatureNameError::Malformed)?;
    let c = match family {
        "F1" => Condition::Contains(parse_predicate(
            body.strip_prefix("contains:")
                .ok_or(FeatureNameError::Malformed)?,
        )?),
        "F2" => {
            let (arg, fact) = parse_fact(body, "")?;
            Condition::ArgProperty { arg, fact }
        }
        "F3" => {
            let (a, f) = body.split_once('|').ok_or(FeatureNameError::Malformed)?;
            let action = ActionName::from_name(a).ok_or(FeatureNameError::UnknownPredicate)?;
            let (arg, fact) = parse_fact(f, "")?;
            Condition::ActionArgProperty { action, arg, fact }
        }
        "F4" => {
            let (a, b) = body.split_once('|').ok_or(FeatureNameError::Malformed)?;
            let ((1, first), (2, second)) = (parse_fact(a, "")?, parse_fact(b, "")?) else {
                return Err(FeatureNameError::BadFact);
            };
            Condition::ArgPair { first, second }
        }
        "F5" => {
            let (a, b) = body
                .split_once("=prev.arg")
                .ok_or(FeatureNameError::Malformed)?;
            let arg = a.strip_prefix("arg").and_then(|a| a.parse().ok());
            match (arg, b.parse().ok()) {
                (Some(arg), Some(prev_arg)) => Condition::ArgReused { arg, prev_arg },
                _ => return Err(FeatureNameError::Malformed),
            }
        }
        "F6" if body == "action=prev" => Condition::ActionReused,
        "F7" => {
            let (a, b) = body.split_once('|').ok_or(FeatureNameError::Malformed)?;
            let (arg, fact) = parse_fact(a, "")?;
            let (prev_arg, prev_fact) = parse_fact(b, "prev.")?;
            Condition::ArgFollows {
                arg,
                fact,
                prev_arg,
                prev_fact,
            }
        }
        "F8" if body == "t1<s2" => Condition::SpansOrdered,
        "F6" | "F8" => return Err(FeatureNameError::Malformed),
        _ => return Err(FeatureNameError::UnknownFamily),
    };
    Ok(c)
}
