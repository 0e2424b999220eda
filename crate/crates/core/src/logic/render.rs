//! Canonical text rendering of logical forms and its LL(1) parser.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use super::{Extremum, LogicalForm};
use crate::worlds::{ActionName, Color, EntityId, Property, SHAPES};

pub(super) fn write(lf: &LogicalForm, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match lf {
        LogicalForm::Num(n) => write!(f, "{n}"),
        LogicalForm::Color(c) => f.write_str(c.name()),
        LogicalForm::Shape(s) => write!(f, "shape{s}"),
        LogicalForm::Entity(e) => write!(f, "{e}"),
        LogicalForm::Property(p) => f.write_str(p.name()),
        LogicalForm::Action(a) => f.write_str(a.name()),
        LogicalForm::ContextAction(i) => write!(f, "actions[{i}]"),
        LogicalForm::ContextArg(i, j) => write!(f, "args[{i}][{j}]"),
        LogicalForm::Select(p, v) => write!(f, "{p}({v})"),
        LogicalForm::Superlative(ext, s, p) => write!(f, "{}({s},{p})", ext.name()),
        LogicalForm::Index(s, i) => write!(f, "{s}[{i}]"),
        LogicalForm::Apply(a, args) => {
            write!(f, "{a}(")?;
            for (k, arg) in args.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{arg}")?;
            }
            f.write_str(")")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid logical form at byte {offset}: {message}")]
pub struct LfParseError {
    pub offset: usize,
    pub message: &'static str,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: &'static str) -> Result<T, LfParseError> {
        Err(LfParseError {
            offset: self.pos,
            message,
        })
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8, message: &'static str) -> Result<(), LfParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(message)
        }
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'-' || c == b'_')
        {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn bracketed_number(&mut self) -> Result<u32, LfParseError> {
        self.expect(b'[', "expected `[`")?;
        let at = self.pos;
        let n = self.word().parse().map_err(|_| LfParseError {
            offset: at,
            message: "expected a number",
        })?;
        self.expect(b']', "expected `]`")?;
        Ok(n)
    }

    fn small_index(&mut self) -> Result<u8, LfParseError> {
        let at = self.pos;
        match u8::try_from(self.bracketed_number()?) {
            Ok(i) if i >= 1 => Ok(i),
            _ => Err(LfParseError {
                offset: at,
                message: "context index out of range",
            }),
        }
    }

    fn arguments(&mut self) -> Result<Vec<Arc<LogicalForm>>, LfParseError> {
        let mut args = Vec::new();
        if self.eat(b')') {
            return Ok(args);
        }
        loop {
            args.push(Arc::new(self.expr()?));
            if self.eat(b')') {
                return Ok(args);
            }
            self.expect(b',', "expected `,` or `)`")?;
        }
    }

    fn expr(&mut self) -> Result<LogicalForm, LfParseError> {
        let at = self.pos;
        let word = self.word();
        if word.is_empty() {
            return self.err("expected a logical form");
        }
        let mut node = if let Ok(n) = word.parse::<u32>() {
            LogicalForm::Num(n)
        } else if word == "actions" {
            LogicalForm::ContextAction(self.small_index()?)
        } else if word == "args" {
            let i = self.small_index()?;
            LogicalForm::ContextArg(i, self.small_index()?)
        } else if word == "argmin" || word == "argmax" {
            let ext = if word == "argmin" {
                Extremum::Argmin
            } else {
                Extremum::Argmax
            };
            self.expect(b'(', "expected `(`")?;
            let s = self.expr()?;
            self.expect(b',', "expected `,`")?;
            let p = self.expr()?;
            self.expect(b')', "expected `)`")?;
            LogicalForm::Superlative(ext, Arc::new(s), Arc::new(p))
        } else if let Some(a) = ActionName::from_name(word) {
            LogicalForm::Action(a)
        } else if let Some(p) = Property::from_name(word) {
            LogicalForm::Property(p)
        } else if let Some(c) = Color::from_name(word) {
            LogicalForm::Color(c)
        } else if let Some(s) = word
            .strip_prefix("shape")
            .and_then(|s| s.parse::<u8>().ok())
        {
            if s >= SHAPES {
                return Err(LfParseError {
                    offset: at,
                    message: "shape out of range",
                });
            }
            LogicalForm::Shape(s)
        } else if let Some(e) = EntityId::parse(word) {
            LogicalForm::Entity(e)
        } else {
            return Err(LfParseError {
                offset: at,
                message: "unknown symbol",
            });
        };
        if self.eat(b'(') {
            node = match node {
                LogicalForm::Action(_) | LogicalForm::ContextAction(_) => {
                    LogicalForm::Apply(Arc::new(node), self.arguments()?)
                }
                LogicalForm::Property(_) => {
                    let v = self.expr()?;
                    self.expect(b')', "expected `)`")?;
                    LogicalForm::Select(Arc::new(node), Arc::new(v))
                }
                _ => return self.err("only actions and properties take arguments"),
            };
        }
        while self.peek() == Some(b'[') {
            let i = self.bracketed_number()?;
            node = LogicalForm::Index(Arc::new(node), Arc::new(LogicalForm::Num(i)));
        }
        Ok(node)
    }
}

pub(super) fn parse(s: &str) -> Result<LogicalForm, LfParseError> {
    let mut p = Parser { src: s, pos: 0 };
    let lf = p.expr()?;
    if p.pos != s.len() {
        return p.err("trailing input");
    }
    Ok(lf)
}
