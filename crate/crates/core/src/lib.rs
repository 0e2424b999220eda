//! Context-dependent semantic parsing over simulated worlds, learned from
//! final-state supervision.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command
//! line live in the `ctxparse` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod learner;
pub mod logic;
pub mod model;
pub mod parser;
pub mod text;
pub mod worlds;
