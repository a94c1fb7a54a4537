//! Structured character-style extraction for low-resource persona rewriting.
//!
//! The crate turns a small tokenized corpus, its constituency parses and a set
//! of utterance embeddings into a three-part style vector:
//!
//! * a TF-PMI ranked lexicon ([`lexical`]),
//! * a normalized distribution of PCFG productions over interpretable syntactic
//!   dimensions ([`syntactic`]),
//! * a pragmatic label profile predicted by a small multi-label refiner
//!   ([`refiner`]).
//!
//! It also carries the metric suite used to score rewrites ([`evaluation`]),
//! the parallel-pair dataset tooling ([`dataset`]) and the N-shot stability
//! analysis ([`style_vector`]).
//!
//! Everything here is pure computation over in-memory values and builds under
//! `no_std` with `alloc`. File formats, configuration and the command line live
//! in the companion `charstyle` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod dataset;
mod error;
pub mod evaluation;
pub mod lexical;
pub mod math;
pub mod refiner;
pub mod style_vector;
pub mod syntactic;
pub mod treebank;

pub use error::{Error, Result};
