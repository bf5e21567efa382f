//! Null-aware global value numbering and field-sensitive Andersen analysis
//! for a small pointer IR.

#![allow(clippy::result_large_err)]

pub mod diagnostic;
pub mod ir;
pub mod names;
pub mod parse;
pub mod normalize;
pub mod gvn;
pub mod solver;
pub mod interp;
pub mod corpus;
pub mod pipeline;
