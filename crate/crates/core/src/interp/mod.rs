//! Bounded, exhaustive interpreter.
//!
//! Every nondeterministic choice (multi-target `goto`, opaque conditions) is
//! explored up to a budget of executed statements. Each path yields a trace
//! of observable events: changes to source-level variables, assertion
//! outcomes, faults and the final return.
//!
//! Statements that only exist because of a transformation (SSA merge
//! copies, tagged temporaries, loop-lifting plumbing) are executed but cost
//! no budget and produce no assignment events, so the trace of a program
//! and of its transformed form can be compared directly.

mod engine;
mod soundness;
mod terms;
mod trace;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ir::Program;

pub use soundness::{check_solution_soundness, Violation};
pub use terms::{check_term_soundness, TermViolation};
pub use trace::{traces_equivalent, traces_equivalent_by};

/// Default bound on the number of traces one enumeration may produce.
pub const DEFAULT_TRACE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSummary {
    Undef,
    Null,
    /// The `ordinal`-th object allocated at `site` on this path.
    Loc { site: u32, ordinal: u32 },
}

/// Source position of an event: the `index`-th source statement of `block`
/// in procedure `proc` (transformation-introduced statements not counted).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EventLoc {
    pub proc: String,
    pub block: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// A source variable changed value. `proc` is empty for globals.
    Assign { proc: String, var: String, value: ValueSummary },
    AssertPass { loc: EventLoc },
    AssertFail { loc: EventLoc },
    NullDeref { loc: EventLoc },
    /// Dereference or test of a never-assigned variable.
    UninitRead { loc: EventLoc },
    AssumeBlocked { loc: EventLoc, synthetic: bool },
    ProcReturn { values: Vec<ValueSummary> },
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn last(&self) -> Option<&Event> {
        self.events.last()
    }
}

pub type TraceSet = BTreeSet<Trace>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Source statements executed per path.
    pub depth: u32,
    pub max_traces: usize,
}

impl Limits {
    pub fn depth(depth: u32) -> Self {
        Self { depth, max_traces: DEFAULT_TRACE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("trace limit of {0} exceeded")]
    TooManyTraces(usize),
}

pub fn enumerate_traces(program: &Program, depth: u32) -> Result<TraceSet, InterpError> {
    enumerate_traces_with(program, Limits::depth(depth))
}

pub fn enumerate_traces_with(program: &Program, limits: Limits) -> Result<TraceSet, InterpError> {
    let compiled = engine::Compiled::new(program);
    Ok(engine::run(&compiled, limits, &mut engine::NoHooks)?.traces)
}
