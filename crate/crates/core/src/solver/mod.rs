//! Field-sensitive, flow- and context-insensitive Andersen analysis.
//!
//! Allocation site `0` stands for Null. Variables with a tagged name never
//! admit site `0`.

mod classify;
mod constraints;
mod naive;
mod worklist;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

pub use classify::{classify_assertions, AssertVerdict, SafetyReport, Timings, Verdict};
pub use constraints::{generate_constraints, generate_constraints_without, Constraint, ConstraintSet, Rule};
pub use naive::{solve_naive, solve_naive_with, FilterSchedule};
pub use worklist::solve_worklist;

pub type Site = u32;
pub const NULL_SITE: Site = 0;

/// A points-to variable: a program variable, a global, or an analysis
/// temporary (names starting with `%`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarKey {
    pub proc: Option<String>,
    pub name: String,
}

impl VarKey {
    pub fn global(name: &str) -> Self {
        Self { proc: None, name: name.to_string() }
    }

    pub fn local(proc: &str, name: &str) -> Self {
        Self { proc: Some(proc.to_string()), name: name.to_string() }
    }

    pub fn is_tagged(&self) -> bool {
        crate::names::is_tagged(&self.name)
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.proc {
            Some(p) => write!(f, "{p}::{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

/// `vars[x]` is `pt(x)`, `fields[(i, f)]` is `pt(aS_i.f)`. Empty sets are
/// omitted so solutions compare structurally.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PointsTo {
    pub vars: BTreeMap<VarKey, BTreeSet<Site>>,
    pub fields: BTreeMap<(Site, String), BTreeSet<Site>>,
}

impl PointsTo {
    pub fn var(&self, key: &VarKey) -> BTreeSet<Site> {
        self.vars.get(key).cloned().unwrap_or_default()
    }

    pub fn field(&self, site: Site, field: &str) -> BTreeSet<Site> {
        self.fields.get(&(site, field.to_string())).cloned().unwrap_or_default()
    }
}
