use std::collections::BTreeSet;

use serde::Serialize;

use super::{PointsTo, Site, VarKey, NULL_SITE};
use crate::ir::{Cond, Path, Program, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Safe,
    Unproved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertVerdict {
    pub proc: String,
    pub block: String,
    pub index: usize,
    pub verdict: Verdict,
}

/// Wall time per phase in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub parse: f64,
    pub lift: f64,
    pub ssa: f64,
    pub gvn: f64,
    pub solve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub asserts_total: usize,
    pub asserts_unproved: usize,
    pub per_assert: Vec<AssertVerdict>,
    pub timings_ms: Timings,
}

impl SafetyReport {
    pub fn safe(&self) -> BTreeSet<(String, String, usize)> {
        self.per_assert
            .iter()
            .filter(|a| a.verdict == Verdict::Safe)
            .map(|a| (a.proc.clone(), a.block.clone(), a.index))
            .collect()
    }
}

/// Abstract value of `path` in `proc`: `pt` of the base, then each field
/// read through the non-null sites reached so far.
pub(crate) fn eval_path(program: &Program, sol: &PointsTo, proc: &str, path: &Path) -> BTreeSet<Site> {
    let key = if program.is_global(&path.base) {
        VarKey::global(&path.base)
    } else {
        VarKey::local(proc, &path.base)
    };
    let mut cur = sol.var(&key);
    for f in &path.fields {
        cur = cur
            .iter()
            .filter(|&&s| s != NULL_SITE)
            .flat_map(|&s| sol.field(s, f))
            .collect();
    }
    cur
}

/// An `assert (e != Null)` is SAFE when Null is absent from the abstract
/// value of `e`. Every other assertion is UNPROVED.
pub fn classify_assertions(program: &Program, sol: &PointsTo) -> SafetyReport {
    let mut per_assert = Vec::new();
    for (proc, block, index, stmt) in program.statements() {
        let Stmt::Assert(cond) = stmt else { continue };
        let verdict = match cond {
            Cond::NonNull(path) if !eval_path(program, sol, &proc.name, path).contains(&NULL_SITE) => {
                Verdict::Safe
            }
            _ => Verdict::Unproved,
        };
        per_assert.push(AssertVerdict {
            proc: proc.name.clone(),
            block: block.label.clone(),
            index,
            verdict,
        });
    }
    SafetyReport {
        asserts_total: per_assert.len(),
        asserts_unproved: per_assert.iter().filter(|a| a.verdict == Verdict::Unproved).count(),
        per_assert,
        timings_ms: Timings::default(),
    }
}
