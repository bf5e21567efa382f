use std::collections::BTreeSet;

use serde::Serialize;

use super::engine::{self, Compiled, Hooks, State, Value, VarRef};
use super::{InterpError, Limits};
use crate::ir::Program;
use crate::names;
use crate::solver::{PointsTo, VarKey, NULL_SITE};

/// A concrete value the solution failed to predict.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Violation {
    Var { var: String, site: u32 },
    Field { site: u32, field: String, value: u32 },
}

struct Checker<'a> {
    pt: &'a PointsTo,
    found: BTreeSet<Violation>,
}

fn site_of(s: &State, v: Value) -> Option<u32> {
    match v {
        Value::Loc(o) => Some(s.heap[o].site),
        Value::Null => Some(NULL_SITE),
        Value::Undef => None,
    }
}

impl Hooks for Checker<'_> {
    fn var_written(&mut self, c: &Compiled, s: &State, proc: usize, var: VarRef, v: Value) {
        let (key, name) = match var {
            VarRef::Local(slot) => {
                let name = &c.procs[proc].slot_names[slot];
                (VarKey::local(&c.procs[proc].name, name), name)
            }
            VarRef::Global(g) => (VarKey::global(&c.globals[g]), &c.globals[g]),
        };
        let Some(site) = site_of(s, v) else { return };
        if site == NULL_SITE && names::is_tagged(name) {
            return;
        }
        if !self.pt.var(&key).contains(&site) {
            self.found.insert(Violation::Var { var: key.to_string(), site });
        }
    }

    fn field_written(&mut self, c: &Compiled, s: &State, site: u32, field: usize, v: Value) {
        let Some(value) = site_of(s, v) else { return };
        let name = &c.fields[field];
        if !self.pt.field(site, name).contains(&value) {
            self.found.insert(Violation::Field { site, field: name.clone(), value });
        }
    }

    fn allocated(&mut self, c: &Compiled, _s: &State, site: u32) {
        for f in &c.fields {
            if !self.pt.field(site, f).contains(&NULL_SITE) {
                self.found.insert(Violation::Field { site, field: f.clone(), value: NULL_SITE });
            }
        }
    }
}

/// Run every bounded path of `program` and report each concrete
/// points-to fact missing from `pt`. Empty means sound up to `depth`.
pub fn check_solution_soundness(
    program: &Program,
    pt: &PointsTo,
    limits: Limits,
) -> Result<Vec<Violation>, InterpError> {
    let compiled = Compiled::new(program);
    let mut checker = Checker { pt, found: BTreeSet::new() };
    engine::run(&compiled, limits, &mut checker)?;
    Ok(checker.found.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;
    use crate::solver::{generate_constraints, solve_naive};

    #[test]
    fn solver_output_is_sound_on_two_procs() {
        let p = parse_program(include_str!("../../corpus/two_procs.ir")).unwrap();
        let pt = solve_naive(&generate_constraints(&p));
        assert_eq!(check_solution_soundness(&p, &pt, Limits::depth(32)).unwrap(), vec![]);
    }

    #[test]
    fn empty_solution_is_caught() {
        let p = parse_program("procedure main() { var x; L1: x := new(1); x.f := x; return; }").unwrap();
        let v = check_solution_soundness(&p, &PointsTo::default(), Limits::depth(8)).unwrap();
        assert!(v.contains(&Violation::Var { var: "main::x".into(), site: 1 }));
        assert!(v.contains(&Violation::Field { site: 1, field: "f".into(), value: 1 }));
        assert!(v.contains(&Violation::Field { site: 1, field: "f".into(), value: 0 }));
    }
}
