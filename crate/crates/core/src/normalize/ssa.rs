//! SSA renaming for acyclic procedures.
//!
//! Definitions of `x` become `x__1`, `x__2`, ... and the value a variable has on
//! entry keeps the plain name. Where predecessors of a block disagree on the
//! current version of `x`, a merge variable `x__pN` is introduced and every
//! predecessor copies its version into it as its last statement. Globals are
//! left alone.

use std::collections::{BTreeMap, BTreeSet};

use super::topo::topo_indices;
use crate::diagnostic::{Diagnostic, IrLocation};
use crate::ir::{Procedure, Program, Stmt, Transfer};
use crate::names::NameSupply;

pub fn to_ssa(program: &Program) -> Result<Program, Diagnostic> {
    let globals: BTreeSet<&str> = program.globals.iter().map(String::as_str).collect();
    let procedures = program
        .procedures
        .iter()
        .map(|p| ssa_procedure(p, &globals))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Program { globals: program.globals.clone(), procedures, entry: program.entry.clone() })
}

type Versions = BTreeMap<String, String>;

/// One version counter per source variable, shared by definitions and merges.
struct Versioner {
    supply: NameSupply,
    counters: BTreeMap<String, usize>,
    created: Vec<String>,
}

impl Versioner {
    fn next(&mut self, var: &str, merge: bool) -> String {
        let counter = self.counters.entry(var.to_string()).or_insert(0);
        loop {
            *counter += 1;
            let name = if merge { format!("{var}__p{counter}") } else { format!("{var}__{counter}") };
            if !self.supply.contains(&name) {
                self.supply.reserve(&name);
                self.created.push(name.clone());
                return name;
            }
        }
    }
}

fn ssa_procedure(proc: &Procedure, globals: &BTreeSet<&str>) -> Result<Procedure, Diagnostic> {
    let cfg = proc.cfg();
    let order = topo_indices(&cfg).ok_or_else(|| {
        Diagnostic::error(format!("SSA requires acyclic control flow in `{}`", proc.name))
            .at(IrLocation::proc(&proc.name))
    })?;
    let vars: Vec<String> = proc.scope_vars().cloned().collect();
    let mut namer = Versioner {
        supply: NameSupply::new(vars.iter().cloned().chain(globals.iter().map(|g| g.to_string()))),
        counters: BTreeMap::new(),
        created: Vec::new(),
    };
    let identity: Versions = vars.iter().map(|v| (v.clone(), v.clone())).collect();
    let mut blocks = proc.blocks.clone();
    let mut out_state: Vec<Option<Versions>> = vec![None; blocks.len()];

    for &b in &order {
        let preds = &cfg.preds[b];
        let mut cur = if preds.is_empty() {
            identity.clone()
        } else {
            let mut merged = Versions::new();
            for v in &vars {
                let incoming: Vec<String> = preds
                    .iter()
                    .map(|&p| out_state[p].as_ref().expect("predecessor visited")[v].clone())
                    .collect();
                if incoming.iter().all(|x| *x == incoming[0]) {
                    merged.insert(v.clone(), incoming[0].clone());
                    continue;
                }
                let phi = namer.next(v, true);
                for (&p, src) in preds.iter().zip(&incoming) {
                    blocks[p].stmts.push(Stmt::copy(&phi, src));
                }
                merged.insert(v.clone(), phi);
            }
            merged
        };
        for stmt in &mut blocks[b].stmts {
            stmt.rename_vars(|name, is_write| {
                if globals.contains(name) {
                    name.to_string()
                } else if is_write {
                    let fresh = namer.next(name, false);
                    cur.insert(name.to_string(), fresh.clone());
                    fresh
                } else {
                    cur.get(name).cloned().unwrap_or_else(|| name.to_string())
                }
            });
        }
        out_state[b] = Some(cur);
    }

    let return_blocks: Vec<usize> =
        (0..blocks.len()).filter(|&b| blocks[b].transfer == Transfer::Return).collect();
    let mut returns = Vec::new();
    for r in &proc.returns {
        let versions: Vec<String> = return_blocks
            .iter()
            .map(|&b| out_state[b].as_ref().expect("all blocks visited")[r].clone())
            .collect();
        let finals = match versions.first() {
            None => r.clone(),
            Some(first) if versions.iter().all(|v| v == first) => first.clone(),
            Some(_) => {
                let phi = namer.next(r, true);
                for (&b, src) in return_blocks.iter().zip(&versions) {
                    blocks[b].stmts.push(Stmt::copy(&phi, src));
                }
                phi
            }
        };
        returns.push(finals);
    }

    let signature: BTreeSet<&String> = proc.params.iter().chain(&returns).collect();
    let locals = proc
        .returns
        .iter()
        .chain(&proc.locals)
        .chain(&namer.created)
        .filter(|v| !signature.contains(v))
        .cloned()
        .collect();
    Ok(Procedure {
        name: proc.name.clone(),
        params: proc.params.clone(),
        returns,
        locals,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{validate, Stmt};
    use crate::parse::{parse_program, print_program};

    fn ssa(src: &str) -> Program {
        let out = to_ssa(&parse_program(src).unwrap()).unwrap();
        assert!(validate(&out).is_empty(), "{:?}", validate(&out));
        out
    }

    #[test]
    fn straight_line_example() {
        let out = ssa(include_str!("../../corpus/ssa_reassign.ir"));
        let stmts = &out.procedures[0].blocks[0].stmts;
        let text: Vec<String> = stmts.iter().map(crate::parse::print_stmt).collect();
        assert_eq!(
            text,
            ["x__1 := new(1);", "assert (x__1 != Null);", "y__1 := x__1.f;", "x__2 := Null;"]
        );
    }

    #[test]
    fn single_assignment_already() {
        let out = ssa("procedure main() { var a; L1: a := new(1); assert (a != Null); return; }");
        let text = print_program(&out);
        assert!(text.contains("a__1 := new(1);"));
        assert!(text.contains("assert (a__1 != Null);"));
    }

    #[test]
    fn diamond_inserts_copies() {
        let out = ssa(
            "procedure main() { var x; var y; L1: goto L2, L3; \
             L2: x := new(1); goto L4; L3: x := Null; goto L4; L4: y := x; return; }",
        );
        let p = &out.procedures[0];
        assert_eq!(p.blocks[1].stmts.last(), Some(&Stmt::copy("x__p3", "x__1")));
        assert_eq!(p.blocks[2].stmts.last(), Some(&Stmt::copy("x__p3", "x__2")));
        assert_eq!(p.blocks[3].stmts[0], Stmt::copy("y__1", "x__p3"));
    }

    #[test]
    fn returns_follow_final_version() {
        let out = ssa("procedure f(a) returns (r) { L1: r := a; r := Null; return; } \
                       procedure main() { var b; L1: b := call f(b); return; }");
        let f = &out.procedures[0];
        assert_eq!(f.returns, ["r__2"]);
        assert!(f.locals.contains(&"r".to_string()));
    }

    #[test]
    fn returns_merge_across_return_blocks() {
        let out = ssa("procedure f() returns (r) { L1: goto L2, L3; L2: r := Null; return; \
                       L3: return; } procedure main() { var b; L1: b := call f(); return; }");
        let f = &out.procedures[0];
        assert_eq!(f.returns, ["r__p2"]);
        assert_eq!(f.blocks[1].stmts.last(), Some(&Stmt::copy("r__p2", "r__1")));
        assert_eq!(f.blocks[2].stmts.last(), Some(&Stmt::copy("r__p2", "r")));
    }

    #[test]
    fn globals_untouched() {
        let out = ssa("var g; procedure main() { L1: g := new(1); g := Null; return; }");
        let text = print_program(&out);
        assert!(text.contains("g := new(1);"));
        assert!(!text.contains("g__"));
    }

    #[test]
    fn cyclic_rejected() {
        let p = parse_program("procedure main() { L1: goto L1; }").unwrap();
        assert!(to_ssa(&p).is_err());
    }
}
