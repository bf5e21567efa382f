//! Loop-to-recursion lifting.
//!
//! Each natural loop with header `H` in procedure `P` becomes a procedure
//! `P__loop_H` whose entry is `H`. Its parameters are every variable the
//! loop body reads or writes; it returns `d__ret` for every variable `d` the
//! body writes. Back edges become a recursive call followed by `return`. In
//! `P` the loop is replaced by a single block calling the new procedure.
//!
//! A loop with several exits also returns one flag per exit (`__eN`): the
//! taken exit sets its flag to a fresh allocation and the others to Null,
//! and the caller dispatches on them with `assume (flag != Null)`.

use std::collections::{BTreeMap, BTreeSet};

use super::dom::dominator_sets;
use crate::diagnostic::{Diagnostic, IrLocation};
use crate::ir::{cfg_is_acyclic, Block, Cfg, Cond, Path, Procedure, Program, SiteId, Stmt, Transfer};
use crate::names::NameSupply;

pub fn lift_loops(program: &Program) -> Result<Program, Vec<Diagnostic>> {
    let mut out = program.clone();
    let mut proc_names = NameSupply::new(program.procedures.iter().map(|p| p.name.clone()));
    let mut next_site = program.max_site() + 1;
    let mut diags = Vec::new();
    let mut i = 0;
    while i < out.procedures.len() {
        while !cfg_is_acyclic(&out.procedures[i]) {
            let proc = drop_unreachable(&out.procedures[i]);
            if cfg_is_acyclic(&proc) {
                out.procedures[i] = proc;
                break;
            }
            match lift_one(&proc, &out.globals, &mut proc_names, &mut next_site) {
                Ok((caller, lifted)) => {
                    out.procedures[i] = caller;
                    out.procedures.push(lifted);
                }
                Err(d) => {
                    diags.push(d);
                    break;
                }
            }
        }
        i += 1;
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

fn drop_unreachable(proc: &Procedure) -> Procedure {
    let reachable = proc.cfg().reachable();
    let mut out = proc.clone();
    out.blocks = proc.blocks.iter().zip(reachable).filter(|(_, r)| *r).map(|(b, _)| b.clone()).collect();
    out
}

/// Natural loops keyed by header, for a reducible CFG.
fn natural_loops(proc: &Procedure, cfg: &Cfg) -> Result<BTreeMap<usize, BTreeSet<usize>>, Diagnostic> {
    let dom = dominator_sets(cfg);
    let mut forward = cfg.clone();
    let mut loops: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (u, succs) in cfg.succs.iter().enumerate() {
        for &h in succs {
            if !dom[u].contains(&h) {
                continue;
            }
            forward.succs[u].retain(|&s| s != h);
            forward.preds[h].retain(|&p| p != u);
            let body = loops.entry(h).or_insert_with(|| BTreeSet::from([h]));
            let mut stack = vec![u];
            while let Some(n) = stack.pop() {
                if body.insert(n) {
                    stack.extend(cfg.preds[n].iter().copied());
                }
            }
        }
    }
    if forward.has_cycle() {
        return Err(Diagnostic::error(format!(
            "procedure `{}` has irreducible control flow",
            proc.name
        ))
        .at(IrLocation::proc(&proc.name)));
    }
    Ok(loops)
}

enum Exit {
    Jump(String),
    Return,
}

fn lift_one(
    proc: &Procedure,
    globals: &[String],
    proc_names: &mut NameSupply,
    next_site: &mut SiteId,
) -> Result<(Procedure, Procedure), Diagnostic> {
    let cfg = proc.cfg();
    let loops = natural_loops(proc, &cfg)?;
    let (&header, body) = loops
        .iter()
        .find(|(h, _)| !loops.iter().any(|(h2, b2)| h2 != *h && b2.contains(h)))
        .expect("cyclic reducible CFG has an outermost loop");
    let header_label = proc.blocks[header].label.clone();

    let mut touched: BTreeSet<&str> = BTreeSet::new();
    let mut written: BTreeSet<&str> = BTreeSet::new();
    let mut exits: Vec<Exit> = Vec::new();
    for &b in body {
        let block = &proc.blocks[b];
        for s in &block.stmts {
            touched.extend(s.uses());
            touched.extend(s.defs());
            written.extend(s.defs());
        }
        match &block.transfer {
            Transfer::Goto(ts) => {
                for t in ts {
                    let inside = proc.blocks.iter().position(|x| &x.label == t).is_some_and(|i| body.contains(&i));
                    if !inside && !exits.iter().any(|e| matches!(e, Exit::Jump(l) if l == t)) {
                        exits.push(Exit::Jump(t.clone()));
                    }
                }
            }
            Transfer::Return => {
                touched.extend(proc.returns.iter().map(String::as_str));
                if !exits.iter().any(|e| matches!(e, Exit::Return)) {
                    exits.push(Exit::Return);
                }
            }
        }
    }
    let params: Vec<String> = proc.scope_vars().filter(|v| touched.contains(v.as_str())).cloned().collect();
    let defined: Vec<String> = proc.scope_vars().filter(|v| written.contains(v.as_str())).cloned().collect();

    let mut vars = NameSupply::new(proc.scope_vars().cloned().chain(globals.iter().cloned()));
    let rets: Vec<String> = defined.iter().map(|d| vars.fresh(&format!("{d}__ret"))).collect();
    let flags: Vec<String> = if exits.len() >= 2 {
        (0..exits.len()).map(|i| vars.fresh(&format!("__e{i}"))).collect()
    } else {
        Vec::new()
    };
    let mut labels = NameSupply::new(proc.blocks.iter().map(|b| b.label.clone()));
    let back_label = labels.fresh(&format!("{header_label}__back"));
    let exit_labels: Vec<String> =
        (0..exits.len()).map(|i| labels.fresh(&format!("{header_label}__exit{i}"))).collect();
    let name = proc_names.fresh(&format!("{}__loop_{}", proc.name, header_label));

    let exit_of = |target: Option<&str>| -> String {
        let i = exits
            .iter()
            .position(|e| match (e, target) {
                (Exit::Jump(l), Some(t)) => l == t,
                (Exit::Return, None) => true,
                _ => false,
            })
            .expect("exit recorded");
        exit_labels[i].clone()
    };
    let in_body = |label: &str| body.iter().any(|&i| proc.blocks[i].label == label);

    let mut lifted_blocks = Vec::new();
    let ordered = std::iter::once(header).chain(body.iter().copied().filter(|&b| b != header));
    for b in ordered {
        let mut block = proc.blocks[b].clone();
        block.transfer = match &block.transfer {
            Transfer::Goto(ts) => {
                let mut mapped: Vec<String> = Vec::new();
                for t in ts {
                    let m = if *t == header_label {
                        back_label.clone()
                    } else if in_body(t) {
                        t.clone()
                    } else {
                        exit_of(Some(t))
                    };
                    if !mapped.contains(&m) {
                        mapped.push(m);
                    }
                }
                Transfer::Goto(mapped)
            }
            Transfer::Return => Transfer::Goto(vec![exit_of(None)]),
        };
        lifted_blocks.push(block);
    }
    let results: Vec<String> = rets.iter().chain(&flags).cloned().collect();
    lifted_blocks.push(Block::new(
        back_label,
        vec![Stmt::Call { outs: results.clone(), callee: name.clone(), args: params.clone() }],
        Transfer::Return,
    ));
    for (i, label) in exit_labels.iter().enumerate() {
        let mut stmts: Vec<Stmt> = defined.iter().zip(&rets).map(|(d, r)| Stmt::copy(r, d)).collect();
        for (j, flag) in flags.iter().enumerate() {
            stmts.push(if i == j {
                let site = *next_site;
                *next_site += 1;
                Stmt::Alloc { dst: flag.clone(), site }
            } else {
                Stmt::AssignNull { dst: flag.clone() }
            });
        }
        lifted_blocks.push(Block::new(label.clone(), stmts, Transfer::Return));
    }
    let lifted = Procedure {
        name: name.clone(),
        params: params.clone(),
        returns: results,
        locals: Vec::new(),
        blocks: lifted_blocks,
    };

    let call = Stmt::Call {
        outs: defined.iter().chain(&flags).cloned().collect(),
        callee: name,
        args: params,
    };
    let exit_transfer = |e: &Exit| match e {
        Exit::Jump(t) => Transfer::Goto(vec![t.clone()]),
        Exit::Return => Transfer::Return,
    };
    let mut dispatch = Vec::new();
    let header_transfer = match exits.len() {
        0 => Transfer::Return,
        1 => exit_transfer(&exits[0]),
        _ => {
            let mut targets = Vec::new();
            for (e, flag) in exits.iter().zip(&flags) {
                let label = labels.fresh(&format!("{header_label}__d{}", targets.len()));
                dispatch.push(Block::new(
                    label.clone(),
                    vec![Stmt::Assume(Cond::NonNull(Path::var(flag.clone())))],
                    exit_transfer(e),
                ));
                targets.push(label);
            }
            Transfer::Goto(targets)
        }
    };
    let mut caller = proc.clone();
    caller.blocks = Vec::new();
    for (i, block) in proc.blocks.iter().enumerate() {
        if i == header {
            caller.blocks.push(Block::new(header_label.clone(), vec![call.clone()], header_transfer.clone()));
        } else if !body.contains(&i) {
            caller.blocks.push(block.clone());
        }
    }
    caller.blocks.extend(dispatch);
    caller.locals.extend(flags);
    Ok((caller, lifted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::validate;
    use crate::parse::{parse_program, print_program};

    fn lift(src: &str) -> Program {
        let out = lift_loops(&parse_program(src).unwrap()).unwrap();
        assert!(validate(&out).is_empty(), "{:?}\n{}", validate(&out), print_program(&out));
        for p in &out.procedures {
            assert!(cfg_is_acyclic(p), "{}", print_program(&out));
        }
        out
    }

    #[test]
    fn loop_free_unchanged() {
        let p = parse_program(include_str!("../../corpus/two_procs.ir")).unwrap();
        assert_eq!(lift_loops(&p).unwrap(), p);
    }

    #[test]
    fn self_loop() {
        let out = lift(
            "procedure main() { var x; L0: x := Null; goto L1; \
             L1: x := new(1); goto L1, L2; L2: return; }",
        );
        let lifted = out.procedure("main__loop_L1").unwrap();
        assert_eq!(lifted.params, ["x"]);
        assert_eq!(lifted.returns, ["x__ret"]);
        let main = out.procedure("main").unwrap();
        assert_eq!(
            main.block("L1").unwrap().stmts,
            [Stmt::Call { outs: vec!["x".into()], callee: "main__loop_L1".into(), args: vec!["x".into()] }]
        );
        assert_eq!(main.block("L1").unwrap().transfer, Transfer::Goto(vec!["L2".into()]));
    }

    #[test]
    fn nested_loops() {
        let out = lift(
            "procedure main() { var x; var y; L0: x := Null; y := Null; goto L1; \
             L1: x := new(1); goto L2; L2: y := new(2); goto L2, L3; L3: goto L1, L4; L4: return; }",
        );
        let outer = out.procedure("main__loop_L1").unwrap();
        assert!(out.procedure("main__loop_L1__loop_L2").is_some());
        assert!(outer
            .blocks
            .iter()
            .flat_map(|b| &b.stmts)
            .any(|s| matches!(s, Stmt::Call { callee, .. } if callee == "main__loop_L1__loop_L2")));
    }

    #[test]
    fn multi_exit_dispatch() {
        let out = lift(
            "procedure main() { var x; L0: x := Null; goto L1; \
             L1: x := new(1); goto L2, L3; L2: goto L1, L4; L3: return; L4: return; }",
        );
        let main = out.procedure("main").unwrap();
        assert_eq!(main.block("L1").unwrap().targets().len(), 2);
        assert!(main.locals.iter().any(|l| l.starts_with("__e")));
        let lifted = out.procedure("main__loop_L1").unwrap();
        assert_eq!(lifted.returns.len(), 3);
    }

    #[test]
    fn irreducible_rejected() {
        let p = parse_program(
            "procedure main() { L0: goto L1, L2; L1: goto L2; L2: goto L1; }",
        )
        .unwrap();
        let d = lift_loops(&p).unwrap_err();
        assert!(d[0].message.contains("irreducible"));
    }

    #[test]
    fn unreachable_cycle_dropped() {
        let out = lift("procedure main() { L0: return; L1: goto L1; }");
        assert_eq!(out.procedures.len(), 1);
        assert_eq!(out.procedures[0].blocks.len(), 1);
    }
}
