//! Null-aware global value numbering.
//!
//! Every `assume`/`assert (e != Null)` is followed by a fresh tagged
//! temporary `gvnTmp__gvnN := e`. Blocks are then visited in topological
//! order, assigning terms to expressions; an expression whose term is known
//! to be non-null is replaced by the tagged temporary holding that term.
//!
//! Where the block-entry state is the intersection of the predecessors'
//! states, a non-null term is kept only if the block can name it: either a
//! tagged variable carrying the term in every predecessor, or an expression
//! that hashes to the term at block entry, which is then copied into a new
//! temporary at the top of the block.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::diagnostic::{Diagnostic, IrLocation};
use crate::ir::{Block, Cond, Path, Procedure, Program, Stmt};
use crate::names::{self, NameSupply};
use crate::normalize::topo_indices;

pub type Term = u32;

/// One expression occurrence and the term GVN gave it. `after` occurrences
/// name the variable a statement defines and hold once it has executed;
/// the others hold just before it executes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TermOccurrence {
    pub proc: String,
    pub block: String,
    pub index: usize,
    pub after: bool,
    pub expr: Path,
    pub term: Term,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TermLog {
    pub occurrences: Vec<TermOccurrence>,
}

#[derive(Debug, Clone)]
pub struct GvnOutput {
    pub program: Program,
    pub log: TermLog,
}

/// Per-procedure state of the value-numbering pass.
#[derive(Debug, Clone, Default)]
pub struct GvnState {
    pub non_null: BTreeMap<String, BTreeSet<Term>>,
    pub var2expr: BTreeMap<String, Path>,
    pub default_var: BTreeMap<String, BTreeMap<Term, String>>,
    pub hash_value: BTreeMap<String, BTreeMap<String, Term>>,
    pub hash_function: BTreeMap<String, BTreeMap<Term, Term>>,
    pub curr_block: String,
    last_term: Term,
    recorded: Vec<(Path, Term)>,
}

impl GvnState {
    /// Fresh state whose first allocated term is `first_term`.
    pub fn new(first_term: Term) -> Self {
        Self { last_term: first_term.saturating_sub(1), ..Self::default() }
    }

    pub fn new_term(&mut self) -> Term {
        self.last_term += 1;
        self.last_term
    }

    pub fn last_term(&self) -> Term {
        self.last_term
    }

    /// Make `label` current with empty facts.
    pub fn enter_block(&mut self, label: &str) {
        self.curr_block = label.to_string();
        self.non_null.entry(label.to_string()).or_default();
        self.hash_value.entry(label.to_string()).or_default();
        self.default_var.entry(label.to_string()).or_default();
    }

    fn values(&mut self) -> &mut BTreeMap<String, Term> {
        self.hash_value.entry(self.curr_block.clone()).or_default()
    }

    pub fn compute_hash(&mut self, expr: &Path) -> Term {
        let term = match expr.parent() {
            None => match self.values().get(&expr.base) {
                Some(&t) => t,
                None => {
                    let t = self.new_term();
                    self.values().insert(expr.base.clone(), t);
                    t
                }
            },
            Some((parent, field)) => {
                let pt = self.compute_hash(&parent);
                match self.hash_function.get(field).and_then(|m| m.get(&pt)) {
                    Some(&t) => t,
                    None => {
                        let t = self.new_term();
                        self.hash_function.entry(field.to_string()).or_default().insert(pt, t);
                        t
                    }
                }
            }
        };
        self.recorded.push((expr.clone(), term));
        term
    }

    /// Term of `expr` if it already has one, without allocating.
    pub fn peek_hash(&self, expr: &Path) -> Option<Term> {
        match expr.parent() {
            None => self.hash_value.get(&self.curr_block)?.get(&expr.base).copied(),
            Some((parent, field)) => {
                let pt = self.peek_hash(&parent)?;
                self.hash_function.get(field)?.get(&pt).copied()
            }
        }
    }

    fn default_for(&self, term: Term) -> Option<&String> {
        if !self.non_null.get(&self.curr_block)?.contains(&term) {
            return None;
        }
        self.default_var.get(&self.curr_block)?.get(&term)
    }

    pub fn get_expr(&mut self, expr: &Path) -> Path {
        let term = self.compute_hash(expr);
        if let Some(v) = self.default_for(term) {
            return Path::var(v.clone());
        }
        match expr.parent() {
            Some((parent, field)) => self.get_expr(&parent).field(field),
            None => expr.clone(),
        }
    }

    fn rewrite_var(&mut self, var: &str) -> String {
        self.get_expr(&Path::var(var)).base
    }

    fn rewrite_cond(&mut self, cond: &Cond) -> Cond {
        match cond {
            Cond::NonNull(p) => Cond::NonNull(self.get_expr(p)),
            Cond::IsNull(p) => Cond::IsNull(self.get_expr(p)),
            Cond::Opaque => Cond::Opaque,
        }
    }

    /// Rewrite one statement and update the state. Returns the rewritten
    /// statement and the term given to the variable it defines, if any.
    pub fn process_stmt(&mut self, stmt: &Stmt, globals: &[String]) -> (Stmt, Option<Term>) {
        match stmt {
            Stmt::Assume(c) => (Stmt::Assume(self.rewrite_cond(c)), None),
            Stmt::Assert(c) => (Stmt::Assert(self.rewrite_cond(c)), None),
            Stmt::Assign { dst, src } => {
                let term = self.compute_hash(src);
                let src = self.get_expr(src);
                self.values().insert(dst.clone(), term);
                (Stmt::Assign { dst: dst.clone(), src }, Some(term))
            }
            Stmt::Alloc { dst, .. } | Stmt::AssignNull { dst } => {
                let term = self.new_term();
                self.values().insert(dst.clone(), term);
                (stmt.clone(), Some(term))
            }
            Stmt::Store { base, field, src } => {
                let src = self.rewrite_var(src);
                let base = self.rewrite_var(base);
                self.hash_function.remove(field);
                (Stmt::Store { base, field: field.clone(), src }, None)
            }
            Stmt::Call { outs, callee, args } => {
                let args = args.iter().map(|a| self.rewrite_var(a)).collect();
                self.hash_function.clear();
                let values = self.values();
                for v in outs.iter().chain(globals) {
                    values.remove(v);
                }
                (Stmt::Call { outs: outs.clone(), callee: callee.clone(), args }, None)
            }
        }
    }

    fn take_recorded(&mut self) -> Vec<(Path, Term)> {
        std::mem::take(&mut self.recorded)
    }
}

/// Tagged temporaries inserted after each non-null `assume`/`assert`, keyed
/// by procedure.
type Harvest = BTreeMap<String, BTreeMap<String, Path>>;

fn harvest(program: &Program, supply: &mut NameSupply) -> (Program, Harvest) {
    let mut out = program.clone();
    let mut facts = Harvest::new();
    for proc in &mut out.procedures {
        let entry = facts.entry(proc.name.clone()).or_default();
        for block in &mut proc.blocks {
            let mut stmts = Vec::with_capacity(block.stmts.len());
            for s in block.stmts.drain(..) {
                let fact = match &s {
                    Stmt::Assume(Cond::NonNull(e)) | Stmt::Assert(Cond::NonNull(e)) => Some(e.clone()),
                    _ => None,
                };
                stmts.push(s);
                if let Some(e) = fact {
                    let tmp = supply.fresh_numbered(&format!("{}__gvn", names::TAG_PREFIX), 1);
                    stmts.push(Stmt::Assign { dst: tmp.clone(), src: e.clone() });
                    proc.locals.push(tmp.clone());
                    entry.insert(tmp, e);
                }
            }
            block.stmts = stmts;
        }
    }
    (out, facts)
}

fn tag_supply(program: &Program) -> NameSupply {
    NameSupply::new(program.all_var_names())
}

/// First pass only: insert `gvnTmp__gvnN := e` after every
/// `assume`/`assert (e != Null)`.
pub fn insert_tagged_assignments(program: &Program) -> Program {
    harvest(program, &mut tag_supply(program)).0
}

/// Full transformation. Requires acyclic procedures.
pub fn do_gvn(program: &Program) -> Result<GvnOutput, Diagnostic> {
    let mut supply = tag_supply(program);
    let (mut out, facts) = harvest(program, &mut supply);
    let mut next_term: Term = 1;
    let mut log = TermLog::default();
    let globals = program.globals.clone();
    for proc in &mut out.procedures {
        let harvested = facts.get(&proc.name).cloned().unwrap_or_default();
        next_term = gvn_procedure(proc, harvested, &globals, &mut supply, next_term, &mut log)?;
    }
    renumber_tags(&mut out, &mut log, program);
    Ok(GvnOutput { program: out, log })
}

fn gvn_procedure(
    proc: &mut Procedure,
    harvested: BTreeMap<String, Path>,
    globals: &[String],
    supply: &mut NameSupply,
    first_term: Term,
    log: &mut TermLog,
) -> Result<Term, Diagnostic> {
    let cfg = proc.cfg();
    let order = topo_indices(&cfg).ok_or_else(|| {
        Diagnostic::error(format!("GVN requires acyclic control flow in `{}`", proc.name))
            .at(IrLocation::proc(&proc.name))
    })?;
    let mut rank = vec![0; order.len()];
    for (i, &b) in order.iter().enumerate() {
        rank[b] = i;
    }
    let mut state = GvnState::new(first_term);
    state.var2expr = harvested.clone();
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    let mut prepended: Vec<String> = Vec::new();
    let mut new_blocks: Vec<Option<Block>> = vec![None; proc.blocks.len()];

    for &b in &order {
        let label = proc.blocks[b].label.clone();
        let mut preds: Vec<usize> = cfg.preds[b].clone();
        preds.sort_by_key(|&p| rank[p]);
        let mut out_stmts: Vec<Stmt> = Vec::new();
        let mut occurrences: Vec<TermOccurrence> = Vec::new();
        let record = |occ: &mut Vec<TermOccurrence>, index: usize, after: bool, recs: Vec<(Path, Term)>| {
            let mut seen = BTreeSet::new();
            for (expr, term) in recs {
                if seen.insert((expr.clone(), term)) {
                    occ.push(TermOccurrence {
                        proc: proc.name.clone(),
                        block: label.clone(),
                        index,
                        after,
                        expr,
                        term,
                    });
                }
            }
        };

        state.enter_block(&label);
        if !preds.is_empty() {
            let plabels: Vec<String> = preds.iter().map(|&p| proc.blocks[p].label.clone()).collect();
            let mut nn = state.non_null[&plabels[0]].clone();
            let mut hv = state.hash_value[&plabels[0]].clone();
            for p in &plabels[1..] {
                nn = nn.intersection(&state.non_null[p]).copied().collect();
                let other = &state.hash_value[p];
                hv.retain(|v, t| other.get(v) == Some(t));
            }
            state.hash_value.insert(label.clone(), hv.clone());
            let mut kept = BTreeSet::new();
            let mut defaults = BTreeMap::new();
            for &t in &nn {
                let tagged = hv.iter().find(|(v, &tv)| tv == t && names::is_tagged(v)).map(|(v, _)| v.clone());
                if let Some(v) = tagged {
                    kept.insert(t);
                    defaults.insert(t, v);
                    continue;
                }
                let mut expr = None;
                for p in &plabels {
                    let Some(e) = state.default_var[p].get(&t).and_then(|v| state.var2expr.get(v)) else {
                        continue;
                    };
                    if state.peek_hash(e) == Some(t) {
                        expr = Some(e.clone());
                        break;
                    }
                }
                if expr.is_none() {
                    expr = hv.iter().find(|(_, &tv)| tv == t).map(|(v, _)| Path::var(v.clone()));
                }
                let Some(e) = expr else { continue };
                let tmp = supply.fresh_numbered(&format!("{}__gvn", names::TAG_PREFIX), 1);
                let pre: Vec<(Path, Term)> =
                    e.prefixes().filter_map(|q| state.peek_hash(&q).map(|qt| (q, qt))).collect();
                record(&mut occurrences, out_stmts.len(), false, pre);
                record(&mut occurrences, out_stmts.len(), true, vec![(Path::var(tmp.clone()), t)]);
                out_stmts.push(Stmt::Assign { dst: tmp.clone(), src: e.clone() });
                state.var2expr.insert(tmp.clone(), e);
                state.hash_value.get_mut(&label).expect("entered").insert(tmp.clone(), t);
                prepended.push(tmp.clone());
                kept.insert(t);
                defaults.insert(t, tmp);
            }
            state.non_null.insert(label.clone(), kept);
            state.default_var.insert(label.clone(), defaults);
        }

        for stmt in &proc.blocks[b].stmts {
            let harvest_of = match stmt {
                Stmt::Assign { dst, src } if harvested.get(dst) == Some(src) => Some(dst.clone()),
                _ => None,
            };
            let (new, term) = state.process_stmt(stmt, globals);
            let recs = state.take_recorded();
            if let Some(tmp) = harvest_of {
                let redundant = matches!(&new, Stmt::Assign { src, .. } if src.is_var() && names::is_tagged(&src.base));
                if redundant {
                    state.hash_value.get_mut(&label).expect("entered").remove(&tmp);
                    dropped.insert(tmp);
                    continue;
                }
                let t = term.expect("assignment has a term");
                state.non_null.get_mut(&label).expect("entered").insert(t);
                state.default_var.get_mut(&label).expect("entered").insert(t, tmp);
            }
            let index = out_stmts.len();
            record(&mut occurrences, index, false, recs);
            if let Some(t) = term {
                for d in new.defs() {
                    record(&mut occurrences, index, true, vec![(Path::var(d.to_string()), t)]);
                }
            }
            out_stmts.push(new);
        }
        log.occurrences.extend(occurrences);
        let old = &proc.blocks[b];
        new_blocks[b] = Some(Block::new(old.label.clone(), out_stmts, old.transfer.clone()));
    }

    proc.blocks = new_blocks.into_iter().map(|b| b.expect("every block visited")).collect();
    proc.locals.retain(|l| !dropped.contains(l));
    proc.locals.extend(prepended);
    Ok(state.last_term() + 1)
}

/// Rename the temporaries introduced by this pass to `gvnTmp__gvn1`, `..2`,
/// ... in order of first appearance.
fn renumber_tags(program: &mut Program, log: &mut TermLog, original: &Program) {
    let existing = original.all_var_names();
    let introduced: BTreeSet<String> = program
        .procedures
        .iter()
        .flat_map(|p| p.locals.iter())
        .filter(|l| names::is_tagged(l) && !existing.contains(*l))
        .cloned()
        .collect();
    let mut order: Vec<String> = Vec::new();
    for proc in &program.procedures {
        for block in &proc.blocks {
            for s in &block.stmts {
                for d in s.defs() {
                    if introduced.contains(d) && !order.iter().any(|o| o == d) {
                        order.push(d.to_string());
                    }
                }
            }
        }
    }
    let mut supply = NameSupply::new(existing);
    let map: BTreeMap<String, String> = order
        .into_iter()
        .map(|old| {
            let new = supply.fresh_numbered(&format!("{}__gvn", names::TAG_PREFIX), 1);
            (old, new)
        })
        .collect();
    let rename = |v: &str| map.get(v).cloned().unwrap_or_else(|| v.to_string());
    for proc in &mut program.procedures {
        for block in &mut proc.blocks {
            for s in &mut block.stmts {
                s.rename_vars(|v, _| rename(v));
            }
        }
        for l in &mut proc.locals {
            *l = rename(l);
        }
    }
    for occ in &mut log.occurrences {
        occ.expr.base = rename(&occ.expr.base);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, parse_transformed, print_program, print_stmt};

    fn gvn(src: &str) -> Program {
        let out = do_gvn(&parse_program(src).unwrap()).unwrap().program;
        assert!(crate::ir::validate(&out).is_empty(), "{}", print_program(&out));
        out
    }

    fn block_text(p: &Program, proc: &str, block: &str) -> Vec<String> {
        p.procedure(proc).unwrap().block(block).unwrap().stmts.iter().map(print_stmt).collect()
    }

    #[test]
    fn hash_chain_terms() {
        let mut s = GvnState::new(1);
        s.enter_block("L1");
        let (_, t) = s.process_stmt(
            &Stmt::Assign { dst: "y".into(), src: Path::new("x", ["f", "g"]) },
            &[],
        );
        assert_eq!(s.peek_hash(&Path::var("x")), Some(1));
        assert_eq!(s.peek_hash(&Path::new("x", ["f"])), Some(2));
        assert_eq!(s.peek_hash(&Path::new("x", ["f", "g"])), Some(3));
        assert_eq!(t, Some(3));
        assert_eq!(s.hash_value["L1"]["y"], 3);
        assert_eq!(s.compute_hash(&Path::var("x")), 1);
    }

    #[test]
    fn field_removal_gives_new_term() {
        let mut s = GvnState::new(1);
        s.enter_block("L1");
        let before = s.compute_hash(&Path::new("x", ["f"]));
        s.process_stmt(&Stmt::Store { base: "y".into(), field: "f".into(), src: "z".into() }, &[]);
        assert_ne!(s.compute_hash(&Path::new("x", ["f"])), before);
    }

    #[test]
    fn self_copy_keeps_term() {
        let mut s = GvnState::new(1);
        s.enter_block("L1");
        let t = s.compute_hash(&Path::var("x"));
        s.process_stmt(&Stmt::copy("x", "x"), &[]);
        assert_eq!(s.hash_value["L1"]["x"], t);
    }

    #[test]
    fn six_line_listing() {
        let out = gvn(include_str!("../corpus/equal_paths.ir"));
        let expected = parse_transformed(include_str!("../corpus/expected/equal_paths_result.ir")).unwrap();
        assert_eq!(print_program(&out), print_program(&expected));
    }

    #[test]
    fn harvest_inserts_after_assume() {
        let p = parse_program(include_str!("../corpus/equal_paths.ir")).unwrap();
        let h = insert_tagged_assignments(&p);
        let stmts = block_text(&h, "gvn", "L1");
        assert_eq!(stmts[2], "assume (z != Null);");
        assert_eq!(stmts[3], "gvnTmp__gvn1 := z;");
        assert_eq!(stmts[7], "gvnTmp__gvn2 := b;");
    }

    #[test]
    fn merge_prepends_fresh_temporary() {
        let out = gvn(include_str!("../corpus/merge_assert.ir"));
        assert_eq!(block_text(&out, "merge", "L1"), ["assume (x != Null);", "gvnTmp__gvn1 := x;"]);
        assert_eq!(block_text(&out, "merge", "L2"), ["assume (x != Null);", "gvnTmp__gvn2 := x;"]);
        assert_eq!(
            block_text(&out, "merge", "L3"),
            ["gvnTmp__gvn3 := x;", "assert (gvnTmp__gvn3 != Null);"]
        );
    }

    #[test]
    fn asymmetric_merge_no_substitution() {
        let out = gvn(
            "procedure main(p) { var x; L0: x := p.f; goto L1, L2; L1: assume (x != Null); goto L3; \
             L2: goto L3; L3: assert (x != Null); return; }",
        );
        assert_eq!(block_text(&out, "main", "L3"), ["assert (x != Null);", "gvnTmp__gvn2 := x;"]);
    }

    #[test]
    fn field_kill_blocks_substitution() {
        let out = gvn(include_str!("../corpus/field_kill.ir"));
        assert_eq!(
            block_text(&out, "fk", "L1"),
            ["assume (x.f != Null);", "gvnTmp__gvn1 := x.f;", "y.f := z;", "z := x.f;"]
        );
    }

    #[test]
    fn cse_listing() {
        let out = gvn(include_str!("../corpus/redundant_load.ir"));
        assert_eq!(
            block_text(&out, "cse", "L1"),
            [
                "assume (x != Null);",
                "gvnTmp__gvn1 := x;",
                "y := gvnTmp__gvn1;",
                "assert (gvnTmp__gvn1 != Null);",
                "z := gvnTmp__gvn1.f;"
            ]
        );
    }

    #[test]
    fn no_facts_identity() {
        let p = parse_program("procedure main() { var x; L1: x := new(1); assert *; return; }").unwrap();
        assert_eq!(do_gvn(&p).unwrap().program, p);
    }

    #[test]
    fn call_kills_heap_terms() {
        let out = gvn(
            "procedure h() { L1: return; } procedure main(x) { var a; var b; \
             L1: assume (x.f != Null); call h(); a := x.f; return; }",
        );
        assert_eq!(block_text(&out, "main", "L1")[3], "a := x.f;");
    }

    #[test]
    fn store_base_rewritten() {
        let out = gvn("procedure main(x, y) { L1: assume (x != Null); x.f := y; return; }");
        assert_eq!(block_text(&out, "main", "L1")[2], "gvnTmp__gvn1.f := y;");
    }

    #[test]
    fn existing_tag_names_avoided() {
        let p = parse_transformed(
            "procedure main(x) { var gvnTmp__gvn1; L1: gvnTmp__gvn1 := x; assume (x != Null); return; }",
        )
        .unwrap();
        let out = do_gvn(&p).unwrap().program;
        assert!(print_program(&out).contains("gvnTmp__gvn2 := x;"));
    }

    #[test]
    fn log_records_shared_terms() {
        let out = do_gvn(&parse_program(include_str!("../corpus/equal_paths.ir")).unwrap()).unwrap();
        let z_term = out
            .log
            .occurrences
            .iter()
            .find(|o| o.expr == Path::var("z") && o.after)
            .unwrap()
            .term;
        assert!(out.log.occurrences.iter().any(|o| o.expr == Path::new("a", ["g", "h"]) && o.term == z_term));
    }
}
