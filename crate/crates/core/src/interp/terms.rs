use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::engine::{self, eval, CPath, Compiled, Hooks, State, Value};
use super::{InterpError, Limits, ValueSummary};
use crate::gvn::{Term, TermLog};
use crate::ir::Program;

/// Two occurrences of one term evaluated to different values within the
/// same procedure activation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TermViolation {
    pub proc: String,
    pub block: String,
    pub index: usize,
    pub expr: String,
    pub term: Term,
    pub expected: ValueSummary,
    pub found: ValueSummary,
}

struct Occ {
    path: CPath,
    text: String,
    term: Term,
}

type Key = (usize, usize, usize);

struct TermChecker {
    before: HashMap<Key, Vec<Occ>>,
    after: HashMap<Key, Vec<Occ>>,
    found: BTreeSet<TermViolation>,
    unresolved: usize,
}

impl TermChecker {
    fn check(&mut self, c: &Compiled, s: &mut State, block: usize, index: usize, after: bool) {
        let proc = s.frame().proc;
        let table = if after { &self.after } else { &self.before };
        let Some(occs) = table.get(&(proc, block, index)) else { return };
        for occ in occs {
            let v = match eval(s, &occ.path) {
                Ok(Value::Undef) | Err(_) => continue,
                Ok(v) => v,
            };
            let frame = s.frames.last_mut().expect("frame");
            let prev = *frame.terms.entry(occ.term).or_insert(v);
            if prev != v {
                let p = &c.procs[proc];
                let label = p.block_index.iter().find(|(_, &i)| i == block).map(|(l, _)| l.clone());
                self.found.insert(TermViolation {
                    proc: p.name.clone(),
                    block: label.unwrap_or_default(),
                    index,
                    expr: occ.text.clone(),
                    term: occ.term,
                    expected: s.summary(prev),
                    found: s.summary(v),
                });
            }
        }
    }
}

impl Hooks for TermChecker {
    fn before_stmt(&mut self, c: &Compiled, s: &mut State, block: usize, index: usize) {
        self.check(c, s, block, index, false);
    }

    fn after_stmt(&mut self, c: &Compiled, s: &mut State, block: usize, index: usize) {
        self.check(c, s, block, index, true);
    }
}

/// Check that every pair of same-term occurrences in `log` evaluates to
/// the same value on every bounded path through `program`.
pub fn check_term_soundness(
    program: &Program,
    log: &TermLog,
    limits: Limits,
) -> Result<Vec<TermViolation>, InterpError> {
    let c = Compiled::new(program);
    let mut checker = TermChecker {
        before: HashMap::new(),
        after: HashMap::new(),
        found: BTreeSet::new(),
        unresolved: 0,
    };
    for o in &log.occurrences {
        let resolved = c.proc_index.get(&o.proc).and_then(|&p| {
            let b = *c.procs[p].block_index.get(&o.block)?;
            Some((p, b, c.path(p, &o.expr)?))
        });
        let Some((p, b, path)) = resolved else {
            checker.unresolved += 1;
            continue;
        };
        let table = if o.after { &mut checker.after } else { &mut checker.before };
        table.entry((p, b, o.index)).or_default().push(Occ { path, text: o.expr.to_string(), term: o.term });
    }
    assert_eq!(checker.unresolved, 0, "term log does not match program");
    engine::run(&c, limits, &mut checker)?;
    Ok(checker.found.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gvn::{do_gvn, TermOccurrence};
    use crate::ir::Path;
    use crate::normalize::to_ssa;
    use crate::parse::parse_program;

    #[test]
    fn gvn_terms_hold_on_listing() {
        let p = to_ssa(&parse_program(include_str!("../../corpus/equal_paths.ir")).unwrap()).unwrap();
        let out = do_gvn(&p).unwrap();
        assert!(!out.log.occurrences.is_empty());
        assert_eq!(check_term_soundness(&out.program, &out.log, Limits::depth(64)).unwrap(), vec![]);
    }

    #[test]
    fn bogus_term_is_caught() {
        let p = parse_program("procedure main() { var x; var y; L1: x := new(1); y := new(2); return; }").unwrap();
        let occ = |index, var: &str| TermOccurrence {
            proc: "main".into(),
            block: "L1".into(),
            index,
            after: true,
            expr: Path::var(var),
            term: 7,
        };
        let log = TermLog { occurrences: vec![occ(0, "x"), occ(1, "y")] };
        let v = check_term_soundness(&p, &log, Limits::depth(8)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].expr, "y");
    }
}
