use std::collections::BTreeSet;

use super::{Site, VarKey, NULL_SITE};
use crate::ir::{Path, Program, Stmt};

/// Which statement form a constraint comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Alloc,
    Null,
    Copy,
    Load,
    Store,
    /// Fields of a fresh allocation read as Null.
    FieldInit,
    /// Argument and result passing.
    Call,
}

impl Rule {
    pub const ALL: [Rule; 7] =
        [Rule::Alloc, Rule::Null, Rule::Copy, Rule::Load, Rule::Store, Rule::FieldInit, Rule::Call];
}

/// Constraints over interned variables (indices into `ConstraintSet::vars`)
/// and fields (indices into `ConstraintSet::fields`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `site ∈ pt(dst)`
    Base { dst: usize, site: Site },
    /// `pt(src) ⊆ pt(dst)`
    Copy { dst: usize, src: usize },
    /// `pt(aS_i.field) ⊆ pt(dst)` for each non-null `aS_i ∈ pt(src)`
    Load { dst: usize, src: usize, field: usize },
    /// `pt(src) ⊆ pt(aS_i.field)` for each non-null `aS_i ∈ pt(base)`
    Store { base: usize, field: usize, src: usize },
    /// `aS_0 ∈ pt(aS_site.f)` for every field `f`
    FieldInit { site: Site },
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub vars: Vec<VarKey>,
    pub tagged: Vec<bool>,
    pub fields: Vec<String>,
    pub constraints: Vec<Constraint>,
}

struct Builder<'a> {
    set: ConstraintSet,
    index: std::collections::HashMap<VarKey, usize>,
    field_index: std::collections::HashMap<String, usize>,
    disabled: &'a BTreeSet<Rule>,
    temps: usize,
}

impl Builder<'_> {
    fn var(&mut self, key: VarKey) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.set.vars.len();
        self.set.tagged.push(key.is_tagged());
        self.set.vars.push(key.clone());
        self.index.insert(key, i);
        i
    }

    fn field(&mut self, f: &str) -> usize {
        if let Some(&i) = self.field_index.get(f) {
            return i;
        }
        let i = self.set.fields.len();
        self.set.fields.push(f.to_string());
        self.field_index.insert(f.to_string(), i);
        i
    }

    fn temp(&mut self, proc: &str) -> usize {
        self.temps += 1;
        let key = VarKey::local(proc, &format!("%t{}", self.temps));
        self.var(key)
    }

    fn push(&mut self, rule: Rule, c: Constraint) {
        if !self.disabled.contains(&rule) {
            self.set.constraints.push(c);
        }
    }

    /// Load `src` into `dst`, chaining through temporaries.
    fn load_path(&mut self, proc: &str, dst: usize, src: &Path, key: &dyn Fn(&str) -> VarKey) {
        let mut cur = self.var(key(&src.base));
        if src.fields.is_empty() {
            self.push(Rule::Copy, Constraint::Copy { dst, src: cur });
            return;
        }
        let last = src.fields.len() - 1;
        for (i, f) in src.fields.iter().enumerate() {
            let field = self.field(f);
            let target = if i == last { dst } else { self.temp(proc) };
            self.push(Rule::Load, Constraint::Load { dst: target, src: cur, field });
            cur = target;
        }
    }
}

/// Fig. 2 constraints for every statement, plus argument/result copies for
/// calls and Null-initialised fields for allocations.
pub fn generate_constraints(program: &Program) -> ConstraintSet {
    generate_constraints_without(program, &BTreeSet::new())
}

/// As [`generate_constraints`], omitting every constraint produced by a
/// rule in `disabled`.
pub fn generate_constraints_without(program: &Program, disabled: &BTreeSet<Rule>) -> ConstraintSet {
    let mut b = Builder {
        set: ConstraintSet::default(),
        index: Default::default(),
        field_index: Default::default(),
        disabled,
        temps: 0,
    };
    for f in program.fields() {
        b.field(&f);
    }
    for g in &program.globals {
        b.var(VarKey::global(g));
    }
    for proc in &program.procedures {
        let pname = proc.name.as_str();
        let key = |v: &str| {
            if program.is_global(v) {
                VarKey::global(v)
            } else {
                VarKey::local(pname, v)
            }
        };
        for v in proc.scope_vars() {
            b.var(key(v));
        }
        for block in &proc.blocks {
            for stmt in &block.stmts {
                match stmt {
                    Stmt::Alloc { dst, site } => {
                        let dst = b.var(key(dst));
                        b.push(Rule::Alloc, Constraint::Base { dst, site: *site });
                        b.push(Rule::FieldInit, Constraint::FieldInit { site: *site });
                    }
                    Stmt::AssignNull { dst } => {
                        let dst = b.var(key(dst));
                        b.push(Rule::Null, Constraint::Base { dst, site: NULL_SITE });
                    }
                    Stmt::Assign { dst, src } => {
                        let dst = b.var(key(dst));
                        b.load_path(pname, dst, src, &key);
                    }
                    Stmt::Store { base, field, src } => {
                        let base = b.var(key(base));
                        let src = b.var(key(src));
                        let field = b.field(field);
                        b.push(Rule::Store, Constraint::Store { base, field, src });
                    }
                    Stmt::Call { outs, callee, args } => {
                        let Some(target) = program.procedure(callee) else { continue };
                        let ckey = |v: &str| {
                            if program.is_global(v) {
                                VarKey::global(v)
                            } else {
                                VarKey::local(callee, v)
                            }
                        };
                        for (formal, actual) in target.params.iter().zip(args) {
                            let dst = b.var(ckey(formal));
                            let src = b.var(key(actual));
                            b.push(Rule::Call, Constraint::Copy { dst, src });
                        }
                        for (ret, out) in target.returns.iter().zip(outs) {
                            let dst = b.var(key(out));
                            let src = b.var(ckey(ret));
                            b.push(Rule::Call, Constraint::Copy { dst, src });
                        }
                    }
                    Stmt::Assume(_) | Stmt::Assert(_) => {}
                }
            }
        }
    }
    b.set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;

    #[test]
    fn statement_forms() {
        let p = parse_program(
            "procedure main() { var x; var y; var z; L1: x := new(1); y := Null; z := x.f.g; x.f := y; return; }",
        )
        .unwrap();
        let set = generate_constraints(&p);
        let base: Vec<_> = set
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Base { dst, site } => Some((set.vars[*dst].name.clone(), *site)),
                _ => None,
            })
            .collect();
        assert_eq!(base, [("x".to_string(), 1), ("y".to_string(), 0)]);
        let loads = set.constraints.iter().filter(|c| matches!(c, Constraint::Load { .. })).count();
        assert_eq!(loads, 2);
        assert!(set.vars.iter().any(|v| v.name.starts_with('%')));
    }

    #[test]
    fn call_copies() {
        let p = parse_program(include_str!("../../corpus/two_procs.ir")).unwrap();
        let set = generate_constraints(&p);
        let copies: Vec<(String, String)> = set
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Copy { dst, src } => Some((set.vars[*dst].to_string(), set.vars[*src].to_string())),
                _ => None,
            })
            .collect();
        assert!(copies.contains(&("f::y".into(), "main::a".into())));
        assert!(copies.contains(&("main::b".into(), "f::u".into())));
    }

    #[test]
    fn disabled_rule_dropped() {
        let p = parse_program("procedure main() { var x; L1: x := new(1); return; }").unwrap();
        let set = generate_constraints_without(&p, &BTreeSet::from([Rule::Alloc]));
        assert!(set.constraints.iter().all(|c| !matches!(c, Constraint::Base { .. })));
    }
}
