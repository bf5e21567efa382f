//! The pointer IR: programs of procedures made of basic blocks, each block a
//! straight-line list of pointer statements ending in a (possibly
//! nondeterministic) goto or a return.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::diagnostic::{Diagnostic, IrLocation};
use crate::names;

/// Allocation-site label of a `new(i)` statement. Site 0 is Null.
pub type SiteId = u32;

/// An access path: `x`, `x.f`, `x.f.g`, ...
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Path {
    pub base: String,
    pub fields: Vec<String>,
}

impl Path {
    pub fn var(base: impl Into<String>) -> Self {
        Self { base: base.into(), fields: Vec::new() }
    }

    pub fn new<I, S>(base: impl Into<String>, fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            base: base.into(),
            fields: fields.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_var(&self) -> bool {
        self.fields.is_empty()
    }

    /// `x.f.g` -> `x.f`; `None` for a bare variable.
    pub fn parent(&self) -> Option<(Path, &str)> {
        let (last, rest) = self.fields.split_last()?;
        Some((Path { base: self.base.clone(), fields: rest.to_vec() }, last.as_str()))
    }

    pub fn field(&self, f: &str) -> Path {
        let mut p = self.clone();
        p.fields.push(f.to_string());
        p
    }

    /// Every prefix from the bare base up to and including `self`.
    pub fn prefixes(&self) -> impl Iterator<Item = Path> + '_ {
        (0..=self.fields.len()).map(move |n| Path {
            base: self.base.clone(),
            fields: self.fields[..n].to_vec(),
        })
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        for field in &self.fields {
            write!(f, ".{field}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Cond {
    NonNull(Path),
    IsNull(Path),
    /// `*`: any other branch condition, either outcome possible.
    Opaque,
}

impl Cond {
    pub fn path(&self) -> Option<&Path> {
        match self {
            Cond::NonNull(p) | Cond::IsNull(p) => Some(p),
            Cond::Opaque => None,
        }
    }

    pub fn path_mut(&mut self) -> Option<&mut Path> {
        match self {
            Cond::NonNull(p) | Cond::IsNull(p) => Some(p),
            Cond::Opaque => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Stmt {
    /// `x := y` or, with a non-empty field list, the field load `x := y.f.g`.
    Assign { dst: String, src: Path },
    /// `x.f := y`
    Store { base: String, field: String, src: String },
    /// `x := new(i)`
    Alloc { dst: String, site: SiteId },
    /// `x := Null`
    AssignNull { dst: String },
    Assume(Cond),
    Assert(Cond),
    /// `a, b := call f(x, y)`
    Call { outs: Vec<String>, callee: String, args: Vec<String> },
}

impl Stmt {
    pub fn copy(dst: &str, src: &str) -> Self {
        Stmt::Assign { dst: dst.to_string(), src: Path::var(src) }
    }

    /// Variables written by this statement.
    pub fn defs(&self) -> Vec<&str> {
        match self {
            Stmt::Assign { dst, .. } | Stmt::Alloc { dst, .. } | Stmt::AssignNull { dst } => {
                vec![dst.as_str()]
            }
            Stmt::Call { outs, .. } => outs.iter().map(String::as_str).collect(),
            Stmt::Store { .. } | Stmt::Assume(_) | Stmt::Assert(_) => Vec::new(),
        }
    }

    /// Variables read by this statement.
    pub fn uses(&self) -> Vec<&str> {
        match self {
            Stmt::Assign { src, .. } => vec![src.base.as_str()],
            Stmt::Store { base, src, .. } => vec![base.as_str(), src.as_str()],
            Stmt::Alloc { .. } | Stmt::AssignNull { .. } => Vec::new(),
            Stmt::Assume(c) | Stmt::Assert(c) => c.path().map(|p| p.base.as_str()).into_iter().collect(),
            Stmt::Call { args, .. } => args.iter().map(String::as_str).collect(),
        }
    }

    /// Rename every variable occurrence (reads and writes) through `f`.
    pub fn rename_vars(&mut self, mut f: impl FnMut(&str, bool) -> String) {
        // second argument: true for a write
        match self {
            Stmt::Assign { dst, src } => {
                src.base = f(&src.base, false);
                *dst = f(dst, true);
            }
            Stmt::Store { base, src, .. } => {
                *src = f(src, false);
                *base = f(base, false);
            }
            Stmt::Alloc { dst, .. } | Stmt::AssignNull { dst } => *dst = f(dst, true),
            Stmt::Assume(c) | Stmt::Assert(c) => {
                if let Some(p) = c.path_mut() {
                    p.base = f(&p.base, false);
                }
            }
            Stmt::Call { outs, args, .. } => {
                for a in args.iter_mut() {
                    *a = f(a, false);
                }
                for o in outs.iter_mut() {
                    *o = f(o, true);
                }
            }
        }
    }

    /// Fields mentioned by this statement.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            Stmt::Assign { src, .. } => src.fields.iter().map(String::as_str).collect(),
            Stmt::Store { field, .. } => vec![field.as_str()],
            Stmt::Assume(c) | Stmt::Assert(c) => c
                .path()
                .map(|p| p.fields.iter().map(String::as_str).collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Transfer {
    /// Nondeterministic jump to one of the labels.
    Goto(Vec<String>),
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Block {
    pub label: String,
    pub stmts: Vec<Stmt>,
    pub transfer: Transfer,
}

impl Block {
    pub fn new(label: impl Into<String>, stmts: Vec<Stmt>, transfer: Transfer) -> Self {
        Self { label: label.into(), stmts, transfer }
    }

    pub fn targets(&self) -> &[String] {
        match &self.transfer {
            Transfer::Goto(ts) => ts,
            Transfer::Return => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Procedure {
    pub name: String,
    pub params: Vec<String>,
    pub returns: Vec<String>,
    pub locals: Vec<String>,
    /// The first block is the entry block.
    pub blocks: Vec<Block>,
}

impl Procedure {
    pub fn entry_block(&self) -> Option<&Block> {
        self.blocks.first()
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_index(&self) -> BTreeMap<&str, usize> {
        self.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect()
    }

    /// Params, returns and locals in declaration order.
    pub fn scope_vars(&self) -> impl Iterator<Item = &String> {
        self.params.iter().chain(&self.returns).chain(&self.locals)
    }

    pub fn declares(&self, var: &str) -> bool {
        self.scope_vars().any(|v| v == var)
    }

    pub fn cfg(&self) -> Cfg {
        Cfg::of(self)
    }
}

/// Block-level control-flow graph over block indices. Unknown labels are
/// dropped (validation reports them).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
}

impl Cfg {
    pub fn of(proc: &Procedure) -> Self {
        let index = proc.block_index();
        let n = proc.blocks.len();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for (i, b) in proc.blocks.iter().enumerate() {
            for t in b.targets() {
                if let Some(&j) = index.get(t.as_str()) {
                    if !succs[i].contains(&j) {
                        succs[i].push(j);
                        preds[j].push(i);
                    }
                }
            }
        }
        Self { succs, preds }
    }

    pub fn len(&self) -> usize {
        self.succs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succs.is_empty()
    }

    /// Blocks reachable from block 0.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        if self.is_empty() {
            return seen;
        }
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &s in &self.succs[n] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    pub fn has_cycle(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.len()];
        for root in 0..self.len() {
            if state[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root] = 1;
            while let Some(&mut (n, ref mut next)) = stack.last_mut() {
                if let Some(&s) = self.succs[n].get(*next) {
                    *next += 1;
                    match state[s] {
                        0 => {
                            state[s] = 1;
                            stack.push((s, 0));
                        }
                        1 => return true,
                        _ => {}
                    }
                } else {
                    state[n] = 2;
                    stack.pop();
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Program {
    pub globals: Vec<String>,
    pub procedures: Vec<Procedure>,
    pub entry: String,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn procedure_mut(&mut self, name: &str) -> Option<&mut Procedure> {
        self.procedures.iter_mut().find(|p| p.name == name)
    }

    pub fn is_global(&self, var: &str) -> bool {
        self.globals.iter().any(|g| g == var)
    }

    pub fn statements(&self) -> impl Iterator<Item = (&Procedure, &Block, usize, &Stmt)> {
        self.procedures.iter().flat_map(|p| {
            p.blocks
                .iter()
                .flat_map(move |b| b.stmts.iter().enumerate().map(move |(i, s)| (p, b, i, s)))
        })
    }

    pub fn max_site(&self) -> SiteId {
        self.statements()
            .filter_map(|(_, _, _, s)| match s {
                Stmt::Alloc { site, .. } => Some(*site),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Every field name mentioned anywhere, sorted.
    pub fn fields(&self) -> BTreeSet<String> {
        self.statements()
            .flat_map(|(_, _, _, s)| s.fields().into_iter().map(str::to_string).collect::<Vec<_>>())
            .collect()
    }

    /// Every variable name in use (globals and all procedure scopes).
    pub fn all_var_names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.globals.iter().cloned().collect();
        for p in &self.procedures {
            out.extend(p.scope_vars().cloned());
        }
        out
    }

    pub fn count_asserts(&self) -> usize {
        self.statements().filter(|(_, _, _, s)| matches!(s, Stmt::Assert(_))).count()
    }
}

/// True iff the block-level goto graph of `proc` has no cycle.
pub fn cfg_is_acyclic(proc: &Procedure) -> bool {
    !proc.cfg().has_cycle()
}

/// Structural well-formedness. An empty result means the program is valid.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut err = |loc: IrLocation, msg: String| diags.push(Diagnostic::error(msg).at(loc));

    let mut proc_names = BTreeSet::new();
    for p in &program.procedures {
        if !proc_names.insert(p.name.as_str()) {
            err(IrLocation::proc(&p.name), format!("duplicate procedure `{}`", p.name));
        }
    }
    if program.procedures.is_empty() {
        err(IrLocation::program(), "program has no procedures".into());
    } else if program.procedure(&program.entry).is_none() {
        err(IrLocation::program(), format!("entry procedure `{}` does not exist", program.entry));
    }

    let mut globals = BTreeSet::new();
    for g in &program.globals {
        if !globals.insert(g.as_str()) {
            err(IrLocation::program(), format!("duplicate global `{g}`"));
        }
    }

    let mut sites: BTreeMap<SiteId, usize> = BTreeMap::new();
    let mut tagged_defs: BTreeMap<String, usize> = BTreeMap::new();

    for p in &program.procedures {
        let mut scope = BTreeSet::new();
        for v in p.scope_vars() {
            if globals.contains(v.as_str()) {
                err(IrLocation::proc(&p.name), format!("variable `{v}` shadows a global"));
            } else if !scope.insert(v.as_str()) {
                err(IrLocation::proc(&p.name), format!("variable `{v}` declared twice"));
            }
        }
        let in_scope = |v: &str| scope.contains(v) || globals.contains(v);

        if p.blocks.is_empty() {
            err(IrLocation::proc(&p.name), format!("procedure `{}` has no blocks", p.name));
        }
        let mut labels = BTreeSet::new();
        for b in &p.blocks {
            if !labels.insert(b.label.as_str()) {
                err(IrLocation::block(&p.name, &b.label), format!("duplicate block label `{}`", b.label));
            }
        }

        for b in &p.blocks {
            if let Transfer::Goto(ts) = &b.transfer {
                if ts.is_empty() {
                    err(IrLocation::block(&p.name, &b.label), "goto without targets".into());
                }
                for t in ts {
                    if !labels.contains(t.as_str()) {
                        err(
                            IrLocation::block(&p.name, &b.label),
                            format!("goto target `{t}` is not a declared label"),
                        );
                    }
                }
            }
            for (i, s) in b.stmts.iter().enumerate() {
                let loc = || IrLocation::stmt(&p.name, &b.label, i);
                for v in s.uses().into_iter().chain(s.defs()) {
                    if !in_scope(v) {
                        err(loc(), format!("undeclared variable `{v}`"));
                    }
                }
                for d in s.defs() {
                    if names::is_tagged(d) {
                        *tagged_defs.entry(format!("{}::{d}", p.name)).or_default() += 1;
                    }
                }
                match s {
                    Stmt::Alloc { site, .. } => {
                        if *site == 0 {
                            err(loc(), "allocation site 0 is reserved for Null".into());
                        }
                        let seen = sites.entry(*site).or_default();
                        *seen += 1;
                        if *seen == 2 {
                            err(loc(), format!("allocation site {site} used more than once"));
                        }
                    }
                    Stmt::Call { outs, callee, args } => match program.procedure(callee) {
                        None => err(loc(), format!("call to unknown procedure `{callee}`")),
                        Some(target) => {
                            if target.params.len() != args.len() {
                                err(
                                    loc(),
                                    format!(
                                        "`{callee}` takes {} argument(s), {} given",
                                        target.params.len(),
                                        args.len()
                                    ),
                                );
                            }
                            if target.returns.len() != outs.len() {
                                err(
                                    loc(),
                                    format!(
                                        "`{callee}` returns {} value(s), {} bound",
                                        target.returns.len(),
                                        outs.len()
                                    ),
                                );
                            }
                            let distinct: BTreeSet<_> = outs.iter().collect();
                            if distinct.len() != outs.len() {
                                err(loc(), "call binds the same variable twice".into());
                            }
                        }
                    },
                    _ => {}
                }
            }
        }
    }

    for (var, n) in tagged_defs {
        if n != 1 {
            err(IrLocation::program(), format!("tagged variable `{var}` assigned {n} times"));
        }
    }
    for p in &program.procedures {
        for v in p.scope_vars().filter(|v| names::is_tagged(v)) {
            let assigned = p
                .blocks
                .iter()
                .flat_map(|b| &b.stmts)
                .any(|s| s.defs().contains(&v.as_str()));
            if !assigned {
                err(IrLocation::proc(&p.name), format!("tagged variable `{v}` is never assigned"));
            }
        }
    }
    diags
}
