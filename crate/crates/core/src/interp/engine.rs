use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Event, EventLoc, InterpError, Limits, Trace, ValueSummary};
use crate::ir::{Cond, Path, Program, Stmt, Transfer};
use crate::names;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum VarRef {
    Local(usize),
    Global(usize),
}

#[derive(Debug, Clone)]
pub(super) struct CPath {
    pub base: VarRef,
    pub fields: Vec<usize>,
}

#[derive(Debug, Clone)]
enum CCond {
    NonNull(CPath),
    IsNull(CPath),
    Opaque,
}

#[derive(Debug, Clone)]
enum CStmtKind {
    Assign { dst: VarRef, src: CPath },
    Store { base: VarRef, field: usize, src: VarRef },
    Alloc { dst: VarRef, site: u32 },
    Null { dst: VarRef },
    Assume(CCond),
    Assert(CCond),
    Call { outs: Vec<VarRef>, callee: usize, args: Vec<VarRef> },
}

#[derive(Debug, Clone)]
struct CStmt {
    kind: CStmtKind,
    synthetic: bool,
    ordinal: usize,
}

#[derive(Debug, Clone)]
struct CBlock {
    label: String,
    stmts: Vec<CStmt>,
    /// `None` for `return`.
    targets: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub(super) struct CProc {
    pub name: String,
    projected_name: String,
    shares_frame: bool,
    pub slot_names: Vec<String>,
    slot_proj: Vec<Option<usize>>,
    params: Vec<usize>,
    returns: Vec<usize>,
    blocks: Vec<CBlock>,
    pub block_index: HashMap<String, usize>,
}

/// Program lowered to slot indices.
#[derive(Debug, Clone)]
pub(super) struct Compiled {
    pub procs: Vec<CProc>,
    pub proc_index: HashMap<String, usize>,
    entry: usize,
    pub globals: Vec<String>,
    pub fields: Vec<String>,
    field_index: HashMap<String, usize>,
    proj_names: Vec<String>,
    nsites: usize,
    /// Synthetic steps allowed per unit of budget between two source
    /// statements; catches loops that never execute one.
    idle_per_depth: u64,
}

impl Compiled {
    pub fn new(program: &Program) -> Self {
        let fields: Vec<String> = program.fields().into_iter().collect();
        let field_index: HashMap<String, usize> =
            fields.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        let globals = program.globals.clone();
        let global_index: HashMap<&str, usize> =
            globals.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        let proc_index: HashMap<String, usize> =
            program.procedures.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        let mut proj_ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut proj_names = Vec::new();
        let mut stmt_count = 0usize;

        let mut procs = Vec::new();
        for p in &program.procedures {
            let slot_names: Vec<String> = p.scope_vars().cloned().collect();
            let slots: HashMap<&str, usize> =
                slot_names.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
            let slot_proj = slot_names
                .iter()
                .map(|v| {
                    names::projected(v).map(|base| {
                        *proj_ids.entry(base.to_string()).or_insert_with(|| {
                            proj_names.push(base.to_string());
                            proj_names.len() - 1
                        })
                    })
                })
                .collect();
            let var = |v: &str| match global_index.get(v) {
                Some(&g) => VarRef::Global(g),
                None => VarRef::Local(slots[v]),
            };
            let path = |p: &Path| CPath {
                base: var(&p.base),
                fields: p.fields.iter().map(|f| field_index[f]).collect(),
            };
            let cond = |c: &Cond| match c {
                Cond::NonNull(p) => CCond::NonNull(path(p)),
                Cond::IsNull(p) => CCond::IsNull(path(p)),
                Cond::Opaque => CCond::Opaque,
            };
            let label_index: HashMap<&str, usize> =
                p.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
            let mut blocks = Vec::new();
            for b in &p.blocks {
                let mut ordinal = 0;
                let mut stmts = Vec::new();
                for s in &b.stmts {
                    stmt_count += 1;
                    let synthetic = is_synthetic(s);
                    let kind = match s {
                        Stmt::Assign { dst, src } => CStmtKind::Assign { dst: var(dst), src: path(src) },
                        Stmt::Store { base, field, src } => {
                            CStmtKind::Store { base: var(base), field: field_index[field], src: var(src) }
                        }
                        Stmt::Alloc { dst, site } => CStmtKind::Alloc { dst: var(dst), site: *site },
                        Stmt::AssignNull { dst } => CStmtKind::Null { dst: var(dst) },
                        Stmt::Assume(c) => CStmtKind::Assume(cond(c)),
                        Stmt::Assert(c) => CStmtKind::Assert(cond(c)),
                        Stmt::Call { outs, callee, args } => CStmtKind::Call {
                            outs: outs.iter().map(|o| var(o)).collect(),
                            callee: proc_index[callee],
                            args: args.iter().map(|a| var(a)).collect(),
                        },
                    };
                    stmts.push(CStmt { kind, synthetic, ordinal });
                    if !synthetic {
                        ordinal += 1;
                    }
                }
                let targets = match &b.transfer {
                    Transfer::Goto(ts) => Some(ts.iter().map(|t| label_index[t.as_str()]).collect()),
                    Transfer::Return => None,
                };
                blocks.push(CBlock { label: b.label.clone(), stmts, targets });
                stmt_count += 1;
            }
            procs.push(CProc {
                name: p.name.clone(),
                projected_name: names::proc_base(&p.name).to_string(),
                shares_frame: names::is_loop_proc(&p.name),
                params: p.params.iter().map(|v| slots[v.as_str()]).collect(),
                returns: p.returns.iter().map(|v| slots[v.as_str()]).collect(),
                block_index: label_index.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
                slot_names,
                slot_proj,
                blocks,
            });
        }
        Compiled {
            entry: proc_index[&program.entry],
            procs,
            proc_index,
            globals,
            fields,
            field_index,
            proj_names,
            nsites: program.max_site() as usize + 1,
            idle_per_depth: 64 + 4 * stmt_count as u64,
        }
    }

    pub fn field_id(&self, f: &str) -> Option<usize> {
        self.field_index.get(f).copied()
    }

    /// Resolve `path` in the scope of procedure `proc`.
    pub fn path(&self, proc: usize, path: &Path) -> Option<CPath> {
        let base = match self.globals.iter().position(|g| *g == path.base) {
            Some(g) => VarRef::Global(g),
            None => VarRef::Local(self.procs[proc].slot_names.iter().position(|v| *v == path.base)?),
        };
        let fields = path.fields.iter().map(|f| self.field_id(f)).collect::<Option<Vec<_>>>()?;
        Some(CPath { base, fields })
    }
}

fn is_synthetic(s: &Stmt) -> bool {
    match s {
        Stmt::Assign { dst, .. } | Stmt::Alloc { dst, .. } | Stmt::AssignNull { dst } => {
            names::is_synthetic_target(dst)
        }
        Stmt::Assume(c) | Stmt::Assert(c) => c.path().is_some_and(|p| names::base_name(&p.base).is_empty()),
        Stmt::Call { callee, .. } => names::is_loop_proc(callee),
        Stmt::Store { .. } => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Value {
    Undef,
    Null,
    Loc(usize),
}

#[derive(Debug, Clone)]
pub(super) struct Object {
    pub site: u32,
    pub ordinal: u32,
    pub fields: Vec<Value>,
}

#[derive(Debug, Clone)]
pub(super) struct Frame {
    pub proc: usize,
    pub slots: Vec<Value>,
    block: usize,
    pc: usize,
    logical: usize,
    outs: Vec<VarRef>,
    /// Values seen per term in this activation, for the term check.
    pub terms: BTreeMap<u32, Value>,
}

#[derive(Debug, Clone)]
pub(super) struct State {
    pub heap: Vec<Object>,
    site_counts: Vec<u32>,
    pub globals: Vec<Value>,
    global_proj: Vec<Value>,
    pub frames: Vec<Frame>,
    logical: Vec<Vec<Value>>,
    fuel: u32,
    idle: u64,
    idle_cap: u64,
    pub events: Vec<Event>,
}

impl State {
    pub fn frame(&self) -> &Frame {
        self.frames.last().expect("active frame")
    }

    pub fn read(&self, v: VarRef) -> Value {
        match v {
            VarRef::Local(s) => self.frame().slots[s],
            VarRef::Global(g) => self.globals[g],
        }
    }

    pub fn summary(&self, v: Value) -> ValueSummary {
        match v {
            Value::Undef => ValueSummary::Undef,
            Value::Null => ValueSummary::Null,
            Value::Loc(o) => ValueSummary::Loc { site: self.heap[o].site, ordinal: self.heap[o].ordinal },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Fault {
    Null,
    Uninit,
}

/// Evaluate `path` without side effects.
pub(super) fn eval(state: &State, path: &CPath) -> Result<Value, Fault> {
    let mut v = state.read(path.base);
    for &f in &path.fields {
        v = match v {
            Value::Loc(o) => state.heap[o].fields[f],
            Value::Null => return Err(Fault::Null),
            Value::Undef => return Err(Fault::Uninit),
        };
    }
    Ok(v)
}

/// Callbacks used by the soundness and term checks.
pub(super) trait Hooks {
    fn var_written(&mut self, _c: &Compiled, _s: &State, _proc: usize, _var: VarRef, _v: Value) {}
    fn field_written(&mut self, _c: &Compiled, _s: &State, _site: u32, _field: usize, _v: Value) {}
    fn allocated(&mut self, _c: &Compiled, _s: &State, _site: u32) {}
    fn before_stmt(&mut self, _c: &Compiled, _s: &mut State, _block: usize, _index: usize) {}
    fn after_stmt(&mut self, _c: &Compiled, _s: &mut State, _block: usize, _index: usize) {}
}

pub(super) struct NoHooks;
impl Hooks for NoHooks {}

pub(super) struct RunOutput {
    pub traces: BTreeSet<Trace>,
}

enum Step {
    Continue,
    Done,
}

struct Runner<'a, H: Hooks> {
    c: &'a Compiled,
    hooks: &'a mut H,
    pending: Vec<State>,
    traces: BTreeSet<Trace>,
    limits: Limits,
}

pub(super) fn run<H: Hooks>(c: &Compiled, limits: Limits, hooks: &mut H) -> Result<RunOutput, InterpError> {
    let entry = &c.procs[c.entry];
    let initial = State {
        heap: Vec::new(),
        site_counts: vec![0; c.nsites],
        globals: vec![Value::Undef; c.globals.len()],
        global_proj: vec![Value::Undef; c.globals.len()],
        frames: vec![Frame {
            proc: c.entry,
            slots: vec![Value::Undef; entry.slot_names.len()],
            block: 0,
            pc: 0,
            logical: 0,
            outs: Vec::new(),
            terms: BTreeMap::new(),
        }],
        logical: vec![vec![Value::Undef; c.proj_names.len()]],
        fuel: limits.depth,
        idle: 0,
        idle_cap: c.idle_per_depth * (u64::from(limits.depth) + 1),
        events: Vec::new(),
    };
    let mut r = Runner { c, hooks, pending: vec![initial], traces: BTreeSet::new(), limits };
    while let Some(mut st) = r.pending.pop() {
        while !st.frames.is_empty() {
            if let Step::Done = r.step(&mut st) {
                break;
            }
        }
        let events = std::mem::take(&mut st.events);
        r.finish(events)?;
    }
    Ok(RunOutput { traces: r.traces })
}

impl<H: Hooks> Runner<'_, H> {
    fn finish(&mut self, events: Vec<Event>) -> Result<(), InterpError> {
        self.traces.insert(Trace { events });
        if self.traces.len() > self.limits.max_traces {
            return Err(InterpError::TooManyTraces(self.limits.max_traces));
        }
        Ok(())
    }

    fn loc(&self, st: &State, ordinal: usize) -> EventLoc {
        let f = st.frame();
        let p = &self.c.procs[f.proc];
        EventLoc { proc: p.projected_name.clone(), block: p.blocks[f.block].label.clone(), index: ordinal }
    }

    fn write(&mut self, st: &mut State, var: VarRef, v: Value) {
        let c = self.c;
        let fi = st.frames.len() - 1;
        let proc = st.frames[fi].proc;
        match var {
            VarRef::Local(s) => {
                st.frames[fi].slots[s] = v;
                if let Some(pid) = c.procs[proc].slot_proj[s] {
                    let logical = st.frames[fi].logical;
                    if st.logical[logical][pid] != v {
                        st.logical[logical][pid] = v;
                        let value = st.summary(v);
                        st.events.push(Event::Assign {
                            proc: c.procs[proc].projected_name.clone(),
                            var: c.proj_names[pid].clone(),
                            value,
                        });
                    }
                }
            }
            VarRef::Global(g) => {
                st.globals[g] = v;
                if st.global_proj[g] != v {
                    st.global_proj[g] = v;
                    let value = st.summary(v);
                    st.events.push(Event::Assign { proc: String::new(), var: c.globals[g].clone(), value });
                }
            }
        }
        self.hooks.var_written(c, st, proc, var, v);
    }

    fn fault(&self, st: &mut State, fault: Fault, ordinal: usize) -> Step {
        let loc = self.loc(st, ordinal);
        st.events.push(match fault {
            Fault::Null => Event::NullDeref { loc },
            Fault::Uninit => Event::UninitRead { loc },
        });
        Step::Done
    }

    /// Evaluate a condition: `Some(true/false)`, or `None` for opaque.
    fn test(&self, st: &State, cond: &CCond) -> Result<Option<bool>, Fault> {
        let (path, want_non_null) = match cond {
            CCond::NonNull(p) => (p, true),
            CCond::IsNull(p) => (p, false),
            CCond::Opaque => return Ok(None),
        };
        match eval(st, path)? {
            Value::Undef => Err(Fault::Uninit),
            Value::Null => Ok(Some(!want_non_null)),
            Value::Loc(_) => Ok(Some(want_non_null)),
        }
    }

    fn step(&mut self, st: &mut State) -> Step {
        let c = self.c;
        let (proc, block, pc) = {
            let f = st.frame();
            (f.proc, f.block, f.pc)
        };
        let cblock = &c.procs[proc].blocks[block];
        if pc >= cblock.stmts.len() {
            return self.transfer(st, proc, block);
        }
        let stmt = &cblock.stmts[pc];
        if stmt.synthetic {
            st.idle += 1;
            if st.idle > st.idle_cap {
                st.events.push(Event::Truncated);
                return Step::Done;
            }
        } else {
            if st.fuel == 0 {
                st.events.push(Event::Truncated);
                return Step::Done;
            }
            st.fuel -= 1;
            st.idle = 0;
        }
        self.hooks.before_stmt(c, st, block, pc);
        st.frames.last_mut().expect("frame").pc += 1;
        let ord = stmt.ordinal;
        match &stmt.kind {
            CStmtKind::Assign { dst, src } => match eval(st, src) {
                Ok(v) => self.write(st, *dst, v),
                Err(f) => return self.fault(st, f, ord),
            },
            CStmtKind::Store { base, field, src } => match st.read(*base) {
                Value::Loc(o) => {
                    let v = st.read(*src);
                    st.heap[o].fields[*field] = v;
                    let site = st.heap[o].site;
                    self.hooks.field_written(c, st, site, *field, v);
                }
                Value::Null => return self.fault(st, Fault::Null, ord),
                Value::Undef => return self.fault(st, Fault::Uninit, ord),
            },
            CStmtKind::Alloc { dst, site } => {
                let ordinal = st.site_counts[*site as usize];
                st.site_counts[*site as usize] += 1;
                st.heap.push(Object { site: *site, ordinal, fields: vec![Value::Null; c.fields.len()] });
                self.hooks.allocated(c, st, *site);
                let o = st.heap.len() - 1;
                self.write(st, *dst, Value::Loc(o));
            }
            CStmtKind::Null { dst } => self.write(st, *dst, Value::Null),
            CStmtKind::Assume(cond) => match self.test(st, cond) {
                Err(f) => return self.fault(st, f, ord),
                Ok(Some(true)) => {}
                Ok(Some(false)) => {
                    let loc = self.loc(st, ord);
                    st.events.push(Event::AssumeBlocked { loc, synthetic: stmt.synthetic });
                    return Step::Done;
                }
                Ok(None) => {
                    let mut blocked = st.clone();
                    let loc = self.loc(st, ord);
                    blocked.events.push(Event::AssumeBlocked { loc, synthetic: stmt.synthetic });
                    blocked.frames.clear();
                    self.pending.push(blocked);
                }
            },
            CStmtKind::Assert(cond) => {
                let outcome = match self.test(st, cond) {
                    Err(f) => return self.fault(st, f, ord),
                    Ok(o) => o,
                };
                let loc = self.loc(st, ord);
                match outcome {
                    Some(true) => st.events.push(Event::AssertPass { loc }),
                    Some(false) => {
                        st.events.push(Event::AssertFail { loc });
                        return Step::Done;
                    }
                    None => {
                        let mut failed = st.clone();
                        failed.events.push(Event::AssertFail { loc: loc.clone() });
                        failed.frames.clear();
                        self.pending.push(failed);
                        st.events.push(Event::AssertPass { loc });
                    }
                }
            }
            CStmtKind::Call { outs, callee, args } => {
                let target = &c.procs[*callee];
                let values: Vec<Value> = args.iter().map(|a| st.read(*a)).collect();
                let caller_logical = st.frame().logical;
                let logical = if target.shares_frame {
                    caller_logical
                } else {
                    st.logical.push(vec![Value::Undef; c.proj_names.len()]);
                    st.logical.len() - 1
                };
                let mut slots = vec![Value::Undef; target.slot_names.len()];
                for (&p, &v) in target.params.iter().zip(&values) {
                    slots[p] = v;
                    if !target.shares_frame {
                        if let Some(pid) = target.slot_proj[p] {
                            st.logical[logical][pid] = v;
                        }
                    }
                }
                st.frames.push(Frame {
                    proc: *callee,
                    slots,
                    block: 0,
                    pc: 0,
                    logical,
                    outs: outs.clone(),
                    terms: BTreeMap::new(),
                });
                for (&p, &v) in target.params.iter().zip(&values) {
                    self.hooks.var_written(c, st, *callee, VarRef::Local(p), v);
                }
                return Step::Continue;
            }
        }
        self.hooks.after_stmt(c, st, block, pc);
        Step::Continue
    }

    fn transfer(&mut self, st: &mut State, proc: usize, block: usize) -> Step {
        let c = self.c;
        st.idle += 1;
        if st.idle > st.idle_cap {
            st.events.push(Event::Truncated);
            return Step::Done;
        }
        match &c.procs[proc].blocks[block].targets {
            Some(ts) => {
                for &t in ts.iter().skip(1).rev() {
                    let mut other = st.clone();
                    let f = other.frames.last_mut().expect("frame");
                    f.block = t;
                    f.pc = 0;
                    self.pending.push(other);
                }
                let f = st.frames.last_mut().expect("frame");
                f.block = ts[0];
                f.pc = 0;
                Step::Continue
            }
            None => {
                let frame = st.frames.pop().expect("frame");
                let values: Vec<Value> = c.procs[proc].returns.iter().map(|&r| frame.slots[r]).collect();
                if !c.procs[proc].shares_frame {
                    st.logical.pop();
                }
                if st.frames.is_empty() {
                    let values = values.iter().map(|&v| st.summary(v)).collect();
                    st.events.push(Event::ProcReturn { values });
                    return Step::Done;
                }
                for (o, v) in frame.outs.iter().zip(values) {
                    self.write(st, *o, v);
                }
                let (b, pc) = {
                    let f = st.frame();
                    (f.block, f.pc - 1)
                };
                self.hooks.after_stmt(c, st, b, pc);
                Step::Continue
            }
        }
    }
}
