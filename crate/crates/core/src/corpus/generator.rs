//! Seeded random program generator.
//!
//! Programs are built from a small structured AST (straight-line code,
//! two-armed branches, single-block loops) and lowered to blocks. Every
//! variable is assigned in its procedure's entry block, every dereference is
//! preceded by an assertion on the dereferenced path, and a configurable
//! fraction of dereferences sit inside a branch that first checks the base
//! against Null, which is the shape defensive code takes.

use std::fmt;
use std::str::FromStr;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ir::{Block, Cond, Path, Procedure, Program, Stmt, Transfer};

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub copy: u32,
    pub load: u32,
    pub store: u32,
    pub alloc: u32,
    pub null: u32,
    pub call: u32,
    pub branch: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { copy: 3, load: 4, store: 3, alloc: 2, null: 2, call: 1, branch: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub max_procs: usize,
    pub max_blocks: usize,
    pub max_stmts: usize,
    pub weights: Weights,
    /// Probability that a dereference is wrapped in a null check.
    pub null_check_density: f64,
    /// Probability that a top-level statement becomes a loop.
    pub loop_probability: f64,
    /// Probability that a variable starts out Null rather than allocated.
    pub null_init_probability: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            max_procs: 3,
            max_blocks: 24,
            max_stmts: 4,
            weights: Weights::default(),
            null_check_density: 0.95,
            loop_probability: 0.05,
            null_init_probability: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

impl GeneratorConfig {
    /// Profile with no null checks at all.
    pub fn unchecked() -> Self {
        GeneratorConfig { null_check_density: 0.0, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let w = &mut self.weights;
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "max_procs" => self.max_procs = parse_value(key, value)?,
            "max_blocks" => self.max_blocks = parse_value(key, value)?,
            "max_stmts" => self.max_stmts = parse_value(key, value)?,
            "weight.copy" => w.copy = parse_value(key, value)?,
            "weight.load" => w.load = parse_value(key, value)?,
            "weight.store" => w.store = parse_value(key, value)?,
            "weight.alloc" => w.alloc = parse_value(key, value)?,
            "weight.null" => w.null = parse_value(key, value)?,
            "weight.call" => w.call = parse_value(key, value)?,
            "weight.branch" => w.branch = parse_value(key, value)?,
            "null_check_density" | "loop_probability" | "null_init_probability" => {
                let p: f64 = parse_value(key, value)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(ConfigError::BadValue { key: key.into(), value: value.into() });
                }
                *match key {
                    "loop_probability" => &mut self.loop_probability,
                    "null_check_density" => &mut self.null_check_density,
                    _ => &mut self.null_init_probability,
                } = p;
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: usize| ConfigError::BadValue { key: key.into(), value: value.to_string() };
        if self.max_procs == 0 {
            return Err(bad("max_procs", 0));
        }
        if self.max_blocks == 0 {
            return Err(bad("max_blocks", 0));
        }
        if self.max_stmts == 0 {
            return Err(bad("max_stmts", 0));
        }
        let w = &self.weights;
        if [w.copy, w.load, w.store, w.alloc, w.null, w.call, w.branch].iter().all(|&x| x == 0) {
            return Err(ConfigError::BadValue { key: "weight.*".into(), value: "0".into() });
        }
        Ok(())
    }
}

impl fmt::Display for GeneratorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = &self.weights;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "max_procs = {}", self.max_procs)?;
        writeln!(f, "max_blocks = {}", self.max_blocks)?;
        writeln!(f, "max_stmts = {}", self.max_stmts)?;
        for (k, v) in [
            ("copy", w.copy),
            ("load", w.load),
            ("store", w.store),
            ("alloc", w.alloc),
            ("null", w.null),
            ("call", w.call),
            ("branch", w.branch),
        ] {
            writeln!(f, "weight.{k} = {v}")?;
        }
        writeln!(f, "null_check_density = {}", self.null_check_density)?;
        writeln!(f, "loop_probability = {}", self.loop_probability)?;
        writeln!(f, "null_init_probability = {}", self.null_init_probability)
    }
}

const FIELDS: [&str; 2] = ["f", "g"];
const LOCALS: [&str; 4] = ["a", "b", "c", "d"];
const GLOBAL: &str = "gl";

enum Node {
    S(Stmt),
    If { guards: Vec<Path>, then: Vec<Node>, els: Vec<Node> },
    Loop(Vec<Node>),
}

#[derive(Clone, Copy)]
enum Kind {
    Copy,
    Load,
    Store,
    Alloc,
    Null,
    Call,
    Branch,
}

struct Sig {
    name: String,
    params: Vec<String>,
    returns: Vec<String>,
}

struct Gen<'a> {
    cfg: &'a GeneratorConfig,
    rng: ChaCha8Rng,
    site: u32,
    kinds: Vec<Kind>,
    dist: WeightedIndex<u32>,
    sigs: Vec<Sig>,
    global: bool,
}

/// Per-procedure generation state.
struct Scope {
    index: usize,
    vars: Vec<String>,
    blocks_left: usize,
    calls_left: usize,
}

impl Gen<'_> {
    fn pick<'v>(&mut self, from: &'v [String]) -> &'v str {
        &from[self.rng.gen_range(0..from.len())]
    }

    fn field(&mut self) -> String {
        FIELDS[self.rng.gen_range(0..FIELDS.len())].to_string()
    }

    fn new_site(&mut self) -> u32 {
        self.site += 1;
        self.site
    }

    fn assert_non_null(path: Path) -> Node {
        Node::S(Stmt::Assert(Cond::NonNull(path)))
    }

    /// An asserted dereference: a load (sometimes through two fields) or a
    /// store, based at `base`.
    fn deref(&mut self, sc: &Scope, base: &str, load: bool) -> Vec<Node> {
        let mut out = vec![Self::assert_non_null(Path::var(base))];
        if load {
            let dst = self.pick(&sc.vars).to_string();
            let f = self.field();
            let mut src = Path::new(base, [f]);
            if self.rng.gen_bool(0.25) {
                out.push(Self::assert_non_null(src.clone()));
                src = src.field(&self.field());
            }
            out.push(Node::S(Stmt::Assign { dst, src }));
        } else {
            let field = self.field();
            let src = self.pick(&sc.vars).to_string();
            out.push(Node::S(Stmt::Store { base: base.to_string(), field, src }));
        }
        out
    }

    fn simple(&mut self, sc: &mut Scope, kind: Kind, depth: usize, loop_body: bool) -> Vec<Node> {
        match kind {
            Kind::Copy => {
                let dst = self.pick(&sc.vars).to_string();
                let src = self.pick(&sc.vars).to_string();
                vec![Node::S(Stmt::copy(&dst, &src))]
            }
            Kind::Alloc => {
                let dst = self.pick(&sc.vars).to_string();
                vec![Node::S(Stmt::Alloc { dst, site: self.new_site() })]
            }
            Kind::Null => {
                let dst = self.pick(&sc.vars).to_string();
                vec![Node::S(Stmt::AssignNull { dst })]
            }
            Kind::Load | Kind::Store => {
                let base = self.pick(&sc.vars).to_string();
                let load = matches!(kind, Kind::Load);
                let checked = !loop_body
                    && sc.blocks_left >= 3
                    && self.rng.gen_bool(self.cfg.null_check_density);
                if !checked {
                    return self.deref(sc, &base, load);
                }
                sc.blocks_left -= 3;
                let mut then = self.deref(sc, &base, load);
                let guards = then
                    .iter()
                    .filter_map(|n| match n {
                        Node::S(Stmt::Assert(Cond::NonNull(p))) => Some(p.clone()),
                        _ => None,
                    })
                    .collect();
                then.extend(self.region(sc, depth + 1, 2));
                let els = self.region(sc, depth + 1, 1);
                vec![Node::If { guards, then, els }]
            }
            Kind::Call => {
                let callee = self.rng.gen_range(sc.index + 1..self.sigs.len());
                sc.calls_left -= 1;
                let (np, nr) = (self.sigs[callee].params.len(), self.sigs[callee].returns.len());
                let args = (0..np).map(|_| self.pick(&sc.vars).to_string()).collect();
                let outs = (0..nr).map(|_| self.pick(&sc.vars).to_string()).collect();
                vec![Node::S(Stmt::Call { outs, callee: self.sigs[callee].name.clone(), args })]
            }
            Kind::Branch => {
                sc.blocks_left -= 3;
                let then = self.region(sc, depth + 1, 2);
                let els = self.region(sc, depth + 1, 2);
                vec![Node::If { guards: vec![], then, els }]
            }
        }
    }

    fn choose_kind(&mut self, sc: &Scope, depth: usize, loop_body: bool) -> Kind {
        loop {
            let k = self.kinds[self.dist.sample(&mut self.rng)];
            let ok = match k {
                Kind::Call => !loop_body && sc.calls_left > 0 && sc.index + 1 < self.sigs.len(),
                Kind::Branch => !loop_body && depth < 2 && sc.blocks_left >= 3,
                _ => true,
            };
            if ok {
                return k;
            }
            if !self.kinds.iter().any(|k| matches!(k, Kind::Copy | Kind::Load | Kind::Store | Kind::Alloc | Kind::Null)) {
                return Kind::Alloc;
            }
        }
    }

    fn region(&mut self, sc: &mut Scope, depth: usize, max_items: usize) -> Vec<Node> {
        let n = self.rng.gen_range(0..=max_items.min(self.cfg.max_stmts));
        let mut out = Vec::new();
        for _ in 0..n {
            if depth == 0 && sc.blocks_left >= 2 && self.rng.gen_bool(self.cfg.loop_probability) {
                sc.blocks_left -= 2;
                let len = self.rng.gen_range(1..=3);
                let mut body = Vec::new();
                for _ in 0..len {
                    let k = self.choose_kind(sc, depth, true);
                    body.extend(self.simple(sc, k, depth, true));
                }
                out.push(Node::Loop(body));
                continue;
            }
            let k = self.choose_kind(sc, depth, false);
            out.extend(self.simple(sc, k, depth, false));
        }
        out
    }

    fn procedure(&mut self, index: usize) -> Procedure {
        let sig = &self.sigs[index];
        let (name, params, returns) = (sig.name.clone(), sig.params.clone(), sig.returns.clone());
        let nlocals = self.rng.gen_range(2..=LOCALS.len());
        let locals: Vec<String> = LOCALS[..nlocals].iter().map(|s| s.to_string()).collect();
        let mut vars: Vec<String> = params.iter().chain(&returns).chain(&locals).cloned().collect();
        if self.global {
            vars.push(GLOBAL.to_string());
        }
        let mut sc = Scope { index, vars, blocks_left: self.cfg.max_blocks.saturating_sub(1), calls_left: 2 };

        let mut init = Vec::new();
        let mut to_init: Vec<String> = returns.iter().chain(&locals).cloned().collect();
        if self.global && index == 0 {
            to_init.insert(0, GLOBAL.to_string());
        }
        for v in to_init {
            let s = if self.rng.gen_bool(self.cfg.null_init_probability) {
                Stmt::AssignNull { dst: v }
            } else {
                Stmt::Alloc { dst: v, site: self.new_site() }
            };
            init.push(Node::S(s));
        }
        let mut body = init;
        let top = self.cfg.max_stmts.max(2) * 2;
        body.extend(self.region(&mut sc, 0, top));
        if index == 0 && !contains_assert(&body) {
            let base = self.pick(&sc.vars).to_string();
            body.extend(self.deref(&sc, &base, true));
        }

        let mut lower = Lower { blocks: Vec::new(), next: 1, label: "L1".into(), stmts: Vec::new() };
        lower.seq(body);
        lower.close(Transfer::Return);
        Procedure { name, params, returns, locals, blocks: lower.blocks }
    }
}

fn contains_assert(nodes: &[Node]) -> bool {
    nodes.iter().any(|n| match n {
        Node::S(s) => matches!(s, Stmt::Assert(_)),
        Node::If { then, els, .. } => contains_assert(then) || contains_assert(els),
        Node::Loop(body) => contains_assert(body),
    })
}

struct Lower {
    blocks: Vec<Block>,
    next: usize,
    label: String,
    stmts: Vec<Stmt>,
}

impl Lower {
    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("L{}", self.next)
    }

    fn close(&mut self, transfer: Transfer) {
        let label = std::mem::take(&mut self.label);
        let stmts = std::mem::take(&mut self.stmts);
        self.blocks.push(Block::new(label, stmts, transfer));
    }

    fn open(&mut self, label: String) {
        self.label = label;
    }

    fn seq(&mut self, nodes: Vec<Node>) {
        for n in nodes {
            match n {
                Node::S(s) => self.stmts.push(s),
                Node::If { guards, then, els } => {
                    let (t, e, j) = (self.fresh(), self.fresh(), self.fresh());
                    self.close(Transfer::Goto(vec![t.clone(), e.clone()]));
                    self.open(t);
                    for g in &guards {
                        self.stmts.push(Stmt::Assume(Cond::NonNull(g.clone())));
                    }
                    self.seq(then);
                    self.close(Transfer::Goto(vec![j.clone()]));
                    self.open(e);
                    // The negation of a conjunction is not expressible, so
                    // only single checks constrain the other arm.
                    if let [g] = guards.as_slice() {
                        self.stmts.push(Stmt::Assume(Cond::IsNull(g.clone())));
                    }
                    self.seq(els);
                    self.close(Transfer::Goto(vec![j.clone()]));
                    self.open(j);
                }
                Node::Loop(body) => {
                    let (h, x) = (self.fresh(), self.fresh());
                    self.close(Transfer::Goto(vec![h.clone()]));
                    self.open(h.clone());
                    self.seq(body);
                    self.close(Transfer::Goto(vec![h, x.clone()]));
                    self.open(x);
                }
            }
        }
    }
}

/// Generate the program for `cfg`. Identical configurations give identical
/// programs.
pub fn generate(cfg: &GeneratorConfig) -> Result<Program, ConfigError> {
    cfg.validate()?;
    let w = &cfg.weights;
    let table = [
        (Kind::Copy, w.copy),
        (Kind::Load, w.load),
        (Kind::Store, w.store),
        (Kind::Alloc, w.alloc),
        (Kind::Null, w.null),
        (Kind::Call, w.call),
        (Kind::Branch, w.branch),
    ];
    let kinds: Vec<Kind> = table.iter().filter(|(_, w)| *w > 0).map(|(k, _)| *k).collect();
    let dist = WeightedIndex::new(table.iter().filter(|(_, w)| *w > 0).map(|(_, w)| *w))
        .expect("at least one positive weight");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nprocs = rng.gen_range(1..=cfg.max_procs);
    let global = rng.gen_bool(0.3);
    let sigs = (0..nprocs)
        .map(|i| {
            if i == 0 {
                return Sig { name: "main".into(), params: vec![], returns: vec![] };
            }
            let np = rng.gen_range(1..=2);
            let nr = rng.gen_range(0..=1);
            Sig {
                name: format!("p{i}"),
                params: ["x", "y"][..np].iter().map(|s| s.to_string()).collect(),
                returns: ["r"][..nr].iter().map(|s| s.to_string()).collect(),
            }
        })
        .collect();
    let mut g = Gen { cfg, rng, site: 0, kinds, dist, sigs, global };
    let procedures = (0..nprocs).map(|i| g.procedure(i)).collect();
    Ok(Program {
        globals: if global { vec![GLOBAL.to_string()] } else { vec![] },
        procedures,
        entry: "main".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::validate;
    use crate::parse::{parse_program, print_program};

    #[test]
    fn reproducible() {
        let cfg = GeneratorConfig::default().with_seed(42);
        assert_eq!(print_program(&generate(&cfg).unwrap()), print_program(&generate(&cfg).unwrap()));
    }

    #[test]
    fn generated_programs_are_valid_and_assert() {
        for seed in 0..200 {
            let p = generate(&GeneratorConfig::default().with_seed(seed)).unwrap();
            assert_eq!(validate(&p), vec![], "seed {seed}");
            assert!(p.count_asserts() > 0, "seed {seed}");
            assert_eq!(parse_program(&print_program(&p)).unwrap(), p, "seed {seed}");
        }
    }

    #[test]
    fn no_loops_means_acyclic() {
        let mut cfg = GeneratorConfig { loop_probability: 0.0, ..Default::default() };
        for seed in 0..100 {
            cfg.seed = seed;
            let p = generate(&cfg).unwrap();
            assert!(p.procedures.iter().all(crate::ir::cfg_is_acyclic), "seed {seed}");
            assert_eq!(crate::normalize::lift_loops(&p).unwrap(), p, "seed {seed}");
        }
    }

    #[test]
    fn config_text() {
        let mut cfg = GeneratorConfig::default();
        cfg.apply_text("# profile\nseed = 7\nnull_check_density=0\nweight.call = 0\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.null_check_density, 0.0);
        assert_eq!(cfg.weights.call, 0);
        let mut round = GeneratorConfig::default();
        round.apply_text(&cfg.to_string()).unwrap();
        assert_eq!(round, cfg);
        assert_eq!(cfg.apply_text("seed"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(cfg.apply_text("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg.apply_text("loop_probability = 2"), Err(ConfigError::BadValue { .. })));
    }
}
