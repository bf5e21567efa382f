//! Text format for the pointer IR.
//!
//! ```text
//! program   := global* proc+
//! global    := "var" IDENT (":" IDENT)? ";"
//! proc      := "procedure" IDENT "(" params? ")" returns? "{" local* block+ "}"
//! returns   := "returns" ( "(" idlist ")" | IDENT (":" IDENT)? )
//! local     := "var" IDENT (":" IDENT)? ";"
//! block     := IDENT ":" stmt* transfer
//! stmt      := IDENT ":=" rhs ";" | IDENT "." IDENT ":=" IDENT ";"
//!            | "assume" cond ";" | "assert" cond ";"
//!            | (idlist ":=")? "call" IDENT "(" idlist? ")" ";"
//! rhs       := path | "new" "(" INT ")" | "Null" | "call" ...
//! cond      := "(" cond ")" | path ("!=" | "==") "Null" | "*"
//! transfer  := "goto" idlist ";" | "return" ";"
//! ```
//!
//! Type annotations (`: int`) are accepted and discarded. The entry procedure
//! is `main` when present, otherwise the first procedure.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diagnostic::{Diagnostic, IrLocation, Span};
use crate::ir::{self, Block, Cond, Path, Procedure, Program, Stmt, Transfer};
use crate::names;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept identifiers in the reserved `__` namespace (output of the
    /// transformation passes).
    pub allow_reserved: bool,
    pub file: Option<String>,
}

/// Parse a source program. Reserved `__` identifiers are rejected.
pub fn parse_program(text: &str) -> Result<Program, Vec<Diagnostic>> {
    parse_with(text, &ParseOptions::default())
}

/// Parse a program previously emitted by one of the passes.
pub fn parse_transformed(text: &str) -> Result<Program, Vec<Diagnostic>> {
    parse_with(text, &ParseOptions { allow_reserved: true, file: None })
}

pub fn parse_with(text: &str, opts: &ParseOptions) -> Result<Program, Vec<Diagnostic>> {
    let attach = |d: Diagnostic| match &opts.file {
        Some(f) => d.in_file(f.clone()),
        None => d,
    };
    let tokens = lex(text).map_err(|d| vec![attach(d)])?;
    let mut parser = Parser { tokens, pos: 0, opts, spans: SourceMap::default() };
    let program = parser.program().map_err(|d| vec![attach(d)])?;
    let diags = ir::validate(&program);
    if diags.is_empty() {
        Ok(program)
    } else {
        Err(diags
            .into_iter()
            .map(|d| {
                let span = d.location.as_ref().and_then(|l| parser.spans.lookup(l));
                let d = match span {
                    Some(s) => d.at_span(s),
                    None => d,
                };
                attach(d)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u32),
    Assign,
    Colon,
    Semi,
    Comma,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Ne,
    EqEq,
    Star,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Assign => "`:=`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, Diagnostic> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let span = Span { line, column: col };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '/' {
            bump(&mut chars);
            if chars.peek() == Some(&'/') {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
                continue;
            }
            return Err(Diagnostic::error("unexpected character `/`").at_span(span));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(s), span));
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            let n = s
                .parse::<u32>()
                .map_err(|_| Diagnostic::error(format!("integer `{s}` out of range")).at_span(span))?;
            out.push((Tok::Int(n), span));
            continue;
        }
        bump(&mut chars);
        let two = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>, want: char| chars.peek() == Some(&want);
        let tok = match c {
            ':' if two(&mut chars, '=') => {
                bump(&mut chars);
                Tok::Assign
            }
            ':' => Tok::Colon,
            '!' if two(&mut chars, '=') => {
                bump(&mut chars);
                Tok::Ne
            }
            '=' if two(&mut chars, '=') => {
                bump(&mut chars);
                Tok::EqEq
            }
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '*' => Tok::Star,
            other => {
                return Err(Diagnostic::error(format!("unexpected character `{other}`")).at_span(span));
            }
        };
        out.push((tok, span));
    }
    out.push((Tok::Eof, Span { line, column: col }));
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "var", "procedure", "returns", "goto", "return", "assume", "assert", "call", "new", "Null",
];

#[derive(Debug, Default)]
struct SourceMap {
    procs: BTreeMap<String, Span>,
    blocks: BTreeMap<(String, String), Span>,
    stmts: BTreeMap<(String, String, usize), Span>,
    program: Option<Span>,
}

impl SourceMap {
    fn lookup(&self, loc: &IrLocation) -> Option<Span> {
        match (&loc.proc, &loc.block, loc.stmt) {
            (Some(p), Some(b), Some(i)) => self
                .stmts
                .get(&(p.clone(), b.clone(), i))
                .or_else(|| self.blocks.get(&(p.clone(), b.clone())))
                .copied(),
            (Some(p), Some(b), None) => self.blocks.get(&(p.clone(), b.clone())).copied(),
            (Some(p), None, _) => self.procs.get(p).copied(),
            (None, _, _) => self.program,
        }
    }
}

struct Parser<'a> {
    tokens: Vec<(Tok, Span)>,
    pos: usize,
    opts: &'a ParseOptions,
    spans: SourceMap,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].0
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].1
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::error(msg).at_span(self.span()))
    }

    fn expected<T>(&self, what: &str) -> PResult<T> {
        self.error(format!("expected {what}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.expected(&tok.describe())
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.next();
            Ok(())
        } else {
            self.expected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => {
                self.error(format!("keyword `{s}` cannot be used as an identifier"))
            }
            Tok::Ident(s) => {
                if !self.opts.allow_reserved && names::is_reserved(&s) {
                    return self.error(format!(
                        "identifier `{s}` uses the reserved `{}` namespace",
                        names::SEP
                    ));
                }
                self.next();
                Ok(s)
            }
            _ => self.expected("identifier"),
        }
    }

    fn skip_type(&mut self) -> PResult<()> {
        if self.eat(&Tok::Colon) {
            self.ident()?;
        }
        Ok(())
    }

    fn program(&mut self) -> PResult<Program> {
        self.spans.program = Some(self.span());
        let mut globals = Vec::new();
        let mut procedures = Vec::new();
        loop {
            if self.at_keyword("var") && procedures.is_empty() {
                self.next();
                globals.push(self.ident()?);
                self.skip_type()?;
                self.expect(Tok::Semi)?;
            } else if self.at_keyword("procedure") {
                procedures.push(self.procedure()?);
            } else if *self.peek() == Tok::Eof && !procedures.is_empty() {
                break;
            } else {
                return self.expected("procedure");
            }
        }
        let entry = if procedures.iter().any(|p: &Procedure| p.name == "main") {
            "main".to_string()
        } else {
            procedures[0].name.clone()
        };
        Ok(Program { globals, procedures, entry })
    }

    fn procedure(&mut self) -> PResult<Procedure> {
        self.keyword("procedure")?;
        let span = self.span();
        let name = self.ident()?;
        self.spans.procs.insert(name.clone(), span);
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                if self.at_keyword("var") {
                    self.next();
                }
                params.push(self.ident()?);
                self.skip_type()?;
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let mut returns = Vec::new();
        if self.at_keyword("returns") {
            self.next();
            if self.eat(&Tok::LParen) {
                if *self.peek() != Tok::RParen {
                    loop {
                        returns.push(self.ident()?);
                        self.skip_type()?;
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
            } else {
                returns.push(self.ident()?);
                self.skip_type()?;
            }
        }
        self.expect(Tok::LBrace)?;
        let mut locals = Vec::new();
        while self.at_keyword("var") {
            self.next();
            locals.push(self.ident()?);
            self.skip_type()?;
            self.expect(Tok::Semi)?;
        }
        let mut blocks = Vec::new();
        while *self.peek() != Tok::RBrace {
            blocks.push(self.block(&name)?);
        }
        if blocks.is_empty() {
            return self.expected("block label");
        }
        self.expect(Tok::RBrace)?;
        Ok(Procedure { name, params, returns, locals, blocks })
    }

    fn block(&mut self, proc: &str) -> PResult<Block> {
        let span = self.span();
        let label = self.ident()?;
        self.expect(Tok::Colon)?;
        self.spans.blocks.insert((proc.to_string(), label.clone()), span);
        let mut stmts = Vec::new();
        loop {
            if self.at_keyword("goto") {
                self.next();
                let targets = self.idlist()?;
                self.expect(Tok::Semi)?;
                return Ok(Block::new(label, stmts, Transfer::Goto(targets)));
            }
            if self.at_keyword("return") {
                self.next();
                self.expect(Tok::Semi)?;
                return Ok(Block::new(label, stmts, Transfer::Return));
            }
            match self.peek() {
                Tok::RBrace | Tok::Eof => {
                    return self.error(format!("block `{label}` must end with `goto` or `return`"));
                }
                Tok::Ident(_) if *self.peek_at(1) == Tok::Colon => {
                    return self.error(format!("block `{label}` must end with `goto` or `return`"));
                }
                _ => {}
            }
            let span = self.span();
            let stmt = self.stmt()?;
            self.spans.stmts.insert((proc.to_string(), label.clone(), stmts.len()), span);
            stmts.push(stmt);
        }
    }

    fn idlist(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn args(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen)?;
        let args = if *self.peek() == Tok::RParen { Vec::new() } else { self.idlist()? };
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn call_tail(&mut self, outs: Vec<String>) -> PResult<Stmt> {
        self.keyword("call")?;
        let callee = self.ident()?;
        let args = self.args()?;
        self.expect(Tok::Semi)?;
        Ok(Stmt::Call { outs, callee, args })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.at_keyword("assume") || self.at_keyword("assert") {
            let is_assume = self.at_keyword("assume");
            self.next();
            let cond = self.cond()?;
            self.expect(Tok::Semi)?;
            return Ok(if is_assume { Stmt::Assume(cond) } else { Stmt::Assert(cond) });
        }
        if self.at_keyword("call") {
            return self.call_tail(Vec::new());
        }
        let first = self.ident()?;
        match self.peek() {
            Tok::Dot => {
                self.next();
                let field = self.ident()?;
                if *self.peek() == Tok::Dot {
                    return self.error("stores write a single field: expected `x.f := y`");
                }
                self.expect(Tok::Assign)?;
                let src = self.ident()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Store { base: first, field, src })
            }
            Tok::Comma => {
                let mut outs = vec![first];
                while self.eat(&Tok::Comma) {
                    outs.push(self.ident()?);
                }
                self.expect(Tok::Assign)?;
                self.call_tail(outs)
            }
            Tok::Assign => {
                self.next();
                if self.at_keyword("call") {
                    return self.call_tail(vec![first]);
                }
                let stmt = if self.at_keyword("new") {
                    self.next();
                    self.expect(Tok::LParen)?;
                    let site = match self.peek() {
                        Tok::Int(n) => *n,
                        _ => return self.expected("allocation site number"),
                    };
                    self.next();
                    self.expect(Tok::RParen)?;
                    Stmt::Alloc { dst: first, site }
                } else if self.at_keyword("Null") {
                    self.next();
                    Stmt::AssignNull { dst: first }
                } else {
                    Stmt::Assign { dst: first, src: self.path()? }
                };
                self.expect(Tok::Semi)?;
                Ok(stmt)
            }
            _ => self.expected("`:=`"),
        }
    }

    fn path(&mut self) -> PResult<Path> {
        let base = self.ident()?;
        let mut fields = Vec::new();
        while self.eat(&Tok::Dot) {
            fields.push(self.ident()?);
        }
        Ok(Path { base, fields })
    }

    fn cond(&mut self) -> PResult<Cond> {
        if self.eat(&Tok::LParen) {
            let c = self.cond()?;
            self.expect(Tok::RParen)?;
            return Ok(c);
        }
        if self.eat(&Tok::Star) {
            return Ok(Cond::Opaque);
        }
        let path = self.path()?;
        let negated = match self.peek() {
            Tok::Ne => true,
            Tok::EqEq => false,
            _ => return self.expected("`!=` or `==`"),
        };
        self.next();
        self.keyword("Null")?;
        Ok(if negated { Cond::NonNull(path) } else { Cond::IsNull(path) })
    }
}

fn print_cond(c: &Cond) -> String {
    match c {
        Cond::NonNull(p) => format!("({p} != Null)"),
        Cond::IsNull(p) => format!("({p} == Null)"),
        Cond::Opaque => "*".to_string(),
    }
}

pub fn print_stmt(s: &Stmt) -> String {
    match s {
        Stmt::Assign { dst, src } => format!("{dst} := {src};"),
        Stmt::Store { base, field, src } => format!("{base}.{field} := {src};"),
        Stmt::Alloc { dst, site } => format!("{dst} := new({site});"),
        Stmt::AssignNull { dst } => format!("{dst} := Null;"),
        Stmt::Assume(c) => format!("assume {};", print_cond(c)),
        Stmt::Assert(c) => format!("assert {};", print_cond(c)),
        Stmt::Call { outs, callee, args } => {
            let call = format!("call {callee}({});", args.join(", "));
            if outs.is_empty() {
                call
            } else {
                format!("{} := {call}", outs.join(", "))
            }
        }
    }
}

/// Canonical text of `program`; re-parses (with reserved names allowed) to a
/// structurally equal program.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for g in &program.globals {
        let _ = writeln!(out, "var {g};");
    }
    for (i, p) in program.procedures.iter().enumerate() {
        if i > 0 || !program.globals.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "procedure {}({})", p.name, p.params.join(", "));
        if !p.returns.is_empty() {
            let _ = write!(out, " returns ({})", p.returns.join(", "));
        }
        out.push_str(" {\n");
        for l in &p.locals {
            let _ = writeln!(out, "  var {l};");
        }
        for b in &p.blocks {
            let _ = writeln!(out, "  {}:", b.label);
            for s in &b.stmts {
                let _ = writeln!(out, "    {}", print_stmt(s));
            }
            match &b.transfer {
                Transfer::Goto(ts) => {
                    let _ = writeln!(out, "    goto {};", ts.join(", "));
                }
                Transfer::Return => out.push_str("    return;\n"),
            }
        }
        out.push_str("}\n");
    }
    out
}
