use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// 1-based position in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

/// Position inside an in-memory program, used when no source text exists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IrLocation {
    pub proc: Option<String>,
    pub block: Option<String>,
    pub stmt: Option<usize>,
}

impl IrLocation {
    pub fn program() -> Self {
        Self { proc: None, block: None, stmt: None }
    }

    pub fn proc(proc: &str) -> Self {
        Self { proc: Some(proc.to_string()), block: None, stmt: None }
    }

    pub fn block(proc: &str, block: &str) -> Self {
        Self { proc: Some(proc.to_string()), block: Some(block.to_string()), stmt: None }
    }

    pub fn stmt(proc: &str, block: &str, index: usize) -> Self {
        Self {
            proc: Some(proc.to_string()),
            block: Some(block.to_string()),
            stmt: Some(index),
        }
    }
}

impl fmt::Display for IrLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.proc, &self.block, self.stmt) {
            (None, _, _) => f.write_str("<program>"),
            (Some(p), None, _) => write!(f, "{p}"),
            (Some(p), Some(b), None) => write!(f, "{p}/{b}"),
            (Some(p), Some(b), Some(i)) => write!(f, "{p}/{b}#{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub file: Option<String>,
    pub span: Option<Span>,
    pub location: Option<IrLocation>,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>) -> Self {
        Self {
            file: None,
            span: None,
            location: None,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn at_span(mut self, span: Span) -> Self {
        self.span = Some(span);
        self
    }

    pub fn at(mut self, location: IrLocation) -> Self {
        self.location = Some(location);
        self
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        if let Some(span) = self.span {
            write!(f, "{}:{}: ", span.line, span.column)?;
        } else if let Some(loc) = &self.location {
            write!(f, "{loc}: ")?;
        } else if self.file.is_some() {
            f.write_str(" ")?;
        }
        write!(f, "{}: {}", self.severity, self.message)
    }
}
