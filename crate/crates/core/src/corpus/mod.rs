//! Bundled example programs and the random generator.

mod generator;

pub use generator::{generate, ConfigError, GeneratorConfig, Weights};

use crate::diagnostic::Diagnostic;
use crate::ir::Program;
use crate::parse::{parse_program, parse_transformed};

/// One bundled corpus file.
#[derive(Debug, Clone, Copy)]
pub struct CorpusFile {
    pub name: &'static str,
    pub source: &'static str,
    /// Already contains pass-introduced names, so it parses in permissive mode.
    pub transformed: bool,
}

impl CorpusFile {
    pub fn parse(&self) -> Result<Program, Vec<Diagnostic>> {
        if self.transformed {
            parse_transformed(self.source)
        } else {
            parse_program(self.source)
        }
    }
}

macro_rules! entry {
    ($name:literal) => {
        CorpusFile { name: $name, source: include_str!(concat!("../../corpus/", $name, ".ir")), transformed: false }
    };
    ($name:literal, expected) => {
        CorpusFile {
            name: $name,
            source: include_str!(concat!("../../corpus/expected/", $name, ".ir")),
            transformed: true,
        }
    };
}

pub const BUNDLED: &[CorpusFile] = &[
    entry!("two_procs"),
    entry!("ssa_reassign"),
    entry!("redundant_load"),
    entry!("field_kill"),
    entry!("equal_paths"),
    entry!("merge_assert"),
    entry!("alias_store"),
    entry!("call_kill"),
    entry!("diamond_asym"),
    entry!("fieldkill_blocks"),
    entry!("global_call"),
    entry!("multi_exit_loop"),
    entry!("nested_loops"),
    entry!("null_branch"),
    entry!("opaque"),
    entry!("path_assert"),
    entry!("recursion"),
    entry!("self_loop"),
    entry!("tag_collision"),
    entry!("unreachable"),
];

/// Expected outputs of the transformations on some of the programs above.
pub const EXPECTED: &[CorpusFile] = &[entry!("redundant_load_result", expected), entry!("equal_paths_result", expected)];

pub fn bundled(name: &str) -> Option<&'static CorpusFile> {
    BUNDLED.iter().chain(EXPECTED).find(|f| f.name == name)
}

/// Every bundled source program, parsed.
pub fn bundled_programs() -> Vec<(&'static str, Program)> {
    BUNDLED
        .iter()
        .map(|f| (f.name, f.parse().unwrap_or_else(|d| panic!("bundled `{}` does not parse: {d:?}", f.name))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::validate;

    #[test]
    fn all_bundled_parse_and_validate() {
        let progs = bundled_programs();
        assert!(progs.len() >= 20);
        for (name, p) in &progs {
            assert_eq!(validate(p), vec![], "{name}");
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(bundled("two_procs").unwrap().parse().unwrap().procedures.len(), 2);
        assert!(bundled("nope").is_none());
    }
}
