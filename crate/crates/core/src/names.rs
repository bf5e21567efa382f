//! Reserved identifier namespace.
//!
//! Source programs may not use `__` in identifiers. Every name the passes
//! introduce carries a `__` marker so generated and user names never collide,
//! and so a transformed name can always be mapped back to the source name it
//! stands for:
//!
//! | form              | produced by            |
//! |-------------------|------------------------|
//! | `x__3`            | SSA definition version |
//! | `x__p3`           | SSA merge copy target  |
//! | `gvnTmp__gvn3`    | GVN tagged temporary   |
//! | `x__ret`          | loop-lifting result    |
//! | `__e0`            | loop-lifting exit flag |
//! | `main__loop_L1`   | loop-lifted procedure  |

use std::collections::BTreeSet;

pub const SEP: &str = "__";
pub const TAG_PREFIX: &str = "gvnTmp";

pub fn is_reserved(name: &str) -> bool {
    name.contains(SEP)
}

fn suffix_components(name: &str) -> impl Iterator<Item = &str> {
    name.split(SEP).skip(1)
}

fn is_numbered(component: &str, prefix: &str) -> bool {
    component
        .strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// `#`-tagged variables: never hold Null, assigned exactly once.
pub fn is_tagged(name: &str) -> bool {
    suffix_components(name).any(|c| is_numbered(c, "gvn"))
}

/// The source-level name a (possibly renamed) variable stands for.
pub fn base_name(name: &str) -> &str {
    name.split(SEP).next().unwrap_or(name)
}

/// Source variable observed through this name, or `None` for tool-internal
/// variables (tagged temporaries, exit flags).
pub fn projected(name: &str) -> Option<&str> {
    let base = base_name(name);
    if base.is_empty() || is_tagged(name) {
        None
    } else {
        Some(base)
    }
}

/// Assignments to these names never correspond to a source statement.
pub fn is_synthetic_target(name: &str) -> bool {
    projected(name).is_none()
        || suffix_components(name).any(|c| c == "ret" || is_numbered(c, "ret") || is_numbered(c, "p"))
}

pub fn is_loop_proc(name: &str) -> bool {
    name.contains("__loop_")
}

/// Source procedure a (possibly loop-lifted) procedure belongs to.
pub fn proc_base(name: &str) -> &str {
    base_name(name)
}

/// Allocates names that do not clash with a set of names already in use.
#[derive(Debug, Clone, Default)]
pub struct NameSupply {
    used: BTreeSet<String>,
}

impl NameSupply {
    pub fn new<I, S>(used: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            used: used.into_iter().map(Into::into).collect(),
        }
    }

    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.used.contains(name)
    }

    /// `stem` itself when free, otherwise `stem` followed by the first free
    /// numeric suffix.
    pub fn fresh(&mut self, stem: &str) -> String {
        if self.used.insert(stem.to_string()) {
            return stem.to_string();
        }
        self.fresh_numbered(stem, 1)
    }

    /// `stem{n}` for the first free `n >= start`.
    pub fn fresh_numbered(&mut self, stem: &str, start: usize) -> String {
        let mut n = start;
        loop {
            let candidate = format!("{stem}{n}");
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
            n += 1;
        }
    }
}
