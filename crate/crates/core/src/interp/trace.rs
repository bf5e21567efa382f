use super::{Event, Trace, TraceSet};

/// Traces cut short by a transformation-introduced `assume` correspond to
/// no execution of the source program.
fn is_spurious(t: &Trace) -> bool {
    matches!(t.last(), Some(Event::AssumeBlocked { synthetic: true, .. }))
}

fn project(set: &TraceSet, keep: &impl Fn(&str, &str) -> bool) -> TraceSet {
    set.iter()
        .filter(|t| !is_spurious(t))
        .map(|t| Trace {
            events: t
                .events
                .iter()
                .filter(|e| match e {
                    Event::Assign { proc, var, .. } => keep(proc, var),
                    _ => true,
                })
                .cloned()
                .collect(),
        })
        .collect()
}

pub fn traces_equivalent(a: &TraceSet, b: &TraceSet) -> bool {
    traces_equivalent_by(a, b, |_, _| true)
}

/// Compare trace sets, keeping only assignment events for which
/// `keep(proc, var)` holds.
pub fn traces_equivalent_by(a: &TraceSet, b: &TraceSet, keep: impl Fn(&str, &str) -> bool) -> bool {
    project(a, &keep) == project(b, &keep)
}
