use std::collections::{BTreeMap, BTreeSet};

use super::constraints::{Constraint, ConstraintSet};
use super::{PointsTo, Site, NULL_SITE};

/// Where the tagged filter runs inside the fixpoint loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterSchedule {
    /// After every constraint.
    #[default]
    PerStatement,
    /// Once after each full pass over the constraints.
    PerIteration,
}

/// Round-robin fixpoint: apply every constraint until nothing changes.
pub fn solve_naive(set: &ConstraintSet) -> PointsTo {
    solve_naive_with(set, FilterSchedule::PerStatement)
}

pub fn solve_naive_with(set: &ConstraintSet, schedule: FilterSchedule) -> PointsTo {
    let mut pt: Vec<BTreeSet<Site>> = vec![BTreeSet::new(); set.vars.len()];
    let mut fpt: BTreeMap<(Site, usize), BTreeSet<Site>> = BTreeMap::new();
    let per_statement = schedule == FilterSchedule::PerStatement;
    loop {
        let snapshot = (!per_statement).then(|| (pt.clone(), fpt.clone()));
        let mut changed = false;
        for c in &set.constraints {
            match *c {
                Constraint::Base { dst, site } => {
                    changed |= add_var(&mut pt, set, dst, [site], per_statement);
                }
                Constraint::Copy { dst, src } => {
                    let from = pt[src].clone();
                    changed |= add_var(&mut pt, set, dst, from, per_statement);
                }
                Constraint::Load { dst, src, field } => {
                    let mut from = BTreeSet::new();
                    for &i in pt[src].iter().filter(|&&i| i != NULL_SITE) {
                        if let Some(s) = fpt.get(&(i, field)) {
                            from.extend(s.iter().copied());
                        }
                    }
                    changed |= add_var(&mut pt, set, dst, from, per_statement);
                }
                Constraint::Store { base, field, src } => {
                    for &i in pt[base].iter().filter(|&&i| i != NULL_SITE) {
                        let cell = fpt.entry((i, field)).or_default();
                        let before = cell.len();
                        cell.extend(pt[src].iter().copied());
                        changed |= cell.len() != before;
                    }
                }
                Constraint::FieldInit { site } => {
                    for f in 0..set.fields.len() {
                        changed |= fpt.entry((site, f)).or_default().insert(NULL_SITE);
                    }
                }
            }
        }
        if let Some(before) = snapshot {
            for (v, s) in pt.iter_mut().enumerate() {
                if set.tagged[v] {
                    s.remove(&NULL_SITE);
                }
            }
            changed = before != (pt.clone(), fpt.clone());
        }
        if !changed {
            break;
        }
    }
    export(set, pt, fpt)
}

fn add_var(
    pt: &mut [BTreeSet<Site>],
    set: &ConstraintSet,
    dst: usize,
    sites: impl IntoIterator<Item = Site>,
    filter: bool,
) -> bool {
    let target = &mut pt[dst];
    let before = target.len();
    target.extend(sites);
    if filter && set.tagged[dst] {
        target.remove(&NULL_SITE);
    }
    target.len() != before
}

pub(super) fn export(
    set: &ConstraintSet,
    pt: Vec<BTreeSet<Site>>,
    fpt: BTreeMap<(Site, usize), BTreeSet<Site>>,
) -> PointsTo {
    PointsTo {
        vars: pt
            .into_iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(v, s)| (set.vars[v].clone(), s))
            .collect(),
        fields: fpt
            .into_iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|((site, f), s)| ((site, set.fields[f].clone()), s))
            .collect(),
    }
}
