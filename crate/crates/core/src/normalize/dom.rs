use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{Cfg, Procedure};

/// `dom[b]` is the set of blocks dominating `b` (including `b`). Blocks
/// unreachable from the entry are dominated only by themselves.
pub fn dominator_sets(cfg: &Cfg) -> Vec<BTreeSet<usize>> {
    let n = cfg.len();
    let reachable = cfg.reachable();
    let all: BTreeSet<usize> = (0..n).filter(|&i| reachable[i]).collect();
    let mut dom: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| if i == 0 || !reachable[i] { BTreeSet::from([i]) } else { all.clone() })
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for b in 1..n {
            if !reachable[b] {
                continue;
            }
            let mut new: Option<BTreeSet<usize>> = None;
            for &p in cfg.preds[b].iter().filter(|&&p| reachable[p]) {
                new = Some(match new {
                    None => dom[p].clone(),
                    Some(acc) => acc.intersection(&dom[p]).copied().collect(),
                });
            }
            let mut new = new.unwrap_or_default();
            new.insert(b);
            if new != dom[b] {
                dom[b] = new;
                changed = true;
            }
        }
    }
    dom
}

/// Dominator sets keyed by block label.
pub fn dominators(proc: &Procedure) -> BTreeMap<String, BTreeSet<String>> {
    let sets = dominator_sets(&proc.cfg());
    sets.into_iter()
        .enumerate()
        .map(|(b, ds)| {
            let label = proc.blocks[b].label.clone();
            (label, ds.into_iter().map(|d| proc.blocks[d].label.clone()).collect())
        })
        .collect()
}
