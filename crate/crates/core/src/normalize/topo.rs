use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::diagnostic::{Diagnostic, IrLocation};
use crate::ir::{Cfg, Procedure};

/// Block indices in topological order, ties broken by declaration order.
pub fn topo_indices(cfg: &Cfg) -> Option<Vec<usize>> {
    let n = cfg.len();
    let mut indegree: Vec<usize> = cfg.preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(b)) = ready.pop() {
        order.push(b);
        for &s in &cfg.succs[b] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Labels of `proc` in topological order. Fails on a cyclic CFG.
pub fn topo_sort(proc: &Procedure) -> Result<Vec<String>, Diagnostic> {
    match topo_indices(&proc.cfg()) {
        Some(order) => Ok(order.into_iter().map(|i| proc.blocks[i].label.clone()).collect()),
        None => Err(Diagnostic::error(format!(
            "procedure `{}` has a cycle in its control flow",
            proc.name
        ))
        .at(IrLocation::proc(&proc.name))),
    }
}
