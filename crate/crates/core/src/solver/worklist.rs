use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::constraints::{Constraint, ConstraintSet};
use super::naive::export;
use super::{PointsTo, Site, NULL_SITE};

#[derive(Default)]
struct Node {
    pts: BTreeSet<Site>,
    delta: BTreeSet<Site>,
    succs: Vec<usize>,
    succ_set: HashSet<usize>,
    loads: Vec<(usize, usize)>,
    stores: Vec<(usize, usize)>,
    admits_null: bool,
}

/// Constraint-graph solver with difference propagation. Nodes are the
/// variables plus one node per `(site, field)` pair, created on demand.
struct Graph {
    nodes: Vec<Node>,
    field_nodes: HashMap<(Site, usize), usize>,
    worklist: Vec<usize>,
}

impl Graph {
    fn field_node(&mut self, site: Site, field: usize) -> usize {
        if let Some(&n) = self.field_nodes.get(&(site, field)) {
            return n;
        }
        let n = self.nodes.len();
        self.nodes.push(Node { admits_null: true, ..Node::default() });
        self.field_nodes.insert((site, field), n);
        n
    }

    fn propagate<'a>(&mut self, to: usize, sites: impl IntoIterator<Item = &'a Site>) {
        let node = &mut self.nodes[to];
        let was_idle = node.delta.is_empty();
        for &s in sites {
            if (s != NULL_SITE || node.admits_null) && node.pts.insert(s) {
                node.delta.insert(s);
            }
        }
        if was_idle && !node.delta.is_empty() {
            self.worklist.push(to);
        }
    }

    fn add_edge(&mut self, from: usize, to: usize) {
        if from == to || !self.nodes[from].succ_set.insert(to) {
            return;
        }
        self.nodes[from].succs.push(to);
        let pts: Vec<Site> = self.nodes[from].pts.iter().copied().collect();
        self.propagate(to, &pts);
    }

    fn run(&mut self) {
        while let Some(n) = self.worklist.pop() {
            let delta = std::mem::take(&mut self.nodes[n].delta);
            if delta.is_empty() {
                continue;
            }
            let loads = self.nodes[n].loads.clone();
            let stores = self.nodes[n].stores.clone();
            for &site in delta.iter().filter(|&&s| s != NULL_SITE) {
                for &(field, dst) in &loads {
                    let f = self.field_node(site, field);
                    self.add_edge(f, dst);
                }
                for &(field, src) in &stores {
                    let f = self.field_node(site, field);
                    self.add_edge(src, f);
                }
            }
            let succs = self.nodes[n].succs.clone();
            for s in succs {
                self.propagate(s, &delta);
            }
        }
    }
}

pub fn solve_worklist(set: &ConstraintSet) -> PointsTo {
    let mut g = Graph {
        nodes: set.tagged.iter().map(|&t| Node { admits_null: !t, ..Node::default() }).collect(),
        field_nodes: HashMap::new(),
        worklist: Vec::new(),
    };
    for c in &set.constraints {
        match *c {
            Constraint::Copy { dst, src } => g.add_edge(src, dst),
            Constraint::Load { dst, src, field } => g.nodes[src].loads.push((field, dst)),
            Constraint::Store { base, field, src } => g.nodes[base].stores.push((field, src)),
            Constraint::Base { .. } | Constraint::FieldInit { .. } => {}
        }
    }
    for c in &set.constraints {
        match *c {
            Constraint::Base { dst, site } => g.propagate(dst, &[site]),
            Constraint::FieldInit { site } => {
                for f in 0..set.fields.len() {
                    let n = g.field_node(site, f);
                    g.propagate(n, &[NULL_SITE]);
                }
            }
            _ => {}
        }
    }
    g.run();

    let nvars = set.vars.len();
    let pt: Vec<BTreeSet<Site>> = g.nodes[..nvars].iter().map(|n| n.pts.clone()).collect();
    let fpt: BTreeMap<(Site, usize), BTreeSet<Site>> =
        g.field_nodes.iter().map(|(&k, &n)| (k, g.nodes[n].pts.clone())).collect();
    export(set, pt, fpt)
}
