//! Independent oracles over raw node and edge lists. Nothing here calls the
//! graph's own query methods.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use capweave_core::gen::{random_graph, random_project, GraphShape};
use capweave_core::{FdGraph, NodeKind, Project};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn graph_from_seed(seed: u64, max_internal: usize) -> FdGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = GraphShape {
        max_internal,
        ..GraphShape::default()
    };
    random_graph(&mut rng, &shape)
}

pub fn project_from_seed(seed: u64, max_internal: usize) -> Project {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = GraphShape {
        max_internal,
        ..GraphShape::default()
    };
    random_project(&mut rng, &shape)
}

pub struct Oracle {
    pub ids: Vec<String>,
    pub kinds: BTreeMap<String, NodeKind>,
    pub children: BTreeMap<String, Vec<String>>,
    pub parents: BTreeMap<String, Vec<String>>,
}

impl Oracle {
    pub fn new(g: &FdGraph) -> Self {
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut kinds = BTreeMap::new();
        let mut ids = Vec::new();
        for n in g.nodes() {
            ids.push(n.id.to_string());
            kinds.insert(n.id.to_string(), n.kind);
            children.entry(n.id.to_string()).or_default();
            parents.entry(n.id.to_string()).or_default();
        }
        for e in g.edges() {
            children.get_mut(e.source.as_str()).unwrap().push(e.target.to_string());
            parents.get_mut(e.target.as_str()).unwrap().push(e.source.to_string());
        }
        Self {
            ids,
            kinds,
            children,
            parents,
        }
    }

    fn walk(adj: &BTreeMap<String, Vec<String>>, start: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![start.to_string()];
        while let Some(v) = stack.pop() {
            for w in &adj[&v] {
                if out.insert(w.clone()) {
                    stack.push(w.clone());
                }
            }
        }
        out
    }

    pub fn descendants(&self, id: &str) -> BTreeSet<String> {
        Self::walk(&self.children, id)
    }

    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        Self::walk(&self.parents, id)
    }

    pub fn is_directive(&self, id: &str) -> bool {
        self.kinds[id] == NodeKind::Directive
    }

    pub fn directives(&self) -> BTreeSet<String> {
        self.ids.iter().filter(|i| self.is_directive(i)).cloned().collect()
    }

    pub fn functional(&self) -> Vec<String> {
        self.ids
            .iter()
            .filter(|i| self.kinds[*i] == NodeKind::Functional)
            .cloned()
            .collect()
    }

    pub fn directive_set(&self, id: &str) -> BTreeSet<String> {
        if self.is_directive(id) {
            return BTreeSet::from([id.to_string()]);
        }
        self.descendants(id).into_iter().filter(|d| self.is_directive(d)).collect()
    }

    /// Every non-empty antichain of functional nodes covering all directives,
    /// found by testing every subset.
    pub fn brute_force_candidates(&self) -> BTreeSet<BTreeSet<String>> {
        let f = self.functional();
        assert!(f.len() <= 16, "oracle is exponential");
        let all = self.directives();
        let desc: Vec<BTreeSet<String>> = f.iter().map(|v| self.descendants(v)).collect();
        let dsets: Vec<BTreeSet<String>> = f.iter().map(|v| self.directive_set(v)).collect();
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << f.len()) {
            let picked: Vec<usize> = (0..f.len()).filter(|i| mask & (1 << i) != 0).collect();
            let antichain = picked
                .iter()
                .all(|&a| picked.iter().all(|&b| a == b || !desc[a].contains(&f[b])));
            if !antichain {
                continue;
            }
            let covered: BTreeSet<&String> = picked.iter().flat_map(|&i| dsets[i].iter()).collect();
            if covered.len() == all.len() {
                out.insert(picked.iter().map(|&i| f[i].clone()).collect());
            }
        }
        out
    }

    /// Shortest-path level of every node from the parentless root.
    pub fn levels(&self) -> BTreeMap<String, u32> {
        let root = self.ids.iter().find(|i| self.parents[*i].is_empty()).unwrap().clone();
        let mut level = BTreeMap::from([(root.clone(), 0u32)]);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let l = level[&v];
            for w in &self.children[&v] {
                if !level.contains_key(w) {
                    level.insert(w.clone(), l + 1);
                    queue.push_back(w.clone());
                }
            }
        }
        level
    }
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}
