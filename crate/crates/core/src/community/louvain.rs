//! Greedy optimisation of linearised Markov stability.
//!
//! For Markov time `t` the quality of a partition is
//!
//! ```text
//! r(t) = (1 - t) + sum_c [ t * in_c / 2m - (tot_c / 2m)^2 ]
//! ```
//!
//! where `in_c` is the weight inside community `c` (both directions) and
//! `tot_c` its total degree. At `t = 1` this is modularity; smaller `t`
//! favours finer partitions, larger `t` coarser ones (resolution `1/t`).
//! It is maximised by local node moves followed by aggregation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::graph::DirectedGraph;
use crate::numeric::Scalar;
use crate::rng::Rng;

/// Undirected weighted graph over `0..n`, with self-loop weights for
/// aggregated nodes.
#[derive(Clone, Debug)]
pub struct WeightedGraph<T> {
    names: Vec<String>,
    /// Neighbour lists, sorted by neighbour, excluding self-loops.
    adj: Vec<Vec<(usize, T)>>,
    /// `A_ii`, counted over ordered pairs.
    self_loops: Vec<T>,
    degree: Vec<T>,
    total: T,
}

impl<T: Scalar> WeightedGraph<T> {
    /// Collapses directions and sums weights; `weight` is evaluated on each
    /// directed edge.
    pub fn from_directed<G: DirectedGraph>(g: &G, weight: impl Fn(&str, &str) -> T) -> Self {
        let names: Vec<String> = g.nodes().iter().cloned().collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut sym: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (a, b) in g.edge_pairs() {
            let (i, j) = (index[a], index[b]);
            let key = (i.min(j), i.max(j));
            *sym.entry(key).or_insert_with(T::zero) += weight(a, b);
        }
        let mut adj = vec![Vec::new(); names.len()];
        for (&(i, j), &w) in &sym {
            if w > T::zero() {
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
        for list in &mut adj {
            list.sort_by_key(|(j, _)| *j);
        }
        let self_loops = vec![T::zero(); names.len()];
        Self::assemble(names, adj, self_loops)
    }

    fn assemble(names: Vec<String>, adj: Vec<Vec<(usize, T)>>, self_loops: Vec<T>) -> Self {
        let degree: Vec<T> = adj
            .iter()
            .zip(&self_loops)
            .map(|(list, &s)| list.iter().map(|(_, w)| *w).sum::<T>() + s)
            .collect();
        let total = degree.iter().copied().sum();
        WeightedGraph {
            names,
            adj,
            self_loops,
            degree,
            total,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    /// Sum of degrees, `2m`.
    pub fn total_weight(&self) -> T {
        self.total
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.node_count()];
        let mut count = 0;
        for start in 0..self.node_count() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Linearised stability of `labels` (one label per node) at time `t`.
    pub fn quality(&self, labels: &[usize], t: T) -> T {
        if self.total <= T::zero() {
            return T::zero();
        }
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut inner = vec![T::zero(); k];
        let mut tot = vec![T::zero(); k];
        for u in 0..self.node_count() {
            let c = labels[u];
            tot[c] += self.degree[u];
            inner[c] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                if labels[v] == c {
                    inner[c] += w;
                }
            }
        }
        let m2 = self.total;
        let mut q = T::one() - t;
        for c in 0..k {
            let share = tot[c] / m2;
            q += t * inner[c] / m2 - share * share;
        }
        q
    }

    fn aggregate(&self, labels: &[usize], k: usize) -> WeightedGraph<T> {
        let mut self_loops = vec![T::zero(); k];
        let mut links: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); k];
        for u in 0..self.node_count() {
            let c = labels[u];
            self_loops[c] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                let d = labels[v];
                if d == c {
                    self_loops[c] += w;
                } else {
                    *links[c].entry(d).or_insert_with(T::zero) += w;
                }
            }
        }
        let adj = links.into_iter().map(|m| m.into_iter().collect()).collect();
        let names = (0..k).map(|c| c.to_string()).collect();
        Self::assemble(names, adj, self_loops)
    }
}

#[derive(Clone, Debug)]
pub struct LouvainRun<T> {
    /// Community of each original node, numbered densely.
    pub labels: Vec<usize>,
    pub quality: T,
    /// Quality after each aggregation level, starting from singletons.
    pub trajectory: Vec<T>,
}

fn relabel_dense(labels: &mut [usize]) -> usize {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    // first-seen order keeps the numbering stable
    let mut order = Vec::new();
    for &l in labels.iter() {
        if let std::collections::btree_map::Entry::Vacant(e) = map.entry(l) {
            e.insert(order.len());
            order.push(l);
        }
    }
    for l in labels.iter_mut() {
        *l = map[l];
    }
    order.len()
}

/// Moves nodes between neighbouring communities until no single move
/// improves the quality. Returns whether anything moved.
fn local_moves<T: Scalar>(g: &WeightedGraph<T>, labels: &mut [usize], t: T, rng: &mut Rng) -> bool {
    let n = g.node_count();
    let m2 = g.total;
    let mut tot = vec![T::zero(); n];
    for u in 0..n {
        tot[labels[u]] += g.degree[u];
    }
    let mut order: Vec<usize> = (0..n).collect();
    let eps = T::of(1e-12);
    let mut moved_any = false;
    let mut link_to: BTreeMap<usize, T> = BTreeMap::new();
    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &u in &order {
            let own = labels[u];
            let ku = g.degree[u];
            link_to.clear();
            for &(v, w) in &g.adj[u] {
                *link_to.entry(labels[v]).or_insert_with(T::zero) += w;
            }
            tot[own] -= ku;
            let gain = |c: usize, k_uc: T| t * k_uc - tot[c] * ku / m2;
            let own_link = link_to.get(&own).copied().unwrap_or_else(T::zero);
            let mut best = own;
            let mut best_gain = gain(own, own_link);
            for (&c, &k_uc) in &link_to {
                if c == own {
                    continue;
                }
                let candidate = gain(c, k_uc);
                if candidate > best_gain + eps {
                    best = c;
                    best_gain = candidate;
                }
            }
            tot[best] += ku;
            if best != own {
                labels[u] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            return moved_any;
        }
    }
}

/// One randomised multi-level run.
pub fn louvain<T: Scalar>(g: &WeightedGraph<T>, t: T, rng: &mut Rng) -> LouvainRun<T> {
    let n = g.node_count();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut trajectory = vec![g.quality(&labels, t)];
    if g.total <= T::zero() {
        return LouvainRun {
            quality: trajectory[0],
            labels,
            trajectory,
        };
    }
    let mut level = g.clone();
    loop {
        let mut level_labels: Vec<usize> = (0..level.node_count()).collect();
        let moved = local_moves(&level, &mut level_labels, t, rng);
        if !moved {
            break;
        }
        let k = relabel_dense(&mut level_labels);
        for l in labels.iter_mut() {
            *l = level_labels[*l];
        }
        trajectory.push(g.quality(&labels, t));
        if k == level.node_count() {
            break;
        }
        level = level.aggregate(&level_labels, k);
    }
    relabel_dense(&mut labels);
    LouvainRun {
        quality: g.quality(&labels, t),
        labels,
        trajectory,
    }
}
