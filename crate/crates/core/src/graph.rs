//! Mention and follower graphs.
//!
//! The mention graph has an edge `a -> b` when `a` mentioned `b` in at least
//! one message; the edge carries the mean difference score of those messages
//! and how many of them were originals, replies and retweets. The follower
//! graph is the unweighted analogue.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FollowerEdgeList, MessageKind};
use crate::error::{Error, Result};
use crate::lexicon::SentimentScore;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KindCounts {
    pub original: u32,
    pub reply: u32,
    pub retweet: u32,
}

impl KindCounts {
    pub fn get(&self, kind: MessageKind) -> u32 {
        match kind {
            MessageKind::Original => self.original,
            MessageKind::Reply => self.reply,
            MessageKind::Retweet => self.retweet,
        }
    }

    pub fn add(&mut self, kind: MessageKind, n: u32) {
        match kind {
            MessageKind::Original => self.original += n,
            MessageKind::Reply => self.reply += n,
            MessageKind::Retweet => self.retweet += n,
        }
    }

    pub fn total(&self) -> u32 {
        self.original + self.reply + self.retweet
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionEdge {
    pub mean_sentiment: f64,
    pub counts: KindCounts,
}

pub type NodeSet = BTreeSet<String>;

/// Operations shared by the mention and follower graphs.
pub trait DirectedGraph: Sized {
    fn nodes(&self) -> &NodeSet;

    fn edge_pairs(&self) -> Vec<(&str, &str)>;

    fn has_edge(&self, source: &str, target: &str) -> bool;

    fn edge_count(&self) -> usize;

    /// Subgraph on `nodes`, keeping edges with both endpoints in `nodes`
    /// for which `keep_edge` holds.
    fn restrict(&self, nodes: &NodeSet, keep_edge: &dyn Fn(&str, &str) -> bool) -> Self;

    fn node_count(&self) -> usize {
        self.nodes().len()
    }

    fn is_empty(&self) -> bool {
        self.nodes().is_empty()
    }

    fn induced(&self, nodes: &NodeSet) -> Self {
        self.restrict(nodes, &|_, _| true)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteractionGraph {
    nodes: NodeSet,
    edges: BTreeMap<(String, String), MentionEdge>,
}

impl InteractionGraph {
    /// Builds a graph from explicit parts; edge endpoints are added to the node set.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = String>,
        edges: impl IntoIterator<Item = ((String, String), MentionEdge)>,
    ) -> Result<Self> {
        let mut nodes: NodeSet = nodes.into_iter().collect();
        let mut map = BTreeMap::new();
        for ((a, b), e) in edges {
            if a == b {
                return Err(Error::Consistency(format!("self-loop on {a}")));
            }
            if e.counts.total() == 0 {
                return Err(Error::Consistency(format!("edge {a}->{b} has no mentions")));
            }
            if !(-4.0..=4.0).contains(&e.mean_sentiment) {
                return Err(Error::Consistency(format!(
                    "edge {a}->{b} sentiment {} outside [-4,4]",
                    e.mean_sentiment
                )));
            }
            nodes.insert(a.clone());
            nodes.insert(b.clone());
            map.insert((a, b), e);
        }
        Ok(InteractionGraph { nodes, edges: map })
    }

    pub fn edges(&self) -> &BTreeMap<(String, String), MentionEdge> {
        &self.edges
    }

    pub fn edge(&self, source: &str, target: &str) -> Option<&MentionEdge> {
        self.edges.get(&(source.to_string(), target.to_string()))
    }

    /// Same topology with every edge sentiment replaced, in edge order.
    pub fn with_sentiments(&self, sentiments: &[f64]) -> Self {
        assert_eq!(sentiments.len(), self.edges.len());
        let edges = self
            .edges
            .iter()
            .zip(sentiments)
            .map(|((k, e), &s)| {
                (
                    k.clone(),
                    MentionEdge {
                        mean_sentiment: s,
                        counts: e.counts,
                    },
                )
            })
            .collect();
        InteractionGraph {
            nodes: self.nodes.clone(),
            edges,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "source,target,mean_sentiment,n_original,n_reply,n_retweet").unwrap();
        for ((a, b), e) in &self.edges {
            writeln!(
                out,
                "{a},{b},{},{},{},{}",
                e.mean_sentiment, e.counts.original, e.counts.reply, e.counts.retweet
            )
            .unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads an edge list; `nodes` adds nodes that have no edges.
    pub fn read_csv(path: &Path, nodes: Option<&NodeSet>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            source: String,
            target: String,
            mean_sentiment: f64,
            n_original: u32,
            n_reply: u32,
            n_retweet: u32,
        }
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut edges = Vec::new();
        for row in reader.deserialize() {
            let r: Row = row?;
            edges.push((
                (r.source, r.target),
                MentionEdge {
                    mean_sentiment: r.mean_sentiment,
                    counts: KindCounts {
                        original: r.n_original,
                        reply: r.n_reply,
                        retweet: r.n_retweet,
                    },
                },
            ));
        }
        InteractionGraph::from_parts(nodes.into_iter().flatten().cloned(), edges)
    }
}

impl DirectedGraph for InteractionGraph {
    fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    fn edge_pairs(&self) -> Vec<(&str, &str)> {
        self.edges.keys().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edge(source, target).is_some()
    }

    fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn restrict(&self, nodes: &NodeSet, keep_edge: &dyn Fn(&str, &str) -> bool) -> Self {
        let edges = self
            .edges
            .iter()
            .filter(|((a, b), _)| nodes.contains(a) && nodes.contains(b) && keep_edge(a, b))
            .map(|(k, e)| (k.clone(), *e))
            .collect();
        InteractionGraph {
            nodes: self.nodes.intersection(nodes).cloned().collect(),
            edges,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FollowerGraph {
    nodes: NodeSet,
    edges: BTreeSet<(String, String)>,
}

impl FollowerGraph {
    pub fn from_edge_list(list: &FollowerEdgeList) -> Self {
        Self::from_parts(std::iter::empty(), list.edges().iter().cloned())
    }

    /// Edge endpoints are added to the node set; self-loops are dropped.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = String>,
        edges: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        let mut nodes: NodeSet = nodes.into_iter().collect();
        let edges: BTreeSet<(String, String)> = edges.into_iter().filter(|(a, b)| a != b).collect();
        for (a, b) in &edges {
            nodes.insert(a.clone());
            nodes.insert(b.clone());
        }
        FollowerGraph { nodes, edges }
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let list = FollowerEdgeList::new(self.edges.iter().cloned());
        list.write_csv(path)
    }

    pub fn read_csv(path: &Path, nodes: Option<&NodeSet>) -> Result<Self> {
        let list = crate::corpus::parse_followers(path)?;
        Ok(Self::from_parts(nodes.into_iter().flatten().cloned(), list.edges().iter().cloned()))
    }
}

impl DirectedGraph for FollowerGraph {
    fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    fn edge_pairs(&self) -> Vec<(&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edges.contains(&(source.to_string(), target.to_string()))
    }

    fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn restrict(&self, nodes: &NodeSet, keep_edge: &dyn Fn(&str, &str) -> bool) -> Self {
        FollowerGraph {
            nodes: self.nodes.intersection(nodes).cloned().collect(),
            edges: self
                .edges
                .iter()
                .filter(|(a, b)| nodes.contains(a) && nodes.contains(b) && keep_edge(a, b))
                .cloned()
                .collect(),
        }
    }
}

pub fn write_nodes(nodes: &NodeSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    for n in nodes {
        out.push_str(n);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_nodes(path: &Path) -> Result<NodeSet> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// One edge per ordered (author, mentioned user) pair, self-mentions dropped.
pub fn build_mention_graph(
    corpus: &Corpus,
    scores: &BTreeMap<String, SentimentScore>,
) -> Result<InteractionGraph> {
    let mut acc: BTreeMap<(String, String), (i64, KindCounts)> = BTreeMap::new();
    for m in corpus.messages() {
        let score = scores
            .get(&m.id)
            .ok_or_else(|| Error::Consistency(format!("no sentiment score for message {}", m.id)))?;
        for target in &m.mentions {
            if *target == m.author {
                continue;
            }
            let entry = acc.entry((m.author.clone(), target.clone())).or_default();
            entry.0 += i64::from(score.difference());
            entry.1.add(m.kind, 1);
        }
    }
    let edges = acc.into_iter().map(|(k, (sum, counts))| {
        let mean_sentiment = sum as f64 / f64::from(counts.total());
        (k, MentionEdge { mean_sentiment, counts })
    });
    InteractionGraph::from_parts(std::iter::empty(), edges)
}

/// Mutual edges only; nodes left without edges are dropped.
pub fn reciprocal_subgraph<G: DirectedGraph>(g: &G) -> G {
    let mutual: NodeSet = g
        .edge_pairs()
        .into_iter()
        .filter(|(a, b)| g.has_edge(b, a))
        .flat_map(|(a, b)| [a.to_string(), b.to_string()])
        .collect();
    g.restrict(&mutual, &|a, b| g.has_edge(b, a))
}

/// Weakly connected components, each sorted, ordered by smallest member.
pub fn weak_components<G: DirectedGraph>(g: &G) -> Vec<Vec<String>> {
    let ids: Vec<&String> = g.nodes().iter().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in g.edge_pairs() {
        let (ra, rb) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..ids.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(ids[i].clone());
    }
    // roots are the smallest index in each component, so map order = order by min id
    groups.into_values().collect()
}

/// Largest weakly connected component; ties go to the component with the
/// lexicographically smallest member.
pub fn largest_connected_component<G: DirectedGraph>(g: &G) -> G {
    let mut best: Option<Vec<String>> = None;
    for comp in weak_components(g) {
        if best.as_ref().is_none_or(|b| comp.len() > b.len()) {
            best = Some(comp);
        }
    }
    let nodes: NodeSet = best.unwrap_or_default().into_iter().collect();
    g.induced(&nodes)
}

/// Restricts both reciprocal networks to the users found in the largest
/// connected component of each.
pub fn align_networks(
    mention_recip: &InteractionGraph,
    follower_recip: &FollowerGraph,
) -> Result<(InteractionGraph, FollowerGraph)> {
    let m = largest_connected_component(mention_recip);
    let f = largest_connected_component(follower_recip);
    let common: NodeSet = m.nodes().intersection(f.nodes()).cloned().collect();
    if common.is_empty() {
        return Err(Error::Consistency(format!(
            "mention and follower components share no users ({} vs {} nodes)",
            m.node_count(),
            f.node_count()
        )));
    }
    Ok((mention_recip.induced(&common), follower_recip.induced(&common)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub links: usize,
    pub reciprocal_links: usize,
    pub avg_out_degree: f64,
    pub transitivity: f64,
}

/// Closed and total connected triples (counted per centre node) of the
/// undirected simple projection.
pub fn triple_counts<G: DirectedGraph>(g: &G) -> (u64, u64) {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (a, b) in g.edge_pairs() {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut closed = 0u64;
    let mut total = 0u64;
    for neigh in adj.values() {
        let d = neigh.len() as u64;
        total += d * d.saturating_sub(1) / 2;
        let list: Vec<&str> = neigh.iter().copied().collect();
        for (i, a) in list.iter().enumerate() {
            let na = &adj[a];
            closed += list[i + 1..].iter().filter(|b| na.contains(*b)).count() as u64;
        }
    }
    (closed, total)
}

pub fn summary_stats<G: DirectedGraph>(g: &G) -> GraphStats {
    let nodes = g.node_count();
    let links = g.edge_count();
    let reciprocal_links = g.edge_pairs().into_iter().filter(|(a, b)| g.has_edge(b, a)).count();
    let (closed, triples) = triple_counts(g);
    GraphStats {
        nodes,
        links,
        reciprocal_links,
        avg_out_degree: if nodes == 0 { 0.0 } else { links as f64 / nodes as f64 },
        transitivity: if triples == 0 { 0.0 } else { closed as f64 / triples as f64 },
    }
}
