//! Small planted fixtures for statistical tests.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::graph::{FollowerGraph, InteractionGraph, KindCounts, MentionEdge};
use crate::rng::substream;

fn edge(sentiment: f64) -> MentionEdge {
    MentionEdge {
        mean_sentiment: sentiment,
        counts: KindCounts { original: 1, reply: 0, retweet: 0 },
    }
}

fn node(i: usize) -> String {
    format!("n{i:03}")
}

/// `n` nodes, `m` distinct random directed edges, i.i.d. uniform sentiments in [-4, 4].
pub fn iid_sentiment_graph(n: usize, m: usize, seed: u64) -> InteractionGraph {
    let mut rng = substream(seed, 0);
    let pairs = n * (n - 1);
    let picked = sample(&mut rng, pairs, m.min(pairs));
    let mut edges = Vec::with_capacity(m);
    for p in picked.into_iter() {
        let a = p / (n - 1);
        let mut b = p % (n - 1);
        if b >= a {
            b += 1;
        }
        edges.push(((node(a), node(b)), edge(rng.random_range(-4.0..=4.0))));
    }
    InteractionGraph::from_parts(std::iter::empty(), edges).expect("valid fixture")
}

/// `groups` groups of `size` nodes, edges only inside groups with probability
/// `p`, and every edge of a group carrying that group's sentiment. In- and
/// out-sentiment coincide for every user.
pub fn copy_sentiment_graph(groups: usize, size: usize, p: f64, seed: u64) -> InteractionGraph {
    let mut rng = substream(seed, 0);
    let mut edges = Vec::new();
    for g in 0..groups {
        let s = -3.5 + 7.0 * (g as f64 + rng.random::<f64>() * 0.5) / groups as f64;
        let base = g * size;
        for a in base..base + size {
            // a ring keeps every user with both in- and out-edges
            let next = base + (a - base + 1) % size;
            edges.push(((node(a), node(next)), edge(s)));
            for b in base..base + size {
                if b != a && b != next && rng.random_bool(p) {
                    edges.push(((node(a), node(b)), edge(s)));
                }
            }
        }
    }
    InteractionGraph::from_parts(std::iter::empty(), edges).expect("valid fixture")
}

/// Two undirected cliques of `size` nodes labelled `'p'` and `'n'`, joined by one edge.
pub fn two_cliques(size: usize) -> (FollowerGraph, BTreeMap<String, char>) {
    let mut edges = Vec::new();
    let mut labels = BTreeMap::new();
    for (c, label) in [(0, 'p'), (1, 'n')] {
        let base = c * size;
        for a in base..base + size {
            labels.insert(node(a), label);
            for b in base..base + size {
                if a != b {
                    edges.push((node(a), node(b)));
                }
            }
        }
    }
    edges.push((node(0), node(size)));
    edges.push((node(size), node(0)));
    (FollowerGraph::from_parts(std::iter::empty(), edges), labels)
}

/// `per` points around each centre with isotropic noise `sd`; returns the
/// points and their blob index.
pub fn gaussian_blobs(centres: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = substream(seed, 0);
    let noise = Normal::new(0.0, sd).expect("sd >= 0");
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (b, c) in centres.iter().enumerate() {
        for _ in 0..per {
            points.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
            truth.push(b);
        }
    }
    (points, truth)
}
