use std::collections::BTreeMap;

use alignet_core::aggregate::{aggregate_users, group_users, GroupLabel, GroupScheme, NeighbourMode};
use alignet_core::graph::{
    largest_connected_component, reciprocal_subgraph, summary_stats, weak_components, DirectedGraph, FollowerGraph,
    InteractionGraph, KindCounts, MentionEdge,
};
use alignet_core::rng::substream;
use rand::Rng;

fn name(i: usize) -> String {
    format!("v{i:02}")
}

fn random_adjacency(seed: u64) -> Vec<Vec<bool>> {
    let mut rng = substream(seed, 0);
    let n = rng.random_range(1..=12);
    let p = rng.random_range(0.0..0.6);
    (0..n).map(|a| (0..n).map(|b| a != b && rng.random_bool(p)).collect()).collect()
}

fn follower_graph(adj: &[Vec<bool>]) -> FollowerGraph {
    let edges = (0..adj.len()).flat_map(|a| (0..adj.len()).filter(move |&b| adj[a][b]).map(move |b| (name(a), name(b))));
    FollowerGraph::from_parts((0..adj.len()).map(name), edges)
}

#[test]
fn summary_stats_match_enumeration() {
    for seed in 0..500 {
        let adj = random_adjacency(seed);
        let n = adj.len();
        let g = follower_graph(&adj);
        let und = |a: usize, b: usize| adj[a][b] || adj[b][a];
        let links: usize = adj.iter().flatten().filter(|&&x| x).count();
        let mut recip = 0;
        let mut triangles = 0u64;
        let mut paths = 0u64;
        for a in 0..n {
            for b in 0..n {
                if adj[a][b] && adj[b][a] {
                    recip += 1;
                }
            }
        }
        // ordered (i, centre, j) with i < j, both adjacent to centre
        for c in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    if i != c && j != c && und(i, c) && und(j, c) {
                        paths += 1;
                        if und(i, j) {
                            triangles += 1;
                        }
                    }
                }
            }
        }
        let s = summary_stats(&g);
        assert_eq!(s.nodes, n, "seed {seed}");
        assert_eq!(s.links, links, "seed {seed}");
        assert_eq!(s.reciprocal_links, recip, "seed {seed}");
        assert_eq!(s.avg_out_degree, links as f64 / n as f64, "seed {seed}");
        let t = if paths == 0 { 0.0 } else { triangles as f64 / paths as f64 };
        assert_eq!(s.transitivity, t, "seed {seed}");
    }
}

#[test]
fn reciprocal_and_components_match_enumeration() {
    for seed in 0..200 {
        let adj = random_adjacency(seed);
        let n = adj.len();
        let g = follower_graph(&adj);
        let r = reciprocal_subgraph(&g);
        for a in 0..n {
            for b in 0..n {
                assert_eq!(r.has_edge(&name(a), &name(b)), adj[a][b] && adj[b][a]);
            }
        }
        // flood fill on the undirected projection
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = count;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if (adj[u][v] || adj[v][u]) && comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        assert_eq!(weak_components(&g).len(), count, "seed {seed}");
        let mut sizes = vec![0; count];
        comp.iter().for_each(|&c| sizes[c] += 1);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.node_count(), *sizes.iter().max().unwrap());
    }
}

#[test]
fn aggregates_match_direct_means() {
    let mut rng = substream(42, 0);
    let n = 10;
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(0.3) {
                let e = MentionEdge {
                    mean_sentiment: f64::from(rng.random_range(-8..=8)) / 2.0,
                    counts: KindCounts { original: 1, reply: 0, retweet: 0 },
                };
                edges.push(((name(a), name(b)), e));
            }
        }
    }
    let g = InteractionGraph::from_parts(std::iter::empty(), edges).unwrap();
    let aggs = aggregate_users(&g, NeighbourMode::Both);
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    for u in g.nodes() {
        let outs: Vec<f64> = g.edges().iter().filter(|((a, _), _)| a == u).map(|(_, e)| e.mean_sentiment).collect();
        let ins: Vec<f64> = g.edges().iter().filter(|((_, b), _)| b == u).map(|(_, e)| e.mean_sentiment).collect();
        let a = &aggs[u];
        assert_eq!(a.s_out, mean(outs));
        assert_eq!(a.s_in, mean(ins));
    }
}

#[test]
fn quartiles_match_sorted_rank_oracle() {
    for seed in 0..100 {
        let mut rng = substream(seed, 1);
        let n = rng.random_range(4..40);
        let scores: BTreeMap<String, Option<f64>> = (0..n)
            .map(|i| (name(i), (!rng.random_bool(0.1)).then(|| f64::from(rng.random_range(-20..20)) / 4.0)))
            .collect();
        let groups = group_users(&scores, GroupScheme::Quartiles).unwrap();
        let mut defined: Vec<f64> = scores.values().flatten().copied().collect();
        defined.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (defined.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            defined[lo] + (defined[hi] - defined[lo]) * (pos - lo as f64)
        };
        let bounds = [q(0.25), q(0.5), q(0.75)];
        for (u, s) in &scores {
            match s {
                Some(v) => {
                    let k = bounds.iter().filter(|b| v > b).count() as u8;
                    assert_eq!(groups[u], GroupLabel::Quartile(k), "seed {seed} value {v}");
                }
                None => assert!(!groups.contains_key(u)),
            }
        }
    }
}
