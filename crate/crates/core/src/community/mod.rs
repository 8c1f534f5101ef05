//! Community detection, partition algebra and sub-community profiles.

mod louvain;
mod partition;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use louvain::{louvain, LouvainRun, WeightedGraph};
pub use partition::{
    intersect_partitions, prune_small, subcommunity_profiles, variation_of_information, write_profiles_csv,
    Partition, SubCommunityProfile,
};

use crate::error::{Error, Result};
use crate::graph::{FollowerGraph, InteractionGraph};
use crate::numeric::Scalar;
use crate::rng::{derive_seed, substream};

/// Mention graph weighted by mention counts, directions summed.
pub fn mention_weights<T: Scalar>(g: &InteractionGraph) -> WeightedGraph<T> {
    WeightedGraph::from_directed(g, |a, b| T::from_u32(g.edge(a, b).map_or(0, |e| e.counts.total())).unwrap())
}

/// Follower graph with unit weights, directions summed.
pub fn follower_weights<T: Scalar>(g: &FollowerGraph) -> WeightedGraph<T> {
    WeightedGraph::from_directed(g, |_, _| T::one())
}

#[derive(Clone, Debug)]
pub struct Detection<T> {
    pub partition: Partition,
    pub quality: T,
    /// Best partition of every restart, in restart order.
    pub runs: Vec<(Partition, T)>,
}

fn quality_tie<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::of(1e-12) * (T::one() + a.abs().max(b.abs()))
}

/// Best of `restarts` seeded runs at Markov time `markov_time`; ties go to
/// fewer communities, then to the canonical assignment order.
pub fn detect_communities<T: Scalar>(
    g: &WeightedGraph<T>,
    markov_time: T,
    restarts: usize,
    seed: u64,
) -> Result<Detection<T>> {
    if g.node_count() == 0 {
        return Err(Error::arg("cannot detect communities in an empty graph"));
    }
    if markov_time <= T::zero() {
        return Err(Error::arg(format!("Markov time must be positive, got {markov_time}")));
    }
    if restarts == 0 {
        return Err(Error::arg("restarts must be positive"));
    }
    let runs: Vec<(Partition, T)> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let run = louvain(g, markov_time, &mut rng);
            (Partition::from_labels(g.names(), &run.labels), run.quality)
        })
        .collect();
    let mut best = 0;
    for i in 1..runs.len() {
        let (ref p, q) = runs[i];
        let (ref bp, bq) = runs[best];
        let better = if quality_tie(q, bq) {
            (p.k(), p.assignment().values().collect::<Vec<_>>())
                < (bp.k(), bp.assignment().values().collect::<Vec<_>>())
        } else {
            q > bq
        };
        if better {
            best = i;
        }
    }
    Ok(Detection {
        partition: runs[best].0.clone(),
        quality: runs[best].1,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub time: f64,
    pub k: usize,
    pub quality: f64,
    /// Mean pairwise variation of information between restarts.
    pub mean_vi: f64,
    /// One community per connected component, or all singletons.
    pub trivial: bool,
}

#[derive(Clone, Debug)]
pub struct StabilityScan {
    pub selected: Partition,
    pub selected_time: f64,
    pub points: Vec<ScanPoint>,
}

/// Scans Markov times and selects the most reproducible partition: minimal
/// mean pairwise VI across restarts, ties to fewer communities, then to the
/// earlier time. Trivial partitions are only chosen when every time yields one.
pub fn stability_scan<T: Scalar>(
    g: &WeightedGraph<T>,
    times: &[T],
    restarts: usize,
    seed: u64,
) -> Result<StabilityScan> {
    if times.is_empty() {
        return Err(Error::arg("stability scan needs at least one Markov time"));
    }
    let components = g.component_count();
    let mut points = Vec::with_capacity(times.len());
    let mut partitions = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let det = detect_communities(g, t, restarts, derive_seed(seed, i as u64))?;
        let mut vi_sum = T::zero();
        let mut pairs = 0usize;
        for a in 0..det.runs.len() {
            for b in a + 1..det.runs.len() {
                vi_sum += variation_of_information::<T>(&det.runs[a].0, &det.runs[b].0)?;
                pairs += 1;
            }
        }
        let mean_vi = if pairs == 0 { 0.0 } else { (vi_sum / T::of_usize(pairs)).to_f64_lossy() };
        let k = det.partition.k();
        points.push(ScanPoint {
            time: t.to_f64_lossy(),
            k,
            quality: det.quality.to_f64_lossy(),
            mean_vi,
            trivial: k <= components || k == g.node_count(),
        });
        partitions.push(det.partition);
    }
    let any_nontrivial = points.iter().any(|p| !p.trivial);
    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        if any_nontrivial && p.trivial {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let bp = &points[b];
                if (p.mean_vi - bp.mean_vi).abs() <= 1e-9 {
                    p.k < bp.k
                } else {
                    p.mean_vi < bp.mean_vi
                }
            }
        };
        if better {
            best = Some(i);
        }
    }
    let best = best.expect("at least one scan point");
    Ok(StabilityScan {
        selected: partitions.swap_remove(best),
        selected_time: points[best].time,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FollowerGraph;

    fn undirected(edges: &[(String, String)]) -> FollowerGraph {
        FollowerGraph::from_parts(
            std::iter::empty(),
            edges.iter().flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())]),
        )
    }

    fn clique(prefix: &str, n: usize) -> Vec<(String, String)> {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((format!("{prefix}{i}"), format!("{prefix}{j}")));
            }
        }
        e
    }

    #[test]
    fn complete_graph_is_one_community() {
        let g = follower_weights::<f64>(&undirected(&clique("v", 6)));
        let d = detect_communities(&g, 1.0, 5, 1).unwrap();
        assert_eq!(d.partition.k(), 1);
    }

    #[test]
    fn components_are_never_merged() {
        let mut e = clique("a", 3);
        e.extend(clique("b", 4));
        let g = follower_weights::<f64>(&undirected(&e));
        assert_eq!(g.component_count(), 2);
        for t in [0.5, 1.0, 5.0] {
            let d = detect_communities(&g, t, 4, 9).unwrap();
            let p = &d.partition;
            for i in 0..3 {
                for j in 0..4 {
                    assert_ne!(p.community_of(&format!("a{i}")), p.community_of(&format!("b{j}")));
                }
            }
        }
    }

    #[test]
    fn edgeless_graph_gives_singletons() {
        let g = follower_weights::<f64>(&FollowerGraph::from_parts(["x".into(), "y".into()], std::iter::empty()));
        let d = detect_communities(&g, 1.0, 2, 0).unwrap();
        assert_eq!(d.partition.k(), 2);
        assert!(detect_communities(&follower_weights::<f64>(&FollowerGraph::default()), 1.0, 1, 0).is_err());
        assert!(detect_communities(&g, 0.0, 1, 0).is_err());
    }

    #[test]
    fn single_time_scan_returns_that_partition() {
        let mut e = clique("a", 5);
        e.extend(clique("b", 5));
        e.push(("a0".into(), "b0".into()));
        let g = follower_weights::<f64>(&undirected(&e));
        let scan = stability_scan(&g, &[1.0], 6, 4).unwrap();
        let direct = detect_communities(&g, 1.0, 6, crate::rng::derive_seed(4, 0)).unwrap();
        assert_eq!(scan.selected, direct.partition);
        assert_eq!(scan.points.len(), 1);
        assert_eq!(scan.points[0].mean_vi, 0.0);
        assert!(stability_scan::<f64>(&g, &[], 2, 0).is_err());
    }
}
