use alignet_core::community::{
    detect_communities, follower_weights, intersect_partitions, prune_small, stability_scan, variation_of_information,
    Partition,
};
use alignet_core::graph::FollowerGraph;
use alignet_core::rng::substream;
use proptest::prelude::*;
use rand::Rng;

fn name(i: usize) -> String {
    format!("v{i:02}")
}

/// Undirected weighted adjacency from a directed graph, directions summed.
fn symmetric(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in edges {
        a[u][v] += 1.0;
        a[v][u] += 1.0;
    }
    a
}

fn modularity(a: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let m2: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / m2;
            }
        }
    }
    q / m2
}

/// Best modularity over every set partition (restricted growth strings).
fn exhaustive_best(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, a: &[Vec<f64>], best: &mut f64) {
        if i == labels.len() {
            *best = best.max(modularity(a, labels));
            return;
        }
        for c in 0..=max + 1 {
            labels[i] = c;
            rec(i + 1, max.max(c), labels, a, best);
        }
    }
    if n == 0 {
        return 0.0;
    }
    rec(1, 0, &mut labels, a, &mut best);
    best
}

fn graph(n: usize, edges: &[(usize, usize)]) -> FollowerGraph {
    FollowerGraph::from_parts((0..n).map(name), edges.iter().map(|&(a, b)| (name(a), name(b))))
}

#[test]
fn two_five_cliques_reach_the_exhaustive_optimum() {
    let mut edges = Vec::new();
    for base in [0, 5] {
        for a in base..base + 5 {
            for b in a + 1..base + 5 {
                edges.push((a, b));
            }
        }
    }
    edges.push((0, 5));
    let best = exhaustive_best(&symmetric(10, &edges));
    let det = detect_communities(&follower_weights::<f64>(&graph(10, &edges)), 1.0, 10, 3).unwrap();
    assert!((det.quality - best).abs() < 1e-9, "{} vs {}", det.quality, best);
    assert_eq!(det.partition.k(), 2);
    assert_eq!(det.partition.community_of("v00"), det.partition.community_of("v04"));
    assert_ne!(det.partition.community_of("v00"), det.partition.community_of("v05"));
}

#[test]
fn small_random_graphs_mostly_reach_the_optimum() {
    let trials = 100;
    let mut hits = 0;
    for seed in 0..trials {
        let mut rng = substream(seed, 0);
        let n = rng.random_range(3..=8);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && rng.random_bool(0.3))
            .collect();
        if edges.is_empty() {
            hits += 1;
            continue;
        }
        let g = graph(n, &edges);
        let wg = follower_weights::<f64>(&g);
        let det = detect_communities(&wg, 1.0, 10, seed).unwrap();
        // quality reported by the detector must equal the oracle's value for its partition
        let labels: Vec<usize> = (0..n).map(|i| det.partition.community_of(&name(i)).unwrap()).collect();
        let a = symmetric(n, &edges);
        assert!((modularity(&a, &labels) - det.quality).abs() < 1e-9);
        if det.quality >= exhaustive_best(&a) - 1e-9 {
            hits += 1;
        }
    }
    assert!(hits * 100 >= 95 * trials, "{hits}/{trials}");
}

#[test]
fn planted_blocks_are_selected_by_the_scan() {
    let mut rng = substream(9, 0);
    let mut edges = Vec::new();
    for a in 0..40 {
        for b in 0..40 {
            let p = if (a < 20) == (b < 20) { 0.5 } else { 0.01 };
            if a != b && rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    let wg = follower_weights::<f64>(&graph(40, &edges));
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    let scan = stability_scan(&wg, &times, 8, 1).unwrap();
    assert_eq!(scan.selected.k(), 2);
    let truth = Partition::from_groups((0..40).map(|i| (name(i), i < 20)));
    assert!(variation_of_information::<f64>(&scan.selected, &truth).unwrap() < 1e-9);
}

fn partition_strategy(n: usize) -> impl Strategy<Value = Partition> {
    proptest::collection::vec(0usize..4, n)
        .prop_map(move |labels| Partition::from_groups((0..n).map(|i| (name(i), labels[i]))))
}

fn pair_strategy() -> impl Strategy<Value = (Partition, Partition, Partition)> {
    (1usize..12).prop_flat_map(|n| (partition_strategy(n), partition_strategy(n), partition_strategy(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn intersection_laws((a, b, c) in pair_strategy()) {
        prop_assert_eq!(intersect_partitions(&a, &a).unwrap(), a.clone());
        prop_assert_eq!(intersect_partitions(&a, &b).unwrap(), intersect_partitions(&b, &a).unwrap());
        let left = intersect_partitions(&intersect_partitions(&a, &b).unwrap(), &c).unwrap();
        let right = intersect_partitions(&a, &intersect_partitions(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        let ab = intersect_partitions(&a, &b).unwrap();
        prop_assert!(ab.k() >= a.k().max(b.k()));
    }

    #[test]
    fn vi_axioms((a, b, c) in pair_strategy()) {
        let vi = |x: &Partition, y: &Partition| variation_of_information::<f64>(x, y).unwrap();
        prop_assert!(vi(&a, &a).abs() < 1e-12);
        prop_assert!((vi(&a, &b) - vi(&b, &a)).abs() < 1e-12);
        prop_assert!(vi(&a, &c) <= vi(&a, &b) + vi(&b, &c) + 1e-9);
        prop_assert_eq!(vi(&a, &b) < 1e-9, a == b);
        // relabelling the communities does not change anything
        let relabelled = Partition::from_groups(a.assignment().iter().map(|(u, &k)| (u.clone(), 100 - k)));
        prop_assert!(vi(&a, &relabelled).abs() < 1e-12);
    }

    #[test]
    fn prune_keeps_only_large_cells(a in (1usize..12).prop_flat_map(partition_strategy), min in 1usize..4) {
        match prune_small(&a, min) {
            Ok((kept, removed)) => {
                prop_assert!(kept.sizes().iter().all(|&s| s >= min));
                prop_assert_eq!(kept.len() + removed.len(), a.len());
            }
            Err(_) => prop_assert!(a.sizes().iter().all(|&s| s < min)),
        }
    }
}

#[test]
fn vi_four_node_case() {
    let p = |groups: [usize; 4]| Partition::from_groups(["a", "b", "c", "d"].iter().zip(groups).map(|(u, g)| (u.to_string(), g)));
    let vi = variation_of_information::<f64>(&p([0, 0, 1, 1]), &p([0, 1, 0, 1])).unwrap();
    assert!((vi - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
    let cells = intersect_partitions(&p([0, 0, 1, 1]), &p([0, 1, 0, 1])).unwrap();
    assert_eq!(cells.k(), 4);
}
