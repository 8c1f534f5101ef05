use std::collections::BTreeMap;

use alignet_core::graph::FollowerGraph;
use alignet_core::null_models::{
    correlation_null_test, expected_link_fractions, label_permutation_test, link_fractions, Band, LabelResampling,
    Verdict,
};
use alignet_core::rng::substream;
use alignet_core::synth::fixtures::{copy_sentiment_graph, iid_sentiment_graph, two_cliques};
use rand::Rng;

fn name(i: usize) -> String {
    format!("v{i}")
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Mean link fractions over every equally likely relabelling.
fn exhaustive_mean(g: &FollowerGraph, labels: &[char], mode: LabelResampling) -> BTreeMap<(char, char), f64> {
    let n = labels.len();
    let draws: Vec<Vec<char>> = match mode {
        LabelResampling::Permutation => permutations(&(0..n).collect::<Vec<_>>())
            .into_iter()
            .map(|p| p.iter().map(|&i| labels[i]).collect())
            .collect(),
        LabelResampling::WithReplacement => (0..n.pow(n as u32))
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let pick = code % n;
                        code /= n;
                        labels[pick]
                    })
                    .collect()
            })
            .collect(),
    };
    let mut universe: Vec<char> = labels.to_vec();
    universe.sort();
    universe.dedup();
    let mut sum: BTreeMap<(char, char), f64> = BTreeMap::new();
    for d in &draws {
        let assignment: BTreeMap<String, char> = (0..n).map(|i| (name(i), d[i])).collect();
        let f = alignet_core::null_models::link_fractions_over(g, &assignment, Some(&universe)).unwrap();
        for (k, v) in f.fractions {
            *sum.entry(k).or_default() += v;
        }
    }
    sum.into_iter().map(|(k, v)| (k, v / draws.len() as f64)).collect()
}

#[test]
fn null_means_match_exhaustive_oracle() {
    for seed in 0..60 {
        let mut rng = substream(seed, 0);
        let n = rng.random_range(2..=4);
        let mut edges: Vec<(String, String)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && rng.random_bool(0.5))
            .map(|(a, b)| (name(a), name(b)))
            .collect();
        if edges.is_empty() {
            edges.push((name(0), name(1)));
        }
        let g = FollowerGraph::from_parts((0..n).map(name), edges);
        let labels: Vec<char> = (0..n).map(|_| ['p', 'n', 'u'][rng.random_range(0..3)]).collect();
        let map: BTreeMap<String, char> = (0..n).map(|i| (name(i), labels[i])).collect();
        for mode in [LabelResampling::WithReplacement, LabelResampling::Permutation] {
            let expected = expected_link_fractions(&g, &map, None, mode).unwrap();
            let oracle = exhaustive_mean(&g, &labels, mode);
            for (k, v) in &oracle {
                assert!((expected.fractions[k] - v).abs() < 1e-9, "seed {seed} {mode:?} {k:?}: {} vs {v}", expected.fractions[k]);
            }
        }
    }
}

#[test]
fn fractions_sum_to_one() {
    let (g, labels) = two_cliques(6);
    let f = link_fractions(&g, &labels).unwrap();
    assert!((f.total() - 1.0).abs() < 1e-12);
}

#[test]
fn clique_homophily_is_flagged() {
    let (g, labels) = two_cliques(10);
    let r = label_permutation_test(&g, &labels, 500, Band::TWO_SIDED_95, 3, LabelResampling::default()).unwrap();
    assert!(r[&('p', 'p')].above());
    assert!(r[&('n', 'n')].above());
    assert!(r[&('n', 'p')].below());
}

#[test]
fn copy_fixture_is_outside_and_iid_mostly_inside() {
    let planted = copy_sentiment_graph(4, 10, 0.3, 1);
    let r = correlation_null_test(&planted, 300, Band::TWO_SIDED_95, 1).unwrap();
    assert_eq!(r.verdict, Verdict::OutsideBand);
    assert!(r.observed > 0.99);
    let inside = (0..40)
        .filter(|&s| {
            let g = iid_sentiment_graph(100, 400, s);
            correlation_null_test(&g, 300, Band::TWO_SIDED_95, s).unwrap().verdict == Verdict::InsideBand
        })
        .count();
    assert!(inside >= 34, "{inside}/40");
}
