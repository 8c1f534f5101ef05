//! Randomisation tests for sentiment homophily.
//!
//! Two nulls are provided. [`correlation_null_test`] keeps the mention graph
//! fixed and redraws every edge sentiment from the observed edge sentiments
//! with replacement, then compares the in/out correlation against the
//! resulting distribution. [`label_permutation_test`] redraws user labels and
//! compares the fractions of links between each pair of labels.
//!
//! Iteration `i` draws from its own random stream derived from `(seed, i)`,
//! so results are identical for any thread count.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, InteractionGraph};
use crate::rng::{substream, Rng};
use crate::stats::{mean, quantile};

pub use crate::stats::pearson;

/// Quantile probabilities delimiting the acceptance band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const TWO_SIDED_95: Band = Band { lo: 0.025, hi: 0.975 };
    pub const TWO_SIDED_90: Band = Band { lo: 0.05, hi: 0.95 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::arg(format!("invalid quantile band ({lo}, {hi})")));
        }
        Ok(Band { lo, hi })
    }
}

impl Default for Band {
    fn default() -> Self {
        Band::TWO_SIDED_95
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OutsideBand,
    InsideBand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandTestResult {
    pub observed: f64,
    #[serde(skip)]
    pub null_samples: Vec<f64>,
    pub band: Band,
    pub quantile_lo: f64,
    pub quantile_hi: f64,
    pub null_mean: f64,
    pub verdict: Verdict,
    pub iterations: usize,
    pub seed: u64,
}

impl RandTestResult {
    fn from_samples(observed: f64, null_samples: Vec<f64>, band: Band, seed: u64) -> Self {
        let quantile_lo = quantile(&null_samples, band.lo).unwrap_or(f64::NAN);
        let quantile_hi = quantile(&null_samples, band.hi).unwrap_or(f64::NAN);
        let verdict = if observed < quantile_lo || observed > quantile_hi {
            Verdict::OutsideBand
        } else {
            Verdict::InsideBand
        };
        RandTestResult {
            observed,
            null_mean: mean(&null_samples).unwrap_or(f64::NAN),
            iterations: null_samples.len(),
            null_samples,
            band,
            quantile_lo,
            quantile_hi,
            verdict,
            seed,
        }
    }

    /// Observed value above the upper quantile.
    pub fn above(&self) -> bool {
        self.observed > self.quantile_hi
    }

    /// Observed value below the lower quantile.
    pub fn below(&self) -> bool {
        self.observed < self.quantile_lo
    }
}

/// Same edges and counts, each sentiment redrawn from the observed edge
/// sentiments with replacement.
pub fn resample_edge_sentiment(g: &InteractionGraph, rng: &mut Rng) -> Result<InteractionGraph> {
    let observed: Vec<f64> = g.edges().values().map(|e| e.mean_sentiment).collect();
    if observed.is_empty() {
        return Err(Error::arg("cannot resample an edgeless graph"));
    }
    let drawn = draw_with_replacement(&observed, rng);
    Ok(g.with_sentiments(&drawn))
}

fn draw_with_replacement(pool: &[f64], rng: &mut Rng) -> Vec<f64> {
    (0..pool.len()).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

/// Edge list over dense node indices.
struct Indexed {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Indexed {
    fn new<G: DirectedGraph>(g: &G) -> (Self, BTreeMap<&str, usize>) {
        let index: BTreeMap<&str, usize> = g.nodes().iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let edges = g.edge_pairs().into_iter().map(|(a, b)| (index[a], index[b])).collect();
        (
            Indexed {
                n: index.len(),
                edges,
            },
            index,
        )
    }

    /// Users with both in- and out-edges.
    fn both_defined(&self) -> Vec<usize> {
        let mut has = vec![[false; 2]; self.n];
        for &(a, b) in &self.edges {
            has[a][1] = true;
            has[b][0] = true;
        }
        (0..self.n).filter(|&i| has[i][0] && has[i][1]).collect()
    }

    fn in_out_means(&self, sentiments: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut sum = vec![[0.0f64; 2]; self.n];
        let mut cnt = vec![[0usize; 2]; self.n];
        for (&(a, b), &s) in self.edges.iter().zip(sentiments) {
            sum[a][1] += s;
            cnt[a][1] += 1;
            sum[b][0] += s;
            cnt[b][0] += 1;
        }
        let div = |k: usize| -> Vec<f64> {
            (0..self.n)
                .map(|i| if cnt[i][k] == 0 { f64::NAN } else { sum[i][k] / cnt[i][k] as f64 })
                .collect()
        };
        (div(0), div(1))
    }
}

fn in_out_correlation(idx: &Indexed, users: &[usize], sentiments: &[f64]) -> Result<f64> {
    let (s_in, s_out) = idx.in_out_means(sentiments);
    let x: Vec<f64> = users.iter().map(|&u| s_in[u]).collect();
    let y: Vec<f64> = users.iter().map(|&u| s_out[u]).collect();
    pearson(&x, &y)
}

/// Correlation between users' in- and out-sentiment against the
/// edge-resampling null.
///
/// A resampled graph whose aggregates have zero variance contributes a
/// correlation of 0 to the null distribution.
pub fn correlation_null_test(
    g: &InteractionGraph,
    iterations: usize,
    band: Band,
    seed: u64,
) -> Result<RandTestResult> {
    if iterations == 0 {
        return Err(Error::arg("iterations must be positive"));
    }
    let (idx, _) = Indexed::new(g);
    let users = idx.both_defined();
    if users.len() < 3 {
        return Err(Error::arg(format!(
            "correlation test needs at least 3 users with in- and out-sentiment, found {}",
            users.len()
        )));
    }
    let sentiments: Vec<f64> = g.edges().values().map(|e| e.mean_sentiment).collect();
    let observed = in_out_correlation(&idx, &users, &sentiments)?;
    let null_samples: Vec<f64> = (0..iterations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let drawn = draw_with_replacement(&sentiments, &mut rng);
            in_out_correlation(&idx, &users, &drawn).unwrap_or(0.0)
        })
        .collect();
    Ok(RandTestResult::from_samples(observed, null_samples, band, seed))
}

/// Fraction of edges per unordered label pair `(a, b)` with `a <= b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "L: Serialize"))]
pub struct LinkFractions<L: Ord> {
    #[serde(serialize_with = "crate::serde_pairs::serialize")]
    pub fractions: BTreeMap<(L, L), f64>,
}

impl<L: Ord + Clone> LinkFractions<L> {
    pub fn get(&self, a: &L, b: &L) -> f64 {
        let key = ordered(a.clone(), b.clone());
        self.fractions.get(&key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.fractions.values().sum()
    }
}

fn ordered<L: Ord>(a: L, b: L) -> (L, L) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// How labels are redrawn in [`label_permutation_test`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelResampling {
    /// Each node draws i.i.d. from the empirical label distribution.
    #[default]
    WithReplacement,
    /// The observed label multiset is shuffled.
    Permutation,
}

struct LabelSetup<L> {
    idx: Indexed,
    universe: Vec<L>,
    node_labels: Vec<usize>,
}

fn label_setup<G: DirectedGraph, L: Ord + Clone>(
    g: &G,
    labels: &BTreeMap<String, L>,
    universe: Option<&[L]>,
) -> Result<LabelSetup<L>> {
    let (idx, index) = Indexed::new(g);
    if idx.edges.is_empty() {
        return Err(Error::arg("link fractions need at least one edge"));
    }
    let mut node_labels_raw = Vec::with_capacity(idx.n);
    for node in index.keys() {
        let l = labels
            .get(*node)
            .ok_or_else(|| Error::Consistency(format!("node {node:?} has no label")))?;
        node_labels_raw.push(l.clone());
    }
    let mut universe: Vec<L> = match universe {
        Some(u) => u.to_vec(),
        None => node_labels_raw.clone(),
    };
    universe.sort();
    universe.dedup();
    let mut node_labels = Vec::with_capacity(idx.n);
    for l in &node_labels_raw {
        let pos = universe
            .binary_search(l)
            .map_err(|_| Error::Consistency("node label missing from label universe".into()))?;
        node_labels.push(pos);
    }
    Ok(LabelSetup {
        idx,
        universe,
        node_labels,
    })
}

fn count_fractions(idx: &Indexed, k: usize, node_labels: &[usize]) -> Vec<f64> {
    let mut counts = vec![0usize; k * k];
    for &(a, b) in &idx.edges {
        let (x, y) = (node_labels[a].min(node_labels[b]), node_labels[a].max(node_labels[b]));
        counts[x * k + y] += 1;
    }
    let total = idx.edges.len() as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

fn pair_keys<L: Clone>(universe: &[L]) -> Vec<(usize, usize, (L, L))> {
    let k = universe.len();
    (0..k)
        .flat_map(|x| (x..k).map(move |y| (x, y)))
        .map(|(x, y)| (x, y, (universe[x].clone(), universe[y].clone())))
        .collect()
}

fn to_fractions<L: Ord + Clone>(universe: &[L], flat: &[f64]) -> LinkFractions<L> {
    let k = universe.len();
    LinkFractions {
        fractions: pair_keys(universe)
            .into_iter()
            .map(|(x, y, key)| (key, flat[x * k + y]))
            .collect(),
    }
}

/// Each directed edge counts once toward the unordered pair of its endpoint labels.
pub fn link_fractions<G: DirectedGraph, L: Ord + Clone>(
    g: &G,
    labels: &BTreeMap<String, L>,
) -> Result<LinkFractions<L>> {
    link_fractions_over(g, labels, None)
}

/// Like [`link_fractions`], reporting every pair over `universe` (zeros included).
pub fn link_fractions_over<G: DirectedGraph, L: Ord + Clone>(
    g: &G,
    labels: &BTreeMap<String, L>,
    universe: Option<&[L]>,
) -> Result<LinkFractions<L>> {
    let setup = label_setup(g, labels, universe)?;
    let flat = count_fractions(&setup.idx, setup.universe.len(), &setup.node_labels);
    Ok(to_fractions(&setup.universe, &flat))
}

/// Exact null expectation of every link fraction.
pub fn expected_link_fractions<G: DirectedGraph, L: Ord + Clone>(
    g: &G,
    labels: &BTreeMap<String, L>,
    universe: Option<&[L]>,
    mode: LabelResampling,
) -> Result<LinkFractions<L>> {
    let setup = label_setup(g, labels, universe)?;
    let k = setup.universe.len();
    let n = setup.idx.n as f64;
    let mut counts = vec![0.0f64; k];
    for &l in &setup.node_labels {
        counts[l] += 1.0;
    }
    let mut flat = vec![0.0; k * k];
    for x in 0..k {
        for y in x..k {
            let p = match mode {
                LabelResampling::WithReplacement => {
                    let (px, py) = (counts[x] / n, counts[y] / n);
                    if x == y { px * px } else { 2.0 * px * py }
                }
                LabelResampling::Permutation => {
                    if x == y {
                        counts[x] * (counts[x] - 1.0) / (n * (n - 1.0))
                    } else {
                        2.0 * counts[x] * counts[y] / (n * (n - 1.0))
                    }
                }
            };
            flat[x * k + y] = p;
        }
    }
    Ok(to_fractions(&setup.universe, &flat))
}

/// Link fractions against the label-resampling null, one result per label pair.
pub fn label_permutation_test<G: DirectedGraph, L: Ord + Clone + Send + Sync>(
    g: &G,
    labels: &BTreeMap<String, L>,
    iterations: usize,
    band: Band,
    seed: u64,
    mode: LabelResampling,
) -> Result<BTreeMap<(L, L), RandTestResult>> {
    label_permutation_test_over(g, labels, None, iterations, band, seed, mode)
}

pub fn label_permutation_test_over<G: DirectedGraph, L: Ord + Clone + Send + Sync>(
    g: &G,
    labels: &BTreeMap<String, L>,
    universe: Option<&[L]>,
    iterations: usize,
    band: Band,
    seed: u64,
    mode: LabelResampling,
) -> Result<BTreeMap<(L, L), RandTestResult>> {
    if iterations == 0 {
        return Err(Error::arg("iterations must be positive"));
    }
    let setup = label_setup(g, labels, universe)?;
    let k = setup.universe.len();
    let observed = count_fractions(&setup.idx, k, &setup.node_labels);
    let samples: Vec<Vec<f64>> = (0..iterations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let drawn: Vec<usize> = match mode {
                LabelResampling::WithReplacement => (0..setup.idx.n)
                    .map(|_| setup.node_labels[rng.random_range(0..setup.idx.n)])
                    .collect(),
                LabelResampling::Permutation => {
                    let mut v = setup.node_labels.clone();
                    v.shuffle(&mut rng);
                    v
                }
            };
            count_fractions(&setup.idx, k, &drawn)
        })
        .collect();
    Ok(pair_keys(&setup.universe)
        .into_iter()
        .map(|(x, y, key)| {
            let cell = x * k + y;
            let null: Vec<f64> = samples.iter().map(|s| s[cell]).collect();
            (key, RandTestResult::from_samples(observed[cell], null, band, seed))
        })
        .collect())
}
