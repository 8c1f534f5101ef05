//! k-means over sub-community sentiment vectors, elbow selection of `k`,
//! and assembly of the final community clusters.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::SubCommunityProfile;
use crate::error::{Error, Result};
use crate::numeric::Scalar;
use crate::rng::{derive_seed, substream};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult<T> {
    /// Cluster of each input point.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Weighted within-cluster sum of squared euclidean distances.
    pub wss: T,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Index of nearest centroid, ties to the lower index.
fn nearest<T: Scalar>(p: &[T], centroids: &[Vec<T>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(p, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(p, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

pub fn within_sum_of_squares<T: Scalar>(points: &[Vec<T>], weights: &[T], assignment: &[usize], centroids: &[Vec<T>]) -> T {
    points
        .iter()
        .zip(weights)
        .zip(assignment)
        .map(|((p, &w), &c)| w * sq_dist(p, &centroids[c]))
        .sum()
}

/// Farthest-point seeding from a random start; ties to the lower index.
fn seed_centroids<T: Scalar>(points: &[Vec<T>], k: usize, start: usize) -> Vec<Vec<T>> {
    let mut centroids = vec![points[start].clone()];
    let mut min_d: Vec<T> = points.iter().map(|p| sq_dist(p, &points[start])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for i in 1..points.len() {
            if min_d[i] > min_d[far] {
                far = i;
            }
        }
        centroids.push(points[far].clone());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, &points[far]);
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    centroids
}

fn lloyd<T: Scalar>(points: &[Vec<T>], weights: &[T], mut centroids: Vec<Vec<T>>) -> KMeansResult<T> {
    let dim = points[0].len();
    let k = centroids.len();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut mass = vec![T::zero(); k];
        for ((p, &w), &c) in points.iter().zip(weights).zip(&assignment) {
            mass[c] += w;
            for (s, &x) in sums[c].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if mass[c] > T::zero() {
                centroids[c] = sums[c].iter().map(|&s| s / mass[c]).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let wss = within_sum_of_squares(points, weights, &assignment, &centroids);
    KMeansResult {
        assignment,
        centroids,
        wss,
    }
}

fn validate<T: Scalar>(points: &[Vec<T>], weights: Option<&[T]>) -> Result<Vec<T>> {
    if points.is_empty() {
        return Err(Error::arg("k-means needs at least one point"));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::arg("k-means points must share a non-zero dimension"));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::arg("k-means points must be finite"));
    }
    match weights {
        None => Ok(vec![T::one(); points.len()]),
        Some(w) if w.len() == points.len() && w.iter().all(|&x| x > T::zero()) => Ok(w.to_vec()),
        Some(_) => Err(Error::arg("weights must be positive, one per point")),
    }
}

/// Lloyd's algorithm, best of `restarts` seeded initialisations by wss.
pub fn kmeans<T: Scalar>(
    points: &[Vec<T>],
    weights: Option<&[T]>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<KMeansResult<T>> {
    let weights = validate(points, weights)?;
    if k == 0 || k > points.len() {
        return Err(Error::arg(format!("k = {k} outside [1, {}]", points.len())));
    }
    if restarts == 0 {
        return Err(Error::arg("restarts must be positive"));
    }
    let runs: Vec<KMeansResult<T>> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let start = substream(seed, r).random_range(0..points.len());
            lloyd(points, &weights, seed_centroids(points, k, start))
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.wss < runs[best].wss {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).unwrap())
}

/// Interior `k` maximising `wss(k-1) - 2 wss(k) + wss(k+1)`; ties to the smaller `k`.
/// `curve` must list consecutive `k` in increasing order.
pub fn elbow_from_curve<T: Scalar>(curve: &[(usize, T)]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::arg("elbow needs a curve over at least 3 values of k"));
    }
    if curve.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
        return Err(Error::arg("elbow curve must cover consecutive k"));
    }
    let mut best = 1;
    let second = |i: usize| curve[i - 1].1 - T::of(2.0) * curve[i].1 + curve[i + 1].1;
    for i in 2..curve.len() - 1 {
        if second(i) > second(best) {
            best = i;
        }
    }
    Ok(curve[best].0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElbowSelection<T> {
    pub k: usize,
    pub curve: Vec<(usize, T)>,
    /// Clustering at the selected `k`.
    pub selected: KMeansResult<T>,
}

pub fn elbow_select<T: Scalar>(
    points: &[Vec<T>],
    weights: Option<&[T]>,
    k_min: usize,
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<ElbowSelection<T>> {
    if k_min == 0 || k_max > points.len() || k_min > k_max {
        return Err(Error::arg(format!(
            "k range [{k_min}, {k_max}] must lie within [1, {}]",
            points.len()
        )));
    }
    if k_max - k_min + 1 < 3 {
        return Err(Error::arg("k range must cover at least 3 values"));
    }
    let mut runs = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        runs.push(kmeans(points, weights, k, restarts, derive_seed(seed, k as u64))?);
    }
    let curve: Vec<(usize, T)> = (k_min..=k_max).zip(runs.iter().map(|r| r.wss)).collect();
    let k = elbow_from_curve(&curve)?;
    Ok(ElbowSelection {
        k,
        curve,
        selected: runs.swap_remove(k - k_min),
    })
}

/// Turns profiles into complete vectors: undefined components become the
/// mean of that component over the cells that define it (0 if none does),
/// and with `standardize` each component is z-scored.
pub fn profile_vectors(profiles: &[SubCommunityProfile], standardize: bool) -> Vec<Vec<f64>> {
    let dims = 4;
    let fill: Vec<f64> = (0..dims)
        .map(|c| crate::stats::mean_defined(profiles.iter().map(|p| p.sent_vector[c])).unwrap_or(0.0))
        .collect();
    let mut vectors: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| (0..dims).map(|c| p.sent_vector[c].unwrap_or(fill[c])).collect())
        .collect();
    if standardize && !vectors.is_empty() {
        for c in 0..dims {
            let col: Vec<f64> = vectors.iter().map(|v| v[c]).collect();
            let mu = crate::stats::mean(&col).unwrap();
            let var = col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / col.len() as f64;
            let sd = var.sqrt();
            for v in &mut vectors {
                v[c] = if sd > 0.0 { (v[c] - mu) / sd } else { v[c] - mu };
            }
        }
    }
    vectors
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityCluster {
    pub index: usize,
    pub members: BTreeSet<String>,
    /// Profile cells merged into this cluster.
    pub cells: Vec<usize>,
    /// Member-weighted mean of the cells' out-sentiment.
    pub mean_s_out: Option<f64>,
}

impl CommunityCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Merges cells by k-means cluster; clusters are numbered by descending mean
/// out-sentiment, empty clusters dropped.
pub fn assemble_clusters<T: Scalar>(
    kres: &KMeansResult<T>,
    profiles: &[SubCommunityProfile],
) -> Result<Vec<CommunityCluster>> {
    if kres.assignment.len() != profiles.len() {
        return Err(Error::Consistency(format!(
            "{} cluster assignments for {} profiles",
            kres.assignment.len(),
            profiles.len()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<&SubCommunityProfile>> = BTreeMap::new();
    for (p, &c) in profiles.iter().zip(&kres.assignment) {
        groups.entry(c).or_default().push(p);
    }
    let mut clusters: Vec<CommunityCluster> = groups
        .into_values()
        .map(|cells| {
            let mut weighted = 0.0;
            let mut mass = 0usize;
            for p in &cells {
                if let Some(s) = p.sent_vector[1] {
                    weighted += s * p.size() as f64;
                    mass += p.size();
                }
            }
            CommunityCluster {
                index: 0,
                members: cells.iter().flat_map(|p| p.members.iter().cloned()).collect(),
                cells: cells.iter().map(|p| p.cell).collect(),
                mean_s_out: (mass > 0).then(|| weighted / mass as f64),
            }
        })
        .collect();
    // stable sort: equal means keep k-means order
    clusters.sort_by(|a, b| match (a.mean_s_out, b.mean_s_out) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap(),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    for (i, c) in clusters.iter_mut().enumerate() {
        c.index = i;
    }
    Ok(clusters)
}

/// User to cluster index.
pub fn cluster_map(clusters: &[CommunityCluster]) -> BTreeMap<String, usize> {
    clusters
        .iter()
        .flat_map(|c| c.members.iter().map(move |m| (m.clone(), c.index)))
        .collect()
}

pub fn write_clusters_csv(clusters: &[CommunityCluster], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "user,cluster").unwrap();
    for (u, c) in cluster_map(clusters) {
        writeln!(out, "{u},{c}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_cluster_map(path: &Path) -> Result<BTreeMap<String, usize>> {
    #[derive(Deserialize)]
    struct Row {
        user: String,
        cluster: usize,
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let r: Row = row?;
        out.insert(r.user, r.cluster);
    }
    Ok(out)
}

pub fn write_wss_csv<T: Scalar>(curve: &[(usize, T)], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "k,wss").unwrap();
    for (k, w) in curve {
        writeln!(out, "{k},{w}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
