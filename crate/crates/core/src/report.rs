//! Cluster-level reports and evaluation against manual annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MessageKind};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, FollowerGraph, InteractionGraph, KindCounts};
use crate::lexicon::SentimentScore;
use crate::rng::substream;
use crate::stats::{summarize, Summary};

pub type ClusterMap = BTreeMap<String, usize>;

fn cluster_of(clusters: &ClusterMap, u: &str) -> Result<usize> {
    clusters
        .get(u)
        .copied()
        .ok_or_else(|| Error::Consistency(format!("user {u:?} is not in any cluster")))
}

/// Share of each source cluster's out-links that land in each target cluster.
pub fn cluster_link_fractions<G: DirectedGraph>(g: &G, clusters: &ClusterMap) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut out: BTreeMap<usize, usize> = BTreeMap::new();
    for (a, b) in g.edge_pairs() {
        let key = (cluster_of(clusters, a)?, cluster_of(clusters, b)?);
        *counts.entry(key).or_default() += 1;
        *out.entry(key.0).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / out[&k.0] as f64))
        .collect())
}

/// Mentions between clusters, counted per (message, mentioned user).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MentionTable {
    #[serde(serialize_with = "crate::serde_pairs::serialize")]
    pub counts: BTreeMap<(usize, usize), KindCounts>,
    /// Per source cluster, all mentions it sent to clustered users.
    pub source_totals: BTreeMap<usize, u32>,
    /// Mentions skipped because author or target is unclustered.
    pub excluded: usize,
}

impl MentionTable {
    pub fn proportion(&self, from: usize, to: usize, kind: MessageKind) -> Option<f64> {
        let total = *self.source_totals.get(&from)?;
        let c = self.counts.get(&(from, to)).map_or(0, |k| k.get(kind));
        (total > 0).then(|| f64::from(c) / f64::from(total))
    }
}

fn mention_pairs(corpus: &Corpus) -> impl Iterator<Item = (&crate::corpus::Message, &String)> {
    corpus
        .messages()
        .iter()
        .flat_map(|m| m.mentions.iter().filter(move |t| **t != m.author).map(move |t| (m, t)))
}

pub fn mention_type_table(corpus: &Corpus, clusters: &ClusterMap) -> MentionTable {
    let mut table = MentionTable::default();
    for (m, target) in mention_pairs(corpus) {
        let (Some(&from), Some(&to)) = (clusters.get(&m.author), clusters.get(target)) else {
            table.excluded += 1;
            continue;
        };
        table.counts.entry((from, to)).or_default().add(m.kind, 1);
        *table.source_totals.entry(from).or_default() += 1;
    }
    table
}

/// Fraction of mentions per `(from, to, kind)` whose two users are linked in
/// the follower graph; either direction counts unless `directed_only`, in
/// which case the author must follow the target.
pub fn follower_coverage(
    corpus: &Corpus,
    clusters: &ClusterMap,
    followers: &FollowerGraph,
    directed_only: bool,
) -> BTreeMap<(usize, usize, MessageKind), f64> {
    let mut cells: BTreeMap<(usize, usize, MessageKind), (u32, u32)> = BTreeMap::new();
    for (m, target) in mention_pairs(corpus) {
        let (Some(&from), Some(&to)) = (clusters.get(&m.author), clusters.get(target)) else {
            continue;
        };
        let linked = followers.has_edge(&m.author, target) || (!directed_only && followers.has_edge(target, &m.author));
        let cell = cells.entry((from, to, m.kind)).or_default();
        cell.1 += 1;
        if linked {
            cell.0 += 1;
        }
    }
    cells
        .into_iter()
        .map(|(k, (hit, n))| (k, f64::from(hit) / f64::from(n)))
        .collect()
}

/// Summary of edge sentiments grouped by `(source cluster, target cluster)`.
pub fn cluster_sentiment_stats(g: &InteractionGraph, clusters: &ClusterMap) -> Result<BTreeMap<(usize, usize), Summary<f64>>> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for ((a, b), e) in g.edges() {
        groups
            .entry((cluster_of(clusters, a)?, cluster_of(clusters, b)?))
            .or_default()
            .push(e.mean_sentiment);
    }
    Ok(groups
        .into_iter()
        .filter_map(|(k, v)| summarize(&v).map(|s| (k, s)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterInteraction {
    pub from: usize,
    pub to: usize,
    pub counts: KindCounts,
    /// Share of the source cluster's mentions, per kind (original, reply, retweet).
    pub proportion: [f64; 3],
    pub follower_coverage: [Option<f64>; 3],
    pub sentiment: Option<Summary<f64>>,
}

/// Joins the mention table, follower coverage and sentiment summaries.
pub fn cluster_interactions(
    corpus: &Corpus,
    mentions: &InteractionGraph,
    followers: &FollowerGraph,
    clusters: &ClusterMap,
    directed_only: bool,
) -> Result<Vec<ClusterInteraction>> {
    let table = mention_type_table(corpus, clusters);
    let coverage = follower_coverage(corpus, clusters, followers, directed_only);
    let sentiment = cluster_sentiment_stats(mentions, clusters)?;
    let ids: BTreeSet<usize> = clusters.values().copied().collect();
    let mut out = Vec::new();
    for &from in &ids {
        for &to in &ids {
            let counts = table.counts.get(&(from, to)).copied().unwrap_or_default();
            out.push(ClusterInteraction {
                from,
                to,
                counts,
                proportion: MessageKind::ALL.map(|k| table.proportion(from, to, k).unwrap_or(0.0)),
                follower_coverage: MessageKind::ALL.map(|k| coverage.get(&(from, to, k)).copied()),
                sentiment: sentiment.get(&(from, to)).copied(),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivityPoint {
    pub cluster: usize,
    pub day: usize,
    pub day_start: i64,
    pub tweets_per_user: f64,
    pub mean_sentiment: Option<f64>,
}

/// Per cluster and day `[boundaries[d], boundaries[d+1])`: messages per member
/// and the mean difference score of those messages.
pub fn activity_timeseries(
    corpus: &Corpus,
    scores: &BTreeMap<String, SentimentScore>,
    clusters: &ClusterMap,
    boundaries: &[i64],
) -> Result<Vec<ActivityPoint>> {
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("day boundaries must be strictly increasing"));
    }
    let days = boundaries.len().saturating_sub(1);
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in clusters.values() {
        *sizes.entry(c).or_default() += 1;
    }
    let mut acc: BTreeMap<(usize, usize), (usize, i64)> = BTreeMap::new();
    for m in corpus.messages() {
        let Some(&c) = clusters.get(&m.author) else { continue };
        // day d holds boundaries[d] <= ts < boundaries[d+1]
        let d = boundaries.partition_point(|&b| b <= m.timestamp);
        if d == 0 || d > days {
            continue;
        }
        let score = scores
            .get(&m.id)
            .ok_or_else(|| Error::Consistency(format!("no sentiment score for message {}", m.id)))?;
        let e = acc.entry((c, d - 1)).or_default();
        e.0 += 1;
        e.1 += i64::from(score.difference());
    }
    let mut out = Vec::new();
    for (&c, &size) in &sizes {
        for d in 0..days {
            let (n, sum) = acc.get(&(c, d)).copied().unwrap_or_default();
            out.push(ActivityPoint {
                cluster: c,
                day: d,
                day_start: boundaries[d],
                tweets_per_user: n as f64 / size as f64,
                mean_sentiment: (n > 0).then(|| sum as f64 / n as f64),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Yes,
    No,
    Unaligned,
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stance::Yes => "yes",
            Stance::No => "no",
            Stance::Unaligned => "unaligned",
        })
    }
}

/// Counts keyed by `(predicted, actual)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    #[serde(serialize_with = "crate::serde_pairs::serialize")]
    pub counts: BTreeMap<(Stance, Stance), u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(cells: impl IntoIterator<Item = ((Stance, Stance), u64)>) -> Self {
        let mut m = ConfusionMatrix::default();
        for (k, n) in cells {
            *m.counts.entry(k).or_default() += n;
        }
        m
    }

    pub fn get(&self, predicted: Stance, actual: Stance) -> u64 {
        self.counts.get(&(predicted, actual)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn actual_total(&self, actual: Stance) -> u64 {
        self.counts.iter().filter(|((_, a), _)| *a == actual).map(|(_, n)| n).sum()
    }

    pub fn predicted_total(&self, predicted: Stance) -> u64 {
        self.counts.iter().filter(|((p, _), _)| *p == predicted).map(|(_, n)| n).sum()
    }

    /// `(true yes + true no) / total`.
    pub fn overall_accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| (self.get(Stance::Yes, Stance::Yes) + self.get(Stance::No, Stance::No)) as f64 / total as f64)
    }

    /// Mean recall over the actual yes and no classes that occur.
    pub fn balanced_accuracy(&self) -> Option<f64> {
        let recalls: Vec<f64> = [Stance::Yes, Stance::No]
            .into_iter()
            .filter_map(|c| {
                let n = self.actual_total(c);
                (n > 0).then(|| self.get(c, c) as f64 / n as f64)
            })
            .collect();
        crate::stats::mean(&recalls)
    }
}

/// Majority stance of a cluster among its yes/no annotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterLabel {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterComposition {
    pub cluster: usize,
    pub yes: u64,
    pub no: u64,
    pub unaligned: u64,
    pub label: ClusterLabel,
}

impl ClusterComposition {
    pub fn annotated(&self) -> u64 {
        self.yes + self.no + self.unaligned
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignmentEvaluation {
    pub composition: Vec<ClusterComposition>,
    pub confusion: ConfusionMatrix,
    pub overall_accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    /// Mean over labelled clusters of the share of annotated members matching the label.
    pub per_cluster_accuracy: Option<f64>,
    pub warnings: Vec<String>,
}

/// Labels each cluster by its yes/no majority and scores every annotated
/// user against its cluster's label. Users of clusters without a yes/no
/// majority are left out.
pub fn evaluate_alignment(annotations: &BTreeMap<String, Stance>, clusters: &ClusterMap) -> Result<AlignmentEvaluation> {
    let mut tally: BTreeMap<usize, [u64; 3]> = BTreeMap::new();
    for (u, &s) in annotations {
        let c = cluster_of(clusters, u)?;
        tally.entry(c).or_default()[s as usize] += 1;
    }
    let mut warnings = Vec::new();
    let composition: Vec<ClusterComposition> = tally
        .iter()
        .map(|(&cluster, &[yes, no, unaligned])| {
            let label = if yes > no {
                ClusterLabel::Yes
            } else if no > yes {
                ClusterLabel::No
            } else {
                warnings.push(format!("cluster {cluster} has no yes/no majority; its users are not scored"));
                ClusterLabel::Unknown
            };
            ClusterComposition { cluster, yes, no, unaligned, label }
        })
        .collect();
    let label_of: BTreeMap<usize, ClusterLabel> = composition.iter().map(|c| (c.cluster, c.label)).collect();
    let mut confusion = ConfusionMatrix::default();
    for (u, &actual) in annotations {
        let predicted = match label_of[&clusters[u]] {
            ClusterLabel::Yes => Stance::Yes,
            ClusterLabel::No => Stance::No,
            ClusterLabel::Unknown => continue,
        };
        *confusion.counts.entry((predicted, actual)).or_default() += 1;
    }
    let purities: Vec<f64> = composition
        .iter()
        .filter_map(|c| {
            let hit = match c.label {
                ClusterLabel::Yes => c.yes,
                ClusterLabel::No => c.no,
                ClusterLabel::Unknown => return None,
            };
            Some(hit as f64 / c.annotated() as f64)
        })
        .collect();
    Ok(AlignmentEvaluation {
        overall_accuracy: confusion.overall_accuracy(),
        balanced_accuracy: confusion.balanced_accuracy(),
        per_cluster_accuracy: crate::stats::mean(&purities),
        composition,
        confusion,
        warnings,
    })
}

pub fn read_annotations(path: &Path) -> Result<BTreeMap<String, Stance>> {
    #[derive(Deserialize)]
    struct Row {
        user: String,
        label: Stance,
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let r: Row = row?;
        out.insert(r.user.to_lowercase(), r.label);
    }
    Ok(out)
}

/// Stratified sample of `fraction` of each cluster (at least one user per
/// non-empty cluster), for manual annotation.
pub fn sample_for_annotation(clusters: &ClusterMap, fraction: f64, seed: u64) -> Result<BTreeMap<usize, Vec<String>>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::arg(format!("sample fraction {fraction} outside [0,1]")));
    }
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (u, &c) in clusters {
        members.entry(c).or_default().push(u.clone());
    }
    Ok(members
        .into_iter()
        .map(|(c, mut users)| {
            let n = ((users.len() as f64 * fraction).round() as usize).clamp(1, users.len());
            users.shuffle(&mut substream(seed, c as u64));
            let mut picked: Vec<String> = users.into_iter().take(n).collect();
            picked.sort();
            (c, picked)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupEvaluation {
    /// Cluster → planted group holding most of its members.
    pub mapping: BTreeMap<usize, usize>,
    /// Per planted group, share of its users placed in a cluster mapped to it.
    pub recall: BTreeMap<usize, f64>,
    pub balanced_accuracy: f64,
    pub overall_accuracy: f64,
}

/// Scores clusters against planted groups. Users missing from `clusters`
/// count as misassigned.
pub fn evaluate_groups(truth: &BTreeMap<String, usize>, clusters: &ClusterMap) -> Result<GroupEvaluation> {
    if truth.is_empty() {
        return Err(Error::arg("ground truth is empty"));
    }
    let mut votes: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (u, &c) in clusters {
        if let Some(&g) = truth.get(u) {
            *votes.entry(c).or_default().entry(g).or_default() += 1;
        }
    }
    let mapping: BTreeMap<usize, usize> = votes
        .iter()
        .map(|(&c, v)| {
            let best = v.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&g, _)| g).unwrap();
            (c, best)
        })
        .collect();
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    let mut hit: BTreeMap<usize, usize> = BTreeMap::new();
    for (u, &g) in truth {
        *size.entry(g).or_default() += 1;
        if clusters.get(u).and_then(|c| mapping.get(c)) == Some(&g) {
            *hit.entry(g).or_default() += 1;
        }
    }
    let recall: BTreeMap<usize, f64> = size
        .iter()
        .map(|(g, &n)| (*g, hit.get(g).copied().unwrap_or(0) as f64 / n as f64))
        .collect();
    Ok(GroupEvaluation {
        balanced_accuracy: recall.values().sum::<f64>() / recall.len() as f64,
        overall_accuracy: hit.values().sum::<usize>() as f64 / truth.len() as f64,
        mapping,
        recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Message;
    use crate::graph::MentionEdge;

    fn cmap(pairs: &[(&str, usize)]) -> ClusterMap {
        pairs.iter().map(|(u, c)| (u.to_string(), *c)).collect()
    }

    fn msg(id: &str, author: &str, target: &str, kind: MessageKind, ts: i64) -> Message {
        Message {
            id: id.into(),
            author: author.into(),
            timestamp: ts,
            text: String::new(),
            kind,
            reply_to: None,
            retweet_of: None,
            mentions: vec![target.into()],
            hashtags: vec![],
        }
    }

    #[test]
    fn link_fraction_rows() {
        let g = FollowerGraph::from_parts(
            std::iter::empty(),
            [("a", "b"), ("b", "a"), ("a", "c"), ("b", "d")].map(|(x, y)| (x.to_string(), y.to_string())),
        );
        let f = cluster_link_fractions(&g, &cmap(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)])).unwrap();
        assert_eq!(f[&(0, 0)], 0.5);
        assert_eq!(f[&(0, 1)], 0.5);
        assert!(cluster_link_fractions(&g, &cmap(&[("a", 0)])).is_err());
    }

    #[test]
    fn mention_table_and_coverage() {
        let corpus = Corpus::new(vec![
            msg("1", "a", "c", MessageKind::Retweet, 0),
            msg("2", "a", "zz", MessageKind::Original, 0),
        ]);
        let clusters = cmap(&[("a", 0), ("c", 1)]);
        let t = mention_type_table(&corpus, &clusters);
        assert_eq!(t.counts[&(0, 1)].retweet, 1);
        assert_eq!(t.proportion(0, 1, MessageKind::Retweet), Some(1.0));
        assert_eq!(t.excluded, 1);

        let none = FollowerGraph::default();
        assert_eq!(follower_coverage(&corpus, &clusters, &none, false)[&(0, 1, MessageKind::Retweet)], 0.0);
        let back = FollowerGraph::from_parts(std::iter::empty(), [("c".to_string(), "a".to_string())]);
        assert_eq!(follower_coverage(&corpus, &clusters, &back, false)[&(0, 1, MessageKind::Retweet)], 1.0);
        assert_eq!(follower_coverage(&corpus, &clusters, &back, true)[&(0, 1, MessageKind::Retweet)], 0.0);
    }

    #[test]
    fn sentiment_stats() {
        let e = |w| MentionEdge { mean_sentiment: w, counts: KindCounts { original: 1, reply: 0, retweet: 0 } };
        let g = InteractionGraph::from_parts(
            std::iter::empty(),
            [("a", "b", -1.0), ("a", "c", 0.0), ("a", "d", 1.0), ("b", "a", 2.0)].map(|(x, y, w)| ((x.to_string(), y.to_string()), e(w))),
        )
        .unwrap();
        let clusters = cmap(&[("a", 0), ("b", 1), ("c", 1), ("d", 1)]);
        let s = cluster_sentiment_stats(&g, &clusters).unwrap();
        assert_eq!(s[&(0, 1)].median, 0.0);
        assert_eq!(s[&(0, 1)].mean, 0.0);
        let single = s[&(1, 0)];
        assert_eq!([single.min, single.q1, single.median, single.q3, single.max], [2.0; 5]);
        assert!(!s.contains_key(&(0, 0)));
    }

    #[test]
    fn activity_days_are_half_open() {
        let day = 86_400;
        let mut msgs: Vec<Message> = (0..8).map(|i| msg(&format!("a{i}"), "a", "b", MessageKind::Original, 10 + i)).collect();
        msgs.push(msg("mid", "b", "a", MessageKind::Original, day));
        let corpus = Corpus::new(msgs);
        let scores: BTreeMap<String, SentimentScore> = corpus.messages().iter().map(|m| (m.id.clone(), SentimentScore::new(3, -1).unwrap())).collect();
        let clusters = cmap(&[("a", 0), ("b", 0), ("c", 0), ("d", 0)]);
        let ts = activity_timeseries(&corpus, &scores, &clusters, &[0, day, 2 * day, 3 * day]).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts[0].tweets_per_user, 2.0);
        assert_eq!(ts[0].mean_sentiment, Some(2.0));
        assert_eq!(ts[1].tweets_per_user, 0.25);
        assert_eq!(ts[2].tweets_per_user, 0.0);
        assert_eq!(ts[2].mean_sentiment, None);
        assert!(activity_timeseries(&corpus, &scores, &clusters, &[5, 5]).is_err());
    }

    #[test]
    fn perfect_annotations() {
        let clusters = cmap(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let ann: BTreeMap<String, Stance> =
            [("a", Stance::Yes), ("b", Stance::Yes), ("c", Stance::No), ("d", Stance::No)].map(|(u, s)| (u.to_string(), s)).into();
        let ev = evaluate_alignment(&ann, &clusters).unwrap();
        assert_eq!(ev.overall_accuracy, Some(1.0));
        assert_eq!(ev.balanced_accuracy, Some(1.0));
        assert_eq!(ev.per_cluster_accuracy, Some(1.0));
    }

    #[test]
    fn unlabeled_cluster_is_skipped_with_warning() {
        let clusters = cmap(&[("a", 0), ("b", 1), ("c", 1)]);
        let ann: BTreeMap<String, Stance> =
            [("a", Stance::Yes), ("b", Stance::Unaligned), ("c", Stance::Unaligned)].map(|(u, s)| (u.to_string(), s)).into();
        let ev = evaluate_alignment(&ann, &clusters).unwrap();
        assert_eq!(ev.warnings.len(), 1);
        assert_eq!(ev.confusion.total(), 1);
        let stray: BTreeMap<String, Stance> = [("zz".to_string(), Stance::Yes)].into();
        assert!(evaluate_alignment(&stray, &clusters).is_err());
    }

    #[test]
    fn group_evaluation_counts_missing_users() {
        let truth: BTreeMap<String, usize> = [("a", 0), ("b", 0), ("c", 1), ("d", 1)].map(|(u, g)| (u.to_string(), g)).into();
        let clusters = cmap(&[("a", 5), ("b", 5), ("c", 6)]);
        let ev = evaluate_groups(&truth, &clusters).unwrap();
        assert_eq!(ev.mapping[&5], 0);
        assert_eq!(ev.recall[&1], 0.5);
        assert_eq!(ev.balanced_accuracy, 0.75);
        assert_eq!(ev.overall_accuracy, 0.75);
    }

    #[test]
    fn annotation_sampler_is_stratified_and_seeded() {
        let clusters: ClusterMap = (0..50).map(|i| (format!("u{i:02}"), i % 2)).collect();
        let s = sample_for_annotation(&clusters, 0.2, 7).unwrap();
        assert_eq!(s[&0].len(), 5);
        assert_eq!(s[&1].len(), 5);
        assert_eq!(s, sample_for_annotation(&clusters, 0.2, 7).unwrap());
    }
}
