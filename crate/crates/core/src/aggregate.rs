//! Per-user sentiment aggregates and coarse labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, InteractionGraph};
use crate::stats::{mean, mean_defined, quantile};

/// In/out sentiment of a user and the mean of those over its neighbours.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UserSentiment {
    pub s_in: Option<f64>,
    pub s_out: Option<f64>,
    pub s_n_in: Option<f64>,
    pub s_n_out: Option<f64>,
}

impl UserSentiment {
    pub fn get(&self, field: Aggregate) -> Option<f64> {
        match field {
            Aggregate::In => self.s_in,
            Aggregate::Out => self.s_out,
            Aggregate::NeighbourIn => self.s_n_in,
            Aggregate::NeighbourOut => self.s_n_out,
        }
    }

    pub fn as_vector(&self) -> [Option<f64>; 4] {
        [self.s_in, self.s_out, self.s_n_in, self.s_n_out]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    In,
    Out,
    NeighbourIn,
    NeighbourOut,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighbourMode {
    /// In- and out-neighbours.
    #[default]
    Both,
    OutOnly,
}

fn require_node(g: &InteractionGraph, u: &str) -> Result<()> {
    if g.nodes().contains(u) {
        Ok(())
    } else {
        Err(Error::arg(format!("user {u:?} is not in the graph")))
    }
}

/// `(s_in, s_out)` of one user.
pub fn user_sentiment(g: &InteractionGraph, u: &str) -> Result<(Option<f64>, Option<f64>)> {
    require_node(g, u)?;
    let incoming = g.edges().iter().filter(|((_, b), _)| b == u).map(|(_, e)| Some(e.mean_sentiment));
    let outgoing = g.edges().iter().filter(|((a, _), _)| a == u).map(|(_, e)| Some(e.mean_sentiment));
    Ok((mean_defined(incoming), mean_defined(outgoing)))
}

fn neighbours<'a>(g: &'a InteractionGraph, u: &str, mode: NeighbourMode) -> BTreeSet<&'a str> {
    g.edges()
        .keys()
        .filter_map(|(a, b)| {
            if a == u {
                Some(b.as_str())
            } else if b == u && mode == NeighbourMode::Both {
                Some(a.as_str())
            } else {
                None
            }
        })
        .filter(|v| *v != u)
        .collect()
}

/// `(s_n_in, s_n_out)`: means of the neighbours' defined `s_in` / `s_out`.
pub fn neighbour_sentiment(
    g: &InteractionGraph,
    u: &str,
    all: &BTreeMap<String, UserSentiment>,
    mode: NeighbourMode,
) -> Result<(Option<f64>, Option<f64>)> {
    require_node(g, u)?;
    let neigh = neighbours(g, u, mode);
    let lookup = |v: &str| {
        all.get(v)
            .ok_or_else(|| Error::Consistency(format!("no aggregates for neighbour {v:?}")))
    };
    let mut ins = Vec::with_capacity(neigh.len());
    let mut outs = Vec::with_capacity(neigh.len());
    for v in neigh {
        let s = lookup(v)?;
        ins.push(s.s_in);
        outs.push(s.s_out);
    }
    Ok((mean_defined(ins), mean_defined(outs)))
}

/// All four aggregates for every node, in one pass over the edges.
pub fn aggregate_users(g: &InteractionGraph, mode: NeighbourMode) -> BTreeMap<String, UserSentiment> {
    let mut sums: BTreeMap<&str, [(f64, usize); 2]> = g.nodes().iter().map(|n| (n.as_str(), [(0.0, 0); 2])).collect();
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for ((a, b), e) in g.edges() {
        let out = &mut sums.get_mut(a.as_str()).unwrap()[1];
        out.0 += e.mean_sentiment;
        out.1 += 1;
        let inc = &mut sums.get_mut(b.as_str()).unwrap()[0];
        inc.0 += e.mean_sentiment;
        inc.1 += 1;
        adj.entry(a).or_default().insert(b);
        if mode == NeighbourMode::Both {
            adj.entry(b).or_default().insert(a);
        }
    }
    let avg = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    let base: BTreeMap<&str, (Option<f64>, Option<f64>)> =
        sums.iter().map(|(&u, [i, o])| (u, (avg(*i), avg(*o)))).collect();
    base.iter()
        .map(|(&u, &(s_in, s_out))| {
            let neigh = adj.get(u);
            let over = |pick: fn(&(Option<f64>, Option<f64>)) -> Option<f64>| {
                mean_defined(neigh.into_iter().flatten().map(|v| pick(&base[v])))
            };
            (
                u.to_string(),
                UserSentiment {
                    s_in,
                    s_out,
                    s_n_in: over(|p| p.0),
                    s_n_out: over(|p| p.1),
                },
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarityLabel {
    Positive,
    Negative,
    Unknown,
}

impl PolarityLabel {
    pub fn short(self) -> char {
        match self {
            PolarityLabel::Positive => 'p',
            PolarityLabel::Negative => 'n',
            PolarityLabel::Unknown => 'u',
        }
    }
}

impl fmt::Display for PolarityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolarityLabel::Positive => "positive",
            PolarityLabel::Negative => "negative",
            PolarityLabel::Unknown => "unknown",
        })
    }
}

pub fn classify_polarity(score: Option<f64>) -> PolarityLabel {
    match score {
        Some(s) if s > 0.0 => PolarityLabel::Positive,
        Some(s) if s < 0.0 => PolarityLabel::Negative,
        _ => PolarityLabel::Unknown,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupScheme {
    Sign,
    MeanSplit,
    MedianSplit,
    Quartiles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupLabel {
    Polarity(PolarityLabel),
    Below,
    AboveOrEqual,
    /// Quartile index 0..=3, lowest first.
    Quartile(u8),
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupLabel::Polarity(p) => write!(f, "{}", p.short()),
            GroupLabel::Below => f.write_str("below"),
            GroupLabel::AboveOrEqual => f.write_str("above"),
            GroupLabel::Quartile(q) => write!(f, "q{}", q + 1),
        }
    }
}

/// Groups users with defined scores; undefined scores are left out.
pub fn group_users(
    scores: &BTreeMap<String, Option<f64>>,
    scheme: GroupScheme,
) -> Result<BTreeMap<String, GroupLabel>> {
    let defined: Vec<(&String, f64)> = scores.iter().filter_map(|(u, s)| s.map(|v| (u, v))).collect();
    if defined.is_empty() {
        return Err(Error::arg("no user has a defined score to group"));
    }
    let values: Vec<f64> = defined.iter().map(|(_, v)| *v).collect();
    let split = |threshold: f64| {
        move |v: f64| {
            if v < threshold {
                GroupLabel::Below
            } else {
                GroupLabel::AboveOrEqual
            }
        }
    };
    let label: Box<dyn Fn(f64) -> GroupLabel> = match scheme {
        GroupScheme::Sign => Box::new(|v| GroupLabel::Polarity(classify_polarity(Some(v)))),
        GroupScheme::MeanSplit => Box::new(split(mean(&values).unwrap())),
        GroupScheme::MedianSplit => Box::new(split(quantile(&values, 0.5).unwrap())),
        GroupScheme::Quartiles => {
            let bounds = [0.25, 0.5, 0.75].map(|p| quantile(&values, p).unwrap());
            Box::new(move |v| GroupLabel::Quartile(bounds.iter().filter(|b| v > **b).count() as u8))
        }
    };
    Ok(defined.into_iter().map(|(u, v)| (u.clone(), label(v))).collect())
}

/// Polarity label of every user from one of its aggregates.
pub fn polarity_labels(
    aggregates: &BTreeMap<String, UserSentiment>,
    field: Aggregate,
) -> BTreeMap<String, PolarityLabel> {
    aggregates
        .iter()
        .map(|(u, s)| (u.clone(), classify_polarity(s.get(field))))
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV `user,s_in,s_out,s_n_in,s_n_out,label`, empty cells for undefined values.
pub fn write_aggregates_csv(
    aggregates: &BTreeMap<String, UserSentiment>,
    label_field: Aggregate,
    path: &Path,
) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "user,s_in,s_out,s_n_in,s_n_out,label").unwrap();
    for (u, s) in aggregates {
        writeln!(
            out,
            "{u},{},{},{},{},{}",
            cell(s.s_in),
            cell(s.s_out),
            cell(s.s_n_in),
            cell(s.s_n_out),
            classify_polarity(s.get(label_field))
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_aggregates_csv(path: &Path) -> Result<BTreeMap<String, UserSentiment>> {
    #[derive(Deserialize)]
    struct Row {
        user: String,
        s_in: Option<f64>,
        s_out: Option<f64>,
        s_n_in: Option<f64>,
        s_n_out: Option<f64>,
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let r: Row = row?;
        out.insert(
            r.user,
            UserSentiment {
                s_in: r.s_in,
                s_out: r.s_out,
                s_n_in: r.s_n_in,
                s_n_out: r.s_n_out,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{KindCounts, MentionEdge};

    fn graph(edges: &[(&str, &str, f64)]) -> InteractionGraph {
        InteractionGraph::from_parts(
            std::iter::empty(),
            edges.iter().map(|&(a, b, w)| {
                (
                    (a.to_string(), b.to_string()),
                    MentionEdge {
                        mean_sentiment: w,
                        counts: KindCounts { original: 1, reply: 0, retweet: 0 },
                    },
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn in_and_out_sentiment() {
        let g = graph(&[("a", "c", 1.0), ("b", "c", 3.0), ("d", "e", -4.0)]);
        assert_eq!(user_sentiment(&g, "c").unwrap(), (Some(2.0), None));
        assert_eq!(user_sentiment(&g, "e").unwrap(), (Some(-4.0), None));
        assert_eq!(user_sentiment(&g, "a").unwrap(), (None, Some(1.0)));
        assert!(user_sentiment(&g, "zz").is_err());
    }

    #[test]
    fn neighbour_means_skip_undefined() {
        // star: centre -> leaves, plus leaves receiving extra in-edges
        let g = graph(&[
            ("hub", "l1", 1.0),
            ("hub", "l2", 2.0),
            ("hub", "l3", 3.0),
        ]);
        let all = aggregate_users(&g, NeighbourMode::Both);
        assert_eq!(neighbour_sentiment(&g, "hub", &all, NeighbourMode::Both).unwrap(), (Some(2.0), None));
        assert_eq!(all["hub"].s_n_in, Some(2.0));
        // leaves: their only neighbour is the hub, whose s_in is undefined
        assert_eq!(all["l1"].s_n_in, None);
        assert_eq!(all["l1"].s_n_out, Some(2.0));
        // out-only: leaves have no out-neighbours
        let out_only = aggregate_users(&g, NeighbourMode::OutOnly);
        assert_eq!(out_only["l1"].s_n_out, None);
        assert_eq!(out_only["hub"].s_n_in, Some(2.0));
    }

    #[test]
    fn isolated_node() {
        let g = InteractionGraph::from_parts(["solo".to_string()], std::iter::empty()).unwrap();
        let all = aggregate_users(&g, NeighbourMode::Both);
        assert_eq!(all["solo"], UserSentiment::default());
    }

    #[test]
    fn polarity() {
        assert_eq!(classify_polarity(Some(0.5)), PolarityLabel::Positive);
        assert_eq!(classify_polarity(Some(0.0)), PolarityLabel::Unknown);
        assert_eq!(classify_polarity(Some(-0.2)), PolarityLabel::Negative);
        assert_eq!(classify_polarity(None), PolarityLabel::Unknown);
    }

    fn scores(values: &[f64]) -> BTreeMap<String, Option<f64>> {
        values.iter().enumerate().map(|(i, v)| (format!("u{i}"), Some(*v))).collect()
    }

    #[test]
    fn median_and_mean_split() {
        let g = group_users(&scores(&[0.0, 1.0, 2.0, 3.0]), GroupScheme::MedianSplit).unwrap();
        let below: Vec<_> = g.iter().filter(|(_, l)| **l == GroupLabel::Below).map(|(u, _)| u.as_str()).collect();
        assert_eq!(below, ["u0", "u1"]);
        let g = group_users(&scores(&[1.5, 1.5, 1.5]), GroupScheme::MeanSplit).unwrap();
        assert!(g.values().all(|l| *l == GroupLabel::AboveOrEqual));
    }

    #[test]
    fn grouping_skips_undefined_and_errors_when_empty() {
        let mut s = scores(&[1.0, -1.0]);
        s.insert("x".into(), None);
        let g = group_users(&s, GroupScheme::Sign).unwrap();
        assert_eq!(g.len(), 2);
        let none: BTreeMap<String, Option<f64>> = [("x".to_string(), None)].into();
        assert!(group_users(&none, GroupScheme::Sign).is_err());
    }
}
