use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::UserSentiment;
use crate::error::{Error, Result};
use crate::numeric::Scalar;
use crate::stats::mean_defined;

/// Assignment of nodes to communities `0..k`, numbered in order of each
/// community's smallest node id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: BTreeMap<String, usize>,
    k: usize,
}

impl Partition {
    /// Canonicalises arbitrary group keys.
    pub fn from_groups<K: Ord>(groups: impl IntoIterator<Item = (String, K)>) -> Self {
        let sorted: BTreeMap<String, K> = groups.into_iter().collect();
        let mut relabel: BTreeMap<&K, usize> = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for (node, key) in &sorted {
            let next = relabel.len();
            let c = *relabel.entry(key).or_insert(next);
            assignment.insert(node.clone(), c);
        }
        let k = relabel.len();
        Partition { assignment, k }
    }

    /// `labels[i]` is the group of `nodes[i]`.
    pub fn from_labels(nodes: &[String], labels: &[usize]) -> Self {
        assert_eq!(nodes.len(), labels.len());
        Self::from_groups(nodes.iter().cloned().zip(labels.iter().copied()))
    }

    pub fn singletons<'a>(nodes: impl IntoIterator<Item = &'a String>) -> Self {
        Self::from_groups(nodes.into_iter().map(|n| (n.clone(), n.clone())))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn community_of(&self, node: &str) -> Option<usize> {
        self.assignment.get(node).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &String> {
        self.assignment.keys()
    }

    /// Members of each community, indexed by community.
    pub fn cells(&self) -> Vec<Vec<String>> {
        let mut cells = vec![Vec::new(); self.k];
        for (n, &c) in &self.assignment {
            cells[c].push(n.clone());
        }
        cells
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in self.assignment.values() {
            sizes[c] += 1;
        }
        sizes
    }

    fn same_nodes(&self, other: &Partition) -> Result<()> {
        if self.assignment.len() != other.assignment.len()
            || !self.assignment.keys().eq(other.assignment.keys())
        {
            return Err(Error::arg("partitions cover different node sets"));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "user,community").unwrap();
        for (u, c) in &self.assignment {
            writeln!(out, "{u},{c}").unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads `user,<group>` rows; the header's second column name is not checked.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut groups = Vec::new();
        for row in reader.records() {
            let row = row?;
            let (Some(u), Some(c)) = (row.get(0), row.get(1)) else {
                return Err(Error::validation("partition file", format!("{}: short row", path.display())));
            };
            let c: usize = c.trim().parse().map_err(|_| {
                Error::validation("partition file", format!("{}: bad community {c:?}", path.display()))
            })?;
            groups.push((u.to_string(), c));
        }
        Ok(Self::from_groups(groups))
    }
}

fn entropy<T: Scalar>(sizes: impl Iterator<Item = usize>, n: usize) -> T {
    let n = T::of_usize(n);
    sizes
        .filter(|&s| s > 0)
        .map(|s| {
            let p = T::of_usize(s) / n;
            -p * p.ln()
        })
        .sum()
}

/// `H(p1) + H(p2) - 2 I(p1; p2)` in nats.
pub fn variation_of_information<T: Scalar>(p1: &Partition, p2: &Partition) -> Result<T> {
    p1.same_nodes(p2)?;
    let n = p1.len();
    if n == 0 {
        return Ok(T::zero());
    }
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (u, &a) in &p1.assignment {
        *joint.entry((a, p2.assignment[u])).or_default() += 1;
    }
    let h1: T = entropy(p1.sizes().into_iter(), n);
    let h2: T = entropy(p2.sizes().into_iter(), n);
    let h12: T = entropy(joint.values().copied(), n);
    // I = H1 + H2 - H12, so VI = 2 H12 - H1 - H2
    let vi = T::of(2.0) * h12 - h1 - h2;
    Ok(vi.max(T::zero()))
}

/// Nodes share a cell iff they share a community in both partitions.
pub fn intersect_partitions(p1: &Partition, p2: &Partition) -> Result<Partition> {
    p1.same_nodes(p2)?;
    Ok(Partition::from_groups(
        p1.assignment
            .iter()
            .map(|(u, &a)| (u.clone(), (a, p2.assignment[u]))),
    ))
}

/// Drops cells smaller than `min_size`; returns the re-numbered partition of
/// the remaining nodes and the removed nodes.
pub fn prune_small(p: &Partition, min_size: usize) -> Result<(Partition, BTreeSet<String>)> {
    if min_size == 0 {
        return Err(Error::arg("minimum cell size must be positive"));
    }
    let sizes = p.sizes();
    let mut removed = BTreeSet::new();
    let mut kept = Vec::new();
    for (u, &c) in &p.assignment {
        if sizes[c] >= min_size {
            kept.push((u.clone(), c));
        } else {
            removed.insert(u.clone());
        }
    }
    if kept.is_empty() && !p.is_empty() {
        return Err(Error::Consistency(format!(
            "every one of the {} cells has fewer than {min_size} members (largest has {})",
            p.k(),
            sizes.iter().max().copied().unwrap_or(0)
        )));
    }
    Ok((Partition::from_groups(kept), removed))
}

/// Mean in, out, neighbour-in and neighbour-out sentiment of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCommunityProfile {
    pub cell: usize,
    pub members: BTreeSet<String>,
    pub sent_vector: [Option<f64>; 4],
}

impl SubCommunityProfile {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

pub fn subcommunity_profiles(
    p: &Partition,
    aggregates: &BTreeMap<String, UserSentiment>,
) -> Result<Vec<SubCommunityProfile>> {
    p.cells()
        .into_iter()
        .enumerate()
        .map(|(cell, members)| {
            let mut sent = Vec::with_capacity(members.len());
            for m in &members {
                let s = aggregates
                    .get(m)
                    .ok_or_else(|| Error::Consistency(format!("no aggregates for user {m:?}")))?;
                sent.push(s.as_vector());
            }
            let sent_vector = std::array::from_fn(|c| mean_defined(sent.iter().map(|v| v[c])));
            Ok(SubCommunityProfile {
                cell,
                members: members.into_iter().collect(),
                sent_vector,
            })
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV `cell,size,s_in,s_out,s_n_in,s_n_out`.
pub fn write_profiles_csv(profiles: &[SubCommunityProfile], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "cell,size,s_in,s_out,s_n_in,s_n_out").unwrap();
    for p in profiles {
        let [a, b, c, d] = p.sent_vector;
        writeln!(out, "{},{},{},{},{},{}", p.cell, p.size(), cell(a), cell(b), cell(c), cell(d)).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(groups: &[(&str, usize)]) -> Partition {
        Partition::from_groups(groups.iter().map(|(u, c)| (u.to_string(), *c)))
    }

    #[test]
    fn canonical_numbering() {
        let p = part(&[("d", 7), ("a", 3), ("c", 7), ("b", 1)]);
        assert_eq!(p.k(), 3);
        assert_eq!(p.community_of("a"), Some(0));
        assert_eq!(p.community_of("b"), Some(1));
        assert_eq!(p.community_of("c"), Some(2));
        assert_eq!(p, part(&[("a", 0), ("b", 5), ("c", 9), ("d", 9)]));
    }

    #[test]
    fn vi_four_node_case() {
        let p1 = part(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let p2 = part(&[("a", 0), ("b", 1), ("c", 0), ("d", 1)]);
        let vi: f64 = variation_of_information(&p1, &p2).unwrap();
        assert!((vi - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let vi32: f32 = variation_of_information(&p1, &p2).unwrap();
        assert!((vi32 - 1.386_294_4).abs() < 1e-5);
        assert_eq!(variation_of_information::<f64>(&p1, &p1).unwrap(), 0.0);
        let other = part(&[("a", 0), ("b", 0), ("c", 1), ("x", 1)]);
        assert!(variation_of_information::<f64>(&p1, &other).is_err());
    }

    #[test]
    fn intersection_examples() {
        let p1 = part(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let p2 = part(&[("a", 0), ("b", 1), ("c", 0), ("d", 1)]);
        assert_eq!(intersect_partitions(&p1, &p2).unwrap().k(), 4);
        assert_eq!(intersect_partitions(&p1, &p1).unwrap(), p1);
    }

    #[test]
    fn pruning() {
        let mut groups = Vec::new();
        for (c, size) in [(0usize, 25usize), (1, 20), (2, 3)] {
            for i in 0..size {
                groups.push((format!("c{c}_{i:02}"), c));
            }
        }
        let p = Partition::from_groups(groups);
        let (kept, removed) = prune_small(&p, 21).unwrap();
        assert_eq!(kept.k(), 1);
        assert_eq!(kept.len(), 25);
        assert_eq!(removed.len(), 23);
        assert_eq!(prune_small(&p, 1).unwrap().0, p);
        assert!(prune_small(&p, 26).is_err());
        assert!(prune_small(&p, 0).is_err());
    }

    #[test]
    fn profiles() {
        let p = part(&[("a", 0), ("b", 0), ("c", 1)]);
        let agg = BTreeMap::from([
            ("a".to_string(), UserSentiment { s_in: None, s_out: Some(1.0), s_n_in: None, s_n_out: Some(0.5) }),
            ("b".to_string(), UserSentiment { s_in: None, s_out: Some(3.0), s_n_in: None, s_n_out: None }),
            ("c".to_string(), UserSentiment { s_in: Some(-1.0), s_out: Some(2.0), s_n_in: Some(0.0), s_n_out: Some(1.0) }),
        ]);
        let prof = subcommunity_profiles(&p, &agg).unwrap();
        assert_eq!(prof[0].sent_vector, [None, Some(2.0), None, Some(0.5)]);
        assert_eq!(prof[1].sent_vector, agg["c"].as_vector());
        assert_eq!(prof[0].size(), 2);
        let missing = part(&[("zz", 0)]);
        assert!(subcommunity_profiles(&missing, &agg).is_err());
    }
}
