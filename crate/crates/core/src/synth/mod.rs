//! Synthetic corpora with planted groups.
//!
//! Users are split into blocks. Every ordered pair of users `(u, v)` sends a
//! Poisson number of mentions at the rate configured for their block pair,
//! follows with the configured probability, and each message carries a
//! difference score drawn around the block pair's sentiment mean. Message
//! text is assembled from test-lexicon terms so the scorer recovers the
//! planted score exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::Rng as _;
use rand_distr::{Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FollowerEdgeList, Message, MessageKind};
use crate::error::{Error, Result};
use crate::lexicon::{score_corpus, Lexicon, SentimentScore};
use crate::rng::{derive_seed, substream};

pub mod fixtures;

pub const DAY: i64 = 86_400;

/// Positive terms indexed by strength 2..=5 in the test lexicon.
const POSITIVE: [&str; 4] = ["nice", "good", "great", "love"];
const NEGATIVE: [&str; 4] = ["poor", "bad", "awful", "hate"];
const FILLERS: [&str; 6] = ["about", "the", "vote", "today", "people", "friday"];

/// Kind probabilities, either one triple for all pairs or one per block pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KindMix {
    Uniform([f64; 3]),
    PerPair(Vec<Vec<[f64; 3]>>),
}

impl Default for KindMix {
    fn default() -> Self {
        KindMix::Uniform([0.4, 0.3, 0.3])
    }
}

impl KindMix {
    fn get(&self, a: usize, b: usize) -> [f64; 3] {
        match self {
            KindMix::Uniform(p) => *p,
            KindMix::PerPair(m) => m[a][b],
        }
    }
}

fn default_days() -> u32 {
    7
}
fn default_start() -> i64 {
    1_431_900_000
}
fn default_hashtags() -> Vec<String> {
    vec!["synth".into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Users per block.
    pub groups: Vec<usize>,
    /// Ground-truth group of each block; defaults to the block index.
    #[serde(default)]
    pub truth: Option<Vec<usize>>,
    /// Expected mentions per ordered user pair, by block pair.
    pub mention_rates: Vec<Vec<f64>>,
    pub follow_probs: Vec<Vec<f64>>,
    pub sentiment_means: Vec<Vec<f64>>,
    #[serde(default)]
    pub sentiment_noise: f64,
    #[serde(default)]
    pub kind_mix: KindMix,
    #[serde(default = "default_days")]
    pub days: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_ts: i64,
    #[serde(default = "default_hashtags")]
    pub hashtags: Vec<String>,
}

impl Default for SynthConfig {
    /// Two blocks of 20 users with homophilous mentions and follows.
    fn default() -> Self {
        SynthConfig {
            groups: vec![20, 20],
            truth: None,
            mention_rates: vec![vec![0.3, 0.02], vec![0.02, 0.3]],
            follow_probs: vec![vec![0.4, 0.02], vec![0.02, 0.4]],
            sentiment_means: vec![vec![2.0, -2.0], vec![-2.0, 2.0]],
            sentiment_noise: 1.0,
            kind_mix: KindMix::default(),
            days: default_days(),
            seed: 1,
            start_ts: default_start(),
            hashtags: default_hashtags(),
        }
    }
}

fn check_matrix(name: &str, m: &[Vec<f64>], g: usize, ok: impl Fn(f64) -> bool, range: &str) -> Result<()> {
    if m.len() != g || m.iter().any(|r| r.len() != g) {
        return Err(Error::arg(format!("{name} must be a {g}x{g} matrix")));
    }
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || !ok(v) {
                return Err(Error::arg(format!("{name}[{i}][{j}] = {v} outside {range}")));
            }
        }
    }
    Ok(())
}

fn check_mix(p: [f64; 3]) -> Result<()> {
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("kind mix {p:?} is not a probability vector")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.groups.len();
        if self.groups.contains(&0) {
            return Err(Error::arg("group sizes must be positive"));
        }
        if let Some(t) = &self.truth {
            if t.len() != g {
                return Err(Error::arg(format!("truth has {} entries for {g} groups", t.len())));
            }
        }
        check_matrix("mention_rates", &self.mention_rates, g, |v| v >= 0.0, "[0, inf)")?;
        check_matrix("follow_probs", &self.follow_probs, g, |v| (0.0..=1.0).contains(&v), "[0, 1]")?;
        check_matrix("sentiment_means", &self.sentiment_means, g, |v| (-4.0..=4.0).contains(&v), "[-4, 4]")?;
        if !(self.sentiment_noise.is_finite() && self.sentiment_noise >= 0.0) {
            return Err(Error::arg("sentiment_noise must be >= 0"));
        }
        match &self.kind_mix {
            KindMix::Uniform(p) => check_mix(*p)?,
            KindMix::PerPair(m) => {
                if m.len() != g || m.iter().any(|r| r.len() != g) {
                    return Err(Error::arg(format!("kind_mix must be a {g}x{g} matrix")));
                }
                m.iter().flatten().try_for_each(|p| check_mix(*p))?;
            }
        }
        if self.days == 0 {
            return Err(Error::arg("days must be positive"));
        }
        if self.hashtags.is_empty() {
            return Err(Error::arg("at least one hashtag is required"));
        }
        Ok(())
    }

    pub fn from_json(content: &str) -> Result<Self> {
        let c: SynthConfig = serde_json::from_str(content)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn user_count(&self) -> usize {
        self.groups.iter().sum()
    }
}

pub fn user_name(index: usize) -> String {
    format!("u{:04}", index + 1)
}

/// Text whose test-lexicon score is exactly `(positive, negative)`.
pub fn template_text(score: SentimentScore, filler: usize) -> String {
    let mut words = Vec::new();
    if score.positive() > 1 {
        words.push(POSITIVE[(score.positive() - 2) as usize]);
    }
    words.push(FILLERS[filler % FILLERS.len()]);
    if score.negative() < -1 {
        words.push(NEGATIVE[(-score.negative() - 2) as usize]);
    }
    words.join(" ")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub followers: FollowerEdgeList,
    /// User → ground-truth group.
    pub truth: BTreeMap<String, usize>,
    /// User → block.
    pub blocks: BTreeMap<String, usize>,
    pub planted: BTreeMap<String, SentimentScore>,
}

struct Draft {
    author: usize,
    target: usize,
    ts: i64,
    kind: MessageKind,
    score: SentimentScore,
    filler: usize,
    tag: usize,
}

/// Picks a `(positive, negative)` pair summing to `d` uniformly among valid ones.
fn split_difference(d: i8, rng: &mut impl rand::Rng) -> SentimentScore {
    let lo = (d + 1).max(1);
    let hi = (d + 5).min(5);
    let p = rng.random_range(lo..=hi);
    SentimentScore::new(p, d - p).expect("valid split")
}

fn pair_messages(c: &SynthConfig, block: &[usize], u: usize, v: usize, seed: u64) -> Result<Vec<Draft>> {
    let (a, b) = (block[u], block[v]);
    let rate = c.mention_rates[a][b];
    if rate == 0.0 {
        return Ok(Vec::new());
    }
    let n = block.len();
    let mut rng = substream(seed, (u * n + v) as u64);
    let count = Poisson::new(rate).map_err(|e| Error::arg(e.to_string()))?.sample(&mut rng) as usize;
    let noise = Normal::new(0.0, c.sentiment_noise).map_err(|e| Error::arg(e.to_string()))?;
    let time = Uniform::new(0, i64::from(c.days) * DAY).expect("positive span");
    let mix = c.kind_mix.get(a, b);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x: f64 = rng.random();
        let kind = if x < mix[0] {
            MessageKind::Original
        } else if x < mix[0] + mix[1] {
            MessageKind::Reply
        } else {
            MessageKind::Retweet
        };
        let d = (c.sentiment_means[a][b] + noise.sample(&mut rng)).round().clamp(-4.0, 4.0) as i8;
        out.push(Draft {
            author: u,
            target: v,
            ts: c.start_ts + time.sample(&mut rng),
            kind,
            score: split_difference(d, &mut rng),
            filler: rng.random_range(0..FILLERS.len()),
            tag: rng.random_range(0..c.hashtags.len()),
        });
    }
    Ok(out)
}

fn render(c: &SynthConfig, d: &Draft, id: String) -> Message {
    let target = user_name(d.target);
    let tag = c.hashtags[d.tag].trim_start_matches('#').to_lowercase();
    let body = template_text(d.score, d.filler);
    let (text, reply_to, retweet_of) = match d.kind {
        MessageKind::Original => (format!("{body} @{target} #{tag}"), None, None),
        MessageKind::Reply => (format!("@{target} {body} #{tag}"), Some(target.clone()), None),
        MessageKind::Retweet => (format!("RT @{target} {body} #{tag}"), None, Some(target.clone())),
    };
    Message {
        id,
        author: user_name(d.author),
        timestamp: d.ts,
        text,
        kind: d.kind,
        reply_to,
        retweet_of,
        mentions: vec![target],
        hashtags: vec![tag],
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let block: Vec<usize> = config
        .groups
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = block.len();
    let mention_seed = derive_seed(config.seed, 0);
    let follow_seed = derive_seed(config.seed, 1);

    let rows: Vec<(Vec<Draft>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut drafts = Vec::new();
            let mut follows = Vec::new();
            for v in (0..n).filter(|&v| v != u) {
                drafts.extend(pair_messages(config, &block, u, v, mention_seed)?);
                let p = config.follow_probs[block[u]][block[v]];
                if p > 0.0 && substream(follow_seed, (u * n + v) as u64).random_bool(p) {
                    follows.push(v);
                }
            }
            Ok((drafts, follows))
        })
        .collect::<Result<_>>()?;

    let mut messages = Vec::new();
    let mut planted = BTreeMap::new();
    let mut edges = Vec::new();
    for (u, (drafts, follows)) in rows.iter().enumerate() {
        for d in drafts {
            let id = format!("s{:08}", messages.len() + 1);
            planted.insert(id.clone(), d.score);
            messages.push(render(config, d, id));
        }
        edges.extend(follows.iter().map(|&v| (user_name(u), user_name(v))));
    }
    let blocks: BTreeMap<String, usize> = block.iter().enumerate().map(|(i, &b)| (user_name(i), b)).collect();
    let truth = blocks
        .iter()
        .map(|(u, &b)| (u.clone(), config.truth.as_ref().map_or(b, |t| t[b])))
        .collect();
    Ok(SynthOutput {
        corpus: Corpus::new(messages),
        followers: FollowerEdgeList::new(edges),
        truth,
        blocks,
        planted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub id: String,
    pub text: String,
    pub planted: SentimentScore,
    pub recovered: SentimentScore,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub messages: usize,
    pub mismatches: Vec<Mismatch>,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Scores `out` with the test lexicon and lists messages whose score differs from the planted one.
pub fn roundtrip_report(out: &SynthOutput) -> RoundtripReport {
    let scores = score_corpus(&Lexicon::test_lexicon(), &out.corpus);
    let mismatches = out
        .corpus
        .messages()
        .iter()
        .filter_map(|m| {
            let planted = out.planted[&m.id];
            let recovered = scores[&m.id];
            (planted != recovered).then(|| Mismatch { id: m.id.clone(), text: m.text.clone(), planted, recovered })
        })
        .collect();
    RoundtripReport { messages: out.corpus.len(), mismatches }
}

/// Generates the corpus and checks that scoring recovers every planted score.
pub fn verify_roundtrip(config: &SynthConfig) -> Result<RoundtripReport> {
    Ok(roundtrip_report(&generate(config)?))
}

/// Renders every `(positive, negative)` cell with every filler and kind and
/// scores the result.
pub fn verify_templates() -> RoundtripReport {
    let config = SynthConfig { hashtags: vec!["synth".into()], ..SynthConfig::default() };
    let mut drafts = Vec::new();
    for p in 1..=5i8 {
        for q in -5..=-1i8 {
            for filler in 0..FILLERS.len() {
                for kind in MessageKind::ALL {
                    let score = SentimentScore::new(p, q).expect("valid cell");
                    drafts.push(Draft { author: 0, target: 1, ts: config.start_ts, kind, score, filler, tag: 0 });
                }
            }
        }
    }
    let mut messages = Vec::new();
    let mut planted = BTreeMap::new();
    for (i, d) in drafts.iter().enumerate() {
        let id = format!("t{i:05}");
        planted.insert(id.clone(), d.score);
        messages.push(render(&config, d, id));
    }
    roundtrip_report(&SynthOutput { corpus: Corpus::new(messages), planted, ..SynthOutput::default() })
}

pub fn write_truth_csv(truth: &BTreeMap<String, usize>, path: &Path) -> Result<()> {
    let mut out = String::from("user,group\n");
    for (u, g) in truth {
        out.push_str(&format!("{u},{g}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_truth_csv(path: &Path) -> Result<BTreeMap<String, usize>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let (u, g): (String, usize) = row?;
        out.insert(u, g);
    }
    Ok(out)
}

/// Writes `corpus.jsonl`, `followers.csv` and `truth.csv` into `dir`.
pub fn write_outputs(out: &SynthOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.corpus.write_jsonl(&dir.join("corpus.jsonl"))?;
    out.followers.write_csv(&dir.join("followers.csv"))?;
    write_truth_csv(&out.truth, &dir.join("truth.csv"))?;
    let path = dir.join("planted_scores.csv");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut body = String::from("id,positive,negative\n");
    for (id, s) in &out.planted {
        body.push_str(&format!("{id},{},{}\n", s.positive(), s.negative()));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_mention_graph, DirectedGraph};

    #[test]
    fn same_seed_same_output() {
        let c = SynthConfig::default();
        let a = generate(&c).unwrap();
        let b = generate(&c).unwrap();
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_eq!(a.followers, b.followers);
        let other = generate(&SynthConfig { seed: 2, ..c }).unwrap();
        assert_ne!(a.corpus.to_jsonl(), other.corpus.to_jsonl());
    }

    #[test]
    fn no_inter_rates_no_cross_edges() {
        let c = SynthConfig { mention_rates: vec![vec![0.3, 0.0], vec![0.0, 0.3]], ..SynthConfig::default() };
        let out = generate(&c).unwrap();
        let scores = score_corpus(&Lexicon::test_lexicon(), &out.corpus);
        let g = build_mention_graph(&out.corpus, &scores).unwrap();
        assert!(g.edge_count() > 0);
        assert!(g.edge_pairs().iter().all(|(a, b)| out.blocks[*a] == out.blocks[*b]));
    }

    #[test]
    fn zero_noise_fixes_difference() {
        let c = SynthConfig {
            sentiment_means: vec![vec![3.0, 0.0], vec![0.0, 3.0]],
            sentiment_noise: 0.0,
            ..SynthConfig::default()
        };
        let out = generate(&c).unwrap();
        let scores = score_corpus(&Lexicon::test_lexicon(), &out.corpus);
        for m in out.corpus.messages() {
            if out.blocks[&m.author] == out.blocks[&m.mentions[0]] {
                assert_eq!(scores[&m.id].difference(), 3, "{}", m.text);
            }
        }
    }

    #[test]
    fn roundtrip_and_template_sweep() {
        let r = verify_roundtrip(&SynthConfig::default()).unwrap();
        assert!(r.messages > 0);
        assert!(r.passed(), "{:?}", r.mismatches);
        let t = verify_templates();
        assert_eq!(t.messages, 25 * FILLERS.len() * 3);
        assert!(t.passed(), "{:?}", t.mismatches);
        let empty = SynthConfig {
            mention_rates: vec![vec![0.0; 2]; 2],
            ..SynthConfig::default()
        };
        let e = verify_roundtrip(&empty).unwrap();
        assert_eq!(e.messages, 0);
        assert!(e.passed());
    }

    #[test]
    fn invalid_configs() {
        let base = SynthConfig::default();
        let bad = [
            SynthConfig { groups: vec![0, 20], ..base.clone() },
            SynthConfig { follow_probs: vec![vec![1.5, 0.0], vec![0.0, 0.1]], ..base.clone() },
            SynthConfig { sentiment_means: vec![vec![5.0, 0.0], vec![0.0, 0.1]], ..base.clone() },
            SynthConfig { kind_mix: KindMix::Uniform([0.5, 0.5, 0.5]), ..base.clone() },
            SynthConfig { mention_rates: vec![vec![0.1]], ..base.clone() },
            SynthConfig { days: 0, ..base.clone() },
        ];
        for c in bad {
            assert!(matches!(generate(&c), Err(Error::Argument(_))), "{c:?}");
        }
    }

    #[test]
    fn config_json_defaults() {
        let c = SynthConfig::from_json(
            r#"{"groups":[3],"mention_rates":[[1.0]],"follow_probs":[[0.5]],"sentiment_means":[[0.0]]}"#,
        )
        .unwrap();
        assert_eq!(c.days, 7);
        assert_eq!(c.kind_mix, KindMix::default());
    }
}
