//! Message corpora and follower edge lists.
//!
//! Message files are JSON Lines with one record per line:
//!
//! ```text
//! {"id":"1","author":"alice","ts":1431900000,"text":"vote yes @bob","reply_to":null,"retweet_of":null,"hashtags":["marref"]}
//! ```
//!
//! `hashtags` and `mentions` are optional. When `hashtags` is absent it is
//! derived from `#` tokens in the text; when `mentions` is present it is used
//! instead of scanning the text (see [`ParseOptions::prefer_entity_mentions`]).
//! User identifiers are lowercased on ingest.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum username length accepted by [`extract_mentions`].
pub const MAX_MENTION_LEN: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Original,
    Reply,
    Retweet,
}

impl MessageKind {
    pub const ALL: [MessageKind; 3] = [MessageKind::Original, MessageKind::Reply, MessageKind::Retweet];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Original => "original",
            MessageKind::Reply => "reply",
            MessageKind::Retweet => "retweet",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub author: String,
    pub timestamp: i64,
    pub text: String,
    pub kind: MessageKind,
    pub reply_to: Option<String>,
    pub retweet_of: Option<String>,
    pub mentions: Vec<String>,
    pub hashtags: Vec<String>,
}

/// Time-ordered collection of messages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    messages: Vec<Message>,
    users: BTreeSet<String>,
}

impl Corpus {
    pub fn new(mut messages: Vec<Message>) -> Self {
        messages.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        let users = messages.iter().map(|m| m.author.clone()).collect();
        Corpus { messages, users }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn users(&self) -> &BTreeSet<String> {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    fn filtered(&self, keep: impl Fn(&Message) -> bool) -> Corpus {
        Corpus::new(self.messages.iter().filter(|m| keep(m)).cloned().collect())
    }

    /// Canonical JSON Lines rendering; parsing it back yields the same corpus.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let record = OutRecord {
                id: &m.id,
                author: &m.author,
                ts: m.timestamp,
                text: &m.text,
                reply_to: m.reply_to.as_deref(),
                retweet_of: m.retweet_of.as_deref(),
                hashtags: &m.hashtags,
                mentions: &m.mentions,
            };
            out.push_str(&serde_json::to_string(&record).expect("record serialization"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    author: &'a str,
    ts: i64,
    text: &'a str,
    reply_to: Option<&'a str>,
    retweet_of: Option<&'a str>,
    hashtags: &'a [String],
    mentions: &'a [String],
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    author: Option<String>,
    ts: Option<i64>,
    text: Option<String>,
    #[serde(default)]
    reply_to: Option<String>,
    #[serde(default)]
    retweet_of: Option<String>,
    #[serde(default)]
    hashtags: Option<Vec<String>>,
    #[serde(default)]
    mentions: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug)]
pub struct ParseOptions {
    /// Use a record's `mentions` array, when present, instead of scanning its text.
    pub prefer_entity_mentions: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            prefer_entity_mentions: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Reject {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct ParsedCorpus {
    pub corpus: Corpus,
    pub rejects: Vec<Reject>,
    pub warnings: Vec<String>,
    /// Non-blank lines seen.
    pub records: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    Jsonl,
}

pub fn parse_corpus(path: &Path, schema: Schema) -> Result<ParsedCorpus> {
    parse_corpus_with(path, schema, ParseOptions::default())
}

pub fn parse_corpus_with(path: &Path, schema: Schema, options: ParseOptions) -> Result<ParsedCorpus> {
    let Schema::Jsonl = schema;
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_jsonl_str(&content, options);
    if parsed.rejects.len() * 2 > parsed.records {
        return Err(Error::CorruptInput {
            path: path.to_path_buf(),
            rejected: parsed.rejects.len(),
            total: parsed.records,
        });
    }
    Ok(parsed)
}

/// Parses JSON Lines content without applying the corrupt-input threshold.
pub fn parse_jsonl_str(content: &str, options: ParseOptions) -> ParsedCorpus {
    let lines: Vec<(usize, &str)> = content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let results: Vec<(usize, std::result::Result<(Message, bool), String>)> = lines
        .par_iter()
        .map(|&(line, text)| (line, parse_record(text, options)))
        .collect();

    let mut messages = Vec::with_capacity(results.len());
    let mut rejects = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_ids = HashSet::new();
    for (line, result) in results {
        match result {
            Ok((message, both_markers)) => {
                if !seen_ids.insert(message.id.clone()) {
                    rejects.push(Reject {
                        line,
                        reason: format!("duplicate id {:?}", message.id),
                    });
                    continue;
                }
                if both_markers {
                    warnings.push(format!(
                        "line {line}: both reply_to and retweet_of set; classified as retweet"
                    ));
                }
                messages.push(message);
            }
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    }
    ParsedCorpus {
        corpus: Corpus::new(messages),
        rejects,
        warnings,
        records: lines.len(),
    }
}

fn parse_record(line: &str, options: ParseOptions) -> std::result::Result<(Message, bool), String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let id = raw.id.ok_or("missing field \"id\"")?;
    let author = normalize_user(&raw.author.ok_or("missing field \"author\"")?);
    let timestamp = raw.ts.ok_or("missing field \"ts\"")?;
    let text = raw.text.ok_or("missing field \"text\"")?;
    if author.is_empty() {
        return Err("empty author".into());
    }
    let reply_to = raw.reply_to.map(|u| normalize_user(&u)).filter(|u| !u.is_empty());
    let retweet_of = raw.retweet_of.map(|u| normalize_user(&u)).filter(|u| !u.is_empty());
    let class = classify_kind(reply_to.as_deref(), retweet_of.as_deref());

    let base = match raw.mentions {
        Some(entities) if options.prefer_entity_mentions => {
            entities.iter().map(|u| normalize_user(u)).collect()
        }
        _ => extract_mentions(&text),
    };
    let target = match class.kind {
        MessageKind::Retweet => retweet_of.clone(),
        MessageKind::Reply => reply_to.clone(),
        MessageKind::Original => None,
    };
    let mentions = merge_mentions(target, base);

    let hashtags = match raw.hashtags {
        Some(tags) => dedup_ordered(tags.iter().map(|t| normalize_tag(t))),
        None => extract_hashtags(&text),
    };

    Ok((
        Message {
            id,
            author,
            timestamp,
            text,
            kind: class.kind,
            reply_to,
            retweet_of,
            mentions,
            hashtags,
        },
        class.both_markers,
    ))
}

fn normalize_user(user: &str) -> String {
    user.trim().trim_start_matches('@').to_lowercase()
}

fn normalize_tag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

fn dedup_ordered(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect()
}

/// The reply/retweet target leads the mention list when it is not already in it.
fn merge_mentions(target: Option<String>, base: Vec<String>) -> Vec<String> {
    match target {
        Some(t) if !base.contains(&t) => dedup_ordered(std::iter::once(t).chain(base)),
        _ => dedup_ordered(base),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KindClass {
    pub kind: MessageKind,
    /// Both markers were present; the record was classified as a retweet.
    pub both_markers: bool,
}

pub fn classify_kind(reply_to: Option<&str>, retweet_of: Option<&str>) -> KindClass {
    let kind = match (reply_to, retweet_of) {
        (_, Some(_)) => MessageKind::Retweet,
        (Some(_), None) => MessageKind::Reply,
        (None, None) => MessageKind::Original,
    };
    KindClass {
        kind,
        both_markers: reply_to.is_some() && retweet_of.is_some(),
    }
}

fn is_username_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// `@name` tokens at the start of a whitespace-delimited token, where `name`
/// is 1 to 15 ASCII word characters. Lowercased, deduplicated, in order of
/// first occurrence.
pub fn extract_mentions(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut found = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let at_token_start = i == 0 || chars[i - 1].is_whitespace();
        if chars[i] == '@' && at_token_start {
            let start = i + 1;
            let mut end = start;
            while end < chars.len() && is_username_char(chars[end]) {
                end += 1;
            }
            let len = end - start;
            if (1..=MAX_MENTION_LEN).contains(&len) {
                found.push(chars[start..end].iter().collect::<String>().to_lowercase());
            }
            i = end.max(i + 1);
        } else {
            i += 1;
        }
    }
    dedup_ordered(found)
}

/// `#tag` tokens at token start, lowercased and without the `#`.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    let tags = text.split_whitespace().filter_map(|token| {
        let rest = token.strip_prefix('#')?;
        let tag: String = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        (!tag.is_empty()).then(|| tag.to_lowercase())
    });
    dedup_ordered(tags)
}

/// Messages with `t0 <= timestamp < t1`.
pub fn filter_window(corpus: &Corpus, t0: i64, t1: i64) -> Result<Corpus> {
    if t0 > t1 {
        return Err(Error::arg(format!("time window start {t0} is after end {t1}")));
    }
    Ok(corpus.filtered(|m| t0 <= m.timestamp && m.timestamp < t1))
}

/// Messages carrying at least one of `tags`.
pub fn filter_hashtags(corpus: &Corpus, tags: &BTreeSet<String>) -> Result<Corpus> {
    if tags.is_empty() {
        return Err(Error::arg("hashtag filter needs at least one tag"));
    }
    let tags: HashSet<String> = tags.iter().map(|t| normalize_tag(t)).collect();
    Ok(corpus.filtered(|m| m.hashtags.iter().any(|h| tags.contains(h))))
}

/// Directed `(follower, followee)` pairs, sorted, without duplicates or self-loops.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FollowerEdgeList {
    edges: Vec<(String, String)>,
}

impl FollowerEdgeList {
    pub fn new(edges: impl IntoIterator<Item = (String, String)>) -> Self {
        let set: BTreeSet<(String, String)> = edges
            .into_iter()
            .map(|(a, b)| (normalize_user(&a), normalize_user(&b)))
            .filter(|(a, b)| a != b && !a.is_empty() && !b.is_empty())
            .collect();
        FollowerEdgeList {
            edges: set.into_iter().collect(),
        }
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "follower,followee").unwrap();
        for (a, b) in &self.edges {
            writeln!(out, "{a},{b}").unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Deserialize)]
struct FollowerRow {
    follower: String,
    followee: String,
}

pub fn parse_followers(path: &Path) -> Result<FollowerEdgeList> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["follower", "followee"] {
        return Err(Error::validation(
            "follower file",
            format!("{}: expected header follower,followee", path.display()),
        ));
    }
    let mut edges = Vec::new();
    for row in reader.deserialize() {
        let row: FollowerRow = row?;
        edges.push((row.follower, row.followee));
    }
    Ok(FollowerEdgeList::new(edges))
}
