//! Rule-based lexicon sentiment scoring.
//!
//! A text receives a positive strength in `1..=5` and a negative strength in
//! `-5..=-1`; `(1, -1)` means no sentiment was detected. Word strengths come
//! from a [`Lexicon`] and are adjusted by three rules: repeated letters add
//! emphasis, boosters in the preceding window shift the magnitude, and the
//! nearest negation in the window flips the sign. A second negation is
//! deliberately ignored, so "not not good" still reads as negative.
//!
//! Lexicon files are UTF-8 TSV:
//!
//! ```text
//! term	class	value
//! good	term	3
//! hate*	term	-5
//! very	booster	1
//! not	negation
//! ```
//!
//! A trailing `*` marks a stem matched as a prefix.

// the file format example needs literal tabs
#![allow(clippy::tabs_in_doc_comments)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Contents of `lexicon/test_lexicon.tsv`.
pub const TEST_LEXICON_TSV: &str = include_str!("../../../lexicon/test_lexicon.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryClass {
    Term { strength: i8, stem: bool },
    Booster(i8),
    Negation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    exact: BTreeMap<String, i8>,
    /// Sorted by descending length so the first prefix hit is the longest.
    stems: Vec<(String, i8)>,
    boosters: BTreeMap<String, i8>,
    negations: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_entries<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, EntryClass)>) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        let mut seen = BTreeSet::new();
        for (raw, class) in entries {
            let term = normalize_word(raw.as_ref().trim_end_matches('*'));
            if term.is_empty() {
                return Err(Error::validation("lexicon", format!("empty term {:?}", raw.as_ref())));
            }
            if !seen.insert(term.clone()) {
                return Err(Error::validation(
                    "lexicon",
                    format!("term {term:?} listed more than once"),
                ));
            }
            match class {
                EntryClass::Term { strength, stem } => {
                    if !(2..=5).contains(&strength.unsigned_abs()) {
                        return Err(Error::validation(
                            "lexicon",
                            format!("strength {strength} of {term:?} outside [2,5] / [-5,-2]"),
                        ));
                    }
                    if stem {
                        lexicon.stems.push((term, strength));
                    } else {
                        lexicon.exact.insert(term, strength);
                    }
                }
                EntryClass::Booster(value) => {
                    if !matches!(value, -2 | -1 | 1 | 2) {
                        return Err(Error::validation(
                            "lexicon",
                            format!("booster value {value} of {term:?} not in {{-2,-1,1,2}}"),
                        ));
                    }
                    lexicon.boosters.insert(term, value);
                }
                EntryClass::Negation => {
                    lexicon.negations.insert(term);
                }
            }
        }
        lexicon
            .stems
            .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(lexicon)
    }

    pub fn parse_tsv(content: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Ok(Lexicon::default());
        };
        let header: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
        if header != ["term", "class", "value"] {
            return Err(Error::validation("lexicon", "expected header term<TAB>class<TAB>value"));
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let (term, class, value) = match cols.as_slice() {
                [t, c] => (*t, *c, ""),
                [t, c, v] => (*t, *c, v.trim()),
                _ => {
                    return Err(Error::validation("lexicon", format!("line {line_no}: expected 3 columns")));
                }
            };
            let parse_value = || {
                value.parse::<i8>().map_err(|_| {
                    Error::validation("lexicon", format!("line {line_no}: bad value {value:?}"))
                })
            };
            let class = match class.trim() {
                "term" => EntryClass::Term {
                    strength: parse_value()?,
                    stem: term.ends_with('*'),
                },
                "booster" => EntryClass::Booster(parse_value()?),
                "negation" if value.is_empty() => EntryClass::Negation,
                "negation" => {
                    return Err(Error::validation(
                        "lexicon",
                        format!("line {line_no}: negation {term:?} must have an empty value"),
                    ));
                }
                other => {
                    return Err(Error::validation("lexicon", format!("line {line_no}: unknown class {other:?}")));
                }
            };
            entries.push((term.to_string(), class));
        }
        Lexicon::from_entries(entries)
    }

    /// The lexicon shipped with the repository.
    pub fn test_lexicon() -> Self {
        Lexicon::parse_tsv(TEST_LEXICON_TSV).expect("bundled test lexicon is valid")
    }

    pub fn term_count(&self) -> usize {
        self.exact.len() + self.stems.len()
    }

    pub fn booster_count(&self) -> usize {
        self.boosters.len()
    }

    pub fn negation_count(&self) -> usize {
        self.negations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.term_count() + self.boosters.len() + self.negations.len() == 0
    }

    fn term_strength(&self, word: &str) -> Option<i8> {
        if let Some(&s) = self.exact.get(word) {
            return Some(s);
        }
        self.stems
            .iter()
            .find(|(stem, _)| word.starts_with(stem.as_str()))
            .map(|&(_, s)| s)
    }

    fn classify(&self, token: &Token) -> WordRole {
        let forms = std::iter::once(token.text.as_str()).chain(token.squeezed.as_deref());
        for form in forms.clone() {
            if let Some(&b) = self.boosters.get(form) {
                return WordRole::Booster(b);
            }
            if self.negations.contains(form) {
                return WordRole::Negation;
            }
        }
        if let Some(&s) = forms.clone().find_map(|f| self.exact.get(f)) {
            return WordRole::Term(s);
        }
        forms
            .filter_map(|f| self.term_strength(f))
            .next()
            .map_or(WordRole::Neutral, WordRole::Term)
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lexicon::parse_tsv(&content)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WordRole {
    Term(i8),
    Booster(i8),
    Negation,
    Neutral,
}

/// A normalised word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// Lowercase, punctuation removed, letter runs of 3+ cut to 2.
    pub text: String,
    /// The word contained a letter repeated 3 or more times.
    pub emphasis: bool,
    /// Form with those runs cut to a single letter, when it differs from `text`.
    pub squeezed: Option<String>,
}

fn normalize_word(word: &str) -> String {
    word.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn collapse_runs(word: &str, keep: usize) -> (String, bool) {
    let chars: Vec<char> = word.chars().collect();
    let mut out = String::with_capacity(word.len());
    let mut emphasis = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let mut j = i;
        while j < chars.len() && chars[j] == c {
            j += 1;
        }
        let run = j - i;
        let take = if c.is_alphabetic() && run >= 3 {
            emphasis = true;
            keep
        } else {
            run
        };
        out.extend(std::iter::repeat_n(c, take));
        i = j;
    }
    (out, emphasis)
}

pub fn normalize_tokens(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(normalize_word)
        .filter(|w| !w.is_empty())
        .map(|w| {
            let (text, emphasis) = collapse_runs(&w, 2);
            let squeezed = emphasis.then(|| collapse_runs(&w, 1).0).filter(|s| *s != text);
            Token {
                text,
                emphasis,
                squeezed,
            }
        })
        .collect()
}

/// Dual sentiment score of one text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i8, i8)", into = "(i8, i8)")]
pub struct SentimentScore {
    positive: i8,
    negative: i8,
}

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore {
        positive: 1,
        negative: -1,
    };

    pub fn new(positive: i8, negative: i8) -> Result<Self> {
        if !(1..=5).contains(&positive) || !(-5..=-1).contains(&negative) {
            return Err(Error::arg(format!(
                "score ({positive}, {negative}) outside [1,5] x [-5,-1]"
            )));
        }
        Ok(SentimentScore { positive, negative })
    }

    pub fn positive(self) -> i8 {
        self.positive
    }

    pub fn negative(self) -> i8 {
        self.negative
    }

    /// `positive + negative`, in `-4..=4`.
    pub fn difference(self) -> i8 {
        self.positive + self.negative
    }
}

impl TryFrom<(i8, i8)> for SentimentScore {
    type Error = Error;
    fn try_from((p, n): (i8, i8)) -> Result<Self> {
        SentimentScore::new(p, n)
    }
}

impl From<SentimentScore> for (i8, i8) {
    fn from(s: SentimentScore) -> Self {
        (s.positive, s.negative)
    }
}

impl fmt::Display for SentimentScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.positive, self.negative)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoringRules {
    /// How many preceding tokens a booster or negation reaches.
    pub window: usize,
    pub emphasis_bonus: i8,
}

impl Default for ScoringRules {
    fn default() -> Self {
        ScoringRules {
            window: 2,
            emphasis_bonus: 1,
        }
    }
}

pub fn score_text(lexicon: &Lexicon, text: &str) -> SentimentScore {
    score_text_with(lexicon, text, ScoringRules::default())
}

pub fn score_text_with(lexicon: &Lexicon, text: &str, rules: ScoringRules) -> SentimentScore {
    let tokens = normalize_tokens(text);
    let roles: Vec<WordRole> = tokens.iter().map(|t| lexicon.classify(t)).collect();
    let mut positive = 1i8;
    let mut negative = -1i8;
    for (i, role) in roles.iter().enumerate() {
        let WordRole::Term(strength) = *role else {
            continue;
        };
        let mut magnitude = strength.abs();
        if tokens[i].emphasis {
            magnitude += rules.emphasis_bonus;
        }
        let window = &roles[i.saturating_sub(rules.window)..i];
        // nearest first
        if let Some(b) = window.iter().rev().find_map(|r| match r {
            WordRole::Booster(b) => Some(*b),
            _ => None,
        }) {
            magnitude += b;
        }
        let negated = window.contains(&WordRole::Negation);
        let magnitude = magnitude.clamp(1, 5);
        let positive_sense = (strength > 0) != negated;
        if positive_sense {
            positive = positive.max(magnitude);
        } else {
            negative = negative.min(-magnitude);
        }
    }
    SentimentScore { positive, negative }
}

/// Scores of every message, keyed by message id.
pub fn score_corpus(lexicon: &Lexicon, corpus: &Corpus) -> BTreeMap<String, SentimentScore> {
    corpus
        .messages()
        .par_iter()
        .map(|m| (m.id.clone(), score_text(lexicon, &m.text)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// CSV `id,positive,negative,difference`.
pub fn write_scores_csv(scores: &BTreeMap<String, SentimentScore>, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["id", "positive", "negative", "difference"])?;
    for (id, s) in scores {
        w.write_record([id.clone(), s.positive.to_string(), s.negative.to_string(), s.difference().to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: &Path) -> Result<BTreeMap<String, SentimentScore>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let (id, p, n, _): (String, i8, i8, i8) = row?;
        out.insert(id, SentimentScore::new(p, n)?);
    }
    Ok(out)
}
