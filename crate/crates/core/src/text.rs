//! Tokenization, sentence splitting and ROUGE.
//!
//! ROUGE here is unstemmed and keeps stopwords; n-gram overlap is clipped by
//! the reference counts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Lowercased word tokens of a text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// Character count of the text the tokens came from.
    pub source_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let tokens: Vec<String> = iter.into_iter().map(|s| s.as_ref().to_string()).collect();
        let source_len = tokens.iter().map(|t| t.chars().count()).sum::<usize>()
            + tokens.len().saturating_sub(1);
        Self { tokens, source_len }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201C}' | '\u{201D}' | '\u{201E}'
                | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00A1}'
                | '\u{00BF}'
        )
}

/// Lowercases, splits on whitespace and trims punctuation from both ends of
/// each token. A token made only of punctuation is kept whole.
pub fn tokenize(text: &str) -> TokenSequence {
    let lower = text.to_lowercase();
    let tokens = lower
        .split_whitespace()
        .map(|raw| {
            let trimmed = raw.trim_matches(is_punct);
            if trimmed.is_empty() { raw } else { trimmed }.to_string()
        })
        .collect();
    TokenSequence {
        tokens,
        source_len: text.chars().count(),
    }
}

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 7] = ['"', '\'', '\u{201D}', '\u{2019}', ')', ']', '}'];
const ABBREVIATIONS: [&str; 14] = [
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "e.g", "i.e", "fig", "no", "approx",
];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(['(', '[', '"', '\'', '\u{201C}']);
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

/// Rule-based sentence splitter.
///
/// A run of `.`, `!`, `?` (plus any closing quotes or brackets right after
/// it) ends a sentence when followed by whitespace or the end of text. A
/// single `.` after one of a small fixed list of abbreviations does not.
/// Sentences are trimmed; empty ones are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !TERMINATORS.contains(&chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && TERMINATORS.contains(&chars[j].1) {
            j += 1;
        }
        let single_period = j == i + 1 && chars[i].1 == '.';
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        let abbreviated = single_period && {
            let word_start = text[..chars[i].0]
                .rfind(char::is_whitespace)
                .map_or(0, |p| p + text[p..].chars().next().map_or(1, char::len_utf8));
            is_abbreviation(&text[word_start..chars[i].0])
        };
        if at_boundary && !abbreviated {
            let sentence = text[start..byte_at(j)].trim();
            if !sentence.is_empty() {
                out.push(sentence.to_string());
            }
            start = byte_at(j);
        }
        i = j;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// Precision, recall and F1 of one ROUGE variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    /// Builds a score from a match count and the candidate/reference totals.
    pub fn from_counts(matched: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision = if candidate_total == 0 {
            0.0
        } else {
            matched as f64 / candidate_total as f64
        };
        let recall = if reference_total == 0 {
            0.0
        } else {
            matched as f64 / reference_total as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram counts. `n` must be at least 1.
pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N order must be at least 1");
    let cand = ngram_counts(&candidate.tokens, n);
    let refs = ngram_counts(&reference.tokens, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let cand_total = candidate.tokens.len().saturating_sub(n - 1);
    let ref_total = reference.tokens.len().saturating_sub(n - 1);
    RougeScore::from_counts(matched, cand_total, ref_total)
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L (sentence-level LCS, beta = 1).
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    let l = lcs_len(&candidate.tokens, &reference.tokens);
    RougeScore::from_counts(l, candidate.len(), reference.len())
}

fn best_of(scores: impl Iterator<Item = RougeScore>) -> RougeScore {
    scores.fold(RougeScore::ZERO, |best, s| if s.f1 > best.f1 { s } else { best })
}

/// ROUGE-N against several references, keeping the best F1.
pub fn rouge_n_multi(candidate: &TokenSequence, references: &[TokenSequence], n: usize) -> RougeScore {
    best_of(references.iter().map(|r| rouge_n(candidate, r, n)))
}

/// ROUGE-L against several references, keeping the best F1.
pub fn rouge_l_multi(candidate: &TokenSequence, references: &[TokenSequence]) -> RougeScore {
    best_of(references.iter().map(|r| rouge_l(candidate, r)))
}
