//! Verbatim leak scanning.
//!
//! Text is normalised before matching: split on whitespace, lowercase, and
//! strip every character that is not alphanumeric, dropping tokens that end
//! up empty. A match is a maximal run of consecutive equal words shared by
//! the output and one corpus document: it cannot be extended on either side.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD_WORDS: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakMatch {
    /// Normalised words of the shared run.
    pub output_span: String,
    /// Word offset of the run in the normalised output.
    pub output_start: usize,
    pub corpus_doc_id: String,
    pub corpus_start: usize,
    pub length_words: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakScanReport {
    pub threshold_words: usize,
    pub matches: Vec<LeakMatch>,
}

impl LeakScanReport {
    pub fn passed(&self) -> bool {
        self.matches.is_empty()
    }
}

pub fn normalise_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Every maximal shared word run of at least `threshold_words` words. A
/// threshold of 0 is treated as 1.
pub fn scan_verbatim_leak(output_text: &str, corpus: &[CorpusDoc], threshold_words: usize) -> LeakScanReport {
    let k = threshold_words.max(1);
    let out = normalise_words(output_text);
    let mut matches = Vec::new();
    if out.len() >= k {
        for doc in corpus {
            let words = normalise_words(&doc.text);
            if words.len() < k {
                continue;
            }
            // Seed on k-grams of the document: every qualifying run contains one
            // at its left end.
            let mut index: HashMap<&[String], Vec<usize>> = HashMap::new();
            for j in 0..=words.len() - k {
                index.entry(&words[j..j + k]).or_default().push(j);
            }
            for i in 0..=out.len() - k {
                let Some(starts) = index.get(&out[i..i + k]) else { continue };
                for &j in starts {
                    if i > 0 && j > 0 && out[i - 1] == words[j - 1] {
                        continue;
                    }
                    let mut len = k;
                    while i + len < out.len() && j + len < words.len() && out[i + len] == words[j + len] {
                        len += 1;
                    }
                    matches.push(LeakMatch {
                        output_span: out[i..i + len].join(" "),
                        output_start: i,
                        corpus_doc_id: doc.id.clone(),
                        corpus_start: j,
                        length_words: len,
                    });
                }
            }
        }
    }
    LeakScanReport {
        threshold_words: k,
        matches,
    }
}
