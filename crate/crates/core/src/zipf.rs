//! Zipf ranking of sign-coded fluctuations.
//!
//! Returns are coded as `u` (up), `d` (down) and optionally `f` (flat); every
//! length-`m` word of the coded sequence is counted, the words are ranked by
//! frequency, and the slope of `ln count` against `ln rank` summarizes how far
//! the sequence departs from equiprobable words.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{SeriesKind, TimeSeries};
use crate::stats::ols_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    /// `u` for positive returns, `d` otherwise (zero maps to `d`).
    Binary,
    /// `u` above `threshold`, `d` below `-threshold`, `f` between.
    Ternary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSeq {
    pub alphabet: Alphabet,
    pub symbols: Vec<u8>,
    /// Flat band half-width; 0 for binary coding.
    pub threshold: f64,
}

impl SymbolSeq {
    /// Parses a string of `u`/`d`/`f` symbols.
    pub fn parse(text: &str) -> Result<Self> {
        let symbols: Vec<u8> = text.bytes().collect();
        if let Some(bad) = symbols.iter().find(|b| !matches!(b, b'u' | b'd' | b'f')) {
            return Err(Error::Config(format!(
                "symbol `{}` is not in the alphabet",
                *bad as char
            )));
        }
        let alphabet = if symbols.contains(&b'f') {
            Alphabet::Ternary
        } else {
            Alphabet::Binary
        };
        Ok(Self {
            alphabet,
            symbols,
            threshold: 0.0,
        })
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.symbols).expect("symbols are ascii")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub fn encode_signs(returns: &TimeSeries, alphabet: Alphabet, threshold: f64) -> Result<SymbolSeq> {
    if returns.kind() != SeriesKind::Return {
        return Err(Error::WrongKind {
            expected: "return",
            found: returns.kind().as_str(),
        });
    }
    if !(threshold >= 0.0) {
        return Err(Error::Config("threshold must be non-negative".into()));
    }
    let symbols = returns
        .values()
        .iter()
        .map(|&r| match alphabet {
            Alphabet::Binary => {
                if r > 0.0 {
                    b'u'
                } else {
                    b'd'
                }
            }
            Alphabet::Ternary => {
                if r > threshold {
                    b'u'
                } else if r < -threshold {
                    b'd'
                } else {
                    b'f'
                }
            }
        })
        .collect();
    let threshold = match alphabet {
        Alphabet::Binary => 0.0,
        Alphabet::Ternary => threshold,
    };
    Ok(SymbolSeq {
        alphabet,
        symbols,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordWindows {
    /// Every start position (stride 1).
    #[default]
    Sliding,
    /// Back-to-back blocks; a short tail is dropped.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipfResult {
    pub word_length: usize,
    /// `(word, count)`, by count descending then word ascending.
    pub ranking: Vec<(String, u64)>,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub n_words: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipfSummary {
    pub m: usize,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub n_words: u64,
}

impl ZipfResult {
    pub fn summary(&self) -> ZipfSummary {
        ZipfSummary {
            m: self.word_length,
            slope: self.slope,
            r2: self.r2,
            n_words: self.n_words,
        }
    }

    /// `rank,word,count`, ranks starting at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,word,count\n");
        for (i, (w, c)) in self.ranking.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, w, c));
        }
        out
    }
}

const SHARD: usize = 1 << 16;

fn census(symbols: &[u8], m: usize, starts: impl Iterator<Item = usize>) -> BTreeMap<Vec<u8>, u64> {
    let mut counts = BTreeMap::new();
    for s in starts {
        *counts.entry(symbols[s..s + m].to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Sliding (stride-1) census of length-`m` words.
pub fn rank_words(seq: &SymbolSeq, m: usize) -> Result<ZipfResult> {
    rank_words_with(seq, m, WordWindows::Sliding)
}

pub fn rank_words_with(seq: &SymbolSeq, m: usize, windows: WordWindows) -> Result<ZipfResult> {
    if m == 0 {
        return Err(Error::Config("word length must be at least 1".into()));
    }
    if m > seq.len() {
        return Err(Error::TooShort {
            len: seq.len(),
            min: m,
        });
    }
    let stride = match windows {
        WordWindows::Sliding => 1,
        WordWindows::Disjoint => m,
    };
    let n_starts = (seq.len() - m) / stride + 1;
    // shards own disjoint ranges of start positions, so words spanning a shard
    // boundary are counted exactly once
    let shards: Vec<BTreeMap<Vec<u8>, u64>> = (0..n_starts.div_ceil(SHARD))
        .into_par_iter()
        .map(|k| {
            let lo = k * SHARD;
            let hi = ((k + 1) * SHARD).min(n_starts);
            census(&seq.symbols, m, (lo..hi).map(|i| i * stride))
        })
        .collect();
    let mut total: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for shard in shards {
        for (w, c) in shard {
            *total.entry(w).or_insert(0) += c;
        }
    }
    let mut ranking: Vec<(String, u64)> = total
        .into_iter()
        .map(|(w, c)| (String::from_utf8(w).expect("ascii"), c))
        .collect();
    ranking.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ZipfResult {
        word_length: m,
        ranking,
        slope: None,
        r2: None,
        n_words: n_starts as u64,
    })
}

/// Slope and `r^2` of `ln count` against `ln rank`.
pub fn zipf_exponent(r: &ZipfResult) -> Result<ZipfResult> {
    if r.ranking.len() < 3 {
        return Err(Error::InsufficientData {
            got: r.ranking.len(),
            need: 3,
        });
    }
    let x: Vec<f64> = (1..=r.ranking.len()).map(|k| (k as f64).ln()).collect();
    let y: Vec<f64> = r.ranking.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let line = ols_line(&x, &y).ok_or(Error::InsufficientData {
        got: x.len(),
        need: 3,
    })?;
    Ok(ZipfResult {
        slope: Some(line.slope),
        r2: Some(line.r2),
        ..r.clone()
    })
}
