//! Training sequences: input/target construction, the document dataset
//! format, and mixing of human and synthetic example streams.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::PrunedKB;
use crate::representation::adaptive_representation;
use crate::tfidf::TfidfModel;

pub const SEP: &str = "[SEP]";
pub const DEFAULT_WINDOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Synthetic,
}

/// One annotated span in a [`Document`]. Offsets are in characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub group: String,
    pub concept_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub mentions: Vec<MentionSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub doc_id: String,
    pub mention: String,
    pub left_ctx: String,
    pub right_ctx: String,
    pub group: String,
    pub gold_concept: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input: String,
    pub target: String,
    pub source: Source,
    pub doc_id: String,
    pub concept_id: String,
}

/// Up to `window` whitespace-delimited tokens on each side of the character
/// span `start..end`, joined by single spaces.
pub fn extract_context(
    text: &str,
    span: (usize, usize),
    window: usize,
) -> Result<(String, String)> {
    let (start, end) = span;
    let chars: Vec<char> = text.chars().collect();
    if start >= end || end > chars.len() {
        return Err(Error::SpanOutOfRange {
            start,
            end,
            len: chars.len(),
        });
    }
    if chars[start..end].iter().all(|c| c.is_whitespace()) {
        return Err(Error::EmptySpan { start, end });
    }
    let left: String = chars[..start].iter().collect();
    let right: String = chars[end..].iter().collect();
    let left_tokens: Vec<&str> = left.split_whitespace().collect();
    let skip = left_tokens.len().saturating_sub(window);
    let left_ctx = left_tokens[skip..].join(" ");
    let right_ctx = right
        .split_whitespace()
        .take(window)
        .collect::<Vec<_>>()
        .join(" ");
    Ok((left_ctx, right_ctx))
}

/// Renders `<c_l> [ <m> ] { <g> } <c_r> [SEP] [ <m> ] <cue>` with single
/// spaces; empty segments are skipped.
pub fn build_input(rec: &MentionRecord, cue: &str) -> String {
    let segments = [
        rec.left_ctx.as_str(),
        "[",
        rec.mention.as_str(),
        "]",
        "{",
        rec.group.as_str(),
        "}",
        rec.right_ctx.as_str(),
        SEP,
        "[",
        rec.mention.as_str(),
        "]",
        cue,
    ];
    segments
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// The generation target: the adaptive representation of the gold concept.
pub fn build_target(rec: &MentionRecord, pruned: &PrunedKB, model: &TfidfModel) -> Result<String> {
    adaptive_representation(pruned, model, &rec.mention, &rec.gold_concept)
}

pub fn make_example(
    rec: &MentionRecord,
    pruned: &PrunedKB,
    model: &TfidfModel,
    cue: &str,
) -> Result<TrainingExample> {
    Ok(TrainingExample {
        input: build_input(rec, cue),
        target: build_target(rec, pruned, model)?,
        source: rec.source,
        doc_id: rec.doc_id.clone(),
        concept_id: rec.gold_concept.clone(),
    })
}

/// Cue phrase closing the input for a dataset language.
pub fn cue_for_language(lang: &str) -> Option<&'static str> {
    match lang {
        "en" => Some("is"),
        "fr" => Some("est"),
        "es" => Some("es"),
        _ => None,
    }
}

impl Document {
    /// Mention records for every annotated span, with contexts cut from the
    /// document text.
    pub fn mention_records(&self, window: usize, source: Source) -> Result<Vec<MentionRecord>> {
        self.mentions
            .iter()
            .map(|m| {
                let (left_ctx, right_ctx) = extract_context(&self.text, (m.start, m.end), window)?;
                Ok(MentionRecord {
                    doc_id: self.doc_id.clone(),
                    mention: m.text.clone(),
                    left_ctx,
                    right_ctx,
                    group: m.group.clone(),
                    gold_concept: m.concept_id.clone(),
                    source,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// All synthetic examples, then all human examples.
    Spt,
    /// One shuffle of the union.
    Comb,
    /// Strict alternation, synthetic first, with human examples upsampled.
    Int,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spt" => Ok(Strategy::Spt),
            "comb" => Ok(Strategy::Comb),
            "int" => Ok(Strategy::Int),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Spt => "spt",
            Strategy::Comb => "comb",
            Strategy::Int => "int",
        })
    }
}

/// Orders human and synthetic examples into one training stream.
///
/// INT emits `2 * synthetic.len()` items: the shuffled synthetic examples at
/// even positions and human examples drawn with replacement at odd ones.
pub fn compose<T: Clone>(
    human: &[T],
    synthetic: &[T],
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match strategy {
        Strategy::Spt => {
            if human.is_empty() && synthetic.is_empty() {
                return Err(Error::EmptyInput("training"));
            }
            let mut syn = synthetic.to_vec();
            syn.shuffle(&mut rng);
            let mut hum = human.to_vec();
            hum.shuffle(&mut rng);
            syn.extend(hum);
            Ok(syn)
        }
        Strategy::Comb => {
            if human.is_empty() && synthetic.is_empty() {
                return Err(Error::EmptyInput("training"));
            }
            let mut all: Vec<T> = synthetic.iter().chain(human).cloned().collect();
            all.shuffle(&mut rng);
            Ok(all)
        }
        Strategy::Int => {
            if human.is_empty() {
                return Err(Error::EmptyInput("human"));
            }
            if synthetic.is_empty() {
                return Err(Error::EmptyInput("synthetic"));
            }
            let mut syn = synthetic.to_vec();
            syn.shuffle(&mut rng);
            let mut out = Vec::with_capacity(2 * syn.len());
            for s in syn {
                out.push(s);
                out.push(human[rng.random_range(0..human.len())].clone());
            }
            Ok(out)
        }
    }
}

/// Keeps `ceil(fraction * docs.len())` documents chosen uniformly without
/// replacement, preserving their original order.
pub fn subsample_documents<T: Clone>(docs: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    // guard against 0.07 * 100 = 7.000000000000001
    let keep = ((fraction * docs.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let keep = keep.min(docs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, docs.len(), keep).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| docs[i].clone()).collect())
}

/// Reads a newline-delimited JSON file of `T`, skipping blank lines.
pub fn read_ndjson<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn write_ndjson<T: Serialize>(mut out: impl Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        let line = serde_json::to_string(item).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_ndjson<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_ndjson(&mut w, items)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
