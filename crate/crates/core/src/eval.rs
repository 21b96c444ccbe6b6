//! Linking metrics, seen/unseen stratification, document-level bootstrap
//! intervals, confidence thresholds and efficiency probes.

use std::collections::{BTreeMap, HashSet};
use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{MentionRecord, Source};
use crate::tfidf::TfidfModel;
use crate::tokenizer::TokenId;
use crate::trie::SynonymTrie;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub mention_idx: usize,
    pub gold: String,
    /// Ranked by descending confidence.
    pub candidates: Vec<Candidate>,
}

impl PredictionRecord {
    pub fn top(&self) -> Option<&Candidate> {
        self.candidates.first()
    }

    pub fn hit_at(&self, k: usize) -> bool {
        self.candidates.iter().take(k).any(|c| c.id == self.gold)
    }

    /// Confidences in `(0, 1]` and non-increasing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Error::InvalidArgument(format!("{}#{}: {m}", self.doc_id, self.mention_idx))
        };
        if self
            .candidates
            .iter()
            .any(|c| !(c.confidence > 0.0 && c.confidence <= 1.0))
        {
            return Err(bad("confidence outside (0, 1]"));
        }
        if self
            .candidates
            .windows(2)
            .any(|w| w[0].confidence < w[1].confidence)
        {
            return Err(bad("candidates not sorted by confidence"));
        }
        Ok(())
    }
}

/// Fraction of mentions whose gold concept is among the top `k` candidates.
pub fn recall_at_k(preds: &[PredictionRecord], k: usize) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("prediction"));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let hits = preds.iter().filter(|p| p.hit_at(k)).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Splits predictions by whether their gold concept occurs in `train`.
/// Synthetic training records count only with `include_synthetic`.
pub fn stratify_seen_unseen<'a>(
    train: &[MentionRecord],
    preds: &'a [PredictionRecord],
    include_synthetic: bool,
) -> (Vec<&'a PredictionRecord>, Vec<&'a PredictionRecord>) {
    let seen: HashSet<&str> = train
        .iter()
        .filter(|r| include_synthetic || r.source == Source::Human)
        .map(|r| r.gold_concept.as_str())
        .collect();
    preds.iter().partition(|p| seen.contains(p.gold.as_str()))
}

/// Predictions grouped per document, in document-id order.
pub fn group_by_doc<'a, P>(
    items: impl IntoIterator<Item = &'a P>,
    doc_of: impl Fn(&P) -> &str,
) -> Vec<Vec<&'a P>>
where
    P: 'a,
{
    let mut map: BTreeMap<String, Vec<&P>> = BTreeMap::new();
    for p in items {
        map.entry(doc_of(p).to_owned()).or_default().push(p);
    }
    map.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

/// Percentile bootstrap over documents: `b` resamples of `docs` with
/// replacement, `metric` on each. Resample `i` draws from its own ChaCha
/// stream, so results do not depend on thread scheduling. The interval is
/// widened if needed to contain the point estimate.
pub fn bootstrap_ci<D, F>(docs: &[D], metric: F, b: usize, seed: u64, level: f64) -> Result<Interval>
where
    D: Sync,
    F: Fn(&[&D]) -> f64 + Sync,
{
    if docs.is_empty() {
        return Err(Error::EmptyInput("document"));
    }
    if b < MIN_RESAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_RESAMPLES} resamples are required, got {b}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} not in (0, 1)")));
    }
    let all: Vec<&D> = docs.iter().collect();
    let point = metric(&all);
    if docs.len() == 1 {
        log::warn!("bootstrap over a single document gives a zero-width interval");
    }
    let mut stats: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<&D> = (0..docs.len())
                .map(|_| &docs[rng.random_range(0..docs.len())])
                .collect();
            metric(&sample)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        point,
        lo: percentile(&stats, alpha).min(point),
        hi: percentile(&stats, 1.0 - alpha).max(point),
    })
}

/// Micro-averaged recall@k over the mentions of a document sample.
pub fn pooled_recall(k: usize) -> impl Fn(&[&Vec<&PredictionRecord>]) -> f64 + Sync {
    move |docs| {
        let (hits, total) = docs.iter().fold((0usize, 0usize), |(h, t), d| {
            (h + d.iter().filter(|p| p.hit_at(k)).count(), t + d.len())
        });
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub subset: String,
    pub mentions: usize,
    pub recall_at_1: Option<Interval>,
}

/// Recall@1 with bootstrap intervals overall and on the seen and unseen
/// subsets. Empty subsets report `None`.
pub fn evaluate(
    preds: &[PredictionRecord],
    train: &[MentionRecord],
    include_synthetic: bool,
    b: usize,
    seed: u64,
) -> Result<Vec<SubsetRow>> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("prediction"));
    }
    let (seen, unseen) = stratify_seen_unseen(train, preds, include_synthetic);
    let all: Vec<&PredictionRecord> = preds.iter().collect();
    let mut rows = Vec::new();
    for (name, subset) in [("all", all), ("seen", seen), ("unseen", unseen)] {
        let docs = group_by_doc(subset.iter().copied(), |p| &p.doc_id);
        let ci = if docs.is_empty() {
            None
        } else {
            Some(bootstrap_ci(&docs, pooled_recall(1), b, seed, 0.95)?)
        };
        rows.push(SubsetRow {
            subset: name.into(),
            mentions: subset.len(),
            recall_at_1: ci,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub tau: f64,
    /// `None` when nothing passes the threshold.
    pub precision: Option<f64>,
    pub recall: f64,
    pub f1: Option<f64>,
    pub kept_fraction: f64,
}

/// Keeps predictions whose top-1 confidence is strictly above `tau`.
/// Precision is over kept predictions, recall over all mentions.
pub fn threshold_analysis(preds: &[PredictionRecord], tau: f64) -> Result<ThresholdReport> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("prediction"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("threshold {tau} not in [0, 1]")));
    }
    let kept: Vec<&PredictionRecord> = preds
        .iter()
        .filter(|p| p.top().is_some_and(|c| c.confidence > tau))
        .collect();
    let correct = kept.iter().filter(|p| p.hit_at(1)).count();
    let n = preds.len() as f64;
    let recall = correct as f64 / n;
    let precision = (!kept.is_empty()).then(|| correct as f64 / kept.len() as f64);
    let f1 = precision.map(|p| {
        if p + recall == 0.0 {
            0.0
        } else {
            2.0 * p * recall / (p + recall)
        }
    });
    Ok(ThresholdReport {
        tau,
        precision,
        recall,
        f1,
        kept_fraction: kept.len() as f64 / n,
    })
}

/// Query workload for [`efficiency_probe`]: prefixes for `allowed_next`
/// and complete synonyms for `resolve`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Workload {
    pub prefixes: Vec<Vec<TokenId>>,
    pub complete: Vec<Vec<TokenId>>,
}

impl Workload {
    /// `n` random synonyms, each cut at a random depth for the prefix query.
    pub fn random(trie: &SynonymTrie, n: usize, seed: u64) -> Self {
        let entries = trie.entries();
        if entries.is_empty() {
            return Self::default();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::default();
        for _ in 0..n {
            let (tokens, _) = &entries[rng.random_range(0..entries.len())];
            let cut = rng.random_range(0..=tokens.len());
            w.prefixes.push(tokens[..cut].to_vec());
            w.complete.push(tokens.clone());
        }
        w
    }

    pub fn len(&self) -> usize {
        self.prefixes.len() + self.complete.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub synonyms: usize,
    pub nodes: usize,
    pub serialized_bytes: usize,
    pub resident_bytes: usize,
    pub allowed_queries: usize,
    pub resolve_queries: usize,
    /// `None` for an empty workload.
    pub allowed_qps: Option<f64>,
    pub resolve_qps: Option<f64>,
}

fn qps(n: usize, f: impl FnOnce()) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let t = Instant::now();
    f();
    Some(n as f64 / t.elapsed().as_secs_f64().max(1e-9))
}

/// Sizes of `trie` and single-threaded query throughput on `workload`.
/// Queries that fail are still counted; the workload decides what is asked.
pub fn efficiency_probe(trie: &SynonymTrie, workload: &Workload) -> EfficiencyReport {
    let allowed_qps = qps(workload.prefixes.len(), || {
        for p in &workload.prefixes {
            let _ = black_box(trie.allowed_next(black_box(p)));
        }
    });
    let resolve_qps = qps(workload.complete.len(), || {
        for p in &workload.complete {
            let _ = black_box(trie.resolve(black_box(p)));
        }
    });
    EfficiencyReport {
        synonyms: trie.synonym_count(),
        nodes: trie.node_count(),
        serialized_bytes: trie.serialized_size(),
        resident_bytes: trie.resident_bytes(),
        allowed_queries: workload.prefixes.len(),
        resolve_queries: workload.complete.len(),
        allowed_qps,
        resolve_qps,
    }
}

/// Dense per-synonym vector index, the memory baseline for tries: one
/// L2-normalized `f32` vector per synonym (character TF-IDF hashed into
/// `dim` buckets) plus the concept id and surface of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    model: TfidfModel,
    buckets: Vec<u32>,
    vectors: Vec<f32>,
    rows: Vec<(String, String)>,
}

fn bucket_of(gram: &str, dim: usize) -> u32 {
    // FNV-1a.
    let h = gram.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    (h % dim as u64) as u32
}

impl DenseIndex {
    /// `rows` are `(concept id, surface)` pairs.
    pub fn build(rows: Vec<(String, String)>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let surfaces: Vec<&str> = rows.iter().map(|(_, s)| s.as_str()).collect();
        let model = TfidfModel::fit(&surfaces, crate::tfidf::DEFAULT_ORDER)?;
        let buckets: Vec<u32> = (0..model.vocab_len() as u32)
            .map(|c| bucket_of(model.gram(c), dim))
            .collect();
        let mut idx = Self {
            dim,
            model,
            buckets,
            vectors: Vec::with_capacity(rows.len() * dim),
            rows: Vec::new(),
        };
        let vectors: Vec<Vec<f32>> = surfaces.par_iter().map(|s| idx.embed(s)).collect();
        for v in vectors {
            idx.vectors.extend(v);
        }
        idx.rows = rows;
        Ok(idx)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn embed(&self, s: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        for (c, w) in self.model.vectorize(s).entries() {
            v[self.buckets[*c as usize] as usize] += *w as f32;
        }
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        v
    }

    /// Up to `k` rows by descending cosine to `query`.
    pub fn nearest(&self, query: &str, k: usize) -> Vec<(&str, &str, f32)> {
        let q = self.embed(query);
        let mut scored: Vec<(usize, f32)> = self
            .vectors
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(&q).map(|(a, b)| a * b).sum())
            .enumerate()
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.rows[i].0.as_str(), self.rows[i].1.as_str(), s))
            .collect()
    }

    /// Vectors and row table; the query-side TF-IDF model is not counted.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.rows.len() as u32).to_le_bytes())?;
        for x in &self.vectors {
            w.write_all(&x.to_le_bytes())?;
        }
        for (id, surface) in &self.rows {
            for s in [id, surface] {
                w.write_all(&(s.len() as u32).to_le_bytes())?;
                w.write_all(s.as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn serialized_size(&self) -> usize {
        8 + self.vectors.len() * 4
            + self
                .rows
                .iter()
                .map(|(a, b)| 8 + a.len() + b.len())
                .sum::<usize>()
    }
}
