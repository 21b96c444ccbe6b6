//! Trie-constrained greedy and beam decoding over a pluggable scorer.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::ConceptId;
use crate::tokenizer::{TokenId, Tokenizer};
use crate::trie::SynonymTrie;

/// Autoregressive next-token distribution `log p(y_i | y_<i, x)`.
pub trait Scorer: Send + Sync {
    /// Log-probabilities over the full vocabulary, indexed by token id.
    fn next_logprobs(&self, input: &str, prefix: &[TokenId]) -> Vec<f64>;

    /// Whether `next_logprobs` may be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn next_logprobs(&self, input: &str, prefix: &[TokenId]) -> Vec<f64> {
        (**self).next_logprobs(input, prefix)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn next_logprobs(&self, input: &str, prefix: &[TokenId]) -> Vec<f64> {
        (**self).next_logprobs(input, prefix)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOptions {
    /// Renormalize log-probabilities over the allowed tokens at each step
    /// instead of using the raw masked values.
    pub renormalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingResult {
    pub concept: ConceptId,
    pub surface: String,
    /// Synonym tokens, without the end-of-sequence token.
    pub tokens: Vec<TokenId>,
    /// Sum of the chosen tokens' log-probabilities, end-of-sequence included.
    pub logprob_sum: f64,
    /// `exp(logprob_sum)`.
    pub confidence: f64,
}

impl DecodingResult {
    /// Per-token geometric mean probability, counting the end-of-sequence
    /// step.
    pub fn length_normalized_confidence(&self) -> f64 {
        (self.logprob_sum / (self.tokens.len() + 1) as f64).exp()
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Candidate tokens at `node` in ascending id order, end-of-sequence
/// included when the node is terminal.
fn candidates(trie: &SynonymTrie, node: u32) -> Vec<TokenId> {
    let mut c = trie.children(node).to_vec();
    if trie.terminal_at(node).is_some() {
        let eos = trie.eos_id();
        let pos = c.binary_search(&eos).unwrap_or_else(|p| p);
        c.insert(pos, eos);
    }
    c
}

fn scored(
    logprobs: &[f64],
    cands: &[TokenId],
    opts: DecodeOptions,
) -> impl Iterator<Item = (TokenId, f64)> {
    let raw: Vec<(TokenId, f64)> = cands
        .iter()
        .map(|t| (*t, logprobs.get(*t as usize).copied().unwrap_or(f64::NEG_INFINITY)))
        .collect();
    let shift = if opts.renormalize {
        log_sum_exp(raw.iter().map(|(_, l)| *l))
    } else {
        0.0
    };
    raw.into_iter().map(move |(t, l)| (t, l - shift))
}

fn finish(trie: &SynonymTrie, node: u32, tokens: Vec<TokenId>, logprob_sum: f64) -> DecodingResult {
    let term = trie.terminal_at(node).expect("finished at a terminal");
    DecodingResult {
        concept: term.concept.clone(),
        surface: term.surface.clone(),
        tokens,
        logprob_sum,
        confidence: logprob_sum.exp(),
    }
}

/// Greedy decoding restricted to trie continuations. Ties go to the
/// smaller token id.
pub fn constrained_greedy(
    scorer: &dyn Scorer,
    trie: &SynonymTrie,
    input: &str,
    opts: DecodeOptions,
) -> Result<DecodingResult> {
    let limit = trie.max_depth() + 1;
    let eos = trie.eos_id();
    let mut node = trie.root();
    let mut prefix = Vec::new();
    let mut sum = 0.0;
    for _ in 0..limit {
        let cands = candidates(trie, node);
        if cands.is_empty() {
            return Err(Error::EmptyTrie);
        }
        let lp = scorer.next_logprobs(input, &prefix);
        let mut best: Option<(TokenId, f64)> = None;
        for (t, l) in scored(&lp, &cands, opts) {
            if best.is_none_or(|(_, b)| l > b) {
                best = Some((t, l));
            }
        }
        let (t, l) = best.expect("non-empty candidates");
        sum += l;
        if t == eos {
            return Ok(finish(trie, node, prefix, sum));
        }
        node = trie.child(node, t).expect("candidate is a child");
        prefix.push(t);
    }
    Err(Error::StepLimit(limit))
}

struct Hyp {
    node: u32,
    tokens: Vec<TokenId>,
    score: f64,
}

/// Beam search over the constrained token lattice.
///
/// Each step ranks every expansion of every live hypothesis (ties by parent
/// rank, then token id) and keeps the best `k`; end-of-sequence expansions
/// that make the cut are finished. Results are deduplicated by concept,
/// keeping each concept's best surface, and sorted by descending score.
pub fn constrained_beam(
    scorer: &dyn Scorer,
    trie: &SynonymTrie,
    input: &str,
    k: usize,
    opts: DecodeOptions,
) -> Result<Vec<DecodingResult>> {
    if k == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    let limit = trie.max_depth() + 1;
    let eos = trie.eos_id();
    let mut active = vec![Hyp {
        node: trie.root(),
        tokens: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<DecodingResult> = Vec::new();
    for _ in 0..limit {
        if active.is_empty() {
            break;
        }
        let mut expansions: Vec<(f64, usize, TokenId)> = Vec::new();
        for (rank, h) in active.iter().enumerate() {
            let cands = candidates(trie, h.node);
            let lp = scorer.next_logprobs(input, &h.tokens);
            expansions.extend(scored(&lp, &cands, opts).map(|(t, l)| (h.score + l, rank, t)));
        }
        expansions.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        expansions.truncate(k);
        let mut next = Vec::with_capacity(k);
        for (score, rank, t) in expansions {
            let parent = &active[rank];
            if t == eos {
                finished.push(finish(trie, parent.node, parent.tokens.clone(), score));
            } else {
                let mut tokens = parent.tokens.clone();
                tokens.push(t);
                next.push(Hyp {
                    node: trie.child(parent.node, t).expect("candidate is a child"),
                    tokens,
                    score,
                });
            }
        }
        active = next;
    }
    if !active.is_empty() {
        return Err(Error::StepLimit(limit));
    }
    Ok(rank_results(finished, k))
}

/// Sorts by descending score (ties by token sequence), keeps the first
/// result per concept, truncates to `k`.
pub fn rank_results(mut results: Vec<DecodingResult>, k: usize) -> Vec<DecodingResult> {
    results.sort_by(|a, b| {
        b.logprob_sum
            .total_cmp(&a.logprob_sum)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    let mut seen = HashSet::new();
    results.retain(|r| seen.insert(r.concept.clone()));
    results.truncate(k);
    results
}

/// Greedy decoding over the full vocabulary with no trie, stopping at
/// end-of-sequence or after `max_len` tokens. Returns the decoded string.
pub fn unconstrained_greedy(
    scorer: &dyn Scorer,
    tok: &dyn Tokenizer,
    input: &str,
    max_len: usize,
) -> String {
    let mut prefix: Vec<TokenId> = Vec::new();
    for _ in 0..max_len {
        let lp = scorer.next_logprobs(input, &prefix);
        let (best, _) = lp
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, l)| {
                if *l > acc.1 {
                    (i, *l)
                } else {
                    acc
                }
            });
        let best = best as TokenId;
        if best == tok.eos_id() {
            break;
        }
        prefix.push(best);
    }
    tok.decode(&prefix)
}

/// Beam-decodes many inputs, in parallel when the scorer allows it.
pub fn decode_batch(
    scorer: &dyn Scorer,
    trie: &SynonymTrie,
    inputs: &[String],
    k: usize,
    opts: DecodeOptions,
) -> Vec<Result<Vec<DecodingResult>>> {
    if scorer.concurrent() {
        inputs
            .par_iter()
            .map(|i| constrained_beam(scorer, trie, i, k, opts))
            .collect()
    } else {
        inputs
            .iter()
            .map(|i| constrained_beam(scorer, trie, i, k, opts))
            .collect()
    }
}
