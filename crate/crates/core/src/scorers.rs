//! Reference scorers for tests, examples and the command line. Real models
//! implement [`Scorer`] themselves or drive the mask service.

use std::collections::HashMap;

use crate::decode::{log_sum_exp, Scorer};
use crate::error::{Error, Result};
use crate::tokenizer::{TokenId, Tokenizer};

/// Same probability for every token.
#[derive(Debug, Clone)]
pub struct UniformScorer {
    vocab_size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size }
    }
}

impl Scorer for UniformScorer {
    fn next_logprobs(&self, _input: &str, _prefix: &[TokenId]) -> Vec<f64> {
        vec![-(self.vocab_size as f64).ln(); self.vocab_size]
    }
}

/// Explicit next-token probabilities keyed by prefix. Tokens not listed for
/// a prefix share the leftover mass uniformly; unlisted prefixes are
/// uniform. The input text is ignored.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    vocab_size: usize,
    rows: HashMap<Vec<TokenId>, Vec<(TokenId, f64)>>,
}

impl TableScorer {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            rows: HashMap::new(),
        }
    }

    /// Sets `p(next | prefix) = prob`.
    pub fn set(&mut self, prefix: Vec<TokenId>, next: TokenId, prob: f64) -> Result<()> {
        if !(prob > 0.0 && prob <= 1.0) || next as usize >= self.vocab_size {
            return Err(Error::InvalidArgument(format!(
                "bad table entry: token {next} with probability {prob}"
            )));
        }
        let row = self.rows.entry(prefix).or_default();
        row.retain(|(t, _)| *t != next);
        row.push((next, prob));
        let total: f64 = row.iter().map(|(_, p)| p).sum();
        if total > 1.0 + 1e-9 || (total >= 1.0 - 1e-12 && row.len() < self.vocab_size) {
            return Err(Error::InvalidArgument(
                "listed probabilities must leave mass for the other tokens".into(),
            ));
        }
        Ok(())
    }

    /// Puts mass `p` on each successive token of `target` followed by
    /// end-of-sequence.
    pub fn oracle(vocab_size: usize, eos: TokenId, target: &[TokenId], p: f64) -> Self {
        let mut s = Self::new(vocab_size);
        for i in 0..=target.len() {
            let next = target.get(i).copied().unwrap_or(eos);
            s.set(target[..i].to_vec(), next, p)
                .expect("oracle probability in (0, 1)");
        }
        s
    }

    /// Parses `prefix<TAB>next<TAB>prob` lines. `prefix` is text encoded with
    /// `tok` (empty for the first step); `next` is text encoding to a single
    /// token, or `<eos>`. Lines starting with `#` are comments.
    pub fn from_tsv(text: &str, tok: &dyn Tokenizer) -> Result<Self> {
        let mut s = Self::new(tok.vocab_size());
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::InvalidArgument(format!("scorer table line {}: {m}", i + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected three tab-separated columns"));
            }
            let prefix = tok.encode(cols[0]);
            let next = if cols[1] == "<eos>" {
                tok.eos_id()
            } else {
                match tok.encode(cols[1]).as_slice() {
                    [t] => *t,
                    _ => return Err(bad("next token must encode to exactly one token")),
                }
            };
            let prob: f64 = cols[2].trim().parse().map_err(|_| bad("bad probability"))?;
            s.set(prefix, next, prob).map_err(|e| bad(&e.to_string()))?;
        }
        Ok(s)
    }
}

impl Scorer for TableScorer {
    fn next_logprobs(&self, _input: &str, prefix: &[TokenId]) -> Vec<f64> {
        let v = self.vocab_size;
        match self.rows.get(prefix) {
            None => vec![-(v as f64).ln(); v],
            Some(row) => {
                let listed: f64 = row.iter().map(|(_, p)| p).sum();
                let rest = v - row.len();
                let fill = if rest == 0 {
                    f64::NEG_INFINITY
                } else {
                    ((1.0 - listed).max(0.0) / rest as f64).ln()
                };
                let mut out = vec![fill; v];
                for (t, p) in row {
                    out[*t as usize] = p.ln();
                }
                out
            }
        }
    }
}

/// Deterministic pseudo-random distributions: every `(input, prefix)` pair
/// hashes to its own softmax over random logits. Useful for fuzzing.
#[derive(Debug, Clone)]
pub struct HashScorer {
    vocab_size: usize,
    seed: u64,
    spread: f64,
}

impl HashScorer {
    /// `spread` scales the logits; larger values make peakier distributions.
    pub fn new(vocab_size: usize, seed: u64, spread: f64) -> Self {
        Self {
            vocab_size,
            seed,
            spread,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl Scorer for HashScorer {
    fn next_logprobs(&self, input: &str, prefix: &[TokenId]) -> Vec<f64> {
        let mut h = splitmix(self.seed);
        for b in input.bytes() {
            h = splitmix(h ^ b as u64);
        }
        h = splitmix(h ^ 0xFF);
        for t in prefix {
            h = splitmix(h ^ *t as u64);
        }
        let logits: Vec<f64> = (0..self.vocab_size as u64)
            .map(|t| {
                let r = splitmix(h ^ t.wrapping_mul(0x2545_F491_4F6C_DD1D));
                (r >> 11) as f64 / (1u64 << 53) as f64 * self.spread
            })
            .collect();
        let z = log_sum_exp(logits.iter().copied());
        logits.into_iter().map(|l| l - z).collect()
    }
}
