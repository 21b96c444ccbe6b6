//! Reference tokenizers. Model tokenizers plug in through [`Tokenizer`].

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type TokenId = u32;

pub const EOS: TokenId = 0;
pub const UNK: TokenId = 1;
const FIRST_ID: TokenId = 2;

pub trait Tokenizer: Send + Sync {
    fn encode(&self, s: &str) -> Vec<TokenId>;
    fn decode(&self, tokens: &[TokenId]) -> String;
    fn vocab_size(&self) -> usize;
    fn eos_id(&self) -> TokenId;
    /// Stable identifier of the vocabulary; artifacts built with one
    /// tokenizer refuse to load under another.
    fn fingerprint(&self) -> String;
}

fn fingerprint_of<'a>(kind: &str, items: impl Iterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    for item in items {
        h.update([0u8]);
        h.update(item.as_bytes());
    }
    format!("{kind}:{}", &hex::encode(h.finalize())[..16])
}

/// One token per Unicode scalar value of a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharTokenizer {
    alphabet: Vec<char>,
    ids: HashMap<char, TokenId>,
}

impl CharTokenizer {
    pub fn new(alphabet: impl IntoIterator<Item = char>) -> Self {
        let alphabet: Vec<char> = alphabet.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let ids = alphabet
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i as TokenId + FIRST_ID))
            .collect();
        Self { alphabet, ids }
    }

    /// Alphabet = every character occurring in `texts`.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        Self::new(texts.into_iter().flat_map(str::chars))
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn token_of(&self, c: char) -> Option<TokenId> {
        self.ids.get(&c).copied()
    }
}

impl Tokenizer for CharTokenizer {
    fn encode(&self, s: &str) -> Vec<TokenId> {
        s.chars().map(|c| self.token_of(c).unwrap_or(UNK)).collect()
    }

    fn decode(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .filter(|t| **t != EOS)
            .map(|t| {
                t.checked_sub(FIRST_ID)
                    .and_then(|i| self.alphabet.get(i as usize))
                    .copied()
                    .unwrap_or(char::REPLACEMENT_CHARACTER)
            })
            .collect()
    }

    fn vocab_size(&self) -> usize {
        self.alphabet.len() + FIRST_ID as usize
    }

    fn eos_id(&self) -> TokenId {
        EOS
    }

    fn fingerprint(&self) -> String {
        let strs: Vec<String> = self.alphabet.iter().map(|c| c.to_string()).collect();
        fingerprint_of("char", strs.iter().map(String::as_str))
    }
}

/// One token per whitespace-delimited word of a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhitespaceTokenizer {
    words: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl WhitespaceTokenizer {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        let words: Vec<String> = words.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as TokenId + FIRST_ID))
            .collect();
        Self { words, ids }
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        Self::new(
            texts
                .into_iter()
                .flat_map(str::split_whitespace)
                .map(str::to_owned),
        )
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl Tokenizer for WhitespaceTokenizer {
    fn encode(&self, s: &str) -> Vec<TokenId> {
        s.split_whitespace()
            .map(|w| self.ids.get(w).copied().unwrap_or(UNK))
            .collect()
    }

    fn decode(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .filter(|t| **t != EOS)
            .map(|t| {
                t.checked_sub(FIRST_ID)
                    .and_then(|i| self.words.get(i as usize))
                    .map(String::as_str)
                    .unwrap_or("\u{FFFD}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn vocab_size(&self) -> usize {
        self.words.len() + FIRST_ID as usize
    }

    fn eos_id(&self) -> TokenId {
        EOS
    }

    fn fingerprint(&self) -> String {
        fingerprint_of("ws", self.words.iter().map(String::as_str))
    }
}

/// Serializable description of a reference tokenizer, stored alongside tries
/// so command-line tools can rebuild the exact vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TokenizerSpec {
    Char { alphabet: String },
    Whitespace { words: Vec<String> },
}

impl TokenizerSpec {
    pub fn build(&self) -> Box<dyn Tokenizer> {
        match self {
            TokenizerSpec::Char { alphabet } => Box::new(CharTokenizer::new(alphabet.chars())),
            TokenizerSpec::Whitespace { words } => {
                Box::new(WhitespaceTokenizer::new(words.iter().cloned()))
            }
        }
    }
}

impl From<&CharTokenizer> for TokenizerSpec {
    fn from(t: &CharTokenizer) -> Self {
        TokenizerSpec::Char {
            alphabet: t.alphabet.iter().collect(),
        }
    }
}

impl From<&WhitespaceTokenizer> for TokenizerSpec {
    fn from(t: &WhitespaceTokenizer) -> Self {
        TokenizerSpec::Whitespace {
            words: t.words.clone(),
        }
    }
}
