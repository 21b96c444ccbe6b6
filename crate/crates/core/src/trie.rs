//! Per-group synonym tries over token sequences.
//!
//! Nodes are stored in compressed-sparse-row form: the children of node `n`
//! are `labels[offsets[n]..offsets[n + 1]]` (sorted ascending) with matching
//! entries in `targets`. A node is terminal when `terminal[n]` indexes into
//! the terminal table.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{ConceptId, PrunedKB};
use crate::normalize::normalize;
use crate::tokenizer::{TokenId, Tokenizer, TokenizerSpec};

const MAGIC: &[u8; 8] = b"ENTTRIE\0";
const FORMAT_VERSION: u32 = 1;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub concept: ConceptId,
    pub surface: String,
}

/// Two or more concepts whose kept synonyms encode to the same token path.
/// Only title-fallback concepts can produce these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    pub surface: String,
    pub winner: ConceptId,
    pub losers: Vec<ConceptId>,
}

/// Tokens that may follow a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allowed<'a> {
    pub tokens: &'a [TokenId],
    pub eos: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynonymTrie {
    group: String,
    fingerprint: String,
    version_tag: String,
    tokenizer: Option<TokenizerSpec>,
    eos: TokenId,
    max_depth: usize,
    offsets: Vec<u32>,
    labels: Vec<TokenId>,
    targets: Vec<u32>,
    terminal: Vec<u32>,
    terminals: Vec<Terminal>,
    collisions: Vec<Collision>,
}

/// Builds the trie for one semantic group of a pruned knowledge base.
///
/// Every kept synonym must survive `normalize(decode(encode(s))) ==
/// normalize(s)`; offenders are listed in the error.
pub fn build_trie(pruned: &PrunedKB, group: &str, tok: &dyn Tokenizer) -> Result<SynonymTrie> {
    let ids = pruned.candidates_for_group(group)?;
    let mut entries = Vec::new();
    let mut offenders = Vec::new();
    for id in ids {
        for s in pruned.kept(id)? {
            let enc = tok.encode(s);
            if enc.is_empty() {
                return Err(Error::EmptyEncoding(s.clone()));
            }
            if enc.contains(&tok.eos_id()) || normalize(&tok.decode(&enc)) != normalize(s) {
                offenders.push(s.clone());
                continue;
            }
            entries.push((enc, id.as_str(), s.as_str()));
        }
    }
    if !offenders.is_empty() {
        return Err(Error::TokenizerRoundTrip(offenders));
    }
    let trie = TrieBuilder::default().build(
        entries,
        group,
        tok.eos_id(),
        tok.fingerprint(),
        pruned.version_tag(),
    )?;
    for c in &trie.collisions {
        log::warn!(
            "group {group}: `{}` resolves to {} (also claimed by {})",
            c.surface,
            c.winner,
            c.losers.join(", ")
        );
    }
    Ok(trie)
}

#[derive(Default)]
struct TrieBuilder {
    edges: HashMap<(u32, TokenId), u32>,
    node_count: u32,
}

impl TrieBuilder {
    fn build<'a>(
        mut self,
        entries: impl IntoIterator<Item = (Vec<TokenId>, &'a str, &'a str)>,
        group: &str,
        eos: TokenId,
        fingerprint: String,
        version_tag: &str,
    ) -> Result<SynonymTrie> {
        self.node_count = 1;
        let mut term_of: HashMap<u32, usize> = HashMap::new();
        let mut terminals: Vec<Terminal> = Vec::new();
        let mut losers: HashMap<usize, Vec<ConceptId>> = HashMap::new();
        let mut max_depth = 0;
        for (tokens, concept, surface) in entries {
            max_depth = max_depth.max(tokens.len());
            let mut node = 0u32;
            for t in &tokens {
                let next = self.node_count;
                node = *self.edges.entry((node, *t)).or_insert_with(|| next);
                if node == next {
                    self.node_count += 1;
                }
            }
            match term_of.get(&node) {
                None => {
                    term_of.insert(node, terminals.len());
                    terminals.push(Terminal {
                        concept: concept.to_owned(),
                        surface: surface.to_owned(),
                    });
                }
                Some(&ti) => {
                    let existing = &mut terminals[ti];
                    if existing.concept == concept {
                        continue;
                    }
                    let list = losers.entry(ti).or_default();
                    if concept < existing.concept.as_str() {
                        list.push(std::mem::replace(&mut existing.concept, concept.to_owned()));
                        existing.surface = surface.to_owned();
                    } else {
                        list.push(concept.to_owned());
                    }
                }
            }
        }
        if terminals.is_empty() {
            return Err(Error::EmptyTrie);
        }

        let n = self.node_count as usize;
        let mut edges: Vec<(u32, TokenId, u32)> =
            self.edges.into_iter().map(|((p, t), c)| (p, t, c)).collect();
        edges.sort_unstable();
        let mut offsets = vec![0u32; n + 1];
        for (p, _, _) in &edges {
            offsets[*p as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let labels = edges.iter().map(|e| e.1).collect();
        let targets = edges.iter().map(|e| e.2).collect();
        let mut terminal = vec![NONE; n];
        for (node, ti) in term_of {
            terminal[node as usize] = ti as u32;
        }
        let mut collisions: Vec<Collision> = losers
            .into_iter()
            .map(|(ti, mut l)| {
                l.sort();
                Collision {
                    surface: terminals[ti].surface.clone(),
                    winner: terminals[ti].concept.clone(),
                    losers: l,
                }
            })
            .collect();
        collisions.sort_by(|a, b| a.surface.cmp(&b.surface));

        Ok(SynonymTrie {
            group: group.to_owned(),
            fingerprint,
            version_tag: version_tag.to_owned(),
            tokenizer: None,
            eos,
            max_depth,
            offsets,
            labels,
            targets,
            terminal,
            terminals,
            collisions,
        })
    }
}

impl SynonymTrie {
    /// Builds a trie from explicit `(tokens, concept, surface)` entries,
    /// bypassing the knowledge base. Used for synthetic workloads.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (Vec<TokenId>, &'a str, &'a str)>,
        group: &str,
        tok: &dyn Tokenizer,
        version_tag: &str,
    ) -> Result<Self> {
        TrieBuilder::default().build(entries, group, tok.eos_id(), tok.fingerprint(), version_tag)
    }

    /// Attaches a serializable tokenizer description, written with the trie.
    pub fn with_tokenizer(mut self, spec: TokenizerSpec) -> Self {
        self.tokenizer = Some(spec);
        self
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn version_tag(&self) -> &str {
        &self.version_tag
    }

    pub fn tokenizer_spec(&self) -> Option<&TokenizerSpec> {
        self.tokenizer.as_ref()
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos
    }

    /// Length of the longest synonym encoding.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn node_count(&self) -> usize {
        self.terminal.len()
    }

    pub fn synonym_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn collisions(&self) -> &[Collision] {
        &self.collisions
    }

    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub(crate) fn children(&self, node: u32) -> &[TokenId] {
        let (a, b) = (self.offsets[node as usize], self.offsets[node as usize + 1]);
        &self.labels[a as usize..b as usize]
    }

    pub(crate) fn child(&self, node: u32, token: TokenId) -> Option<u32> {
        let a = self.offsets[node as usize] as usize;
        let kids = self.children(node);
        kids.binary_search(&token).ok().map(|i| self.targets[a + i])
    }

    pub(crate) fn root(&self) -> u32 {
        0
    }

    pub(crate) fn terminal_at(&self, node: u32) -> Option<&Terminal> {
        match self.terminal[node as usize] {
            NONE => None,
            ti => Some(&self.terminals[ti as usize]),
        }
    }

    pub(crate) fn walk(&self, prefix: &[TokenId]) -> Option<u32> {
        prefix
            .iter()
            .try_fold(self.root(), |node, t| self.child(node, *t))
    }

    /// Children of the node reached by `prefix`, and whether the prefix is a
    /// complete synonym.
    pub fn allowed_next(&self, prefix: &[TokenId]) -> Result<Allowed<'_>> {
        let node = self.walk(prefix).ok_or(Error::BadPrefix)?;
        Ok(Allowed {
            tokens: self.children(node),
            eos: self.terminal[node as usize] != NONE,
        })
    }

    /// Concept and surface of the synonym spelled by `tokens`.
    pub fn resolve(&self, tokens: &[TokenId]) -> Result<&Terminal> {
        let node = self.walk(tokens).ok_or(Error::BadPrefix)?;
        self.terminal_at(node).ok_or(Error::NotTerminal)
    }

    /// Every `(tokens, terminal)` pair, in token-lexicographic order.
    pub fn entries(&self) -> Vec<(Vec<TokenId>, &Terminal)> {
        let mut out = Vec::with_capacity(self.terminals.len());
        let mut stack = vec![(self.root(), Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if let Some(t) = self.terminal_at(node) {
                out.push((path.clone(), t));
            }
            let a = self.offsets[node as usize] as usize;
            for (i, tok) in self.children(node).iter().enumerate().rev() {
                let mut p = path.clone();
                p.push(*tok);
                stack.push((self.targets[a + i], p));
            }
        }
        out
    }

    /// Approximate heap footprint of the node and terminal tables.
    pub fn resident_bytes(&self) -> usize {
        let u = std::mem::size_of::<u32>();
        let strings: usize = self
            .terminals
            .iter()
            .map(|t| t.concept.capacity() + t.surface.capacity() + std::mem::size_of::<Terminal>())
            .sum();
        (self.offsets.capacity() + self.labels.capacity() + self.targets.capacity() + self.terminal.capacity()) * u
            + strings
            + std::mem::size_of::<Self>()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        put_u32(&mut w, FORMAT_VERSION)?;
        put_str(&mut w, &self.fingerprint)?;
        put_str(&mut w, &self.version_tag)?;
        put_str(&mut w, &self.group)?;
        let spec = match &self.tokenizer {
            Some(s) => serde_json::to_string(s).map_err(std::io::Error::other)?,
            None => String::new(),
        };
        put_str(&mut w, &spec)?;
        put_u32(&mut w, self.eos)?;
        put_u32(&mut w, self.max_depth as u32)?;
        put_u32(&mut w, self.terminal.len() as u32)?;
        put_u32(&mut w, self.labels.len() as u32)?;
        put_u32(&mut w, self.terminals.len() as u32)?;
        put_u32(&mut w, self.collisions.len() as u32)?;
        for v in [&self.offsets, &self.labels, &self.targets, &self.terminal] {
            put_u32s(&mut w, v)?;
        }
        for t in &self.terminals {
            put_str(&mut w, &t.concept)?;
            put_str(&mut w, &t.surface)?;
        }
        for c in &self.collisions {
            put_str(&mut w, &c.surface)?;
            put_str(&mut w, &c.winner)?;
            put_u32(&mut w, c.losers.len() as u32)?;
            for l in &c.losers {
                put_str(&mut w, l)?;
            }
        }
        w.flush()
    }

    /// Reads a trie without checking its tokenizer fingerprint.
    pub fn read_unchecked(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt_err)?;
        if &magic != MAGIC {
            return Err(Error::TrieFormat("bad magic".into()));
        }
        let version = get_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::TrieFormat(format!("unsupported version {version}")));
        }
        let fingerprint = get_str(&mut r)?;
        let version_tag = get_str(&mut r)?;
        let group = get_str(&mut r)?;
        let spec = get_str(&mut r)?;
        let tokenizer = if spec.is_empty() {
            None
        } else {
            Some(serde_json::from_str(&spec)?)
        };
        let eos = get_u32(&mut r)?;
        let max_depth = get_u32(&mut r)? as usize;
        let n_nodes = get_u32(&mut r)? as usize;
        let n_edges = get_u32(&mut r)? as usize;
        let n_terms = get_u32(&mut r)? as usize;
        let n_coll = get_u32(&mut r)? as usize;
        let offsets = get_u32s(&mut r, n_nodes + 1)?;
        let labels = get_u32s(&mut r, n_edges)?;
        let targets = get_u32s(&mut r, n_edges)?;
        let terminal = get_u32s(&mut r, n_nodes)?;
        let mut terminals = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            terminals.push(Terminal {
                concept: get_str(&mut r)?,
                surface: get_str(&mut r)?,
            });
        }
        let mut collisions = Vec::with_capacity(n_coll);
        for _ in 0..n_coll {
            let surface = get_str(&mut r)?;
            let winner = get_str(&mut r)?;
            let k = get_u32(&mut r)? as usize;
            let losers = (0..k).map(|_| get_str(&mut r)).collect::<Result<_>>()?;
            collisions.push(Collision {
                surface,
                winner,
                losers,
            });
        }
        let trie = Self {
            group,
            fingerprint,
            version_tag,
            tokenizer,
            eos,
            max_depth,
            offsets,
            labels,
            targets,
            terminal,
            terminals,
            collisions,
        };
        trie.check_layout()?;
        Ok(trie)
    }

    fn check_layout(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::TrieFormat(m.to_owned()));
        let n = self.terminal.len();
        if n == 0 || self.offsets.len() != n + 1 || self.offsets[0] != 0 {
            return bad("inconsistent node table");
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1])
            || self.offsets[n] as usize != self.labels.len()
        {
            return bad("inconsistent child offsets");
        }
        if self.targets.iter().any(|t| *t as usize >= n || *t == 0) {
            return bad("edge target out of range");
        }
        if self
            .terminal
            .iter()
            .any(|t| *t != NONE && *t as usize >= self.terminals.len())
        {
            return bad("terminal index out of range");
        }
        for node in 0..n as u32 {
            if self.children(node).windows(2).any(|w| w[0] >= w[1]) {
                return bad("children not sorted");
            }
        }
        Ok(())
    }

    /// Reads a trie and checks it was built with `tok`.
    pub fn read_from(r: impl Read, tok: &dyn Tokenizer) -> Result<Self> {
        let trie = Self::read_unchecked(r)?;
        trie.check_fingerprint(&tok.fingerprint())?;
        Ok(trie)
    }

    pub fn check_fingerprint(&self, expected: &str) -> Result<()> {
        if self.fingerprint != expected {
            return Err(Error::FingerprintMismatch {
                expected: expected.to_owned(),
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    /// Number of bytes [`SynonymTrie::write_to`] produces.
    pub fn serialized_size(&self) -> usize {
        let mut counter = CountingWriter(0);
        self.write_to(&mut counter).expect("counting never fails");
        counter.0
    }
}

pub fn serialize_trie(trie: &SynonymTrie, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    trie.write_to(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads a trie file, rejecting it unless it was built with `tok`.
pub fn load_trie(path: impl AsRef<Path>, tok: &dyn Tokenizer) -> Result<SynonymTrie> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    SynonymTrie::read_from(std::io::BufReader::new(f), tok)
}

/// Loads a trie file together with the tokenizer stored in it.
pub fn load_trie_with_tokenizer(
    path: impl AsRef<Path>,
) -> Result<(SynonymTrie, Box<dyn Tokenizer>)> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let trie = SynonymTrie::read_unchecked(std::io::BufReader::new(f))?;
    let tok = trie
        .tokenizer_spec()
        .ok_or_else(|| Error::TrieFormat("file carries no tokenizer description".into()))?
        .build();
    trie.check_fingerprint(&tok.fingerprint())?;
    Ok((trie, tok))
}

struct CountingWriter(usize);

impl Write for CountingWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0 += buf.len();
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn fmt_err(e: std::io::Error) -> Error {
    Error::TrieFormat(format!("truncated file: {e}"))
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u32s(w: &mut impl Write, vs: &[u32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(vs.len() * 4);
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(fmt_err)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u32s(r: &mut impl Read, n: usize) -> Result<Vec<u32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf).map_err(fmt_err)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn get_str(r: &mut impl Read) -> Result<String> {
    let n = get_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(fmt_err)?;
    String::from_utf8(buf).map_err(|_| Error::TrieFormat("invalid utf-8".into()))
}
