//! Character n-gram TF-IDF vectors.
//!
//! Strings are normalized, padded with one `#` on each side, and split into
//! overlapping character n-grams. Term weight is `count * idf` with the
//! smoothed `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, and every vector is
//! L2-normalized.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::normalize::normalize;

pub const PAD: char = '#';
pub const DEFAULT_ORDER: usize = 3;
const MODEL_MAGIC: &str = "entlink-tfidf";
const MODEL_VERSION: u32 = 1;

/// Character n-grams of the padded, normalized form of `s`, in order of
/// occurrence (with repeats).
pub fn char_ngrams(s: &str, n: usize) -> Vec<String> {
    let norm = normalize(s);
    if norm.is_empty() || n == 0 {
        return Vec::new();
    }
    let chars: Vec<char> = std::iter::once(PAD)
        .chain(norm.chars())
        .chain(std::iter::once(PAD))
        .collect();
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds a vector from arbitrary `(index, weight)` pairs; duplicate
    /// indices are summed and zero weights dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *acc.entry(i).or_insert(0.0) += w;
        }
        Self {
            entries: acc.into_iter().filter(|(_, w)| *w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for e in &mut self.entries {
                e.1 /= n;
            }
        }
        self
    }
}

/// Cosine similarity clamped to `[0, 1]`; zero when either side is zero.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (u.dot(v) / (nu * nv)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    order: usize,
    vocab: HashMap<String, u32>,
    grams: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
    version_tag: String,
}

impl TfidfModel {
    /// Fits vocabulary and idf weights over `corpus`. Columns are assigned in
    /// lexicographic gram order so the model does not depend on corpus order.
    pub fn fit<S: AsRef<str>>(corpus: &[S], order: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if order == 0 {
            return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut grams = char_ngrams(doc.as_ref(), order);
            grams.sort_unstable();
            grams.dedup();
            for g in grams {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let n = corpus.len() as f64;
        let mut vocab = HashMap::with_capacity(df.len());
        let mut grams = Vec::with_capacity(df.len());
        let mut idf = Vec::with_capacity(df.len());
        for (i, (g, d)) in df.into_iter().enumerate() {
            vocab.insert(g.clone(), i as u32);
            grams.push(g);
            idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
        }
        Ok(Self {
            order,
            vocab,
            grams,
            idf,
            doc_count: corpus.len(),
            version_tag: String::new(),
        })
    }

    pub fn with_version_tag(mut self, tag: impl Into<String>) -> Self {
        self.version_tag = tag.into();
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocab_len(&self) -> usize {
        self.grams.len()
    }

    pub fn version_tag(&self) -> &str {
        &self.version_tag
    }

    pub fn column(&self, gram: &str) -> Option<u32> {
        self.vocab.get(gram).copied()
    }

    pub fn gram(&self, column: u32) -> &str {
        &self.grams[column as usize]
    }

    pub fn idf(&self, column: u32) -> f64 {
        self.idf[column as usize]
    }

    /// Multiplies every idf weight by `factor`.
    pub fn scale_idf(&mut self, factor: f64) {
        for w in &mut self.idf {
            *w *= factor;
        }
    }

    /// L2-normalized tf-idf vector of `s`. Grams outside the vocabulary are
    /// ignored; a string with no known gram maps to the zero vector.
    pub fn vectorize(&self, s: &str) -> SparseVector {
        let pairs = char_ngrams(s, self.order)
            .into_iter()
            .filter_map(|g| self.column(&g))
            .map(|c| (c, self.idf[c as usize]));
        SparseVector::from_pairs(pairs).normalized()
    }

    /// Text dump: a header line, then one `gram<TAB>idf` line per column in
    /// column order. Weights are written with round-trip precision.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{MODEL_MAGIC}\t{MODEL_VERSION}\t{}\t{}\t{}\t{}",
            self.order,
            self.doc_count,
            self.grams.len(),
            self.version_tag
        )?;
        for (g, w) in self.grams.iter().zip(&self.idf) {
            writeln!(out, "{}\t{w:?}", escape(g))?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_owned());
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let fields: Vec<&str> = header.splitn(6, '\t').collect();
        if fields.len() != 6 || fields[0] != MODEL_MAGIC {
            return Err(bad("missing header"));
        }
        if fields[1] != MODEL_VERSION.to_string() {
            return Err(bad("unsupported version"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let order = parse(fields[2])?;
        let doc_count = parse(fields[3])?;
        let len = parse(fields[4])?;
        let version_tag = fields[5].to_owned();
        let mut vocab = HashMap::with_capacity(len);
        let mut grams = Vec::with_capacity(len);
        let mut idf = Vec::with_capacity(len);
        for line in lines {
            let line = line.map_err(|e| Error::ModelFormat(e.to_string()))?;
            let (g, w) = line.rsplit_once('\t').ok_or_else(|| bad("bad gram line"))?;
            let g = unescape(g);
            let w: f64 = w.parse().map_err(|_| bad("bad weight"))?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(bad("idf weights must be finite and non-negative"));
            }
            if vocab.insert(g.clone(), grams.len() as u32).is_some() {
                return Err(bad("duplicate gram"));
            }
            grams.push(g);
            idf.push(w);
        }
        if grams.len() != len {
            return Err(bad("vocabulary size does not match header"));
        }
        Ok(Self {
            order,
            vocab,
            grams,
            idf,
            doc_count,
            version_tag,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn escape(g: &str) -> String {
    g.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(g: &str) -> String {
    let mut out = String::with_capacity(g.len());
    let mut chars = g.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}
