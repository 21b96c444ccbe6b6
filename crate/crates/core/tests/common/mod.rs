//! Fixtures, generators and brute-force oracles shared by the integration
//! tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use entlink::decode::{DecodingResult, Scorer};
use entlink::eval::PredictionRecord;
use entlink::judge::{JudgeLabel, JudgeResponse, Verdict};
use entlink::kb::{Concept, KnowledgeBase, PrunedKB};
use entlink::normalize::normalize;
use entlink::seq::read_ndjson;
use entlink::tokenizer::{CharTokenizer, TokenId, Tokenizer};
use entlink::trie::SynonymTrie;
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn concept(id: &str, group: &str, synonyms: &[&str]) -> Concept {
    Concept {
        id: id.into(),
        title: synonyms[0].into(),
        group: group.into(),
        types: vec![],
        definitions: vec![],
        synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
    }
}

/// Knowledge base from `(group, synonyms)` rows; ids are `C000`, `C001`, ...
pub fn kb_from(rows: &[(String, Vec<String>)]) -> KnowledgeBase {
    KnowledgeBase::from_concepts(
        rows.iter().enumerate().map(|(i, (g, syns))| Concept {
            id: format!("C{i:03}"),
            title: syns[0].clone(),
            group: g.clone(),
            types: vec![],
            definitions: vec![],
            synonyms: syns.clone(),
        }),
        "fuzz".to_string(),
    )
    .expect("generated rows are valid")
}

/// Small alphabets so that synonyms collide within and across concepts.
pub fn arb_synonym() -> impl Strategy<Value = String> {
    "[aAbB]{1,3}( [ab]{1,2})?"
}

pub fn arb_kb_rows(max_concepts: usize) -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
    prop::collection::vec(
        (
            prop::sample::select(vec!["G0".to_string(), "G1".to_string()]),
            prop::collection::vec(arb_synonym(), 1..4),
        ),
        1..max_concepts,
    )
}

pub fn char_tokenizer(pruned: &PrunedKB) -> CharTokenizer {
    CharTokenizer::from_texts(pruned.all_kept())
}

/// Allowed next tokens and end-of-sequence flag by scanning every encoded
/// synonym.
pub fn linear_allowed(encoded: &[Vec<TokenId>], prefix: &[TokenId]) -> Option<(Vec<TokenId>, bool)> {
    let mut next = BTreeSet::new();
    let mut eos = false;
    let mut any = false;
    for e in encoded {
        if e.starts_with(prefix) {
            any = true;
            match e.get(prefix.len()) {
                Some(t) => {
                    next.insert(*t);
                }
                None => eos = true,
            }
        }
    }
    any.then(|| (next.into_iter().collect(), eos))
}

/// Every prefix, including empty and complete ones, of every sequence.
pub fn all_prefixes(encoded: &[Vec<TokenId>]) -> BTreeSet<Vec<TokenId>> {
    encoded
        .iter()
        .flat_map(|e| (0..=e.len()).map(move |i| e[..i].to_vec()))
        .collect()
}

/// Sum of raw log-probabilities along `tokens` followed by `eos`, added in
/// path order.
pub fn path_logprob(scorer: &dyn Scorer, input: &str, tokens: &[TokenId], eos: TokenId) -> f64 {
    let mut sum = 0.0;
    for i in 0..=tokens.len() {
        let next = tokens.get(i).copied().unwrap_or(eos);
        sum += scorer.next_logprobs(input, &tokens[..i])[next as usize];
    }
    sum
}

/// `(concept, tokens, score)` for every synonym, best first, one per concept.
pub fn exhaustive_ranking(
    trie: &SynonymTrie,
    scorer: &dyn Scorer,
    input: &str,
) -> Vec<(String, Vec<TokenId>, f64)> {
    let mut all: Vec<(String, Vec<TokenId>, f64)> = trie
        .entries()
        .into_iter()
        .map(|(tokens, t)| {
            let s = path_logprob(scorer, input, &tokens, trie.eos_id());
            (t.concept.clone(), tokens, s)
        })
        .collect();
    all.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.1.cmp(&b.1)));
    let mut seen = BTreeSet::new();
    all.retain(|(c, _, _)| seen.insert(c.clone()));
    all
}

pub fn summarize(results: &[DecodingResult]) -> Vec<(String, Vec<TokenId>, f64)> {
    results
        .iter()
        .map(|r| (r.concept.clone(), r.tokens.clone(), r.logprob_sum))
        .collect()
}

/// `n` distinct random words over `alphabet`, lengths in `min_len..=max_len`.
pub fn random_words(rng: &mut ChaCha8Rng, n: usize, alphabet: &[char], min_len: usize, max_len: usize) -> Vec<String> {
    let mut out = BTreeSet::new();
    while out.len() < n {
        let len = rng.random_range(min_len..=max_len);
        let w: String = (0..len).map(|_| *alphabet.choose(rng).expect("non-empty alphabet")).collect();
        out.insert(w);
    }
    let mut v: Vec<String> = out.into_iter().collect();
    v.shuffle(rng);
    v
}

/// Trie over `n` random distinct synonyms spread over `n / 3 + 1` concepts.
pub fn random_trie(seed: u64, n: usize, alphabet: &[char], max_len: usize) -> (SynonymTrie, CharTokenizer, Vec<(String, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = random_words(&mut rng, n, alphabet, 1, max_len);
    let concepts = n / 3 + 1;
    let rows: Vec<(String, String)> = words
        .into_iter()
        .map(|w| (format!("C{:06}", rng.random_range(0..concepts)), w))
        .collect();
    let tok = CharTokenizer::new(alphabet.iter().copied());
    let entries: Vec<(Vec<TokenId>, &str, &str)> = rows
        .iter()
        .map(|(c, s)| (tok.encode(s), c.as_str(), s.as_str()))
        .collect();
    let trie = SynonymTrie::from_entries(entries, "G", &tok, "random").expect("valid entries");
    (trie, tok, rows)
}

/// Judge verdicts (parsed from raw responses) and human labels of the
/// 150-case agreement fixture.
pub fn agreement_fixture() -> (Vec<Verdict>, Vec<Verdict>) {
    let responses: Vec<JudgeResponse> = read_ndjson(fixture("agreement_judge_responses.ndjson")).unwrap();
    let human: Vec<Verdict> = read_ndjson(fixture("agreement_human_verdicts.ndjson")).unwrap();
    (responses.iter().map(Verdict::from).collect(), human)
}

/// Confusion matrix planted in the agreement fixture: judge label (row,
/// `None` for an unparseable response) by human label (columns in
/// `JudgeLabel::ALL` order).
pub const PLANTED: [(Option<JudgeLabel>, [usize; 4]); 5] = [
    (Some(JudgeLabel::Correct), [34, 4, 3, 2]),
    (Some(JudgeLabel::Broad), [6, 20, 2, 5]),
    (Some(JudgeLabel::Narrow), [4, 3, 15, 4]),
    (Some(JudgeLabel::NoRelation), [8, 7, 5, 26]),
    (None, [1, 0, 0, 1]),
];

/// Predictions and parsed judge verdicts of a 1,000-mention replay fixture.
pub fn distribution_fixture(name: &str) -> (Vec<PredictionRecord>, Vec<Verdict>) {
    let preds = read_ndjson(fixture(&format!("{name}_predictions.ndjson"))).unwrap();
    let responses: Vec<JudgeResponse> = read_ndjson(fixture(&format!("{name}_judge_responses.ndjson"))).unwrap();
    (preds, responses.iter().map(Verdict::from).collect())
}

/// Expected service answer for `allowed` or `resolve`, computed directly on
/// the trie: `Ok(result)` or `Err(error code)`.
pub fn in_process_answer(trie: &SynonymTrie, op: &str, tokens: &[TokenId]) -> Result<serde_json::Value, &'static str> {
    use entlink::error::Error;
    use serde_json::json;
    match op {
        "allowed" => trie
            .allowed_next(tokens)
            .map(|a| json!({"tokens": a.tokens, "eos": a.eos}))
            .map_err(|_| "BAD_PREFIX"),
        "resolve" => match trie.resolve(tokens) {
            Ok(t) => Ok(json!({"concept": t.concept, "surface": t.surface})),
            Err(Error::NotTerminal) => Err("NOT_TERMINAL"),
            Err(_) => Err("BAD_PREFIX"),
        },
        _ => unreachable!("only allowed and resolve are replayed"),
    }
}

/// `n` replay queries: a mix of valid prefixes, complete synonyms and
/// off-trie paths.
pub fn replay_queries(trie: &SynonymTrie, n: usize, seed: u64) -> Vec<(&'static str, Vec<TokenId>)> {
    let entries: Vec<Vec<TokenId>> = trie.entries().into_iter().map(|(t, _)| t).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let e = entries.choose(&mut rng).expect("non-empty trie");
            let mut tokens = e[..rng.random_range(0..=e.len())].to_vec();
            if rng.random_bool(0.1) {
                tokens.push(rng.random_range(0..40));
            }
            let op = if rng.random_bool(0.5) { "allowed" } else { "resolve" };
            (op, tokens)
        })
        .collect()
}

/// Runs `clients` concurrent TCP clients, each opening a session and
/// sending `queries` requests. Returns the number of answers that differ
/// from [`in_process_answer`].
pub fn tcp_replay(
    addr: std::net::SocketAddr,
    trie: &SynonymTrie,
    clients: usize,
    queries: usize,
) -> usize {
    use serde_json::{json, Value};
    use std::io::{BufRead, BufReader, Write};
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..clients)
            .map(|c| {
                scope.spawn(move || {
                    let stream = std::net::TcpStream::connect(addr).expect("connect");
                    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
                    let mut writer = std::io::BufWriter::new(stream);
                    let mut line = String::new();
                    let open = json!({"op": "open", "request_id": "open", "payload": {"group": trie.group(), "fingerprint": trie.fingerprint()}});
                    writeln!(writer, "{open}").unwrap();
                    writer.flush().unwrap();
                    reader.read_line(&mut line).unwrap();
                    let opened: Value = serde_json::from_str(&line).unwrap();
                    let session = opened["result"]["session"].as_str().expect("session id").to_owned();
                    let qs = replay_queries(trie, queries, c as u64);
                    let requests: Vec<String> = qs
                        .iter()
                        .enumerate()
                        .map(|(i, (op, tokens))| {
                            let key = if *op == "allowed" { "prefix" } else { "tokens" };
                            json!({"op": op, "session": session, "request_id": i, "payload": {key: tokens}}).to_string()
                        })
                        .collect();
                    let sender = std::thread::spawn(move || {
                        for r in requests {
                            writeln!(writer, "{r}").unwrap();
                        }
                        writer.flush().unwrap();
                        writer
                    });
                    let mut mismatches = 0;
                    for (i, (op, tokens)) in qs.iter().enumerate() {
                        line.clear();
                        reader.read_line(&mut line).unwrap();
                        let r: Value = serde_json::from_str(&line).unwrap();
                        let got = if r["ok"] == true {
                            Ok(r["result"].clone())
                        } else {
                            Err(r["error"]["code"].as_str().unwrap_or("?").to_owned())
                        };
                        let want = in_process_answer(trie, op, tokens).map_err(str::to_owned);
                        if r["request_id"] != i || got != want {
                            mismatches += 1;
                        }
                    }
                    drop(sender.join().unwrap());
                    mismatches
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    })
}

/// Independent dense tf-idf: '#'-padded normalized trigrams, smoothed idf,
/// raw counts, L2 normalization, columns in sorted gram order.
pub struct DenseOracle {
    pub columns: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
}

pub fn trigrams(s: &str) -> Vec<String> {
    let n = normalize(s);
    if n.is_empty() {
        return vec![];
    }
    let padded: Vec<char> = format!("#{n}#").chars().collect();
    (0..padded.len().saturating_sub(2))
        .map(|i| padded[i..i + 3].iter().collect())
        .collect()
}

impl DenseOracle {
    pub fn fit(corpus: &[String]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in corpus {
            for g in trigrams(d).into_iter().collect::<BTreeSet<_>>() {
                *df.entry(g).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let idf = df.values().map(|d| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0).collect();
        let columns = df.keys().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Self { columns, idf }
    }

    pub fn vector(&self, s: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.idf.len()];
        for g in trigrams(s) {
            if let Some(&c) = self.columns.get(&g) {
                v[c] += self.idf[c];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        let (u, v) = (self.vector(a), self.vector(b));
        u.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>().clamp(0.0, 1.0)
    }
}

/// Brute-force representation choice: exact normalized match, else best
/// cosine with near-ties to the smallest string, else title or smallest.
pub fn oracle_pick(oracle: &DenseOracle, pruned: &PrunedKB, mention: &str, id: &str) -> String {
    let kept = pruned.kept(id).unwrap();
    let m = normalize(mention);
    if let Some(s) = kept.iter().find(|s| normalize(s) == m) {
        return s.clone();
    }
    let scores: Vec<f64> = kept.iter().map(|s| oracle.cosine(mention, s)).collect();
    let best = scores.iter().cloned().fold(0.0, f64::max);
    if best == 0.0 {
        let title = &pruned.base().concept(id).unwrap().title;
        if kept.contains(title) {
            return title.clone();
        }
        return kept.iter().min().unwrap().clone();
    }
    kept.iter()
        .zip(&scores)
        .filter(|(_, s)| best - **s <= 1e-12)
        .map(|(k, _)| k.clone())
        .min()
        .unwrap()
}
