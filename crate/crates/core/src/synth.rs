//! Prompts asking an LLM for synthetic training sentences, and validation of
//! the responses.
//!
//! Responses use one example per line, `mention<TAB>sentence`. A line is
//! accepted when its mention occurs exactly once in its sentence, matched
//! case-insensitively on whole words with whitespace runs treated as equal.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kb::{Concept, KnowledgeBase};
use crate::normalize::{collapse_whitespace, normalize};
use crate::seq::{Document, MentionRecord, MentionSpan, Source};
use crate::template::PromptTemplate;

pub const DEFAULT_PER_CONCEPT: usize = 3;
pub const DEFAULT_EXEMPLARS: usize = 5;

const METADATA: [&str; 5] = ["title", "group", "types", "definitions", "synonyms"];

/// Concepts to generate for, ordered by id. With `require_definition`, only
/// concepts carrying at least one definition.
pub fn select_concepts(kb: &KnowledgeBase, require_definition: bool) -> Vec<&Concept> {
    kb.concepts()
        .filter(|c| !require_definition || c.has_definition())
        .collect()
}

/// Built-in template for `language` (`en`, `fr` or `es`).
pub fn builtin_template(language: &str) -> Result<PromptTemplate> {
    let text = match language {
        "en" => include_str!("../templates/synth_en.txt"),
        "fr" => include_str!("../templates/synth_fr.txt"),
        "es" => include_str!("../templates/synth_es.txt"),
        other => {
            return Err(Error::InvalidArgument(format!(
                "no built-in generation template for language `{other}`"
            )))
        }
    };
    PromptTemplate::parse(text)
}

/// Checks that a generation template has a task description first, then the
/// exemplar block, then every concept metadata field.
pub fn check_synth_template(t: &PromptTemplate) -> Result<()> {
    let pos = |name: &str| {
        t.position_of(name)
            .ok_or_else(|| Error::Template(format!("missing placeholder `{{{{{name}}}}}`")))
    };
    pos("R")?;
    let ex = pos("exemplars")?;
    if t.body()[..ex].trim().is_empty() {
        return Err(Error::Template("task description must precede the exemplars".into()));
    }
    for name in METADATA {
        if pos(name)? < ex {
            return Err(Error::Template(format!(
                "`{{{{{name}}}}}` must come after the exemplars"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPrompt {
    pub concept_id: String,
    pub language: String,
    pub text: String,
    pub exemplar_ids: Vec<String>,
    pub template_version: String,
    /// Number of sentences requested.
    pub requested: usize,
}

/// Line of a prompt batch file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub concept_id: String,
    pub language: String,
    pub text: String,
}

impl From<&GenerationPrompt> for PromptRecord {
    fn from(p: &GenerationPrompt) -> Self {
        Self {
            concept_id: p.concept_id.clone(),
            language: p.language.clone(),
            text: p.text.clone(),
        }
    }
}

/// Line of a response batch file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub concept_id: String,
    pub raw: String,
}

/// Per-concept sampling seed, independent of batch order.
pub fn concept_seed(global_seed: u64, concept_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(concept_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn sentence_of(r: &MentionRecord) -> String {
    [r.left_ctx.trim(), r.mention.trim(), r.right_ctx.trim()]
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

fn one_line(s: &str) -> String {
    collapse_whitespace(s)
}

fn or_none(s: String) -> String {
    if s.is_empty() {
        "(none)".into()
    } else {
        s
    }
}

/// Renders the generation prompt for `concept`, with `k` exemplars drawn
/// without replacement from the human records of `dataset`.
pub fn build_prompt(
    concept: &Concept,
    dataset: &[MentionRecord],
    k: usize,
    global_seed: u64,
    template: &PromptTemplate,
    language: &str,
    per_concept: usize,
) -> Result<GenerationPrompt> {
    check_synth_template(template)?;
    if per_concept == 0 {
        return Err(Error::InvalidArgument("sentences per concept must be positive".into()));
    }
    let human: Vec<usize> = dataset
        .iter()
        .enumerate()
        .filter(|(_, r)| r.source == Source::Human)
        .map(|(i, _)| i)
        .collect();
    if k > human.len() {
        return Err(Error::NotEnoughExemplars {
            requested: k,
            available: human.len(),
        });
    }
    if k == 0 {
        log::warn!("prompt for {} has no exemplars", concept.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(concept_seed(global_seed, &concept.id));
    let picked: Vec<usize> = rand::seq::index::sample(&mut rng, human.len(), k)
        .into_iter()
        .map(|i| human[i])
        .collect();

    let exemplar_ids = picked
        .iter()
        .map(|&i| format!("{}#{i}", dataset[i].doc_id))
        .collect();
    let exemplars = picked
        .iter()
        .map(|&i| {
            let r = &dataset[i];
            format!("{}\t{}", one_line(&r.mention), one_line(&sentence_of(r)))
        })
        .collect::<Vec<_>>()
        .join("\n");
    let definitions = concept
        .definitions
        .iter()
        .map(|d| format!("- {}", one_line(d)))
        .collect::<Vec<_>>()
        .join("\n");

    let text = template.render(&[
        ("R", per_concept.to_string()),
        ("exemplars", exemplars),
        ("title", concept.title.clone()),
        ("group", concept.group.clone()),
        ("types", or_none(concept.types.join(", "))),
        ("definitions", or_none(definitions)),
        ("synonyms", concept.synonyms.join("; ")),
    ])?;
    Ok(GenerationPrompt {
        concept_id: concept.id.clone(),
        language: language.to_owned(),
        text,
        exemplar_ids,
        template_version: template.version().to_owned(),
        requested: per_concept,
    })
}

/// Prompts for every concept, built in parallel.
pub fn build_prompts(
    concepts: &[&Concept],
    dataset: &[MentionRecord],
    k: usize,
    global_seed: u64,
    template: &PromptTemplate,
    language: &str,
    per_concept: usize,
) -> Result<Vec<GenerationPrompt>> {
    concepts
        .par_iter()
        .map(|c| build_prompt(c, dataset, k, global_seed, template, language, per_concept))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    /// Not `mention<TAB>sentence` with both sides non-empty.
    Malformed,
    MentionNotFound,
    /// The mention occurs more than once, so its offset is ambiguous.
    AmbiguousMention,
    DuplicateSentence,
    /// Valid, but the concept already has its requested number of examples.
    OverCap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub concept_id: String,
    /// 1-based line number within the raw response.
    pub line: usize,
    pub text: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticExample {
    pub concept_id: String,
    pub group: String,
    /// The mention as it appears in the sentence.
    pub mention: String,
    pub sentence: String,
    /// Character offsets of the mention in `sentence`.
    pub start: usize,
    pub end: usize,
}

impl SyntheticExample {
    pub fn to_record(&self, doc_id: &str) -> MentionRecord {
        let chars: Vec<char> = self.sentence.chars().collect();
        MentionRecord {
            doc_id: doc_id.to_owned(),
            mention: self.mention.clone(),
            left_ctx: chars[..self.start].iter().collect::<String>().trim().to_owned(),
            right_ctx: chars[self.end..].iter().collect::<String>().trim().to_owned(),
            group: self.group.clone(),
            gold_concept: self.concept_id.clone(),
            source: Source::Synthetic,
        }
    }

    /// Single-mention document in the dataset format.
    pub fn to_document(&self, doc_id: &str) -> Document {
        Document {
            doc_id: doc_id.to_owned(),
            text: self.sentence.clone(),
            mentions: vec![MentionSpan {
                start: self.start,
                end: self.end,
                text: self.mention.clone(),
                group: self.group.clone(),
                concept_id: self.concept_id.clone(),
            }],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub accepted: Vec<SyntheticExample>,
    pub rejected: Vec<Rejection>,
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn mention_pattern(mention: &str) -> Option<Regex> {
    let words: Vec<String> = mention.split_whitespace().map(regex::escape).collect();
    if words.is_empty() {
        return None;
    }
    let mut pat = words.join(r"\s+");
    // Word boundaries only make sense next to word characters.
    if mention.trim_start().starts_with(is_word) {
        pat = format!(r"\b{pat}");
    }
    if mention.trim_end().ends_with(is_word) {
        pat = format!(r"{pat}\b");
    }
    RegexBuilder::new(&pat).case_insensitive(true).build().ok()
}

/// Byte spans where `mention` occurs in `sentence`.
pub fn find_mention(sentence: &str, mention: &str) -> Vec<(usize, usize)> {
    mention_pattern(mention)
        .map(|re| re.find_iter(sentence).map(|m| (m.start(), m.end())).collect())
        .unwrap_or_default()
}

/// Splits a raw response into accepted examples (at most `cap`) and
/// rejections. Blank lines are ignored; every other line lands in exactly
/// one of the two lists.
pub fn parse_response(raw: &str, concept: &Concept, cap: usize) -> ParsedResponse {
    let mut out = ParsedResponse::default();
    let mut seen = HashSet::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let reject = |reason| Rejection {
            concept_id: concept.id.clone(),
            line: i + 1,
            text: line.to_owned(),
            reason,
        };
        let parts: Vec<&str> = line.split('\t').collect();
        let (mention, sentence) = match parts.as_slice() {
            [m, s] if !m.trim().is_empty() && !s.trim().is_empty() => (m.trim(), s.trim()),
            _ => {
                out.rejected.push(reject(RejectReason::Malformed));
                continue;
            }
        };
        let hits = find_mention(sentence, mention);
        let (bs, be) = match hits.as_slice() {
            [] => {
                out.rejected.push(reject(RejectReason::MentionNotFound));
                continue;
            }
            [one] => *one,
            _ => {
                out.rejected.push(reject(RejectReason::AmbiguousMention));
                continue;
            }
        };
        if !seen.insert(normalize(sentence)) {
            out.rejected.push(reject(RejectReason::DuplicateSentence));
            continue;
        }
        if out.accepted.len() >= cap {
            out.rejected.push(reject(RejectReason::OverCap));
            continue;
        }
        let start = sentence[..bs].chars().count();
        let end = start + sentence[bs..be].chars().count();
        out.accepted.push(SyntheticExample {
            concept_id: concept.id.clone(),
            group: concept.group.clone(),
            mention: sentence[bs..be].to_owned(),
            sentence: sentence.to_owned(),
            start,
            end,
        });
    }
    out
}

/// Parses a response batch against `kb`. Accepted examples become documents
/// with ids `synth:<concept>#<n>`.
pub fn ingest_responses(
    kb: &KnowledgeBase,
    responses: &[ResponseRecord],
    cap: usize,
) -> Result<(Vec<Document>, Vec<Rejection>)> {
    let parsed: Vec<(String, ParsedResponse)> = responses
        .par_iter()
        .map(|r| {
            let c = kb.concept(&r.concept_id)?;
            Ok((c.id.clone(), parse_response(&r.raw, c, cap)))
        })
        .collect::<Result<_>>()?;
    let mut docs = Vec::new();
    let mut rejected = Vec::new();
    let mut counters = std::collections::HashMap::<String, usize>::new();
    for (id, p) in parsed {
        for ex in &p.accepted {
            let n = counters.entry(id.clone()).or_default();
            docs.push(ex.to_document(&format!("synth:{id}#{n}")));
            *n += 1;
        }
        rejected.extend(p.rejected);
    }
    Ok((docs, rejected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concept() -> Concept {
        Concept {
            id: "C1".into(),
            title: "Myocardial infarction".into(),
            group: "DISO".into(),
            types: vec!["Disease or Syndrome".into()],
            definitions: vec!["Necrosis of the myocardium.".into()],
            synonyms: vec!["Myocardial infarction".into(), "Heart attack".into(), "MI".into()],
        }
    }

    fn records(n: usize) -> Vec<MentionRecord> {
        (0..n)
            .map(|i| MentionRecord {
                doc_id: format!("d{i}"),
                mention: format!("m{i}"),
                left_ctx: "left".into(),
                right_ctx: "right".into(),
                group: "DISO".into(),
                gold_concept: "C9".into(),
                source: Source::Human,
            })
            .collect()
    }

    #[test]
    fn builtin_templates_are_well_formed() {
        for lang in ["en", "fr", "es"] {
            check_synth_template(&builtin_template(lang).unwrap()).unwrap();
        }
        assert!(builtin_template("de").is_err());
    }

    #[test]
    fn prompt_is_deterministic_and_complete() {
        let t = builtin_template("en").unwrap();
        let data = records(20);
        let a = build_prompt(&concept(), &data, 5, 7, &t, "en", 3).unwrap();
        let b = build_prompt(&concept(), &data, 5, 7, &t, "en", 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.exemplar_ids.len(), 5);
        for s in &concept().synonyms {
            assert!(a.text.contains(s.as_str()));
        }
        assert!(!a.text.contains("{{"));
        let c = build_prompt(&concept(), &data, 5, 8, &t, "en", 3).unwrap();
        assert_ne!(a.exemplar_ids, c.exemplar_ids);
    }

    #[test]
    fn exemplar_count_limits() {
        let t = builtin_template("en").unwrap();
        assert!(matches!(
            build_prompt(&concept(), &records(3), 5, 0, &t, "en", 3),
            Err(Error::NotEnoughExemplars { requested: 5, available: 3 })
        ));
        let p = build_prompt(&concept(), &records(3), 0, 0, &t, "en", 3).unwrap();
        assert!(p.exemplar_ids.is_empty());
    }

    #[test]
    fn parse_accepts_and_rejects() {
        let raw = "heart attack\tHe had a Heart  Attack last year.\n\
                   MI\tNo mention here at all.\n\
                   MI\tMI after MI.\n\
                   broken line\n\
                   \n\
                   heart attack\the had a heart attack last year.\n\
                   MI\tAcute MI was ruled out.\n\
                   myocardial infarction\tThe myocardial infarction was silent.\n\
                   MI\tOld MI on the ECG.";
        let p = parse_response(raw, &concept(), 3);
        assert_eq!(p.accepted.len(), 3);
        let reasons: Vec<_> = p.rejected.iter().map(|r| (r.line, r.reason)).collect();
        assert_eq!(
            reasons,
            [
                (2, RejectReason::MentionNotFound),
                (3, RejectReason::AmbiguousMention),
                (4, RejectReason::Malformed),
                (6, RejectReason::DuplicateSentence),
                (9, RejectReason::OverCap),
            ]
        );
        let first = &p.accepted[0];
        assert_eq!(first.mention, "Heart  Attack");
        let chars: Vec<char> = first.sentence.chars().collect();
        assert_eq!(chars[first.start..first.end].iter().collect::<String>(), first.mention);
        let rec = first.to_record("x");
        assert_eq!(rec.left_ctx, "He had a");
        assert_eq!(rec.gold_concept, "C1");
        assert_eq!(rec.source, Source::Synthetic);
    }

    #[test]
    fn word_boundaries() {
        assert!(find_mention("Acute MIs", "MI").is_empty());
        assert_eq!(find_mention("café MI.", "MI").len(), 1);
        assert_eq!(find_mention("(C-reactive) x", "(C-reactive)").len(), 1);
    }

    #[test]
    fn synthetic_documents_load_as_records() {
        let p = parse_response("heart attack\tA heart attack, again.", &concept(), 3);
        let doc = p.accepted[0].to_document("s#0");
        let recs = doc.mention_records(64, Source::Synthetic).unwrap();
        assert_eq!(recs[0].mention, "heart attack");
        assert_eq!(recs[0].right_ctx, ", again.");
    }
}
