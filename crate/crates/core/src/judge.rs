//! LLM-as-a-judge for linking mismatches: prompt rendering, verdict parsing,
//! label distributions and agreement with human labels.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{bootstrap_ci, group_by_doc, Interval, PredictionRecord};
use crate::kb::KnowledgeBase;
use crate::normalize::collapse_whitespace;
use crate::seq::{extract_context, Document};
use crate::template::PromptTemplate;

pub const EXEMPLAR_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeLabel {
    Correct,
    Broad,
    Narrow,
    NoRelation,
}

impl JudgeLabel {
    pub const ALL: [JudgeLabel; 4] = [Self::Correct, Self::Broad, Self::Narrow, Self::NoRelation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Correct => "Correct",
            Self::Broad => "Broad",
            Self::Narrow => "Narrow",
            Self::NoRelation => "No relation",
        }
    }

    /// Clinical severity: No relation < Broad = Narrow < Correct.
    pub fn rank(self) -> u8 {
        match self {
            Self::NoRelation => 0,
            Self::Broad | Self::Narrow => 1,
            Self::Correct => 2,
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            Self::Correct => "a clinician would accept the predicted concept as a coding of the mention; typical cases are duplicate codes for the same notion, or a reference annotation that is itself off",
            Self::Broad => "the predicted concept covers the mention's meaning but loses detail, e.g. \"pneumonia\" for \"bacterial pneumonia\"",
            Self::Narrow => "the predicted concept adds detail the mention does not support, e.g. \"bacterial pneumonia\" for \"pneumonia\"",
            Self::NoRelation => "the predicted concept refers to something else, so coding the mention with it would misrepresent the text",
        }
    }
}

impl fmt::Display for JudgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JudgeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_verdict(s)
            .filter(|_| LABEL_RE.find_iter(s).count() == 1)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown judge label `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSummary {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl ConceptSummary {
    /// Id, title and up to `max_synonyms` other synonyms from `kb`.
    pub fn from_kb(kb: &KnowledgeBase, id: &str, max_synonyms: usize) -> Result<Self> {
        let c = kb.concept(id)?;
        Ok(Self {
            id: c.id.clone(),
            title: c.title.clone(),
            synonyms: c
                .synonyms
                .iter()
                .filter(|s| **s != c.title)
                .take(max_synonyms)
                .cloned()
                .collect(),
        })
    }

    fn render(&self) -> String {
        if self.synonyms.is_empty() {
            format!("{} ({})", self.title, self.id)
        } else {
            format!("{} ({}); also: {}", self.title, self.id, self.synonyms.join("; "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeCase {
    pub case_id: String,
    pub doc_id: String,
    pub mention: String,
    pub left_ctx: String,
    pub right_ctx: String,
    pub predicted: ConceptSummary,
    pub gold: ConceptSummary,
}

impl JudgeCase {
    /// Only mismatches are judged.
    pub fn validate(&self) -> Result<()> {
        if self.predicted.id == self.gold.id {
            return Err(Error::SelfComparison(self.case_id.clone()));
        }
        Ok(())
    }
}

/// Case id used for the `mention_idx`-th mention of a document.
pub fn case_id(doc_id: &str, mention_idx: usize) -> String {
    format!("{doc_id}#{mention_idx}")
}

/// Judge cases for every prediction whose top candidate differs from gold.
/// Contexts come from `docs`, which must contain each referenced mention.
pub fn cases_from_predictions(
    preds: &[PredictionRecord],
    docs: &[Document],
    kb: &KnowledgeBase,
    window: usize,
    max_synonyms: usize,
) -> Result<Vec<JudgeCase>> {
    let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut out = Vec::new();
    for p in preds {
        let Some(top) = p.top() else { continue };
        if top.id == p.gold {
            continue;
        }
        let id = case_id(&p.doc_id, p.mention_idx);
        let span = by_id
            .get(p.doc_id.as_str())
            .and_then(|d| d.mentions.get(p.mention_idx).map(|m| (*d, m)));
        let Some((doc, m)) = span else {
            return Err(Error::CaseMismatch(format!("no document mention for {id}")));
        };
        let (left_ctx, right_ctx) = extract_context(&doc.text, (m.start, m.end), window)?;
        out.push(JudgeCase {
            case_id: id,
            doc_id: p.doc_id.clone(),
            mention: m.text.clone(),
            left_ctx,
            right_ctx,
            predicted: ConceptSummary::from_kb(kb, &top.id, max_synonyms)?,
            gold: ConceptSummary::from_kb(kb, &p.gold, max_synonyms)?,
        });
    }
    Ok(out)
}

/// A worked example shown to the judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeExemplar {
    pub case: JudgeCase,
    pub label: JudgeLabel,
    #[serde(default)]
    pub rationale: Option<String>,
}

pub fn builtin_judge_template() -> PromptTemplate {
    PromptTemplate::parse(include_str!("../templates/judge_en.txt"))
        .expect("built-in judge template is valid")
}

fn context_line(c: &JudgeCase) -> String {
    collapse_whitespace(&format!("{} [{}] {}", c.left_ctx, c.mention, c.right_ctx))
}

pub fn build_judge_prompt(
    case: &JudgeCase,
    exemplars: &[JudgeExemplar],
    template: &PromptTemplate,
) -> Result<String> {
    case.validate()?;
    if exemplars.len() != EXEMPLAR_COUNT {
        return Err(Error::ExemplarCount {
            expected: EXEMPLAR_COUNT,
            found: exemplars.len(),
        });
    }
    let class_definitions = JudgeLabel::ALL
        .iter()
        .map(|l| format!("- {}: {}.", l.name(), l.definition()))
        .collect::<Vec<_>>()
        .join("\n");
    let exemplar_block = exemplars
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut s = format!(
                "Example {}\nContext: {}\nReference concept: {}\nPredicted concept: {}\n",
                i + 1,
                context_line(&e.case),
                e.case.gold.render(),
                e.case.predicted.render()
            );
            if let Some(r) = &e.rationale {
                s.push_str(&collapse_whitespace(r));
                s.push('\n');
            }
            s.push_str(&format!("Label: {}", e.label));
            s
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    template.render(&[
        ("class_definitions", class_definitions),
        ("exemplars", exemplar_block),
        ("left_context", collapse_whitespace(&case.left_ctx)),
        ("mention", case.mention.clone()),
        ("right_context", collapse_whitespace(&case.right_ctx)),
        ("gold", case.gold.render()),
        ("predicted", case.predicted.render()),
    ])
}

static LABEL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:no[\s_-]*relation|correct|broad|narrow)\b").expect("valid regex")
});

/// Last class name mentioned in `raw`, case-insensitively; `None` if there
/// is none.
pub fn parse_verdict(raw: &str) -> Option<JudgeLabel> {
    let m = LABEL_RE.find_iter(raw).last()?;
    let word = m.as_str().to_lowercase();
    Some(match word.as_str() {
        "correct" => JudgeLabel::Correct,
        "broad" => JudgeLabel::Broad,
        "narrow" => JudgeLabel::Narrow,
        _ => JudgeLabel::NoRelation,
    })
}

/// A judge or human label for one case. `label` is `None` when a response
/// could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub case_id: String,
    pub doc_id: String,
    pub label: Option<JudgeLabel>,
    #[serde(default)]
    pub raw: String,
}

/// Line of a judge response file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub case_id: String,
    pub doc_id: String,
    pub raw: String,
}

impl From<&JudgeResponse> for Verdict {
    fn from(r: &JudgeResponse) -> Self {
        Verdict {
            case_id: r.case_id.clone(),
            doc_id: r.doc_id.clone(),
            label: parse_verdict(&r.raw),
            raw: r.raw.clone(),
        }
    }
}

/// Outcome of one evaluated mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Top prediction equals the gold code; counted as Correct.
    Exact,
    Judged(JudgeLabel),
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionOutcome {
    pub doc_id: String,
    pub outcome: Outcome,
}

/// Exact matches from `preds` plus the verdict for every mismatch.
pub fn combine_outcomes(preds: &[PredictionRecord], verdicts: &[Verdict]) -> Result<Vec<MentionOutcome>> {
    let by_case: HashMap<&str, &Verdict> = verdicts.iter().map(|v| (v.case_id.as_str(), v)).collect();
    let mut used = 0;
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        let outcome = if p.hit_at(1) {
            Outcome::Exact
        } else {
            let id = case_id(&p.doc_id, p.mention_idx);
            let v = by_case
                .get(id.as_str())
                .ok_or_else(|| Error::CaseMismatch(format!("no verdict for {id}")))?;
            used += 1;
            v.label.map_or(Outcome::ParseFailure, Outcome::Judged)
        };
        out.push(MentionOutcome {
            doc_id: p.doc_id.clone(),
            outcome,
        });
    }
    if used != verdicts.len() {
        return Err(Error::CaseMismatch(format!(
            "{} verdict(s) do not match a mispredicted mention",
            verdicts.len() - used
        )));
    }
    Ok(out)
}

/// Judged mismatches only, without exact matches.
pub fn outcomes_from_verdicts(verdicts: &[Verdict]) -> Vec<MentionOutcome> {
    verdicts
        .iter()
        .map(|v| MentionOutcome {
            doc_id: v.doc_id.clone(),
            outcome: v.label.map_or(Outcome::ParseFailure, Outcome::Judged),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub label: String,
    pub count: usize,
    /// Percentage with a document-bootstrap interval.
    pub percent: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub mentions: usize,
    /// `Exact match` first, then the four labels (Correct including exact
    /// matches), then parse failures. The last five rows sum to 100.
    pub rows: Vec<DistributionRow>,
}

impl LabelDistribution {
    pub fn row(&self, label: &str) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

pub const EXACT_ROW: &str = "Exact match";
pub const PARSE_FAILURE_ROW: &str = "Parse failure";

pub fn label_distribution(items: &[MentionOutcome], b: usize, seed: u64) -> Result<LabelDistribution> {
    if items.is_empty() {
        return Err(Error::EmptyInput("outcome"));
    }
    let docs = group_by_doc(items, |m| &m.doc_id);
    type Pred = fn(Outcome) -> bool;
    let buckets: [(&str, Pred); 6] = [
        (EXACT_ROW, |o| o == Outcome::Exact),
        ("Correct", |o| {
            matches!(o, Outcome::Exact | Outcome::Judged(JudgeLabel::Correct))
        }),
        ("Broad", |o| o == Outcome::Judged(JudgeLabel::Broad)),
        ("Narrow", |o| o == Outcome::Judged(JudgeLabel::Narrow)),
        ("No relation", |o| o == Outcome::Judged(JudgeLabel::NoRelation)),
        (PARSE_FAILURE_ROW, |o| o == Outcome::ParseFailure),
    ];
    let mut rows = Vec::new();
    for (label, pred) in buckets {
        let metric = |sample: &[&Vec<&MentionOutcome>]| {
            let (hit, total) = sample.iter().fold((0usize, 0usize), |(h, t), d| {
                (h + d.iter().filter(|m| pred(m.outcome)).count(), t + d.len())
            });
            100.0 * hit as f64 / total as f64
        };
        rows.push(DistributionRow {
            label: label.into(),
            count: items.iter().filter(|m| pred(m.outcome)).count(),
            percent: bootstrap_ci(&docs, metric, b, seed, 0.95)?,
        });
    }
    Ok(LabelDistribution {
        mentions: items.len(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub cases: usize,
    pub agreement: f64,
    /// Precision of each judge label against the human label; `None` when
    /// the judge never used it.
    pub precision: BTreeMap<JudgeLabel, Option<f64>>,
    /// Fraction of cases where the judge label ranks strictly above the
    /// human one. Unparsed judge labels never count.
    pub overstatement: f64,
    pub judge_parse_failures: usize,
}

pub fn agreement_report(judge: &[Verdict], human: &[Verdict]) -> Result<AgreementReport> {
    if human.is_empty() {
        return Err(Error::EmptyInput("human verdict"));
    }
    let mut gold: HashMap<&str, JudgeLabel> = HashMap::new();
    for v in human {
        let label = v.label.ok_or_else(|| {
            Error::InvalidArgument(format!("human verdict {} has no label", v.case_id))
        })?;
        if gold.insert(&v.case_id, label).is_some() {
            return Err(Error::CaseMismatch(format!("duplicate human case {}", v.case_id)));
        }
    }
    if judge.len() != gold.len() {
        return Err(Error::CaseMismatch(format!(
            "{} judge verdicts vs {} human verdicts",
            judge.len(),
            gold.len()
        )));
    }
    let mut agree = 0usize;
    let mut over = 0usize;
    let mut failures = 0usize;
    let mut used: HashMap<JudgeLabel, (usize, usize)> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for v in judge {
        let h = *gold
            .get(v.case_id.as_str())
            .ok_or_else(|| Error::CaseMismatch(format!("judge case {} has no human label", v.case_id)))?;
        if !seen.insert(&v.case_id) {
            return Err(Error::CaseMismatch(format!("duplicate judge case {}", v.case_id)));
        }
        let Some(j) = v.label else {
            failures += 1;
            continue;
        };
        let e = used.entry(j).or_default();
        e.1 += 1;
        if j == h {
            agree += 1;
            e.0 += 1;
        }
        if j.rank() > h.rank() {
            over += 1;
        }
    }
    let n = judge.len() as f64;
    Ok(AgreementReport {
        cases: judge.len(),
        agreement: agree as f64 / n,
        precision: JudgeLabel::ALL
            .iter()
            .map(|l| {
                let p = used.get(l).map(|(tp, total)| *tp as f64 / *total as f64);
                (*l, p)
            })
            .collect(),
        overstatement: over as f64 / n,
        judge_parse_failures: failures,
    })
}
