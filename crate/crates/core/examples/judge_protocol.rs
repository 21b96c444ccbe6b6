//! Renders a judge prompt for a mismatched prediction, parses free-text
//! verdicts and measures agreement with human labels.
//!
//!     cargo run --example judge_protocol

use entlink::judge::{
    agreement_report, build_judge_prompt, builtin_judge_template, parse_verdict, ConceptSummary, JudgeCase,
    JudgeExemplar, JudgeLabel, Verdict,
};

fn case(id: &str, mention: &str, predicted: (&str, &str), gold: (&str, &str)) -> JudgeCase {
    let summary = |(id, title): (&str, &str)| ConceptSummary {
        id: id.into(),
        title: title.into(),
        synonyms: vec![],
    };
    JudgeCase {
        case_id: id.into(),
        doc_id: id.split('#').next().unwrap_or(id).into(),
        mention: mention.into(),
        left_ctx: "admitted with".into(),
        right_ctx: "and fever".into(),
        predicted: summary(predicted),
        gold: summary(gold),
    }
}

fn verdict(case_id: &str, label: Option<JudgeLabel>, raw: &str) -> Verdict {
    Verdict {
        case_id: case_id.into(),
        doc_id: "d".into(),
        label,
        raw: raw.into(),
    }
}

fn main() -> entlink::error::Result<()> {
    let exemplars: Vec<JudgeExemplar> = [
        (JudgeLabel::Correct, ("C0032285", "Pneumonia"), ("C0032300", "Lobar pneumonia")),
        (JudgeLabel::Broad, ("C0024115", "Lung disease"), ("C0032285", "Pneumonia")),
        (JudgeLabel::Narrow, ("C0032300", "Lobar pneumonia"), ("C0032285", "Pneumonia")),
        (JudgeLabel::NoRelation, ("C0018787", "Heart"), ("C0032285", "Pneumonia")),
        (JudgeLabel::Broad, ("C0035204", "Respiratory infection"), ("C0032285", "Pneumonia")),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (label, p, g))| JudgeExemplar {
        case: case(&format!("ex#{i}"), "pneumonia", p, g),
        label,
        rationale: None,
    })
    .collect();

    let target = case("d1#0", "pneumonia", ("C0024115", "Lung disease"), ("C0032285", "Pneumonia"));
    let prompt = build_judge_prompt(&target, &exemplars, &builtin_judge_template())?;
    println!("{prompt}\n");

    let raws = [
        "The prediction names a parent concept, so Broad.",
        "Not Narrow: these are unrelated. Label: No relation",
        "I cannot decide.",
    ];
    for raw in raws {
        println!("{raw:?} -> {:?}", parse_verdict(raw));
    }

    let judge: Vec<Verdict> = raws
        .iter()
        .enumerate()
        .map(|(i, r)| verdict(&format!("c{i}"), parse_verdict(r), r))
        .collect();
    let human = vec![
        verdict("c0", Some(JudgeLabel::Broad), ""),
        verdict("c1", Some(JudgeLabel::Narrow), ""),
        verdict("c2", Some(JudgeLabel::NoRelation), ""),
    ];
    let report = agreement_report(&judge, &human)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
