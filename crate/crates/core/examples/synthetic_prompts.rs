//! Builds generation prompts for concepts with definitions, then parses a
//! canned model response into synthetic documents.
//!
//!     cargo run --example synthetic_prompts

use entlink::kb::parse_kb;
use entlink::seq::{MentionRecord, Source};
use entlink::synth::{build_prompts, builtin_template, ingest_responses, select_concepts, ResponseRecord};

const KB: &str = include_str!("../tests/fixtures/discharge_kb.ndjson");

fn record(i: usize, mention: &str, left: &str, right: &str, concept: &str) -> MentionRecord {
    MentionRecord {
        doc_id: format!("train{i}"),
        mention: mention.into(),
        left_ctx: left.into(),
        right_ctx: right.into(),
        group: "DISO".into(),
        gold_concept: concept.into(),
        source: Source::Human,
    }
}

fn main() -> entlink::error::Result<()> {
    let kb = parse_kb(KB, "discharge_kb.ndjson".as_ref())?;
    let train = vec![
        record(0, "discharge", "Serous", "noted at the drain site.", "C0012621"),
        record(1, "heart", "The", "sounds were regular.", "C0018787"),
        record(2, "discharged", "Patient was", "on day three.", "C0030685"),
    ];

    let concepts = select_concepts(&kb, true);
    let template = builtin_template("en")?;
    let prompts = build_prompts(&concepts, &train, 2, 13, &template, "en", 3)?;
    println!("{} prompts, template {}", prompts.len(), template.version());
    println!("--- {} ---\n{}", prompts[0].concept_id, prompts[0].text);

    let responses = vec![ResponseRecord {
        concept_id: "C0012621".into(),
        raw: "discharge\tA thin discharge was seen on the dressing.\n\
              fluid discharge\tFluid discharge soaked the gauze overnight.\n\
              discharge\tNo drainage was present.\n\
              discharge\tDischarge, discharge and more discharge."
            .into(),
    }];
    let (docs, rejected) = ingest_responses(&kb, &responses, 3)?;
    for d in &docs {
        println!("accepted {}: {}", d.doc_id, d.text);
    }
    for r in &rejected {
        println!("rejected line {}: {:?}", r.line, r.reason);
    }
    Ok(())
}
