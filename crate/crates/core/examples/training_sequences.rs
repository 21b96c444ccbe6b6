//! Turns annotated documents into input/target pairs and mixes human and
//! synthetic examples with each composition strategy.
//!
//!     cargo run --example training_sequences

use entlink::kb::{parse_kb, prune_ambiguous_synonyms};
use entlink::seq::{compose, cue_for_language, make_example, Document, MentionSpan, Source, Strategy, DEFAULT_WINDOW};
use entlink::tfidf::{TfidfModel, DEFAULT_ORDER};

const KB: &str = include_str!("../tests/fixtures/discharge_kb.ndjson");

fn doc(id: &str, text: &str, mention: &str, group: &str, concept: &str) -> Document {
    let start = text.find(mention).expect("mention in text");
    let start = text[..start].chars().count();
    Document {
        doc_id: id.into(),
        text: text.into(),
        mentions: vec![MentionSpan {
            start,
            end: start + mention.chars().count(),
            text: mention.into(),
            group: group.into(),
            concept_id: concept.into(),
        }],
    }
}

fn main() -> entlink::error::Result<()> {
    let kb = parse_kb(KB, "discharge_kb.ndjson".as_ref())?;
    let pruned = prune_ambiguous_synonyms(&kb);
    let corpus: Vec<&str> = pruned.all_kept().collect();
    let model = TfidfModel::fit(&corpus, DEFAULT_ORDER)?;
    let cue = cue_for_language("en").expect("english cue");

    let human_docs = [
        doc("h1", "Purulent discharge from the wound was cultured.", "discharge", "DISO", "C0012621"),
        doc("h2", "Discharge home is planned for Monday.", "Discharge", "PROC", "C0030685"),
    ];
    let synth_docs = [
        doc("s1", "The heart was enlarged on imaging.", "heart", "ANAT", "C0018787"),
        doc("s2", "She reported a vaginal discharge for two days.", "vaginal discharge", "DISO", "C0227791"),
        doc("s3", "Cardiac silhouette within normal limits.", "Cardiac", "ANAT", "C0018787"),
    ];
    let examples = |docs: &[Document], source| -> entlink::error::Result<Vec<_>> {
        let mut out = Vec::new();
        for d in docs {
            for rec in d.mention_records(DEFAULT_WINDOW, source)? {
                out.push(make_example(&rec, &pruned, &model, cue)?);
            }
        }
        Ok(out)
    };
    let human = examples(&human_docs, Source::Human)?;
    let synthetic = examples(&synth_docs, Source::Synthetic)?;
    for ex in human.iter().chain(&synthetic) {
        println!("{:<60} => {}", ex.input, ex.target);
    }

    for strategy in [Strategy::Spt, Strategy::Comb, Strategy::Int] {
        let mixed = compose(&human, &synthetic, strategy, 42)?;
        let order: Vec<&str> = mixed.iter().map(|e| e.doc_id.as_str()).collect();
        println!("{strategy:?}: {order:?}");
    }
    Ok(())
}
