//! Picks, per mention, the synonym of the gold concept that is closest in
//! character trigram TF-IDF space.
//!
//!     cargo run --example adaptive_representation

use entlink::kb::{parse_kb, prune_ambiguous_synonyms};
use entlink::representation::{adaptive_representation, static_representation};
use entlink::tfidf::{cosine, TfidfModel, DEFAULT_ORDER};

const KB: &str = include_str!("../tests/fixtures/discharge_kb.ndjson");

fn main() -> entlink::error::Result<()> {
    let kb = parse_kb(KB, "discharge_kb.ndjson".as_ref())?;
    let pruned = prune_ambiguous_synonyms(&kb);
    let corpus: Vec<&str> = pruned.all_kept().collect();
    let model = TfidfModel::fit(&corpus, DEFAULT_ORDER)?;
    println!("{} grams over {} synonyms", model.vocab_len(), model.doc_count());

    let cases = [
        ("discharge", "C0012621"),
        ("vaginal d/c", "C0227791"),
        ("cardiac", "C0018787"),
        ("myocardium", "C0018787"),
    ];
    for (mention, id) in cases {
        let rep = adaptive_representation(&pruned, &model, mention, id)?;
        let score = cosine(&model.vectorize(mention), &model.vectorize(&rep));
        println!(
            "{mention:>12} -> {rep:<18} cos {score:.3}   (title: {})",
            static_representation(&kb, id)?
        );
    }
    Ok(())
}
