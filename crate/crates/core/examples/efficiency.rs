//! Builds a trie over a synthetic 50,000-synonym group and compares its size
//! and query rate with a dense per-synonym vector index.
//!
//!     cargo run --release --example efficiency

use std::time::Instant;

use entlink::eval::{efficiency_probe, DenseIndex, Workload};
use entlink::kb::{prune_ambiguous_synonyms, Concept, KnowledgeBase};
use entlink::tokenizer::CharTokenizer;
use entlink::trie::build_trie;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYNONYMS: usize = 50_000;

fn main() -> entlink::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(5..20)).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
    };
    let concepts: Vec<Concept> = (0..SYNONYMS / 4)
        .map(|i| {
            let synonyms: Vec<String> = (0..4).map(|_| word(&mut rng)).collect();
            Concept {
                id: format!("C{i:07}"),
                title: synonyms[0].clone(),
                group: "G".into(),
                types: vec![],
                definitions: vec![],
                synonyms,
            }
        })
        .collect();
    let kb = KnowledgeBase::from_concepts(concepts, "synthetic")?;

    let t = Instant::now();
    let pruned = prune_ambiguous_synonyms(&kb);
    let tok = CharTokenizer::from_texts(pruned.all_kept());
    let trie = build_trie(&pruned, "G", &tok)?;
    println!("trie built in {:.2?}", t.elapsed());

    let report = efficiency_probe(&trie, &Workload::random(&trie, 100_000, 2));
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));

    let rows: Vec<(String, String)> = pruned
        .kept_map()
        .iter()
        .flat_map(|(id, syns)| syns.iter().map(move |s| (id.clone(), s.clone())))
        .collect();
    let t = Instant::now();
    let dense = DenseIndex::build(rows, 128)?;
    println!("dense index built in {:.2?}", t.elapsed());
    println!(
        "serialized bytes: trie {} vs dense {} ({:.1}x)",
        trie.serialized_size(),
        dense.serialized_size(),
        dense.serialized_size() as f64 / trie.serialized_size() as f64
    );
    Ok(())
}
