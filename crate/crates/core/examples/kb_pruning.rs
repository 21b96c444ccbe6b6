//! Loads a small knowledge base and strips synonyms that name two concepts
//! of the same semantic group.
//!
//!     cargo run --example kb_pruning

use entlink::kb::{parse_kb, prune_ambiguous_synonyms};

const KB: &str = include_str!("../tests/fixtures/discharge_kb.ndjson");

fn main() -> entlink::error::Result<()> {
    let kb = parse_kb(KB, "discharge_kb.ndjson".as_ref())?;
    let pruned = prune_ambiguous_synonyms(&kb);

    for c in kb.concepts() {
        println!("{} [{}] {}", c.id, c.group, c.title);
        println!("  kept:    {:?}", pruned.kept(&c.id)?);
        for d in pruned.dropped(&c.id)? {
            println!("  dropped: {:?} (also {:?})", d.synonym, d.collides_with);
        }
    }
    // "Discharge" survives in PROC: only one concept there uses it.
    println!("fallback concepts: {:?}", pruned.fallback_concepts());
    Ok(())
}
