//! Decodes with and without the synonym trie. A scorer that wants to spell
//! a pruned, ambiguous surface is forced onto a real synonym of the group.
//!
//!     cargo run --example guided_decoding

use entlink::decode::{constrained_beam, constrained_greedy, unconstrained_greedy, DecodeOptions};
use entlink::kb::{parse_kb, prune_ambiguous_synonyms};
use entlink::scorers::{HashScorer, TableScorer};
use entlink::tokenizer::{CharTokenizer, Tokenizer};
use entlink::trie::build_trie;

const KB: &str = include_str!("../tests/fixtures/discharge_kb.ndjson");

fn main() -> entlink::error::Result<()> {
    let kb = parse_kb(KB, "discharge_kb.ndjson".as_ref())?;
    let pruned = prune_ambiguous_synonyms(&kb);
    let tok = CharTokenizer::from_texts(pruned.all_kept());
    let diso = build_trie(&pruned, "DISO", &tok)?;
    println!(
        "DISO trie: {} synonyms, {} nodes, fingerprint {}",
        diso.synonym_count(),
        diso.node_count(),
        diso.fingerprint()
    );

    let input = "Clear [ discharge ] { DISO } from the wound [SEP] [ discharge ] is";
    let opts = DecodeOptions::default();

    let oracle = TableScorer::oracle(tok.vocab_size(), tok.eos_id(), &tok.encode("Fluid Discharge"), 0.9);
    let r = constrained_greedy(&oracle, &diso, input, opts)?;
    println!("oracle scorer:  {} {:?} p={:.6}", r.concept, r.surface, r.confidence);

    let adversary = TableScorer::oracle(tok.vocab_size(), tok.eos_id(), &tok.encode("Discharge"), 0.9);
    println!("free decoding:  {:?}", unconstrained_greedy(&adversary, &tok, input, 40));
    let r = constrained_greedy(&adversary, &diso, input, opts)?;
    println!("with the trie:  {} {:?}", r.concept, r.surface);

    let noisy = HashScorer::new(tok.vocab_size(), 7, 3.0);
    for r in constrained_beam(&noisy, &diso, input, 3, DecodeOptions { renormalize: true })? {
        println!("beam:           {} {:?} logp={:.3}", r.concept, r.surface, r.logprob_sum);
    }
    Ok(())
}
