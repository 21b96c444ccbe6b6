//! Recall@1 with document-level bootstrap intervals, seen/unseen splits and
//! a confidence threshold sweep on simulated predictions.
//!
//!     cargo run --example evaluation

use entlink::eval::{evaluate, threshold_analysis, Candidate, PredictionRecord};
use entlink::seq::{MentionRecord, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> entlink::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let preds: Vec<PredictionRecord> = (0..600)
        .map(|i| {
            let gold = format!("C{:03}", rng.random_range(0..80));
            let confidence: f64 = rng.random_range(0.05..1.0);
            // confident predictions are right more often
            let hit = rng.random_bool(0.3 + 0.6 * confidence);
            let top = if hit { gold.clone() } else { format!("C{:03}", rng.random_range(80..99)) };
            PredictionRecord {
                doc_id: format!("doc{}", i / 6),
                mention_idx: i % 6,
                gold,
                candidates: vec![Candidate { id: top, confidence }],
            }
        })
        .collect();
    let train: Vec<MentionRecord> = (0..40)
        .map(|i| MentionRecord {
            doc_id: format!("train{i}"),
            mention: String::new(),
            left_ctx: String::new(),
            right_ctx: String::new(),
            group: "DISO".into(),
            gold_concept: format!("C{i:03}"),
            source: Source::Human,
        })
        .collect();

    for row in evaluate(&preds, &train, false, 1000, 7)? {
        match row.recall_at_1 {
            Some(ci) => println!(
                "{:<7} n={:<4} R@1 {:.3} [{:.3}, {:.3}]",
                row.subset, row.mentions, ci.point, ci.lo, ci.hi
            ),
            None => println!("{:<7} n=0", row.subset),
        }
    }

    println!("\n  tau   kept  precision  recall");
    for i in 0..=10 {
        let r = threshold_analysis(&preds, i as f64 / 10.0)?;
        let p = r.precision.map_or("-".to_string(), |p| format!("{p:.3}"));
        println!("{:5.1} {:6.3} {:>10} {:7.3}", r.tau, r.kept_fraction, p, r.recall);
    }
    Ok(())
}
