mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{agreement_fixture, distribution_fixture, PLANTED};
use entlink::eval::{
    bootstrap_ci, evaluate, group_by_doc, percentile, pooled_recall, recall_at_k, stratify_seen_unseen,
    threshold_analysis, Candidate, PredictionRecord,
};
use entlink::judge::{
    agreement_report, build_judge_prompt, builtin_judge_template, combine_outcomes, label_distribution,
    outcomes_from_verdicts, parse_verdict, ConceptSummary, JudgeCase, JudgeExemplar, JudgeLabel, MentionOutcome,
    Outcome, Verdict, EXACT_ROW, PARSE_FAILURE_ROW,
};
use entlink::seq::{MentionRecord, Source};
use proptest::prelude::*;

fn arb_predictions(max: usize) -> impl Strategy<Value = Vec<PredictionRecord>> {
    prop::collection::vec(
        (0usize..6, 0u8..5, prop::collection::vec((0u8..5, 1u32..=1000), 0..5)),
        1..max,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (doc, gold, cands))| {
                let mut candidates: Vec<Candidate> = cands
                    .into_iter()
                    .map(|(id, c)| Candidate {
                        id: format!("C{id}"),
                        confidence: c as f64 / 1000.0,
                    })
                    .collect();
                candidates.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
                PredictionRecord {
                    doc_id: format!("doc{doc}"),
                    mention_idx: i,
                    gold: format!("C{gold}"),
                    candidates,
                }
            })
            .collect()
    })
}

fn brute_recall(preds: &[PredictionRecord], k: usize) -> f64 {
    let mut hits = 0;
    for p in preds {
        for c in p.candidates.iter().take(k) {
            if c.id == p.gold {
                hits += 1;
                break;
            }
        }
    }
    hits as f64 / preds.len() as f64
}

fn train_record(concept: &str, source: Source) -> MentionRecord {
    MentionRecord {
        doc_id: "t".into(),
        mention: "m".into(),
        left_ctx: String::new(),
        right_ctx: String::new(),
        group: "G".into(),
        gold_concept: concept.into(),
        source,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn recall_matches_brute_force(preds in arb_predictions(40)) {
        let mut last = 0.0;
        for k in 1..=6 {
            let r = recall_at_k(&preds, k).unwrap();
            prop_assert_eq!(r, brute_recall(&preds, k));
            prop_assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn seen_and_unseen_partition_predictions(
        preds in arb_predictions(40),
        train in prop::collection::vec((0u8..5, any::<bool>()), 0..8),
        include_synthetic in any::<bool>(),
    ) {
        let train: Vec<MentionRecord> = train
            .iter()
            .map(|(c, syn)| train_record(&format!("C{c}"), if *syn { Source::Synthetic } else { Source::Human }))
            .collect();
        let (seen, unseen) = stratify_seen_unseen(&train, &preds, include_synthetic);
        prop_assert_eq!(seen.len() + unseen.len(), preds.len());
        let seen_idx: BTreeSet<usize> = seen.iter().map(|p| p.mention_idx).collect();
        let unseen_idx: BTreeSet<usize> = unseen.iter().map(|p| p.mention_idx).collect();
        prop_assert!(seen_idx.is_disjoint(&unseen_idx));
        for p in &preds {
            let in_train = train
                .iter()
                .any(|r| r.gold_concept == p.gold && (include_synthetic || r.source == Source::Human));
            prop_assert_eq!(seen_idx.contains(&p.mention_idx), in_train);
        }
    }

    #[test]
    fn threshold_sweep_is_monotone(preds in arb_predictions(60)) {
        let base = threshold_analysis(&preds, 0.0).unwrap();
        prop_assert_eq!(base.recall, recall_at_k(&preds, 1).unwrap());
        let mut prev = base;
        for i in 1..=100 {
            let r = threshold_analysis(&preds, i as f64 / 100.0).unwrap();
            prop_assert!(r.kept_fraction <= prev.kept_fraction);
            prop_assert!(r.recall <= prev.recall);
            let kept: Vec<&PredictionRecord> = preds
                .iter()
                .filter(|p| p.top().is_some_and(|c| c.confidence > r.tau))
                .collect();
            prop_assert_eq!(r.kept_fraction, kept.len() as f64 / preds.len() as f64);
            if kept.is_empty() {
                prop_assert_eq!(r.precision, None);
            } else {
                let hits = kept.iter().filter(|p| p.hit_at(1)).count() as f64;
                prop_assert_eq!(r.precision, Some(hits / kept.len() as f64));
            }
            prev = r;
        }
        let top = threshold_analysis(&preds, 1.0).unwrap();
        prop_assert_eq!(top.kept_fraction, 0.0);
    }

    #[test]
    fn bootstrap_interval_contains_the_point(preds in arb_predictions(40), seed in any::<u64>()) {
        let docs = group_by_doc(&preds, |p| &p.doc_id);
        let ci = bootstrap_ci(&docs, pooled_recall(1), 200, seed, 0.95).unwrap();
        prop_assert_eq!(ci.point, recall_at_k(&preds, 1).unwrap());
        prop_assert!(ci.lo <= ci.point && ci.point <= ci.hi);
        prop_assert!(0.0 <= ci.lo && ci.hi <= 1.0);
        prop_assert_eq!(ci, bootstrap_ci(&docs, pooled_recall(1), 200, seed, 0.95).unwrap());
    }

    #[test]
    fn distribution_recovers_planted_proportions(counts in prop::collection::vec(0usize..30, 6), docs in 1usize..10) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let kinds = [
            Outcome::Exact,
            Outcome::Judged(JudgeLabel::Correct),
            Outcome::Judged(JudgeLabel::Broad),
            Outcome::Judged(JudgeLabel::Narrow),
            Outcome::Judged(JudgeLabel::NoRelation),
            Outcome::ParseFailure,
        ];
        let mut items = Vec::new();
        for (kind, n) in kinds.iter().zip(&counts) {
            for _ in 0..*n {
                items.push(MentionOutcome { doc_id: format!("d{}", items.len() % docs), outcome: *kind });
            }
        }
        let total = items.len() as f64;
        let dist = label_distribution(&items, 100, 3).unwrap();
        let pct = |n: usize| 100.0 * n as f64 / total;
        prop_assert_eq!(dist.row(EXACT_ROW).unwrap().count, counts[0]);
        prop_assert_eq!(dist.row("Correct").unwrap().count, counts[0] + counts[1]);
        prop_assert_eq!(dist.row("Correct").unwrap().percent.point, pct(counts[0] + counts[1]));
        prop_assert_eq!(dist.row("Broad").unwrap().percent.point, pct(counts[2]));
        prop_assert_eq!(dist.row("Narrow").unwrap().percent.point, pct(counts[3]));
        prop_assert_eq!(dist.row("No relation").unwrap().percent.point, pct(counts[4]));
        prop_assert_eq!(dist.row(PARSE_FAILURE_ROW).unwrap().percent.point, pct(counts[5]));
        let sum: f64 = dist.rows.iter().skip(1).map(|r| r.percent.point).sum();
        prop_assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn verdict_parsing_is_total(raw in "\\PC{0,80}") {
        let _ = parse_verdict(&raw);
    }

    #[test]
    fn last_class_name_wins(
        names in prop::collection::vec(prop::sample::select(JudgeLabel::ALL.to_vec()), 1..5),
        filler in "[ .,:;\n]{1,4}",
        upper in any::<bool>(),
    ) {
        let mut raw = String::from("Reasoning");
        for l in &names {
            raw.push_str(&filler);
            raw.push_str(&if upper { l.name().to_uppercase() } else { l.name().to_string() });
            raw.push_str(&filler);
        }
        prop_assert_eq!(parse_verdict(&raw), Some(*names.last().unwrap()));
    }
}

#[test]
fn percentile_interpolates() {
    let v = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(percentile(&v, 0.0), 1.0);
    assert_eq!(percentile(&v, 1.0), 5.0);
    assert_eq!(percentile(&v, 0.5), 3.0);
    assert!((percentile(&v, 0.3) - 2.2).abs() < 1e-12);
    assert_eq!(percentile(&[7.0], 0.975), 7.0);
}

#[test]
fn evaluate_reports_three_subsets() {
    let preds: Vec<PredictionRecord> = (0..20)
        .map(|i| PredictionRecord {
            doc_id: format!("d{}", i % 4),
            mention_idx: i,
            gold: format!("C{}", i % 2),
            candidates: vec![Candidate {
                id: if i % 3 == 0 { "C9".into() } else { format!("C{}", i % 2) },
                confidence: 0.5,
            }],
        })
        .collect();
    let train = vec![train_record("C0", Source::Human), train_record("C1", Source::Synthetic)];
    let rows = evaluate(&preds, &train, false, 200, 1).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.subset.as_str()).collect();
    assert_eq!(names, ["all", "seen", "unseen"]);
    assert_eq!(rows[0].mentions, 20);
    assert_eq!(rows[1].mentions, 10);
    assert_eq!(rows[2].mentions, 10);
    assert_eq!(rows[0].recall_at_1.unwrap().point, recall_at_k(&preds, 1).unwrap());
    let with_synth = evaluate(&preds, &train, true, 200, 1).unwrap();
    assert_eq!(with_synth[1].mentions, 20);
    assert!(with_synth[2].recall_at_1.is_none());
}

#[test]
fn planted_agreement_statistics() {
    let (judge, human) = agreement_fixture();
    assert_eq!(judge.len(), 150);

    // the fixture realizes the planted matrix
    let gold: BTreeMap<&str, JudgeLabel> = human.iter().map(|v| (v.case_id.as_str(), v.label.unwrap())).collect();
    let mut observed: BTreeMap<(Option<JudgeLabel>, JudgeLabel), usize> = BTreeMap::new();
    for v in &judge {
        *observed.entry((v.label, gold[v.case_id.as_str()])).or_default() += 1;
    }
    for (row, cols) in PLANTED {
        for (h, n) in JudgeLabel::ALL.iter().zip(cols) {
            assert_eq!(observed.get(&(row, *h)).copied().unwrap_or(0), n, "{row:?} vs {h:?}");
        }
    }

    let r = agreement_report(&judge, &human).unwrap();
    assert_eq!(r.cases, 150);
    assert_eq!(r.judge_parse_failures, 2);
    // diagonal 34 + 20 + 15 + 26
    assert_eq!(r.agreement, 95.0 / 150.0);
    // Correct above Broad/Narrow/No relation: 4 + 3 + 2; Broad and Narrow above No relation: 5 + 4
    assert_eq!(r.overstatement, 18.0 / 150.0);
    assert_eq!(r.precision[&JudgeLabel::Correct], Some(34.0 / 43.0));
    assert_eq!(r.precision[&JudgeLabel::Broad], Some(20.0 / 33.0));
    assert_eq!(r.precision[&JudgeLabel::Narrow], Some(15.0 / 26.0));
    assert_eq!(r.precision[&JudgeLabel::NoRelation], Some(26.0 / 46.0));
}

#[test]
fn agreement_edge_cases() {
    let v = |id: &str, l: JudgeLabel| Verdict {
        case_id: id.into(),
        doc_id: "d".into(),
        label: Some(l),
        raw: String::new(),
    };
    let same: Vec<Verdict> = (0..4).map(|i| v(&i.to_string(), JudgeLabel::ALL[i])).collect();
    let r = agreement_report(&same, &same).unwrap();
    assert_eq!((r.agreement, r.overstatement), (1.0, 0.0));

    let judge: Vec<Verdict> = (0..3).map(|i| v(&i.to_string(), JudgeLabel::Correct)).collect();
    let human: Vec<Verdict> = (0..3).map(|i| v(&i.to_string(), JudgeLabel::NoRelation)).collect();
    let r = agreement_report(&judge, &human).unwrap();
    assert_eq!((r.agreement, r.overstatement), (0.0, 1.0));
    assert_eq!(r.precision[&JudgeLabel::Broad], None);

    // Broad and Narrow are incomparable
    let r = agreement_report(&[v("x", JudgeLabel::Narrow)], &[v("x", JudgeLabel::Broad)]).unwrap();
    assert_eq!(r.overstatement, 0.0);

    assert!(agreement_report(&judge[..2], &human).is_err());
    assert!(agreement_report(&[v("zz", JudgeLabel::Broad)], &[v("x", JudgeLabel::Broad)]).is_err());
}

fn replay(name: &str) -> Vec<(String, String)> {
    let (preds, verdicts) = distribution_fixture(name);
    let outcomes = combine_outcomes(&preds, &verdicts).unwrap();
    let dist = label_distribution(&outcomes, 200, 11).unwrap();
    assert_eq!(dist.mentions, 1000);
    assert_eq!(dist.row(PARSE_FAILURE_ROW).unwrap().count, 0);
    for row in &dist.rows {
        assert!(row.percent.lo <= row.percent.point && row.percent.point <= row.percent.hi);
    }
    dist.rows
        .iter()
        .filter(|r| r.label != PARSE_FAILURE_ROW)
        .map(|r| (r.label.clone(), format!("{:.1}", r.percent.point)))
        .collect()
}

fn expected(rows: [(&str, &str); 5]) -> Vec<(String, String)> {
    rows.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[test]
fn augmented_distribution_replay() {
    assert_eq!(
        replay("distribution_augmented"),
        expected([
            (EXACT_ROW, "67.0"),
            ("Correct", "72.6"),
            ("Broad", "11.0"),
            ("Narrow", "5.9"),
            ("No relation", "10.5")
        ])
    );
}

#[test]
fn baseline_distribution_replay() {
    assert_eq!(
        replay("distribution_baseline"),
        expected([
            (EXACT_ROW, "64.2"),
            ("Correct", "68.9"),
            ("Broad", "13.0"),
            ("Narrow", "4.3"),
            ("No relation", "13.8")
        ])
    );
}

#[test]
fn outcomes_require_matching_verdicts() {
    let (preds, verdicts) = distribution_fixture("distribution_baseline");
    assert!(combine_outcomes(&preds, &verdicts[1..]).is_err());
    let mut extra = verdicts.clone();
    extra.push(Verdict {
        case_id: "nowhere#0".into(),
        doc_id: "nowhere".into(),
        label: Some(JudgeLabel::Broad),
        raw: String::new(),
    });
    assert!(combine_outcomes(&preds, &extra).is_err());
    assert_eq!(outcomes_from_verdicts(&verdicts).len(), 358);
}

fn case(id: &str, pred: &str, gold: &str) -> JudgeCase {
    JudgeCase {
        case_id: id.into(),
        doc_id: "d".into(),
        mention: "pneumonia".into(),
        left_ctx: "admitted with".into(),
        right_ctx: "and fever".into(),
        predicted: ConceptSummary {
            id: pred.into(),
            title: "Bacterial pneumonia".into(),
            synonyms: vec!["bacterial lung infection".into()],
        },
        gold: ConceptSummary {
            id: gold.into(),
            title: "Pneumonia".into(),
            synonyms: vec![],
        },
    }
}

#[test]
fn judge_prompt_contents() {
    let t = builtin_judge_template();
    let exemplars: Vec<JudgeExemplar> = JudgeLabel::ALL
        .iter()
        .chain([JudgeLabel::Correct].iter())
        .enumerate()
        .map(|(i, l)| JudgeExemplar {
            case: case(&format!("ex{i}"), "C1", "C2"),
            label: *l,
            rationale: Some("Short reason.".into()),
        })
        .collect();
    let c = case("d#0", "C0032290", "C0032285");
    let prompt = build_judge_prompt(&c, &exemplars, &t).unwrap();
    assert!(!prompt.contains("{{"));
    for l in JudgeLabel::ALL {
        assert!(prompt.contains(l.name()));
        assert!(prompt.contains(l.definition()));
    }
    for needle in ["admitted with [pneumonia] and fever", "C0032290", "C0032285", "bacterial lung infection"] {
        assert!(prompt.contains(needle), "{needle}");
    }
    assert_eq!(prompt, build_judge_prompt(&c, &exemplars, &t).unwrap());
    assert!(build_judge_prompt(&c, &exemplars[..4], &t).is_err());
    assert!(build_judge_prompt(&case("s", "C1", "C1"), &exemplars, &t).is_err());
}

#[test]
fn label_names_parse() {
    assert_eq!(parse_verdict("… the prediction is Broad."), Some(JudgeLabel::Broad));
    assert_eq!(parse_verdict("no_relation"), Some(JudgeLabel::NoRelation));
    assert_eq!(parse_verdict("Label: NO  RELATION"), Some(JudgeLabel::NoRelation));
    assert_eq!(parse_verdict("Broad at first, but on reflection Narrow"), Some(JudgeLabel::Narrow));
    assert_eq!(parse_verdict("incorrectly broadened"), None);
    assert_eq!(parse_verdict(""), None);
    assert_eq!("Correct".parse::<JudgeLabel>().unwrap(), JudgeLabel::Correct);
    assert!("Broad or Narrow".parse::<JudgeLabel>().is_err());
}
