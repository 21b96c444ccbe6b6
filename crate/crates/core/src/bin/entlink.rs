use std::io::{self, BufWriter, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use entlink::decode::{constrained_beam, DecodeOptions, Scorer};
use entlink::eval::{self, PredictionRecord, Workload};
use entlink::judge::{self, JudgeExemplar, JudgeResponse, Verdict};
use entlink::kb::{load_kb, prune_ambiguous_synonyms};
use entlink::representation::adaptive_representation;
use entlink::scorers::{HashScorer, TableScorer, UniformScorer};
use entlink::seq::{self, Document, MentionRecord, Source, Strategy, TrainingExample};
use entlink::service::{self, MaskService, TrieRegistry};
use entlink::synth::{self, ResponseRecord};
use entlink::template::PromptTemplate;
use entlink::tfidf::{TfidfModel, DEFAULT_ORDER};
use entlink::tokenizer::{CharTokenizer, TokenizerSpec, WhitespaceTokenizer};
use entlink::trie::{build_trie, load_trie_with_tokenizer, serialize_trie};
use entlink::{Error, Result};

#[derive(Parser)]
#[command(name = "entlink", version, about = "Trie-guided biomedical entity linking toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Knowledge base validation and synonym pruning.
    #[command(subcommand)]
    Kb(KbCmd),
    /// Character TF-IDF concept representation.
    #[command(subcommand)]
    Rep(RepCmd),
    /// Training data: examples, composition, subsampling.
    #[command(subcommand)]
    Data(DataCmd),
    /// Synonym tries.
    #[command(subcommand)]
    Trie(TrieCmd),
    /// Trie-constrained decoding with a reference scorer.
    Decode(DecodeArgs),
    /// Synthetic training sentence prompts and response ingestion.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// LLM-as-a-judge prompts and statistics.
    #[command(subcommand)]
    Judge(JudgeCmd),
    /// Metrics, thresholds and benchmarks.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the trie query service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum KbCmd {
    /// Parse a KB file and report its size and groups.
    Validate {
        path: PathBuf,
    },
    /// Drop in-group ambiguous synonyms and write the pruned KB.
    Prune {
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RepCmd {
    /// Fit the TF-IDF model on every kept synonym of a pruned KB.
    Build {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the adaptive representation of a concept for a mention.
    Pick {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        mention: String,
        #[arg(long)]
        concept: String,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Turn annotated documents into input/target training examples.
    Examples {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "en")]
        lang: String,
        #[arg(long, default_value_t = seq::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Order human and synthetic examples into one training stream.
    Compose {
        #[arg(long)]
        human: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep a seeded random fraction of the documents.
    Subsample {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TrieCmd {
    /// Build the synonym trie of one semantic group.
    Build {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        group: String,
        /// `char` or `whitespace`; the vocabulary covers every synonym of the KB.
        #[arg(long, default_value = "char")]
        tokenizer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Allowed continuations of a text prefix, or the concept of a full synonym.
    Query {
        #[arg(long)]
        trie: PathBuf,
        #[arg(long, default_value = "")]
        prefix: String,
        #[arg(long)]
        resolve: bool,
    },
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    trie: PathBuf,
    /// `uniform`, `hash:<seed>` or `table:<file.tsv>`.
    #[arg(long, default_value = "uniform")]
    scorer: String,
    /// Input file with one model input per line; `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long, default_value_t = 1)]
    beam: usize,
    #[arg(long)]
    renormalize: bool,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Render generation prompts for the selected concepts.
    Prompts {
        #[arg(long)]
        kb: PathBuf,
        /// Human-annotated documents to draw exemplars from.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_EXEMPLARS)]
        k: usize,
        #[arg(long, default_value_t = synth::DEFAULT_PER_CONCEPT)]
        per_concept: usize,
        #[arg(long, default_value = "en")]
        lang: String,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include concepts without definitions.
        #[arg(long)]
        all_concepts: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse raw responses into synthetic documents.
    Ingest {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_PER_CONCEPT)]
        per_concept: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum JudgeCmd {
    /// Prompts for every mispredicted mention.
    Prompts {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        /// Five labeled cases.
        #[arg(long)]
        exemplars: PathBuf,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = seq::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        max_synonyms: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse raw judge responses into verdicts.
    Ingest {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label distribution with document-bootstrap intervals.
    Stats {
        #[arg(long)]
        verdicts: PathBuf,
        /// Predictions, to count exact matches as correct.
        #[arg(long)]
        preds: Option<PathBuf>,
        #[arg(long, default_value_t = eval::DEFAULT_RESAMPLES)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Agreement between judge and human verdicts.
    Agree {
        #[arg(long)]
        judge: PathBuf,
        #[arg(long)]
        human: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Recall@1 with bootstrap intervals, overall and seen/unseen.
    Run {
        #[arg(long)]
        preds: PathBuf,
        /// Training documents, for the seen/unseen split.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Treat the training documents as synthetic and count them as seen.
        #[arg(long)]
        include_synthetic: bool,
        #[arg(long, default_value_t = eval::DEFAULT_RESAMPLES)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Precision, recall and coverage above a confidence threshold.
    Threshold {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        tau: f64,
        /// Report a sweep of this many evenly spaced thresholds instead.
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Trie size and query throughput on a random workload.
    Bench {
        #[arg(long)]
        trie: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Trie files to serve.
    #[arg(long = "trie", env = "ENTLINK_TRIES", value_delimiter = ',', required = true)]
    tries: Vec<PathBuf>,
    #[arg(long, env = "ENTLINK_LISTEN", default_value = service::DEFAULT_LISTEN)]
    listen: String,
    #[arg(long, env = "ENTLINK_IDLE_TIMEOUT", default_value_t = service::DEFAULT_IDLE_TIMEOUT.as_secs())]
    idle_timeout: u64,
    /// Serve on stdin/stdout instead of TCP.
    #[arg(long)]
    stdio: bool,
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn read_input(input: &str) -> Result<Vec<String>> {
    let mut text = String::new();
    if input == "-" {
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<stdin>", e))?;
    } else {
        text = std::fs::read_to_string(input)
            .map_err(|e| Error::io(input, e))?;
    }
    Ok(text.lines().map(str::to_owned).filter(|l| !l.trim().is_empty()).collect())
}

fn records_of(docs: &[Document], window: usize, source: Source) -> Result<Vec<MentionRecord>> {
    let mut out = Vec::new();
    for d in docs {
        out.extend(d.mention_records(window, source)?);
    }
    Ok(out)
}

fn kb_cmd(cmd: KbCmd) -> Result<()> {
    match cmd {
        KbCmd::Validate { path } => {
            let kb = load_kb(&path)?;
            let pruned = prune_ambiguous_synonyms(&kb);
            let dropped: usize = pruned.dropped_map().values().map(Vec::len).sum();
            print_json(&serde_json::json!({
                "version_tag": kb.version_tag(),
                "concepts": kb.len(),
                "groups": kb.groups().collect::<Vec<_>>(),
                "ambiguous_synonyms": dropped,
                "fallback_concepts": pruned.fallback_concepts().len(),
            }))
        }
        KbCmd::Prune { path, out, report } => {
            let pruned = prune_ambiguous_synonyms(&load_kb(&path)?);
            pruned.to_knowledge_base().save(&out)?;
            if let Some(report) = report {
                let f = std::fs::File::create(&report).map_err(|e| Error::io(&report, e))?;
                let mut w = BufWriter::new(f);
                pruned
                    .write_report(&mut w)
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::io(&report, e))?;
            }
            log::info!("{} fallback concept(s)", pruned.fallback_concepts().len());
            Ok(())
        }
    }
}

fn rep_cmd(cmd: RepCmd) -> Result<()> {
    match cmd {
        RepCmd::Build { kb, out } => {
            let pruned = prune_ambiguous_synonyms(&load_kb(&kb)?);
            let corpus: Vec<&str> = pruned.all_kept().collect();
            TfidfModel::fit(&corpus, DEFAULT_ORDER)?
                .with_version_tag(pruned.version_tag())
                .save(&out)
        }
        RepCmd::Pick {
            kb,
            model,
            mention,
            concept,
        } => {
            let pruned = prune_ambiguous_synonyms(&load_kb(&kb)?);
            let model = TfidfModel::load(&model)?;
            println!("{}", adaptive_representation(&pruned, &model, &mention, &concept)?);
            Ok(())
        }
    }
}

fn data_cmd(cmd: DataCmd) -> Result<()> {
    match cmd {
        DataCmd::Examples {
            docs,
            kb,
            model,
            lang,
            window,
            synthetic,
            out,
        } => {
            let pruned = prune_ambiguous_synonyms(&load_kb(&kb)?);
            let model = TfidfModel::load(&model)?;
            let cue = seq::cue_for_language(&lang)
                .ok_or_else(|| Error::InvalidArgument(format!("no cue word for language `{lang}`")))?;
            let source = if synthetic { Source::Synthetic } else { Source::Human };
            let docs: Vec<Document> = seq::read_ndjson(&docs)?;
            let examples = records_of(&docs, window, source)?
                .iter()
                .map(|r| seq::make_example(r, &pruned, &model, cue))
                .collect::<Result<Vec<_>>>()?;
            seq::save_ndjson(&out, &examples)
        }
        DataCmd::Compose {
            human,
            synthetic,
            strategy,
            seed,
            out,
        } => {
            let human: Vec<TrainingExample> = seq::read_ndjson(&human)?;
            let synthetic: Vec<TrainingExample> = seq::read_ndjson(&synthetic)?;
            seq::save_ndjson(&out, &seq::compose(&human, &synthetic, strategy, seed)?)
        }
        DataCmd::Subsample {
            docs,
            fraction,
            seed,
            out,
        } => {
            let docs: Vec<Document> = seq::read_ndjson(&docs)?;
            seq::save_ndjson(&out, &seq::subsample_documents(&docs, fraction, seed)?)
        }
    }
}

fn trie_cmd(cmd: TrieCmd) -> Result<()> {
    match cmd {
        TrieCmd::Build {
            kb,
            group,
            tokenizer,
            out,
        } => {
            let pruned = prune_ambiguous_synonyms(&load_kb(&kb)?);
            let spec = match tokenizer.as_str() {
                "char" => TokenizerSpec::from(&CharTokenizer::from_texts(pruned.all_kept())),
                "whitespace" => TokenizerSpec::from(&WhitespaceTokenizer::from_texts(pruned.all_kept())),
                other => return Err(Error::InvalidArgument(format!("unknown tokenizer `{other}`"))),
            };
            let tok = spec.build();
            let trie = build_trie(&pruned, &group, tok.as_ref())?.with_tokenizer(spec);
            for c in trie.collisions() {
                log::warn!("`{}` shared by {} and {:?}", c.surface, c.winner, c.losers);
            }
            serialize_trie(&trie, &out)?;
            print_json(&serde_json::json!({
                "group": trie.group(),
                "synonyms": trie.synonym_count(),
                "nodes": trie.node_count(),
                "fingerprint": trie.fingerprint(),
                "bytes": trie.serialized_size(),
            }))
        }
        TrieCmd::Query {
            trie,
            prefix,
            resolve,
        } => {
            let (trie, tok) = load_trie_with_tokenizer(&trie)?;
            let ids = tok.encode(&prefix);
            if resolve {
                return print_json(trie.resolve(&ids)?);
            }
            let allowed = trie.allowed_next(&ids)?;
            let next: Vec<String> = allowed.tokens.iter().map(|t| tok.decode(&[*t])).collect();
            print_json(&serde_json::json!({
                "tokens": allowed.tokens,
                "next": next,
                "eos": allowed.eos,
            }))
        }
    }
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let (trie, tok) = load_trie_with_tokenizer(&a.trie)?;
    let v = tok.vocab_size();
    let scorer: Box<dyn Scorer> = match a.scorer.split_once(':') {
        None if a.scorer == "uniform" => Box::new(UniformScorer::new(v)),
        Some(("hash", seed)) => {
            let seed = seed
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad hash seed `{seed}`")))?;
            Box::new(HashScorer::new(v, seed, 4.0))
        }
        Some(("table", path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path, e))?;
            Box::new(TableScorer::from_tsv(&text, tok.as_ref())?)
        }
        _ => return Err(Error::InvalidArgument(format!("unknown scorer `{}`", a.scorer))),
    };
    let opts = DecodeOptions {
        renormalize: a.renormalize,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for input in read_input(&a.input)? {
        let results = constrained_beam(scorer.as_ref(), &trie, &input, a.beam, opts)?;
        let line = serde_json::json!({"input": input, "results": results});
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn synth_cmd(cmd: SynthCmd) -> Result<()> {
    match cmd {
        SynthCmd::Prompts {
            kb,
            data,
            k,
            per_concept,
            lang,
            template,
            seed,
            all_concepts,
            out,
        } => {
            let kb = load_kb(&kb)?;
            let template = match template {
                Some(p) => PromptTemplate::load(p)?,
                None => synth::builtin_template(&lang)?,
            };
            let docs: Vec<Document> = seq::read_ndjson(&data)?;
            let records = records_of(&docs, seq::DEFAULT_WINDOW, Source::Human)?;
            let concepts = synth::select_concepts(&kb, !all_concepts);
            let prompts = synth::build_prompts(&concepts, &records, k, seed, &template, &lang, per_concept)?;
            let lines: Vec<synth::PromptRecord> = prompts.iter().map(Into::into).collect();
            log::info!("{} prompt(s)", lines.len());
            seq::save_ndjson(&out, &lines)
        }
        SynthCmd::Ingest {
            kb,
            responses,
            per_concept,
            out,
            report,
        } => {
            let kb = load_kb(&kb)?;
            let responses: Vec<ResponseRecord> = seq::read_ndjson(&responses)?;
            let (docs, rejected) = synth::ingest_responses(&kb, &responses, per_concept)?;
            seq::save_ndjson(&out, &docs)?;
            if let Some(report) = report {
                seq::save_ndjson(&report, &rejected)?;
            }
            log::info!("{} accepted, {} rejected", docs.len(), rejected.len());
            Ok(())
        }
    }
}

fn judge_cmd(cmd: JudgeCmd) -> Result<()> {
    match cmd {
        JudgeCmd::Prompts {
            preds,
            docs,
            kb,
            exemplars,
            template,
            window,
            max_synonyms,
            out,
        } => {
            let kb = load_kb(&kb)?;
            let preds: Vec<PredictionRecord> = seq::read_ndjson(&preds)?;
            let docs: Vec<Document> = seq::read_ndjson(&docs)?;
            let exemplars: Vec<JudgeExemplar> = seq::read_ndjson(&exemplars)?;
            let template = match template {
                Some(p) => PromptTemplate::load(p)?,
                None => judge::builtin_judge_template(),
            };
            let cases = judge::cases_from_predictions(&preds, &docs, &kb, window, max_synonyms)?;
            let lines = cases
                .iter()
                .map(|c| {
                    Ok(serde_json::json!({
                        "case_id": c.case_id,
                        "doc_id": c.doc_id,
                        "text": judge::build_judge_prompt(c, &exemplars, &template)?,
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            seq::save_ndjson(&out, &lines)
        }
        JudgeCmd::Ingest { responses, out } => {
            let responses: Vec<JudgeResponse> = seq::read_ndjson(&responses)?;
            let verdicts: Vec<Verdict> = responses.iter().map(Into::into).collect();
            let failures = verdicts.iter().filter(|v| v.label.is_none()).count();
            if failures > 0 {
                log::warn!("{failures} response(s) name no class");
            }
            seq::save_ndjson(&out, &verdicts)
        }
        JudgeCmd::Stats {
            verdicts,
            preds,
            bootstrap,
            seed,
        } => {
            let verdicts: Vec<Verdict> = seq::read_ndjson(&verdicts)?;
            let outcomes = match preds {
                Some(p) => judge::combine_outcomes(&seq::read_ndjson(&p)?, &verdicts)?,
                None => judge::outcomes_from_verdicts(&verdicts),
            };
            let dist = judge::label_distribution(&outcomes, bootstrap, seed)?;
            eprintln!("{:<14} {:>6} {:>22}", "label", "count", "percent (95% CI)");
            for r in &dist.rows {
                eprintln!(
                    "{:<14} {:>6} {:>6.1} ({:.1}-{:.1})",
                    r.label, r.count, r.percent.point, r.percent.lo, r.percent.hi
                );
            }
            print_json(&dist)
        }
        JudgeCmd::Agree { judge, human } => {
            let judge: Vec<Verdict> = seq::read_ndjson(&judge)?;
            let human: Vec<Verdict> = seq::read_ndjson(&human)?;
            print_json(&judge::agreement_report(&judge, &human)?)
        }
    }
}

fn fmt_ci(i: &Option<eval::Interval>) -> String {
    match i {
        Some(i) => format!("{:.4} ({:.4}-{:.4})", i.point, i.lo, i.hi),
        None => "n/a".into(),
    }
}

fn eval_cmd(cmd: EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Run {
            preds,
            train,
            include_synthetic,
            bootstrap,
            seed,
        } => {
            let preds: Vec<PredictionRecord> = seq::read_ndjson(&preds)?;
            for p in &preds {
                p.validate()?;
            }
            let source = if include_synthetic { Source::Synthetic } else { Source::Human };
            let train = match train {
                Some(t) => records_of(&seq::read_ndjson::<Document>(&t)?, seq::DEFAULT_WINDOW, source)?,
                None => Vec::new(),
            };
            let rows = eval::evaluate(&preds, &train, include_synthetic, bootstrap, seed)?;
            eprintln!("{:<8} {:>8} {:>28}", "subset", "mentions", "recall@1 (95% CI)");
            for r in &rows {
                eprintln!("{:<8} {:>8} {:>28}", r.subset, r.mentions, fmt_ci(&r.recall_at_1));
            }
            print_json(&rows)
        }
        EvalCmd::Threshold { preds, tau, sweep } => {
            let preds: Vec<PredictionRecord> = seq::read_ndjson(&preds)?;
            match sweep {
                Some(n) if n >= 2 => {
                    let reports = (0..n)
                        .map(|i| eval::threshold_analysis(&preds, i as f64 / (n - 1) as f64))
                        .collect::<Result<Vec<_>>>()?;
                    print_json(&reports)
                }
                Some(_) => Err(Error::InvalidArgument("a sweep needs at least two points".into())),
                None => print_json(&eval::threshold_analysis(&preds, tau)?),
            }
        }
        EvalCmd::Bench { trie, queries, seed } => {
            let (trie, _) = load_trie_with_tokenizer(&trie)?;
            let w = Workload::random(&trie, queries, seed);
            print_json(&eval::efficiency_probe(&trie, &w))
        }
    }
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let mut registry = TrieRegistry::new();
    for p in &a.tries {
        registry.load(p)?;
    }
    let svc = MaskService::new(registry, Duration::from_secs(a.idle_timeout))?;
    if a.stdio {
        let stdin = io::stdin();
        return svc
            .serve_stream(stdin.lock(), io::stdout())
            .map_err(|e| Error::io("<stdio>", e));
    }
    let listener = TcpListener::bind(&a.listen)
        .map_err(|e| Error::io(&a.listen, e))?;
    log::info!("listening on {}", a.listen);
    service::serve_tcp(Arc::new(svc), listener, Arc::new(AtomicBool::new(false)))
        .map_err(|e| Error::io(&a.listen, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Kb(c) => kb_cmd(c),
        Cmd::Rep(c) => rep_cmd(c),
        Cmd::Data(c) => data_cmd(c),
        Cmd::Trie(c) => trie_cmd(c),
        Cmd::Decode(a) => decode_cmd(a),
        Cmd::Synth(c) => synth_cmd(c),
        Cmd::Judge(c) => judge_cmd(c),
        Cmd::Eval(c) => eval_cmd(c),
        Cmd::Serve(a) => serve_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
