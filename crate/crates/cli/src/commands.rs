use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use mmfact_core::applications::{scst_advantage, CandidateInputs, RewardConfig, ScoreInputs};
use mmfact_core::benchmarks::{
    bison_accuracy, foil_paired_accuracy, frank_correlate, ranking_accuracy, BenchmarkReport, BisonItem,
    FoilPair, RankingInstance,
};
use mmfact_core::combiner::{self, CombinerConfig, CombinerMethod};
use mmfact_core::ingest::{build_step_dataset, read_articles, read_jsonl, resolve_manifest, Split, SplitConfig, SplitSize};
use mmfact_core::judgments::{
    agreement, aggregate, ingest_judgments, meta_correlate, score_column, AgreementSummary, Facet, ScoreField,
};
use mmfact_core::scoring::{rescale, ScoreReport};
use mmfact_core::stats::CorrelationReport;
use mmfact_core::text::tokenize;
use mmfact_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{
    BenchmarkArgs, FacetArg, IngestArgs, MetaEvalArgs, MethodArg, RewardArgs, ScoreArgs, TaskArg, TuneArgs,
};
use crate::output::{emit, json_document, json_lines, Stamp};

/// Prefixes data errors with the record they came from; configuration
/// errors pass through so they keep their exit status.
fn context(what: impl std::fmt::Display) -> impl FnOnce(Error) -> Error {
    move |e| {
        if e.is_config() {
            e
        } else {
            Error::Data(format!("{what}: {e}"))
        }
    }
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.alpha) {
        return Err(Error::Config(format!("--alpha {} outside [0, 1]", a.alpha)));
    }
    if let Some(b) = a.rescale_baseline {
        rescale(0.0, b)?;
    }
    let bundles = resolve_manifest(&a.manifest, &a.containers)?.collect::<Result<Vec<_>>>()?;
    let reports = bundles
        .par_iter()
        .map(|b| {
            let mut r = ScoreReport::from_embeddings(
                b.example_id.clone(),
                b.system_id.clone(),
                &b.images,
                &b.summary_sentences,
                &b.doc_tokens,
                &b.summary_tokens,
                a.alpha,
                a.rescale_baseline,
            )
            .map_err(context(format!("example {}", b.example_id)))?;
            r.image_encoder = Some(b.image_encoder.clone());
            r.token_encoder = Some(b.token_encoder.clone());
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    tracing::info!(examples = reports.len(), "scored manifest");
    let stamp = Stamp::new(&json!({
        "command": "score",
        "alpha": a.alpha,
        "rescale_baseline": a.rescale_baseline,
    }));
    emit(a.out.as_deref(), &json_lines(&reports, &stamp)?)
}

/// Baseline recorded by `mmfact score`, if every report agrees on one.
fn recorded_baseline(reports: &[ScoreReport]) -> Option<f64> {
    let first = reports.first()?.rescale_baseline?;
    reports
        .iter()
        .all(|r| r.rescale_baseline == Some(first))
        .then_some(first)
}

fn combined_facet(continuous: bool) -> Facet {
    if continuous {
        Facet::CombinedContinuous
    } else {
        Facet::CombinedBinary
    }
}

pub fn tune(a: &TuneArgs) -> Result<()> {
    let method = CombinerMethod::from(a.method);
    let config = CombinerConfig {
        method,
        grid_step: a.grid_step,
        hidden_size: a.hidden_size,
        max_iters: a.max_iters,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..CombinerConfig::default()
    };
    config.validate()?;
    if a.method == MethodArg::Alpha && a.bert_baseline.is_some() {
        return Err(Error::Config(
            "--bert-baseline applies to the logistic and mlp methods; alpha tuning uses raw BERT-S".into(),
        ));
    }

    let reports: Vec<ScoreReport> = read_jsonl(&a.scores)?;
    let judged = aggregate(&ingest_judgments(&a.judgments)?)?;
    let baseline = match a.method {
        MethodArg::Alpha => None,
        _ => Some(a.bert_baseline.or_else(|| recorded_baseline(&reports)).ok_or_else(|| {
            Error::Config(
                "logistic and mlp combiners need rescaled BERT-S: pass --bert-baseline or score with --rescale-baseline"
                    .into(),
            )
        })?),
    };

    let mut by_key: HashMap<(&str, &str), &ScoreReport> = HashMap::with_capacity(reports.len());
    for r in &reports {
        if by_key.insert((&r.example_id, &r.system_id), r).is_some() {
            return Err(Error::Integrity(format!(
                "duplicate score for example {}, system {}",
                r.example_id, r.system_id
            )));
        }
    }
    let facet = combined_facet(a.continuous);
    let mut features = Vec::with_capacity(judged.len());
    let mut targets = Vec::with_capacity(judged.len());
    let mut missing = Vec::new();
    for j in &judged {
        let Some(r) = by_key.get(&(j.example_id.as_str(), j.system_id.as_str())) else {
            missing.push(format!("{}/{}", j.example_id, j.system_id));
            continue;
        };
        let bert = match baseline {
            Some(b) => rescale(r.bert_s, b)?,
            None => r.bert_s,
        };
        features.push([r.clip_s, bert]);
        targets.push(j.value(facet));
    }
    if !missing.is_empty() {
        return Err(Error::Join(format!(
            "{} judged summaries have no score: {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let mut fitted = combiner::fit(&features, &targets, &config)?;
    if let Some(b) = baseline {
        fitted = fitted.with_bert_baseline(b)?;
    }
    tracing::info!(method = ?method, dev_pearson = fitted.dev_pearson, n = features.len(), "fitted combiner");
    let stamp = Stamp::new(&json!({
        "command": "tune",
        "combiner": config,
        "continuous": a.continuous,
        "bert_baseline": baseline,
    }));
    emit(a.out.as_deref(), &json_document(&fitted, &stamp)?)
}

#[derive(Debug, Serialize)]
struct MetaEvalReport {
    metric: ScoreField,
    facet: &'static str,
    #[serde(flatten)]
    correlation: CorrelationReport,
    agreement: Option<AgreementSummary>,
}

pub fn meta_eval(a: &MetaEvalArgs) -> Result<()> {
    let facet = match a.facet {
        FacetArg::Document => Facet::Document,
        FacetArg::Image => Facet::Image,
        FacetArg::Combined => combined_facet(a.continuous),
    };
    if a.continuous && a.facet != FacetArg::Combined {
        return Err(Error::Config("--continuous only applies to --facet combined".into()));
    }
    let metric = ScoreField::from(a.metric);
    let reports: Vec<ScoreReport> = read_jsonl(&a.scores)?;
    let column = score_column(&reports, metric)?;
    let records = ingest_judgments(&a.judgments)?;
    let judged = aggregate(&records)?;
    let correlation = meta_correlate(&column, &judged, facet)?;
    let agreement = match agreement(&records) {
        Ok(s) => Some(s),
        Err(e @ Error::UndefinedKappa) => {
            tracing::warn!("agreement omitted: {e}");
            None
        }
        Err(e) => return Err(e),
    };
    let report = MetaEvalReport {
        metric,
        facet: facet.name(),
        correlation,
        agreement,
    };
    let stamp = Stamp::new(&json!({
        "command": "meta-eval",
        "metric": metric,
        "facet": facet.name(),
    }));
    emit(a.out.as_deref(), &json_lines(&[report], &stamp)?)
}

#[derive(Debug, Serialize)]
struct FrankReport {
    task: &'static str,
    slices: BTreeMap<String, CorrelationReport>,
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, flag: &str, task: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("--task {task} needs {flag}")))
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let config = match a.task {
        TaskArg::Wikihowfact => json!({"command": "benchmark", "task": "wikihowfact", "split": a.split}),
        TaskArg::Foil => {
            json!({"command": "benchmark", "task": "foil", "setting": mmfact_core::benchmarks::FoilSetting::from(a.setting).name()})
        }
        TaskArg::Bison => json!({"command": "benchmark", "task": "bison"}),
        TaskArg::Frank => json!({"command": "benchmark", "task": "frank"}),
    };
    let stamp = Stamp::new(&config);
    let out = a.out.as_deref();
    let report: BenchmarkReport = match a.task {
        TaskArg::Wikihowfact => {
            let instances: Vec<RankingInstance> = read_jsonl(required(&a.manifest, "--manifest", "wikihowfact")?)?;
            ranking_accuracy(&instances, &a.split)?
        }
        TaskArg::Foil => {
            let pairs: Vec<FoilPair> = read_jsonl(required(&a.manifest, "--manifest", "foil")?)?;
            let scores: Vec<(f64, f64)> = pairs.iter().map(|p| (p.true_score, p.foil_score)).collect();
            foil_paired_accuracy(&scores, a.setting.into())?
        }
        TaskArg::Bison => {
            let items: Vec<BisonItem> = read_jsonl(required(&a.manifest, "--manifest", "bison")?)?;
            bison_accuracy(&items)?
        }
        TaskArg::Frank => {
            let slices = frank_correlate(
                required(&a.annotations, "--annotations", "frank")?,
                required(&a.metric_scores, "--metric-scores", "frank")?,
            )?;
            let report = FrankReport { task: "frank", slices };
            return emit(out, &json_lines(&[report], &stamp)?);
        }
    };
    emit(out, &json_lines(&[report], &stamp)?)
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    articles: usize,
    train: usize,
    validation: usize,
    test: usize,
    skipped: usize,
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let fractions = a.validation_fraction.is_some() || a.test_fraction.is_some();
    let config = SplitConfig {
        seed: a.seed,
        validation: if fractions {
            SplitSize::Fraction(a.validation_fraction.unwrap_or(0.0))
        } else {
            SplitSize::Count(a.validation_articles.unwrap_or(0))
        },
        test: if fractions {
            SplitSize::Fraction(a.test_fraction.unwrap_or(0.0))
        } else {
            SplitSize::Count(a.test_articles.unwrap_or(0))
        },
    };
    let articles = read_articles(&a.articles)?;
    let dataset = build_step_dataset(&articles, &config)?;
    let stamp = Stamp::new(&json!({"command": "ingest", "split": config}));

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut counts = [0usize; 3];
    for (i, (split, name)) in [(Split::Train, "train"), (Split::Validation, "validation"), (Split::Test, "test")]
        .into_iter()
        .enumerate()
    {
        let part: Vec<_> = dataset.examples.iter().filter(|e| e.split == split).collect();
        counts[i] = part.len();
        emit(Some(&a.out_dir.join(format!("{name}.jsonl"))), &json_lines(&part, &stamp)?)?;
    }
    emit(Some(&a.out_dir.join("skipped.jsonl")), &json_lines(&dataset.skipped, &stamp)?)?;
    let summary = IngestSummary {
        articles: articles.len(),
        train: counts[0],
        validation: counts[1],
        test: counts[2],
        skipped: dataset.skipped.len(),
    };
    emit(None, &json_lines(&[summary], &stamp)?)
}

/// One side of a reward pair as it appears in the input file.
#[derive(Debug, Deserialize)]
struct CandidateRecord {
    #[serde(default)]
    clip_s: Option<f64>,
    #[serde(default)]
    bert_s: Option<f64>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RewardPair {
    pair_id: String,
    step: u64,
    sampled: CandidateRecord,
    greedy: CandidateRecord,
    #[serde(default)]
    references: Vec<String>,
}

#[derive(Debug, Serialize)]
struct RewardLine<'a> {
    pair_id: &'a str,
    step: u64,
    reward_name: String,
    advantage: f64,
}

fn candidate(c: &CandidateRecord, references: &[String]) -> Result<CandidateInputs> {
    let scores = match (c.clip_s, c.bert_s) {
        (Some(clip_s), Some(bert_s)) => Some(ScoreInputs::Precomputed { clip_s, bert_s }),
        (None, None) => None,
        _ => return Err(Error::Data("clip_s and bert_s must be given together".into())),
    };
    Ok(CandidateInputs {
        scores,
        tokens: c.text.as_deref().map(tokenize),
        references: references.iter().map(|r| tokenize(r)).collect(),
    })
}

pub fn reward(a: &RewardArgs) -> Result<()> {
    let config: RewardConfig = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("reward config {}: {e}", p.display())))?
        }
        None => RewardConfig::default(),
    };
    config.validate()?;
    let pairs: Vec<RewardPair> = read_jsonl(&a.pairs)?;
    let lines = pairs
        .par_iter()
        .map(|p| {
            let ctx = || context(format!("pair {}", p.pair_id));
            let sampled = candidate(&p.sampled, &p.references).map_err(ctx())?;
            let greedy = candidate(&p.greedy, &p.references).map_err(ctx())?;
            let adv = scst_advantage(&sampled, &greedy, p.step, &config).map_err(ctx())?;
            Ok(RewardLine {
                pair_id: &p.pair_id,
                step: p.step,
                reward_name: adv.reward_name,
                advantage: adv.advantage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stamp = Stamp::new(&json!({"command": "reward", "reward": config}));
    emit(a.out.as_deref(), &json_lines(&lines, &stamp)?)
}
