//! Metric-evaluation protocols: multiple-choice ranking, paired true/foil
//! captions, paired images, correlation with document-summarization
//! factuality annotations, and image precision.
//!
//! Ties never count as correct: a constant metric scores 0 on every
//! accuracy task.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{bert_s, clip_s, clipbertscore, cosine_sim, EmbeddingMatrix};
use crate::stats::CorrelationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Document,
    Image,
    Combined,
}

/// One multiple-choice item with precomputed candidate scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingInstance {
    pub instance_id: String,
    pub prompt_mode: PromptMode,
    pub correct_index: usize,
    pub candidate_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub task: String,
    pub split: String,
    pub accuracy: f64,
    pub n: usize,
    pub correct: usize,
}

impl BenchmarkReport {
    fn from_counts(task: &str, split: &str, correct: usize, n: usize) -> Self {
        Self {
            task: task.to_string(),
            split: split.to_string(),
            accuracy: correct as f64 / n as f64,
            n,
            correct,
        }
    }
}

fn check_finite(id: &str, scores: &[f64]) -> Result<()> {
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Data(format!("{id}: non-finite score {s}")));
    }
    Ok(())
}

/// True when the correct candidate strictly beats every other candidate.
pub fn ranked_first(instance: &RankingInstance) -> bool {
    let best = instance.candidate_scores[instance.correct_index];
    instance
        .candidate_scores
        .iter()
        .enumerate()
        .all(|(i, &s)| i == instance.correct_index || best > s)
}

/// Fraction of instances whose correct candidate is ranked strictly first.
pub fn ranking_accuracy(instances: &[RankingInstance], split: &str) -> Result<BenchmarkReport> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("no ranking instances".into()));
    }
    let mut correct = 0;
    for inst in instances {
        if inst.correct_index >= inst.candidate_scores.len() {
            return Err(Error::Data(format!(
                "{}: correct_index {} with {} candidates",
                inst.instance_id,
                inst.correct_index,
                inst.candidate_scores.len()
            )));
        }
        check_finite(&inst.instance_id, &inst.candidate_scores)?;
        correct += ranked_first(inst) as usize;
    }
    Ok(BenchmarkReport::from_counts("wikihowfact", split, correct, instances.len()))
}

/// Reference setting for the true-vs-foil caption task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoilSetting {
    #[serde(rename = "no-ref")]
    NoRef,
    #[serde(rename = "1-ref")]
    OneRef,
    #[serde(rename = "4-ref")]
    FourRef,
}

impl FoilSetting {
    pub fn name(self) -> &'static str {
        match self {
            FoilSetting::NoRef => "no-ref",
            FoilSetting::OneRef => "1-ref",
            FoilSetting::FourRef => "4-ref",
        }
    }

    pub fn references(self) -> usize {
        match self {
            FoilSetting::NoRef => 0,
            FoilSetting::OneRef => 1,
            FoilSetting::FourRef => 4,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "no-ref" => Ok(FoilSetting::NoRef),
            "1-ref" => Ok(FoilSetting::OneRef),
            "4-ref" => Ok(FoilSetting::FourRef),
            other => Err(Error::Config(format!("unknown FOIL setting {other:?}"))),
        }
    }
}

/// Reference captions joined into the pseudo-document BERT-S reads.
pub fn concat_references<S: AsRef<str>>(references: &[S]) -> String {
    references.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

/// Score of one caption under a FOIL setting: CLIP-S alone without
/// references, otherwise CLIPBERTScore with the first `k` reference token
/// blocks stacked into the document.
pub fn foil_caption_score(
    setting: FoilSetting,
    image: &EmbeddingMatrix,
    caption_sentence: &EmbeddingMatrix,
    caption_tokens: &EmbeddingMatrix,
    reference_tokens: &[EmbeddingMatrix],
    alpha: f64,
) -> Result<f64> {
    let clip = clip_s(image, caption_sentence)?;
    let k = setting.references();
    if k == 0 {
        return Ok(clip);
    }
    if reference_tokens.len() < k {
        return Err(Error::Data(format!(
            "{} setting needs {k} references, got {}",
            setting.name(),
            reference_tokens.len()
        )));
    }
    let parts: Vec<&EmbeddingMatrix> = reference_tokens[..k].iter().collect();
    let doc = EmbeddingMatrix::vstack(&parts)?;
    clipbertscore(clip, bert_s(&doc, caption_tokens)?, alpha)
}

/// One FOIL manifest line: a caption and its foiled twin, scored upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoilPair {
    #[serde(default)]
    pub pair_id: String,
    pub true_score: f64,
    pub foil_score: f64,
}

/// Fraction of pairs where the true caption strictly outscores its foil.
pub fn foil_paired_accuracy(pairs: &[(f64, f64)], setting: FoilSetting) -> Result<BenchmarkReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no FOIL pairs".into()));
    }
    let mut correct = 0;
    for (i, &(t, f)) in pairs.iter().enumerate() {
        check_finite(&format!("pair {i}"), &[t, f])?;
        correct += (t > f) as usize;
    }
    Ok(BenchmarkReport::from_counts("foil", setting.name(), correct, pairs.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageChoice {
    A,
    B,
}

/// One caption with two candidate images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisonItem {
    #[serde(default)]
    pub item_id: String,
    pub text: Vec<f32>,
    pub image_a: Vec<f32>,
    pub image_b: Vec<f32>,
    pub correct: ImageChoice,
}

/// The image chosen for `item`, or `None` on an exact tie.
pub fn bison_choice(item: &BisonItem) -> Result<Option<ImageChoice>> {
    // single image vs single sentence: CLIP-S reduces to one cosine
    let a = cosine_sim(&item.image_a, &item.text)?;
    let b = cosine_sim(&item.image_b, &item.text)?;
    Ok(if a > b {
        Some(ImageChoice::A)
    } else if b > a {
        Some(ImageChoice::B)
    } else {
        None
    })
}

pub fn bison_accuracy(items: &[BisonItem]) -> Result<BenchmarkReport> {
    if items.is_empty() {
        return Err(Error::EmptyInput("no BISON items".into()));
    }
    let mut correct = 0;
    for item in items {
        let choice = bison_choice(item).map_err(|e| match e {
            Error::Shape(m) => Error::Shape(format!("item {}: {m}", item.item_id)),
            other => other,
        })?;
        correct += (choice == Some(item.correct)) as usize;
    }
    Ok(BenchmarkReport::from_counts("bison", "test", correct, items.len()))
}

/// Fraction of recommended images that are in the gold set.
pub fn image_precision<S: AsRef<str>>(recommended: &[S], gold: &[S]) -> Result<f64> {
    let rec: HashSet<&str> = recommended.iter().map(AsRef::as_ref).collect();
    if rec.is_empty() {
        return Err(Error::EmptyInput("no recommended images".into()));
    }
    let gold: HashSet<&str> = gold.iter().map(AsRef::as_ref).collect();
    Ok(rec.intersection(&gold).count() as f64 / rec.len() as f64)
}

/// One human factuality annotation in the public benchmark's field naming.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FrankAnnotation {
    pub hash: String,
    pub model_name: String,
    #[serde(rename = "Factuality")]
    pub factuality: f64,
    /// `cnndm` or `xsum`; inferred from the hash when absent.
    #[serde(default)]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FrankScore {
    pub hash: String,
    pub model_name: String,
    pub score: f64,
}

impl FrankAnnotation {
    /// XSum documents are keyed by numeric ids, CNN/DM by hex digests.
    pub fn slice(&self) -> Result<&str> {
        match self.dataset.as_deref() {
            Some(d @ ("cnndm" | "xsum")) => Ok(d),
            Some(other) => Err(Error::Data(format!(
                "annotation {}/{}: unknown dataset {other:?}",
                self.hash, self.model_name
            ))),
            None if !self.hash.is_empty() && self.hash.bytes().all(|b| b.is_ascii_digit()) => Ok("xsum"),
            None => Ok("cnndm"),
        }
    }
}

/// Parses either a JSON array or JSON lines of `T`.
pub fn parse_json_records<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}

/// Correlation per slice (`all`, `cnndm`, `xsum`); empty slices are omitted.
pub fn frank_correlate_records(
    annotations: &[FrankAnnotation],
    scores: &[FrankScore],
) -> Result<BTreeMap<String, CorrelationReport>> {
    let mut by_key: HashMap<(&str, &str), f64> = HashMap::with_capacity(scores.len());
    for s in scores {
        if by_key.insert((&s.hash, &s.model_name), s.score).is_some() {
            return Err(Error::Integrity(format!("duplicate score for {}/{}", s.hash, s.model_name)));
        }
    }
    let mut seen = HashSet::new();
    let mut slices: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for a in annotations {
        if a.hash.is_empty() || a.model_name.is_empty() {
            return Err(Error::Data("annotation missing hash or model_name".into()));
        }
        if !seen.insert((&a.hash, &a.model_name)) {
            return Err(Error::Integrity(format!("duplicate annotation {}/{}", a.hash, a.model_name)));
        }
        let Some(&score) = by_key.get(&(a.hash.as_str(), a.model_name.as_str())) else {
            return Err(Error::Data(format!("no metric score for {}/{}", a.hash, a.model_name)));
        };
        let slice = a.slice()?.to_string();
        for name in ["all".to_string(), slice] {
            let (xs, ys) = slices.entry(name).or_default();
            xs.push(score);
            ys.push(a.factuality);
        }
    }
    slices
        .into_iter()
        .map(|(name, (xs, ys))| {
            let r = CorrelationReport::compute(&xs, &ys)
                .map_err(|e| Error::Data(format!("slice {name}: {e}")))?;
            Ok((name, r))
        })
        .collect()
}

pub fn frank_correlate(
    annotations: impl AsRef<Path>,
    metric_scores: impl AsRef<Path>,
) -> Result<BTreeMap<String, CorrelationReport>> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    let ann: Vec<FrankAnnotation> = parse_json_records(&read(annotations.as_ref())?)?;
    let sc: Vec<FrankScore> = parse_json_records(&read(metric_scores.as_ref())?)?;
    frank_correlate_records(&ann, &sc)
}
