//! Guidance-image selection and self-critical reward advantages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{bert_s, clip_s, clipbertscore, EmbeddingMatrix, DEFAULT_ALPHA};
use crate::text::{rouge_n_multi, TokenSequence};

/// Images ranked by CLIPBERTScore against the reference summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceSelection {
    /// Top-`k` image indices, best first.
    pub ranked_indices: Vec<usize>,
    /// Scores of `ranked_indices`, non-increasing.
    pub scores: Vec<f64>,
    pub k: usize,
}

/// Scores every image against the reference summary and keeps the top `k`.
///
/// The BERT-S term is shared by all images, so the order is decided by each
/// image's own CLIP-S. Ties on the combined score fall back to CLIP-S (only
/// distinct when rounding merged them) and then to the lower index.
pub fn select_guidance_images(
    images: &EmbeddingMatrix,
    ref_summary_sentences: &EmbeddingMatrix,
    doc_tokens: &EmbeddingMatrix,
    ref_summary_tokens: &EmbeddingMatrix,
    alpha: f64,
    k: usize,
) -> Result<GuidanceSelection> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > images.rows() {
        return Err(Error::Config(format!("k = {k} exceeds {} images", images.rows())));
    }
    let bert = bert_s(doc_tokens, ref_summary_tokens)?;
    let mut scored = Vec::with_capacity(images.rows());
    for i in 0..images.rows() {
        let single = images.slice_rows(i..i + 1)?;
        let clip = clip_s(&single, ref_summary_sentences)?;
        scored.push((i, clipbertscore(clip, bert, alpha)?, clip));
    }
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(b.2.total_cmp(&a.2))
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ok(GuidanceSelection {
        ranked_indices: scored.iter().map(|s| s.0).collect(),
        scores: scored.iter().map(|s| s.1).collect(),
        k,
    })
}

/// 1 for selected images, 0 for the rest.
pub fn guidance_labels(selection: &GuidanceSelection, total_images: usize) -> Result<Vec<u8>> {
    if selection.ranked_indices.is_empty() {
        return Err(Error::Config("selection is empty".into()));
    }
    let mut labels = vec![0u8; total_images];
    for &i in &selection.ranked_indices {
        let slot = labels
            .get_mut(i)
            .ok_or_else(|| Error::Shape(format!("index {i} outside {total_images} images")))?;
        *slot = 1;
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternation {
    /// Even steps use CLIPBERTScore, odd steps ROUGE-N.
    ByStepParity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Multiplier on the CLIPBERTScore reward value.
    pub clipbertscore_weight: f64,
    pub rouge_n_order: usize,
    /// Weight of the RL loss in `a * L_rl + (1 - a) * L_xe`; consumed by the trainer.
    pub rl_mixing_alpha: f64,
    pub alternation: Alternation,
    /// Weight on CLIP-S inside the CLIPBERTScore reward.
    pub score_alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            clipbertscore_weight: 2.0,
            rouge_n_order: 2,
            rl_mixing_alpha: 0.998,
            alternation: Alternation::ByStepParity,
            score_alpha: DEFAULT_ALPHA,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clipbertscore_weight > 0.0 && self.clipbertscore_weight.is_finite()) {
            return Err(Error::Config(format!(
                "clipbertscore_weight {} must be positive",
                self.clipbertscore_weight
            )));
        }
        if !(0.0..=1.0).contains(&self.rl_mixing_alpha) {
            return Err(Error::Config(format!(
                "rl_mixing_alpha {} outside [0, 1]",
                self.rl_mixing_alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.score_alpha) {
            return Err(Error::Config(format!("score_alpha {} outside [0, 1]", self.score_alpha)));
        }
        if self.rouge_n_order == 0 {
            return Err(Error::Config("rouge_n_order must be at least 1".into()));
        }
        Ok(())
    }

    /// `(rl, xe)` loss weights.
    pub fn loss_weights(&self) -> (f64, f64) {
        (self.rl_mixing_alpha, 1.0 - self.rl_mixing_alpha)
    }

    pub fn reward_for_step(&self, step: u64) -> RewardKind {
        match self.alternation {
            Alternation::ByStepParity if step.is_multiple_of(2) => RewardKind::ClipBertScore,
            Alternation::ByStepParity => RewardKind::Rouge(self.rouge_n_order),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    ClipBertScore,
    Rouge(usize),
}

impl RewardKind {
    pub fn name(self) -> String {
        match self {
            RewardKind::ClipBertScore => "clipbertscore".to_string(),
            RewardKind::Rouge(n) => format!("rouge{n}"),
        }
    }
}

/// What a CLIPBERTScore reward is computed from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreInputs {
    Precomputed { clip_s: f64, bert_s: f64 },
    Embeddings {
        images: EmbeddingMatrix,
        sentences: EmbeddingMatrix,
        doc_tokens: EmbeddingMatrix,
        summary_tokens: EmbeddingMatrix,
    },
}

/// One decoded summary with whatever its rewards need.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateInputs {
    pub scores: Option<ScoreInputs>,
    pub tokens: Option<TokenSequence>,
    pub references: Vec<TokenSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScstAdvantage {
    pub advantage: f64,
    pub reward_name: String,
}

fn reward(c: &CandidateInputs, kind: RewardKind, config: &RewardConfig, which: &str) -> Result<f64> {
    match kind {
        RewardKind::ClipBertScore => {
            let (clip, bert) = match &c.scores {
                Some(ScoreInputs::Precomputed { clip_s, bert_s }) => (*clip_s, *bert_s),
                Some(ScoreInputs::Embeddings {
                    images,
                    sentences,
                    doc_tokens,
                    summary_tokens,
                }) => (clip_s(images, sentences)?, bert_s(doc_tokens, summary_tokens)?),
                None => {
                    return Err(Error::Data(format!(
                        "{which} summary has no scores or embeddings for the CLIPBERTScore reward"
                    )))
                }
            };
            Ok(config.clipbertscore_weight * clipbertscore(clip, bert, config.score_alpha)?)
        }
        RewardKind::Rouge(n) => {
            let tokens = c.tokens.as_ref().ok_or_else(|| {
                Error::Data(format!("{which} summary has no tokens for the ROUGE reward"))
            })?;
            if c.references.is_empty() {
                return Err(Error::Data(format!(
                    "{which} summary has no references for the ROUGE reward"
                )));
            }
            Ok(rouge_n_multi(tokens, &c.references, n).f1)
        }
    }
}

/// Self-critical advantage `r(sampled) - r(greedy)` for a training step.
pub fn scst_advantage(
    sampled: &CandidateInputs,
    greedy: &CandidateInputs,
    step: u64,
    config: &RewardConfig,
) -> Result<ScstAdvantage> {
    config.validate()?;
    let kind = config.reward_for_step(step);
    let rs = reward(sampled, kind, config, "sampled")?;
    let rg = reward(greedy, kind, config, "greedy")?;
    Ok(ScstAdvantage {
        advantage: rs - rg,
        reward_name: kind.name(),
    })
}
