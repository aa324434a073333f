//! Similarity kernels and the three core scores.
//!
//! Storage is `f32`; every dot product, norm and mean is accumulated in `f64`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight on CLIP-S in the combined score when nothing else is configured.
pub const DEFAULT_ALPHA: f64 = 0.25;

/// Maximum deviation from unit norm tolerated for rows of a normalized matrix.
pub const NORM_TOLERANCE: f64 = 1e-4;

/// Dense row-major `rows x dims` matrix of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dims: usize,
    data: Vec<f32>,
    l2_normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dims: usize, data: Vec<f32>, l2_normalized: bool) -> Result<Self> {
        if rows.checked_mul(dims) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "data length {} != rows {} x dims {}",
                data.len(),
                rows,
                dims
            )));
        }
        let m = Self {
            rows,
            dims,
            data,
            l2_normalized,
        };
        if l2_normalized {
            m.check_unit_rows(0)?;
        }
        Ok(m)
    }

    /// Builds an un-normalized matrix from explicit rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dims);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dims {
                return Err(Error::Shape(format!(
                    "row {i} has {} dims, expected {dims}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dims, data, false)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_l2_normalized(&self) -> bool {
        self.l2_normalized
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies out a contiguous block of rows.
    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.rows {
            return Err(Error::Range(format!(
                "rows {}..{} outside matrix with {} rows",
                range.start, range.end, self.rows
            )));
        }
        Ok(Self {
            rows: range.len(),
            dims: self.dims,
            data: self.data[range.start * self.dims..range.end * self.dims].to_vec(),
            l2_normalized: self.l2_normalized,
        })
    }

    /// Stacks matrices vertically. The result is normalized only if every part is.
    pub fn vstack(parts: &[&EmbeddingMatrix]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::EmptyInput("nothing to stack".into()));
        };
        let dims = first.dims;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.dims != dims {
                return Err(Error::Shape(format!("cannot stack dims {} onto {dims}", p.dims)));
            }
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Self {
            rows,
            dims,
            data,
            l2_normalized: parts.iter().all(|p| p.l2_normalized),
        })
    }

    /// Returns a copy with every row scaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, r) in self.iter_rows().enumerate() {
            let n = norm(r);
            if n == 0.0 {
                return Err(Error::DegenerateInput(format!("row {i} has zero norm")));
            }
            data.extend(r.iter().map(|&x| (x as f64 / n) as f32));
        }
        Ok(Self {
            rows: self.rows,
            dims: self.dims,
            data,
            l2_normalized: true,
        })
    }

    /// Verifies that every row has unit norm; `row_offset` only shifts reported indices.
    pub(crate) fn check_unit_rows(&self, row_offset: usize) -> Result<()> {
        for (i, r) in self.iter_rows().enumerate() {
            let n = norm(r);
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "row {} has norm {n:.6}, expected 1 within {NORM_TOLERANCE}",
                    i + row_offset
                )));
            }
        }
        Ok(())
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Cosine similarity of two nonzero vectors of equal length.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput("zero-norm vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Dense `m x n` matrix of cosine similarities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

fn row_norms(m: &EmbeddingMatrix, which: &str) -> Result<Vec<f64>> {
    m.iter_rows()
        .enumerate()
        .map(|(i, r)| {
            let n = norm(r);
            if n == 0.0 {
                Err(Error::DegenerateInput(format!("{which} row {i} has zero norm")))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// All cosine similarities between rows of `a` and rows of `b`.
pub fn pairwise_cossim(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    check_dims(a.dims(), b.dims())?;
    let na = row_norms(a, "left")?;
    let nb = row_norms(b, "right")?;
    let mut values = Vec::with_capacity(a.rows() * b.rows());
    for (i, ra) in a.iter_rows().enumerate() {
        for (j, rb) in b.iter_rows().enumerate() {
            values.push((dot(ra, rb) / (na[i] * nb[j])).clamp(-1.0, 1.0));
        }
    }
    Ok(SimilarityMatrix {
        rows: a.rows(),
        cols: b.rows(),
        values,
    })
}

/// Image-summary score: mean cosine over every (image, summary sentence) pair.
pub fn clip_s(images: &EmbeddingMatrix, sentences: &EmbeddingMatrix) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::EmptyInput("no image embeddings".into()));
    }
    if sentences.is_empty() {
        return Err(Error::EmptyInput("no summary sentence embeddings".into()));
    }
    let sims = pairwise_cossim(images, sentences)?;
    Ok(sims.values().iter().sum::<f64>() / sims.values().len() as f64)
}

/// Document-summary score: precision-style greedy matching. Each summary
/// token takes its best match among document tokens; the matches are averaged.
pub fn bert_s(doc_tokens: &EmbeddingMatrix, summary_tokens: &EmbeddingMatrix) -> Result<f64> {
    if doc_tokens.is_empty() {
        return Err(Error::EmptyInput("no document token embeddings".into()));
    }
    if summary_tokens.is_empty() {
        return Err(Error::EmptyInput("no summary token embeddings".into()));
    }
    let sims = pairwise_cossim(summary_tokens, doc_tokens)?;
    let total: f64 = (0..sims.rows())
        .map(|i| sims.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok(total / sims.rows() as f64)
}

/// Maps `baseline` to 0 and 1 to 1, linearly.
pub fn rescale(x: f64, baseline: f64) -> Result<f64> {
    if baseline.is_nan() || baseline >= 1.0 {
        return Err(Error::Config(format!("rescale baseline {baseline} must be < 1")));
    }
    Ok((x - baseline) / (1.0 - baseline))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// `alpha * clip + (1 - alpha) * bert`.
pub fn clipbertscore(clip: f64, bert: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    // The endpoints return their input untouched so alpha=0/1 are exact.
    Ok(if alpha == 0.0 {
        bert
    } else if alpha == 1.0 {
        clip
    } else {
        alpha * clip + (1.0 - alpha) * bert
    })
}

/// Rescale baseline: mean BERT-S over deliberately mispaired (document, summary)
/// examples. Summary `i` is matched with document `(i + shift) mod n` for a
/// seeded shift in `1..n`, so no example keeps its own document.
pub fn rescale_baseline(pairs: &[(EmbeddingMatrix, EmbeddingMatrix)], seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};

    let n = pairs.len();
    if n < 2 {
        return Err(Error::EmptyInput(
            "at least two (document, summary) pairs are needed to mispair".into(),
        ));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let shift = rng.gen_range(1..n);
    let mut total = 0.0;
    for (i, (_, summary)) in pairs.iter().enumerate() {
        let (doc, _) = &pairs[(i + shift) % n];
        total += bert_s(doc, summary)?;
    }
    Ok(total / n as f64)
}

/// Provenance of one encoder used to produce embeddings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderMeta {
    pub name: String,
    #[serde(default)]
    pub layer: Option<u32>,
}

/// Per-example scores with the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub example_id: String,
    #[serde(default)]
    pub system_id: String,
    pub clip_s: f64,
    /// Raw BERT-S; the rescaled value (if any) only enters `combined`.
    pub bert_s: f64,
    pub combined: f64,
    pub alpha: f64,
    pub rescaled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale_baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_encoder: Option<EncoderMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_encoder: Option<EncoderMeta>,
}

impl ScoreReport {
    pub fn new(
        example_id: impl Into<String>,
        system_id: impl Into<String>,
        clip_s: f64,
        bert_s: f64,
        alpha: f64,
        rescale_baseline: Option<f64>,
    ) -> Result<Self> {
        let bert_used = match rescale_baseline {
            Some(b) => rescale(bert_s, b)?,
            None => bert_s,
        };
        Ok(Self {
            example_id: example_id.into(),
            system_id: system_id.into(),
            clip_s,
            bert_s,
            combined: clipbertscore(clip_s, bert_used, alpha)?,
            alpha,
            rescaled: rescale_baseline.is_some(),
            rescale_baseline,
            image_encoder: None,
            token_encoder: None,
        })
    }

    /// Scores one example from its four embedding blocks.
    #[allow(clippy::too_many_arguments)]
    pub fn from_embeddings(
        example_id: impl Into<String>,
        system_id: impl Into<String>,
        images: &EmbeddingMatrix,
        summary_sentences: &EmbeddingMatrix,
        doc_tokens: &EmbeddingMatrix,
        summary_tokens: &EmbeddingMatrix,
        alpha: f64,
        rescale_baseline: Option<f64>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let clip = clip_s(images, summary_sentences)?;
        let bert = bert_s(doc_tokens, summary_tokens)?;
        Self::new(example_id, system_id, clip, bert, alpha, rescale_baseline)
    }

    /// BERT-S as it entered the combination.
    pub fn bert_used(&self) -> f64 {
        match self.rescale_baseline {
            Some(b) => (self.bert_s - b) / (1.0 - b),
            None => self.bert_s,
        }
    }
}
