//! Learned combinations of CLIP-S and BERT-S fitted against human judgments.
//!
//! Three methods are supported: a grid search over the convex weight α,
//! logistic regression, and a one-hidden-layer tanh MLP. Both trained models
//! use full-batch gradient descent; each iteration starts from the configured
//! step and halves it until the loss does not increase, so the loss sequence
//! is non-increasing and runs are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{clipbertscore, rescale, DEFAULT_ALPHA};
use crate::stats;

pub const FORMAT_VERSION: u32 = 1;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerMethod {
    Alpha,
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinerConfig {
    pub method: CombinerMethod,
    pub alpha: f64,
    pub grid_step: f64,
    pub hidden_size: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Gradient-norm threshold at which descent stops early.
    pub tolerance: f64,
}

impl Default for CombinerConfig {
    fn default() -> Self {
        Self {
            method: CombinerMethod::Alpha,
            alpha: DEFAULT_ALPHA,
            grid_step: 0.05,
            hidden_size: 8,
            max_iters: 20_000,
            learning_rate: 1.0,
            seed: 0,
            tolerance: 1e-10,
        }
    }
}

impl CombinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        grid_points(self.grid_step)?;
        if self.method == CombinerMethod::Mlp && self.hidden_size == 0 {
            return Err(Error::Config("hidden_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Number of grid intervals for `step`; the step must split `[0, 1]` evenly.
pub fn grid_points(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid_step {step} must be in (0, 1]")));
    }
    let intervals = (1.0 / step).round();
    if (intervals * step - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "grid_step {step} does not divide 1 into whole steps"
        )));
    }
    Ok(intervals as usize)
}

fn check_targets_vary(targets: &[f64]) -> Result<()> {
    let first = targets[0];
    if targets.iter().all(|&t| t == first) {
        return Err(Error::DegenerateTarget("all targets are equal".into()));
    }
    Ok(())
}

/// Searches α over `0, step, 2*step, ..., 1` for the highest Pearson
/// correlation between combined scores and targets. Ties go to the smaller α;
/// grid points whose combined scores are constant are skipped.
pub fn alpha_grid_search(pairs: &[(f64, f64)], targets: &[f64], grid_step: f64) -> Result<(f64, f64)> {
    if pairs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} score pairs vs {} targets",
            pairs.len(),
            targets.len()
        )));
    }
    if pairs.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 examples, got {}",
            pairs.len()
        )));
    }
    check_targets_vary(targets)?;
    let intervals = grid_points(grid_step)?;
    let mut best: Option<(f64, f64)> = None;
    let mut combined = vec![0.0; pairs.len()];
    for k in 0..=intervals {
        let alpha = k as f64 / intervals as f64;
        for (c, &(clip, bert)) in combined.iter_mut().zip(pairs) {
            *c = clipbertscore(clip, bert, alpha)?;
        }
        let r = match stats::pearson(&combined, targets) {
            Ok(c) => c.rho,
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((alpha, r));
        }
    }
    best.ok_or_else(|| Error::DegenerateInput("combined scores constant for every alpha".into()))
}

/// A trained combiner. `parameters` layout depends on `method`:
/// `[alpha]`, `[w_clip, w_bert, bias]`, or for the MLP
/// `[W1 (hidden x 2, row-major), b1 (hidden), w2 (hidden), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCombiner {
    pub format_version: u32,
    pub method: CombinerMethod,
    pub parameters: Vec<f64>,
    pub dev_pearson: f64,
    pub config: CombinerConfig,
    /// When set, BERT-S is rescaled with this baseline before prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bert_baseline: Option<f64>,
}

impl FittedCombiner {
    /// A fixed-α combiner that needs no training.
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        let config = CombinerConfig {
            alpha,
            ..CombinerConfig::default()
        };
        config.validate()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            method: CombinerMethod::Alpha,
            parameters: vec![alpha],
            // not evaluated on any data
            dev_pearson: 0.0,
            config,
            bert_baseline: None,
        })
    }

    pub fn with_bert_baseline(mut self, baseline: f64) -> Result<Self> {
        rescale(0.0, baseline)?;
        self.bert_baseline = Some(baseline);
        Ok(self)
    }

    fn expected_parameters(&self) -> usize {
        match self.method {
            CombinerMethod::Alpha => 1,
            CombinerMethod::Logistic => 3,
            CombinerMethod::Mlp => 4 * self.config.hidden_size + 1,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported combiner format_version {}",
                c.format_version
            )));
        }
        if c.parameters.len() != c.expected_parameters() {
            return Err(Error::UnfittedCombiner(format!(
                "{:?} combiner has {} parameters, expected {}",
                c.method,
                c.parameters.len(),
                c.expected_parameters()
            )));
        }
        Ok(c)
    }
}

/// Scores one example with a fitted combiner.
pub fn predict(combiner: &FittedCombiner, clip_s: f64, bert_s: f64) -> Result<f64> {
    let expected = combiner.expected_parameters();
    if combiner.parameters.len() != expected {
        return Err(Error::UnfittedCombiner(format!(
            "have {} parameters, expected {expected}",
            combiner.parameters.len()
        )));
    }
    let bert = match combiner.bert_baseline {
        Some(b) => rescale(bert_s, b)?,
        None => bert_s,
    };
    let p = &combiner.parameters;
    Ok(match combiner.method {
        CombinerMethod::Alpha => clipbertscore(clip_s, bert, p[0])?,
        CombinerMethod::Logistic => sigmoid(p[0] * clip_s + p[1] * bert + p[2]),
        CombinerMethod::Mlp => Mlp::view(p, combiner.config.hidden_size).forward([clip_s, bert]).0,
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log loss of `sigmoid(w . x + b)` and its gradient.
/// `params = [w_clip, w_bert, bias]`; targets are probabilities in `[0, 1]`.
pub fn logistic_loss_and_grad(params: &[f64], features: &[[f64; 2]], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; 3];
    for (x, &y) in features.iter().zip(targets) {
        let z = params[0] * x[0] + params[1] * x[1] + params[2];
        loss += softplus(z) - y * z;
        let d = sigmoid(z) - y;
        grad[0] += d * x[0];
        grad[1] += d * x[1];
        grad[2] += d;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

struct Mlp<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: f64,
}

impl<'a> Mlp<'a> {
    fn view(p: &'a [f64], hidden: usize) -> Self {
        Self {
            w1: &p[..2 * hidden],
            b1: &p[2 * hidden..3 * hidden],
            w2: &p[3 * hidden..4 * hidden],
            b2: p[4 * hidden],
        }
    }

    /// Output and hidden activations.
    fn forward(&self, x: [f64; 2]) -> (f64, Vec<f64>) {
        let h: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(j, b)| (self.w1[2 * j] * x[0] + self.w1[2 * j + 1] * x[1] + b).tanh())
            .collect();
        let out = self.b2 + h.iter().zip(self.w2).map(|(a, w)| a * w).sum::<f64>();
        (out, h)
    }
}

/// Mean squared error of the MLP and its gradient with respect to the flat
/// parameter vector.
pub fn mlp_loss_and_grad(params: &[f64], hidden: usize, features: &[[f64; 2]], targets: &[f64]) -> (f64, Vec<f64>) {
    let net = Mlp::view(params, hidden);
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (x, &y) in features.iter().zip(targets) {
        let (out, h) = net.forward(*x);
        let err = out - y;
        loss += err * err;
        let d = 2.0 * err / n;
        grad[4 * hidden] += d;
        for j in 0..hidden {
            grad[3 * hidden + j] += d * h[j];
            let dh = d * net.w2[j] * (1.0 - h[j] * h[j]);
            grad[2 * j] += dh * x[0];
            grad[2 * j + 1] += dh * x[1];
            grad[2 * hidden + j] += dh;
        }
    }
    (loss / n, grad)
}

/// Outcome of a descent run: final parameters and the loss after every
/// accepted step (the first entry is the initial loss).
#[derive(Debug, Clone)]
pub struct Descent {
    pub params: Vec<f64>,
    pub losses: Vec<f64>,
}

fn descend<F>(mut params: Vec<f64>, config: &CombinerConfig, f: F) -> Result<Descent>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (mut loss, mut grad) = f(&params);
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("initial loss is {loss}")));
    }
    let mut losses = vec![loss];
    for _ in 0..config.max_iters {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            return Err(Error::Divergence(format!("gradient norm is {gnorm}")));
        }
        if gnorm < config.tolerance {
            break;
        }
        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (l, g) = f(&cand);
            if l.is_finite() && l <= loss {
                accepted = Some((cand, l, g));
                break;
            }
            step *= 0.5;
        }
        let Some((p, l, g)) = accepted else {
            // no descent direction left at machine precision
            break;
        };
        let stalled = l == loss;
        params = p;
        loss = l;
        grad = g;
        losses.push(loss);
        if stalled {
            break;
        }
    }
    Ok(Descent { params, losses })
}

fn check_features(features: &[[f64; 2]], targets: &[f64]) -> Result<()> {
    if features.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} feature rows vs {} targets",
            features.len(),
            targets.len()
        )));
    }
    if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite feature or target".into()));
    }
    Ok(())
}

fn fit_pearson(predictions: &[f64], targets: &[f64]) -> f64 {
    // A constant predictor carries no correlation.
    stats::pearson(predictions, targets).map(|c| c.rho).unwrap_or(0.0)
}

/// Logistic regression on `(clip, bert)` features, returning the loss trace.
pub fn fit_logistic_traced(
    features: &[[f64; 2]],
    labels: &[f64],
    config: &CombinerConfig,
) -> Result<(FittedCombiner, Vec<f64>)> {
    config.validate()?;
    check_features(features, labels)?;
    if features.is_empty() {
        return Err(Error::EmptyInput("no training examples".into()));
    }
    if labels.iter().any(|&y| !(0.0..=1.0).contains(&y)) {
        return Err(Error::Data("logistic labels must lie in [0, 1]".into()));
    }
    check_targets_vary(labels)?;
    let run = descend(vec![0.0; 3], config, |p| logistic_loss_and_grad(p, features, labels))?;
    let preds: Vec<f64> = features
        .iter()
        .map(|x| sigmoid(run.params[0] * x[0] + run.params[1] * x[1] + run.params[2]))
        .collect();
    let fitted = FittedCombiner {
        format_version: FORMAT_VERSION,
        method: CombinerMethod::Logistic,
        dev_pearson: fit_pearson(&preds, labels),
        parameters: run.params,
        config: CombinerConfig {
            method: CombinerMethod::Logistic,
            ..*config
        },
        bert_baseline: None,
    };
    Ok((fitted, run.losses))
}

pub fn fit_logistic(features: &[[f64; 2]], labels: &[f64], config: &CombinerConfig) -> Result<FittedCombiner> {
    fit_logistic_traced(features, labels, config).map(|(c, _)| c)
}

/// Seeded initial MLP parameters: uniform weights scaled by fan-in, zero biases.
pub fn mlp_init(hidden: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; 4 * hidden + 1];
    let in_scale = 1.0 / 2f64.sqrt();
    for w in &mut p[..2 * hidden] {
        *w = rng.gen_range(-in_scale..in_scale);
    }
    let out_scale = 1.0 / (hidden as f64).sqrt();
    for w in &mut p[3 * hidden..4 * hidden] {
        *w = rng.gen_range(-out_scale..out_scale);
    }
    p
}

/// One-hidden-layer tanh MLP regressing the targets with squared error.
pub fn fit_mlp(features: &[[f64; 2]], targets: &[f64], config: &CombinerConfig) -> Result<FittedCombiner> {
    let mlp_config = CombinerConfig {
        method: CombinerMethod::Mlp,
        ..*config
    };
    mlp_config.validate()?;
    check_features(features, targets)?;
    let hidden = config.hidden_size;
    if features.len() < hidden + 2 {
        return Err(Error::DegenerateInput(format!(
            "MLP with {hidden} hidden units needs at least {} examples, got {}",
            hidden + 2,
            features.len()
        )));
    }
    let run = descend(mlp_init(hidden, config.seed), &mlp_config, |p| {
        mlp_loss_and_grad(p, hidden, features, targets)
    })?;
    let net = Mlp::view(&run.params, hidden);
    let preds: Vec<f64> = features.iter().map(|x| net.forward(*x).0).collect();
    Ok(FittedCombiner {
        format_version: FORMAT_VERSION,
        method: CombinerMethod::Mlp,
        dev_pearson: fit_pearson(&preds, targets),
        parameters: run.params,
        config: mlp_config,
        bert_baseline: None,
    })
}

/// Fits whichever method `config.method` names.
pub fn fit(features: &[[f64; 2]], targets: &[f64], config: &CombinerConfig) -> Result<FittedCombiner> {
    match config.method {
        CombinerMethod::Alpha => {
            config.validate()?;
            let pairs: Vec<(f64, f64)> = features.iter().map(|x| (x[0], x[1])).collect();
            let (alpha, r) = alpha_grid_search(&pairs, targets, config.grid_step)?;
            Ok(FittedCombiner {
                format_version: FORMAT_VERSION,
                method: CombinerMethod::Alpha,
                parameters: vec![alpha],
                dev_pearson: r,
                config: CombinerConfig { alpha, ..*config },
                bert_baseline: None,
            })
        }
        CombinerMethod::Logistic => fit_logistic(features, targets, config),
        CombinerMethod::Mlp => fit_mlp(features, targets, config),
    }
}
