//! Correlation, agreement and significance statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A correlation coefficient with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
}

/// Pearson and Spearman correlation of one metric against one judgment column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub pearson_p: f64,
    pub spearman: f64,
    pub spearman_p: f64,
    pub n: usize,
}

impl CorrelationReport {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self> {
        let p = pearson(x, y)?;
        let s = spearman(x, y)?;
        Ok(Self {
            pearson: p.rho,
            pearson_p: p.p_value,
            spearman: s.rho,
            spearman_p: s.p_value,
            n: x.len(),
        })
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "correlation needs at least 3 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn pearson_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value for a correlation `r` over `n` points, from the
/// t-transform `t = r * sqrt((n-2)/(1-r^2))` with `n-2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    let t2 = r2 * df / (1.0 - r2);
    student_t_two_sided(t2.sqrt(), df)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Sample Pearson correlation with its t-test p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    let rho = pearson_coefficient(x, y)?;
    Ok(Correlation {
        rho,
        p_value: correlation_p_value(rho, x.len()),
    })
}

/// Pearson correlation of average ranks, with the same t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// 1-based fractional ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms; ~1e-15 relative).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
///
/// Evaluated with the modified Lentz continued fraction on whichever of
/// `I_x(a,b)` and `1 - I_{1-x}(b,a)` converges fastest (the split point is
/// `x < (a+1)/(a+b+2)`); iteration stops once a step changes the fraction by
/// less than 1e-15 relative, which keeps the result within 1e-10 absolute.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 10_000;

    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Fleiss' kappa from an `items x categories` table of rater counts.
pub fn fleiss_kappa<R: AsRef<[u32]>>(counts: &[R]) -> Result<f64> {
    let Some(first) = counts.first() else {
        return Err(Error::EmptyInput("no items".into()));
    };
    let k = first.as_ref().len();
    if k == 0 {
        return Err(Error::Shape("no categories".into()));
    }
    let raters: u32 = first.as_ref().iter().sum();
    if raters < 2 {
        return Err(Error::Shape(format!("need at least 2 raters per item, got {raters}")));
    }
    let mut column_totals = vec![0u64; k];
    let mut agreement_sum = 0.0;
    for (i, row) in counts.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != k {
            return Err(Error::Shape(format!("item {i} has {} categories, expected {k}", row.len())));
        }
        let total: u32 = row.iter().sum();
        if total != raters {
            return Err(Error::Shape(format!(
                "item {i} has {total} ratings, expected {raters}"
            )));
        }
        let sq: u64 = row.iter().map(|&c| c as u64 * c as u64).sum();
        let n = raters as f64;
        agreement_sum += (sq as f64 - n) / (n * (n - 1.0));
        for (t, &c) in column_totals.iter_mut().zip(row) {
            *t += c as u64;
        }
    }
    let items = counts.len() as f64;
    let p_bar = agreement_sum / items;
    let grand = items * raters as f64;
    let p_e: f64 = column_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / grand;
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::UndefinedKappa);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Mean fraction of raters agreeing with each item's majority label.
pub fn percent_majority<R: AsRef<[u8]>>(labels: &[R]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no items".into()));
    }
    let mut total = 0.0;
    for (i, row) in labels.iter().enumerate() {
        let row = row.as_ref();
        if row.len() % 2 == 0 {
            return Err(Error::Config(format!(
                "item {i} has {} raters; majority needs an odd count",
                row.len()
            )));
        }
        let mut ones = 0usize;
        for &l in row {
            match l {
                0 => {}
                1 => ones += 1,
                other => return Err(Error::Data(format!("item {i}: label {other} is not binary"))),
            }
        }
        let majority = ones.max(row.len() - ones);
        total += majority as f64 / row.len() as f64;
    }
    Ok(total / labels.len() as f64)
}

/// Agreement summary over binary labels (`items x raters`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub percent_majority: f64,
    pub n_items: usize,
    pub n_raters: usize,
}

impl AgreementReport {
    pub fn from_binary_labels<R: AsRef<[u8]>>(labels: &[R]) -> Result<Self> {
        let percent = percent_majority(labels)?;
        let counts: Vec<[u32; 2]> = labels
            .iter()
            .map(|row| {
                let ones = row.as_ref().iter().filter(|&&l| l == 1).count() as u32;
                [row.as_ref().len() as u32 - ones, ones]
            })
            .collect();
        Ok(Self {
            kappa: fleiss_kappa(&counts)?,
            percent_majority: percent,
            n_items: labels.len(),
            n_raters: labels[0].as_ref().len(),
        })
    }
}

/// Per-resample RNG: ChaCha8 keyed by `seed`, stream `resample`.
pub fn resample_rng(seed: u64, resample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(resample);
    rng
}

/// One-sided paired bootstrap: the fraction of resamples in which system `b`
/// fails to beat system `a` (`mean(b) - mean(a) <= 0`). Small values mean `b`
/// is reliably better.
///
/// Pairs are first put into a canonical order (sorted by `(a, b)`), so the
/// p-value depends only on the multiset of pairs and not on item order.
/// Each resample draws `n` indices with replacement from its own RNG stream
/// (see [`resample_rng`]), so resamples are evaluated in parallel.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateInput("bootstrap needs at least 2 items".into()));
    }
    if resamples == 0 {
        return Err(Error::Config("resamples must be positive".into()));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let diffs: Vec<f64> = pairs.iter().map(|(x, y)| y - x).collect();
    let n = diffs.len();
    let failures = (0..resamples as u64)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = resample_rng(seed, r);
            let total: f64 = (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum();
            total <= 0.0
        })
        .count();
    Ok(failures as f64 / resamples as f64)
}
