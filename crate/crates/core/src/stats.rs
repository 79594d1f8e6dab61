//! Binary-classification metrics and the paired t-test.
//!
//! AUROC uses the rank-sum formulation with midranks for ties, which equals
//! exhaustive positive/negative pair counting. The t-distribution CDF is
//! computed from the regularized incomplete beta function so no statistical
//! tables are shipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need both classes present")]
    SingleClass,
    #[error("need at least two paired samples, found {0}")]
    TooFewSamples(usize),
    #[error("all paired differences are zero; p-value undefined")]
    ZeroVariance,
}

fn check_paired(scores: &[f64], labels: &[u8]) -> Result<(), StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(StatsError::SingleClass);
    }
    Ok(())
}

/// Probability that a random positive outranks a random negative, with ties
/// counted half. Midrank formulation.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, StatsError> {
    check_paired(scores, labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Midranks over tie groups, 1-based.
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }

    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = n as f64 - n_pos;
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(r, _)| r)
        .sum();
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// F1 of the positive class at a score threshold (predicted positive when
/// score >= threshold). Zero when there are no positive predictions or no
/// true positives.
pub fn f1_binary(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, StatsError> {
    check_paired(scores, labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted = score >= threshold;
        match (predicted, label) {
            (true, 1) => tp += 1,
            (true, _) => fp += 1,
            (false, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Significance stars at the 0.05 / 0.01 / 0.001 thresholds.
pub fn stars_for_p(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub stars: String,
}

/// Two-sided paired t-test on per-fold differences (treatment - baseline).
///
/// A constant nonzero difference has zero sample variance; the limit is
/// reported as t = +/-inf with p = 0. Identical inputs are a `ZeroVariance`
/// error (p undefined, no stars).
pub fn paired_t_test(baseline: &[f64], treatment: &[f64]) -> Result<TTestResult, StatsError> {
    if baseline.len() != treatment.len() {
        return Err(StatsError::LengthMismatch {
            left: baseline.len(),
            right: treatment.len(),
        });
    }
    let n = baseline.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let diffs: Vec<f64> = treatment.iter().zip(baseline).map(|(t, b)| t - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();

    if sd == 0.0 {
        if mean == 0.0 {
            return Err(StatsError::ZeroVariance);
        }
        let t = if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(TTestResult {
            t_statistic: t,
            p_value: 0.0,
            stars: "***".to_string(),
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let p = 2.0 * (1.0 - student_t_cdf(t.abs(), df));
    let p = p.clamp(0.0, 1.0);
    Ok(TTestResult {
        t_statistic: t,
        p_value: p,
        stars: stars_for_p(p).to_string(),
    })
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7.
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection for small arguments.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) via the continued-fraction
/// expansion, using the symmetry transform for convergence.
fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
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
        1.0 - regularized_incomplete_beta(b, a, 1.0 - x)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
