use super::{evaluate_scores, Model};
use crate::domain::TrialRecord;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Platt scaling: `p = 1 / (1 + exp(a * score + b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    /// Equivalent to the plain sigmoid.
    pub const IDENTITY: Calibration = Calibration { a: -1.0, b: 0.0 };

    pub fn apply(&self, score: f64) -> f64 {
        let f = self.a * score + self.b;
        if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

/// Fits `(a, b)` by Newton's method on the cross-entropy against Platt's
/// smoothed targets. Fails unless both outcomes are present.
pub fn platt_fit_scores(scores: &[f64], labels: &[bool]) -> Result<Calibration> {
    if scores.len() != labels.len() {
        return Err(Error::Calibration("scores and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::Calibration("validation set contains a single outcome class".into()));
    }
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    let objective = |c: Calibration| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| {
                let f = c.a * s + c.b;
                // -[t ln p + (1 - t) ln(1 - p)] with p = sigmoid(-f), stably
                let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
                t * softplus(f) + (1.0 - t) * softplus(-f)
            })
            .sum()
    };

    let mut c = Calibration {
        a: 0.0,
        b: ((neg + 1.0) / (pos + 1.0)).ln(),
    };
    let mut value = objective(c);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&s, &t) in scores.iter().zip(&targets) {
            let p = c.apply(s);
            let d = t - p;
            let w = p * (1.0 - p);
            ga += d * s;
            gb += d;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let next = Calibration {
                a: c.a + step * da,
                b: c.b + step * db,
            };
            let v = objective(next);
            if v < value + 1e-4 * step * (ga * da + gb * db) {
                c = next;
                value = v;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    if !(c.a.is_finite() && c.b.is_finite()) {
        return Err(Error::Calibration("fit diverged".into()));
    }
    Ok(c)
}

/// Platt-scales `model` on held-out records.
pub fn platt_fit(model: &Model, validation: &[&TrialRecord]) -> Result<Calibration> {
    let scores = evaluate_scores(model, validation)?;
    let labels: Vec<bool> = validation.iter().map(|r| r.outcome.is_success()).collect();
    platt_fit_scores(&scores, &labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

/// Equal-width probability bins; the last bin is closed on the right.
pub fn reliability_bins(probs: &[f64], labels: &[bool], n_bins: usize) -> Vec<ReliabilityBin> {
    let n_bins = n_bins.max(1);
    let mut sums = vec![(0usize, 0.0, 0.0); n_bins];
    for (&p, &l) in probs.iter().zip(labels) {
        let i = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
        sums[i].0 += 1;
        sums[i].1 += p;
        sums[i].2 += if l { 1.0 } else { 0.0 };
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (n, conf, hits))| ReliabilityBin {
            lo: i as f64 / n_bins as f64,
            hi: (i + 1) as f64 / n_bins as f64,
            count: n,
            mean_confidence: if n > 0 { conf / n as f64 } else { 0.0 },
            accuracy: if n > 0 { hits / n as f64 } else { 0.0 },
        })
        .collect()
}

/// Count-weighted mean gap between confidence and accuracy over 10 bins.
pub fn expected_calibration_error(probs: &[f64], labels: &[bool]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    reliability_bins(probs, labels, 10)
        .iter()
        .map(|b| b.count as f64 * (b.accuracy - b.mean_confidence).abs())
        .sum::<f64>()
        / probs.len() as f64
}
