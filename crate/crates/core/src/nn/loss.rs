use super::layers::sigmoid;

/// Probabilities are clipped into `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

/// Binary cross-entropy of probability `p` against label `o` in `{0, 1}`.
pub fn cross_entropy(p: f64, o: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(o * p.ln() + (1.0 - o) * (1.0 - p).ln())
}

/// Mean cross-entropy of `sigmoid(logits)` against `labels`, and its
/// gradient with respect to each logit.
pub fn logit_cross_entropy(logits: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&z, &o)| {
            let p = sigmoid(z);
            loss += cross_entropy(p, o);
            (p - o) / n
        })
        .collect();
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((cross_entropy(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(0.9, 0.0) - 2.302_585_092_994_046).abs() < 1e-12);
        assert!(cross_entropy(1.0, 1.0) < 1e-6);
        assert!(cross_entropy(0.0, 1.0).is_finite());
    }

    #[test]
    fn logit_gradient_matches_difference() {
        let (l0, g) = logit_cross_entropy(&[0.3, -1.2], &[1.0, 0.0]);
        let h = 1e-6;
        let (l1, _) = logit_cross_entropy(&[0.3 + h, -1.2], &[1.0, 0.0]);
        assert!(((l1 - l0) / h - g[0]).abs() < 1e-6);
    }
}
