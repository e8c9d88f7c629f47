//! Softmax focal loss with its analytic gradient.

/// Numerically stable `log(softmax(logits))`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy `-log p_target` and its gradient `p - onehot`.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let logp = log_softmax(logits);
    let grad = logp
        .iter()
        .enumerate()
        .map(|(j, &lp)| lp.exp() - if j == target { 1.0 } else { 0.0 })
        .collect();
    (-logp[target], grad)
}

/// `loss = -(1 - p_t)^γ · log p_t` and `∂loss/∂logits`.
///
/// With `g = γ (1-p_t)^(γ-1) p_t log p_t - (1-p_t)^γ`, the gradient is
/// `g · (δ_tj - p_j)`.
pub fn focal_loss(logits: &[f64], target: usize, gamma: f64) -> (f64, Vec<f64>) {
    assert!(target < logits.len(), "target {target} out of range");
    let logp = log_softmax(logits);
    let p: Vec<f64> = logp.iter().map(|lp| lp.exp()).collect();
    let log_pt = logp[target];
    let pt = p[target];
    // 1 - p_t summed from the other classes keeps precision when p_t ≈ 1
    let rest: f64 = p
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, &v)| v)
        .sum::<f64>()
        .min(1.0);
    let modulator = if gamma == 0.0 { 1.0 } else { rest.powf(gamma) };
    let loss = -modulator * log_pt;
    let slope = if gamma == 0.0 || rest == 0.0 {
        0.0
    } else {
        gamma * rest.powf(gamma - 1.0) * pt * log_pt
    };
    let g = slope - modulator;
    let grad = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| g * (if j == target { 1.0 } else { 0.0 } - pj))
        .collect();
    (loss.max(0.0), grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_binary_closed_form() {
        let (loss, _) = focal_loss(&[0.0, 0.0], 0, 2.0);
        assert!((loss - 0.25 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss - 0.17329).abs() < 1e-5);
    }

    #[test]
    fn gamma_zero_is_cross_entropy() {
        let logits = [1.5, -0.3, 2.2, 0.0];
        let (f, fg) = focal_loss(&logits, 2, 0.0);
        let (c, cg) = cross_entropy(&logits, 2);
        assert!((f - c).abs() < 1e-12);
        for (a, b) in fg.iter().zip(&cg) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_prediction_has_vanishing_loss() {
        let (loss, grad) = focal_loss(&[60.0, 0.0, -4.0], 0, 2.0);
        assert!(loss < 1e-30);
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
        assert!(focal_loss(&[800.0, -800.0], 0, 2.0).0.is_finite());
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let (loss, grad) = focal_loss(&[-700.0, 700.0], 0, 2.0);
        assert!(loss.is_finite() && loss > 0.0);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, grad) = focal_loss(&[1e3, 0.0], 0, 0.5);
        assert!(loss >= 0.0 && grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, g) = focal_loss(&[0.3, -1.0, 0.8], 1, 2.0);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[3.0, 1.0, -2.0, 1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
