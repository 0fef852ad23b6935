/// Predicted probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`
/// before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Normalizes a pair of positive readout values `r` into `p = r / (r₀ + r₁)`
/// and scores it against `label` with `-Σ_s label_s ln p_s`.
///
/// Returns the normalized prediction, the loss and `∂loss/∂r`. A clamped
/// probability contributes no gradient.
pub fn normalized_cross_entropy(r: [f64; 2], label: [f64; 2]) -> ([f64; 2], f64, [f64; 2]) {
    let total = r[0] + r[1];
    let p = [r[0] / total, r[1] / total];
    let mut loss = 0.0;
    let mut dp = [0.0; 2];
    for s in 0..2 {
        let clamped = p[s].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= label[s] * clamped.ln();
        if clamped == p[s] {
            dp[s] = -label[s] / p[s];
        }
    }
    // ∂p_s/∂r_k = (δ_sk - p_s) / total
    let mut dr = [0.0; 2];
    for (k, d) in dr.iter_mut().enumerate() {
        *d = (0..2)
            .map(|s| dp[s] * (f64::from(u8::from(s == k)) - p[s]))
            .sum::<f64>()
            / total;
    }
    (p, loss, dr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;

    #[test]
    fn examples() {
        let (p, loss, _) = normalized_cross_entropy([0.3, 0.3], [0.5, 0.5]);
        assert_eq!(p, [0.5, 0.5]);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        let (_, loss, _) = normalized_cross_entropy([0.9, 0.0], [1.0, 0.0]);
        assert!(loss.abs() <= 1e-11);
        let (_, loss, _) = normalized_cross_entropy([0.2, 0.2], [1.0, 0.0]);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for label in [[0.3, 0.7], [1.0, 0.0], [0.5, 0.5]] {
            let f = |r: &[f64]| {
                let (_, loss, dr) = normalized_cross_entropy([r[0], r[1]], label);
                (loss, dr.to_vec())
            };
            assert!(finite_difference_check(f, &[0.4, 0.85], 1e-5) <= 1e-6);
        }
    }
}
