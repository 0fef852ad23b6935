//! Monte Carlo mutual information between paired features and the mapping
//! from normalized dependence to coupling strength.

use super::gmm::{floored_ln, Gmm1, Gmm2};
use super::PotentialError;
use crate::rng::rng_from_seed;

/// Clamp applied to `p_ij` before taking logarithms.
pub const EDGE_PROBABILITY_CAP: f64 = 1.0 - 1e-6;

/// Joint Monte Carlo estimates from a single set of draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    /// `(1/N) Σ ln [p(d_i, d_j) / (p(d_i) p(d_j))]`.
    pub mutual_information: f64,
    /// `-(1/N) Σ ln p(d_i)`.
    pub entropy_i: f64,
    /// `-(1/N) Σ ln p(d_j)`.
    pub entropy_j: f64,
}

/// Draws `n` points from `joint` and averages the log density ratio and the
/// two marginal log densities over them.
pub fn mi_and_entropies(joint: &Gmm2, marg_i: &Gmm1, marg_j: &Gmm1, n: usize, seed: u64) -> MiEstimate {
    assert!(n >= 1, "need at least one draw");
    let mut rng = rng_from_seed(seed);
    let (mut mi, mut hi, mut hj) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let x = joint.sample(&mut rng);
        let lj = floored_ln(joint.density(&x));
        let li = floored_ln(marg_i.density(&[x[0]]));
        let lk = floored_ln(marg_j.density(&[x[1]]));
        mi += lj - li - lk;
        hi -= li;
        hj -= lk;
    }
    let n = n as f64;
    MiEstimate {
        mutual_information: mi / n,
        entropy_i: hi / n,
        entropy_j: hj / n,
    }
}

pub fn mutual_information_mc(joint: &Gmm2, marg_i: &Gmm1, marg_j: &Gmm1, n: usize, seed: u64) -> f64 {
    mi_and_entropies(joint, marg_i, marg_j, n, seed).mutual_information
}

/// `I / sqrt(h_i h_j)` clamped to `[0, 1]`.
pub fn normalized_mi(mi: f64, entropy_i: f64, entropy_j: f64) -> Result<f64, PotentialError> {
    if !(entropy_i > 0.0 && entropy_j > 0.0) {
        return Err(PotentialError::NonPositiveEntropy { entropy_i, entropy_j });
    }
    Ok((mi / (entropy_i * entropy_j).sqrt()).clamp(0.0, 1.0))
}

/// Linear interpolation from independence (`0.5`) to full dependence (`1`).
pub fn edge_probability(nmi: f64) -> f64 {
    0.5 * (1.0 + nmi)
}

/// `½ (ln(1 - p) - ln p)` with `p` capped at [`EDGE_PROBABILITY_CAP`].
pub fn edge_potential(p: f64) -> f64 {
    let p = p.min(EDGE_PROBABILITY_CAP);
    0.5 * ((1.0 - p).ln() - p.ln())
}
