//! Gaussian mixtures fitted by expectation-maximization, with model order
//! chosen by the Bayesian information criterion.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{PotentialError, DENSITY_FLOOR};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// EM stops once the mean log-likelihood improves by less than this.
pub const EM_TOLERANCE: f64 = 1e-7;
pub const EM_MAX_ITERATIONS: usize = 500;
/// Smallest admissible component variance.
pub const VARIANCE_FLOOR: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub type Matrix<const D: usize> = [[f64; D]; D];

/// Lower Cholesky factor of a symmetric matrix, or `None` if it is not
/// positive definite.
pub fn cholesky<const D: usize>(a: &Matrix<D>) -> Option<Matrix<D>> {
    let mut l = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Mixture of `K` Gaussians over `D`-dimensional points.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm<const D: usize> {
    weights: Vec<f64>,
    means: Vec<[f64; D]>,
    covariances: Vec<Matrix<D>>,
    chol: Vec<Matrix<D>>,
    // ln π_k - ½ (D ln 2π + ln |Σ_k|)
    log_norm: Vec<f64>,
}

pub type Gmm1 = Gmm<1>;
pub type Gmm2 = Gmm<2>;

impl<const D: usize> Gmm<D> {
    pub fn new(weights: Vec<f64>, means: Vec<[f64; D]>, covariances: Vec<Matrix<D>>) -> Result<Self, PotentialError> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(PotentialError::ShapeMismatch(format!(
                "{} weights, {} means, {} covariances",
                k,
                means.len(),
                covariances.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(PotentialError::ShapeMismatch(format!("weights must be nonnegative and sum to 1, got {total}")));
        }
        if means.iter().flatten().any(|x| !x.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        let mut chol = Vec::with_capacity(k);
        let mut log_norm = Vec::with_capacity(k);
        for (c, (cov, w)) in covariances.iter().zip(&weights).enumerate() {
            let sym = (0..D).all(|i| (0..i).all(|j| (cov[i][j] - cov[j][i]).abs() <= 1e-12 * (1.0 + cov[i][j].abs())));
            let l = cholesky(cov)
                .filter(|_| sym)
                .ok_or(PotentialError::DegenerateComponent { component: c })?;
            let log_det: f64 = 2.0 * (0..D).map(|i| l[i][i].ln()).sum::<f64>();
            log_norm.push(w.ln() - 0.5 * (D as f64 * LN_2PI + log_det));
            chol.push(l);
        }
        Ok(Self {
            weights,
            means,
            covariances,
            chol,
            log_norm,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[[f64; D]] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix<D>] {
        &self.covariances
    }

    // ln π_k + ln N(x | μ_k, Σ_k)
    fn component_log_density(&self, c: usize, x: &[f64; D]) -> f64 {
        let l = &self.chol[c];
        let mu = &self.means[c];
        let mut z = [0.0; D];
        let mut q = 0.0;
        for i in 0..D {
            let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
            z[i] = (x[i] - mu[i] - s) / l[i][i];
            q += z[i] * z[i];
        }
        self.log_norm[c] - 0.5 * q
    }

    pub fn log_density(&self, x: &[f64; D]) -> f64 {
        let mut buf = [0.0; 16];
        let terms: &mut [f64] = if self.k() <= buf.len() { &mut buf[..self.k()] } else { &mut vec![0.0; self.k()] };
        for (c, t) in terms.iter_mut().enumerate() {
            *t = self.component_log_density(c, x);
        }
        log_sum_exp(terms)
    }

    pub fn density(&self, x: &[f64; D]) -> f64 {
        self.log_density(x).exp()
    }

    /// Total log-likelihood of `samples`.
    pub fn log_likelihood(&self, samples: &[[f64; D]]) -> f64 {
        samples.iter().map(|x| self.log_density(x)).sum()
    }

    /// Free parameters: `(K-1) + K·D + K·D(D+1)/2`.
    pub fn parameter_count(&self) -> usize {
        let k = self.k();
        (k - 1) + k * D + k * D * (D + 1) / 2
    }

    /// `-2 ln L + p ln n`.
    pub fn bic(&self, samples: &[[f64; D]]) -> f64 {
        -2.0 * self.log_likelihood(samples) + self.parameter_count() as f64 * (samples.len() as f64).ln()
    }

    pub fn sample(&self, rng: &mut Rng) -> [f64; D] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut c = self.k() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                c = i;
                break;
            }
        }
        let mut z = [0.0; D];
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let l = &self.chol[c];
        let mut x = self.means[c];
        for i in 0..D {
            x[i] += (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>();
        }
        x
    }
}

impl Gmm<2> {
    /// Exact marginal mixture over coordinate `dim`.
    pub fn marginal(&self, dim: usize) -> Gmm1 {
        assert!(dim < 2);
        Gmm::new(
            self.weights.clone(),
            self.means.iter().map(|m| [m[dim]]).collect(),
            self.covariances.iter().map(|c| [[c[dim][dim]]]).collect(),
        )
        .expect("marginal of a valid mixture is valid")
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

// k-means++ seeding: first center uniform, later ones proportional to the
// squared distance to the nearest chosen center.
fn kmeans_pp<const D: usize>(samples: &[[f64; D]], k: usize, rng: &mut Rng) -> Vec<[f64; D]> {
    let mut centers = vec![samples[rng.random_range(0..samples.len())]];
    let mut d2: Vec<f64> = samples.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(samples.len() - 1)
        } else {
            rng.random_range(0..samples.len())
        };
        let c = samples[idx];
        for (d, x) in d2.iter_mut().zip(samples) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn sample_covariance<const D: usize>(samples: &[[f64; D]], weights: Option<&[f64]>, mean: &[f64; D]) -> Matrix<D> {
    let mut cov = [[0.0; D]; D];
    let mut total = 0.0;
    for (n, x) in samples.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[n]);
        total += w;
        for i in 0..D {
            for j in 0..=i {
                cov[i][j] += w * (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    for i in 0..D {
        for j in 0..=i {
            cov[i][j] /= total;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Fits a `k`-component mixture by EM.
///
/// Centers come from k-means++ seeding, every component starts with the
/// pooled sample covariance and equal weight. A component whose mass or
/// variance collapses, or whose covariance stops being positive definite,
/// ends the fit with [`PotentialError::DegenerateComponent`].
pub fn fit_gmm<const D: usize>(samples: &[[f64; D]], k: usize, seed: u64) -> Result<Gmm<D>, PotentialError> {
    let needed = k * (D + 1);
    if k == 0 || samples.len() < needed.max(2) {
        return Err(PotentialError::InsufficientData {
            needed: needed.max(2),
            found: samples.len(),
        });
    }
    if samples.iter().flatten().any(|x| !x.is_finite()) {
        return Err(PotentialError::NonFinite);
    }
    let n = samples.len();
    let mut rng = rng_from_seed(seed);
    let means = kmeans_pp(samples, k, &mut rng);
    let mean_all = {
        let mut m = [0.0; D];
        for x in samples {
            for i in 0..D {
                m[i] += x[i];
            }
        }
        m.map(|v| v / n as f64)
    };
    let pooled = sample_covariance(samples, None, &mean_all);
    let mut gmm = Gmm::new(vec![1.0 / k as f64; k], means, vec![pooled; k])?;

    let mut resp = vec![0.0; n * k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut log_terms = vec![0.0; k];
    for _ in 0..EM_MAX_ITERATIONS {
        // E-step
        let mut ll = 0.0;
        for (x, r) in samples.iter().zip(resp.chunks_mut(k)) {
            for (c, t) in log_terms.iter_mut().enumerate() {
                *t = gmm.component_log_density(c, x);
            }
            let lse = log_sum_exp(&log_terms);
            ll += lse;
            for (rc, t) in r.iter_mut().zip(&log_terms) {
                *rc = (t - lse).exp();
            }
        }
        let mean_ll = ll / n as f64;
        if mean_ll - prev_ll < EM_TOLERANCE {
            break;
        }
        prev_ll = mean_ll;

        // M-step
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut covs = Vec::with_capacity(k);
        for c in 0..k {
            let rc: Vec<f64> = resp.iter().skip(c).step_by(k).copied().collect();
            let nk: f64 = rc.iter().sum();
            if !(nk > 1e-10 * n as f64) {
                return Err(PotentialError::DegenerateComponent { component: c });
            }
            let mut mu = [0.0; D];
            for (x, r) in samples.iter().zip(&rc) {
                for i in 0..D {
                    mu[i] += r * x[i];
                }
            }
            let mu = mu.map(|v| v / nk);
            let cov = sample_covariance(samples, Some(&rc), &mu);
            if (0..D).any(|i| !(cov[i][i] >= VARIANCE_FLOOR)) {
                return Err(PotentialError::DegenerateComponent { component: c });
            }
            weights.push(nk / n as f64);
            means.push(mu);
            covs.push(cov);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        gmm = Gmm::new(weights, means, covs)?;
    }
    Ok(gmm)
}

/// Fits `K = 1..=k_max` and keeps the lowest BIC, preferring smaller `K`
/// on ties. Orders that fail to fit are skipped with a warning.
pub fn select_k_bic<const D: usize>(samples: &[[f64; D]], k_max: usize, seed: u64) -> Result<(usize, Gmm<D>), PotentialError> {
    assert!(k_max >= 1, "k_max must be at least 1");
    let mut best: Option<(f64, usize, Gmm<D>)> = None;
    let mut first_err = None;
    for k in 1..=k_max {
        match fit_gmm(samples, k, derive_seed(seed, k as u64)) {
            Ok(g) => {
                let bic = g.bic(samples);
                if best.as_ref().is_none_or(|(b, _, _)| bic < *b) {
                    best = Some((bic, k, g));
                }
            }
            Err(e) => {
                log::warn!("skipping K = {k} mixture: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((_, k, g)) => Ok((k, g)),
        None => Err(first_err.unwrap_or(PotentialError::NoValidFit { k_max })),
    }
}

/// `max(density, DENSITY_FLOOR)` in log space.
pub fn floored_ln(density: f64) -> f64 {
    density.max(DENSITY_FLOOR).ln()
}
