use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::{sigmoid, DenseLayer, NnError};

/// Gated recurrent unit with hidden size `P` and input size `Q`:
///
/// ```text
/// z  = σ(W_z [h; x] + b_z)
/// r  = σ(W_r [h; x] + b_r)
/// h̃  = tanh(W_h [r ⊙ h; x] + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h̃
/// ```
///
/// Each gate is a [`DenseLayer`] of shape `P × (P + Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub update: DenseLayer,
    pub reset: DenseLayer,
    pub candidate: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    h: Array2<f64>,
    hx: Array2<f64>,
    cand_in: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    cand: Array2<f64>,
}

impl GruCell {
    pub fn new(update: DenseLayer, reset: DenseLayer, candidate: DenseLayer) -> Result<Self, NnError> {
        let p = update.out_dim();
        let width = update.in_dim();
        for l in [&reset, &candidate] {
            if l.out_dim() != p || l.in_dim() != width {
                return Err(NnError::DimensionMismatch {
                    context: "gru gate shape",
                    expected: p * width,
                    found: l.out_dim() * l.in_dim(),
                });
            }
        }
        if width <= p {
            return Err(NnError::DimensionMismatch {
                context: "gru input width",
                expected: p + 1,
                found: width,
            });
        }
        Ok(Self { update, reset, candidate })
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        let gate = || DenseLayer::zeros(hidden + input, hidden);
        Self {
            update: gate(),
            reset: gate(),
            candidate: gate(),
        }
    }

    pub fn glorot<R: rand::Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        Self {
            update: DenseLayer::glorot(hidden + input, hidden, rng),
            reset: DenseLayer::glorot(hidden + input, hidden, rng),
            candidate: DenseLayer::glorot(hidden + input, hidden, rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.update.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.update.in_dim() - self.hidden_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_dim(), self.input_dim())
    }

    /// One step for a batch of rows: `h` is `N × P`, `x` is `N × Q`.
    pub fn forward_batch(&self, h: ArrayView2<f64>, x: ArrayView2<f64>) -> (Array2<f64>, GruCache) {
        let hx = concatenate![Axis(1), h, x];
        let mut z = self.update.forward_batch(hx.view());
        z.mapv_inplace(sigmoid);
        let mut r = self.reset.forward_batch(hx.view());
        r.mapv_inplace(sigmoid);
        let rh = &r * &h;
        let cand_in = concatenate![Axis(1), rh, x];
        let mut cand = self.candidate.forward_batch(cand_in.view());
        cand.mapv_inplace(f64::tanh);
        let mut out = h.to_owned();
        ndarray::Zip::from(&mut out)
            .and(&z)
            .and(&cand)
            .for_each(|o, &zv, &c| *o = (1.0 - zv) * *o + zv * c);
        let cache = GruCache {
            h: h.to_owned(),
            hx,
            cand_in,
            z,
            r,
            cand,
        };
        (out, cache)
    }

    /// Accumulates gate gradients into `grad`; returns `(dh, dx)`.
    pub fn backward(&self, cache: &GruCache, d_out: &Array2<f64>, grad: &mut GruCell) -> (Array2<f64>, Array2<f64>) {
        let p = self.hidden_dim();
        let GruCache {
            h,
            hx,
            cand_in,
            z,
            r,
            cand,
        } = cache;
        let mut dh = d_out * &z.mapv(|v| 1.0 - v);
        let mut dz_pre = d_out * &(cand - h);
        dz_pre.zip_mut_with(z, |g, &zv| *g *= zv * (1.0 - zv));
        let mut dc_pre = d_out * z;
        dc_pre.zip_mut_with(cand, |g, &c| *g *= 1.0 - c * c);

        accumulate(&mut grad.candidate, &dc_pre, cand_in);
        let dc_in = dc_pre.dot(&self.candidate.weights);
        let d_rh = dc_in.slice(s![.., ..p]);
        let mut dx = dc_in.slice(s![.., p..]).to_owned();
        dh += &(&d_rh * r);
        let mut dr_pre = &d_rh * h;
        dr_pre.zip_mut_with(r, |g, &rv| *g *= rv * (1.0 - rv));

        accumulate(&mut grad.update, &dz_pre, hx);
        accumulate(&mut grad.reset, &dr_pre, hx);
        let mut dhx = dz_pre.dot(&self.update.weights);
        ndarray::linalg::general_mat_mul(1.0, &dr_pre, &self.reset.weights, 1.0, &mut dhx);
        dh += &dhx.slice(s![.., ..p]);
        dx += &dhx.slice(s![.., p..]);
        (dh, dx)
    }
}

fn accumulate(g: &mut DenseLayer, d_pre: &Array2<f64>, input: &Array2<f64>) {
    ndarray::linalg::general_mat_mul(1.0, &d_pre.t(), input, 1.0, &mut g.weights);
    g.biases += &d_pre.sum_axis(Axis(0));
}

/// Single-vector GRU step.
pub fn gru_step(cell: &GruCell, h: &[f64], x: &[f64]) -> Result<Vec<f64>, NnError> {
    if h.len() != cell.hidden_dim() {
        return Err(NnError::DimensionMismatch {
            context: "gru hidden state",
            expected: cell.hidden_dim(),
            found: h.len(),
        });
    }
    if x.len() != cell.input_dim() {
        return Err(NnError::DimensionMismatch {
            context: "gru input",
            expected: cell.input_dim(),
            found: x.len(),
        });
    }
    let hv = Array2::from_shape_vec((1, h.len()), h.to_vec()).expect("row vector");
    let xv = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
    let (out, _) = cell.forward_batch(hv.view(), xv.view());
    Ok(out.iter().copied().collect())
}
