//! Message-passing network over Ising models.
//!
//! Every node carries a hidden state `h_i` (zero at the start). Each step
//! computes a message `F(h_i, h_j, ω_ij, b_i, b_j)` along both directions
//! of every edge, sums the incoming messages of each node and feeds the sum
//! to a GRU that updates `h_j`. After the last step a readout network maps
//! `h_i` to two sigmoid values, normalized to `(p_minus, p_plus)`.
//!
//! Batches are processed as one disjoint union so that every network runs
//! as a single matrix product per step.

use std::cmp::Ordering;

use isingnn_core::{IsingModel, MarginalSet, NodeMarginal};
use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::nn::{normalized_cross_entropy, Activation, DenseLayer, GruCache, GruCell, Mlp, MlpCache, PROB_CLAMP};
use crate::GnnError;

/// Edge features appended to the two hidden states: `ω_ij, b_i, b_j`.
const EDGE_FEATURES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnDims {
    /// Hidden state size `P`.
    pub hidden: usize,
    /// Message size `Q`.
    pub message: usize,
    /// Hidden layer widths of the message network.
    pub message_layers: Vec<usize>,
    /// Hidden layer widths of the readout network.
    pub readout_layers: Vec<usize>,
    /// Number of propagation steps `T`.
    pub steps: usize,
}

impl Default for GnnDims {
    fn default() -> Self {
        Self {
            hidden: 5,
            message: 5,
            message_layers: vec![64, 64],
            readout_layers: vec![64, 64],
            steps: 10,
        }
    }
}

impl GnnDims {
    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |what: &str| Err(GnnError::InvalidDims(what.to_string()));
        if self.hidden == 0 {
            return bad("hidden size must be positive");
        }
        if self.message == 0 {
            return bad("message size must be positive");
        }
        if self.steps == 0 {
            return bad("step count must be positive");
        }
        if self.message_layers.iter().chain(&self.readout_layers).any(|&w| w == 0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    fn message_widths(&self) -> Vec<usize> {
        let mut w = vec![2 * self.hidden + EDGE_FEATURES];
        w.extend(&self.message_layers);
        w.push(self.message);
        w
    }

    fn readout_widths(&self) -> Vec<usize> {
        let mut w = vec![self.hidden];
        w.extend(&self.readout_layers);
        w.push(2);
        w
    }
}

/// Message network `F`, update cell `G` and readout `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    dims: GnnDims,
    pub message: Mlp,
    pub update: GruCell,
    pub readout: Mlp,
}

impl GnnParams {
    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn init(dims: &GnnDims, seed: u64) -> Result<Self, GnnError> {
        dims.validate()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let message = Mlp::glorot(&dims.message_widths(), Activation::Relu, Activation::Identity, &mut rng);
        let update = GruCell::glorot(dims.hidden, dims.message, &mut rng);
        let readout = Mlp::glorot(&dims.readout_widths(), Activation::Relu, Activation::Sigmoid, &mut rng);
        Ok(Self {
            dims: dims.clone(),
            message,
            update,
            readout,
        })
    }

    /// All-zero parameters with the layout of `dims`.
    pub fn zeros(dims: &GnnDims) -> Result<Self, GnnError> {
        let p = Self::init(dims, 0)?;
        Ok(p.zeros_like())
    }

    pub fn dims(&self) -> &GnnDims {
        &self.dims
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            message: self.message.zeros_like(),
            update: self.update.zeros_like(),
            readout: self.readout.zeros_like(),
        }
    }

    /// Named dense layers in their canonical order.
    pub fn layers(&self) -> Vec<(String, &DenseLayer)> {
        let mut out = Vec::new();
        for (k, l) in self.message.layers.iter().enumerate() {
            out.push((format!("message.{k}"), l));
        }
        out.push(("update.z".to_string(), &self.update.update));
        out.push(("update.r".to_string(), &self.update.reset));
        out.push(("update.h".to_string(), &self.update.candidate));
        for (k, l) in self.readout.layers.iter().enumerate() {
            out.push((format!("readout.{k}"), l));
        }
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out: Vec<&mut DenseLayer> = self.message.layers.iter_mut().collect();
        out.push(&mut self.update.update);
        out.push(&mut self.update.reset);
        out.push(&mut self.update.candidate);
        out.extend(self.readout.layers.iter_mut());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|(_, l)| l.weights.len() + l.biases.len()).sum()
    }

    /// Every weight then bias of every layer, row-major, in layer order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (_, l) in self.layers() {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.parameter_count(), "flat parameter length");
        let mut it = flat.iter();
        for l in self.layers_mut() {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
    }

    pub(crate) fn from_parts(dims: GnnDims, layers: Vec<DenseLayer>) -> Result<Self, GnnError> {
        let mut p = Self::zeros(&dims)?;
        {
            let slots = p.layers_mut();
            if slots.len() != layers.len() {
                return Err(GnnError::CorruptFile(format!(
                    "expected {} layers, found {}",
                    slots.len(),
                    layers.len()
                )));
            }
            for (slot, layer) in slots.into_iter().zip(layers) {
                if slot.weights.dim() != layer.weights.dim() || slot.biases.len() != layer.biases.len() {
                    return Err(GnnError::CorruptFile("tensor shape does not match dims".to_string()));
                }
                *slot = layer;
            }
        }
        Ok(p)
    }
}

/// Disjoint union of a batch of models.
struct Batch {
    nodes: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    /// `ω, b_src, b_dst` per directed edge.
    edge_features: Array2<f64>,
    /// Incoming directed edges per node.
    incoming: Vec<Vec<usize>>,
    /// Node offset of each model.
    offsets: Vec<usize>,
}

impl Batch {
    fn new(models: &[&IsingModel]) -> Self {
        let nodes: usize = models.iter().map(|m| m.order()).sum();
        let directed: usize = models.iter().map(|m| 2 * m.graph().edge_count()).sum();
        let mut src = Vec::with_capacity(directed);
        let mut dst = Vec::with_capacity(directed);
        let mut feats = Vec::with_capacity(directed * EDGE_FEATURES);
        let mut incoming = vec![Vec::new(); nodes];
        let mut offsets = Vec::with_capacity(models.len());
        let mut base = 0;
        for m in models {
            offsets.push(base);
            let b = m.b();
            for (&(i, j), &w) in m.graph().edges().iter().zip(m.omega()) {
                for (a, c) in [(i, j), (j, i)] {
                    incoming[base + c].push(src.len());
                    src.push(base + a);
                    dst.push(base + c);
                    feats.extend([w, b[a], b[c]]);
                }
            }
            base += m.order();
        }
        Self {
            nodes,
            edge_features: Array2::from_shape_vec((src.len(), EDGE_FEATURES), feats).expect("feature layout"),
            src,
            dst,
            incoming,
            offsets,
        }
    }
}

struct StepCache {
    message: MlpCache,
    update: GruCache,
}

struct ForwardPass {
    /// Raw sigmoid readout, `nodes × 2`.
    readout: Array2<f64>,
    readout_cache: Option<MlpCache>,
    steps: Vec<StepCache>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sums the incoming messages of each node. Messages are added in sorted
/// order so the result does not depend on how nodes are labelled.
fn aggregate(messages: ArrayView2<f64>, batch: &Batch, q: usize) -> Array2<f64> {
    let mut out = Array2::zeros((batch.nodes, q));
    let flat = messages.as_slice().expect("standard layout");
    let mut rows: Vec<&[f64]> = Vec::new();
    for (j, inc) in batch.incoming.iter().enumerate() {
        rows.clear();
        rows.extend(inc.iter().map(|&e| &flat[e * q..(e + 1) * q]));
        rows.sort_by(|a, b| lexicographic(a, b));
        let mut acc = out.row_mut(j);
        for r in &rows {
            for (a, v) in acc.iter_mut().zip(r.iter()) {
                *a += v;
            }
        }
    }
    out
}

fn forward(params: &GnnParams, batch: &Batch, keep_cache: bool) -> ForwardPass {
    let p = params.dims.hidden;
    let q = params.dims.message;
    let e2 = batch.src.len();
    let mut h = Array2::<f64>::zeros((batch.nodes, p));
    let mut steps = Vec::with_capacity(if keep_cache { params.dims.steps } else { 0 });
    let mut x = Array2::<f64>::zeros((e2, 2 * p + EDGE_FEATURES));
    x.slice_mut(s![.., 2 * p..]).assign(&batch.edge_features);
    for _ in 0..params.dims.steps {
        for (e, mut row) in x.rows_mut().into_iter().enumerate() {
            row.slice_mut(s![..p]).assign(&h.row(batch.src[e]));
            row.slice_mut(s![p..2 * p]).assign(&h.row(batch.dst[e]));
        }
        let (messages, message_cache) = if keep_cache {
            let (m, c) = params.message.forward_batch(x.view());
            (m, Some(c))
        } else {
            (params.message.predict_batch(x.view()), None)
        };
        let agg = aggregate(messages.view(), batch, q);
        let (next, update_cache) = params.update.forward_batch(h.view(), agg.view());
        if let Some(message) = message_cache {
            steps.push(StepCache {
                message,
                update: update_cache,
            });
        }
        h = next;
    }
    let (readout, readout_cache) = if keep_cache {
        let (r, c) = params.readout.forward_batch(h.view());
        (r, Some(c))
    } else {
        (params.readout.predict_batch(h.view()), None)
    };
    ForwardPass {
        readout,
        readout_cache,
        steps,
    }
}

fn to_marginals(readout: &Array2<f64>, batch: &Batch, models: &[&IsingModel]) -> Vec<MarginalSet> {
    models
        .iter()
        .zip(&batch.offsets)
        .map(|(m, &off)| {
            (off..off + m.order())
                .map(|i| NodeMarginal::from_weights(readout[[i, 0]], readout[[i, 1]]))
                .collect()
        })
        .collect()
}

/// Marginal estimates for one model.
pub fn gnn_forward(params: &GnnParams, m: &IsingModel) -> MarginalSet {
    predict(params, &[m]).pop().expect("one model in, one out")
}

/// Marginal estimates for several models, evaluated as one union batch.
pub fn predict(params: &GnnParams, models: &[&IsingModel]) -> Vec<MarginalSet> {
    let batch = Batch::new(models);
    let pass = forward(params, &batch, false);
    to_marginals(&pass.readout, &batch, models)
}

/// `-Σ_i Σ_s label_i(s) ln pred_i(s)` with predictions clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy_loss(pred: &MarginalSet, label: &MarginalSet) -> Result<f64, GnnError> {
    if pred.len() != label.len() {
        return Err(GnnError::DimensionMismatch {
            expected: label.len(),
            found: pred.len(),
        });
    }
    Ok(pred
        .iter()
        .zip(label.iter())
        .map(|(p, l)| {
            p.as_array()
                .iter()
                .zip(l.as_array())
                .map(|(pv, lv)| -lv * pv.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln())
                .sum::<f64>()
        })
        .sum())
}

/// A model with its target marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub model: IsingModel,
    pub label: MarginalSet,
}

/// Mean per-model loss over `samples` and its gradient.
pub fn loss_and_gradient(params: &GnnParams, samples: &[&LabeledSample]) -> (f64, GnnParams) {
    let models: Vec<&IsingModel> = samples.iter().map(|s| &s.model).collect();
    let batch = Batch::new(&models);
    let pass = forward(params, &batch, true);
    let scale = 1.0 / samples.len() as f64;

    let mut loss = 0.0;
    let mut d_readout = Array2::<f64>::zeros(pass.readout.raw_dim());
    for (s, &off) in samples.iter().zip(&batch.offsets) {
        assert_eq!(s.label.len(), s.model.order(), "label length must match model order");
        for (k, l) in s.label.iter().enumerate() {
            let i = off + k;
            let r = [pass.readout[[i, 0]], pass.readout[[i, 1]]];
            let (_, li, dr) = normalized_cross_entropy(r, l.as_array());
            loss += li;
            d_readout[[i, 0]] = dr[0] * scale;
            d_readout[[i, 1]] = dr[1] * scale;
        }
    }

    let mut grad = params.zeros_like();
    let p = params.dims.hidden;
    let q = params.dims.message;
    let readout_cache = pass.readout_cache.as_ref().expect("cache kept");
    let mut dh = params.readout.backward(readout_cache, d_readout, &mut grad.readout);
    for step in pass.steps.iter().rev() {
        let (dh_prev, d_agg) = params.update.backward(&step.update, &dh, &mut grad.update);
        let mut d_msg = Array2::<f64>::zeros((batch.src.len(), q));
        for (e, mut row) in d_msg.rows_mut().into_iter().enumerate() {
            row.assign(&d_agg.row(batch.dst[e]));
        }
        let dx = params.message.backward(&step.message, d_msg, &mut grad.message);
        dh = dh_prev;
        for (e, row) in dx.rows().into_iter().enumerate() {
            let mut hs = dh.row_mut(batch.src[e]);
            hs += &row.slice(s![..p]);
            let mut hd = dh.row_mut(batch.dst[e]);
            hd += &row.slice(s![p..2 * p]);
        }
    }
    (loss * scale, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;
    use isingnn_core::exact::brute_force_marginals;
    use isingnn_core::metrics::mean_node_kl;
    use isingnn_core::mrf::{generate_graph, sample_model, GraphSpec};
    use isingnn_core::rng::rng_from_seed;
    use isingnn_core::Graph;
    use rand::seq::SliceRandom;

    fn model(n: usize, seed: u64) -> IsingModel {
        let g = generate_graph(&GraphSpec::connected(n, 2.0, 3.0).unwrap(), seed).unwrap();
        sample_model(&g, seed + 1)
    }

    #[test]
    fn default_layout() {
        let p = GnnParams::init(&GnnDims::default(), 0).unwrap();
        assert_eq!(p.message.in_dim(), 13);
        assert_eq!(p.message.out_dim(), 5);
        assert_eq!(p.update.hidden_dim(), 5);
        assert_eq!(p.update.input_dim(), 5);
        assert_eq!(p.readout.out_dim(), 2);
        assert_eq!(p.readout.activations, vec![Activation::Relu, Activation::Relu, Activation::Sigmoid]);
        assert_eq!(p.message.activations, vec![Activation::Relu, Activation::Relu, Activation::Identity]);
        assert_eq!(p.to_flat().len(), p.parameter_count());
        let bad = GnnDims {
            steps: 0,
            ..GnnDims::default()
        };
        assert!(GnnParams::init(&bad, 0).is_err());
    }

    #[test]
    fn output_is_normalized() {
        for seed in 0..5 {
            let p = GnnParams::init(&GnnDims::default(), seed).unwrap();
            let out = gnn_forward(&p, &model(12, seed));
            assert!(out.is_valid(1e-9));
        }
        // isolated nodes get the empty-sum message
        let p = GnnParams::init(&GnnDims::default(), 1).unwrap();
        let m = IsingModel::new(Graph::empty(3).unwrap(), vec![], vec![0.1, -0.4, 2.0]).unwrap();
        assert!(gnn_forward(&p, &m).is_valid(1e-9));
    }

    #[test]
    fn permutation_equivariance_is_exact() {
        let p = GnnParams::init(&GnnDims::default(), 7).unwrap();
        let mut rng = rng_from_seed(3);
        for seed in 0..10 {
            let m = model(10 + seed as usize, seed);
            let mut perm: Vec<usize> = (0..m.order()).collect();
            perm.shuffle(&mut rng);
            let a = gnn_forward(&p, &m);
            let b = gnn_forward(&p, &m.permuted(&perm).unwrap());
            for v in 0..m.order() {
                assert_eq!(a.get(v), b.get(perm[v]), "node {v}");
            }
        }
    }

    #[test]
    fn batched_prediction_matches_single() {
        let p = GnnParams::init(&GnnDims::default(), 2).unwrap();
        let models: Vec<IsingModel> = (0..4).map(|s| model(8 + s as usize, s)).collect();
        let refs: Vec<&IsingModel> = models.iter().collect();
        let batched = predict(&p, &refs);
        for (m, b) in models.iter().zip(&batched) {
            assert!(gnn_forward(&p, m).max_abs_diff(b) < 1e-14);
        }
    }

    #[test]
    fn loss_examples() {
        let half = MarginalSet::from_plus([0.5; 4]);
        assert!((cross_entropy_loss(&half, &half).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-14);
        let certain = MarginalSet::from_plus([0.0; 3]);
        assert!(cross_entropy_loss(&certain, &certain).unwrap() <= 3e-11);
        let one = MarginalSet::from_plus([0.0]);
        let half1 = MarginalSet::from_plus([0.5]);
        assert!((cross_entropy_loss(&half1, &one).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy_loss(&half1, &half).is_err());
    }

    #[test]
    fn loss_agrees_with_forward() {
        let p = GnnParams::init(&GnnDims::default(), 4).unwrap();
        let samples: Vec<LabeledSample> = (0..3)
            .map(|s| {
                let m = model(9, s);
                let label = brute_force_marginals(&m).unwrap();
                LabeledSample { model: m, label }
            })
            .collect();
        let refs: Vec<&LabeledSample> = samples.iter().collect();
        let (loss, _) = loss_and_gradient(&p, &refs);
        let direct: f64 = samples
            .iter()
            .map(|s| cross_entropy_loss(&gnn_forward(&p, &s.model), &s.label).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((loss - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dims = GnnDims {
            hidden: 3,
            message: 2,
            message_layers: vec![6],
            readout_layers: vec![5],
            steps: 3,
        };
        let base = GnnParams::init(&dims, 11).unwrap();
        let m = model(4, 2);
        let sample = LabeledSample {
            label: brute_force_marginals(&m).unwrap(),
            model: m,
        };
        let f = |flat: &[f64]| {
            let mut p = base.clone();
            p.set_flat(flat);
            let (loss, g) = loss_and_gradient(&p, &[&sample]);
            (loss, g.to_flat())
        };
        let err = finite_difference_check(f, &base.to_flat(), 1e-5);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn overfits_a_single_model() {
        let m = model(10, 5);
        let sample = LabeledSample {
            label: brute_force_marginals(&m).unwrap(),
            model: m,
        };
        let mut p = GnnParams::init(&GnnDims::default(), 3).unwrap();
        let mut adam = crate::nn::AdamState::new(p.parameter_count(), Default::default());
        let mut flat = p.to_flat();
        for _ in 0..1500 {
            let (_, g) = loss_and_gradient(&p, &[&sample]);
            adam.update(&mut flat, &g.to_flat());
            p.set_flat(&flat);
        }
        let kl = mean_node_kl(&sample.label, &gnn_forward(&p, &sample.model)).unwrap();
        assert!(kl <= 1e-3, "kl {kl}");
    }
}
