use serde::{Deserialize, Serialize};

/// Two-state distribution of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMarginal {
    /// Probability of `θ = -1` (intact).
    pub p_minus: f64,
    /// Probability of `θ = +1` (damaged).
    pub p_plus: f64,
}

impl NodeMarginal {
    pub fn from_plus(p_plus: f64) -> Self {
        Self {
            p_minus: 1.0 - p_plus,
            p_plus,
        }
    }

    /// Normalizes a pair of nonnegative weights.
    pub fn from_weights(w_minus: f64, w_plus: f64) -> Self {
        let z = w_minus + w_plus;
        Self {
            p_minus: w_minus / z,
            p_plus: w_plus / z,
        }
    }

    pub fn uniform() -> Self {
        Self {
            p_minus: 0.5,
            p_plus: 0.5,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p_minus, self.p_plus]
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        (0.0..=1.0).contains(&self.p_minus)
            && (0.0..=1.0).contains(&self.p_plus)
            && (self.p_minus + self.p_plus - 1.0).abs() <= tol
    }
}

/// Per-node marginal distributions; the output of every inference routine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginalSet(Vec<NodeMarginal>);

impl MarginalSet {
    pub fn new(nodes: Vec<NodeMarginal>) -> Self {
        Self(nodes)
    }

    pub fn from_plus(p_plus: impl IntoIterator<Item = f64>) -> Self {
        Self(p_plus.into_iter().map(NodeMarginal::from_plus).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nodes(&self) -> &[NodeMarginal] {
        &self.0
    }

    pub fn get(&self, i: usize) -> NodeMarginal {
        self.0[i]
    }

    pub fn p_plus(&self) -> Vec<f64> {
        self.0.iter().map(|m| m.p_plus).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeMarginal> {
        self.0.iter()
    }

    /// Every entry sums to one within `tol` and lies in `[0, 1]`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.0.iter().all(|m| m.is_valid(tol))
    }

    /// Largest absolute difference in `p_plus` over nodes.
    pub fn max_abs_diff(&self, other: &MarginalSet) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.p_plus - b.p_plus).abs().max((a.p_minus - b.p_minus).abs()))
            .fold(0.0, f64::max)
    }
}

impl FromIterator<NodeMarginal> for MarginalSet {
    fn from_iter<T: IntoIterator<Item = NodeMarginal>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}
