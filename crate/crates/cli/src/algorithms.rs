//! Uniform dispatch over the inference algorithms.

use clap::ValueEnum;
use isingnn_core::approx::{bp_marginals, gibbs_marginals, BpConfig, GibbsConfig};
use isingnn_core::exact::{brute_force_marginals, max_query_width, variable_elimination_marginals, BRUTE_FORCE_LABEL_ORDER};
use isingnn_core::{Graph, IsingModel, MarginalSet};
use isingnn_gnn::{gnn_forward, GnnParams};
use serde::Serialize;

use crate::error::CliError;

/// Largest induced width accepted for variable elimination (factor tables
/// of `2^(width + 1)` entries).
pub const VE_MAX_WIDTH: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Brute,
    Ve,
    Bp,
    Gibbs,
    Gnn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::Ve => "ve",
            Algorithm::Bp => "bp",
            Algorithm::Gibbs => "gibbs",
            Algorithm::Gnn => "gnn",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings of the approximate algorithms. `bp = None` uses
/// [`BpConfig::for_graph`].
#[derive(Debug, Clone, Copy, Default)]
pub struct InferOptions {
    pub bp: Option<BpConfig>,
    pub gibbs: GibbsConfig,
}

pub fn ve_feasible(g: &Graph) -> bool {
    max_query_width(g) <= VE_MAX_WIDTH
}

/// Runs one algorithm. `params` is required for [`Algorithm::Gnn`].
pub fn run_inference(
    alg: Algorithm,
    m: &IsingModel,
    opts: &InferOptions,
    params: Option<&GnnParams>,
) -> Result<MarginalSet, CliError> {
    match alg {
        Algorithm::Brute => Ok(brute_force_marginals(m)?),
        Algorithm::Ve => {
            let w = max_query_width(m.graph());
            if w > VE_MAX_WIDTH {
                return Err(CliError::Algorithm(format!(
                    "variable elimination needs induced width {w}, limit is {VE_MAX_WIDTH}"
                )));
            }
            Ok(variable_elimination_marginals(m))
        }
        Algorithm::Bp => {
            let cfg = opts.bp.unwrap_or_else(|| BpConfig::for_graph(m.graph()));
            let r = bp_marginals(m, &cfg);
            if !r.converged {
                log::warn!("belief propagation stopped after {} iterations without converging", r.iterations_used);
            }
            Ok(r.marginals)
        }
        Algorithm::Gibbs => Ok(gibbs_marginals(m, &opts.gibbs)),
        Algorithm::Gnn => {
            let p = params.ok_or_else(|| CliError::Usage("the gnn algorithm requires --weights".into()))?;
            Ok(gnn_forward(p, m))
        }
    }
}

/// Exact marginals: enumeration up to the brute-force label order,
/// variable elimination above it.
pub fn exact_truth(m: &IsingModel) -> Result<MarginalSet, CliError> {
    if m.order() <= BRUTE_FORCE_LABEL_ORDER {
        run_inference(Algorithm::Brute, m, &InferOptions::default(), None)
    } else {
        run_inference(Algorithm::Ve, m, &InferOptions::default(), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use isingnn_core::mrf::{generate_graph, sample_model};
    use isingnn_core::GraphSpec;

    #[test]
    fn brute_and_ve_agree() {
        let spec = GraphSpec::connected(10, 2.0, 3.0).unwrap();
        let m = sample_model(&generate_graph(&spec, 5).unwrap(), 6);
        let opts = InferOptions::default();
        let a = run_inference(Algorithm::Brute, &m, &opts, None).unwrap();
        let b = run_inference(Algorithm::Ve, &m, &opts, None).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-10);
    }

    #[test]
    fn gnn_without_weights_is_a_usage_error() {
        let m = sample_model(&Graph::path(3).unwrap(), 1);
        let r = run_inference(Algorithm::Gnn, &m, &InferOptions::default(), None);
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn brute_refuses_large_models() {
        let m = sample_model(&Graph::path(30).unwrap(), 1);
        let r = run_inference(Algorithm::Brute, &m, &InferOptions::default(), None);
        assert!(matches!(r, Err(CliError::Algorithm(_))));
        assert!(exact_truth(&m).unwrap().is_valid(1e-12));
    }
}
