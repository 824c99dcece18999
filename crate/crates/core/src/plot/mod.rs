//! Bayesian rule learner over a grammar-defined hypothesis space.

mod fit;
mod grammar;
mod learner;
mod mh;
mod posterior;

pub use fit::{fit_noise, lattice, FitPoint, FitResult, FitTarget};
pub use grammar::{Derivation, Grammar, GrammarSpec, InsideTable, Production, ProductionSpec};
pub use learner::{dump_csv, predictive, run_compiled, run_list, CompiledList, HypothesisSpace, LearnerRun, Trajectory};
pub use mh::{mh_sample, MhOptions};
pub use posterior::{
    classify, classify_probability, log_likelihood, map_rule, posterior_predictive, Evidence, Hypothesis, NoiseParams,
    PosteriorState,
};

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("grammar: {0}")]
    Grammar(String),
    #[error("more than {limit} hypotheses; raise the cap or lower max_size")]
    Budget { limit: usize },
    #[error("noise parameters out of range: alpha={alpha}, beta={beta}")]
    Noise { alpha: f64, beta: f64 },
    #[error("posterior state is empty")]
    EmptyState,
    #[error("fit: {0}")]
    Fit(String),
}

/// Total-variation distance between two distributions over concepts.
pub fn total_variation(a: &PosteriorState, b: &PosteriorState) -> f64 {
    use std::collections::HashMap;
    let mut diff: HashMap<&crate::dsl::Concept, f64> = HashMap::new();
    for h in &a.hypotheses {
        *diff.entry(&h.concept).or_default() += h.log_posterior.exp();
    }
    for h in &b.hypotheses {
        *diff.entry(&h.concept).or_default() -= h.log_posterior.exp();
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}
