use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::grammar::log_add;
use super::PlotError;
use crate::dsl::{self, Concept, Context, FeatureVocab};

/// Label noise: with probability `alpha` the label follows the rule, otherwise
/// it is True with probability `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub alpha: f64,
    pub beta: f64,
}

impl NoiseParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, PlotError> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(PlotError::Noise { alpha, beta });
        }
        Ok(NoiseParams { alpha, beta })
    }

    /// Probability of observing `label` when the rule says `rule_value`.
    #[inline]
    pub fn label_prob(self, rule_value: bool, label: bool) -> f64 {
        let base = if label { self.beta } else { 1.0 - self.beta };
        self.alpha * ((rule_value == label) as u8 as f64) + (1.0 - self.alpha) * base
    }

    /// `ln label_prob` indexed by `[rule_value][label]`.
    pub fn log_table(self) -> [[f64; 2]; 2] {
        let mut t = [[0.0; 2]; 2];
        for (r, row) in t.iter_mut().enumerate() {
            for (l, cell) in row.iter_mut().enumerate() {
                *cell = self.label_prob(r == 1, l == 1).ln();
            }
        }
        t
    }
}

/// Observed (context, label) pairs in presentation order.
#[derive(Debug, Clone, Default)]
pub struct Evidence {
    pub items: Vec<(Context, bool)>,
}

impl Evidence {
    pub fn push(&mut self, ctx: Context, label: bool) {
        self.items.push((ctx, label));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn log_likelihood(h: &Concept, ev: &Evidence, noise: NoiseParams) -> f64 {
    ev.items
        .iter()
        .map(|(ctx, label)| noise.label_prob(dsl::eval(h, ctx), *label).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub concept: Concept,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub log_posterior: f64,
}

/// Weighted hypothesis set; `log_posterior = log_prior + log_likelihood - log_z`.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    pub hypotheses: Vec<Hypothesis>,
    pub log_z: f64,
}

impl PosteriorState {
    pub fn from_prior(prior: Vec<(Concept, f64)>) -> PosteriorState {
        let hypotheses = prior
            .into_iter()
            .map(|(concept, log_prior)| Hypothesis { concept, log_prior, log_likelihood: 0.0, log_posterior: log_prior })
            .collect();
        let mut s = PosteriorState { hypotheses, log_z: 0.0 };
        s.normalize();
        s
    }

    /// Prior state conditioned on `ev` in one batch.
    pub fn from_evidence(prior: Vec<(Concept, f64)>, ev: &Evidence, noise: NoiseParams) -> PosteriorState {
        let mut s = PosteriorState::from_prior(prior);
        for h in &mut s.hypotheses {
            h.log_likelihood = log_likelihood(&h.concept, ev, noise);
        }
        s.normalize();
        s
    }

    /// Empirical state from sample counts.
    pub fn from_counts(entries: Vec<(Concept, f64, f64, usize)>) -> PosteriorState {
        let total: usize = entries.iter().map(|e| e.3).sum();
        let hypotheses = entries
            .into_iter()
            .map(|(concept, log_prior, log_likelihood, n)| Hypothesis {
                concept,
                log_prior,
                log_likelihood,
                log_posterior: (n as f64 / total as f64).ln(),
            })
            .collect();
        PosteriorState { hypotheses, log_z: 0.0 }
    }

    /// Incorporates one labeled object.
    pub fn observe(&mut self, ctx: &Context, label: bool, noise: NoiseParams) {
        for h in &mut self.hypotheses {
            h.log_likelihood += noise.label_prob(dsl::eval(&h.concept, ctx), label).ln();
        }
        self.normalize();
    }

    pub fn normalize(&mut self) {
        let log_z = self
            .hypotheses
            .iter()
            .fold(f64::NEG_INFINITY, |acc, h| log_add(acc, h.log_prior + h.log_likelihood));
        for h in &mut self.hypotheses {
            h.log_posterior = h.log_prior + h.log_likelihood - log_z;
        }
        self.log_z = log_z;
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.hypotheses.iter().map(|h| h.log_posterior.exp())
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

/// Probability of a True label: sum over hypotheses of
/// `P(h | ev) * (alpha * [h(ctx)] + (1 - alpha) * beta)`.
pub fn posterior_predictive(state: &PosteriorState, ctx: &Context, noise: NoiseParams) -> f64 {
    let mass_true: f64 = state
        .hypotheses
        .iter()
        .filter(|h| dsl::eval(&h.concept, ctx))
        .map(|h| h.log_posterior.exp())
        .sum();
    predictive_from_mass(mass_true, noise)
}

#[inline]
pub(crate) fn predictive_from_mass(mass_true: f64, noise: NoiseParams) -> f64 {
    (noise.alpha * mass_true.min(1.0) + (1.0 - noise.alpha) * noise.beta).clamp(0.0, 1.0)
}

/// True iff the predictive probability exceeds one half; exactly 0.5 is False.
pub fn classify_probability(p: f64) -> bool {
    p > 0.5
}

pub fn classify(state: &PosteriorState, ctx: &Context, noise: NoiseParams) -> bool {
    classify_probability(posterior_predictive(state, ctx, noise))
}

/// Highest-posterior hypothesis; ties go to the smaller concept, then the
/// lexicographically smaller printed form.
pub fn map_rule<'a>(state: &'a PosteriorState, vocab: &FeatureVocab) -> Result<&'a Concept, PlotError> {
    state
        .hypotheses
        .iter()
        .max_by(|a, b| {
            a.log_posterior
                .partial_cmp(&b.log_posterior)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.concept.size().cmp(&a.concept.size()))
                .then_with(|| b.concept.to_source(vocab).cmp(&a.concept.to_source(vocab)))
        })
        .map(|h| &h.concept)
        .ok_or(PlotError::EmptyState)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, Obj};

    fn v() -> FeatureVocab {
        FeatureVocab::example()
    }

    fn c(src: &str) -> Concept {
        parse(src, &v()).unwrap()
    }

    fn single(desc: &str) -> Context {
        Context::new(vec![v().parse_object(desc).unwrap()], 0).unwrap()
    }

    fn ev(items: &[(&str, bool)]) -> Evidence {
        Evidence { items: items.iter().map(|(d, l)| (single(d), *l)).collect() }
    }

    #[test]
    fn likelihood_closed_forms() {
        let e = ev(&[("small blue circle", true), ("small green circle", false), ("large blue triangle", true)]);
        assert_eq!(log_likelihood(&c("blue"), &e, NoiseParams::new(1.0, 0.5).unwrap()), 0.0);
        let beta = 0.3;
        let ll = log_likelihood(&c("circle"), &e, NoiseParams::new(0.0, beta).unwrap());
        assert!((ll - (2.0 * beta.ln() + (1.0 - beta).ln())).abs() < 1e-12);
        let n = NoiseParams::new(0.75, 0.5).unwrap();
        let agree = log_likelihood(&c("blue"), &ev(&[("small blue circle", true)]), n);
        let disagree = log_likelihood(&c("green"), &ev(&[("small blue circle", true)]), n);
        assert!((agree - 0.875f64.ln()).abs() < 1e-12);
        assert!((disagree - 0.125f64.ln()).abs() < 1e-12);
        assert_eq!(log_likelihood(&c("circle"), &e, NoiseParams::new(1.0, 0.5).unwrap()), f64::NEG_INFINITY);
    }

    #[test]
    fn predictive_closed_forms() {
        let ctx = single("small blue circle");
        let s = PosteriorState::from_prior(vec![(c("blue"), 0.0)]);
        assert_eq!(posterior_predictive(&s, &ctx, NoiseParams::new(1.0, 0.5).unwrap()), 1.0);
        let two = PosteriorState::from_prior(vec![(c("blue"), 0.5f64.ln()), (c("green"), 0.5f64.ln())]);
        assert!((posterior_predictive(&two, &ctx, NoiseParams::new(1.0, 0.2).unwrap()) - 0.5).abs() < 1e-12);
        assert_eq!(posterior_predictive(&two, &ctx, NoiseParams::new(0.0, 0.37).unwrap()), 0.37);
    }

    #[test]
    fn classification_threshold() {
        assert!(classify_probability(0.9));
        assert!(!classify_probability(0.5));
        assert!(!classify_probability(0.49));
        let two = PosteriorState::from_prior(vec![(c("blue"), 0.0), (c("green"), 0.0)]);
        assert!(!classify(&two, &single("small blue circle"), NoiseParams::new(1.0, 0.5).unwrap()));
    }

    #[test]
    fn map_rule_choices() {
        let one = PosteriorState::from_prior(vec![(c("blue"), 0.0)]);
        assert_eq!(map_rule(&one, &v()).unwrap(), &c("blue"));
        let e = ev(&[("small blue triangle", true)]);
        let n = NoiseParams::new(1.0, 0.5).unwrap();
        let s = PosteriorState::from_evidence(vec![(c("blue"), 0.0), (c("circle"), 0.0)], &e, n);
        assert_eq!(map_rule(&s, &v()).unwrap(), &c("blue"));
        let tie = PosteriorState::from_prior(vec![(c("(or blue circle)"), 0.0), (c("blue"), 0.0)]);
        assert_eq!(map_rule(&tie, &v()).unwrap(), &c("blue"));
        let lex = PosteriorState::from_prior(vec![(c("green"), 0.0), (c("blue"), 0.0)]);
        assert_eq!(map_rule(&lex, &v()).unwrap(), &c("blue"));
        assert!(matches!(map_rule(&PosteriorState::from_prior(vec![]), &v()), Err(PlotError::EmptyState)));
    }

    #[test]
    fn incremental_matches_batch() {
        let prior = vec![(c("blue"), -1.0), (c("circle"), -2.0), (c("(or blue circle)"), -3.0)];
        let e = ev(&[("small blue triangle", true), ("large green circle", false), ("medium yellow rectangle", false)]);
        let n = NoiseParams::new(0.8, 0.4).unwrap();
        let batch = PosteriorState::from_evidence(prior.clone(), &e, n);
        let mut inc = PosteriorState::from_prior(prior);
        for (ctx, l) in &e.items {
            inc.observe(ctx, *l, n);
            assert!((inc.weights().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for (a, b) in inc.hypotheses.iter().zip(&batch.hypotheses) {
            assert!((a.log_posterior - b.log_posterior).abs() < 1e-9);
        }
    }

    #[test]
    fn inconsistent_hypotheses_stay_dead() {
        let mut s = PosteriorState::from_prior(vec![(c("blue"), 0.0), (c("circle"), 0.0)]);
        let n = NoiseParams::new(1.0, 0.5).unwrap();
        s.observe(&single("small blue triangle"), true, n);
        assert_eq!(s.hypotheses[1].log_posterior, f64::NEG_INFINITY);
        s.observe(&Context::new(vec![Obj::new(0, 1, 0)], 0).unwrap(), false, n);
        assert_eq!(s.hypotheses[1].log_posterior, f64::NEG_INFINITY);
    }

    #[test]
    fn noise_bounds_are_checked() {
        assert!(NoiseParams::new(1.1, 0.5).is_err());
        assert!(NoiseParams::new(0.5, -0.1).is_err());
    }
}
