//! Metropolis-Hastings over derivation trees with subtree-regeneration
//! proposals.
//!
//! A proposal picks a derivation node uniformly and redraws its subtree from
//! the grammar, truncated so the whole tree stays within `max_size`. The
//! prior ratio and the truncation normalizers cancel against the proposal
//! densities, leaving `L'/L * N/N'` with `N` the node count.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grammar::{Derivation, Grammar};
use super::posterior::{log_likelihood, Evidence, NoiseParams, PosteriorState};
use super::PlotError;
use crate::dsl::Concept;

#[derive(Debug, Clone, Copy)]
pub struct MhOptions {
    pub max_size: usize,
    pub iterations: usize,
    /// Leading iterations left out of the empirical distribution.
    pub burn_in: usize,
    pub seed: u64,
}

impl MhOptions {
    pub fn new(max_size: usize, iterations: usize, seed: u64) -> Self {
        MhOptions { max_size, iterations, burn_in: iterations / 20, seed }
    }
}

struct Scored {
    concept: Concept,
    log_prior: f64,
    log_lik: f64,
}

pub fn mh_sample(grammar: &Grammar, ev: &Evidence, noise: NoiseParams, opts: MhOptions) -> Result<PosteriorState, PlotError> {
    if opts.iterations == 0 {
        return Err(PlotError::Grammar("iterations must be at least 1".into()));
    }
    let table = grammar.inside_table(opts.max_size);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cache: HashMap<Concept, f64> = HashMap::new();
    let score = |d: &Derivation, cache: &mut HashMap<Concept, f64>| {
        let concept = grammar.concept(d);
        let log_lik = *cache.entry(concept.clone()).or_insert_with(|| log_likelihood(&concept, ev, noise));
        Scored { concept, log_prior: grammar.log_prob(d), log_lik }
    };

    let mut current = grammar
        .sample(&table, grammar.start(), opts.max_size, &mut rng)
        .ok_or_else(|| PlotError::Grammar(format!("start symbol derives nothing within {} nodes", opts.max_size)))?;
    let mut cur = score(&current, &mut cache);
    let mut counts: HashMap<Concept, (f64, f64, usize)> = HashMap::new();

    for it in 0..opts.burn_in + opts.iterations {
        let n = current.node_count();
        let i = rng.gen_range(0..n);
        let node = current.node(i).expect("index within node count");
        let nt = grammar.productions()[node.production].nonterminal;
        let budget = opts.max_size - (grammar.derivation_size(&current) - grammar.derivation_size(node));
        let sub = grammar.sample(&table, nt, budget, &mut rng).expect("current subtree has positive mass");
        let mut proposal = current.clone();
        *proposal.node_mut(i).expect("same shape") = sub;
        let next = score(&proposal, &mut cache);

        let log_ratio = if cur.log_lik == f64::NEG_INFINITY {
            0.0
        } else {
            next.log_lik - cur.log_lik + (n as f64).ln() - (proposal.node_count() as f64).ln()
        };
        let u: f64 = rng.gen();
        if log_ratio >= 0.0 || u.ln() < log_ratio {
            current = proposal;
            cur = next;
        }
        if it >= opts.burn_in {
            counts.entry(cur.concept.clone()).or_insert((cur.log_prior, cur.log_lik, 0)).2 += 1;
        }
    }

    let mut entries: Vec<(Concept, f64, f64, usize)> = counts.into_iter().map(|(c, (lp, ll, k))| (c, lp, ll, k)).collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(PosteriorState::from_counts(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, FeatureVocab};
    use crate::exemplar::generate_list;
    use crate::plot::total_variation;

    fn v() -> FeatureVocab {
        FeatureVocab::example()
    }

    fn grammar() -> Grammar {
        Grammar::from_json(
            r#"{"start":"S","productions":[
                {"nonterminal":"S","template":"blue","weight":2},
                {"nonterminal":"S","template":"circle","weight":1},
                {"nonterminal":"S","template":"large","weight":1},
                {"nonterminal":"S","template":"(not S)","weight":1},
                {"nonterminal":"S","template":"(and S S)","weight":1}]}"#,
            &v(),
        )
        .unwrap()
    }

    fn evidence(rule: &str, sets: usize) -> Evidence {
        let list = generate_list("r", &parse(rule, &v()).unwrap(), &v(), 3, sets);
        let mut ev = Evidence::default();
        for it in list.items() {
            ev.push(it.context, it.label);
        }
        ev
    }

    #[test]
    fn same_seed_same_chain() {
        let g = grammar();
        let ev = evidence("blue", 3);
        let noise = NoiseParams::new(0.9, 0.5).unwrap();
        let a = mh_sample(&g, &ev, noise, MhOptions::new(4, 2000, 9)).unwrap();
        let b = mh_sample(&g, &ev, noise, MhOptions::new(4, 2000, 9)).unwrap();
        assert_eq!(a.hypotheses, b.hypotheses);
    }

    #[test]
    fn prior_is_recovered_without_evidence() {
        let g = grammar();
        let exact = PosteriorState::from_prior(g.enumerate(4, 1000).unwrap());
        assert!(exact.hypotheses.len() <= 50);
        let noise = NoiseParams::new(0.9, 0.5).unwrap();
        let mh = mh_sample(&g, &Evidence::default(), noise, MhOptions::new(4, 100_000, 1)).unwrap();
        assert!(total_variation(&exact, &mh) < 0.05);
    }

    #[test]
    fn posterior_matches_enumeration() {
        let g = grammar();
        let ev = evidence("(and blue (not circle))", 2);
        let noise = NoiseParams::new(0.8, 0.4).unwrap();
        let exact = PosteriorState::from_evidence(g.enumerate(5, 1000).unwrap(), &ev, noise);
        let mh = mh_sample(&g, &ev, noise, MhOptions::new(5, 100_000, 2)).unwrap();
        assert!(total_variation(&exact, &mh) < 0.05);
    }

    #[test]
    fn mode_is_the_only_consistent_rule() {
        let g = grammar();
        let ev = evidence("blue", 8);
        let noise = NoiseParams::new(1.0, 0.5).unwrap();
        let exact = PosteriorState::from_evidence(g.enumerate(3, 1000).unwrap(), &ev, noise);
        let mh = mh_sample(&g, &ev, noise, MhOptions::new(3, 20_000, 4)).unwrap();
        let mode = |s: &PosteriorState| {
            s.hypotheses.iter().max_by(|a, b| a.log_posterior.total_cmp(&b.log_posterior)).unwrap().concept.clone()
        };
        assert_eq!(mode(&exact), parse("blue", &v()).unwrap());
        assert_eq!(mode(&mh), mode(&exact));
    }
}
