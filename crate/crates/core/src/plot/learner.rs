//! Runs the learner over exemplar lists: predictions for each set are made
//! from the posterior over all previous sets, then the set's gold labels are
//! revealed.

use super::grammar::{log_add, Grammar};
use super::posterior::{classify_probability, predictive_from_mass, NoiseParams};
use super::PlotError;
use crate::dsl::{self, Concept, FeatureVocab};
use crate::exemplar::ExemplarList;
use crate::metrics::{LabelRecord, LabelSeries};

/// Enumerated hypotheses with their prior log-probabilities.
#[derive(Debug, Clone)]
pub struct HypothesisSpace {
    pub concepts: Vec<Concept>,
    pub log_prior: Vec<f64>,
}

impl HypothesisSpace {
    pub fn enumerate(grammar: &Grammar, max_size: usize, cap: usize) -> Result<Self, PlotError> {
        let (concepts, log_prior) = grammar.enumerate(max_size, cap)?.into_iter().unzip();
        Ok(HypothesisSpace { concepts, log_prior })
    }

    pub fn from_pairs(pairs: Vec<(Concept, f64)>) -> Self {
        let (concepts, log_prior) = pairs.into_iter().unzip();
        HypothesisSpace { concepts, log_prior }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }
}

/// Every hypothesis evaluated on every object of one list.
#[derive(Debug, Clone)]
pub struct CompiledList {
    /// Object index ranges per set.
    pub set_bounds: Vec<(usize, usize)>,
    pub gold: Vec<bool>,
    words: usize,
    truth: Vec<u64>,
    n_hypotheses: usize,
}

impl CompiledList {
    pub fn new(space: &HypothesisSpace, list: &ExemplarList) -> CompiledList {
        let items: Vec<_> = list.items().collect();
        let n = items.len();
        let words = n.div_ceil(64).max(1);
        let row = |c: &Concept| {
            let mut bits = vec![0u64; words];
            for (i, it) in items.iter().enumerate() {
                if dsl::eval(c, &it.context) {
                    bits[i / 64] |= 1 << (i % 64);
                }
            }
            bits
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<Vec<u64>> = {
            use rayon::prelude::*;
            space.concepts.par_iter().map(row).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Vec<u64>> = space.concepts.iter().map(row).collect();

        let mut set_bounds = Vec::with_capacity(list.sets.len());
        let mut start = 0;
        for s in &list.sets {
            set_bounds.push((start, start + s.len()));
            start += s.len();
        }
        CompiledList {
            set_bounds,
            gold: items.iter().map(|i| i.label).collect(),
            words,
            truth: rows.concat(),
            n_hypotheses: space.len(),
        }
    }

    #[inline]
    pub fn holds(&self, h: usize, object: usize) -> bool {
        self.truth[h * self.words + object / 64] >> (object % 64) & 1 == 1
    }

    pub fn n_objects(&self) -> usize {
        self.gold.len()
    }
}

/// Output of one pass over a list.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Predictive P(True) per object in presentation order.
    pub p_true: Vec<f64>,
    /// MAP hypothesis index in force while labeling each set.
    pub map_before_set: Vec<usize>,
    /// MAP hypothesis index after every label is revealed.
    pub final_map: usize,
    /// Top hypotheses (index, log-likelihood, log-posterior) after each timestep;
    /// timestep t has seen t sets. Empty unless requested.
    pub dumps: Vec<Vec<(usize, f64, f64)>>,
}

fn log_normalizer(log_prior: &[f64], log_lik: &[f64]) -> f64 {
    log_prior.iter().zip(log_lik).fold(f64::NEG_INFINITY, |acc, (p, l)| log_add(acc, p + l))
}

fn posterior_weight(log_prior: f64, log_lik: f64, log_z: f64) -> f64 {
    if log_z == f64::NEG_INFINITY {
        0.0
    } else {
        (log_prior + log_lik - log_z).exp()
    }
}

fn map_index(space: &HypothesisSpace, log_lik: &[f64], vocab: &FeatureVocab) -> usize {
    let score = |i: usize| space.log_prior[i] + log_lik[i];
    let best = (0..space.len()).map(score).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<usize> = (0..space.len()).filter(|&i| score(i) == best).collect();
    if tied.len() > 1 {
        tied.sort_by_cached_key(|&i| (space.concepts[i].size(), space.concepts[i].to_source(vocab)));
    }
    tied[0]
}

/// Runs the learner over a compiled list.
pub fn run_compiled(
    space: &HypothesisSpace,
    compiled: &CompiledList,
    noise: NoiseParams,
    vocab: &FeatureVocab,
    dump_top: usize,
) -> Result<Trajectory, PlotError> {
    if space.is_empty() {
        return Err(PlotError::EmptyState);
    }
    assert_eq!(space.len(), compiled.n_hypotheses);
    let table = noise.log_table();
    let mut log_lik = vec![0.0; space.len()];
    let mut weights = vec![0.0; space.len()];
    let mut p_true = Vec::with_capacity(compiled.n_objects());
    let mut map_before_set = Vec::with_capacity(compiled.set_bounds.len());
    let mut dumps = Vec::new();

    let dump = |log_lik: &[f64], log_z: f64, dumps: &mut Vec<Vec<(usize, f64, f64)>>| {
        if dump_top == 0 {
            return;
        }
        let mut idx: Vec<usize> = (0..space.len()).collect();
        let post = |i: usize| space.log_prior[i] + log_lik[i] - log_z;
        idx.sort_by(|&a, &b| post(b).total_cmp(&post(a)).then(a.cmp(&b)));
        idx.truncate(dump_top);
        dumps.push(idx.into_iter().map(|i| (i, log_lik[i], post(i))).collect());
    };

    for &(start, end) in &compiled.set_bounds {
        let log_z = log_normalizer(&space.log_prior, &log_lik);
        dump(&log_lik, log_z, &mut dumps);
        for (w, (p, l)) in weights.iter_mut().zip(space.log_prior.iter().zip(&log_lik)) {
            *w = posterior_weight(*p, *l, log_z);
        }
        map_before_set.push(map_index(space, &log_lik, vocab));
        for o in start..end {
            let mass: f64 = weights.iter().enumerate().filter(|(h, _)| compiled.holds(*h, o)).map(|(_, w)| w).sum();
            p_true.push(predictive_from_mass(mass, noise));
        }
        for o in start..end {
            let label = compiled.gold[o] as usize;
            for (h, ll) in log_lik.iter_mut().enumerate() {
                *ll += table[compiled.holds(h, o) as usize][label];
            }
        }
    }
    let log_z = log_normalizer(&space.log_prior, &log_lik);
    dump(&log_lik, log_z, &mut dumps);
    Ok(Trajectory { p_true, map_before_set, final_map: map_index(space, &log_lik, vocab), dumps })
}

/// Predictive P(True) per object only; the inner loop of noise fitting.
pub fn predictive(space: &HypothesisSpace, compiled: &CompiledList, noise: NoiseParams) -> Vec<f64> {
    let table = noise.log_table();
    let mut log_lik = vec![0.0; space.len()];
    let mut out = Vec::with_capacity(compiled.n_objects());
    for &(start, end) in &compiled.set_bounds {
        let log_z = log_normalizer(&space.log_prior, &log_lik);
        let weights: Vec<f64> = space.log_prior.iter().zip(&log_lik).map(|(p, l)| posterior_weight(*p, *l, log_z)).collect();
        for o in start..end {
            let mass: f64 = weights.iter().enumerate().filter(|(h, _)| compiled.holds(*h, o)).map(|(_, w)| w).sum();
            out.push(predictive_from_mass(mass, noise));
        }
        for o in start..end {
            let label = compiled.gold[o] as usize;
            for (h, ll) in log_lik.iter_mut().enumerate() {
                *ll += table[compiled.holds(h, o) as usize][label];
            }
        }
    }
    out
}

/// Everything the learner produced on one list.
#[derive(Debug, Clone)]
pub struct LearnerRun {
    pub series: LabelSeries,
    pub map_rules: Vec<Concept>,
    pub final_rule: Concept,
    pub trajectory: Trajectory,
}

pub fn run_list(
    space: &HypothesisSpace,
    list: &ExemplarList,
    noise: NoiseParams,
    dump_top: usize,
) -> Result<LearnerRun, PlotError> {
    let compiled = CompiledList::new(space, list);
    let traj = run_compiled(space, &compiled, noise, &list.vocab, dump_top)?;
    let records = list
        .items()
        .zip(&traj.p_true)
        .map(|(it, &p)| LabelRecord {
            set_index: it.set_index,
            object_index: it.object_index,
            gold: it.label,
            model: Some(classify_probability(p)),
            p_true: Some(p),
            human: None,
        })
        .collect();
    Ok(LearnerRun {
        series: LabelSeries { rule_id: list.rule_id.clone(), learner: "plot".into(), records },
        map_rules: traj.map_before_set.iter().map(|&i| space.concepts[i].clone()).collect(),
        final_rule: space.concepts[traj.final_map].clone(),
        trajectory: traj,
    })
}

/// CSV of the per-timestep posterior dumps.
pub fn dump_csv(space: &HypothesisSpace, traj: &Trajectory, vocab: &FeatureVocab) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestep", "concept", "log_prior", "log_likelihood", "log_posterior"]).unwrap();
    for (t, rows) in traj.dumps.iter().enumerate() {
        for &(i, ll, lp) in rows {
            w.write_record([
                t.to_string(),
                space.concepts[i].to_source(vocab),
                format!("{:.12}", space.log_prior[i]),
                format!("{ll:.12}"),
                format!("{lp:.12}"),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::exemplar::generate_list;
    use crate::metrics::{accuracy, Window};
    use crate::plot::posterior::{posterior_predictive, Evidence, PosteriorState};

    fn v() -> FeatureVocab {
        FeatureVocab::example()
    }

    fn small_space() -> HypothesisSpace {
        let g = Grammar::from_json(
            r#"{"start":"S","productions":[
                {"nonterminal":"S","template":"blue","weight":1},
                {"nonterminal":"S","template":"circle","weight":1},
                {"nonterminal":"S","template":"small","weight":1},
                {"nonterminal":"S","template":"(not S)","weight":1},
                {"nonterminal":"S","template":"(or S S)","weight":1}]}"#,
            &v(),
        )
        .unwrap();
        HypothesisSpace::enumerate(&g, 3, 10_000).unwrap()
    }

    #[test]
    fn fast_path_matches_reference_posterior() {
        let space = small_space();
        let list = generate_list("r", &parse("(or blue circle)", &v()).unwrap(), &v(), 4, 6);
        let noise = NoiseParams::new(0.9, 0.4).unwrap();
        let run = run_list(&space, &list, noise, 0).unwrap();
        let pairs: Vec<(Concept, f64)> = space.concepts.iter().cloned().zip(space.log_prior.iter().copied()).collect();
        let mut ev = Evidence::default();
        let mut k = 0;
        for set in &list.sets {
            let state = PosteriorState::from_evidence(pairs.clone(), &ev, noise);
            for t in 0..set.len() {
                let p = posterior_predictive(&state, &set.context(t), noise);
                assert!((p - run.trajectory.p_true[k]).abs() < 1e-9);
                k += 1;
            }
            for t in 0..set.len() {
                ev.push(set.context(t), set.labels[t]);
            }
        }
    }

    #[test]
    fn learns_a_feature_rule() {
        let space = small_space();
        let list = generate_list("blue", &parse("blue", &v()).unwrap(), &v(), 1, 25);
        let run = run_list(&space, &list, NoiseParams::new(0.99, 0.5).unwrap(), 3).unwrap();
        assert!(accuracy(&run.series, Window::LastQuarter).unwrap() >= 0.95);
        assert_eq!(run.final_rule, parse("blue", &v()).unwrap());
        assert_eq!(run.trajectory.dumps.len(), 26);
        let csv = dump_csv(&space, &run.trajectory, &v());
        assert_eq!(csv.lines().count(), 1 + 26 * 3);
    }
}
