//! Accuracy windows, human-fit statistics, rule grading and cohort summaries.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{self, Concept, Context, DslError};
use crate::exemplar::ExemplarList;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no attempted labels in the {0:?} window")]
    EmptyWindow(Window),
    #[error("vectors have different lengths ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least two paired values, got {0}")]
    TooFew(usize),
    #[error("zero variance in the {0} vector")]
    ZeroVariance(&'static str),
    #[error("model assigns zero probability where the target does not (object {0})")]
    InfiniteLoss(usize),
    #[error("distribution {0:?} is not a probability distribution over two labels")]
    BadDistribution([f64; 2]),
    #[error("label series out of order at record {0}")]
    Order(usize),
    #[error("probability out of range at record {0}")]
    Probability(usize),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard deviation with the n - 1 denominator.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return (xs.len() == 1).then_some(0.0);
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Quantile by linear interpolation between order statistics (`h = (n-1)p`).
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// One labeled object as seen by a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub set_index: usize,
    pub object_index: usize,
    pub gold: bool,
    /// `None` when the label was excluded.
    pub model: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<f64>,
}

impl LabelRecord {
    pub fn correct(&self) -> Option<bool> {
        self.model.map(|m| m == self.gold)
    }
}

/// A learner's labels on one exemplar list in presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub rule_id: String,
    pub learner: String,
    pub records: Vec<LabelRecord>,
}

impl LabelSeries {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for (i, r) in self.records.iter().enumerate() {
            if i > 0 {
                let p = &self.records[i - 1];
                if (r.set_index, r.object_index) <= (p.set_index, p.object_index) {
                    return Err(MetricsError::Order(i));
                }
            }
            let bad = |x: Option<f64>| x.is_some_and(|v| !(0.0..=1.0).contains(&v));
            if bad(r.p_true) || bad(r.human) {
                return Err(MetricsError::Probability(i));
            }
        }
        Ok(())
    }

    pub fn n_sets(&self) -> usize {
        self.records.last().map_or(0, |r| r.set_index + 1)
    }

    /// Drops every record from set `n_sets` on.
    pub fn truncated(&self, n_sets: usize) -> LabelSeries {
        LabelSeries {
            rule_id: self.rule_id.clone(),
            learner: self.learner.clone(),
            records: self.records.iter().filter(|r| r.set_index < n_sets).cloned().collect(),
        }
    }

    pub fn excluded(&self) -> usize {
        self.records.iter().filter(|r| r.model.is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Overall,
    LastQuarter,
}

/// Number of objects in the last-quarter window of an `n`-object list.
pub fn last_quarter_len(n: usize) -> usize {
    n.div_ceil(4)
}

/// Correct over attempted, within the window. The last-quarter window is the
/// final ceil(N/4) objects of the series; exclusions are dropped after windowing.
pub fn accuracy(series: &LabelSeries, window: Window) -> Result<f64, MetricsError> {
    let recs = &series.records;
    let start = match window {
        Window::Overall => 0,
        Window::LastQuarter => recs.len() - last_quarter_len(recs.len()),
    };
    let (hit, n) = recs[start..]
        .iter()
        .filter_map(LabelRecord::correct)
        .fold((0usize, 0usize), |(h, n), c| (h + c as usize, n + 1));
    if n == 0 {
        return Err(MetricsError::EmptyWindow(window));
    }
    Ok(hit as f64 / n as f64)
}

/// Per-set accuracy with the number of attempted labels; `None` for sets with
/// everything excluded.
pub fn per_set_accuracy(series: &LabelSeries) -> Vec<(Option<f64>, usize)> {
    let mut out = vec![(0usize, 0usize); series.n_sets()];
    for r in &series.records {
        if let Some(c) = r.correct() {
            out[r.set_index].0 += c as usize;
            out[r.set_index].1 += 1;
        }
    }
    out.into_iter().map(|(h, n)| ((n > 0).then(|| h as f64 / n as f64), n)).collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::Length(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFew(x.len()));
    }
    let mx = mean(x).unwrap();
    let my = mean(y).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ZeroVariance("model"));
    }
    if syy == 0.0 {
        return Err(MetricsError::ZeroVariance("human"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RSquared {
    pub r: f64,
    pub r2: f64,
    pub n: usize,
}

/// Squared Pearson correlation over pairs with a human value; the signed r is
/// reported alongside.
pub fn r_squared(model: &[f64], human: &[Option<f64>]) -> Result<RSquared, MetricsError> {
    if model.len() != human.len() {
        return Err(MetricsError::Length(model.len(), human.len()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) =
        model.iter().zip(human).filter_map(|(m, h)| h.map(|h| (*m, h))).unzip();
    let r = pearson(&x, &y)?;
    Ok(RSquared { r, r2: r * r, n: x.len() })
}

/// R² pooled over every record of every series carrying both a model
/// probability and a human proportion.
pub fn pooled_r_squared<'a>(series: impl IntoIterator<Item = &'a LabelSeries>) -> Result<RSquared, MetricsError> {
    let (mut m, mut h) = (Vec::new(), Vec::new());
    for s in series {
        for r in &s.records {
            if let (Some(p), Some(q)) = (r.p_true, r.human) {
                m.push(p);
                h.push(Some(q));
            }
        }
    }
    r_squared(&m, &h)
}

/// Exact agreement count of a rule with observed labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub agree: usize,
    pub total: usize,
}

impl Agreement {
    pub fn fraction(self) -> f64 {
        if self.total == 0 { f64::NAN } else { self.agree as f64 / self.total as f64 }
    }

    pub fn is_perfect(self) -> bool {
        self.total > 0 && self.agree == self.total
    }
}

pub fn rule_agreement<'a>(c: &Concept, evidence: impl IntoIterator<Item = (&'a Context, bool)>) -> Agreement {
    let mut a = Agreement { agree: 0, total: 0 };
    for (ctx, label) in evidence {
        a.total += 1;
        a.agree += (dsl::eval(c, ctx) == label) as usize;
    }
    a
}

/// Fraction of previously seen gold labels that `c` reproduces.
pub fn rule_likelihood<'a>(c: &Concept, evidence: impl IntoIterator<Item = (&'a Context, bool)>) -> f64 {
    rule_agreement(c, evidence).fraction()
}

/// Likelihood of `c` on the first `seen_sets` sets of `list`.
pub fn list_likelihood(c: &Concept, list: &ExemplarList, seen_sets: usize) -> Agreement {
    let items: Vec<_> = list.items().filter(|i| i.set_index < seen_sets).collect();
    rule_agreement(c, items.iter().map(|i| (&i.context, i.label)))
}

/// One emitted label with the rule reported at the same set.
#[derive(Debug, Clone)]
pub struct ReportedLabel<'a> {
    pub reported: &'a Concept,
    pub context: Context,
    pub label: bool,
}

/// Fraction of emitted labels that the concurrently reported rule reproduces.
pub fn consistency(labels: &[ReportedLabel<'_>]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let ok = labels.iter().filter(|l| dsl::eval(l.reported, &l.context) == l.label).count();
    ok as f64 / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleMatch {
    pub rule_id: String,
    pub likelihood: Option<Agreement>,
    pub likelihood_match: bool,
    pub equivalent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub rules: Vec<RuleMatch>,
    pub likelihood_rate: f64,
    pub equivalence_rate: f64,
}

/// Match verdicts for each rule's final concept (`None` = unparseable / missing,
/// graded as no match). Likelihood match uses exact integer counts over the whole
/// list; the equivalence criterion checks every context up to `max_set_size`.
pub fn match_rate(finals: &[(Option<&Concept>, &ExemplarList)], max_set_size: usize) -> Result<MatchReport, MetricsError> {
    let mut rules = Vec::with_capacity(finals.len());
    for (c, list) in finals {
        let m = match c {
            Some(c) => {
                let lk = list_likelihood(c, list, list.sets.len());
                let eq = dsl::equivalent(c, &list.concept, &list.vocab, max_set_size)?;
                RuleMatch {
                    rule_id: list.rule_id.clone(),
                    likelihood: Some(lk),
                    likelihood_match: lk.is_perfect(),
                    equivalent: Some(eq),
                }
            }
            None => RuleMatch { rule_id: list.rule_id.clone(), likelihood: None, likelihood_match: false, equivalent: None },
        };
        rules.push(m);
    }
    let n = rules.len();
    let rate = |k: usize| if n == 0 { f64::NAN } else { k as f64 / n as f64 };
    let lk = rules.iter().filter(|r| r.likelihood_match).count();
    let eq = rules.iter().filter(|r| r.equivalent == Some(true)).count();
    Ok(MatchReport { rules, likelihood_rate: rate(lk), equivalence_rate: rate(eq) })
}

/// Expected accuracy of guessing True at rate `p` on a list whose True rate is `p`.
/// Evaluated as `0.5 + 2(p - 0.5)^2`, the same polynomial as `p^2 + (1-p)^2`.
pub fn chance_baseline(p: f64) -> f64 {
    let d = p - 0.5;
    0.5 + 2.0 * d * d
}

fn check_dist(d: [f64; 2]) -> Result<(), MetricsError> {
    if d.iter().any(|x| !(0.0..=1.0).contains(x)) || (d[0] + d[1] - 1.0).abs() > 1e-9 {
        return Err(MetricsError::BadDistribution(d));
    }
    Ok(())
}

/// `-sum_t P(t) ln Q(t)` over t in {True, False}; distributions are `[P(True), P(False)]`.
pub fn cross_entropy(target: [f64; 2], model: [f64; 2]) -> Result<f64, MetricsError> {
    cross_entropy_series(&[(target, model)])
}

/// Cross-entropy summed over objects.
pub fn cross_entropy_series(pairs: &[([f64; 2], [f64; 2])]) -> Result<f64, MetricsError> {
    let mut loss = 0.0;
    for (i, (p, q)) in pairs.iter().enumerate() {
        check_dist(*p)?;
        check_dist(*q)?;
        for t in 0..2 {
            if p[t] > 0.0 {
                if q[t] == 0.0 {
                    return Err(MetricsError::InfiniteLoss(i));
                }
                loss -= p[t] * q[t].ln();
            }
        }
    }
    Ok(loss)
}

/// Training target for one object: human True proportion and its complement.
pub fn human_target(proportion_true: f64) -> [f64; 2] {
    [proportion_true, 1.0 - proportion_true]
}

/// Percentiles of a cohort's accuracies on one rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bands {
    pub median: f64,
    pub q75: f64,
    pub p25: f64,
    pub p20: f64,
    pub p10: f64,
    pub p1: f64,
}

impl Bands {
    pub fn of(values: &[f64]) -> Option<Bands> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Bands {
            median: quantile(&v, 0.5)?,
            q75: quantile(&v, 0.75)?,
            p25: quantile(&v, 0.25)?,
            p20: quantile(&v, 0.20)?,
            p10: quantile(&v, 0.10)?,
            p1: quantile(&v, 0.01)?,
        })
    }

    /// Lowest percentile band (25, 20, 10, 1) that `x` falls below.
    pub fn below(&self, x: f64) -> Option<u8> {
        [(1u8, self.p1), (10, self.p10), (20, self.p20), (25, self.p25)]
            .into_iter()
            .find(|(_, b)| x < *b)
            .map(|(p, _)| p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleDelta {
    pub rule_id: String,
    pub bands: Bands,
    pub model: f64,
    pub delta: f64,
    pub below_percentile: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleBaseline {
    /// One drawn participant score per rule (first draw), aligned with `CohortReport::rows`.
    pub scores: Vec<f64>,
    /// Mean over draws of the mean absolute deviation of the drawn score from the rule median.
    pub mean_abs_deviation: f64,
    pub sd_abs_deviation: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    /// Sorted by `delta`, descending.
    pub rows: Vec<RuleDelta>,
    pub subsample: Option<SubsampleBaseline>,
}

/// Compares a model's per-rule score to the human distribution on each rule.
/// Rules missing either side are skipped.
pub fn cohort_report(
    humans: &BTreeMap<String, Vec<f64>>,
    model: &BTreeMap<String, f64>,
    draws: usize,
    seed: u64,
) -> CohortReport {
    let mut rows: Vec<(RuleDelta, &Vec<f64>)> = humans
        .iter()
        .filter_map(|(rule, scores)| {
            let bands = Bands::of(scores)?;
            let m = *model.get(rule)?;
            Some((
                RuleDelta {
                    rule_id: rule.clone(),
                    bands,
                    model: m,
                    delta: m - bands.median,
                    below_percentile: bands.below(m),
                },
                scores,
            ))
        })
        .collect();
    rows.sort_by(|a, b| b.0.delta.total_cmp(&a.0.delta).then_with(|| a.0.rule_id.cmp(&b.0.rule_id)));

    let subsample = (draws > 0 && !rows.is_empty()).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut first = Vec::new();
        let mut devs = Vec::with_capacity(draws);
        for d in 0..draws {
            let mut total = 0.0;
            for (row, scores) in &rows {
                let pick = scores[rng.gen_range(0..scores.len())];
                if d == 0 {
                    first.push(pick);
                }
                total += (pick - row.bands.median).abs();
            }
            devs.push(total / rows.len() as f64);
        }
        SubsampleBaseline {
            scores: first,
            mean_abs_deviation: mean(&devs).unwrap(),
            sd_abs_deviation: sample_sd(&devs).unwrap(),
            draws,
        }
    });
    CohortReport { rows: rows.into_iter().map(|(r, _)| r).collect(), subsample }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub set_index: usize,
    pub mean_accuracy: f64,
    pub members: usize,
    pub bands: Option<Bands>,
}

/// Learning curve of one cohort on one rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub rule_id: String,
    pub cohort: String,
    pub chance_baseline: f64,
    pub points: Vec<TrajectoryPoint>,
}

/// Averages per-set accuracies across cohort members (subjects, or one model).
pub fn trajectory(rule_id: &str, cohort: &str, members: &[LabelSeries], true_rate: f64) -> TrajectoryReport {
    let per: Vec<Vec<(Option<f64>, usize)>> = members.iter().map(per_set_accuracy).collect();
    let n_sets = per.iter().map(Vec::len).max().unwrap_or(0);
    let points = (0..n_sets)
        .filter_map(|s| {
            let vals: Vec<f64> = per.iter().filter_map(|p| p.get(s).and_then(|x| x.0)).collect();
            let m = mean(&vals)?;
            Some(TrajectoryPoint {
                set_index: s,
                mean_accuracy: m,
                members: vals.len(),
                bands: (vals.len() > 1).then(|| Bands::of(&vals)).flatten(),
            })
        })
        .collect();
    TrajectoryReport {
        rule_id: rule_id.to_string(),
        cohort: cohort.to_string(),
        chance_baseline: chance_baseline(true_rate),
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(pairs: &[(bool, Option<bool>)]) -> LabelSeries {
        LabelSeries {
            rule_id: "r".into(),
            learner: "m".into(),
            records: pairs
                .iter()
                .enumerate()
                .map(|(i, (g, m))| LabelRecord {
                    set_index: i / 3,
                    object_index: i % 3,
                    gold: *g,
                    model: *m,
                    p_true: None,
                    human: None,
                })
                .collect(),
        }
    }

    #[test]
    fn last_quarter_uses_ceiling() {
        assert_eq!(last_quarter_len(75), 19);
        assert_eq!(last_quarter_len(4), 1);
        assert_eq!(last_quarter_len(1), 1);
        // 8 objects: last 2; the final two are wrong.
        let mut p = vec![(true, Some(true)); 6];
        p.extend([(true, Some(false)), (false, Some(true))]);
        let s = series(&p);
        assert_eq!(accuracy(&s, Window::LastQuarter).unwrap(), 0.0);
        assert_eq!(accuracy(&s, Window::Overall).unwrap(), 0.75);
    }

    #[test]
    fn perfect_and_fully_excluded_series() {
        let s = series(&[(true, Some(true)), (false, Some(false))]);
        assert_eq!(accuracy(&s, Window::Overall).unwrap(), 1.0);
        assert_eq!(accuracy(&s, Window::LastQuarter).unwrap(), 1.0);
        let e = series(&[(true, None), (false, None)]);
        assert_eq!(accuracy(&e, Window::Overall), Err(MetricsError::EmptyWindow(Window::Overall)));
    }

    #[test]
    fn window_before_exclusion() {
        // 4 objects, window of 1 = the excluded final object.
        let s = series(&[(true, Some(true)), (true, Some(true)), (true, Some(true)), (true, None)]);
        assert!(accuracy(&s, Window::LastQuarter).is_err());
    }

    #[test]
    fn r_squared_examples() {
        let h = [0.1, 0.5, 0.9];
        let same = r_squared(&h, &h.map(Some)).unwrap();
        assert!((same.r2 - 1.0).abs() < 1e-12);
        let anti = r_squared(&h.map(|x| 1.0 - x), &h.map(Some)).unwrap();
        assert!((anti.r2 - 1.0).abs() < 1e-12 && anti.r < 0.0);
        let x = [0.1, 0.5, 0.9];
        let y = [Some(0.2), Some(0.4), Some(0.9)];
        assert!((r_squared(&x, &y).unwrap().r2 - 0.942_307_692_307_692_3).abs() < 1e-12);
        assert!(matches!(r_squared(&[0.5, 0.5], &[Some(0.1), Some(0.2)]), Err(MetricsError::ZeroVariance(_))));
        let dropped = r_squared(&[0.1, 0.5, 0.9, 0.3], &[Some(0.2), Some(0.4), Some(0.9), None]).unwrap();
        assert_eq!(dropped.n, 3);
    }

    #[test]
    fn chance_baseline_values() {
        assert_eq!(chance_baseline(0.5), 0.5);
        assert_eq!(chance_baseline(0.8), 0.68);
        assert_eq!(chance_baseline(1.0), 1.0);
    }

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy([1.0, 0.0], [1.0, 0.0]).unwrap(), 0.0);
        assert!((cross_entropy([0.5, 0.5], [0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((cross_entropy([1.0, 0.0], [0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(cross_entropy([0.5, 0.5], [1.0, 0.0]), Err(MetricsError::InfiniteLoss(0)));
        assert!(cross_entropy([0.7, 0.7], [0.5, 0.5]).is_err());
        let total = cross_entropy_series(&[([1.0, 0.0], [0.5, 0.5]), (human_target(0.5), [0.5, 0.5])]).unwrap();
        assert!((total - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn interpolated_quantiles() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert!((quantile(&v, 0.25).unwrap() - 0.325).abs() < 1e-12);
        assert!((quantile(&v, 0.5).unwrap() - 0.55).abs() < 1e-12);
        assert_eq!(quantile(&[0.4], 0.01), Some(0.4));
    }

    #[test]
    fn cohort_ordering_and_collapse() {
        let mut humans = BTreeMap::new();
        humans.insert("a".to_string(), vec![0.5]);
        humans.insert("b".to_string(), vec![0.2, 0.4, 0.6]);
        let mut model = BTreeMap::new();
        model.insert("a".to_string(), 0.5);
        model.insert("b".to_string(), 0.9);
        let rep = cohort_report(&humans, &model, 100, 1);
        assert_eq!(rep.rows[0].rule_id, "b");
        assert!(rep.rows[0].delta > 0.0);
        let a = &rep.rows[1].bands;
        assert_eq!((a.median, a.p25, a.p1, a.q75), (0.5, 0.5, 0.5, 0.5));
        assert_eq!(rep.rows[1].below_percentile, None);
        let sub = rep.subsample.unwrap();
        assert_eq!(sub.scores.len(), 2);
        assert_eq!(sub.draws, 100);
    }

    #[test]
    fn per_set_accuracy_is_consistent_with_overall() {
        let s = series(&[
            (true, Some(true)),
            (true, Some(false)),
            (false, None),
            (false, Some(false)),
            (true, Some(true)),
        ]);
        let per = per_set_accuracy(&s);
        let weighted: f64 = per.iter().map(|(a, n)| a.unwrap_or(0.0) * *n as f64).sum();
        let attempted: usize = per.iter().map(|(_, n)| n).sum();
        assert!((weighted / attempted as f64 - accuracy(&s, Window::Overall).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn series_validation() {
        let mut s = series(&[(true, Some(true)), (true, Some(true))]);
        s.validate().unwrap();
        s.records[1].object_index = 0;
        assert_eq!(s.validate(), Err(MetricsError::Order(1)));
        let mut p = series(&[(true, Some(true))]);
        p.records[0].p_true = Some(1.5);
        assert_eq!(p.validate(), Err(MetricsError::Probability(0)));
    }
}
