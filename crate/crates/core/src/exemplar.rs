//! Exemplar lists, human response data and the subject preprocessing used to
//! build human baselines.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{self, Concept, Context, DslError, FeatureVocab, Obj, MAX_SET_SIZE};
use crate::fsutil;

pub const DEFAULT_SETS: usize = 25;
pub const MIN_COMPLETED_SETS: usize = 5;

#[derive(Debug, Error)]
pub enum ExemplarError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed exemplar list: {0}")]
    Format(String),
    #[error("stored label for set {set}, object {object} disagrees with the rule")]
    LabelMismatch { set: usize, object: usize },
    #[error("malformed human data: {0}")]
    HumanData(String),
    #[error("every subject for rule `{0}` was excluded")]
    EmptyPool(String),
    #[error("cannot hold out {held_out} of {total} rules")]
    HeldOut { held_out: usize, total: usize },
}

/// One displayed set with its gold label per object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    pub objects: Vec<Obj>,
    pub labels: Vec<bool>,
}

impl LabeledSet {
    pub fn context(&self, target: usize) -> Context {
        Context::new(self.objects.clone(), target).expect("sets hold 1..=5 objects")
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// A rule's ordered sequence of labeled sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExemplarList {
    pub rule_id: String,
    pub concept: Concept,
    pub vocab: FeatureVocab,
    pub sets: Vec<LabeledSet>,
    pub seed: u64,
}

/// A single labeled object in presentation order.
#[derive(Debug, Clone)]
pub struct Item {
    pub set_index: usize,
    pub object_index: usize,
    pub context: Context,
    pub label: bool,
}

impl ExemplarList {
    pub fn n_objects(&self) -> usize {
        self.sets.iter().map(LabeledSet::len).sum()
    }

    /// Every object in presentation order.
    pub fn items(&self) -> impl Iterator<Item = Item> + '_ {
        self.sets.iter().enumerate().flat_map(|(s, set)| {
            (0..set.len()).map(move |o| Item {
                set_index: s,
                object_index: o,
                context: set.context(o),
                label: set.labels[o],
            })
        })
    }

    pub fn true_rate(&self) -> f64 {
        let n = self.n_objects();
        if n == 0 {
            return 0.0;
        }
        self.sets.iter().flat_map(|s| &s.labels).filter(|l| **l).count() as f64 / n as f64
    }

    /// Re-evaluates the rule on every stored object.
    pub fn verify(&self) -> Result<(), ExemplarError> {
        for item in self.items() {
            if dsl::eval(&self.concept, &item.context) != item.label {
                return Err(ExemplarError::LabelMismatch { set: item.set_index, object: item.object_index });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = ListDoc {
            rule_id: self.rule_id.clone(),
            concept: self.concept.to_source(&self.vocab),
            seed: self.seed,
            vocab: self.vocab.clone(),
            sets: self
                .sets
                .iter()
                .map(|s| SetDoc {
                    objects: s.objects.iter().map(|o| self.vocab.describe(*o)).collect(),
                    labels: s.labels.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("list serializes");
        text.push('\n');
        text
    }

    /// Parses a list document and checks every stored label against the rule.
    pub fn from_json(text: &str) -> Result<Self, ExemplarError> {
        let doc: ListDoc = serde_json::from_str(text).map_err(|e| ExemplarError::Format(e.to_string()))?;
        doc.vocab.validate()?;
        let concept = dsl::parse(&doc.concept, &doc.vocab)?;
        let mut sets = Vec::with_capacity(doc.sets.len());
        for (i, s) in doc.sets.into_iter().enumerate() {
            if s.objects.is_empty() || s.objects.len() > MAX_SET_SIZE || s.objects.len() != s.labels.len() {
                return Err(ExemplarError::Format(format!("set {i} has a bad shape")));
            }
            let objects = s
                .objects
                .iter()
                .map(|d| {
                    doc.vocab
                        .parse_object(d)
                        .ok_or_else(|| ExemplarError::Format(format!("unknown object `{d}` in set {i}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            sets.push(LabeledSet { objects, labels: s.labels });
        }
        let list = ExemplarList { rule_id: doc.rule_id, concept, vocab: doc.vocab, sets, seed: doc.seed };
        list.verify()?;
        Ok(list)
    }

    pub fn load(path: &Path) -> Result<Self, ExemplarError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ExemplarError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExemplarError> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
            .map_err(|source| ExemplarError::Io { path: path.display().to_string(), source })
    }
}

#[derive(Serialize, Deserialize)]
struct ListDoc {
    rule_id: String,
    concept: String,
    seed: u64,
    vocab: FeatureVocab,
    sets: Vec<SetDoc>,
}

#[derive(Serialize, Deserialize)]
struct SetDoc {
    objects: Vec<String>,
    labels: Vec<bool>,
}

/// Samples `n_sets` sets of 1..=5 objects (uniform size, objects uniform with
/// replacement) and labels each object with `concept`.
pub fn generate_list(
    rule_id: &str,
    concept: &Concept,
    vocab: &FeatureVocab,
    seed: u64,
    n_sets: usize,
) -> ExemplarList {
    let universe = vocab.universe();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = (0..n_sets)
        .map(|_| {
            let k = rng.gen_range(1..=MAX_SET_SIZE);
            let objects: Vec<Obj> = (0..k).map(|_| universe[rng.gen_range(0..universe.len())]).collect();
            let labels = (0..k)
                .map(|t| dsl::eval(concept, &Context::new(objects.clone(), t).expect("1..=5 objects")))
                .collect();
            LabeledSet { objects, labels }
        })
        .collect();
    ExemplarList { rule_id: rule_id.to_string(), concept: concept.clone(), vocab: vocab.clone(), sets, seed }
}

/// One participant's responses on one rule, aligned with the rule's list.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub rule_id: String,
    /// `responses[set][object]`; `None` where no response was recorded.
    pub responses: Vec<Vec<Option<bool>>>,
    pub sets_completed: usize,
}

impl SubjectRecord {
    /// Builds a record, counting sets in which every object received a response.
    pub fn new(subject_id: &str, rule_id: &str, responses: Vec<Vec<Option<bool>>>) -> Self {
        let sets_completed = responses.iter().filter(|s| !s.is_empty() && s.iter().all(Option::is_some)).count();
        SubjectRecord { subject_id: subject_id.into(), rule_id: rule_id.into(), responses, sets_completed }
    }

    /// Fraction of answered objects labeled as the rule labels them.
    pub fn accuracy(&self, gold: &ExemplarList) -> Option<f64> {
        let (mut hit, mut n) = (0usize, 0usize);
        for (set, answers) in gold.sets.iter().zip(&self.responses) {
            for (label, answer) in set.labels.iter().zip(answers) {
                if let Some(a) = answer {
                    n += 1;
                    hit += (a == label) as usize;
                }
            }
        }
        (n > 0).then(|| hit as f64 / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    MinSets,
    AccuracyOutlier,
    NoResponses,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::MinSets => "min-sets",
            ExclusionReason::AccuracyOutlier => "accuracy-outlier",
            ExclusionReason::NoResponses => "no-responses",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: ExclusionReason,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub rule_id: String,
    pub pool_mean: f64,
    pub pool_sd: f64,
    pub excluded: Vec<Exclusion>,
}

/// Drops subjects with fewer than five completed sets, then (single pass) those
/// whose accuracy lies more than two sample standard deviations from the mean of
/// the remaining pool.
pub fn filter_subjects(
    records: &[SubjectRecord],
    gold: &ExemplarList,
) -> Result<(Vec<SubjectRecord>, FilterReport), ExemplarError> {
    let mut excluded = Vec::new();
    let mut pool: Vec<(&SubjectRecord, f64)> = Vec::new();
    for r in records {
        if r.sets_completed < MIN_COMPLETED_SETS {
            excluded.push(Exclusion {
                subject_id: r.subject_id.clone(),
                reason: ExclusionReason::MinSets,
                accuracy: r.accuracy(gold),
            });
            continue;
        }
        match r.accuracy(gold) {
            Some(acc) => pool.push((r, acc)),
            None => excluded.push(Exclusion {
                subject_id: r.subject_id.clone(),
                reason: ExclusionReason::NoResponses,
                accuracy: None,
            }),
        }
    }
    let accs: Vec<f64> = pool.iter().map(|(_, a)| *a).collect();
    let mean = crate::metrics::mean(&accs).unwrap_or(f64::NAN);
    let sd = crate::metrics::sample_sd(&accs).unwrap_or(0.0);
    let mut kept = Vec::new();
    for (r, acc) in pool {
        if (acc - mean).abs() > 2.0 * sd {
            excluded.push(Exclusion {
                subject_id: r.subject_id.clone(),
                reason: ExclusionReason::AccuracyOutlier,
                accuracy: Some(acc),
            });
        } else {
            kept.push(r.clone());
        }
    }
    if kept.is_empty() {
        return Err(ExemplarError::EmptyPool(gold.rule_id.clone()));
    }
    Ok((kept, FilterReport { rule_id: gold.rule_id.clone(), pool_mean: mean, pool_sd: sd, excluded }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseCount {
    pub n_true: u32,
    pub n_total: u32,
}

impl ResponseCount {
    pub fn proportion(self) -> Option<f64> {
        (self.n_total > 0).then(|| self.n_true as f64 / self.n_total as f64)
    }
}

/// Per-object human True counts, indexed `[set][object]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanResponseTable {
    pub rule_id: String,
    pub cells: Vec<Vec<ResponseCount>>,
}

impl HumanResponseTable {
    /// Proportions flattened in presentation order; `None` where nobody responded.
    pub fn proportions(&self) -> Vec<Option<f64>> {
        self.cells.iter().flatten().map(|c| c.proportion()).collect()
    }

    pub fn missing(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, set) in self.cells.iter().enumerate() {
            for (o, c) in set.iter().enumerate() {
                if c.n_total == 0 {
                    out.push((s, o));
                }
            }
        }
        out
    }
}

pub fn human_proportions(kept: &[SubjectRecord], gold: &ExemplarList) -> HumanResponseTable {
    let mut cells: Vec<Vec<ResponseCount>> =
        gold.sets.iter().map(|s| vec![ResponseCount::default(); s.len()]).collect();
    for r in kept {
        for (set, answers) in cells.iter_mut().zip(&r.responses) {
            for (cell, answer) in set.iter_mut().zip(answers) {
                if let Some(a) = answer {
                    cell.n_total += 1;
                    cell.n_true += *a as u32;
                }
            }
        }
    }
    HumanResponseTable { rule_id: gold.rule_id.clone(), cells }
}

/// Grand mean of per-rule means and the propagated standard deviation
/// `sqrt(sum sd_i^2) / n`.
pub fn propagated_baseline(per_rule: &[(f64, f64)]) -> Option<(f64, f64)> {
    if per_rule.is_empty() {
        return None;
    }
    let n = per_rule.len() as f64;
    let mean = per_rule.iter().map(|(m, _)| m).sum::<f64>() / n;
    let var: f64 = per_rule.iter().map(|(_, s)| s * s).sum();
    Some((mean, var.sqrt() / n))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub held_out: Vec<String>,
}

/// Seeded partition of rule ids into training and held-out sides. Each side keeps
/// the input order.
pub fn split_rules(rule_ids: &[String], held_out: usize, seed: u64) -> Result<SplitManifest, ExemplarError> {
    if held_out >= rule_ids.len() && !(held_out == 0 && rule_ids.is_empty()) {
        return Err(ExemplarError::HeldOut { held_out, total: rule_ids.len() });
    }
    let mut order: Vec<usize> = (0..rule_ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out_mask = vec![false; rule_ids.len()];
    for &i in &order[..held_out] {
        out_mask[i] = true;
    }
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (id, out) in rule_ids.iter().zip(out_mask) {
        if out { held.push(id.clone()) } else { train.push(id.clone()) }
    }
    Ok(SplitManifest { seed, train, held_out: held })
}

/// Human response CSV: `subject_id,rule_id,set_index,object_index,response`,
/// response one of True/False (any case) or empty.
pub fn read_human_csv(text: &str) -> Result<Vec<HumanRow>, ExemplarError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<RawHumanRow>().enumerate() {
        let raw = rec.map_err(|e| ExemplarError::HumanData(format!("row {}: {e}", i + 1)))?;
        let response = match raw.response.trim().to_ascii_lowercase().as_str() {
            "" => None,
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            other => return Err(ExemplarError::HumanData(format!("row {}: bad response `{other}`", i + 1))),
        };
        rows.push(HumanRow {
            subject_id: raw.subject_id,
            rule_id: raw.rule_id,
            set_index: raw.set_index,
            object_index: raw.object_index,
            response,
        });
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct RawHumanRow {
    subject_id: String,
    rule_id: String,
    set_index: usize,
    object_index: usize,
    #[serde(default)]
    response: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanRow {
    pub subject_id: String,
    pub rule_id: String,
    pub set_index: usize,
    pub object_index: usize,
    pub response: Option<bool>,
}

pub fn write_human_csv(rows: &[HumanRow]) -> String {
    let mut out = String::from("subject_id,rule_id,set_index,object_index,response\n");
    for r in rows {
        let resp = match r.response {
            Some(true) => "True",
            Some(false) => "False",
            None => "",
        };
        out.push_str(&format!("{},{},{},{},{}\n", r.subject_id, r.rule_id, r.set_index, r.object_index, resp));
    }
    out
}

/// Groups rows for `gold`'s rule into per-subject records aligned with the list.
pub fn subject_records(rows: &[HumanRow], gold: &ExemplarList) -> Result<Vec<SubjectRecord>, ExemplarError> {
    let mut by_subject: BTreeMap<&str, Vec<Vec<Option<bool>>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.rule_id == gold.rule_id) {
        let grid = by_subject
            .entry(&r.subject_id)
            .or_insert_with(|| gold.sets.iter().map(|s| vec![None; s.len()]).collect());
        let cell = grid
            .get_mut(r.set_index)
            .and_then(|s| s.get_mut(r.object_index))
            .ok_or_else(|| {
                ExemplarError::HumanData(format!(
                    "subject {} answers set {} object {} outside list `{}`",
                    r.subject_id, r.set_index, r.object_index, gold.rule_id
                ))
            })?;
        *cell = r.response;
    }
    Ok(by_subject
        .into_iter()
        .map(|(id, grid)| SubjectRecord::new(id, &gold.rule_id, grid))
        .collect())
}
