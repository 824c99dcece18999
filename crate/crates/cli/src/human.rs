use std::path::Path;

use anyhow::{Context, Result};

use rulelab::exemplar::{
    filter_subjects, human_proportions, read_human_csv, subject_records, ExemplarList, FilterReport, HumanResponseTable,
    HumanRow, SubjectRecord,
};
use rulelab::metrics::{LabelRecord, LabelSeries};

pub struct HumanRule {
    pub kept: Vec<SubjectRecord>,
    pub report: FilterReport,
    pub table: HumanResponseTable,
}

pub fn load_rows(path: &Path) -> Result<Vec<HumanRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_human_csv(&text).with_context(|| format!("human data {}", path.display()))
}

/// Filtered subjects and response proportions for one rule; `None` when the
/// data has no rows for it.
pub fn process(rows: &[HumanRow], list: &ExemplarList) -> Result<Option<HumanRule>> {
    if !rows.iter().any(|r| r.rule_id == list.rule_id) {
        return Ok(None);
    }
    let records = subject_records(rows, list)?;
    let (kept, report) = filter_subjects(&records, list)?;
    let table = human_proportions(&kept, list);
    Ok(Some(HumanRule { kept, report, table }))
}

pub fn subject_series(rec: &SubjectRecord, gold: &ExemplarList) -> LabelSeries {
    let mut records = Vec::new();
    for (s, (set, answers)) in gold.sets.iter().zip(&rec.responses).enumerate() {
        for (o, (label, answer)) in set.labels.iter().zip(answers).enumerate() {
            records.push(LabelRecord { set_index: s, object_index: o, gold: *label, model: *answer, p_true: None, human: None });
        }
    }
    LabelSeries { rule_id: gold.rule_id.clone(), learner: format!("human:{}", rec.subject_id), records }
}
