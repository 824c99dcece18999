use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;

use rulelab::dsl::{self, Concept};
use rulelab::exemplar::ExemplarList;
use rulelab::metrics::{consistency, list_likelihood, match_rate, LabelSeries, ReportedLabel, RuleMatch};

use super::{csv_bytes, fmt_opt, load_rules, read, to_json};
use crate::config::ExperimentConfig;
use crate::failure::{Failure, Failures};
use crate::provenance::Provenance;

struct Entry {
    set_index: usize,
    text: String,
    concept: Option<Concept>,
}

struct Unparseable {
    line: usize,
    rule_id: String,
    set_index: String,
    text: String,
    error: String,
}

#[derive(Serialize)]
struct RuleGrade {
    rule_id: String,
    tag: Option<&'static str>,
    final_set: usize,
    final_concept: String,
    #[serde(flatten)]
    verdict: RuleMatch,
    consistency: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    rules: usize,
    unparseable_entries: usize,
    likelihood_match_rate: Option<f64>,
    equivalence_match_rate: Option<f64>,
    mean_consistency: Option<f64>,
}

/// Elicited lines `rule_id set_index concept`, grouped by rule.
fn parse_elicited(text: &str, vocab: &dsl::FeatureVocab) -> (BTreeMap<String, Vec<Entry>>, Vec<Unparseable>) {
    let mut rules: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
    let mut bad = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut parts = l.splitn(3, char::is_whitespace);
        let (id, k, src) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""), parts.next().unwrap_or("").trim());
        let mut flag = |error: String| {
            bad.push(Unparseable { line: i + 1, rule_id: id.into(), set_index: k.into(), text: src.into(), error })
        };
        let Ok(set_index) = k.parse::<usize>() else {
            flag("expected `rule_id set_index concept`".into());
            continue;
        };
        let concept = match dsl::parse(src, vocab) {
            Ok(c) => Some(c),
            Err(e) => {
                flag(e.to_string());
                None
            }
        };
        rules.entry(id.to_string()).or_default().push(Entry { set_index, text: src.to_string(), concept });
    }
    for v in rules.values_mut() {
        v.sort_by_key(|e| e.set_index);
    }
    (rules, bad)
}

fn rule_consistency(entries: &[Entry], series: &LabelSeries, list: &ExemplarList) -> Option<f64> {
    let at: BTreeMap<usize, &Concept> = entries.iter().filter_map(|e| Some((e.set_index, e.concept.as_ref()?))).collect();
    let labels: Vec<ReportedLabel> = series
        .records
        .iter()
        .filter_map(|r| {
            let reported = at.get(&r.set_index)?;
            let set = list.sets.get(r.set_index)?;
            (r.object_index < set.len()).then_some(())?;
            Some(ReportedLabel { reported, context: set.context(r.object_index), label: r.model? })
        })
        .collect();
    let c = consistency(&labels);
    (!c.is_nan()).then_some(c)
}

pub fn grade(cfg: &ExperimentConfig, elicited: &Path, series: Option<&Path>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (vocab, manifest) = load_rules(cfg, &mut failures)?;
    let text = read(elicited).map_err(Failure::data)?;
    let (entries, bad) = parse_elicited(&text, &vocab);
    let out = out.unwrap_or_else(|| cfg.output_dir.join("grade"));
    let tags: BTreeMap<&str, &'static str> = manifest.iter().map(|r| (r.id.as_str(), r.tag.as_str())).collect();
    let mut order: Vec<&String> = entries.keys().collect();
    let pos = |id: &str| manifest.iter().position(|r| r.id == id).unwrap_or(usize::MAX);
    order.sort_by_key(|id| (pos(id), id.to_string()));

    type Graded = (Vec<Vec<String>>, RuleGrade);
    let results: Vec<(String, Result<Graded, Failure>)> = order
        .par_iter()
        .map(|id| {
            let res = (|| {
                let es = &entries[*id];
                let list = cfg.load_list(id).map_err(Failure::data)?;
                let mut rows = Vec::new();
                for e in es {
                    let lk = e.concept.as_ref().filter(|_| e.set_index > 0).map(|c| list_likelihood(c, &list, e.set_index));
                    rows.push(vec![
                        id.to_string(),
                        e.set_index.to_string(),
                        e.text.clone(),
                        lk.map(|a| a.agree.to_string()).unwrap_or_default(),
                        lk.map(|a| a.total.to_string()).unwrap_or_default(),
                        fmt_opt(lk.map(|a| a.fraction())),
                    ]);
                }
                let last = es.last().expect("non-empty group");
                let verdict = match_rate(&[(last.concept.as_ref(), &list)], cfg.equiv_max_set_size)
                    .map_err(Failure::data)?
                    .rules
                    .remove(0);
                let consistency = match series {
                    Some(dir) => {
                        let p = dir.join(format!("{id}.json"));
                        let s: LabelSeries = serde_json::from_str(&read(&p).map_err(Failure::data)?)
                            .map_err(|e| Failure::data(anyhow!("series {}: {e}", p.display())))?;
                        rule_consistency(es, &s, &list)
                    }
                    None => None,
                };
                let grade = RuleGrade {
                    rule_id: id.to_string(),
                    tag: tags.get(id.as_str()).copied(),
                    final_set: last.set_index,
                    final_concept: last.text.clone(),
                    verdict,
                    consistency,
                };
                Ok((rows, grade))
            })();
            (id.to_string(), res)
        })
        .collect();

    let mut set_rows = Vec::new();
    let mut grades = Vec::new();
    for (id, r) in results {
        match r {
            Ok((rows, g)) => {
                set_rows.extend(rows);
                grades.push(g);
            }
            Err(f) => failures.push(&id, f),
        }
    }
    let n = grades.len();
    let rate = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    let cons: Vec<f64> = grades.iter().filter_map(|g| g.consistency).collect();
    let summary = Summary {
        rules: n,
        unparseable_entries: bad.len(),
        likelihood_match_rate: rate(grades.iter().filter(|g| g.verdict.likelihood_match).count()),
        equivalence_match_rate: rate(grades.iter().filter(|g| g.verdict.equivalent == Some(true)).count()),
        mean_consistency: rulelab::metrics::mean(&cons),
    };
    log::info!(
        "graded {n} rules: likelihood match {}, equivalence match {}",
        fmt_opt(summary.likelihood_match_rate),
        fmt_opt(summary.equivalence_match_rate)
    );

    let rule_rows = grades.iter().map(|g| {
        let lk = g.verdict.likelihood;
        vec![
            g.rule_id.clone(),
            g.tag.unwrap_or("").to_string(),
            g.final_set.to_string(),
            g.final_concept.clone(),
            fmt_opt(lk.map(|a| a.fraction())),
            g.verdict.likelihood_match.to_string(),
            g.verdict.equivalent.map(|b| b.to_string()).unwrap_or_default(),
            fmt_opt(g.consistency),
        ]
    });
    let bad_rows = bad.iter().map(|b| vec![b.line.to_string(), b.rule_id.clone(), b.set_index.clone(), b.text.clone(), b.error.clone()]);

    let mut prov = Provenance::new("grade", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;
    prov.input(elicited).map_err(Failure::data)?;
    for id in &order {
        let p = cfg.list_path(id);
        if p.exists() {
            prov.input(&p).map_err(Failure::data)?;
        }
        if let Some(dir) = series {
            let p = dir.join(format!("{id}.json"));
            if p.exists() {
                prov.input(&p).map_err(Failure::data)?;
            }
        }
    }
    let w = |prov: &mut Provenance, rel: &str, bytes: Vec<u8>| prov.write(&out, rel, &bytes).map(|_| ()).map_err(Failure::data);
    w(&mut prov, "grade_sets.csv", csv_bytes(&["rule_id", "set_index", "concept", "agree", "total", "likelihood"], set_rows))?;
    w(
        &mut prov,
        "grade_rules.csv",
        csv_bytes(
            &["rule_id", "tag", "final_set", "final_concept", "likelihood", "likelihood_match", "equivalent", "consistency"],
            rule_rows,
        ),
    )?;
    w(&mut prov, "unparseable.csv", csv_bytes(&["line", "rule_id", "set_index", "text", "error"], bad_rows))?;
    w(&mut prov, "grade_summary.json", to_json(&serde_json::json!({ "summary": summary, "rules": grades })))?;
    prov.finish(&out).map_err(Failure::data)?;
    failures.finish("grade")
}
