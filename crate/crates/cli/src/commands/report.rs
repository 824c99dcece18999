use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rayon::prelude::*;

use rulelab::catalog::{RuleEntry, RuleTag};
use rulelab::exemplar::{propagated_baseline, ExemplarList};
use rulelab::metrics::{
    accuracy, cohort_report, cross_entropy_series, human_target, mean, r_squared, sample_sd, trajectory, Bands,
    LabelSeries, Window,
};

use super::{csv_bytes, fmt_opt, load_rules, read, to_json};
use crate::config::ExperimentConfig;
use crate::failure::{Failure, Failures};
use crate::human::{load_rows, process, subject_series, HumanRule};
use crate::provenance::Provenance;

/// Sets compared for short-context models.
const SHORT_CONTEXT_SETS: usize = 14;

struct Cohort {
    name: String,
    series: BTreeMap<String, LabelSeries>,
}

fn window_name(w: Window) -> &'static str {
    match w {
        Window::Overall => "overall",
        Window::LastQuarter => "last_quarter",
    }
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn load_cohort(dir: &Path, prov: &mut Provenance, failures: &mut Failures) -> Result<Cohort, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::data(anyhow!("series directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "PROVENANCE.json"))
        .collect();
    paths.sort();
    let mut series = BTreeMap::new();
    let mut name = None;
    for p in paths {
        let parsed = read(&p).and_then(|t| {
            let s: LabelSeries = serde_json::from_str(&t)?;
            s.validate()?;
            Ok(s)
        });
        match parsed {
            Ok(s) => {
                prov.input(&p).map_err(Failure::data)?;
                name.get_or_insert_with(|| s.learner.clone());
                series.insert(s.rule_id.clone(), s);
            }
            Err(e) => failures.push(&p.display().to_string(), Failure::data(e.context(format!("series {}", p.display())))),
        }
    }
    let name = name.unwrap_or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
    Ok(Cohort { name, series })
}

/// Per-subject scores for one rule under a window, optionally truncated.
fn human_scores(h: &HumanRule, list: &ExemplarList, w: Window, max_sets: Option<usize>) -> Vec<f64> {
    h.kept
        .iter()
        .filter_map(|r| {
            let s = subject_series(r, list);
            let s = match max_sets {
                Some(n) => s.truncated(n),
                None => s,
            };
            accuracy(&s, w).ok()
        })
        .collect()
}

fn groups() -> [(&'static str, Option<RuleTag>); 3] {
    [("all", None), ("prop", Some(RuleTag::Prop)), ("fol", Some(RuleTag::Fol))]
}

fn in_group(r: &RuleEntry, g: Option<RuleTag>) -> bool {
    g.is_none_or(|t| r.tag == t)
}

pub fn report(cfg: &ExperimentConfig, series: &[PathBuf], human: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (_, rules) = load_rules(cfg, &mut failures)?;
    let out = out.unwrap_or_else(|| cfg.output_dir.join("report"));
    let mut prov = Provenance::new("report", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;

    let mut cohorts = Vec::new();
    for dir in series {
        let mut c = load_cohort(dir, &mut prov, &mut failures)?;
        let mut name = c.name.clone();
        let mut k = 2;
        while cohorts.iter().any(|o: &Cohort| o.name == name) {
            name = format!("{}#{k}", c.name);
            k += 1;
        }
        c.name = name;
        for id in c.series.keys().filter(|id| !rules.iter().any(|r| &r.id == *id)) {
            log::warn!("cohort {}: series for {id} is not in the manifest; ignored", c.name);
        }
        cohorts.push(c);
    }

    let mut lists: BTreeMap<String, ExemplarList> = BTreeMap::new();
    for r in &rules {
        let p = cfg.list_path(&r.id);
        match cfg.load_list(&r.id) {
            Ok(l) => {
                prov.input(&p).map_err(Failure::data)?;
                lists.insert(r.id.clone(), l);
            }
            Err(e) if cohorts.iter().any(|c| c.series.contains_key(&r.id)) => failures.push(&r.id, Failure::data(e)),
            Err(_) => {}
        }
    }

    let human_path = human.or_else(|| cfg.human.clone());
    let mut humans: BTreeMap<String, HumanRule> = BTreeMap::new();
    if let Some(hp) = &human_path {
        let rows = load_rows(hp).map_err(Failure::data)?;
        prov.input(hp).map_err(Failure::data)?;
        let done: Vec<(String, anyhow::Result<Option<HumanRule>>)> =
            lists.par_iter().map(|(id, l)| (id.clone(), process(&rows, l))).collect();
        for (id, r) in done {
            match r {
                Ok(Some(h)) => {
                    humans.insert(id, h);
                }
                Ok(None) => {}
                Err(e) => failures.push(&id, Failure::data(e)),
            }
        }
        log::info!("human data for {} of {} rules", humans.len(), lists.len());
    } else {
        log::info!("no human data; model-only report");
    }
    let graded: Vec<&RuleEntry> = rules.iter().filter(|r| lists.contains_key(&r.id)).collect();

    let mut header: Vec<String> = vec!["cohort".into()];
    for w in &cfg.windows {
        for (g, _) in groups() {
            header.push(format!("{}_{g}", window_name(*w)));
        }
    }
    if !humans.is_empty() {
        for w in &cfg.windows {
            for (g, _) in groups() {
                header.push(format!("{}_{g}_sd", window_name(*w)));
            }
        }
    }
    for (g, _) in groups() {
        header.push(format!("n_{g}"));
    }

    let mut table = Vec::new();
    let mut rule_rows = Vec::new();
    for c in &cohorts {
        let mut row = vec![c.name.clone()];
        for &w in &cfg.windows {
            for (_, g) in groups() {
                let accs: Vec<f64> = graded
                    .iter()
                    .filter(|r| in_group(r, g))
                    .filter_map(|r| accuracy(c.series.get(&r.id)?, w).ok())
                    .collect();
                row.push(fmt_opt(mean(&accs)));
            }
        }
        if !humans.is_empty() {
            row.extend(std::iter::repeat_n(String::new(), cfg.windows.len() * 3));
        }
        for (_, g) in groups() {
            row.push(graded.iter().filter(|r| in_group(r, g) && c.series.contains_key(&r.id)).count().to_string());
        }
        table.push(row);
        for r in &graded {
            if let Some(s) = c.series.get(&r.id) {
                let mut row = vec![c.name.clone(), r.id.clone(), r.tag.as_str().to_string()];
                row.extend(cfg.windows.iter().map(|&w| fmt_opt(accuracy(s, w).ok())));
                rule_rows.push(row);
            }
        }
    }
    if !humans.is_empty() {
        for (label, max_sets) in [("human", None), ("human_first_14_sets", Some(SHORT_CONTEXT_SETS))] {
            let mut means = Vec::new();
            let mut sds = Vec::new();
            for &w in &cfg.windows {
                for (_, g) in groups() {
                    let per_rule: Vec<(f64, f64)> = graded
                        .iter()
                        .filter(|r| in_group(r, g))
                        .filter_map(|r| {
                            let scores = human_scores(humans.get(&r.id)?, &lists[&r.id], w, max_sets);
                            Some((mean(&scores)?, sample_sd(&scores).unwrap_or(0.0)))
                        })
                        .collect();
                    let b = propagated_baseline(&per_rule);
                    means.push(fmt_opt(b.map(|b| b.0)));
                    sds.push(fmt_opt(b.map(|b| b.1)));
                }
            }
            let mut row = vec![label.to_string()];
            row.extend(means);
            row.extend(sds);
            for (_, g) in groups() {
                row.push(graded.iter().filter(|r| in_group(r, g) && humans.contains_key(&r.id)).count().to_string());
            }
            table.push(row);
        }
        for r in &graded {
            if let Some(h) = humans.get(&r.id) {
                let mut row = vec!["human".to_string(), r.id.clone(), r.tag.as_str().to_string()];
                row.extend(cfg.windows.iter().map(|&w| fmt_opt(mean(&human_scores(h, &lists[&r.id], w, None)))));
                rule_rows.push(row);
            }
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    prov.write(&out, "table1.csv", &csv_bytes(&header_refs, table)).map_err(Failure::data)?;
    let mut rh = vec!["cohort".to_string(), "rule_id".into(), "tag".into()];
    rh.extend(cfg.windows.iter().map(|w| window_name(*w).to_string()));
    let rh: Vec<&str> = rh.iter().map(String::as_str).collect();
    prov.write(&out, "rule_accuracy.csv", &csv_bytes(&rh, rule_rows)).map_err(Failure::data)?;

    // Learning curves.
    let band_cols = |b: Option<Bands>| -> Vec<String> {
        match b {
            Some(b) => [b.median, b.q75, b.p25, b.p20, b.p10, b.p1].iter().map(|x| format!("{x:.6}")).collect(),
            None => vec![String::new(); 6],
        }
    };
    for r in &graded {
        let list = &lists[&r.id];
        let mut reports = Vec::new();
        for c in &cohorts {
            if let Some(s) = c.series.get(&r.id) {
                reports.push(trajectory(&r.id, &c.name, std::slice::from_ref(s), list.true_rate()));
            }
        }
        if let Some(h) = humans.get(&r.id) {
            let members: Vec<LabelSeries> = h.kept.iter().map(|s| subject_series(s, list)).collect();
            reports.push(trajectory(&r.id, "human", &members, list.true_rate()));
        }
        if reports.is_empty() {
            continue;
        }
        let rows = reports.iter().flat_map(|t| {
            t.points.iter().map(|p| {
                let mut row = vec![
                    p.set_index.to_string(),
                    t.cohort.clone(),
                    format!("{:.6}", p.mean_accuracy),
                    p.members.to_string(),
                    format!("{:.6}", t.chance_baseline),
                ];
                row.extend(band_cols(p.bands));
                row
            })
        });
        let header =
            ["set_index", "cohort", "mean_accuracy", "members", "chance_baseline", "median", "q75", "p25", "p20", "p10", "p1"];
        prov.write(&out, format!("trajectories/{}.csv", file_stem(&r.id)), &csv_bytes(&header, rows)).map_err(Failure::data)?;
    }

    if !humans.is_empty() {
        // Model-minus-median deltas per cohort and window.
        for c in &cohorts {
            for &w in &cfg.windows {
                let mut hs = BTreeMap::new();
                let mut ms = BTreeMap::new();
                for r in &graded {
                    if let (Some(h), Some(s)) = (humans.get(&r.id), c.series.get(&r.id)) {
                        let scores = human_scores(h, &lists[&r.id], w, None);
                        if let (false, Ok(a)) = (scores.is_empty(), accuracy(s, w)) {
                            hs.insert(r.id.clone(), scores);
                            ms.insert(r.id.clone(), a);
                        }
                    }
                }
                let rep = cohort_report(&hs, &ms, cfg.subsample_draws, cfg.seed);
                let tag_of = |id: &str| rules.iter().find(|r| r.id == id).map_or("", |r| r.tag.as_str());
                let rows = rep.rows.iter().map(|d| {
                    let mut row = vec![d.rule_id.clone(), tag_of(&d.rule_id).to_string(), format!("{:.6}", d.model)];
                    row.extend(band_cols(Some(d.bands)));
                    row.push(format!("{:.6}", d.delta));
                    row.push(d.below_percentile.map(|p| p.to_string()).unwrap_or_default());
                    row
                });
                let header = ["rule_id", "tag", "model", "median", "q75", "p25", "p20", "p10", "p1", "delta", "below_percentile"];
                let stem = format!("deltas_{}_{}", file_stem(&c.name), window_name(w));
                prov.write(&out, format!("{stem}.csv"), &csv_bytes(&header, rows)).map_err(Failure::data)?;
                prov.write(&out, format!("{stem}.json"), &to_json(&rep)).map_err(Failure::data)?;
            }
        }

        // Graded agreement with human proportions.
        let mut r2_rows = Vec::new();
        for c in &cohorts {
            let mut pooled = (Vec::new(), Vec::new());
            let mut loss_total = Some(0.0);
            for r in &graded {
                let (Some(h), Some(s)) = (humans.get(&r.id), c.series.get(&r.id)) else { continue };
                let (mut m, mut hv, mut pairs) = (Vec::new(), Vec::new(), Vec::new());
                for rec in &s.records {
                    let Some(p) = rec.p_true else { continue };
                    let q = h.table.cells.get(rec.set_index).and_then(|set| set.get(rec.object_index)).and_then(|c| c.proportion());
                    m.push(p);
                    hv.push(q);
                    if let Some(q) = q {
                        pairs.push((human_target(q), [p, 1.0 - p]));
                    }
                }
                if m.is_empty() {
                    continue;
                }
                let loss = cross_entropy_series(&pairs).ok();
                loss_total = loss_total.zip(loss).map(|(a, b)| a + b);
                let fit = r_squared(&m, &hv).ok();
                r2_rows.push(vec![
                    c.name.clone(),
                    r.id.clone(),
                    fmt_opt(fit.map(|f| f.r)),
                    fmt_opt(fit.map(|f| f.r2)),
                    hv.iter().flatten().count().to_string(),
                    fmt_opt(loss),
                ]);
                pooled.0.extend(m);
                pooled.1.extend(hv);
            }
            if !pooled.0.is_empty() {
                let fit = r_squared(&pooled.0, &pooled.1).ok();
                r2_rows.push(vec![
                    c.name.clone(),
                    "all".into(),
                    fmt_opt(fit.map(|f| f.r)),
                    fmt_opt(fit.map(|f| f.r2)),
                    pooled.1.iter().flatten().count().to_string(),
                    fmt_opt(loss_total),
                ]);
            }
        }
        let header = ["cohort", "rule_id", "r", "r2", "n", "cross_entropy"];
        prov.write(&out, "r2.csv", &csv_bytes(&header, r2_rows)).map_err(Failure::data)?;

        let filter_rows = humans.values().flat_map(|h| {
            let rep = &h.report;
            let kept = h.kept.len();
            std::iter::once(vec![
                rep.rule_id.clone(),
                String::new(),
                "pool".into(),
                String::new(),
                format!("{:.6}", rep.pool_mean),
                format!("{:.6}", rep.pool_sd),
                kept.to_string(),
            ])
            .chain(rep.excluded.iter().map(move |e| {
                vec![
                    rep.rule_id.clone(),
                    e.subject_id.clone(),
                    e.reason.as_str().into(),
                    fmt_opt(e.accuracy),
                    String::new(),
                    String::new(),
                    String::new(),
                ]
            }))
        });
        let header = ["rule_id", "subject_id", "reason", "accuracy", "pool_mean", "pool_sd", "kept"];
        prov.write(&out, "human_filter.csv", &csv_bytes(&header, filter_rows)).map_err(Failure::data)?;
    }

    prov.finish(&out).map_err(Failure::data)?;
    log::info!("report written to {}", out.display());
    failures.finish("report")
}
