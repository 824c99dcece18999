//! WebAssembly bindings behind `www/index.html`. Every export takes plain
//! strings and numbers and returns a JSON document.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use rulelab::catalog::builtin_catalog;
use rulelab::dsl::{self, Concept, Context, EquivOptions, FeatureVocab, Obj};
use rulelab::exemplar::{generate_list, LabeledSet};
use rulelab::metrics::{accuracy, chance_baseline, per_set_accuracy, Window};
use rulelab::plot::{run_list, Grammar, HypothesisSpace, NoiseParams};

const MAX_LEARNER_SIZE: usize = 4;
const MAX_EQUIV_SET: usize = 5;
const MAX_SETS: usize = 100;
const HYPOTHESIS_CAP: usize = 2_000_000;

thread_local! {
    static SPACES: RefCell<HashMap<usize, Rc<HypothesisSpace>>> = RefCell::new(HashMap::new());
}

fn vocab() -> FeatureVocab {
    FeatureVocab::example()
}

fn concept(src: &str, vocab: &FeatureVocab) -> Result<Concept, String> {
    dsl::parse(src.trim(), vocab).map_err(|e| format!("`{}`: {e}", src.trim()))
}

fn space(max_size: usize) -> Result<Rc<HypothesisSpace>, String> {
    if !(1..=MAX_LEARNER_SIZE).contains(&max_size) {
        return Err(format!("max size must be between 1 and {MAX_LEARNER_SIZE}"));
    }
    SPACES.with(|cache| {
        if let Some(s) = cache.borrow().get(&max_size) {
            return Ok(s.clone());
        }
        let grammar = Grammar::default_for(&vocab());
        let s = Rc::new(HypothesisSpace::enumerate(&grammar, max_size, HYPOTHESIS_CAP).map_err(|e| e.to_string())?);
        cache.borrow_mut().insert(max_size, s.clone());
        Ok(s)
    })
}

fn check_sets(n_sets: usize) -> Result<(), String> {
    if (1..=MAX_SETS).contains(&n_sets) {
        Ok(())
    } else {
        Err(format!("number of sets must be between 1 and {MAX_SETS}"))
    }
}

fn set_json(set: &LabeledSet, vocab: &FeatureVocab) -> Value {
    let objects: Vec<Value> = set
        .objects
        .iter()
        .zip(&set.labels)
        .map(|(o, l)| json!({ "object": vocab.describe(*o), "label": l }))
        .collect();
    Value::Array(objects)
}

/// Parses one set per line, objects separated by commas.
fn parse_sets(text: &str, vocab: &FeatureVocab) -> Result<Vec<Vec<Obj>>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|o| vocab.parse_object(o).ok_or_else(|| format!("set {}: unknown object `{}`", i + 1, o.trim())))
                .collect()
        })
        .collect()
}

/// The built-in rule catalog.
pub fn catalog_json() -> Value {
    let v = vocab();
    let rules: Vec<Value> = builtin_catalog()
        .iter()
        .map(|r| json!({ "id": r.id, "tag": r.tag.as_str(), "rule": r.concept.to_source(&v) }))
        .collect();
    json!({ "rules": rules, "sizes": v.values(dsl::Dim::Size), "colors": v.values(dsl::Dim::Color), "shapes": v.values(dsl::Dim::Shape) })
}

/// Labels user-supplied sets, or a generated list when `sets` is blank.
pub fn label_json(rule: &str, sets: &str, seed: u64, n_sets: usize) -> Result<Value, String> {
    let v = vocab();
    let c = concept(rule, &v)?;
    let labeled: Vec<LabeledSet> = if sets.trim().is_empty() {
        check_sets(n_sets)?;
        generate_list("demo", &c, &v, seed, n_sets).sets
    } else {
        parse_sets(sets, &v)?
            .into_iter()
            .map(|objects| {
                let labels = (0..objects.len())
                    .map(|t| Context::new(objects.clone(), t).map(|ctx| dsl::eval(&c, &ctx)).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                Ok(LabeledSet { objects, labels })
            })
            .collect::<Result<_, String>>()?
    };
    let out: Vec<Value> = labeled.iter().map(|s| set_json(s, &v)).collect();
    Ok(json!({ "rule": c.to_source(&v), "sets": out }))
}

/// Runs the learner on a generated list and reports its curve and MAP rules.
pub fn learn_json(rule: &str, seed: u64, n_sets: usize, alpha: f64, beta: f64, max_size: usize) -> Result<Value, String> {
    check_sets(n_sets)?;
    let v = vocab();
    let c = concept(rule, &v)?;
    let noise = NoiseParams::new(alpha, beta).map_err(|e| e.to_string())?;
    let space = space(max_size)?;
    let list = generate_list("demo", &c, &v, seed, n_sets);
    let run = run_list(&space, &list, noise, 0).map_err(|e| e.to_string())?;

    let n_true = list.sets.iter().flat_map(|s| &s.labels).filter(|l| **l).count();
    let n_obj = list.n_objects();
    let chance = chance_baseline(n_true as f64 / n_obj as f64);
    let curve: Vec<Value> = per_set_accuracy(&run.series)
        .iter()
        .zip(&run.map_rules)
        .enumerate()
        .map(|(k, ((acc, n), map))| json!({ "set": k, "accuracy": acc, "objects": n, "map": map.to_source(&v) }))
        .collect();
    let score = |w| accuracy(&run.series, w).ok();
    Ok(json!({
        "rule": c.to_source(&v),
        "hypotheses": space.len(),
        "chance": chance,
        "overall": score(Window::Overall),
        "last_quarter": score(Window::LastQuarter),
        "curve": curve,
        "final": run.final_rule.to_source(&v),
        "recovered": dsl::equivalent(&run.final_rule, &c, &v, MAX_EQUIV_SET).unwrap_or(false),
        "sets": list.sets.iter().map(|s| set_json(s, &v)).collect::<Vec<_>>(),
    }))
}

/// Compares two rules over every set of up to `max_set_size` objects.
pub fn equiv_json(a: &str, b: &str, max_set_size: usize) -> Result<Value, String> {
    if !(1..=MAX_EQUIV_SET).contains(&max_set_size) {
        return Err(format!("set size must be between 1 and {MAX_EQUIV_SET}"));
    }
    let v = vocab();
    let (ca, cb) = (concept(a, &v)?, concept(b, &v)?);
    let opts = EquivOptions { max_set_size, ..EquivOptions::default() };
    let found = dsl::smallest_counterexample(&ca, &cb, &v, opts).map_err(|e| e.to_string())?;
    let cex = found.map(|ctx| {
        json!({
            "objects": ctx.objects().iter().map(|o| v.describe(*o)).collect::<Vec<_>>(),
            "target": ctx.target(),
            "a": dsl::eval(&ca, &ctx),
            "b": dsl::eval(&cb, &ctx),
        })
    });
    Ok(json!({
        "a": ca.to_source(&v),
        "b": cb.to_source(&v),
        "max_set_size": max_set_size,
        "equivalent": cex.is_none(),
        "counterexample": cex,
    }))
}

fn export(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn catalog() -> String {
    catalog_json().to_string()
}

#[wasm_bindgen]
pub fn label(rule: &str, sets: &str, seed: u32, n_sets: u32) -> Result<String, JsError> {
    export(label_json(rule, sets, seed.into(), n_sets as usize))
}

#[wasm_bindgen]
pub fn learn(rule: &str, seed: u32, n_sets: u32, alpha: f64, beta: f64, max_size: u32) -> Result<String, JsError> {
    export(learn_json(rule, seed.into(), n_sets as usize, alpha, beta, max_size as usize))
}

#[wasm_bindgen]
pub fn equivalence(a: &str, b: &str, max_set_size: u32) -> Result<String, JsError> {
    export(equiv_json(a, b, max_set_size as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_typed_sets() {
        let out = label_json("(exists others blue)", "small blue circle, large yellow rectangle\nmedium green triangle", 0, 0).unwrap();
        let sets = out["sets"].as_array().unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0][0]["label"], false);
        assert_eq!(sets[0][1]["label"], true);
        assert_eq!(sets[1][0]["label"], false);
    }

    #[test]
    fn labels_generated_list_deterministically() {
        let a = label_json("blue", "", 9, 5).unwrap();
        assert_eq!(a, label_json("blue", " \n", 9, 5).unwrap());
        for set in a["sets"].as_array().unwrap() {
            for o in set.as_array().unwrap() {
                assert_eq!(o["label"], o["object"].as_str().unwrap().contains("blue"));
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(label_json("(and blue", "", 0, 5).is_err());
        assert!(label_json("blue", "tiny blue circle", 0, 5).unwrap_err().contains("tiny"));
        assert!(learn_json("blue", 0, 5, 1.5, 0.5, 3).is_err());
        assert!(learn_json("blue", 0, 5, 0.9, 0.5, 9).is_err());
        assert!(equiv_json("blue", "blue", 0).is_err());
    }

    #[test]
    fn learner_recovers_a_simple_rule() {
        let out = learn_json("(or circle blue)", 4, 20, 0.99, 0.5, 3).unwrap();
        assert_eq!(out["curve"].as_array().unwrap().len(), 20);
        assert_eq!(out["recovered"], true, "{}", out["final"]);
        assert!(out["last_quarter"].as_f64().unwrap() > 0.9);
        assert_eq!(out["hypotheses"], learn_json("blue", 1, 2, 0.9, 0.1, 3).unwrap()["hypotheses"]);
    }

    #[test]
    fn equivalence_reports_minimal_counterexample() {
        let same = equiv_json("(or blue green)", "(not yellow)", 4).unwrap();
        assert_eq!(same["equivalent"], true);
        assert!(same["counterexample"].is_null());
        let diff = equiv_json("(exists others blue)", "(exists all blue)", 5).unwrap();
        assert_eq!(diff["equivalent"], false);
        let cex = &diff["counterexample"];
        assert_eq!(cex["objects"].as_array().unwrap().len(), 1);
        assert_ne!(cex["a"], cex["b"]);
    }

    #[test]
    fn catalog_lists_rules() {
        let c = catalog_json();
        assert!(c["rules"].as_array().unwrap().len() > 10);
        assert_eq!(c["colors"].as_array().unwrap().len(), 3);
    }
}
