use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rulelab::exemplar::{write_human_csv, ExemplarList, HumanRow};

fn rulelab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulelab"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("RULELAB_API_KEY")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn setup(rules: &str, extra: &str) -> tempfile::TempDir {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("rules.txt"), rules).unwrap();
    let cfg = format!(r#"{{"rules":"rules.txt","lists_dir":"lists","output_dir":"out","seed":3,"n_sets":12{extra}}}"#);
    std::fs::write(t.path().join("experiment.json"), cfg).unwrap();
    t
}

const RULES: &str = "p01 prop blue\np09 prop (or circle blue)\nf05 fol (exists all triangle)\n";

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn missing_config_is_a_config_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&rulelab(t.path(), &["gen"])), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let t = setup(RULES, r#","colour":"blue""#);
    assert_eq!(code(&rulelab(t.path(), &["gen"])), 2);
}

#[test]
fn empty_manifest_warns_and_succeeds() {
    let t = setup("# nothing\n", "");
    let o = rulelab(t.path(), &["gen"]);
    assert!(o.status.success());
    let files: Vec<_> = std::fs::read_dir(t.path().join("lists")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, vec!["PROVENANCE.json"]);
}

#[test]
fn bad_manifest_line_is_isolated() {
    let t = setup(&format!("{RULES}x01 prop (and blue\n"), "");
    let o = rulelab(t.path(), &["gen"]);
    assert_eq!(code(&o), 3);
    for id in ["p01", "p09", "f05"] {
        assert!(t.path().join(format!("lists/{id}.json")).exists());
    }
}

#[test]
fn gen_is_byte_identical_on_rerun() {
    let t = setup(RULES, "");
    assert!(rulelab(t.path(), &["gen"]).status.success());
    let first = read(t.path().join("lists/p09.json"));
    let prov = read(t.path().join("lists/PROVENANCE.json"));
    assert!(rulelab(t.path(), &["gen"]).status.success());
    assert_eq!(first, read(t.path().join("lists/p09.json")));
    assert_eq!(prov, read(t.path().join("lists/PROVENANCE.json")));
    assert!(prov.contains("\"config_sha256\""));
}

#[test]
fn llm_without_endpoint_or_credentials_is_a_config_error() {
    let t = setup(RULES, "");
    assert!(rulelab(t.path(), &["gen"]).status.success());
    assert_eq!(code(&rulelab(t.path(), &["run", "--engine", "llm"])), 2);

    let t = setup(RULES, r#","endpoint":"endpoint.json""#);
    std::fs::write(t.path().join("endpoint.json"), r#"{"base_url":"http://127.0.0.1:9","model":"m"}"#).unwrap();
    assert!(rulelab(t.path(), &["gen"]).status.success());
    let o = rulelab(t.path(), &["run", "--engine", "llm"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("RULELAB_API_KEY"));
}

#[test]
fn plot_run_resumes_only_missing_rules() {
    let t = setup(RULES, r#","learner":{"max_size":3}"#);
    assert!(rulelab(t.path(), &["gen"]).status.success());
    assert!(rulelab(t.path(), &["run", "--engine", "plot"]).status.success());
    let series = t.path().join("out/plot/series");
    let before = std::fs::metadata(series.join("p01.json")).unwrap().modified().unwrap();
    let kept = read(series.join("p09.json"));
    std::fs::remove_file(series.join("p09.json")).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    assert!(rulelab(t.path(), &["run", "--engine", "plot"]).status.success());
    assert_eq!(std::fs::metadata(series.join("p01.json")).unwrap().modified().unwrap(), before);
    assert_eq!(read(series.join("p09.json")), kept);
    let maps = read(t.path().join("out/plot/map_rules.txt"));
    assert_eq!(maps.lines().count(), 3 * 13);
    assert!(maps.lines().next().unwrap().starts_with("p01 0 "));
}

#[test]
fn missing_list_is_a_data_failure_for_that_rule_only() {
    let t = setup(RULES, r#","learner":{"max_size":2}"#);
    assert!(rulelab(t.path(), &["gen"]).status.success());
    std::fs::remove_file(t.path().join("lists/f05.json")).unwrap();
    assert_eq!(code(&rulelab(t.path(), &["run", "--engine", "plot"])), 3);
    assert!(t.path().join("out/plot/series/p01.json").exists());
}

#[test]
fn grade_gold_empty_and_unparseable() {
    let t = setup(RULES, "");
    assert!(rulelab(t.path(), &["gen"]).status.success());

    std::fs::write(t.path().join("gold.txt"), "p01 12 blue\np09 12 (or blue circle)\nf05 12 (exists all triangle)\n").unwrap();
    assert!(rulelab(t.path(), &["grade", "--elicited", "gold.txt"]).status.success());
    let summary: serde_json::Value = serde_json::from_str(&read(t.path().join("out/grade/grade_summary.json"))).unwrap();
    assert_eq!(summary["summary"]["likelihood_match_rate"], 1.0);
    assert_eq!(summary["summary"]["equivalence_match_rate"], 1.0);

    std::fs::write(t.path().join("empty.txt"), "").unwrap();
    assert!(rulelab(t.path(), &["grade", "--elicited", "empty.txt", "--out", "g2"]).status.success());
    assert_eq!(read(t.path().join("g2/grade_rules.csv")).lines().count(), 1);

    std::fs::write(t.path().join("bad.txt"), "p01 3 blue\np01 12 (and blue\n").unwrap();
    assert!(rulelab(t.path(), &["grade", "--elicited", "bad.txt", "--out", "g3"]).status.success());
    let rules = read(t.path().join("g3/grade_rules.csv"));
    assert!(rules.lines().nth(1).unwrap().contains(",false,"), "{rules}");
    assert_eq!(read(t.path().join("g3/unparseable.csv")).lines().count(), 2);
    let sets = read(t.path().join("g3/grade_sets.csv"));
    assert!(sets.contains("p01,3,blue,"));
}

/// Simulated participants who follow the rule with probability `fidelity`.
fn synth_humans(lists: &[ExemplarList], n_subjects: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for l in lists {
        for s in 0..n_subjects {
            let fidelity = if s == 0 { 0.3 } else { 0.9 };
            let sets = if s == 1 { 3 } else { l.sets.len() };
            for (k, set) in l.sets.iter().enumerate().take(sets) {
                for (o, gold) in set.labels.iter().enumerate() {
                    let r = if rng.gen::<f64>() < fidelity { *gold } else { !*gold };
                    rows.push(HumanRow {
                        subject_id: format!("s{s}"),
                        rule_id: l.rule_id.clone(),
                        set_index: k,
                        object_index: o,
                        response: Some(r),
                    });
                }
            }
        }
    }
    write_human_csv(&rows)
}

#[test]
fn report_with_humans_split_and_fit() {
    let t = setup(RULES, r#","learner":{"max_size":3,"fit_step":0.25},"subsample_draws":200"#);
    let d = t.path();
    assert!(rulelab(d, &["gen"]).status.success());
    let lists: Vec<ExemplarList> =
        ["p01", "p09", "f05"].iter().map(|id| ExemplarList::load(&d.join(format!("lists/{id}.json"))).unwrap()).collect();
    std::fs::write(d.join("humans.csv"), synth_humans(&lists, 12, 5)).unwrap();

    assert!(rulelab(d, &["run", "--engine", "plot"]).status.success());
    let model_only = rulelab(d, &["report", "--series", "out/plot/series", "--out", "r0"]);
    assert!(model_only.status.success());
    assert!(!read(d.join("r0/table1.csv")).contains("_sd"));
    assert!(!d.join("r0/r2.csv").exists());

    let o = rulelab(d, &["report", "--series", "out/plot/series", "--human", "humans.csv", "--out", "r1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read(d.join("r1/table1.csv"));
    let cohorts: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(cohorts, vec!["plot", "human", "human_first_14_sets"]);
    assert!(table.lines().next().unwrap().contains("overall_fol_sd"));
    let filter = read(d.join("r1/human_filter.csv"));
    assert!(filter.contains("s1,min-sets"));
    let deltas = read(d.join("r1/deltas_plot_overall.csv"));
    assert_eq!(deltas.lines().count(), 4);
    let r2 = read(d.join("r1/r2.csv"));
    assert!(r2.lines().any(|l| l.starts_with("plot,all,")));
    assert!(read(d.join("r1/trajectories/p09.csv")).contains(",human,"));
    assert!(read(d.join("r1/PROVENANCE.json")).contains("humans.csv"));

    let again = rulelab(d, &["report", "--series", "out/plot/series", "--human", "humans.csv", "--out", "r2"]);
    assert!(again.status.success());
    assert_eq!(table, read(d.join("r2/table1.csv")));

    assert!(rulelab(d, &["split", "--held-out", "1"]).status.success());
    let cfg = read(d.join("experiment.json")).replace(r#""seed":3"#, r#""seed":3,"human":"humans.csv""#);
    std::fs::write(d.join("experiment.json"), cfg).unwrap();
    let o = rulelab(d, &["fit-noise", "--split", "out/split.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&read(d.join("out/fit/fit_noise.json"))).unwrap();
    assert_eq!(fit["grid_points"], 25);
    assert_eq!(fit["train"].as_array().unwrap().len(), 2);
    assert_eq!(read(d.join("out/fit/surface.csv")).lines().count(), 26);
}

#[test]
fn equiv_prints_counterexample() {
    let t = tempfile::tempdir().unwrap();
    let o = rulelab(t.path(), &["equiv", "(or blue green)", "(not yellow)"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("equivalent"));
    let o = rulelab(t.path(), &["equiv", "(exists others blue)", "(exists all blue)"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("not equivalent") && out.contains("set: [small blue circle]"), "{out}");
    assert_eq!(code(&rulelab(t.path(), &["equiv", "(and", "blue"])), 3);
}
