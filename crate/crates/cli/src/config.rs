use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rulelab::catalog::{parse_manifest, ManifestError, RuleEntry};
use rulelab::dsl::FeatureVocab;
use rulelab::exemplar::ExemplarList;
use rulelab::harness::PromptMode;
use rulelab::metrics::Window;
use rulelab::plot::Grammar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inference {
    Enumerate,
    Mh,
}

fn d_max_size() -> usize {
    4
}
fn d_cap() -> usize {
    2_000_000
}
fn d_alpha() -> f64 {
    0.99
}
fn d_beta() -> f64 {
    0.5
}
fn d_inference() -> Inference {
    Inference::Enumerate
}
fn d_mh_iterations() -> usize {
    20_000
}
fn d_fit_step() -> f64 {
    0.05
}
fn d_dump_top() -> usize {
    10
}
fn d_n_sets() -> usize {
    25
}
fn d_mode() -> PromptMode {
    PromptMode::Chat
}
fn d_windows() -> Vec<Window> {
    vec![Window::Overall, Window::LastQuarter]
}
fn d_max_set_size() -> usize {
    5
}
fn d_draws() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSettings {
    #[serde(default)]
    pub grammar: Option<PathBuf>,
    #[serde(default = "d_max_size")]
    pub max_size: usize,
    #[serde(default = "d_cap")]
    pub hypothesis_cap: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_inference")]
    pub inference: Inference,
    #[serde(default = "d_mh_iterations")]
    pub mh_iterations: usize,
    #[serde(default = "d_fit_step")]
    pub fit_step: f64,
    /// Hypotheses per timestep in posterior dumps; 0 disables them.
    #[serde(default = "d_dump_top")]
    pub dump_top: usize,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// One experiment. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    pub rules: PathBuf,
    pub lists_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default = "d_n_sets")]
    pub n_sets: usize,
    #[serde(default)]
    pub endpoint: Option<PathBuf>,
    #[serde(default = "d_mode")]
    pub prompt_mode: PromptMode,
    #[serde(default)]
    pub learner: LearnerSettings,
    #[serde(default)]
    pub human: Option<PathBuf>,
    #[serde(default = "d_windows")]
    pub windows: Vec<Window>,
    #[serde(default = "d_max_set_size")]
    pub equiv_max_set_size: usize,
    #[serde(default = "d_draws")]
    pub subsample_draws: usize,
    #[serde(skip)]
    pub source: PathBuf,
    #[serde(skip)]
    pub source_text: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut cfg.rules);
        abs(&mut cfg.lists_dir);
        abs(&mut cfg.output_dir);
        for p in [&mut cfg.vocab, &mut cfg.endpoint, &mut cfg.human, &mut cfg.learner.grammar].into_iter().flatten() {
            abs(p);
        }
        cfg.source = path.to_path_buf();
        cfg.source_text = text;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let must_exist = [Some(&self.rules), self.vocab.as_ref(), self.endpoint.as_ref(), self.human.as_ref(), self.learner.grammar.as_ref()];
        for p in must_exist.into_iter().flatten() {
            if !p.exists() {
                bail!("referenced path {} does not exist", p.display());
            }
        }
        let l = &self.learner;
        if !(0.0..=1.0).contains(&l.alpha) || !(0.0..=1.0).contains(&l.beta) {
            bail!("learner alpha/beta must lie in [0, 1]");
        }
        if l.max_size == 0 {
            bail!("learner.max_size must be at least 1");
        }
        if self.n_sets == 0 {
            bail!("n_sets must be at least 1");
        }
        if self.windows.is_empty() {
            bail!("at least one metrics window is required");
        }
        Ok(())
    }

    pub fn vocab(&self) -> Result<FeatureVocab> {
        match &self.vocab {
            None => Ok(FeatureVocab::example()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(FeatureVocab::from_json(&text).with_context(|| format!("vocab {}", p.display()))?)
            }
        }
    }

    pub fn grammar(&self, vocab: &FeatureVocab) -> Result<Grammar> {
        match &self.learner.grammar {
            None => Ok(Grammar::default_for(vocab)),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(Grammar::from_json(&text, vocab).with_context(|| format!("grammar {}", p.display()))?)
            }
        }
    }

    pub fn manifest(&self, vocab: &FeatureVocab) -> Result<(Vec<RuleEntry>, Vec<ManifestError>)> {
        let text = std::fs::read_to_string(&self.rules).with_context(|| format!("reading {}", self.rules.display()))?;
        Ok(parse_manifest(&text, vocab))
    }

    pub fn list_path(&self, rule_id: &str) -> PathBuf {
        self.lists_dir.join(format!("{rule_id}.json"))
    }

    pub fn load_list(&self, rule_id: &str) -> Result<ExemplarList> {
        let p = self.list_path(rule_id);
        ExemplarList::load(&p).with_context(|| format!("list {}", p.display()))
    }
}
