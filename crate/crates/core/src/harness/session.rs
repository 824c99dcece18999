use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::extract::{extract_labels, true_probability, ObjectLabel};
use super::prompt::{build_prompt, PromptMode};
use super::transport::{parse_response, ApiRequest, EndpointConfig, Transport};
use super::HarnessError;
use crate::exemplar::ExemplarList;
use crate::fsutil::{sha256_hex, write_atomic};
use crate::metrics::{LabelRecord, LabelSeries};

/// Response bodies on disk, keyed by endpoint-config hash and request hash.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn key(cfg: &EndpointConfig, req: &ApiRequest) -> String {
        sha256_hex(format!("{}\n{}", cfg.cache_hash(), req.hash()).as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Value> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, key: &str, body: &Value) -> Result<(), HarnessError> {
        let p = self.path(key);
        write_atomic(&p, body.to_string().as_bytes()).map_err(|e| HarnessError::Io { path: p, source: e })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub set_index: usize,
    pub prompt: String,
    pub requests: Vec<ApiRequest>,
    pub responses: Vec<Value>,
    pub labels: Vec<ObjectLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_text: Option<String>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub rule_id: String,
    pub model: String,
    pub mode: PromptMode,
    pub config_hash: String,
    pub list_hash: String,
    /// Number of sets this session will cover.
    pub n_sets: usize,
    pub sets: Vec<SetEntry>,
    pub excluded_total: usize,
}

impl SessionTranscript {
    pub fn is_complete(&self) -> bool {
        self.sets.len() == self.n_sets
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.into(), source: e })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Protocol(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("transcript serializes");
        write_atomic(path, text.as_bytes()).map_err(|e| HarnessError::Io { path: path.into(), source: e })
    }

    /// Model labels aligned with the gold list, for the metrics module.
    pub fn series(&self, list: &ExemplarList, learner: &str) -> LabelSeries {
        let mut records = Vec::new();
        for e in &self.sets {
            let set = &list.sets[e.set_index];
            for (i, l) in e.labels.iter().enumerate() {
                records.push(LabelRecord {
                    set_index: e.set_index,
                    object_index: i,
                    gold: set.labels[i],
                    model: l.label,
                    p_true: l.p_true,
                    human: None,
                });
            }
        }
        LabelSeries { rule_id: list.rule_id.clone(), learner: learner.to_string(), records }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub network_calls: usize,
    pub cache_hits: usize,
}

pub fn list_hash(list: &ExemplarList) -> String {
    sha256_hex(list.to_json().as_bytes())
}

/// Runs (or resumes) one labeling session. Prompts always carry gold-label
/// history. The transcript is written after every set, so an interrupted
/// session continues where it stopped.
pub fn run_session(
    list: &ExemplarList,
    cfg: &EndpointConfig,
    mode: PromptMode,
    transport: &dyn Transport,
    cache: Option<&ResponseCache>,
    transcript_path: Option<&Path>,
) -> Result<(SessionTranscript, SessionStats), HarnessError> {
    let n_sets = cfg.max_sets.map_or(list.sets.len(), |m| m.min(list.sets.len()));
    let fresh = SessionTranscript {
        rule_id: list.rule_id.clone(),
        model: cfg.model.clone(),
        mode,
        config_hash: cfg.cache_hash(),
        list_hash: list_hash(list),
        n_sets,
        sets: Vec::new(),
        excluded_total: 0,
    };
    let mut tr = match transcript_path.filter(|p| p.exists()) {
        Some(p) => {
            let old = SessionTranscript::load(p)?;
            if (old.mode, &old.config_hash, &old.list_hash, old.n_sets) != (mode, &fresh.config_hash, &fresh.list_hash, n_sets) {
                return Err(HarnessError::Resume(p.to_path_buf()));
            }
            old
        }
        None => fresh,
    };
    let mut stats = SessionStats::default();
    let mut fetch = |req: &ApiRequest| -> Result<Value, HarnessError> {
        let key = ResponseCache::key(cfg, req);
        if let Some(body) = cache.and_then(|c| c.get(&key)) {
            stats.cache_hits += 1;
            return Ok(body);
        }
        stats.network_calls += 1;
        let body = transport.send(req)?;
        if let Some(c) = cache {
            c.put(&key, &body)?;
        }
        Ok(body)
    };

    for k in tr.sets.len()..n_sets {
        let prompt = build_prompt(list, k, mode);
        let gold = &list.sets[k].labels;
        let mut requests = Vec::new();
        let mut responses = Vec::new();
        let (labels, rule_text) = if mode.is_chat() {
            let req = ApiRequest::chat(cfg, &prompt);
            let body = fetch(&req)?;
            let parsed = parse_response(&body)?;
            let mut ex = extract_labels(&parsed.text, &prompt.query, mode);
            let positions = parsed.label_positions();
            let n_labeled = ex.labels.iter().filter(|l| l.label.is_some()).count();
            if positions.len() == n_labeled {
                for (l, top) in ex.labels.iter_mut().filter(|l| l.label.is_some()).zip(positions) {
                    l.p_true = true_probability(top).ok();
                }
            }
            requests.push(req);
            responses.push(body);
            (ex.labels, ex.rule_text)
        } else {
            let mut labels = Vec::with_capacity(prompt.query.len());
            for i in 0..prompt.query.len() {
                let req = ApiRequest::completion(cfg, &prompt.completion_query(gold, i));
                let body = fetch(&req)?;
                let parsed = parse_response(&body)?;
                let mut l = extract_labels(&parsed.text, &prompt.query[i..=i], mode).labels.remove(0);
                l.p_true = parsed.tokens.first().and_then(|(_, top)| true_probability(top).ok());
                labels.push(l);
                requests.push(req);
                responses.push(body);
            }
            (labels, None)
        };
        let excluded = labels.iter().filter(|l| l.label.is_none()).count();
        tr.excluded_total += excluded;
        tr.sets.push(SetEntry { set_index: k, prompt: prompt.render(), requests, responses, labels, rule_text, excluded });
        if let Some(p) = transcript_path {
            tr.save(p)?;
        }
    }
    if let Some(p) = transcript_path {
        if !p.exists() {
            tr.save(p)?;
        }
    }
    Ok((tr, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, FeatureVocab};
    use crate::exemplar::generate_list;
    use serde_json::json;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Answers every query by echoing the objects with a fixed label.
    struct Echo {
        calls: AtomicUsize,
        fail_after: Option<usize>,
    }

    impl Transport for Echo {
        fn send(&self, req: &ApiRequest) -> Result<Value, HarnessError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_after.is_some_and(|f| n >= f) {
                return Err(HarnessError::Transport("offline".into()));
            }
            if req.path == "completions" {
                return Ok(json!({"choices":[{"text":" True","logprobs":{"tokens":[" True"],"top_logprobs":[{" True":-0.2231435513142097," False":-1.6094379124341003}]}}]}));
            }
            let last = req.body["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap().to_string();
            let text: String = last.lines().filter_map(|l| l.strip_prefix("- ")).map(|o| format!("- {o} -> False\n")).collect();
            Ok(json!({"choices":[{"message":{"content":text}}]}))
        }
    }

    fn setup() -> (ExemplarList, EndpointConfig) {
        let v = FeatureVocab::example();
        let list = generate_list("r", &parse("blue", &v).unwrap(), &v, 5, 25);
        let cfg = EndpointConfig::from_json(r#"{"base_url":"http://x","model":"echo"}"#).unwrap();
        (list, cfg)
    }

    #[test]
    fn full_session_then_warm_replay() {
        let (list, cfg) = setup();
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path().join("cache"));
        let t = Echo { calls: AtomicUsize::new(0), fail_after: None };
        let (tr, stats) = run_session(&list, &cfg, PromptMode::Chat, &t, Some(&cache), None).unwrap();
        assert_eq!(tr.sets.len(), 25);
        assert_eq!(stats.network_calls, 25);
        assert_eq!(tr.excluded_total, 0);
        let (again, stats) = run_session(&list, &cfg, PromptMode::Chat, &t, Some(&cache), None).unwrap();
        assert_eq!(stats.network_calls, 0);
        assert_eq!(again, tr);
    }

    #[test]
    fn truncation_and_completion_probabilities() {
        let (list, mut cfg) = setup();
        cfg.max_sets = Some(14);
        let t = Echo { calls: AtomicUsize::new(0), fail_after: None };
        let (tr, stats) = run_session(&list, &cfg, PromptMode::Completion, &t, None, None).unwrap();
        assert_eq!(tr.sets.len(), 14);
        assert_eq!(stats.network_calls, list.sets[..14].iter().map(|s| s.len()).sum::<usize>());
        let p = tr.sets[0].labels[0].p_true.unwrap();
        assert!((p - 0.8 / 1.0).abs() < 1e-9);
        let series = tr.series(&list, "echo");
        assert_eq!(series.records.len(), stats.network_calls);
    }

    #[test]
    fn resumes_after_transport_failure() {
        let (list, cfg) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let flaky = Echo { calls: AtomicUsize::new(0), fail_after: Some(10) };
        assert!(run_session(&list, &cfg, PromptMode::Chat, &flaky, None, Some(&path)).is_err());
        assert_eq!(SessionTranscript::load(&path).unwrap().sets.len(), 10);
        let ok = Echo { calls: AtomicUsize::new(0), fail_after: None };
        let (tr, stats) = run_session(&list, &cfg, PromptMode::Chat, &ok, None, Some(&path)).unwrap();
        assert!(tr.is_complete());
        assert_eq!(stats.network_calls, 15);
        let mut other = cfg.clone();
        other.temperature = 0.0;
        assert!(matches!(
            run_session(&list, &other, PromptMode::Chat, &ok, None, Some(&path)),
            Err(HarnessError::Resume(_))
        ));
    }
}
