use std::fmt::Display;

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Class {
    Config = 2,
    Data = 3,
    Transport = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure { class: Class::Config, error: e.into() }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        Failure { class: Class::Data, error: e.into() }
    }

    pub fn transport(e: impl Into<anyhow::Error>) -> Self {
        Failure { class: Class::Transport, error: e.into() }
    }

    pub fn msg(class: Class, m: impl Display) -> Self {
        Failure { class, error: anyhow::anyhow!("{m}") }
    }
}

/// Collects per-rule failures so a batch can finish before reporting them.
#[derive(Debug, Default)]
pub struct Failures(pub Vec<(String, Failure)>);

impl Failures {
    pub fn push(&mut self, rule: &str, f: Failure) {
        log::error!("rule {rule}: {:#}", f.error);
        self.0.push((rule.to_string(), f));
    }

    /// The most severe class among the failures, if any.
    pub fn finish(self, what: &str) -> Result<(), Failure> {
        let Some(class) = self.0.iter().map(|(_, f)| f.class).max() else {
            return Ok(());
        };
        let ids: Vec<&str> = self.0.iter().map(|(r, _)| r.as_str()).collect();
        Err(Failure::msg(class, format!("{what} failed for {} rule(s): {}", ids.len(), ids.join(", "))))
    }
}
