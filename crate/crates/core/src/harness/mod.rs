//! Drives hosted language models through the labeling task: prompts with
//! gold-label history, label and probability extraction, cached transport and
//! resumable transcripts.

mod extract;
mod prompt;
mod session;
mod transport;

use std::path::PathBuf;

pub use extract::{
    extract_labels, label_family, true_probability, Extraction, ObjectLabel, ABSTAINED, MISSING, NON_BOOLEAN,
    OBJECT_MISMATCH,
};
pub use prompt::{build_prompt, PromptBundle, PromptMode, Role, Turn, CHAT_PREAMBLE, COMPLETION_PREAMBLE};
pub use session::{list_hash, run_session, ResponseCache, SessionStats, SessionTranscript, SetEntry};
#[cfg(feature = "http")]
pub use transport::HttpTransport;
pub use transport::{parse_response, with_retry, ApiRequest, EndpointConfig, ParsedResponse, RateLimiter, Transport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("endpoint config: {0}")]
    Config(String),
    #[error("credential variable `{0}` is not set")]
    Credentials(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("neither True nor False appears among the top tokens")]
    DegenerateMass,
    #[error("{}: transcript belongs to a different list, endpoint or mode", .0.display())]
    Resume(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    /// Network failures, rate limiting and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            HarnessError::Transport(_) => true,
            HarnessError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
