//! Rule-induction laboratory: a logical concept language over small object
//! sets, exemplar lists, a Bayesian rule learner, a harness for prompting hosted
//! language models through the same labeling task, and the metrics used to
//! compare learners against human learning curves.

pub mod catalog;
pub mod dsl;
pub mod exemplar;
pub mod fsutil;
pub mod harness;
pub mod metrics;
pub mod plot;
