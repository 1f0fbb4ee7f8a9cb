//! Math-focused training-data curation, reward modelling and best-of-n
//! evaluation.
//!
//! The pipeline runs prompt curation ([`curation`], [`decontam`]), generation
//! through an OpenAI-compatible or offline stub backend ([`gateway`]),
//! answer grading ([`answer`]), preference-group construction ([`pairs`]),
//! reward-model training ([`reward`]) and best-of-n evaluation ([`bon`]).
//! Every stage is deterministic given its seed.

pub mod answer;
pub mod bon;
pub mod cli;
pub mod config;
pub mod curation;
pub mod decontam;
pub mod error;
pub mod gateway;
pub mod jsonl;
pub mod pairs;
pub mod reward;
pub mod seeding;

pub use answer::{answers_equivalent, extract_boxed, grade_response, parse_answer, CanonicalAnswer, CorrectnessLabel};
pub use config::PipelineConfig;
pub use error::{Error, Result};
