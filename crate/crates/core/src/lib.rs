//! Recommends the developers best suited to fix an incoming bug report by
//! mining an issue-tracker history: corpus ingestion and filtering, text
//! preprocessing, corpus-level and per-developer topic models, experience
//! profiles, candidate filtering with Top-K ranking, and a time-ordered
//! evaluation harness.

pub mod corpus;
pub mod devtopics;
pub mod error;
pub mod eval;
pub mod lda;
pub mod profiles;
pub mod synth;
pub mod textprep;
pub mod triage;

pub use corpus::{BugReport, Combination, CorpusStats, FilterConfig};
pub use devtopics::{DevModelConfig, DeveloperTopicModel, EmbeddingProvider};
pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalRun};
pub use lda::{LdaModel, MtmModel, NaiveBayesClassifier};
pub use profiles::DeveloperProfile;
pub use triage::{
    ModelStore, RecommendationRequest, RecommendationResult, TriageState,
};
