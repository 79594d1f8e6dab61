//! End-to-end tooling for SDOH variable annotation and integration: load
//! data-dictionary catalogs, render classification prompts, dispatch them to
//! a chat-completion endpoint (or a deterministic mock), postprocess replies
//! into domain labels, score runs against gold labels and inter-annotator
//! agreement, merge domain-filtered tract panels onto patient records, and
//! run a logistic-regression prediction harness with paired significance
//! tests.

pub mod catalog;
pub mod client;
pub mod eval;
pub mod manifest;
pub mod merge;
pub mod mock;
pub mod panel;
pub mod parser;
pub mod predict;
pub mod prompt;
pub mod report;
pub mod run;
pub mod stats;

pub use catalog::{
    load_dictionary, write_dictionary, CatalogError, FieldSubset, SdohDomain, VariableCatalog,
    VariableRecord,
};
pub use client::{cached_complete, ClientError, DecodingParams, LlmClient, RawResponse, ResponseCache};
pub use eval::{agreement_report, AgreementReport, EvalError, EvalReport};
pub use merge::{merge, DesignMatrix, PatientRecord, PatientTable};
pub use mock::{MockMode, MockServer};
pub use panel::{IntegrateError, SdohPanel, TractFips, TractYearKey};
pub use parser::{parse_response, parse_run, MatchedRule, Outcome, ParsedResponse};
pub use manifest::RunManifest;
pub use predict::{cross_validate, train_logistic, CvResult, PredictError, TrainConfig};
pub use prompt::{build_prompt, enumerate_sweep, estimate_tokens, ExemplarSet, PromptJob, PromptSpec};
pub use run::{run_subset, run_sweep, AnnotationRun, Dispatcher, PipelineError, RunReport};
pub use stats::{auroc, f1_binary, paired_t_test, StatsError, TTestResult};
