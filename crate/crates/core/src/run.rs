//! Sweep orchestration: dispatch prompt jobs with bounded concurrency, parse
//! replies, score against gold labels, and serialize run artifacts.
//!
//! Artifact files are deterministic given the same inputs and a warm cache;
//! anything time-dependent (latency, cache hits, timestamps) belongs in the
//! run manifest instead.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, FieldSubset, SdohDomain, VariableCatalog};
use crate::client::{cached_complete, ClientError, LlmClient, RawResponse, ResponseCache};
use crate::eval::{EvalError, EvalReport};
use crate::parser::{parse_run, ParsedLine, ParsedResponse};
use crate::prompt::{enumerate_subsets, ExemplarSet, PromptJob};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("request for {dataset_id}/{variable_name} failed: {source}")]
    Client {
        dataset_id: String,
        variable_name: String,
        #[source]
        source: ClientError,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sends jobs to the endpoint, optionally through the response cache, with a
/// bounded number of in-flight requests. Responses are re-associated with
/// jobs by index.
pub struct Dispatcher<'a> {
    client: &'a LlmClient,
    cache: Option<&'a ResponseCache>,
    concurrency: usize,
}

impl<'a> Dispatcher<'a> {
    pub fn new(client: &'a LlmClient) -> Dispatcher<'a> {
        Dispatcher {
            client,
            cache: None,
            concurrency: 4,
        }
    }

    pub fn with_cache(mut self, cache: &'a ResponseCache) -> Dispatcher<'a> {
        self.cache = Some(cache);
        self
    }

    pub fn with_concurrency(mut self, concurrency: usize) -> Dispatcher<'a> {
        self.concurrency = concurrency.max(1);
        self
    }

    fn send(&self, prompt: &str) -> Result<RawResponse, ClientError> {
        match self.cache {
            Some(cache) => cached_complete(cache, self.client, prompt),
            None => self.client.complete(prompt),
        }
    }

    /// Dispatch all jobs, preserving job order in the result. Fails fast on
    /// the first error, naming the offending variable.
    pub fn dispatch(&self, jobs: &[PromptJob]) -> Result<Vec<RawResponse>, PipelineError> {
        if jobs.is_empty() {
            return Ok(Vec::new());
        }
        let workers = self.concurrency.min(jobs.len());
        let slots: Vec<Mutex<Option<RawResponse>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let first_error: Mutex<Option<PipelineError>> = Mutex::new(None);

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if abort.load(Ordering::SeqCst) {
                        break;
                    }
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if index >= jobs.len() {
                        break;
                    }
                    let job = &jobs[index];
                    match self.send(&job.prompt_text) {
                        Ok(response) => {
                            *slots[index].lock().expect("slot lock") = Some(response);
                        }
                        Err(source) => {
                            abort.store(true, Ordering::SeqCst);
                            let mut guard = first_error.lock().expect("error lock");
                            if guard.is_none() {
                                *guard = Some(PipelineError::Client {
                                    dataset_id: job.record_key.dataset_id.clone(),
                                    variable_name: job.record_key.variable_name.clone(),
                                    source,
                                });
                            }
                            break;
                        }
                    }
                });
            }
        });

        if let Some(error) = first_error.into_inner().expect("error lock") {
            return Err(error);
        }
        Ok(slots
            .into_iter()
            .map(|slot| slot.into_inner().expect("slot lock").expect("slot filled"))
            .collect())
    }
}

/// One (model, shots, subset) sweep over a catalog.
#[derive(Debug, Clone)]
pub struct AnnotationRun {
    pub model_id: String,
    pub shots: u8,
    pub subset: FieldSubset,
    pub jobs: Vec<PromptJob>,
    pub responses: Vec<RawResponse>,
    pub parsed: Vec<ParsedResponse>,
    /// Gold-based scores over the records that carry gold labels; `None`
    /// when the catalog has none.
    pub eval: Option<EvalReport>,
}

impl AnnotationRun {
    /// Refusal and non-response fractions over every parsed reply.
    pub fn refusal_nonresponse(&self) -> (f64, f64) {
        match crate::eval::rates(&self.parsed) {
            Ok(rates) => rates,
            Err(_) => (0.0, 0.0),
        }
    }

    pub fn total_latency(&self) -> Duration {
        self.responses.iter().map(|r| r.latency).sum()
    }

    pub fn cache_hits(&self) -> usize {
        self.responses.iter().filter(|r| r.from_cache).count()
    }
}

fn eval_against_gold(
    catalog: &VariableCatalog,
    parsed: &[ParsedResponse],
) -> Result<Option<EvalReport>, EvalError> {
    let scored: Vec<(&ParsedResponse, SdohDomain)> = catalog
        .iter()
        .zip(parsed)
        .filter_map(|(record, p)| record.gold_domain.map(|gold| (p, gold)))
        .collect();
    if scored.is_empty() {
        return Ok(None);
    }
    let parsed_subset: Vec<ParsedResponse> = scored.iter().map(|(p, _)| (*p).clone()).collect();
    let gold: Vec<SdohDomain> = scored.iter().map(|(_, g)| *g).collect();
    EvalReport::from_run(&parsed_subset, &gold).map(Some)
}

/// Run one subset end to end: render, dispatch, parse, score.
pub fn run_subset(
    catalog: &VariableCatalog,
    subset: FieldSubset,
    shots: u8,
    exemplars: Option<&ExemplarSet>,
    dispatcher: &Dispatcher<'_>,
) -> Result<AnnotationRun, PipelineError> {
    let jobs = enumerate_subsets(catalog, &[subset], shots, exemplars, true);
    let responses = dispatcher.dispatch(&jobs)?;
    let parsed = parse_run(&responses);
    let eval = eval_against_gold(catalog, &parsed)?;
    Ok(AnnotationRun {
        model_id: dispatcher.client.model_id().to_string(),
        shots,
        subset,
        jobs,
        responses,
        parsed,
        eval,
    })
}

/// Run several subsets in their given order.
pub fn run_sweep(
    catalog: &VariableCatalog,
    subsets: &[FieldSubset],
    shots: u8,
    exemplars: Option<&ExemplarSet>,
    dispatcher: &Dispatcher<'_>,
) -> Result<Vec<AnnotationRun>, PipelineError> {
    subsets
        .iter()
        .map(|&subset| run_subset(catalog, subset, shots, exemplars, dispatcher))
        .collect()
}

/// Write every job of a sweep as JSON Lines in run order.
pub fn write_jobs_jsonl(runs: &[AnnotationRun], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    for run in runs {
        for job in &run.jobs {
            serde_json::to_writer(&mut file, job)?;
            file.write_all(b"\n")?;
        }
    }
    file.flush()
}

/// Write one run's parsed outcomes as JSON Lines.
pub fn write_parsed_jsonl(run: &AnnotationRun, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    for (job, parsed) in run.jobs.iter().zip(&run.parsed) {
        let line = ParsedLine::new(job.record_key.clone(), parsed);
        serde_json::to_writer(&mut file, &line)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

/// Deterministic per-subset summary, as stored in report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: FieldSubset,
    pub n: usize,
    pub refusal_rate: f64,
    pub nonresponse_rate: f64,
    pub eval: Option<EvalReport>,
}

/// Deterministic run summary: one entry per swept subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model_id: String,
    pub shots: u8,
    pub subsets: Vec<SubsetReport>,
}

impl RunReport {
    pub fn from_runs(runs: &[AnnotationRun]) -> RunReport {
        let model_id = runs.first().map_or_else(String::new, |r| r.model_id.clone());
        let shots = runs.first().map_or(0, |r| r.shots);
        let subsets = runs
            .iter()
            .map(|run| {
                let (refusal_rate, nonresponse_rate) = run.refusal_nonresponse();
                SubsetReport {
                    subset: run.subset,
                    n: run.parsed.len(),
                    refusal_rate,
                    nonresponse_rate,
                    eval: run.eval.clone(),
                }
            })
            .collect();
        RunReport {
            model_id,
            shots,
            subsets,
        }
    }

    pub fn micro_f1(&self, subset: FieldSubset) -> Option<f64> {
        self.subsets
            .iter()
            .find(|s| s.subset == subset)
            .and_then(|s| s.eval.as_ref().map(|e| e.micro_f1))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let payload = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path.as_ref(), payload)
    }

    pub fn load_json(path: impl AsRef<Path>) -> std::io::Result<RunReport> {
        let contents = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&contents).map_err(|err| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("run report: {err}"))
        })
    }
}
