//! `sdoh annotate`: render prompts for the chosen subsets, dispatch them to
//! the endpoint or a mock, parse and score the replies, and write run
//! artifacts (jobs, parsed outcomes, report, manifest) under the output
//! directory. Resumable: responses are cached by content hash.

use std::path::PathBuf;
use std::time::Duration;

use clap::Args;

use sdoh_core::catalog::{load_dictionary, FieldSubset, VariableCatalog};
use sdoh_core::client::{DecodingParams, LlmClient, ResponseCache, RetryPolicy};
use sdoh_core::manifest::{RunManifest, ThroughputStats};
use sdoh_core::mock::{load_script, MockMode, MockServer};
use sdoh_core::prompt::{resolve_exemplars, ExemplarSet};
use sdoh_core::report::{render_full_report, render_throughput};
use sdoh_core::run::{run_sweep, Dispatcher, RunReport};

use crate::error::CliError;
use crate::Context;

const API_KEY_ENV: &str = "SDOH_API_KEY";

#[derive(Args)]
pub struct AnnotateArgs {
    /// Dictionary CSV to annotate.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Dataset id recorded on every variable (e.g. AHRQ, NaNDA).
    #[arg(long)]
    dataset_id: Option<String>,
    /// Model identifier sent with every request.
    #[arg(long)]
    model: Option<String>,
    /// Chat-completion endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Built-in backend instead of an endpoint:
    /// gold-echo | fixed:<text> | scripted:<path>.
    #[arg(long, conflicts_with = "endpoint")]
    mock: Option<String>,
    /// 0 for zero-shot, 1 for one-shot with per-domain exemplars.
    #[arg(long)]
    shots: Option<u8>,
    /// Comma-separated field subsets (default: all seven).
    #[arg(long)]
    subsets: Option<String>,
    /// Dictionary supplying one-shot exemplars; defaults to the annotated
    /// dictionary itself (exemplars are then held out from scoring).
    #[arg(long)]
    exemplar_dictionary: Option<PathBuf>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Maximum in-flight requests.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Response cache directory (default: <out-dir>/cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Attempts per request before giving up.
    #[arg(long)]
    max_retries: Option<u32>,
    /// Base backoff delay between attempts, in milliseconds.
    #[arg(long)]
    retry_base_ms: Option<u64>,
}

fn parse_subsets(raw: &str) -> Result<Vec<FieldSubset>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|label| {
            FieldSubset::from_label(label)
                .ok_or_else(|| CliError::Usage(format!("unknown field subset {label:?}")))
        })
        .collect()
}

fn parse_mock(raw: &str, catalog: &VariableCatalog) -> Result<MockMode, CliError> {
    if raw == "gold-echo" {
        return Ok(MockMode::GoldEcho(catalog.clone()));
    }
    if let Some(text) = raw.strip_prefix("fixed:") {
        return Ok(MockMode::Fixed(text.to_string()));
    }
    if let Some(path) = raw.strip_prefix("scripted:") {
        return Ok(MockMode::Scripted(load_script(path)?));
    }
    Err(CliError::Usage(format!(
        "unknown mock mode {raw:?}; expected gold-echo, fixed:<text>, or scripted:<path>"
    )))
}

pub fn run(ctx: &Context, args: AnnotateArgs) -> Result<(), CliError> {
    let dictionary = args
        .dictionary
        .or_else(|| ctx.config.get("dictionary").map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--dictionary is required".into()))?;
    let dataset_id = args
        .dataset_id
        .or_else(|| ctx.config.get("dataset_id").map(String::from))
        .ok_or_else(|| CliError::Usage("--dataset-id is required".into()))?;
    let model = args
        .model
        .or_else(|| ctx.config.get("model").map(String::from))
        .unwrap_or_else(|| "default-model".to_string());
    let shots = match args.shots {
        Some(shots) => shots,
        None => ctx.config.parse::<u8>("shots")?.unwrap_or(0),
    };
    if shots > 1 {
        return Err(CliError::Usage("--shots must be 0 or 1".into()));
    }
    let subsets = match args
        .subsets
        .as_deref()
        .or_else(|| ctx.config.get("subsets"))
    {
        Some(raw) => parse_subsets(raw)?,
        None => FieldSubset::ALL.to_vec(),
    };
    if subsets.is_empty() {
        return Err(CliError::Usage("--subsets selected nothing".into()));
    }
    let params = DecodingParams {
        temperature: match args.temperature {
            Some(v) => v,
            None => ctx
                .config
                .parse::<f64>("temperature")?
                .unwrap_or(DecodingParams::default().temperature),
        },
        top_p: match args.top_p {
            Some(v) => v,
            None => ctx
                .config
                .parse::<f64>("top_p")?
                .unwrap_or(DecodingParams::default().top_p),
        },
        max_new_tokens: match args.max_tokens {
            Some(v) => v,
            None => ctx
                .config
                .parse::<u32>("max_tokens")?
                .unwrap_or(DecodingParams::default().max_new_tokens),
        },
    };
    let concurrency = match args.concurrency {
        Some(v) => v,
        None => ctx.config.parse::<usize>("concurrency")?.unwrap_or(4),
    };
    let timeout = Duration::from_secs(match args.timeout_secs {
        Some(v) => v,
        None => ctx.config.parse::<u64>("timeout_secs")?.unwrap_or(60),
    });
    let retry = {
        let mut policy = RetryPolicy::default();
        if let Some(attempts) = match args.max_retries {
            Some(v) => Some(v),
            None => ctx.config.parse::<u32>("max_retries")?,
        } {
            policy.max_attempts = attempts.max(1);
        }
        if let Some(base_ms) = match args.retry_base_ms {
            Some(v) => Some(v),
            None => ctx.config.parse::<u64>("retry_base_ms")?,
        } {
            policy.base_delay = Duration::from_millis(base_ms);
        }
        policy
    };

    std::fs::create_dir_all(&ctx.out_dir)?;
    let full_catalog = load_dictionary(&dictionary, &dataset_id)?;

    let mut manifest = RunManifest::begin("annotate", ctx.seed);
    manifest.add_input(&dictionary)?;
    manifest.model_id = Some(model.clone());
    manifest.params = Some(params);
    manifest.shots = Some(shots);
    manifest.subsets = subsets.iter().map(|s| s.label().to_string()).collect();

    // One-shot runs need one exemplar per domain. When the exemplars come
    // from the annotated dictionary itself they are held out from scoring;
    // a separate exemplar dictionary leaves the full catalog scored.
    let exemplar_dict = args
        .exemplar_dictionary
        .or_else(|| ctx.config.get("exemplar_dictionary").map(PathBuf::from));
    let (eval_catalog, exemplars): (VariableCatalog, Option<ExemplarSet>) = if shots == 1 {
        match exemplar_dict {
            Some(path) => {
                let source = load_dictionary(&path, "EXEMPLAR")?;
                manifest.add_input(&path)?;
                let (set, _) = resolve_exemplars(&source, ctx.seed)?;
                (full_catalog.clone(), Some(set))
            }
            None => {
                let (set, remaining) = resolve_exemplars(&full_catalog, ctx.seed)?;
                (remaining, Some(set))
            }
        }
    } else {
        (full_catalog.clone(), None)
    };

    // The mock server must outlive the sweep.
    let mock_raw = args.mock.or_else(|| ctx.config.get("mock").map(String::from));
    let (_server, endpoint) = match mock_raw {
        Some(raw) => {
            let server = MockServer::spawn(parse_mock(&raw, &full_catalog)?)?;
            let endpoint = server.endpoint();
            (Some(server), endpoint)
        }
        None => {
            let endpoint = args
                .endpoint
                .or_else(|| ctx.config.get("endpoint").map(String::from))
                .ok_or_else(|| CliError::Usage("either --endpoint or --mock is required".into()))?;
            (None, endpoint)
        }
    };
    manifest.endpoint = Some(endpoint.clone());

    let client = LlmClient::with_timeout(&endpoint, &model, timeout)
        .with_params(params)
        .with_retry(retry)
        .with_api_key(std::env::var(API_KEY_ENV).ok());
    let cache_dir = args
        .cache_dir
        .or_else(|| ctx.config.get("cache_dir").map(PathBuf::from))
        .unwrap_or_else(|| ctx.out_dir.join("cache"));
    let cache = ResponseCache::open(&cache_dir)?;
    let dispatcher = Dispatcher::new(&client)
        .with_cache(&cache)
        .with_concurrency(concurrency);

    let runs = run_sweep(&eval_catalog, &subsets, shots, exemplars.as_ref(), &dispatcher)?;

    let jobs_path = ctx.out_dir.join("jobs.jsonl");
    sdoh_core::run::write_jobs_jsonl(&runs, &jobs_path)?;
    manifest.add_output(&jobs_path);
    for run in &runs {
        let parsed_path = ctx.out_dir.join(format!("parsed_{}.jsonl", run.subset.label()));
        sdoh_core::run::write_parsed_jsonl(run, &parsed_path)?;
        manifest.add_output(&parsed_path);
    }

    let report = RunReport::from_runs(&runs);
    let report_json = ctx.out_dir.join("report.json");
    report.write_json(&report_json)?;
    manifest.add_output(&report_json);
    let rendered = render_full_report(&[&report]);
    let report_txt = ctx.out_dir.join("report.txt");
    std::fs::write(&report_txt, &rendered)?;
    manifest.add_output(&report_txt);

    let requests: usize = runs.iter().map(|r| r.responses.len()).sum();
    let cache_hits: usize = runs.iter().map(|r| r.cache_hits()).sum();
    let total_seconds: f64 = runs.iter().map(|r| r.total_latency().as_secs_f64()).sum();
    let variables = eval_catalog.n();
    let throughput = ThroughputStats {
        variables,
        requests,
        cache_hits,
        total_seconds,
        seconds_per_variable: if requests == 0 {
            0.0
        } else {
            total_seconds / requests as f64
        },
    };
    manifest.throughput = Some(throughput.clone());
    manifest.finish();
    manifest.write_json(ctx.out_dir.join("manifest.json"))?;

    print!("{rendered}");
    println!("{}", render_throughput(&model, &throughput));
    Ok(())
}
