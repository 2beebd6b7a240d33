mod args;
mod serve_check;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use fred::eval::{self, DocumentSelector, EvalConfig, LengthOrder, Method, Metric, SeedPolicy};
use fred::oracle::verify::{self, VerifyConfig};
use fred::predictor::{load_builtin, Predictor, RemoteConfig, RemoteModel, TargetClass};
use fred::sampling::{required_sample_size, PosLexicon, SamplingConfig, Scheme};
use fred::text::{smooth_idf, tokenize, Corpus};
use fred::{render, Error, Explainer, ExplainerConfig};

use args::*;

/// Why a command did not succeed.
#[derive(Debug)]
enum Failure {
    Error(Error),
    /// A verification or conformance check failed.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = Result<(), Failure>;

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch: Option<[usize; 2]>,
}

impl Failure {
    fn report(&self) -> ErrorBody<'_> {
        match self {
            Failure::Check(message) => ErrorBody {
                kind: "check",
                message: message.clone(),
                exit_code: 1,
                batch: None,
            },
            Failure::Error(e) => {
                let (kind, exit_code, batch) = match e {
                    Error::Transport { batch, .. } => ("transport", 3, Some([batch.start, batch.end])),
                    Error::Config(_) => ("config", 2, None),
                    Error::InvalidInput(_) => ("invalid-input", 2, None),
                    Error::TooLarge { .. } => ("too-large", 2, None),
                    Error::Io { .. } => ("io", 2, None),
                    Error::Json(_) => ("json", 2, None),
                };
                ErrorBody {
                    kind,
                    message: e.to_string(),
                    exit_code,
                    batch,
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let outcome = match cli.command {
        Command::Explain(a) => explain(a),
        Command::Eval(a) => evaluate(a),
        Command::SampleSize(a) => sample_size(a),
        Command::Verify(a) => run_verify(a),
        Command::ServeCheck(a) => serve_check::run(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let body = failure.report();
            let line = serde_json::json!({ "error": &body });
            eprintln!("{line}");
            ExitCode::from(body.exit_code)
        }
    }
}

fn parse_target(s: &str) -> Result<TargetClass, Error> {
    if s.eq_ignore_ascii_case("argmax") {
        return Ok(TargetClass::ArgmaxAtExample);
    }
    s.parse::<usize>()
        .map(TargetClass::Index)
        .map_err(|_| Error::config(format!("--target must be \"argmax\" or a class index, got {s:?}")))
}

fn build_model(a: &ModelArgs) -> Result<Box<dyn Predictor>, Error> {
    match (&a.model, &a.endpoint) {
        (Some(model), None) => load_builtin(model, a.vectorizer.as_deref()),
        (None, Some(endpoint)) => {
            let mut cfg = RemoteConfig::new(endpoint.as_str()).with_auth_from_env()?;
            cfg.batch_size = a.batch_size;
            cfg.concurrency = a.concurrency;
            Ok(Box::new(RemoteModel::new(cfg)?))
        }
        _ => Err(Error::config("exactly one of --model and --endpoint is required")),
    }
}

fn explainer_config(model: &ModelArgs, s: &SamplingArgs, search: &SearchArgs) -> Result<ExplainerConfig, Error> {
    ExplainerConfig {
        sampling: SamplingConfig {
            scheme: s.sampling.into(),
            p_perturb: s.p,
            alpha: s.alpha,
            l_max: s.l_max,
            n_override: s.n,
            seed: s.seed,
            mask_token: s.mask_token.clone(),
        },
        epsilon: search.epsilon,
        pool_size: search.pool_size,
        counterfactuals: search.k,
        target: parse_target(&model.target)?,
    }
    .validated()
}

fn load_lexicon(s: &SamplingArgs, needed: bool, why: &str) -> Result<Option<PosLexicon>, Error> {
    match &s.lexicon {
        Some(path) => PosLexicon::load(path).map(Some),
        None if needed => Err(Error::config(format!(
            "{why} requires a POS lexicon; pass --lexicon PATH"
        ))),
        None => Ok(None),
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => write_file(path, content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".to_string(),
                    source,
                })
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn explain(a: ExplainArgs) -> Outcome {
    let cfg = explainer_config(&a.model, &a.sampling, &a.search)?;
    let lexicon = load_lexicon(&a.sampling, cfg.sampling.scheme == Scheme::Pos, "--sampling pos")?;
    let text = match (&a.text, &a.input) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => read_file(path)?,
        (None, None) => return Err(Error::config("no text given; pass TEXT or --input FILE").into()),
    };
    let xi = tokenize(&text);
    let model = build_model(&a.model)?;
    let mut explainer = Explainer::new(model.as_ref(), cfg)?;
    if let Some(lex) = &lexicon {
        explainer = explainer.with_lexicon(lex);
    }
    let explanation = explainer.explain(&xi)?;
    for w in &explanation.warnings {
        log::warn!("{w}");
    }
    let json = with_newline(explanation.to_json(a.timing).to_string_pretty()?);
    if let Some(path) = &a.json_out {
        write_file(path, &json)?;
    }
    let rendered = match a.output {
        OutputFormat::Json => json,
        OutputFormat::Ansi => render::ansi(&explanation),
        OutputFormat::Html => render::html(&explanation),
    };
    emit(a.out.as_deref(), &rendered)?;
    Ok(())
}

fn evaluate(a: EvalArgs) -> Outcome {
    let explainer = explainer_config(&a.model, &a.sampling, &a.search)?;
    let methods = a
        .methods
        .split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(str::parse::<Method>)
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(Error::config("--methods selects no method").into());
    }
    let needs_lexicon = methods.contains(&Method::Fredpos) || explainer.sampling.scheme == Scheme::Pos;
    let lexicon = load_lexicon(
        &a.sampling,
        needs_lexicon,
        "pos sampling (method fredpos or --sampling pos)",
    )?;
    let cfg = EvalConfig {
        explainer,
        methods,
        metrics: Metric::parse_list(&a.metrics)?,
        robustness_runs: a.robustness_runs,
        seed_policy: match a.seed_policy {
            SeedPolicyArg::Fresh => SeedPolicy::Fresh,
            SeedPolicyArg::Reuse => SeedPolicy::Reuse,
        },
        selector: DocumentSelector {
            count: a.count,
            predicted_class: a.class,
            label: a.label.clone(),
            order: match a.order {
                OrderArg::None => LengthOrder::None,
                OrderArg::Asc => LengthOrder::Ascending,
                OrderArg::Desc => LengthOrder::Descending,
            },
        },
    };
    let corpus = Corpus::load(&a.corpus)?;
    let model = build_model(&a.model)?;
    let report = eval::evaluate(model.as_ref(), &corpus, &cfg, lexicon.as_ref())?;
    let json = with_newline(serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if let Some(path) = &a.json_out {
        write_file(path, &json)?;
    }
    match a.format {
        ReportFormat::Table => emit(None, &with_newline(report.table()))?,
        ReportFormat::Json => emit(None, &json)?,
    }
    Ok(())
}

fn sample_size(a: SampleSizeArgs) -> Outcome {
    let cfg = SamplingConfig {
        p_perturb: a.p,
        alpha: a.alpha,
        l_max: a.l_max,
        ..SamplingConfig::default()
    }
    .validated()?;
    println!("{}", required_sample_size(cfg.alpha, cfg.p_perturb, cfg.l_max));
    Ok(())
}

fn unsmoothed_idf(n_docs: usize, doc_freq: usize) -> f64 {
    (n_docs as f64 / doc_freq as f64).ln()
}

fn constant_idf(_: usize, _: usize) -> f64 {
    1.0
}

fn run_verify(a: VerifyArgs) -> Outcome {
    let mut cfg = if a.quick {
        VerifyConfig::quick(a.seed)
    } else {
        VerifyConfig {
            seed: a.seed,
            ..VerifyConfig::default()
        }
    };
    cfg.idf_rule = match a.idf_rule {
        IdfRuleArg::Smooth => smooth_idf,
        IdfRuleArg::Unsmoothed => unsmoothed_idf,
        IdfRuleArg::Constant => constant_idf,
    };
    let report = verify::run_all(&cfg)?;
    if a.json {
        emit(
            None,
            &with_newline(serde_json::to_string_pretty(&report).map_err(Error::from)?),
        )?;
    } else {
        let mut out = String::new();
        for c in &report.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status} {:<36} {:>6.2}s  {}\n",
                c.name,
                c.elapsed.as_secs_f64(),
                c.detail
            ));
        }
        emit(None, &out)?;
    }
    match report.first_failure() {
        None => Ok(()),
        Some(c) => Err(Failure::Check(format!("check {} failed: {}", c.name, c.detail))),
    }
}
