//! Batch front end for the detector library.
//!
//! Every command is a pure function of its flags plus the seed: rerunning
//! it reproduces outputs byte for byte. Data goes to stdout or --out
//! (written atomically); provenance and warnings go to stderr.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wafml_core::combine::{combine_with_set, RuleVerdictSet};
use wafml_core::error::Result;
use wafml_core::eval::{
    default_lambda_grid, evaluate, load_dataset, render_metrics_csv, render_verdict_lines,
    roc_sweep, write_atomic, EvalOutcome, MetricsRow,
};
use wafml_core::features::{extract_features, Lexicon};
use wafml_core::gmm::{fit_gmm, GmmModel};
use wafml_core::http::{
    filter_headers, parse_request, read_container, HttpRequest, ONECLASS_HEADER_DROP_LIST,
};
use wafml_core::ngram::{load_prior, train, ConfigSet, NgramModel, Prior, DEFAULT_N_MAX};
use wafml_core::{Error, Verdict};

#[derive(Parser)]
#[command(
    name = "wafml",
    version,
    about = "Train and evaluate anomaly detectors for HTTP request streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the one-class token-count mixture on attack-free traffic.
    TrainOneclass(TrainOneclassArgs),
    /// Fit per-field n-gram language signatures on attack-free traffic.
    TrainNgram(TrainNgramArgs),
    /// Emit one verdict line per request in a container file.
    Score(ScoreArgs),
    /// Score a labeled split and emit a metrics CSV row.
    Evaluate(EvaluateArgs),
    /// Sweep the one-class acceptance slack λ and emit one CSV row per value.
    Roc(RocArgs),
}

#[derive(Args)]
struct TrainOneclassArgs {
    /// Container file(s) of training requests, concatenated in order.
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    /// Token list file, one token per line (builtin list when omitted).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Model output path (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Largest cluster count considered by model selection.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
}

#[derive(Args)]
struct TrainNgramArgs {
    /// Container file(s) of training requests, concatenated in order.
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    /// Per-field configuration file (builtin heuristics when omitted).
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Maximum n-gram order for fields without an explicit n.
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n: usize,
    /// Prior corpus binding `id=path`; one per prior named in --fields.
    #[arg(long = "prior", value_name = "ID=PATH")]
    priors: Vec<String>,
    /// Model output path (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// One-class model file.
    #[arg(long)]
    oc_model: Option<PathBuf>,
    /// N-gram model file.
    #[arg(long)]
    ngram_model: Option<PathBuf>,
    /// Container file of requests to score.
    #[arg(long = "in")]
    input: PathBuf,
    /// Acceptance slack in (0,1] for the one-class model (default 0.5).
    #[arg(long)]
    lambda: Option<f64>,
    /// Token list file; must match the one the model was trained with.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Oneclass,
    Ngram,
    Combined,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Oneclass => "oneclass",
            Method::Ngram => "ngram",
            Method::Combined => "combined",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RulesFormat {
    /// `<id><TAB><normal|attack>` lines; extra columns ignored.
    Tsv,
    /// Bare attack-flagged ids, one per line; unlisted ids are normal.
    AttackIds,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// One-class model file.
    #[arg(long)]
    oc_model: Option<PathBuf>,
    /// N-gram model file.
    #[arg(long)]
    ngram_model: Option<PathBuf>,
    /// Rule-expert verdict file (combined method only).
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RulesFormat::Tsv)]
    rules_format: RulesFormat,
    /// Container of attack-free test requests.
    #[arg(long)]
    valid: PathBuf,
    /// Container of attack test requests.
    #[arg(long)]
    attack: PathBuf,
    /// Acceptance slack in (0,1] when the one-class model participates
    /// (default 0.5).
    #[arg(long)]
    lambda: Option<f64>,
    /// Token list file; must match the one the model was trained with.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RocArgs {
    /// One-class model file.
    #[arg(long)]
    oc_model: PathBuf,
    /// Container of attack-free test requests.
    #[arg(long)]
    valid: PathBuf,
    /// Container of attack test requests.
    #[arg(long)]
    attack: PathBuf,
    /// Comma-separated λ values, strictly increasing in (0,1]
    /// (default 0.01,0.02,..,1.00).
    #[arg(long)]
    grid: Option<String>,
    /// Token list file; must match the one the model was trained with.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.category());
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainOneclass(args) => train_oneclass(args),
        Command::TrainNgram(args) => train_ngram(args),
        Command::Score(args) => score(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Roc(args) => roc(args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn paths_display(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_display(path: Option<&PathBuf>, default: &str) -> String {
    path.map(|p| p.display().to_string())
        .unwrap_or_else(|| default.to_string())
}

/// Reads and parses training containers in file order. Unparseable blocks
/// are skipped with a count so a stray log line cannot poison a model.
fn read_training(paths: &[PathBuf]) -> Result<Vec<HttpRequest>> {
    let mut requests = Vec::new();
    let mut skipped = 0u64;
    for path in paths {
        for raw in read_container(path)? {
            match parse_request(&raw) {
                Ok(req) => requests.push(req),
                Err(_) => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} unparseable training requests");
    }
    Ok(requests)
}

/// Loads the token list, falling back to the builtin one.
fn load_lexicon(path: Option<&PathBuf>) -> Result<Lexicon> {
    match path {
        Some(p) => Lexicon::from_file(p),
        None => Ok(Lexicon::builtin().clone()),
    }
}

fn require_lexicon_match(model: &GmmModel, lexicon: &Lexicon) -> Result<()> {
    if model.lexicon_hash != lexicon.hash() {
        return Err(Error::Config(format!(
            "lexicon hash {} does not match the model's {}; pass the token \
             list the model was trained with",
            lexicon.hash(),
            model.lexicon_hash
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("lambda {lambda} outside (0, 1]")));
    }
    Ok(lambda)
}

fn oc_verdict(model: &GmmModel, lexicon: &Lexicon, req: &HttpRequest, lambda: f64) -> Verdict {
    let scanned = filter_headers(req, &ONECLASS_HEADER_DROP_LIST);
    model.classify(&extract_features(&scanned, lexicon), lambda)
}

/// Writes data to --out atomically, or to stdout when absent.
fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn warn_model_quality(model: &GmmModel) {
    if !model.meta.converged {
        eprintln!("warning: EM hit the iteration cap; kept the best recorded iterate");
    }
    if !model.meta.threshold_violations.is_empty() {
        eprintln!(
            "warning: clusters {:?} exceed their distance envelope; training \
             acceptance at lambda=1 is not guaranteed",
            model.meta.threshold_violations
        );
    }
    // A cluster of identical training vectors has a zero-width envelope:
    // lambda scales nothing, and float residue in the fitted mean makes
    // even training-identical traffic land a hair outside it.
    let spreadless: Vec<usize> = model
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.dist_std == 0.0)
        .map(|(k, _)| k)
        .collect();
    if !spreadless.is_empty() {
        eprintln!(
            "warning: clusters {spreadless:?} have zero distance spread \
             (identical training vectors); any lambda < 1 can reject their \
             traffic"
        );
    }
}

// ---------------------------------------------------------------------------
// Commands

fn train_oneclass(args: TrainOneclassArgs) -> Result<()> {
    eprintln!(
        "effective-config: train-oneclass train={} lexicon={} out={} seed={} k-max={}",
        paths_display(&args.train),
        opt_display(args.lexicon.as_ref(), "builtin"),
        args.out.display(),
        args.seed,
        args.k_max,
    );
    let lexicon = load_lexicon(args.lexicon.as_ref())?;
    let requests = read_training(&args.train)?;
    let vectors: Vec<_> = requests
        .iter()
        .map(|req| extract_features(&filter_headers(req, &ONECLASS_HEADER_DROP_LIST), &lexicon))
        .collect();
    let model = fit_gmm(&vectors, args.k_max, args.seed, lexicon.hash())?;
    warn_model_quality(&model);
    model.save(&args.out)?;
    eprintln!(
        "trained one-class model: {} requests, {} clusters",
        requests.len(),
        model.n_components()
    );
    Ok(())
}

fn train_ngram(args: TrainNgramArgs) -> Result<()> {
    eprintln!(
        "effective-config: train-ngram train={} fields={} n={} priors={} out={}",
        paths_display(&args.train),
        opt_display(args.fields.as_ref(), "builtin"),
        args.n,
        args.priors.join(","),
        args.out.display(),
    );
    if args.n == 0 {
        return Err(Error::Config("--n must be at least 1".to_string()));
    }
    let configs = match &args.fields {
        Some(path) => ConfigSet::load(path, args.n)?,
        None => ConfigSet::builtin(args.n),
    };

    let mut bindings = BTreeMap::new();
    for pair in &args.priors {
        let (id, path) = pair.split_once('=').ok_or_else(|| {
            Error::Config(format!("--prior {pair:?} is not of the form id=path"))
        })?;
        if bindings.insert(id.to_string(), PathBuf::from(path)).is_some() {
            return Err(Error::Config(format!("--prior {id:?} bound twice")));
        }
    }
    let mut priors: BTreeMap<String, Prior> = BTreeMap::new();
    for requirement in configs.prior_requirements()? {
        let path = bindings.remove(&requirement.id).ok_or_else(|| {
            Error::Config(format!(
                "field configuration names prior {:?} but no --prior {}=path was given",
                requirement.id, requirement.id
            ))
        })?;
        priors.insert(requirement.id.clone(), load_prior(&path, &requirement)?);
    }
    if let Some(id) = bindings.into_keys().next() {
        return Err(Error::Config(format!(
            "--prior {id:?} is not referenced by the field configuration"
        )));
    }

    let requests = read_training(&args.train)?;
    let model = train(&requests, configs, priors)?;
    model.save(&args.out)?;
    eprintln!(
        "trained n-gram model: {} requests, {} fields",
        model.trained_requests,
        model.fields.len()
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let classify: Box<dyn Fn(&HttpRequest) -> Verdict> =
        match (&args.oc_model, &args.ngram_model) {
            (Some(oc_path), None) => {
                let lambda = check_lambda(args.lambda.unwrap_or(0.5))?;
                eprintln!(
                    "effective-config: score oc-model={} lambda={} lexicon={} in={} out={}",
                    oc_path.display(),
                    lambda,
                    opt_display(args.lexicon.as_ref(), "builtin"),
                    args.input.display(),
                    opt_display(args.out.as_ref(), "-"),
                );
                let model = GmmModel::load(oc_path)?;
                let lexicon = load_lexicon(args.lexicon.as_ref())?;
                require_lexicon_match(&model, &lexicon)?;
                Box::new(move |req| oc_verdict(&model, &lexicon, req, lambda))
            }
            (None, Some(ngram_path)) => {
                if args.lambda.is_some() {
                    return Err(Error::Config(
                        "--lambda applies to the one-class model only".to_string(),
                    ));
                }
                if args.lexicon.is_some() {
                    return Err(Error::Config(
                        "--lexicon applies to the one-class model only".to_string(),
                    ));
                }
                eprintln!(
                    "effective-config: score ngram-model={} in={} out={}",
                    ngram_path.display(),
                    args.input.display(),
                    opt_display(args.out.as_ref(), "-"),
                );
                let model = NgramModel::load(ngram_path)?;
                Box::new(move |req| model.classify(req))
            }
            _ => {
                return Err(Error::Config(
                    "pass exactly one of --oc-model and --ngram-model".to_string(),
                ))
            }
        };

    let mut verdicts = Vec::new();
    let mut skipped = 0u64;
    for raw in read_container(&args.input)? {
        match parse_request(&raw) {
            Ok(req) => verdicts.push((raw.id, classify(&req))),
            Err(_) => skipped += 1,
        }
    }
    emit(args.out.as_ref(), &render_verdict_lines(&verdicts))?;
    eprintln!(
        "scored {} requests ({} unparseable skipped)",
        verdicts.len(),
        skipped
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let uses_oc = match args.method {
        Method::Oneclass => true,
        Method::Ngram => false,
        Method::Combined => match (&args.oc_model, &args.ngram_model) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            _ => {
                return Err(Error::Config(
                    "combined method needs exactly one of --oc-model and --ngram-model"
                        .to_string(),
                ))
            }
        },
    };
    match args.method {
        Method::Oneclass if args.oc_model.is_none() => {
            return Err(Error::Config("oneclass method needs --oc-model".to_string()))
        }
        Method::Oneclass if args.ngram_model.is_some() => {
            return Err(Error::Config(
                "--ngram-model is unused by the oneclass method".to_string(),
            ))
        }
        Method::Ngram if args.ngram_model.is_none() => {
            return Err(Error::Config("ngram method needs --ngram-model".to_string()))
        }
        Method::Ngram if args.oc_model.is_some() => {
            return Err(Error::Config(
                "--oc-model is unused by the ngram method".to_string(),
            ))
        }
        Method::Combined if args.rules.is_none() => {
            return Err(Error::Config("combined method needs --rules".to_string()))
        }
        _ => {}
    }
    if args.rules.is_some() && args.method != Method::Combined {
        return Err(Error::Config(
            "--rules applies to the combined method only".to_string(),
        ));
    }
    if !uses_oc {
        if args.lambda.is_some() {
            return Err(Error::Config(
                "--lambda applies to the one-class model only".to_string(),
            ));
        }
        if args.lexicon.is_some() {
            return Err(Error::Config(
                "--lexicon applies to the one-class model only".to_string(),
            ));
        }
    }
    let lambda = if uses_oc {
        Some(check_lambda(args.lambda.unwrap_or(0.5))?)
    } else {
        None
    };

    eprintln!(
        "effective-config: evaluate method={} oc-model={} ngram-model={} rules={} lambda={} \
         lexicon={} valid={} attack={} out={}",
        args.method.as_str(),
        opt_display(args.oc_model.as_ref(), "-"),
        opt_display(args.ngram_model.as_ref(), "-"),
        opt_display(args.rules.as_ref(), "-"),
        lambda.map(|l| l.to_string()).unwrap_or_else(|| "-".to_string()),
        if uses_oc {
            opt_display(args.lexicon.as_ref(), "builtin")
        } else {
            "-".to_string()
        },
        args.valid.display(),
        args.attack.display(),
        opt_display(args.out.as_ref(), "-"),
    );

    let split = load_dataset(&[], &args.valid, &args.attack)?;

    let oc = match &args.oc_model {
        Some(path) => {
            let model = GmmModel::load(path)?;
            let lexicon = load_lexicon(args.lexicon.as_ref())?;
            require_lexicon_match(&model, &lexicon)?;
            Some((model, lexicon))
        }
        None => None,
    };
    let ngram = args
        .ngram_model
        .as_ref()
        .map(|path| NgramModel::load(path))
        .transpose()?;
    let rules = match &args.rules {
        Some(path) => Some(match args.rules_format {
            RulesFormat::Tsv => RuleVerdictSet::load_tsv(path)?,
            RulesFormat::AttackIds => RuleVerdictSet::load_attack_ids(path)?,
        }),
        None => None,
    };

    let detector: Box<dyn Fn(&HttpRequest) -> Verdict + Sync> = match (&oc, &ngram) {
        (Some((model, lexicon)), None) => {
            let lambda = lambda.expect("lambda resolved for one-class methods");
            Box::new(move |req| oc_verdict(model, lexicon, req, lambda))
        }
        (None, Some(model)) => Box::new(move |req| model.classify(req)),
        _ => unreachable!("validation admits exactly one model"),
    };

    let missing_rule_ids = AtomicU64::new(0);
    let outcome: EvalOutcome = match &rules {
        Some(set) => evaluate(
            |req| {
                let (verdict, missing) = combine_with_set(detector(req), set, &req.id);
                if missing {
                    missing_rule_ids.fetch_add(1, Ordering::Relaxed);
                }
                verdict
            },
            &split,
        ),
        None => evaluate(|req| detector(req), &split),
    };
    let missing = missing_rule_ids.into_inner();
    if missing > 0 {
        eprintln!("warning: rule verdicts missing for {missing} requests (treated normal)");
    }

    let row = MetricsRow {
        method: args.method.as_str().to_string(),
        lambda,
        metrics: outcome.metrics,
    };
    emit(args.out.as_ref(), &render_metrics_csv(&[row]))?;

    let m = &outcome.metrics;
    eprintln!("method:             {}", args.method.as_str());
    if let Some(lambda) = lambda {
        eprintln!("lambda:             {lambda}");
    }
    eprintln!(
        "valid requests:     {} ({} unparseable excluded)",
        m.true_negatives + m.false_positives,
        outcome.unparseable_valid
    );
    eprintln!(
        "attack requests:    {} ({} unparseable excluded)",
        m.true_positives + m.false_negatives,
        outcome.unparseable_attack
    );
    eprintln!("true negative rate: {}", fmt_rate(m.tnr()));
    eprintln!("true positive rate: {}", fmt_rate(m.tpr()));
    eprintln!(
        "confusion:          tp={} fn={} tn={} fp={}",
        m.true_positives, m.false_negatives, m.true_negatives, m.false_positives
    );
    Ok(())
}

fn fmt_rate(rate: f64) -> String {
    if rate.is_nan() {
        "nan".to_string()
    } else {
        format!("{rate:.6}")
    }
}

fn roc(args: RocArgs) -> Result<()> {
    eprintln!(
        "effective-config: roc oc-model={} lexicon={} valid={} attack={} grid={} out={}",
        args.oc_model.display(),
        opt_display(args.lexicon.as_ref(), "builtin"),
        args.valid.display(),
        args.attack.display(),
        args.grid.as_deref().unwrap_or("0.01,..,1.00"),
        opt_display(args.out.as_ref(), "-"),
    );
    let grid = match &args.grid {
        Some(text) => parse_grid(text)?,
        None => default_lambda_grid(),
    };
    let model = GmmModel::load(&args.oc_model)?;
    let lexicon = load_lexicon(args.lexicon.as_ref())?;
    require_lexicon_match(&model, &lexicon)?;
    let split = load_dataset(&[], &args.valid, &args.attack)?;

    let outcome = roc_sweep(&model, &lexicon, &split, &grid)?;
    let rows: Vec<MetricsRow> = outcome
        .points
        .iter()
        .map(|point| MetricsRow {
            method: "oneclass".to_string(),
            lambda: Some(point.lambda),
            metrics: point.metrics,
        })
        .collect();
    emit(args.out.as_ref(), &render_metrics_csv(&rows))?;
    eprintln!(
        "swept {} lambda values ({} valid / {} attack requests unparseable)",
        outcome.points.len(),
        outcome.unparseable_valid,
        outcome.unparseable_attack
    );
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("grid value {part:?}: {e}")))
        })
        .collect()
}
