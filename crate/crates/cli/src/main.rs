//! `ekesdg` — command-line entry point binding the pipeline modules into
//! reproducible runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 config
//! error, 4 runtime failure. Every error prints a single-line diagnostic on
//! stderr, and every output file is accompanied by a run manifest.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ekesdg_core::data::{load_embeddings, save_embeddings, Dataset};
use ekesdg_core::knowledge::{
    evaluate_propositions, kappa_soz, kappa_soz_without, Proposition, Scene, Thresholds,
};
use ekesdg_core::machines::MachineKind;
use ekesdg_core::metrics::{self, EvalReport};
use ekesdg_core::pipeline::{self, PipelineConfig, StagedModel};
use ekesdg_core::rarity::{self, Metric};
use ekesdg_core::synthgen::{gen_domains, gen_scene, DomainSpec, SceneKind, SceneSpec};
use ekesdg_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "ekesdg", version, about = "Rare-class single-domain-generalization toolkit")]
struct Cli {
    /// Emit structured JSON reports instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Entropy-based rarity report over an embeddings CSV.
    Rarity(RarityArgs),
    /// Fit the staged pipeline on a training domain.
    Fit(FitArgs),
    /// Evaluate: single report (--model/--test) or across-trial (--a/--b).
    Eval(EvalArgs),
    /// Aggregated trial: stratified k-fold cross-validation on the training
    /// domain, each fold model evaluated on the held-out domain.
    AggEval(AggEvalArgs),
    /// Sweep the knowledge-override confidence threshold of a fitted model.
    Roc(RocArgs),
    /// Proposition report per scene, with optional per-proposition ablation.
    Props(PropsArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Generate the two-domain embeddings pair from a TOML spec.
    Domains(GenDomainsArgs),
    /// Generate scene files of one kind.
    Scenes(GenScenesArgs),
}

#[derive(Args)]
struct GenDomainsArgs {
    /// TOML spec: `dim`, `seed`, and one `[[class]]` section per class.
    #[arg(long)]
    spec: PathBuf,
    /// Seed override (default: spec value, else EKESDG_SEED).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "a.csv")]
    out_a: PathBuf,
    #[arg(long, default_value = "b.csv")]
    out_b: PathBuf,
}

#[derive(Args)]
struct GenScenesArgs {
    /// Scene kind: soz, rsn or noise.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Base seed; scene i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 240)]
    width: i64,
    #[arg(long, default_value_t = 240)]
    height: i64,
    #[arg(long, default_value_t = 128)]
    signal_len: usize,
    #[arg(long, default_value = "scenes")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RarityArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
    /// Distance metric: euclidean or cosine.
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// L2-normalize feature vectors on ingestion.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "rarity_report.csv")]
    out: PathBuf,
}

/// Pipeline parameters shared by fit / eval / agg-eval. Precedence:
/// explicit flag > config file > EKESDG_SEED (seed only) > built-in default.
#[derive(Args)]
struct PipelineFlags {
    /// TOML file deserialized into the pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    multiplier: Option<f64>,
    /// Knowledge-override confidence threshold in (0, 1].
    #[arg(long = "t-c")]
    t_c: Option<f64>,
    #[arg(long)]
    max_stages: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    metric: Option<String>,
    /// Comma-separated embedding dimensions visible to knowledge machines.
    #[arg(long, value_delimiter = ',')]
    knowledge_dims: Option<Vec<usize>>,
    /// Comma-separated machine kinds (centroid, logistic, svm_linear).
    #[arg(long, value_delimiter = ',')]
    dl_roster: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    k_roster: Option<Vec<String>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// L2-normalize feature vectors on ingestion.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Fitted model file (single-report mode, with --test).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// First domain CSV (across-trial mode, with --b).
    #[arg(long)]
    a: Option<PathBuf>,
    #[arg(long)]
    b: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, default_value = "eval_report.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct AggEvalArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, default_value = "agg_report.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated threshold grid; default 0.10..0.95 step 0.05.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// L2-normalize feature vectors on ingestion.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "roc.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PropsArgs {
    /// Scene file(s); repeatable.
    #[arg(long, required = true)]
    scene: Vec<PathBuf>,
    /// Also report the formula with each proposition dropped in turn.
    #[arg(long)]
    ablate: bool,
    #[arg(long, default_value_t = 0.5)]
    gray: f64,
    #[arg(long, default_value_t = 0.1)]
    white: f64,
    #[arg(long, default_value_t = 0.1)]
    vascular: f64,
    #[arg(long, default_value_t = 0.6)]
    sine: f64,
    #[arg(long, default_value_t = 0.6)]
    wavelet: f64,
    #[arg(long, default_value_t = 135)]
    min_cluster_size: usize,
    #[arg(long, default_value_t = 1)]
    dbscan_eps: i64,
    #[arg(long, default_value_t = 2)]
    dbscan_min_pts: usize,
    #[arg(long, default_value = "props.csv")]
    out: PathBuf,
}

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        let code = match &e {
            CoreError::Io { .. }
            | CoreError::Format { .. }
            | CoreError::Validation(_)
            | CoreError::DegenerateClass { .. } => 2,
            CoreError::Config(_) => 3,
            CoreError::Training(_) | CoreError::State(_) | CoreError::Undefined(_) => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let line = e
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .to_string();
            eprintln!("{line}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(GenCommand::Domains(args)) => gen_domains_cmd(args),
        Command::Gen(GenCommand::Scenes(args)) => gen_scenes_cmd(args),
        Command::Rarity(args) => rarity_cmd(args, cli.json),
        Command::Fit(args) => fit_cmd(args, cli.json),
        Command::Eval(args) => eval_cmd(args, cli.json),
        Command::AggEval(args) => agg_eval_cmd(args, cli.json),
        Command::Roc(args) => roc_cmd(args, cli.json),
        Command::Props(args) => props_cmd(args, cli.json),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("EKESDG_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CoreError::Config(format!("EKESDG_SEED is not a u64: {v:?}")).into()),
        Err(_) => Ok(None),
    }
}

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|source| {
            CoreError::Io {
                path: path.display().to_string(),
                source,
            }
            .into()
        })
}

fn write_output(path: &Path, content: &str) -> CliResult<()> {
    ekesdg_core::write_atomic(path, content.as_bytes())?;
    Ok(())
}

/// Run manifest: enough to reproduce the run without the original command line.
#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    tool: &'static str,
    version: &'static str,
    machine_format_version: u32,
    model_format_version: u32,
    subcommand: &'a str,
    params: P,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn write_manifest<P: Serialize>(
    primary_output: &Path,
    subcommand: &str,
    params: P,
    inputs: &[&Path],
    outputs: &[&Path],
) -> CliResult<()> {
    let manifest = Manifest {
        tool: "ekesdg",
        version: env!("CARGO_PKG_VERSION"),
        machine_format_version: ekesdg_core::machines::MACHINE_FORMAT_VERSION,
        model_format_version: ekesdg_core::pipeline::MODEL_FORMAT_VERSION,
        subcommand,
        params,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CoreError::Validation(format!("serialize manifest: {e}")))?;
    let path = PathBuf::from(format!("{}.manifest.json", primary_output.display()));
    write_output(&path, &text)
}

impl PipelineFlags {
    fn resolve(&self) -> CliResult<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let mut seed_from_config = false;
        if let Some(path) = &self.config {
            let text = read_to_string(path)?;
            let value: toml::Value = toml::from_str(&text)
                .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
            seed_from_config = value.get("seed").is_some();
            cfg = value
                .try_into()
                .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        }
        if !seed_from_config {
            if let Some(s) = env_seed()? {
                cfg.seed = s;
            }
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.multiplier {
            cfg.multiplier = v;
        }
        if let Some(v) = self.t_c {
            cfg.t_c = v;
        }
        if let Some(v) = self.max_stages {
            cfg.max_stages = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(m) = &self.metric {
            cfg.metric = Metric::parse(m)?;
        }
        if let Some(dims) = &self.knowledge_dims {
            cfg.knowledge_dims = Some(dims.clone());
        }
        if let Some(names) = &self.dl_roster {
            cfg.dl_roster = parse_roster(names)?;
        }
        if let Some(names) = &self.k_roster {
            cfg.k_roster = parse_roster(names)?;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_roster(names: &[String]) -> CliResult<Vec<MachineKind>> {
    names
        .iter()
        .map(|n| MachineKind::parse(n).map_err(CliError::from))
        .collect()
}

fn load_labeled(path: &Path, normalize: bool) -> CliResult<Dataset> {
    Ok(load_embeddings(path, false, normalize)?)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn gen_domains_cmd(args: GenDomainsArgs) -> CliResult<()> {
    let text = read_to_string(&args.spec)?;
    let value: toml::Value = toml::from_str(&text)
        .map_err(|e| CoreError::Config(format!("{}: {e}", args.spec.display())))?;
    let seed_in_spec = value.get("seed").is_some();
    let mut spec: DomainSpec = value
        .try_into()
        .map_err(|e| CoreError::Config(format!("{}: {e}", args.spec.display())))?;
    if let Some(s) = args.seed {
        spec.seed = s;
    } else if !seed_in_spec {
        if let Some(s) = env_seed()? {
            spec.seed = s;
        }
    }
    let (a, b) = gen_domains(&spec)?;
    save_embeddings_atomic(&a, &args.out_a)?;
    save_embeddings_atomic(&b, &args.out_b)?;
    write_manifest(
        &args.out_a,
        "gen domains",
        &spec,
        &[args.spec.as_path()],
        &[args.out_a.as_path(), args.out_b.as_path()],
    )?;
    println!(
        "wrote {} ({} rows) and {} ({} rows)",
        args.out_a.display(),
        a.len(),
        args.out_b.display(),
        b.len()
    );
    Ok(())
}

fn save_embeddings_atomic(ds: &Dataset, path: &Path) -> CliResult<()> {
    let tmp = PathBuf::from(format!("{}.tmp", path.display()));
    save_embeddings(ds, &tmp)?;
    std::fs::rename(&tmp, path).map_err(|source| {
        CliError::from(CoreError::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

fn gen_scenes_cmd(args: GenScenesArgs) -> CliResult<()> {
    let kind = SceneKind::parse(&args.kind)?;
    if args.count == 0 {
        return Err(CoreError::Config("count must be at least 1".into()).into());
    }
    let base_seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|source| {
        CliError::from(CoreError::Io {
            path: args.out_dir.display().to_string(),
            source,
        })
    })?;
    let mut outputs = Vec::new();
    let mut specs = Vec::new();
    for i in 0..args.count {
        let spec = SceneSpec {
            kind,
            width: args.width,
            height: args.height,
            signal_len: args.signal_len,
            seed: base_seed + i as u64,
        };
        let scene = gen_scene(&spec)?;
        let path = args
            .out_dir
            .join(format!("{}_{:04}.json", kind.name(), spec.seed));
        scene.save(&path)?;
        outputs.push(path);
        specs.push(spec);
    }
    let output_refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(
        &args.out_dir.join(kind.name()),
        "gen scenes",
        &specs,
        &[],
        &output_refs,
    )?;
    println!("wrote {} scene(s) under {}", args.count, args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// rarity
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RarityParams<'a> {
    data: String,
    k: usize,
    multiplier: f64,
    metric: &'a str,
    normalize: bool,
}

fn rarity_cmd(args: RarityArgs, json: bool) -> CliResult<()> {
    let metric = Metric::parse(&args.metric)?;
    let ds = load_labeled(&args.data, args.normalize)?;
    let profile = rarity::entropy_profile(&ds, args.k, metric)?;
    let verdict = rarity::identify_rare(&profile, args.multiplier);

    let report = if json {
        serde_json::to_string_pretty(&serde_json::json!({
            "profile": profile,
            "verdict": verdict,
        }))
        .map_err(|e| CoreError::Validation(format!("serialize report: {e}")))?
    } else {
        let mut out = format!(
            "# k={} metric={} multiplier={} theta_mean={} theta_std={}\n",
            profile.k,
            profile.metric.name(),
            args.multiplier,
            profile.theta_mean,
            profile.theta_std
        );
        out.push_str("class,theta,deviation,is_rare\n");
        for (class, theta) in &profile.theta {
            out.push_str(&format!(
                "{},{},{},{}\n",
                class,
                theta,
                (theta - profile.theta_mean).abs(),
                verdict.rare_classes.contains(class)
            ));
        }
        out
    };
    write_output(&args.out, &report)?;
    write_manifest(
        &args.out,
        "rarity",
        RarityParams {
            data: args.data.display().to_string(),
            k: args.k,
            multiplier: args.multiplier,
            metric: metric.name(),
            normalize: args.normalize,
        },
        &[args.data.as_path()],
        &[args.out.as_path()],
    )?;
    match &verdict.rarest {
        Some(c) => println!("rarest class: {c}"),
        None => println!("no rare class flagged"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FitParams {
    train: String,
    normalize: bool,
    config: PipelineConfig,
}

fn fit_cmd(args: FitArgs, _json: bool) -> CliResult<()> {
    let cfg = args.pipeline.resolve()?;
    let ds = load_labeled(&args.train, args.pipeline.normalize)?;
    let model = pipeline::fit(&ds, &cfg)?;
    if model.stages.is_empty() {
        eprintln!("warning: no rare class flagged; wrote a 0-stage model");
    }
    model.save(&args.out)?;
    write_manifest(
        &args.out,
        "fit",
        FitParams {
            train: args.train.display().to_string(),
            normalize: args.pipeline.normalize,
            config: cfg,
        },
        &[args.train.as_path()],
        &[args.out.as_path()],
    )?;
    println!(
        "fitted {} stage(s); model written to {}",
        model.stages.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn flag(b: bool) -> &'static str {
    if b {
        "zero_division"
    } else {
        ""
    }
}

fn report_csv(rep: &EvalReport, prefix: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("{prefix}accuracy,,{},\n", rep.accuracy));
    for c in &rep.per_class {
        out.push_str(&format!(
            "{prefix}precision,{},{},{}\n",
            c.class,
            c.precision,
            flag(c.precision_undefined)
        ));
        out.push_str(&format!(
            "{prefix}sensitivity,{},{},{}\n",
            c.class,
            c.sensitivity,
            flag(c.sensitivity_undefined)
        ));
        out.push_str(&format!(
            "{prefix}f1,{},{},{}\n",
            c.class,
            c.f1,
            flag(c.f1_undefined)
        ));
    }
    if let (Some(rc), Some(f1), Some(ppv), Some(npv)) =
        (&rep.rare_class, rep.rare_f1, rep.rare_ppv, rep.rare_npv)
    {
        out.push_str(&format!("{prefix}rare_f1,{rc},{f1},\n"));
        out.push_str(&format!("{prefix}rare_ppv,{rc},{ppv},\n"));
        out.push_str(&format!("{prefix}rare_npv,{rc},{npv},\n"));
    }
    out
}

#[derive(Serialize)]
struct EvalParams {
    mode: &'static str,
    model: Option<String>,
    test: Option<String>,
    a: Option<String>,
    b: Option<String>,
    normalize: bool,
    config: Option<PipelineConfig>,
}

fn eval_cmd(args: EvalArgs, json: bool) -> CliResult<()> {
    match (&args.model, &args.test, &args.a, &args.b) {
        (Some(model_path), Some(test_path), None, None) => {
            let model = StagedModel::load(model_path)?;
            let test = load_labeled(test_path, args.pipeline.normalize)?;
            let rep = metrics::report(&model, &test)?;
            let body = if json {
                serde_json::to_string_pretty(&rep)
                    .map_err(|e| CoreError::Validation(format!("serialize report: {e}")))?
            } else {
                format!("metric,class,value,flag\n{}", report_csv(&rep, ""))
            };
            write_output(&args.out, &body)?;
            write_manifest(
                &args.out,
                "eval",
                EvalParams {
                    mode: "report",
                    model: Some(model_path.display().to_string()),
                    test: Some(test_path.display().to_string()),
                    a: None,
                    b: None,
                    normalize: args.pipeline.normalize,
                    config: None,
                },
                &[model_path.as_path(), test_path.as_path()],
                &[args.out.as_path()],
            )?;
            eprintln!("evaluation took {:.3}s", rep.runtime_seconds);
            println!("accuracy {}; report written to {}", rep.accuracy, args.out.display());
            Ok(())
        }
        (None, None, Some(a_path), Some(b_path)) => {
            let cfg = args.pipeline.resolve()?;
            let a = load_labeled(a_path, args.pipeline.normalize)?;
            let b = load_labeled(b_path, args.pipeline.normalize)?;
            let trial = metrics::across_trial(&a, &b, &cfg)?;
            let body = if json {
                serde_json::to_string_pretty(&trial)
                    .map_err(|e| CoreError::Validation(format!("serialize report: {e}")))?
            } else {
                let mut out = String::from("metric,class,value,flag\n");
                out.push_str(&report_csv(&trial.forward, "forward."));
                out.push_str(&report_csv(&trial.backward, "backward."));
                out.push_str(&format!("average_f1,,{},\n", trial.average_f1));
                out
            };
            write_output(&args.out, &body)?;
            write_manifest(
                &args.out,
                "eval",
                EvalParams {
                    mode: "across_trial",
                    model: None,
                    test: None,
                    a: Some(a_path.display().to_string()),
                    b: Some(b_path.display().to_string()),
                    normalize: args.pipeline.normalize,
                    config: Some(cfg),
                },
                &[a_path.as_path(), b_path.as_path()],
                &[args.out.as_path()],
            )?;
            println!(
                "average F1 {}; report written to {}",
                trial.average_f1,
                args.out.display()
            );
            Ok(())
        }
        _ => Err(CliError::usage(
            "eval needs either --model and --test, or --a and --b",
        )),
    }
}

// ---------------------------------------------------------------------------
// agg-eval
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AggParams {
    train: String,
    test: String,
    folds: usize,
    repeats: usize,
    normalize: bool,
    config: PipelineConfig,
}

fn agg_eval_cmd(args: AggEvalArgs, json: bool) -> CliResult<()> {
    let cfg = args.pipeline.resolve()?;
    let train = load_labeled(&args.train, args.pipeline.normalize)?;
    let test = load_labeled(&args.test, args.pipeline.normalize)?;
    let trial = metrics::aggregated_trial(&train, &test, &cfg, args.folds, args.repeats)?;
    let body = if json {
        serde_json::to_string_pretty(&trial)
            .map_err(|e| CoreError::Validation(format!("serialize report: {e}")))?
    } else {
        let mut out = String::from("metric,class,value,flag\n");
        out.push_str(&format!("mean_accuracy,,{},\n", trial.mean_accuracy));
        out.push_str(&format!("std_accuracy,,{},\n", trial.std_accuracy));
        out.push_str(&format!("mean_macro_f1,,{},\n", trial.mean_macro_f1));
        out.push_str(&format!("std_macro_f1,,{},\n", trial.std_macro_f1));
        for (i, rep) in trial.fold_reports.iter().enumerate() {
            out.push_str(&format!("fold_accuracy,{i},{},\n", rep.accuracy));
        }
        out
    };
    write_output(&args.out, &body)?;
    write_manifest(
        &args.out,
        "agg-eval",
        AggParams {
            train: args.train.display().to_string(),
            test: args.test.display().to_string(),
            folds: args.folds,
            repeats: args.repeats,
            normalize: args.pipeline.normalize,
            config: cfg,
        },
        &[args.train.as_path(), args.test.as_path()],
        &[args.out.as_path()],
    )?;
    println!(
        "mean accuracy {} over {} fold evaluations; report written to {}",
        trial.mean_accuracy,
        trial.fold_reports.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// roc
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RocParams {
    model: String,
    test: String,
    grid: Vec<f64>,
    normalize: bool,
}

fn roc_cmd(args: RocArgs, json: bool) -> CliResult<()> {
    let model = StagedModel::load(&args.model)?;
    let test = load_labeled(&args.test, args.normalize)?;
    let grid = args
        .grid
        .clone()
        .unwrap_or_else(metrics::default_threshold_grid);
    let points = metrics::roc_sweep(&model, &test, &grid)?;
    let body = if json {
        serde_json::to_string_pretty(&points)
            .map_err(|e| CoreError::Validation(format!("serialize report: {e}")))?
    } else {
        let mut out = String::from("t_c,sensitivity,specificity,override_count\n");
        for p in &points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.t_c,
                p.tpr,
                1.0 - p.fpr,
                p.override_count
            ));
        }
        out
    };
    write_output(&args.out, &body)?;
    write_manifest(
        &args.out,
        "roc",
        RocParams {
            model: args.model.display().to_string(),
            test: args.test.display().to_string(),
            grid,
            normalize: args.normalize,
        },
        &[args.model.as_path(), args.test.as_path()],
        &[args.out.as_path()],
    )?;
    println!("{} operating points written to {}", points.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// props
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PropsParams {
    scenes: Vec<String>,
    ablate: bool,
    thresholds: Thresholds,
}

fn props_cmd(args: PropsArgs, json: bool) -> CliResult<()> {
    let thresholds = Thresholds {
        gray: args.gray,
        white: args.white,
        vascular: args.vascular,
        sine: args.sine,
        wavelet: args.wavelet,
        min_cluster_size: args.min_cluster_size,
        dbscan_eps: args.dbscan_eps,
        dbscan_min_pts: args.dbscan_min_pts,
    };
    let mut rows = Vec::new();
    for path in &args.scene {
        let scene = Scene::load(path)?;
        let pv = evaluate_propositions(&scene, &thresholds)?;
        let kappa = kappa_soz(&pv);
        let ablations: Vec<(String, bool)> = if args.ablate {
            Proposition::ALL
                .iter()
                .map(|p| (format!("kappa_drop_{}", p.name()), kappa_soz_without(&pv, *p)))
                .collect()
        } else {
            Vec::new()
        };
        rows.push((path.display().to_string(), pv, kappa, ablations));
    }
    let body = if json {
        let objects: Vec<serde_json::Value> = rows
            .iter()
            .map(|(scene, pv, kappa, ablations)| {
                let mut obj = serde_json::json!({
                    "scene": scene,
                    "propositions": pv,
                    "kappa_soz": kappa,
                });
                if !ablations.is_empty() {
                    let map: serde_json::Map<String, serde_json::Value> = ablations
                        .iter()
                        .map(|(k, v)| (k.clone(), serde_json::Value::Bool(*v)))
                        .collect();
                    obj["ablations"] = serde_json::Value::Object(map);
                }
                obj
            })
            .collect();
        serde_json::to_string_pretty(&objects)
            .map_err(|e| CoreError::Validation(format!("serialize report: {e}")))?
    } else {
        let mut header = String::from(
            "scene,p1,ps,pa,pg,pw,pv,kappa_soz,cluster_count,gray_fraction,\
             white_fraction,vascular_fraction,gini_sine,gini_wavelet",
        );
        if args.ablate {
            for p in Proposition::ALL.iter() {
                header.push_str(&format!(",kappa_drop_{}", p.name()));
            }
        }
        header.push('\n');
        let mut out = header;
        for (scene, pv, kappa, ablations) in &rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                scene,
                pv.p1,
                pv.ps,
                pv.pa,
                pv.pg,
                pv.pw,
                pv.pv,
                kappa,
                pv.cluster_count,
                pv.gray_fraction,
                pv.white_fraction,
                pv.vascular_fraction,
                pv.gini_sine,
                pv.gini_wavelet
            ));
            for (_, v) in ablations {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    };
    write_output(&args.out, &body)?;
    let inputs: Vec<&Path> = args.scene.iter().map(|p| p.as_path()).collect();
    write_manifest(
        &args.out,
        "props",
        PropsParams {
            scenes: args.scene.iter().map(|p| p.display().to_string()).collect(),
            ablate: args.ablate,
            thresholds,
        },
        &inputs,
        &[args.out.as_path()],
    )?;
    println!("{} scene(s) reported to {}", rows.len(), args.out.display());
    Ok(())
}
