//! `incident`: generate → match → explore → train → tune → evaluate → sweep
//! → serve → plot.

mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use incident_core::datagen::{emit_raw_files, generate, ingest_raw_files, GeneratorConfig};
use incident_core::dataset_io::{load_dataset, save_dataset};
use incident_core::digest::file_sha256;
use incident_core::domain::FeatureRecord;
use incident_core::eval::{
    default_threshold_grid, evaluate, feature_correlation_report, fmt_metric, threshold_sweep, SweepRow,
};
use incident_core::features::{Dataset, FeatureSchema};
use incident_core::geomatch::{assemble, detect_hotspots, heatmap, split, MatchCaps, Matcher, TrainSplit};
use incident_core::models::{fit, Family, HyperParams, TrainedModel};
use incident_core::sampling::{resample, SamplingKind, SamplingStrategy};
use incident_core::tuning::{random_search, SearchSpace};
use incident_service::{AppState, Predictor, SnapshotProvider, DEFAULT_THRESHOLD};

use manifest::{sidecar, RunManifest};

const SPLIT_RATIOS: (f64, f64, f64) = (0.70, 0.15, 0.15);
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "incident", version, about = "Traffic incident prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic raw stores.
    Generate(GenerateArgs),
    /// Drop hotspot events and join the rest with weather, road and traffic data.
    Match(MatchArgs),
    /// Feature/label correlation report and optional event heatmap.
    Explore(ExploreArgs),
    /// Train one model on the (resampled) training split.
    Train(TrainArgs),
    /// Score a model on the validation or test split.
    Evaluate(EvaluateArgs),
    /// Randomized hyperparameter search with k-fold cross-validation.
    Tune(TuneArgs),
    /// Accuracy, precision and recall over a threshold grid.
    Sweep(SweepArgs),
    /// Serve predictions over HTTP.
    Serve(ServeArgs),
    /// Render a ROC or sweep table as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML file with generator settings; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct MatchArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6.0)]
    hotspot_z: f64,
    #[arg(long, default_value_t = 0.01)]
    cell_size: f64,
    #[arg(long, default_value_t = 3 * 3600)]
    weather_staleness: i64,
    #[arg(long, default_value_t = 3600)]
    traffic_staleness: i64,
    /// Drop-count report; defaults to `<out>.drops.json`.
    #[arg(long)]
    drops: Option<PathBuf>,
    /// Heatmap table; defaults to `<out>.heatmap.csv`.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExploreArgs {
    #[arg(long)]
    data: PathBuf,
    /// Correlation table.
    #[arg(long)]
    out: PathBuf,
    /// Encode the day-of-year cosine instead of the speed ratio.
    #[arg(long)]
    day_of_year: bool,
    /// Raw directory to build an event heatmap from (before hotspot filtering).
    #[arg(long, requires = "heatmap")]
    raw: Option<PathBuf>,
    #[arg(long, requires = "raw")]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    cell_size: f64,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value = "none", value_parser = parse_sampling)]
    sampling: SamplingKind,
    /// JSON hyperparameters (for example the `best` file from `tune`).
    #[arg(long)]
    hyperparams: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    day_of_year: bool,
    /// Threshold for the validation report.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SplitName {
    Validation,
    Test,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    /// Split seed; defaults to the seed recorded in the model.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
    /// ROC table (threshold, fpr, tpr).
    #[arg(long)]
    roc: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TuneArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Resampling applied to the training split before cross-validation.
    #[arg(long, default_value = "under", value_parser = parse_sampling)]
    sampling: SamplingKind,
    #[arg(long)]
    day_of_year: bool,
    /// Candidate report table.
    #[arg(long)]
    out: PathBuf,
    /// Winning hyperparameters; defaults to `<out>.best.json`.
    #[arg(long)]
    best: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated thresholds; defaults to 0.10, 0.15, …, 0.90.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "INCIDENT_MODEL")]
    model: PathBuf,
    /// Decision tree whose path is returned as the second opinion.
    #[arg(long, env = "INCIDENT_SECOND_OPINION")]
    second_opinion: Option<PathBuf>,
    /// Raw store directory served as the condition snapshot.
    #[arg(long, env = "INCIDENT_RAW")]
    raw: PathBuf,
    #[arg(long, env = "INCIDENT_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, env = "INCIDENT_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "INCIDENT_PORT", default_value_t = 8080)]
    port: u16,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PlotKind {
    Roc,
    Sweep,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    /// Table written by `evaluate --roc` or `sweep`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "")]
    title: String,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: incident_core::Error| e.to_string())
}

fn parse_sampling(s: &str) -> Result<SamplingKind, String> {
    s.parse().map_err(|e: incident_core::Error| e.to_string())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Match(a) => run_match(a),
        Command::Explore(a) => run_explore(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Tune(a) => run_tune(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Serve(a) => run_serve(a),
        Command::Plot(a) => run_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<GeneratorConfig> {
    match path {
        None => Ok(GeneratorConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn run_generate(a: GenerateArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let stores = generate(&config)?;
    let paths = emit_raw_files(&stores, &a.out)?;
    let mut m = RunManifest::new("generate", Some(config.seed), &config)?;
    if let Some(p) = &a.config {
        m.input(p)?;
    }
    for p in &paths {
        m.output(p)?;
    }
    m.write(&a.out.join("manifest.json"))?;
    let positives = stores.events.iter().filter(|e| e.is_emergency_braking).count();
    println!(
        "generated {} events ({} positive), {} weather observations, {} road segments, {} traffic records in {}",
        stores.events.len(),
        positives,
        stores.weather.len(),
        stores.roads.len(),
        stores.traffic.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MatchReport<'a> {
    counts: &'a incident_core::geomatch::DropCounts,
    hotspots: &'a [incident_core::geomatch::HotspotCell],
}

fn run_match(a: MatchArgs) -> Result<()> {
    let stores = ingest_raw_files(&a.raw)?;
    let caps = MatchCaps {
        weather_staleness_s: a.weather_staleness,
        traffic_staleness_s: a.traffic_staleness,
    };
    let hotspots = detect_hotspots(&stores.events, a.cell_size, a.hotspot_z)?;
    let matcher = Matcher::new(&stores.weather, &stores.roads, &stores.traffic, caps)?;
    let (records, counts) = assemble(&stores.events, &matcher, &hotspots);
    save_dataset(&a.out, &records)?;
    let drops = a.drops.clone().unwrap_or_else(|| sidecar(&a.out, "drops.json"));
    write_json(
        &drops,
        &MatchReport {
            counts: &counts,
            hotspots: &hotspots,
        },
    )?;
    let heat = a.heatmap.clone().unwrap_or_else(|| sidecar(&a.out, "heatmap.csv"));
    write_csv(&heat, &heatmap(&stores.events, a.cell_size)?)?;

    let mut m = RunManifest::new("match", None, &a)?;
    for f in ["events.jsonl", "weather.jsonl", "roads.jsonl", "traffic.jsonl"] {
        m.input(&a.raw.join(f))?;
    }
    for p in [&a.out, &drops, &heat] {
        m.output(p)?;
    }
    m.write(&sidecar(&a.out, "manifest.json"))?;
    println!(
        "matched {} of {} events; dropped {}",
        counts.matched,
        counts.input_events,
        counts
            .dropped
            .iter()
            .map(|(r, n)| format!("{}={n}", r.as_str()))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

#[derive(Serialize)]
struct CorrelationRow {
    rank: usize,
    feature: String,
    rho: String,
}

fn run_explore(a: ExploreArgs) -> Result<()> {
    let records = load_dataset(&a.data)?;
    let schema = FeatureSchema::incident(a.day_of_year);
    let data = Dataset::from_records(&schema, &records)?;
    let columns: Vec<(String, Vec<f64>)> = schema
        .names()
        .iter()
        .enumerate()
        .map(|(j, n)| (n.clone(), data.column(j)))
        .collect();
    let report = feature_correlation_report(&columns, data.labels())?;
    let rows: Vec<CorrelationRow> = report
        .iter()
        .enumerate()
        .map(|(i, c)| CorrelationRow {
            rank: i + 1,
            feature: c.feature.clone(),
            rho: fmt_metric(c.rho),
        })
        .collect();
    write_csv(&a.out, &rows)?;
    let mut m = RunManifest::new("explore", None, &a)?;
    m.input(&a.data)?;
    m.output(&a.out)?;
    if let (Some(raw), Some(heat)) = (&a.raw, &a.heatmap) {
        let stores = ingest_raw_files(raw)?;
        write_csv(heat, &heatmap(&stores.events, a.cell_size)?)?;
        m.input(&raw.join("events.jsonl"))?;
        m.output(heat)?;
    }
    m.write(&sidecar(&a.out, "manifest.json"))?;
    for r in rows.iter().take(5) {
        println!("{:>2}. {:<22} {}", r.rank, r.feature, r.rho);
    }
    Ok(())
}

struct Prepared {
    schema: FeatureSchema,
    train: TrainSplit<Dataset>,
    validation: Dataset,
    test: Dataset,
}

/// Loads the canonical dataset and splits it 70/15/15 by `seed`.
fn prepare(path: &Path, schema: FeatureSchema, seed: u64) -> Result<Prepared> {
    let records: Vec<FeatureRecord> = load_dataset(path)?;
    let splits = split(&records, SPLIT_RATIOS, seed)?;
    let encode = |r: &[FeatureRecord]| Dataset::from_records(&schema, r);
    Ok(Prepared {
        train: TrainSplit::designate(encode(splits.train.get())?),
        validation: encode(&splits.validation)?,
        test: encode(&splits.test)?,
        schema,
    })
}

fn read_hyperparams(path: Option<&Path>, family: Family) -> Result<HyperParams> {
    let Some(p) = path else {
        return Ok(family.default_params());
    };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let hp: HyperParams = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    if hp.family() != family {
        bail!("{} holds {} hyperparameters, not {family}", p.display(), hp.family());
    }
    Ok(hp)
}

fn run_train(a: TrainArgs) -> Result<()> {
    let hp = read_hyperparams(a.hyperparams.as_deref(), a.family)?;
    let p = prepare(&a.data, FeatureSchema::incident(a.day_of_year), a.seed)?;
    let train = resample(
        &p.train,
        SamplingStrategy {
            kind: a.sampling,
            seed: a.seed,
        },
    )?;
    let model = fit(&hp, &train, &p.schema, a.seed)?;
    model.save(&a.out)?;
    let report = evaluate(&model, &p.validation, a.threshold)?;
    let report_path = sidecar(&a.out, "validation.json");
    write_json(&report_path, &report)?;

    let mut m = RunManifest::new("train", Some(a.seed), (&a, &hp))?;
    m.input(&a.data)?;
    if let Some(h) = &a.hyperparams {
        m.input(h)?;
    }
    m.output(&a.out)?;
    m.output(&report_path)?;
    m.write(&sidecar(&a.out, "manifest.json"))?;
    println!(
        "trained {} on {} rows ({} positive); validation AUC {:.4}, accuracy {}, precision {}, recall {} at {}",
        a.family,
        train.len(),
        train.n_positive(),
        report.auc,
        fmt_metric(report.accuracy),
        fmt_metric(report.precision),
        fmt_metric(report.recall),
        a.threshold
    );
    Ok(())
}

fn split_for(p: &Prepared, which: SplitName) -> &Dataset {
    match which {
        SplitName::Validation => &p.validation,
        SplitName::Test => &p.test,
    }
}

fn run_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let seed = a.seed.unwrap_or(model.seed);
    let p = prepare(&a.data, model.schema.clone(), seed)?;
    let report = evaluate(&model, split_for(&p, a.split), a.threshold)?;
    write_json(&a.out, &report)?;
    let mut m = RunManifest::new("evaluate", Some(seed), &a)?;
    m.input(&a.data)?;
    m.input(&a.model)?;
    m.output(&a.out)?;
    if let Some(roc) = &a.roc {
        write_csv(roc, &report.roc)?;
        m.output(roc)?;
    }
    m.write(&sidecar(&a.out, "manifest.json"))?;
    println!(
        "{} rows ({} positive): AUC {:.4}; at threshold {}: accuracy {}, precision {}, recall {}",
        report.n,
        report.n_positive,
        report.auc,
        a.threshold,
        fmt_metric(report.accuracy),
        fmt_metric(report.precision),
        fmt_metric(report.recall)
    );
    Ok(())
}

#[derive(Serialize)]
struct CandidateRow {
    index: usize,
    n_trees: usize,
    max_depth: usize,
    min_samples_split: usize,
    min_samples_leaf: usize,
    mean_auc: String,
    mean_accuracy: String,
    mean_precision: String,
    mean_recall: String,
    best: bool,
    error: String,
}

fn run_tune(a: TuneArgs) -> Result<()> {
    let space = SearchSpace::default_for(a.family)?;
    let p = prepare(&a.data, FeatureSchema::incident(a.day_of_year), a.seed)?;
    let train = resample(
        &p.train,
        SamplingStrategy {
            kind: a.sampling,
            seed: a.seed,
        },
    )?;
    let report = random_search(
        &space,
        &train,
        &p.schema,
        a.n,
        a.folds,
        a.seed,
        Some(a.family.default_params()),
    )?;
    let rows: Vec<CandidateRow> = report
        .candidates
        .iter()
        .map(|c| {
            let (n_trees, tree) = match &c.hyperparams {
                HyperParams::Forest(f) => (f.n_trees, f.tree),
                HyperParams::Tree(t) => (1, *t),
                other => unreachable!("search space only yields tree families, got {}", other.family()),
            };
            CandidateRow {
                index: c.index,
                n_trees,
                max_depth: tree.max_depth,
                min_samples_split: tree.min_samples_split,
                min_samples_leaf: tree.min_samples_leaf,
                mean_auc: fmt_metric(c.mean_auc),
                mean_accuracy: fmt_metric(c.mean_accuracy),
                mean_precision: fmt_metric(c.mean_precision),
                mean_recall: fmt_metric(c.mean_recall),
                best: c.index == report.best_index,
                error: c.error.clone().unwrap_or_default(),
            }
        })
        .collect();
    write_csv(&a.out, &rows)?;
    let best = a.best.clone().unwrap_or_else(|| sidecar(&a.out, "best.json"));
    write_json(&best, &report.best)?;
    let mut m = RunManifest::new("tune", Some(a.seed), &a)?;
    m.input(&a.data)?;
    m.output(&a.out)?;
    m.output(&best)?;
    m.write(&sidecar(&a.out, "manifest.json"))?;
    let winner = &report.candidates[report.best_index];
    println!(
        "best candidate {} of {}: mean CV AUC {} ({})",
        report.best_index,
        report.candidates.len(),
        fmt_metric(winner.mean_auc),
        serde_json::to_string(&report.best)?
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow {
    threshold: f64,
    tp: usize,
    fp: usize,
    tn: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    accuracy: String,
    precision: String,
    recall: String,
}

impl From<&SweepRow> for SweepCsvRow {
    fn from(r: &SweepRow) -> Self {
        SweepCsvRow {
            threshold: r.threshold,
            tp: r.counts.tp,
            fp: r.counts.fp,
            tn: r.counts.tn,
            fn_: r.counts.fn_,
            accuracy: fmt_metric(r.accuracy),
            precision: fmt_metric(r.precision),
            recall: fmt_metric(r.recall),
        }
    }
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let seed = a.seed.unwrap_or(model.seed);
    let p = prepare(&a.data, model.schema.clone(), seed)?;
    let grid = if a.thresholds.is_empty() {
        default_threshold_grid()
    } else {
        a.thresholds.clone()
    };
    let rows = threshold_sweep(&model, split_for(&p, a.split), &grid)?;
    let table: Vec<SweepCsvRow> = rows.iter().map(SweepCsvRow::from).collect();
    write_csv(&a.out, &table)?;
    let mut m = RunManifest::new("sweep", Some(seed), &a)?;
    m.input(&a.data)?;
    m.input(&a.model)?;
    m.output(&a.out)?;
    m.write(&sidecar(&a.out, "manifest.json"))?;
    for r in &table {
        println!(
            "{:.2}  accuracy {}  precision {}  recall {}",
            r.threshold, r.accuracy, r.precision, r.recall
        );
    }
    Ok(())
}

fn model_version(path: &Path, model: &TrainedModel) -> Result<String> {
    let digest = file_sha256(path)?;
    Ok(format!("{}-{}", model.family(), &digest[..12]))
}

fn run_serve(a: ServeArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let version = model_version(&a.model, &model)?;
    let dt = a.second_opinion.as_deref().map(TrainedModel::load).transpose()?;
    let predictor = Predictor::new(model, dt, a.threshold, version.clone())?;
    let stores = ingest_raw_files(&a.raw)?;
    let provider = SnapshotProvider::from_stores(&stores, MatchCaps::default())?;
    let state = Arc::new(AppState::new(predictor, Arc::new(provider)));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr} (model {version}, threshold {})", a.threshold);
        tracing::info!(%addr, "serving");
        incident_service::serve(listener, state, async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
        Ok(())
    })
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

fn column_series(path: &Path, x: &str, ys: &[&str]) -> Result<Vec<plot::Series>> {
    let (header, rows) = read_table(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no column {name:?}", path.display()))
    };
    let xi = col(x)?;
    ys.iter()
        .map(|&y| {
            let yi = col(y)?;
            let points = rows
                .iter()
                .filter_map(|r| Some((r[xi].parse::<f64>().ok()?, r[yi].parse::<f64>().ok()?)))
                .collect();
            Ok(plot::Series {
                name: y.to_string(),
                points,
            })
        })
        .collect()
}

fn run_plot(a: PlotArgs) -> Result<()> {
    let svg = match a.kind {
        PlotKind::Roc => {
            let mut series = column_series(&a.input, "fpr", &["tpr"])?;
            series[0].name = "ROC".into();
            let title = if a.title.is_empty() { "ROC curve" } else { &a.title };
            plot::line_chart(title, "false positive rate", "true positive rate", &series, true)
        }
        PlotKind::Sweep => {
            let series = column_series(&a.input, "threshold", &["accuracy", "precision", "recall"])?;
            let title = if a.title.is_empty() { "Threshold sweep" } else { &a.title };
            plot::line_chart(title, "threshold", "score", &series, false)
        }
    };
    std::fs::write(&a.out, svg).with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = RunManifest::new("plot", None, &a)?;
    m.input(&a.input)?;
    m.output(&a.out)?;
    m.write(&sidecar(&a.out, "manifest.json"))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
