//! Command-line interface: `select`, `predict`, `network` and `bench`.

pub mod settings;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{self, Correlation, SyntheticSpec};
use crate::data::{load_dataset, Dataset, LoadOptions, Task};
use crate::dimension::{select, Correction, SelectionReport, TestConfig};
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::estimators::{CoefVector, EstimatorConfig};
use crate::model::ModelIndexSet;
use crate::network::{
    build_network, export_network, fit_ensemble, model_average_predict, ExportFormat,
};
use crate::search::{run_search, FoldConfig, Scoring, SearchConfig};

pub use settings::{DivergenceChoice, SearchOptions, Settings, TestChoice};

#[derive(Parser, Debug)]
#[command(
    name = "paradigm",
    version,
    about = "Cross-validated stepwise model search and selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Search the model space, choose the dimension and filter the best models.
    Select(SelectArgs),
    /// Predict new rows with the averaged selected models.
    Predict(PredictArgs),
    /// Export the co-occurrence network of a selection.
    Network(NetworkArgs),
    /// Generate planted-truth data and measure recovery.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub options: SearchOptions,
    /// key = value file supplying defaults for any option above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-run exactly the settings of a previous manifest.json.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Worker threads for candidate scoring (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// selection.json from `select`; models are refit on --data.
    #[arg(long, required_unless_present = "models")]
    pub selection: Option<PathBuf>,
    /// models.json from `select` with fitted coefficients.
    #[arg(long, conflicts_with = "selection")]
    pub models: Option<PathBuf>,
    /// Training data used to refit the selection.
    #[arg(long, requires = "selection")]
    pub data: Option<PathBuf>,
    /// Rows to predict; must contain the covariates used by the models.
    #[arg(long)]
    pub test: PathBuf,
    /// Response column, used for refitting and, when present in the test file, for error counts.
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, value_parser = settings::parse_task, default_value = "binary")]
    pub task: Task,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NetworkArgs {
    #[arg(long)]
    pub selection: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated subset of dot, json, csv.
    #[arg(long, default_value = "dot,json")]
    pub formats: String,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 120)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Logistic scale (binary) or noise sd (continuous).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Equicorrelation of the covariates.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_parser = settings::parse_task, default_value = "binary")]
    pub task: Task,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub dmax: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
}

/// Parse `std::env::args`, run, and return the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Select(a) => cmd_select(&a).map(|_| ()),
        Command::Predict(a) => cmd_predict(&a).map(|_| ()),
        Command::Network(a) => cmd_network(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub rows: usize,
    pub columns: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub search_ms: f64,
    pub select_ms: f64,
    pub write_ms: f64,
    pub total_ms: f64,
}

/// Everything needed to repeat a `select` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub settings: Settings,
    pub seed: u64,
    pub dataset: Fingerprint,
    pub search: SearchConfig,
    pub scoring: Scoring,
    pub tests: TestConfig,
    pub threads: usize,
    pub timings: Timings,
    pub outputs: Vec<String>,
}

/// Fitted coefficients of the selected models on the full training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelsFile {
    pub feature_names: Vec<String>,
    pub task: Task,
    pub threshold: f64,
    pub models: Vec<CoefVector>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn fingerprint(path: &Path, ds: &Dataset) -> Result<Fingerprint> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(Fingerprint {
        rows: ds.n(),
        columns: ds.p() + 1,
        sha256: sha256_hex(&bytes),
    })
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn scoring_for(s: &Settings, ds: &Dataset) -> Scoring {
    let mut estimator = EstimatorConfig::for_task(s.task);
    estimator.threshold = s.threshold;
    estimator.intercept = ds.has_intercept();
    let divergence = match s.divergence {
        DivergenceChoice::Ce => DivergenceSpec::classification(s.w1, s.w2),
        DivergenceChoice::L1 => DivergenceSpec::l1(),
        DivergenceChoice::Sq => DivergenceSpec::squared(),
    };
    Scoring {
        estimator,
        divergence,
    }
}

fn search_config_for(s: &Settings, ds: &Dataset, seed: u64) -> Result<SearchConfig> {
    let m0 =
        s.m0.iter()
            .map(|name| {
                ds.feature_index(name)
                    .ok_or_else(|| Error::UnknownFeature(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
    Ok(SearchConfig {
        d_max: s.d_max,
        b: s.b.unwrap_or_else(|| SearchConfig::default_b(ds.p())),
        alpha: s.alpha,
        pi: s.pi,
        m0: ModelIndexSet::new(m0),
        initial_mode: s.initial,
        seed,
        folds: FoldConfig {
            m: s.m,
            k: s.k,
            mode: s.cv,
            stratify: true,
        },
        ..SearchConfig::new(ds.p(), seed)
    })
}

fn test_config_for(s: &Settings) -> TestConfig {
    TestConfig {
        family_level: s.family_level,
        correction: Correction::Bonferroni,
        test_kind: s.test.kind(),
    }
}

/// Run `select` and return its manifest.
pub fn cmd_select(args: &SelectArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let (settings, expected) = match &args.manifest {
        Some(path) => {
            let m: RunManifest = read_json(path)?;
            let mut s = m.settings;
            if let Some(d) = &args.options.data {
                s.data = d.clone();
            }
            s.seed = Some(m.seed);
            (s, Some(m.dataset))
        }
        None => {
            let file = match &args.config {
                Some(p) => SearchOptions::from_config_file(p)?,
                None => SearchOptions::default(),
            };
            (args.options.clone().over(file).resolve()?, None)
        }
    };
    let seed = settings.seed.unwrap_or_else(rand::random);
    let settings = Settings {
        seed: Some(seed),
        ..settings
    };

    let opts = LoadOptions {
        policy: settings.missing,
        ..LoadOptions::default()
    };
    let ds = load_dataset(&settings.data, &settings.response, settings.task, &opts)?;
    let print = fingerprint(&settings.data, &ds)?;
    if let Some(expected) = expected {
        if expected != print {
            return Err(Error::FingerprintMismatch {
                expected: expected.sha256,
                found: print.sha256,
            });
        }
    }
    let scoring = scoring_for(&settings, &ds);
    let config = search_config_for(&settings, &ds, seed)?;
    let tests = test_config_for(&settings);
    config.validate(ds.p())?;
    scoring.estimator.validate()?;
    scoring.divergence.validate()?;
    tests.validate()?;
    let mut timings = Timings {
        load_ms: ms(start),
        ..Timings::default()
    };

    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let t = Instant::now();
    let trace = with_threads(args.threads, || run_search(&ds, &config, &scoring))??;
    timings.search_ms = ms(t);
    let t = Instant::now();
    let selection = select(&trace, &tests)?;
    let models = selection.models();
    let net = build_network(&models, &config.m0, ds.feature_names())?;
    let coefs = fit_ensemble(&ds, &models, &scoring.estimator)?;
    timings.select_ms = ms(t);

    let t = Instant::now();
    let names = ds.feature_names();
    let out = &args.out;
    let report = selection.report(names);
    write_json(&out.join("trace.json"), &trace.report(names))?;
    write_text(&out.join("curve.csv"), &trace.curve_csv())?;
    write_json(&out.join("selection.json"), &report)?;
    export_network(&net, ExportFormat::Json, &out.join("network.json"))?;
    export_network(&net, ExportFormat::Dot, &out.join("network.dot"))?;
    write_json(
        &out.join("models.json"),
        &ModelsFile {
            feature_names: names.to_vec(),
            task: ds.task(),
            threshold: settings.threshold,
            models: coefs,
        },
    )?;
    timings.write_ms = ms(t);
    timings.total_ms = ms(start);

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        settings,
        seed,
        dataset: print,
        search: config,
        scoring,
        tests,
        threads: rayon::current_num_threads().max(args.threads),
        timings,
        outputs: [
            "trace.json",
            "curve.csv",
            "selection.json",
            "network.json",
            "network.dot",
            "models.json",
            "manifest.json",
        ]
        .map(String::from)
        .to_vec(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    println!("seed {seed}");
    println!("curve (d, q_hat): {:?}", trace.curve());
    println!(
        "selected dimension {}{}; {} model(s) retained; best {} (risk {})",
        report.d_star,
        if report.at_d_max {
            " (every step significant: consider a larger dmax)"
        } else {
            ""
        },
        report.models.len(),
        report.min_model.names.join("+"),
        report.min_model.d_hat
    );
    println!("outputs written to {}", out.display());
    Ok(manifest)
}

/// A headered table read as strings.
struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path) -> Result<Table> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let rows = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    Ok(Table { header, rows })
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::NonNumeric {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub rows: usize,
    /// Misclassified rows (binary) when the truth column is present.
    pub ensemble_errors: Option<usize>,
    pub per_model_errors: Option<Vec<usize>>,
    /// Mean squared error (continuous) when the truth column is present.
    pub ensemble_mse: Option<f64>,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<PredictSummary> {
    let (names, coefs, threshold) = if let Some(path) = &args.models {
        let f: ModelsFile = read_json(path)?;
        (
            f.feature_names,
            f.models,
            args.threshold.unwrap_or(f.threshold),
        )
    } else {
        let sel_path = args
            .selection
            .as_ref()
            .expect("clap requires selection or models");
        let data = args
            .data
            .as_ref()
            .ok_or_else(|| Error::invalid("--data is required to refit a selection"))?;
        let sel: SelectionReport = read_json(sel_path)?;
        let ds = load_dataset(data, &args.response, args.task, &LoadOptions::default())?;
        let threshold = args.threshold.unwrap_or(0.5);
        let mut est = EstimatorConfig::for_task(args.task);
        est.threshold = threshold;
        est.intercept = ds.has_intercept();
        let models: Vec<ModelIndexSet> = sel.models.iter().map(|e| e.model.clone()).collect();
        for e in &sel.models {
            for (&i, name) in e.model.indices().iter().zip(&e.names) {
                if ds.feature_names().get(i) != Some(name) {
                    return Err(Error::invalid(format!(
                        "training data column {i} is not '{name}'"
                    )));
                }
            }
        }
        let coefs = fit_ensemble(&ds, &models, &est)?;
        (ds.feature_names().to_vec(), coefs, threshold)
    };
    if coefs.is_empty() {
        return Err(Error::invalid("no models to predict with"));
    }

    let table = read_table(&args.test)?;
    let used: Vec<usize> = {
        let mut v: Vec<usize> = coefs
            .iter()
            .flat_map(|c| c.model.indices().to_vec())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut positions = Vec::with_capacity(used.len());
    for &i in &used {
        let name = &names[i];
        let pos = table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        positions.push((i, pos));
    }
    let truth_pos = table.header.iter().position(|h| *h == args.response);

    let mut w = csv::Writer::from_path(&args.out).map_err(|source| Error::Csv {
        path: args.out.clone(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: args.out.clone(),
        source,
    };
    let mut header = vec!["row".to_string()];
    header.extend((1..=coefs.len()).map(|j| format!("model_{j}")));
    header.push("ensemble".into());
    if args.task == Task::Binary {
        header.push("label".into());
    }
    if truth_pos.is_some() {
        header.push("truth".into());
    }
    w.write_record(&header).map_err(csv_err)?;

    let mut x0 = vec![0.0; names.len()];
    let mut ensemble_errors = 0;
    let mut per_model_errors = vec![0; coefs.len()];
    let mut sq = 0.0;
    for (row, rec) in table.rows.iter().enumerate() {
        for &(i, pos) in &positions {
            x0[i] = parse_cell(rec.get(pos).unwrap_or(""), row, &names[i])?;
        }
        let e = model_average_predict(&coefs, &x0, threshold)?;
        let mut out = vec![row.to_string()];
        out.extend(e.per_model.iter().map(f64::to_string));
        out.push(e.averaged.to_string());
        if let Some(l) = e.label {
            out.push(l.to_string());
        }
        if let Some(tp) = truth_pos {
            let truth = parse_cell(rec.get(tp).unwrap_or(""), row, &args.response)?;
            out.push(truth.to_string());
            match args.task {
                Task::Binary => {
                    if e.label.map(f64::from) != Some(truth) {
                        ensemble_errors += 1;
                    }
                    for (j, v) in e.per_model.iter().enumerate() {
                        if f64::from(u8::from(*v >= threshold)) != truth {
                            per_model_errors[j] += 1;
                        }
                    }
                }
                Task::Continuous => sq += (e.averaged - truth) * (e.averaged - truth),
            }
        }
        w.write_record(&out).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&args.out))?;

    let rows = table.rows.len();
    let summary = match (truth_pos, args.task) {
        (None, _) => PredictSummary {
            rows,
            ensemble_errors: None,
            per_model_errors: None,
            ensemble_mse: None,
        },
        (Some(_), Task::Binary) => PredictSummary {
            rows,
            ensemble_errors: Some(ensemble_errors),
            per_model_errors: Some(per_model_errors),
            ensemble_mse: None,
        },
        (Some(_), Task::Continuous) => PredictSummary {
            rows,
            ensemble_errors: None,
            per_model_errors: None,
            ensemble_mse: Some(sq / rows.max(1) as f64),
        },
    };
    if let Some(e) = summary.ensemble_errors {
        println!("ensemble test errors: {e}/{rows}");
    }
    if let Some(mse) = summary.ensemble_mse {
        println!("ensemble mean squared error: {mse}");
    }
    println!("predictions written to {}", args.out.display());
    Ok(summary)
}

/// Covariate names indexed by id, recovered from a selection report.
fn names_from_selection(sel: &SelectionReport) -> Vec<String> {
    let top = sel
        .models
        .iter()
        .filter_map(|e| e.model.max_index())
        .max()
        .map_or(0, |m| m + 1);
    let mut names: Vec<String> = (0..top).map(|i| format!("#{i}")).collect();
    for e in &sel.models {
        for (&i, n) in e.model.indices().iter().zip(&e.names) {
            names[i] = n.clone();
        }
    }
    names
}

pub fn cmd_network(args: &NetworkArgs) -> Result<()> {
    let formats = args
        .formats
        .split(',')
        .map(|f| match f.trim() {
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::invalid(format!("unknown network format '{other}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let sel: SelectionReport = read_json(&args.selection)?;
    let models: Vec<ModelIndexSet> = sel.models.iter().map(|e| e.model.clone()).collect();
    let net = build_network(&models, &sel.m0, &names_from_selection(&sel))?;
    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    for f in formats {
        let file = match f {
            ExportFormat::Dot => "network.dot",
            ExportFormat::Json => "network.json",
            ExportFormat::Csv => "network.csv",
        };
        export_network(&net, f, &args.out.join(file))?;
    }
    let hubs: Vec<&str> = net.hubs().iter().map(|n| n.name.as_str()).collect();
    println!(
        "{} nodes, {} edges, hubs: {}",
        net.nodes.len(),
        net.edges.len(),
        hubs.join(", ")
    );
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let base = SyntheticSpec::default_bench(args.seed);
    let spec = SyntheticSpec {
        n: args.n,
        p: args.p,
        task: args.task,
        scale: args.scale.unwrap_or(match args.task {
            Task::Binary => base.scale,
            Task::Continuous => 0.5,
        }),
        correlation: args.rho.map_or(Correlation::Independent, |rho| {
            Correlation::Equicorrelated { rho }
        }),
        ..base
    };
    spec.validate()?;
    let mut config = bench::default_search(&spec);
    if let Some(b) = args.b {
        config.b = b;
    }
    if let Some(d) = args.dmax {
        config.d_max = d;
    }
    if let Some(m) = args.m {
        config.folds.m = m;
    }
    if let Some(k) = args.k {
        config.folds.k = k;
    }
    config.validate(spec.p)?;
    let scoring = bench::default_scoring(spec.task);
    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let run = with_threads(args.threads, || {
        bench::run_bench(&spec, &config, &scoring, &TestConfig::default())
    })??;
    let names = run.dataset.feature_names();
    bench::write_csv(&run.dataset, &args.out.join("data.csv"))?;
    write_json(&args.out.join("trace.json"), &run.trace.report(names))?;
    write_text(&args.out.join("curve.csv"), &run.trace.curve_csv())?;
    write_json(
        &args.out.join("selection.json"),
        &run.selection.report(names),
    )?;
    #[derive(Serialize)]
    struct Metrics<'a> {
        spec: &'a SyntheticSpec,
        search: &'a SearchConfig,
        recovery: &'a bench::RecoveryReport,
        recovered: bool,
    }
    write_json(
        &args.out.join("metrics.json"),
        &Metrics {
            spec: &spec,
            search: &config,
            recovery: &run.report,
            recovered: run.report.recovered(),
        },
    )?;
    let r = &run.report;
    println!("curve (d, q_hat): {:?}", r.curve);
    println!(
        "d* = {} (true {}), support in S0: {}, S0 size {}, curve minimum at true d: {}, {:.1}s",
        r.d_star,
        spec.support.len(),
        r.support_in_s0,
        r.s0_size,
        r.curve_min_at_true_d,
        r.runtime_secs
    );
    Ok(())
}
