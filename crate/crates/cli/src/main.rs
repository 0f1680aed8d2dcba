use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rpe::baselines::{ArConfig, ArState, IidState, Method};
use rpe::coherence::{coherence_report, DEFAULT_STARTS};
use rpe::detector::{DetectorConfig, DetectorSnapshot, DetectorState, ProjectionMode};
use rpe::eval::{evaluate_series, run_scenario, run_scenario_with_curves, write_curve_csv, BenchmarkReport, Scenario};
use rpe::synth::{inject_anomalies, generate_clean, AnomalySpec, SynthSpec};
use rpe::trajectory::{read_csv, write_csv, CsvSeries};

#[derive(Parser)]
#[command(name = "rpe", version, about = "Robust-projection anomaly detection for univariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a detector from a training CSV and save it as JSON.
    Train(TrainArgs),
    /// Score a CSV sample by sample.
    Detect(DetectArgs),
    /// Coherence diagnostics of the subspace learned from a CSV.
    Coherence(CoherenceArgs),
    /// Generate a synthetic labeled series.
    Synth(SynthArgs),
    /// Max-F1 benchmark on a named scenario, a scenario file, or a labeled CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON detector config; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    impute_median: bool,
}

#[derive(Args)]
struct DetectArgs {
    /// Saved detector from `train` (rpe or spe only).
    #[arg(long, conflicts_with = "train")]
    model: Option<PathBuf>,
    /// Training CSV; the detector is fit on it before scoring.
    #[arg(long, required_unless_present = "model")]
    train: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    impute_median: bool,
}

#[derive(Args)]
struct CoherenceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window length; overrides the config.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_STARTS)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    impute_median: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON with `synth` and optional `anomaly` sections.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// table1..table4 or a scenario JSON file.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    scenario: Option<String>,
    /// Labeled CSV evaluated as a single run.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    train_len: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matching tolerance in stamps for CSV input.
    #[arg(long, default_value_t = 0)]
    tolerance: usize,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-run PR curves.
    #[arg(long)]
    emit_curves: Option<PathBuf>,
    #[arg(long)]
    impute_median: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct SynthFile {
    synth: SynthSpec,
    anomaly: Option<AnomalySpec>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<DetectorConfig> {
    let config = match path {
        Some(p) => read_json(p)?,
        None => DetectorConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn load_csv(path: &Path, impute_median: bool) -> Result<CsvSeries> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_csv(BufReader::new(file), impute_median).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let csv = load_csv(&args.input, args.impute_median)?;
    let state = DetectorState::train(csv.series.values(), config)?;
    let mut out = create(&args.output)?;
    serde_json::to_writer_pretty(&mut out, &DetectorSnapshot::from(&state))?;
    out.flush()?;
    Ok(())
}

struct Row {
    residual: f64,
    cdf_score: Option<f64>,
    flagged: bool,
}

enum Scorer {
    Projection(DetectorState),
    Iid(IidState, f64),
    Ar(ArState),
}

impl Scorer {
    fn step(&mut self, v: f64) -> Result<Row> {
        Ok(match self {
            Scorer::Projection(s) => {
                let r = s.step(v)?;
                Row { residual: r.residual, cdf_score: Some(r.cdf_score), flagged: r.flagged }
            }
            Scorer::Iid(s, threshold) => {
                let (mean, _) = s.moments();
                let score = s.step(v)?;
                Row { residual: v - mean, cdf_score: Some(score), flagged: score > *threshold }
            }
            Scorer::Ar(s) => Row { residual: s.step(v)?, cdf_score: None, flagged: false },
        })
    }
}

fn detect(args: DetectArgs) -> Result<()> {
    let scorer = match (&args.model, &args.train) {
        (Some(model), _) => {
            let snapshot: DetectorSnapshot = read_json(model)?;
            let saved = match snapshot.config.projection {
                ProjectionMode::Robust => Method::Rpe,
                ProjectionMode::Simple => Method::Spe,
            };
            if let Some(m) = args.method {
                if m != saved {
                    bail!("model was trained as {saved}; --method {m} needs --train instead");
                }
            }
            Scorer::Projection(DetectorState::try_from(snapshot)?)
        }
        (None, Some(train)) => {
            let mut config = load_config(args.config.as_deref())?;
            let values = load_csv(train, args.impute_median)?.series.into_parts().0;
            match args.method.unwrap_or(Method::Rpe) {
                Method::Rpe => Scorer::Projection(DetectorState::train(&values, config)?),
                Method::Spe => {
                    config.projection = ProjectionMode::Simple;
                    Scorer::Projection(DetectorState::train(&values, config)?)
                }
                Method::Iid => Scorer::Iid(IidState::from_training(&values), config.cdf_threshold),
                Method::Ar => {
                    let ar = ArConfig {
                        retrain_every: config.retrain_every,
                        t_max: config.t_max,
                        retrain_stop_len: config.retrain_stop(),
                        ..ArConfig::default()
                    };
                    Scorer::Ar(ArState::train(&values, ar)?)
                }
            }
        }
        (None, None) => bail!("one of --model or --train is required"),
    };
    let mut scorer = scorer;
    let input = load_csv(&args.input, args.impute_median)?;
    let mut w = csv::Writer::from_writer(output(args.output.as_deref())?);
    w.write_record(["index", "value", "residual", "cdf_score", "flagged"])?;
    for (i, &v) in input.series.values().iter().enumerate() {
        let row = scorer.step(v).with_context(|| format!("scoring sample {i}"))?;
        w.write_record([
            i.to_string(),
            format!("{v:?}"),
            format!("{:?}", row.residual),
            row.cdf_score.map(|c| format!("{c:?}")).unwrap_or_default(),
            u8::from(row.flagged).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn coherence(args: CoherenceArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(w) = args.window {
        config.window_size = w;
        config.validate()?;
    }
    let csv = load_csv(&args.input, args.impute_median)?;
    let model = config.estimator.fit(csv.series.values(), config.window_size, config.rank_rule())?;
    let report = coherence_report(model.basis(), args.starts, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec: SynthFile = match &args.spec {
        Some(p) => read_json(p)?,
        None => SynthFile::default(),
    };
    let mut series = generate_clean(&spec.synth)?;
    if let Some(anomaly) = &spec.anomaly {
        series = inject_anomalies(&series, anomaly)?;
    }
    write_csv(create(&args.out)?, &series, None)?;
    Ok(())
}

fn load_scenario(name: &str) -> Result<Scenario> {
    if let Some(s) = Scenario::by_name(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        bail!("unknown scenario {name:?}: expected table1..table4 or a JSON file");
    }
    read_json(path)
}

fn bench(args: BenchArgs) -> Result<()> {
    let curves = args.emit_curves.is_some();
    let report: BenchmarkReport = match (&args.scenario, &args.input) {
        (Some(name), _) => {
            let scenario = load_scenario(name)?;
            if curves {
                run_scenario_with_curves(&scenario)?
            } else {
                run_scenario(&scenario)?
            }
        }
        (None, Some(input)) => {
            let config = load_config(args.config.as_deref())?;
            let csv = load_csv(input, args.impute_median)?;
            let descriptor = input.display().to_string();
            evaluate_series(&descriptor, &csv.series, &Method::ALL, args.train_len, &config, args.tolerance, curves)?
        }
        (None, None) => bail!("one of --scenario or --input is required"),
    };
    if let Some(dir) = &args.emit_curves {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for run in &report.runs {
            for m in &run.methods {
                let path = dir.join(format!("run{:03}_{}.csv", run.run, m.method));
                write_curve_csv(create(&path)?, &m.curve)?;
            }
        }
    }
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", report.to_json()?)?;
    out.flush()?;
    for s in &report.summary {
        eprintln!("{:<4} F1 {:.3}  P {:.3}  R {:.3}", s.method.as_str(), s.mean_f1, s.mean_precision, s.mean_recall);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Coherence(a) => coherence(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
    }
}
