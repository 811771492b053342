use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use activetree::belief::BeliefState;
use activetree::datastream::{
    choose_metric, evaluate_predictor, load_dataset, stagger_layout, stagger_stream, Schema, UtilityMetric,
};
use activetree::experiment::ExperimentConfig;
use activetree::learner::Model;
use activetree::seed::{stream_rng, Stream};
use activetree::{Error, Result};

#[derive(Parser)]
#[command(name = "activetree", version, about = "Cost-sensitive online decision-tree learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config. Trailing `--section.key value` pairs override config keys.
    Run {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Write a Stagger stream as CSV.
    GenStagger {
        #[arg(long = "T", default_value_t = 180)]
        length: usize,
        /// Comma-separated drift epochs.
        #[arg(long, default_value = "60,120")]
        drift: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on a labelled CSV with full-feature MAP prediction.
    Eval {
        #[arg(long)]
        belief: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "auto")]
        schema: String,
        /// accuracy, f1 or auto.
        #[arg(long, default_value = "auto")]
        metric: String,
    },
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            return Err(Error::Config(format!("{flag}: expected --section.key")));
        };
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        let value = it.next().ok_or_else(|| Error::Config(format!("{key}: missing value")))?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

fn load_model(path: &PathBuf) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str::<Model>(&text) {
        Ok(m) => Ok(m),
        Err(_) => Ok(Model::Binary(serde_json::from_str::<BeliefState>(&text)?)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let config = ExperimentConfig::load(&config, &parse_overrides(&overrides)?)?;
            let summary = activetree::experiment::run_experiment(&config)?;
            println!(
                "{} seeds, {} epochs: total cost {:.3} +/- {:.3}, final test utility {:.4} +/- {:.4} -> {}",
                summary.seeds,
                summary.records,
                summary.total_cost.mean,
                summary.total_cost.stderr,
                summary.final_test_utility.mean,
                summary.final_test_utility.stderr,
                config.output_dir.display()
            );
        }
        Command::Validate { config, overrides } => {
            ExperimentConfig::load(&config, &parse_overrides(&overrides)?)?;
            println!("ok");
        }
        Command::GenStagger { length, drift, seed, out } => {
            let drift_points = drift
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::Config(format!("drift: cannot parse {s:?}"))))
                .collect::<Result<Vec<usize>>>()?;
            let points = stagger_stream(length, &drift_points, &mut stream_rng(seed, Stream::Data))?;
            let layout = stagger_layout();
            let mut writer = csv::Writer::from_path(&out).map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
            let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", out.display()));
            let mut header: Vec<String> = layout.features.iter().map(|f| f.name.replace('=', "_")).collect();
            header.push("label".into());
            writer.write_record(&header).map_err(csv_err)?;
            for p in &points {
                let mut row: Vec<String> = p.features.iter().map(|v| format!("{}", *v as u8)).collect();
                row.push(layout.classes[p.label].clone());
                writer.write_record(&row).map_err(csv_err)?;
            }
            writer.flush().map_err(|e| Error::io(&out, e))?;
        }
        Command::Eval { belief, test, schema, metric } => {
            let model = load_model(&belief)?;
            let schema: Schema = schema.parse()?;
            let data = load_dataset(&test, &schema)?;
            if data.layout.n() != model.n() {
                return Err(Error::Data(format!(
                    "test file has {} features, model has {}",
                    data.layout.n(),
                    model.n()
                )));
            }
            let m = model.m();
            let metric = if metric.eq_ignore_ascii_case("auto") {
                choose_metric(data.points.iter().map(|p| p.label), m)
            } else {
                metric.parse::<UtilityMetric>()?
            };
            let utility = evaluate_predictor(&model, &data.points, m, metric);
            println!("{metric:?} {utility:.6}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
