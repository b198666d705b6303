use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crisispanel::io::{emit_report, read_events_csv, read_scores_csv, run, OutputMode, RunConfig};
use crisispanel::study::{crisis_dummy, median_cluster};
use crisispanel::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_ESTIMATION: u8 = 3;

#[derive(Parser)]
#[command(name = "crisispanel", version, about = "Two-cluster panel EGLS replication harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Text,
    Json,
    Both,
}

impl From<Output> for OutputMode {
    fn from(o: Output) -> Self {
        match o {
            Output::Text => OutputMode::Text,
            Output::Json => OutputMode::Json,
            Output::Both => OutputMode::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured replication and write the report.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output` key.
        #[arg(long, value_enum)]
        output: Option<Output>,
        /// Writes report.txt / report.json here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Split countries at the median score of one indicator.
    Cluster {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        indicator: String,
    },
    /// Print the crisis dummy for every country and year.
    Dummy {
        #[arg(long)]
        events: PathBuf,
        /// Last year; open intervals run to it.
        #[arg(long)]
        horizon: i32,
        /// First year; defaults to the earliest crisis start.
        #[arg(long)]
        start: Option<i32>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate { config, output, out_dir } => estimate(&config, output, out_dir.as_deref()),
        Command::Cluster { scores, indicator } => cluster(&scores, &indicator),
        Command::Dummy { events, horizon, start } => dummy(&events, horizon, start),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_ESTIMATION })
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    info!("wrote {}", path.display());
    Ok(())
}

fn stdout_write(s: &str) -> Result<(), Error> {
    std::io::stdout()
        .write_all(s.as_bytes())
        .map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source })
}

fn estimate(config: &Path, output: Option<Output>, out_dir: Option<&Path>) -> Result<(), Error> {
    let cfg = RunConfig::load(config)?;
    for w in &cfg.warnings {
        warn!("{w}");
    }
    let mode = output.map_or(cfg.output, OutputMode::from);
    let bundle = run(&cfg)?;
    for c in &bundle.clusters {
        for w in &c.warnings {
            warn!("{} cluster: {w}", c.cluster);
        }
    }
    let rendered = emit_report(&bundle, mode)?;
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
            if let Some(text) = &rendered.text {
                write_file(&dir.join("report.txt"), text)?;
            }
            if let Some(json) = &rendered.json {
                write_file(&dir.join("report.json"), json)?;
            }
        }
        None => {
            if let Some(text) = &rendered.text {
                stdout_write(text)?;
            }
            if let Some(json) = &rendered.json {
                stdout_write(json)?;
            }
        }
    }
    Ok(())
}

fn cluster(scores: &Path, indicator: &str) -> Result<(), Error> {
    let table = read_scores_csv(scores)?;
    let a = median_cluster(&table, indicator)?;
    for w in &a.warnings {
        warn!("{w}");
    }
    let join = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(" ");
    let text = format!(
        "Indicator: {indicator}\nMedian score: {:.6}\nInclusive ({}): {}\nExtractive ({}): {}\n",
        a.median,
        a.inclusive.len(),
        join(&a.inclusive),
        a.extractive.len(),
        join(&a.extractive)
    );
    stdout_write(&text)
}

fn dummy(events: &Path, horizon: i32, start: Option<i32>) -> Result<(), Error> {
    let cal = read_events_csv(events, horizon)?;
    let start = start
        .or_else(|| cal.countries().flat_map(|c| cal.intervals(c).unwrap_or(&[])).map(|i| i.start).min())
        .unwrap_or(horizon);
    if start > horizon {
        return Err(Error::InvalidInput(format!("start year {start} is after horizon {horizon}")));
    }
    let mut out = String::from("country,year,dummy\n");
    for country in cal.countries() {
        for year in start..=horizon {
            out.push_str(&format!("{country},{year},{}\n", crisis_dummy(&cal, country, year)?));
        }
    }
    stdout_write(&out)
}
