//! Batch experiment runner. Every subcommand reads plain-text inputs,
//! computes its whole output in memory, and writes the file once, so a
//! failing run never leaves a partial output behind and identical inputs
//! produce byte-identical outputs.

use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use telecare_core::catalyst::{CapabilityTaxonomy, Registry};
use telecare_core::cep::{format_alert_line, CepEngine};
use telecare_core::events::{replay_log, LogSource};
use telecare_core::numfmt::format_decimal;
use telecare_core::rules::parse_rules;
use telecare_core::sim::{self, parse_config, Comparison, MetricsReport, Mode};

const ALERT_HEADER: &str = "fire_time,patient_id,rule_name,severity,predicted_crossing_time";
const PROPOSAL_HEADER: &str =
    "partyA,partyB,provideA,requestB,degree1,provideB,requestA,degree2,score";

#[derive(Parser)]
#[command(
    name = "telecare",
    version,
    about = "Telemetry alert replay, service matchmaking, and care-ecosystem simulation"
)]
struct Cli {
    /// Print progress details to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay event logs through a rule file and write the alert CSV.
    Cep {
        /// Rule file in the rule language.
        #[arg(long)]
        rules: PathBuf,
        /// Event log(s); repeatable. Each must be time-ordered.
        #[arg(long = "log", required = true, num_args = 1..)]
        logs: Vec<PathBuf>,
        /// Output alert CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Per-rule per-patient refractory period in seconds; 0 fires on
        /// every matching event.
        #[arg(long, default_value_t = telecare_core::cep::DEFAULT_REFRACTORY_SECS)]
        refractory_secs: u64,
    },
    /// Discover win-win proposals from a registry snapshot.
    Catalyst {
        /// Registry snapshot (one entry per line).
        #[arg(long)]
        registry: PathBuf,
        /// Capability taxonomy (one `parent,child` edge per line).
        #[arg(long)]
        taxonomy: PathBuf,
        /// Output proposal CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulation and write a single metrics row.
    Sim {
        /// Scenario config (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output metrics CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both organization modes over a seed range and write per-run
    /// rows plus mean/sd summaries and paired differences.
    Compare {
        /// Scenario config; `mode` and `seed` are overridden per run.
        #[arg(long)]
        config: PathBuf,
        /// Inclusive seed range, e.g. `1..30`.
        #[arg(long)]
        seeds: String,
        /// Output comparison CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = cli.verbose;
    let (out, result) = match cli.command {
        Command::Cep {
            rules,
            logs,
            out,
            refractory_secs,
        } => (out.clone(), run_cep(&rules, &logs, refractory_secs, verbose)),
        Command::Catalyst {
            registry,
            taxonomy,
            out,
        } => (out.clone(), run_catalyst(&registry, &taxonomy, verbose)),
        Command::Sim { config, out } => (out.clone(), run_sim(&config)),
        Command::Compare { config, seeds, out } => {
            (out.clone(), run_compare(&config, &seeds, verbose))
        }
    };

    match result {
        Ok(content) => match fs::write(&out, &content) {
            Ok(()) => {
                if verbose {
                    eprintln!("wrote {} ({} bytes)", out.display(), content.len());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                let _ = fs::remove_file(&out);
                eprintln!("error: {}: {e}", out.display());
                ExitCode::FAILURE
            }
        },
        Err(diagnostics) => {
            for d in diagnostics {
                eprintln!("error: {d}");
            }
            ExitCode::FAILURE
        }
    }
}

fn read(path: &Path) -> Result<String, Vec<String>> {
    fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])
}

fn run_cep(
    rules_path: &Path,
    log_paths: &[PathBuf],
    refractory_secs: u64,
    verbose: bool,
) -> Result<String, Vec<String>> {
    let rules_text = read(rules_path)?;
    let rules = parse_rules(&rules_text)
        .map_err(|e| vec![format!("{}: {e}", rules_path.display())])?;

    let mut texts = Vec::new();
    for path in log_paths {
        texts.push((path.display().to_string(), read(path)?));
    }
    let sources: Vec<LogSource> = texts
        .iter()
        .map(|(name, text)| LogSource::new(name, text))
        .collect();
    let stream =
        replay_log(&sources).map_err(|errs| errs.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;

    let mut engine = CepEngine::with_refractory(rules, refractory_secs);
    let mut out = String::from(ALERT_HEADER);
    out.push('\n');
    let mut count = 0usize;
    for event in stream.iter() {
        let alerts = engine
            .ingest(event)
            .map_err(|e| vec![format!("replay: {e}")])?;
        for alert in alerts {
            out.push_str(&format_alert_line(&alert));
            out.push('\n');
            count += 1;
        }
    }
    if verbose {
        eprintln!("{count} alerts from {} events", stream.len());
    }
    Ok(out)
}

fn run_catalyst(
    registry_path: &Path,
    taxonomy_path: &Path,
    verbose: bool,
) -> Result<String, Vec<String>> {
    let taxonomy_text = read(taxonomy_path)?;
    let taxonomy = CapabilityTaxonomy::parse(&taxonomy_text)
        .map_err(|e| vec![format!("{}: {e}", taxonomy_path.display())])?;

    let registry_text = read(registry_path)?;
    let registry = Registry::parse_snapshot(taxonomy, &registry_text)
        .map_err(|(line, msg)| vec![format!("{}:{line}: {msg}", registry_path.display())])?;

    let proposals = registry.find_winwins();
    if verbose {
        eprintln!(
            "{} proposals from {} entries",
            proposals.len(),
            registry.len()
        );
    }
    let mut out = String::from(PROPOSAL_HEADER);
    out.push('\n');
    for p in proposals {
        out.push_str(&p.format_line());
        out.push('\n');
    }
    Ok(out)
}

fn run_sim(config_path: &Path) -> Result<String, Vec<String>> {
    let cfg = parse_config(&read(config_path)?)
        .map_err(|e| vec![format!("{}: {e}", config_path.display())])?;
    let report = sim::run(&cfg).map_err(|e| vec![format!("{}: {e}", config_path.display())])?;
    Ok(format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row()))
}

fn run_compare(config_path: &Path, seeds_spec: &str, verbose: bool) -> Result<String, Vec<String>> {
    let cfg = parse_config(&read(config_path)?)
        .map_err(|e| vec![format!("{}: {e}", config_path.display())])?;
    let seeds = parse_seed_range(seeds_spec).map_err(|e| vec![e])?;
    let comparison = sim::compare(&cfg, &seeds).map_err(|e| vec![e.to_string()])?;
    if verbose {
        eprintln!("compared {} seed pairs", comparison.pairs.len());
    }
    Ok(comparison_csv(&comparison))
}

/// Inclusive `a..b` seed range.
fn parse_seed_range(spec: &str) -> Result<Vec<u64>, String> {
    let err = || format!("seeds must be an inclusive range `a..b`, got {spec:?}");
    let (a, b) = spec.split_once("..").ok_or_else(err)?;
    let a: u64 = a.trim().parse().map_err(|_| err())?;
    let b: u64 = b.trim().parse().map_err(|_| err())?;
    if b < a {
        return Err(format!("empty seed range {spec:?}"));
    }
    Ok((a..=b).collect())
}

/// Per-run rows (traditional seeds ascending, then community seeds), then
/// mean and sample-sd rows per mode, then paired soc-minus-traditional
/// difference rows. The seed column labels the summary rows.
fn comparison_csv(comparison: &Comparison) -> String {
    let mut out = String::from(MetricsReport::CSV_HEADER);
    out.push('\n');
    for mode in [Mode::Traditional, Mode::Soc] {
        for report in comparison.reports(mode) {
            out.push_str(&report.csv_row());
            out.push('\n');
        }
    }

    let summary_row = |label: &str, stat: &str, values: [f64; 11]| {
        let cols: Vec<String> = values.iter().map(|v| format_decimal(*v)).collect();
        format!("{label},{stat},{}\n", cols.join(","))
    };
    for mode in [Mode::Traditional, Mode::Soc] {
        let mut means = [0.0; 11];
        let mut sds = [0.0; 11];
        for i in 0..11 {
            let (m, s) = comparison.mean_sd_of(mode, |r| r.numeric_columns()[i]);
            means[i] = m;
            sds[i] = s;
        }
        out.push_str(&summary_row(mode.token(), "mean", means));
        out.push_str(&summary_row(mode.token(), "sd", sds));
    }
    let mut dmeans = [0.0; 11];
    let mut dsds = [0.0; 11];
    for i in 0..11 {
        let (m, s) = comparison.paired_diff(|r| r.numeric_columns()[i]);
        dmeans[i] = m;
        dsds[i] = s;
    }
    out.push_str(&summary_row("diff", "mean", dmeans));
    out.push_str(&summary_row("diff", "sd", dsds));
    out
}
