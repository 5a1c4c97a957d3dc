//! `bugtriage`: ingest an issue-tracker CSV, train triage models, recommend
//! developers for incoming reports, and evaluate Top-K accuracy on a
//! chronological split.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{cmd_assign, cmd_evaluate, cmd_ingest, cmd_recommend, cmd_train, ReportInput};
use config::Overrides;

#[derive(Parser)]
#[command(
    name = "bugtriage",
    about = "Recommend developers for incoming bug reports from issue-tracker history",
    version
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Report fields passed as flags; each overrides the same field from
/// --report-json.
#[derive(Debug, Clone, clap::Args)]
pub struct ReportFlags {
    /// JSON file with the report fields.
    #[arg(long = "report-json")]
    pub report_json: Option<PathBuf>,
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub description: Option<String>,
    #[arg(long)]
    pub product: Option<String>,
    #[arg(long)]
    pub component: Option<String>,
    /// Label such as P1..P5.
    #[arg(long)]
    pub priority: Option<String>,
    /// Label such as blocker, major, normal.
    #[arg(long)]
    pub severity: Option<String>,
    /// Timestamp (RFC 3339 or "YYYY-MM-DD HH:MM:SS"); defaults to the end
    /// of the ingested history.
    #[arg(long)]
    pub created: Option<String>,
}

impl ReportFlags {
    fn into_input(self) -> anyhow::Result<ReportInput> {
        let base = match &self.report_json {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text)?
            }
            None => ReportInput::default(),
        };
        Ok(base.merge_flags(&self))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse, normalize, and filter a dataset; write the corpus cache,
    /// statistics, and rejects report.
    Ingest,
    /// Train the configured backend(s) on the chronological train split.
    Train,
    /// Recommend Top-K developers for a report given by file or flags.
    Recommend {
        #[command(flatten)]
        report: ReportFlags,
    },
    /// Replay the test split and compute Top-K accuracy, precision, recall.
    Evaluate,
    /// Record an accepted assignment: update the developer profile and
    /// corpus-level model, deferring model refits to the next train run.
    Assign {
        /// Report id from the ingested corpus.
        #[arg(long = "report-id")]
        report_id: Option<String>,
        #[command(flatten)]
        report: ReportFlags,
        /// Developer receiving the report.
        #[arg(long)]
        developer: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let config = match cli.overrides.effective_config() {
        Ok(config) => config,
        Err(e) => {
            eprintln!("bugtriage: bad configuration: {e:#}");
            std::process::exit(2);
        }
    };

    let result = match cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Train => cmd_train(&config),
        Command::Recommend { report } => match report.into_input() {
            Ok(input) => cmd_recommend(&config, input),
            Err(e) => {
                eprintln!("bugtriage: bad report input: {e:#}");
                std::process::exit(2);
            }
        },
        Command::Evaluate => cmd_evaluate(&config),
        Command::Assign {
            report_id,
            report,
            developer,
        } => {
            let has_report_file = report.report_json.is_some() || report.title.is_some();
            match report.into_input() {
                Ok(input) => cmd_assign(
                    &config,
                    report_id,
                    has_report_file.then_some(input),
                    &developer,
                ),
                Err(e) => {
                    eprintln!("bugtriage: bad report input: {e:#}");
                    std::process::exit(2);
                }
            }
        }
    };

    if let Err(e) = result {
        eprintln!("bugtriage: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
