use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vnet::campaign::{
    compare_reports, probe_only, run_campaign, CampaignConfig, CampaignReport, Mode, DEFAULT_MAX_INPUT_LEN,
    DEFAULT_PROBE_WINDOW, DEFAULT_STARTUP_DELAY,
};
use vnet::mock::ProfileKind;
use vnet::prober::ProbeOptions;

#[derive(Parser)]
#[command(name = "vnet", version, about = "Protocol-aware virtual network fuzzing campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign and write its report.
    Run {
        #[arg(long)]
        profile: ProfileKind,
        #[arg(long, default_value = "pemu")]
        mode: Mode,
        #[arg(long, default_value_t = 50_000)]
        executions: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PROBE_WINDOW)]
        probe_window: u64,
        #[arg(long, default_value_t = 1)]
        probe_threshold: usize,
        #[arg(long, default_value_t = 0)]
        fault_budget: u8,
        #[arg(long, default_value_t = DEFAULT_STARTUP_DELAY)]
        startup_delay: u64,
        /// Do not add handshake plans for detected protocols.
        #[arg(long)]
        no_handshakes: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_INPUT_LEN)]
        max_input_len: usize,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize reports of one profile per mode.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run probing rounds only and print the detected tree.
    ProbeOnly {
        #[arg(long)]
        profile: ProfileKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        probe_threshold: usize,
        /// Print the full round reports as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            profile,
            mode,
            executions,
            seed,
            probe_window,
            probe_threshold,
            fault_budget,
            startup_delay,
            no_handshakes,
            max_input_len,
            out,
        } => {
            let config = CampaignConfig {
                probe_window,
                probe_threshold,
                fault_budget,
                startup_delay,
                handshakes: !no_handshakes,
                max_input_len,
                ..CampaignConfig::new(profile, mode, executions, seed)
            };
            let report = run_campaign(&config)?;
            let text = report.to_json();
            match out {
                Some(path) => {
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                    eprintln!(
                        "{profile} {mode}: {} blocks, {} application-layer",
                        report.final_blocks,
                        report.app_blocks.len()
                    );
                }
                None => print!("{text}"),
            }
        }
        Command::Compare { reports, json } => {
            let reports = reports
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    CampaignReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = compare_reports(&reports)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", summary.render());
            }
        }
        Command::ProbeOnly {
            profile,
            seed,
            probe_threshold,
            json,
        } => {
            let options = ProbeOptions {
                threshold: probe_threshold,
                ..ProbeOptions::default()
            };
            let report = probe_only(profile, seed, &options)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
    }
    Ok(())
}
