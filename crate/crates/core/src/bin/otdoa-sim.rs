use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otdoa_core::campaign::{self, write_outputs, CampaignError, RunOptions};
use otdoa_core::lpp_session::Direction;
use otdoa_core::re_mapping::{map_subframe, ResourceGrid};
use otdoa_core::scenario::{CellConfig, Scenario, ScenarioError};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "otdoa-sim", version, about = "OTDOA positioning campaigns for LTE, LTE-M and NB-IoT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file.
    Validate { file: String },
    /// PRS subframe schedules.
    Schedule {
        #[command(subcommand)]
        action: ScheduleAction,
    },
    /// Resource grids.
    Grid {
        #[command(subcommand)]
        action: GridAction,
    },
    /// LPP sessions.
    Session {
        #[command(subcommand)]
        action: SessionAction,
    },
    /// Run a Monte-Carlo positioning campaign and write CSV results.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum ScheduleAction {
    /// One CSV row per PRS subframe of the system frame cycle.
    Dump {
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Subcommand)]
enum GridAction {
    /// One CSV row per populated resource element of one subframe.
    Dump {
        #[command(flatten)]
        target: Target,
        /// Absolute subframe; defaults to the first PRS subframe.
        #[arg(long)]
        subframe: Option<u16>,
    },
}

#[derive(Subcommand)]
enum SessionAction {
    /// Hex dump and decoded form of every message of one session.
    Transcript {
        #[arg(long, default_value = "fig5-desk")]
        scenario: String,
        #[arg(long, default_value = "lte")]
        tech: String,
        /// UE drop whose measurements are reported.
        #[arg(long, default_value_t = 0)]
        drop: usize,
    },
}

#[derive(Args)]
struct Target {
    /// Scenario file or builtin scenario name.
    #[arg(long, default_value = "fig5-desk")]
    scenario: String,
    #[arg(long)]
    tech: String,
    /// Cell id; without it the technology template is used, unmuted.
    #[arg(long)]
    cell: Option<u16>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file or builtin scenario name.
    #[arg(long, default_value = "fig5-desk")]
    scenario: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Technology name from the scenario, or `all`.
    #[arg(long, default_value = "all")]
    tech: String,
    /// Report RSTDs unquantized.
    #[arg(long)]
    no_quantize: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{kind}: {source}", kind = .source.kind())]
    Scenario { source: ScenarioError },
    #[error(transparent)]
    Campaign(CampaignError),
    #[error("{0}")]
    Validation(String),
}

impl From<ScenarioError> for CliError {
    fn from(source: ScenarioError) -> Self {
        CliError::Scenario { source }
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Scenario(source) => CliError::Scenario { source },
            other => CliError::Campaign(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario {
                source: ScenarioError::Io { .. },
            }
            | CliError::Campaign(_) => EXIT_RUNTIME,
            CliError::Scenario { .. } | CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Validate { file } => {
            let s = Scenario::resolve(&file)?;
            Ok(format!(
                "ok: {} technologies, {} cells\n",
                s.tech.len(),
                s.deployment().cells.len()
            ))
        }
        Command::Schedule {
            action: ScheduleAction::Dump { target },
        } => schedule_dump(&target),
        Command::Grid {
            action: GridAction::Dump { target, subframe },
        } => grid_dump(&target, subframe),
        Command::Session {
            action: SessionAction::Transcript { scenario, tech, drop },
        } => transcript(&scenario, &tech, drop),
        Command::Run(args) => run(&args),
    }
}

fn target_config(target: &Target) -> Result<CellConfig, CliError> {
    let mut scenario = Scenario::resolve(&target.scenario)?;
    if target.cell.is_none() {
        scenario.campaign.muting_bits = 0;
    }
    Ok(scenario.cell_config(&target.tech, target.cell.unwrap_or(0))?)
}

fn schedule_dump(target: &Target) -> Result<String, CliError> {
    let cc = target_config(target)?;
    let mut out = String::from("abs_sf,frame,subframe,band_index\n");
    for e in cc.schedule.entries() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.abs_sf,
            e.frame(),
            e.subframe_in_frame(),
            e.band
        );
    }
    Ok(out)
}

fn grid_dump(target: &Target, subframe: Option<u16>) -> Result<String, CliError> {
    let cc = target_config(target)?;
    let entry = match subframe {
        Some(sf) => *cc
            .schedule
            .get(sf)
            .ok_or_else(|| CliError::Validation(format!("subframe {sf} carries no PRS")))?,
        None => *cc
            .schedule
            .entries()
            .first()
            .ok_or_else(|| CliError::Validation("schedule is empty".into()))?,
    };
    let mut grid = ResourceGrid::for_config(&cc.config);
    map_subframe(&mut grid, &cc.config, entry.abs_sf, entry.band)
        .map_err(|e| CliError::Validation(format!("{e}")))?;
    let mut out = String::from("symbol,subcarrier,re,im\n");
    for (l, k, v) in grid.populated() {
        let _ = writeln!(out, "{l},{k},{},{}", v.re, v.im);
    }
    Ok(out)
}

fn transcript(scenario: &str, tech: &str, drop: usize) -> Result<String, CliError> {
    let s = Scenario::resolve(scenario)?;
    let (entries, server) = campaign::session_transcript(&s, tech, drop)?;
    let mut out = String::new();
    for (i, e) in entries.iter().enumerate() {
        let arrow = match e.direction {
            Direction::ServerToUe => "server -> ue",
            Direction::UeToServer => "ue -> server",
        };
        let _ = writeln!(out, "[{}] {arrow} {} ({} bytes)", i + 1, e.message.kind(), e.bytes.len());
        for chunk in e.bytes.chunks(32) {
            let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(out, "    {}", hex.join(" "));
        }
        let _ = writeln!(out, "    {:?}", e.message);
    }
    let _ = writeln!(out, "phase: {:?}", server.phase());
    Ok(out)
}

fn run(args: &RunArgs) -> Result<String, CliError> {
    let mut s = Scenario::resolve(&args.scenario)?;
    if let Some(n) = args.drops {
        s.campaign.n_drops = n;
    }
    if let Some(seed) = args.seed {
        s.campaign.seed = seed;
    }
    let techs = if args.tech == "all" {
        Vec::new()
    } else {
        if !s.tech.contains_key(&args.tech) {
            return Err(CliError::Validation(format!(
                "unknown technology {:?}; the scenario defines {}",
                args.tech,
                s.tech.keys().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
        vec![args.tech.clone()]
    };
    let opts = RunOptions {
        quantize_rstd: !args.no_quantize,
    };
    let report = campaign::run_with(&s, &techs, &opts)?;
    let files = write_outputs(&report, &args.out)?;
    let mut out = String::from("tech      p50_m    p67_m    p90_m  frac_le_50m\n");
    for t in &report.techs {
        let _ = writeln!(
            out,
            "{:6} {:8.2} {:8.2} {:8.2} {:12.3}",
            t.name,
            t.cdf.percentile(50.0),
            t.cdf.percentile(67.0),
            t.cdf.percentile(90.0),
            t.fraction_within_target
        );
    }
    let _ = writeln!(
        out,
        "{} drops in {:.1} s, {} files in {}",
        s.campaign.n_drops,
        report.wall_clock.as_secs_f64(),
        files.len(),
        args.out.display()
    );
    Ok(out)
}
