//! `greenshare` command-line front end.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use greenshare::engine::{
    run, sweep_v, write_slot_csv, write_summary_csv, RunOptions, SweepRow, SweepSpec,
};
use greenshare::oracle::{gap_report, write_gap_csv, GridSpec};
use greenshare::{load_config, PolicyKind, Scenario};

/// Spectrum sharing and hybrid-energy control simulator for small cell networks.
#[derive(Debug, Parser)]
#[command(name = "greenshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one policy for one seed and write per-slot and summary CSVs.
    Run(RunArgs),
    /// Run every (V, policy, seed) combination and write a summary table.
    Sweep(SweepArgs),
    /// Compare the allocator with exhaustive search on random slot states.
    OracleCheck(OracleArgs),
    /// Check a configuration file and print its warnings.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML scenario file, or `default` for the built-in scenario.
    #[arg(long, default_value = "default")]
    config: String,
    /// Output directory.
    #[arg(long, env = "GREENSHARE_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    slots: u64,
    /// Drop the first 10% of slots from summary averages.
    #[arg(long)]
    warmup: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Lyapunov tradeoff V; defaults to the scenario value.
    #[arg(long)]
    v: Option<f64>,
    #[arg(long, default_value = "proposed")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated values of V.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    v: Vec<f64>,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', default_value = "proposed,nsra,tdraa")]
    policy: Vec<PolicyKind>,
    /// First seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of seeds; runs seeds `seed..seed+k`.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// TOML scenario file; defaults to two single-user SBSs over three
    /// subchannels.
    #[arg(long)]
    config: Option<String>,
    #[arg(long, env = "GREENSHARE_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    states: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Equispaced power levels per link, endpoints included.
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(2..))]
    power_levels: u64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: String,
}

/// Failure categories, each with its own exit status.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 3,
            Failure::Runtime(_) => 4,
            Failure::Io(_) => 5,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) | Failure::Io(e) => e,
        }
    }
}

const ORACLE_SCENARIO: &str = "[network]\nn_sbs = 2\nn_subchannels = 3\nusers_per_sbs = [1, 1]\n";

fn scenario(config: &str) -> Result<Scenario, Failure> {
    if config == "default" {
        return Ok(Scenario::default());
    }
    load_config(config).map_err(|e| Failure::Config(anyhow!(e)))
}

fn io<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Io)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    io(fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())))?;
    let path = dir.join(name);
    let file =
        io(File::create(&path).with_context(|| format!("cannot create {}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut s = scenario(&args.common.config)?;
    if let Some(v) = args.v {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Failure::Config(anyhow!(
                "invalid `--v`: must be finite and non-negative"
            )));
        }
        s.economic.v_param = v;
    }
    let out = run(
        &s,
        RunOptions {
            policy: args.policy,
            seed: args.seed,
            slots: args.common.slots,
            warmup: args.common.warmup,
        },
    )
    .map_err(|e| Failure::Runtime(anyhow!(e)))?;
    let stem = format!("{}_v{}_seed{}", args.policy, s.economic.v_param, args.seed);
    let dir = &args.common.out;
    let slots = create(dir, &format!("slots_{stem}.csv"))?;
    io(write_slot_csv(slots, &out.trace).context("cannot write slot CSV"))?;
    let summary = create(dir, &format!("summary_{stem}.csv"))?;
    io(
        write_summary_csv(summary, &[SweepRow::from_summary(&out.summary)])
            .context("cannot write summary CSV"),
    )?;
    let sm = &out.summary;
    println!(
        "{} V={} seed={} slots={}: avg backlog {:.1} bits, total profit {:.3}, f_bar {:.4}, grid {:.3} Ws/slot, \
         balance overrides {}",
        sm.policy,
        sm.v,
        sm.seed,
        sm.slots,
        sm.avg_backlog_bits,
        sm.total_profit,
        sm.f_bar,
        sm.avg_grid.iter().sum::<f64>(),
        sm.balance_overrides
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let s = scenario(&args.common.config)?;
    if let Some(bad) = args.v.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Failure::Config(anyhow!(
            "invalid `--v`: {bad} is not a finite non-negative value"
        )));
    }
    let spec = SweepSpec {
        v_list: args.v,
        policies: args.policy,
        seeds: (args.seed..args.seed + args.seeds).collect(),
        slots: args.common.slots,
        warmup: args.common.warmup,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(usize::from(j));
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(anyhow!(e)))?;
    let rows = pool
        .install(|| sweep_v(&s, &spec))
        .map_err(|e| Failure::Runtime(anyhow!(e)))?;
    let file = create(&args.common.out, "sweep.csv")?;
    io(write_summary_csv(file, &rows).context("cannot write sweep CSV"))?;
    for r in rows.iter().filter(|r| r.seed.is_none()) {
        println!(
            "{} V={}: avg backlog {:.1} bits, total profit {:.3}, f_bar {:.4}",
            r.policy, r.v, r.avg_backlog_bits, r.total_profit, r.f_bar
        );
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    let s = match &args.config {
        Some(c) => scenario(c)?,
        None => {
            Scenario::from_toml_str(ORACLE_SCENARIO).map_err(|e| Failure::Config(anyhow!(e)))?
        }
    };
    let grid = GridSpec {
        power_levels: args.power_levels as usize,
        ..GridSpec::default()
    };
    let rows =
        gap_report(&s, args.states, args.seed, grid).map_err(|e| Failure::Runtime(anyhow!(e)))?;
    let file = create(&args.out, "oracle_gaps.csv")?;
    io(write_gap_csv(file, &rows).context("cannot write gap CSV"))?;
    let mut gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    println!(
        "{} states: worst gap {:.3e}, median gap {:.3e}",
        rows.len(),
        gaps[gaps.len() - 1],
        median
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let s = load_config(&args.config).map_err(|e| Failure::Config(anyhow!(e)))?;
    let warnings = s.validate().map_err(|e| Failure::Config(anyhow!(e)))?;
    for w in &warnings {
        println!("warning: {w}");
    }
    println!(
        "{}: ok ({} SBSs, {} subchannels, {} warnings)",
        args.config,
        s.n_sbs(),
        s.n_subchannels(),
        warnings.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::OracleCheck(a) => cmd_oracle(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
