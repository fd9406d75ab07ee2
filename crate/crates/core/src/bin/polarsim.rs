//! Command-line front end: build codes, profile first errors, run campaigns.
//!
//! Every flag can also be set through an environment variable named
//! `POLARSIM_<FLAG>` (upper case, dashes as underscores).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use polarflip::channel::Channel;
use polarflip::code::{build_code, CodeFile, CodeSpec, PartitionPlan};
use polarflip::crc::{parse_hex, CrcConfig};
use polarflip::planner::{plan_code, profile_errors, ErrorProfile, PlanOptions, ProfileCache, ProfileOptions};
use polarflip::sim::{
    emit_results, run_campaign, snr_sweep, to_csv, to_json, DecoderKind, OutputFormat, SimConfig, StopRule,
};

#[derive(Parser, Debug)]
#[command(name = "polarsim", version, about = "Polar code SC / SC-Flip / PSCF simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte-Carlo FER/BER/complexity campaign over an Eb/N0 sweep.
    Simulate(SimulateArgs),
    /// Collect a first-error profile with the genie decoder.
    Profile(ProfileArgs),
    /// Write a code file, optionally partitioned from a profile.
    BuildCode(BuildArgs),
}

#[derive(Args, Debug)]
struct CodeArgs {
    /// Load the layout from a code file instead of constructing it.
    #[arg(long, env = "POLARSIM_CODE_FILE", conflicts_with_all = ["n", "k", "crc"])]
    code_file: Option<PathBuf>,
    /// log2 of the block length.
    #[arg(long, env = "POLARSIM_N", default_value_t = 10)]
    n: u32,
    #[arg(long, env = "POLARSIM_K", default_value_t = 512)]
    k: usize,
    /// Total CRC bits, split evenly across partitions.
    #[arg(long, env = "POLARSIM_CRC", default_value_t = 16)]
    crc: usize,
    /// Generator polynomial per partition (hex, leading term omitted).
    #[arg(long, env = "POLARSIM_CRC_POLY")]
    crc_poly: Option<String>,
    #[arg(long, env = "POLARSIM_CRC_INIT", default_value = "0x0")]
    crc_init: String,
    /// Eb/N0 (dB) used for the Gaussian-approximation construction.
    #[arg(long, env = "POLARSIM_DESIGN_SNR", default_value_t = 2.5)]
    design_snr: f64,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Number of partitions.
    #[arg(long, env = "POLARSIM_PARTITIONS", default_value_t = 1)]
    partitions: usize,
    /// Take partition ends from this code file.
    #[arg(long, env = "POLARSIM_PLAN_FILE", conflicts_with = "auto_plan")]
    plan_file: Option<PathBuf>,
    /// Derive partition ends from a freshly collected (or cached) profile.
    #[arg(long, env = "POLARSIM_AUTO_PLAN")]
    auto_plan: bool,
    /// Use this profile file for planning.
    #[arg(long, env = "POLARSIM_PROFILE_FILE", conflicts_with_all = ["plan_file", "auto_plan"])]
    profile_file: Option<PathBuf>,
    /// Eb/N0 (dB) of the planning profile; defaults to the design SNR.
    #[arg(long, env = "POLARSIM_PROFILE_SNR")]
    profile_snr: Option<f64>,
    #[arg(long, env = "POLARSIM_PROFILE_FAILURES", default_value_t = 2000)]
    profile_failures: u64,
    #[arg(long, env = "POLARSIM_PROFILE_MAX_FRAMES", default_value_t = 100_000_000)]
    profile_max_frames: u64,
    /// Directory for cached profiles.
    #[arg(long, env = "POLARSIM_PROFILE_CACHE")]
    profile_cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, env = "POLARSIM_SEED", default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "POLARSIM_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long, env = "POLARSIM_CHUNK", default_value_t = polarflip::sim::DEFAULT_CHUNK)]
    chunk: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, env = "POLARSIM_DECODER", default_value = "sc")]
    decoder: DecoderKind,
    #[arg(long, env = "POLARSIM_TMAX", default_value_t = 10)]
    tmax: usize,
    /// Restrict flip candidates to information bits.
    #[arg(long, env = "POLARSIM_NO_FLIP_CRC")]
    no_flip_crc: bool,
    #[arg(
        long,
        env = "POLARSIM_SNR_START",
        default_value_t = 1.0,
        allow_negative_numbers = true
    )]
    snr_start: f64,
    #[arg(
        long,
        env = "POLARSIM_SNR_STOP",
        default_value_t = 2.5,
        allow_negative_numbers = true
    )]
    snr_stop: f64,
    #[arg(long, env = "POLARSIM_SNR_STEP", default_value_t = 0.5)]
    snr_step: f64,
    #[arg(long, env = "POLARSIM_MIN_ERRORS", default_value_t = 400)]
    min_errors: u64,
    #[arg(long, env = "POLARSIM_MAX_FRAMES", default_value_t = 10_000_000)]
    max_frames: u64,
    /// Replace the AWGN channel by an error-free one.
    #[arg(long, env = "POLARSIM_NOISELESS")]
    noiseless: bool,
    /// Output file; standard output when absent.
    #[arg(long, env = "POLARSIM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "POLARSIM_FORMAT", default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, env = "POLARSIM_SNR", default_value_t = 2.5, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, env = "POLARSIM_MIN_FAILURES", default_value_t = 2000)]
    min_failures: u64,
    #[arg(long, env = "POLARSIM_MAX_FRAMES", default_value_t = 100_000_000)]
    max_frames: u64,
    #[arg(long, env = "POLARSIM_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, env = "POLARSIM_OUT")]
    out: Option<PathBuf>,
}

fn crc_config(args: &CodeArgs, width: usize) -> anyhow::Result<Option<CrcConfig>> {
    if width == 0 {
        return Ok(None);
    }
    let init = parse_hex(&args.crc_init)?;
    let cfg = match &args.crc_poly {
        Some(p) => CrcConfig::new(width as u8, parse_hex(p)?, init)?,
        None => CrcConfig::default_for_width(width)?.with_init(init)?,
    };
    Ok(Some(cfg))
}

fn attach_crc(code: CodeSpec, args: &CodeArgs) -> anyhow::Result<CodeSpec> {
    let width = code.c() / code.partitions();
    Ok(match crc_config(args, width)? {
        Some(cfg) => code.with_crc(cfg)?,
        None => code,
    })
}

/// Builds the monolithic base code from the code arguments.
fn base_code(args: &CodeArgs) -> anyhow::Result<CodeSpec> {
    let code = match &args.code_file {
        Some(path) => CodeSpec::load(path)?,
        None => CodeSpec::construct(args.n, args.k, args.crc, args.design_snr, None)?,
    };
    attach_crc(code, args)
}

fn resolve_code(code_args: &CodeArgs, plan: &PlanArgs, run: &RunArgs) -> anyhow::Result<CodeSpec> {
    let base = base_code(code_args)?;
    if let Some(path) = &plan.plan_file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: CodeFile =
            serde_json::from_str(&text).with_context(|| format!("parsing plan file {}", path.display()))?;
        if file.rho.len() != plan.partitions && plan.partitions != 1 {
            bail!(
                "plan file has {} partitions, --partitions asks for {}",
                file.rho.len(),
                plan.partitions
            );
        }
        let reliability = base
            .reliability()
            .context("a plan file needs a constructed code, not --code-file")?;
        let rho = PartitionPlan::new(file.rho, base.len())?;
        let code = build_code(
            base.log2_len(),
            base.k(),
            base.c(),
            reliability,
            Some(rho),
            base.design_snr_db(),
        )?;
        return attach_crc(code, code_args);
    }
    if plan.partitions <= 1 {
        return Ok(base);
    }
    if base.partitions() > 1 {
        bail!("code file is already partitioned; drop --partitions");
    }
    let profile = match &plan.profile_file {
        Some(path) => ErrorProfile::load(path)?,
        None if plan.auto_plan => {
            let snr = plan.profile_snr.unwrap_or(base.design_snr_db());
            let opts = ProfileOptions {
                workers: run.workers,
                chunk_size: run.chunk,
                ..ProfileOptions::new(
                    StopRule {
                        min_errors: plan.profile_failures,
                        max_frames: plan.profile_max_frames,
                    },
                    run.seed,
                )
            };
            match &plan.profile_cache {
                Some(dir) => ProfileCache::new(dir).get_or_profile(&base, snr, opts)?,
                None => profile_errors(&base, Channel::awgn(snr, base.rate())?, opts)?,
            }
        }
        None => bail!(
            "{} partitions need a plan: pass --plan-file, --profile-file or --auto-plan",
            plan.partitions
        ),
    };
    if profile.code_hash != base.code_hash() {
        eprintln!(
            "warning: profile was collected on code {}, planning code {}",
            profile.code_hash,
            base.code_hash()
        );
    }
    let (code, selection) = plan_code(&base, plan.partitions, &profile, PlanOptions::default())?;
    for w in &selection.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("partition ends: {:?}", selection.rho);
    attach_crc(code, code_args)
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let code = resolve_code(&args.code, &args.plan, &args.run)?;
    let snr_points = snr_sweep(args.snr_start, args.snr_stop, args.snr_step)?;
    let config = SimConfig {
        t_max: args.tmax,
        flip_crc_bits: !args.no_flip_crc,
        stop: StopRule {
            min_errors: args.min_errors,
            max_frames: args.max_frames,
        },
        seed: args.run.seed,
        workers: args.run.workers,
        chunk_size: args.run.chunk,
        noiseless: args.noiseless,
        ..SimConfig::new(args.decoder, snr_points)
    };
    let records = run_campaign(&code, &config)?;
    match &args.out {
        Some(path) => emit_results(&records, args.format, path)?,
        None => print!(
            "{}",
            match args.format {
                OutputFormat::Csv => to_csv(&records)?,
                OutputFormat::Json => to_json(&records)? + "\n",
            }
        ),
    }
    Ok(())
}

fn profile(args: ProfileArgs) -> anyhow::Result<()> {
    let code = base_code(&args.code)?;
    let opts = ProfileOptions {
        workers: args.run.workers,
        chunk_size: args.run.chunk,
        ..ProfileOptions::new(
            StopRule {
                min_errors: args.min_failures,
                max_frames: args.max_frames,
            },
            args.run.seed,
        )
    };
    let profile = profile_errors(&code, Channel::awgn(args.snr, code.rate())?, opts)?;
    eprintln!(
        "{} frames, {} failures, single-error share {:.4}",
        profile.frames,
        profile.failures,
        profile.e1_share()
    );
    match &args.out {
        Some(path) => profile.save(path)?,
        None => println!("{}", serde_json::to_string(&profile)?),
    }
    Ok(())
}

fn build(args: BuildArgs) -> anyhow::Result<()> {
    let code = resolve_code(&args.code, &args.plan, &args.run)?;
    match &args.out {
        Some(path) => code.save(path)?,
        None => println!("{}", serde_json::to_string(&code.to_file())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Profile(a) => profile(a),
        Command::BuildCode(a) => build(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
