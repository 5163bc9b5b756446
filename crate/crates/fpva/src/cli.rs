//! Command-line front end: suite generation, verification, fault-injection
//! campaigns, drawings, and LP export/import.
//!
//! Exit status contract: `0` when every requested check passed, `1` for
//! operational failures (generation errors, failed verification, escaped
//! faults, infeasible imports), `2` for usage errors. Everything written to
//! stdout and to output files is a deterministic function of the arguments;
//! wall-clock timings go to stderr only.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::chip::{load_chip, ChipSpec};
use crate::cuts::{generate_cut_sets, CutLimits};
use crate::faultsim::{campaign_report, random_campaign};
use crate::flow::{
    build_path_model, extract_paths, generate_flow_paths, FlowGeneration, GenerateLimits,
    PathModelOptions, PathProblem,
};
use crate::hierarchy::generate_hierarchical;
use crate::ilp::{emit_lp, import_solution};
use crate::render::{render_ascii, render_svg};
use crate::vectors::{assemble, parse_suite, verify, write_suite, SuiteMode, VectorSuite};

#[derive(Parser)]
#[command(
    name = "fpva",
    version,
    about = "Test-vector generation and fault simulation for programmable valve arrays"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a covering test-vector suite for a chip
    Generate(GenerateArgs),
    /// Replay a suite against seeded random fault injections
    Simulate(SimulateArgs),
    /// Check a suite document against its chip
    Verify(VerifyArgs),
    /// Draw a chip and the vectors of a suite
    Render(RenderArgs),
    /// Write the flow-path integer program as an LP file
    EmitLp(EmitLpArgs),
    /// Assemble a suite from an externally solved LP assignment
    ImportSolution(ImportSolutionArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Flow,
    Cut,
    Both,
}

impl From<Mode> for SuiteMode {
    fn from(mode: Mode) -> SuiteMode {
        match mode {
            Mode::Flow => SuiteMode::Flow,
            Mode::Cut => SuiteMode::Cut,
            Mode::Both => SuiteMode::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RenderFormat {
    Ascii,
    Svg,
}

#[derive(Args)]
struct GenerateArgs {
    /// Chip description file
    #[arg(long)]
    chip: PathBuf,
    /// Which vector families to generate
    #[arg(long, value_enum)]
    mode: Mode,
    /// Plan paths per block instead of solving the whole chip at once
    #[arg(long)]
    hierarchical: bool,
    /// Cells per block side for hierarchical generation
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    block_size: u64,
    /// Wall-clock budget per solve, in seconds
    #[arg(long)]
    budget: Option<u64>,
    /// Output suite file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Chip description file
    #[arg(long)]
    chip: PathBuf,
    /// Suite document to replay
    #[arg(long)]
    vectors: PathBuf,
    /// Stuck valves injected per trial
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    faults: u64,
    /// Number of random trials
    #[arg(long)]
    trials: u64,
    /// Campaign seed
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Chip description file
    #[arg(long)]
    chip: PathBuf,
    /// Suite document to check
    #[arg(long)]
    vectors: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Chip description file
    #[arg(long)]
    chip: PathBuf,
    /// Suite document to draw
    #[arg(long)]
    vectors: PathBuf,
    /// Drawing format
    #[arg(long, value_enum)]
    format: RenderFormat,
    /// Output drawing file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmitLpArgs {
    /// Chip description file
    #[arg(long)]
    chip: PathBuf,
    /// Number of path slots in the model
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    paths: u64,
    /// Output LP file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportSolutionArgs {
    /// Chip description file
    #[arg(long)]
    chip: PathBuf,
    /// Number of path slots in the model (must match the emitted LP)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    paths: u64,
    /// `name value` assignment produced by an external solver
    #[arg(long)]
    solution: PathBuf,
    /// Output suite file
    #[arg(long)]
    out: PathBuf,
}

/// Parses arguments and runs the selected command, returning the process
/// exit code.
pub fn run() -> u8 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Render(args) => cmd_render(args),
        Command::EmitLp(args) => cmd_emit_lp(args),
        Command::ImportSolution(args) => cmd_import_solution(args),
    }
}

fn read_chip(path: &Path) -> Result<ChipSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading chip file {}", path.display()))?;
    load_chip(&text).with_context(|| format!("parsing chip file {}", path.display()))
}

fn read_suite(chip: &ChipSpec, path: &Path) -> Result<VectorSuite> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading suite file {}", path.display()))?;
    Ok(parse_suite(chip, &text)
        .with_context(|| format!("parsing suite file {}", path.display()))?)
}

/// Writes the suite, prints the generation report, and runs the full
/// verification pass; the exit code reflects it.
fn report_and_write_suite(
    chip: &ChipSpec,
    suite: &VectorSuite,
    chip_path: &Path,
    out: &Path,
) -> Result<u8> {
    let report = verify(chip, suite)?;
    fs::write(out, write_suite(suite))
        .with_context(|| format!("writing suite file {}", out.display()))?;
    println!("chip = {}", chip_path.display());
    println!("chip_sha256 = {}", suite.chip_sha256);
    println!("mode = {}", suite.mode.as_str());
    if let Some(stats) = suite.flow_stats {
        println!("flow_paths = {}", stats.count);
        println!("flow_status = {}", stats.status.as_str());
        println!("flow_nodes = {}", stats.nodes);
    }
    if let Some(stats) = suite.cut_stats {
        println!("cut_sets = {}", stats.count);
        println!("cut_status = {}", stats.status.as_str());
        println!("cut_nodes = {}", stats.nodes);
    }
    println!("vectors = {}", suite.vectors.len());
    println!(
        "verification = {}",
        if report.all_passed() { "pass" } else { "FAIL" }
    );
    println!("suite = {}", out.display());
    if !report.all_passed() {
        print!("{report}");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_generate(args: GenerateArgs) -> Result<u8> {
    let chip = read_chip(&args.chip)?;
    let mode = SuiteMode::from(args.mode);
    if args.hierarchical && !mode.includes_flow() {
        bail!("--hierarchical plans flow paths; use --mode flow or --mode both");
    }
    let mut flow_limits = GenerateLimits::default();
    let mut cut_limits = CutLimits::default();
    if let Some(seconds) = args.budget {
        flow_limits.time_limit = Some(Duration::from_secs(seconds));
        cut_limits.time_limit = Some(Duration::from_secs(seconds));
    }

    let mut flow: Option<FlowGeneration> = None;
    if mode.includes_flow() {
        let started = Instant::now();
        let generation = if args.hierarchical {
            generate_hierarchical(
                &chip,
                args.block_size as usize,
                PathModelOptions::default(),
                &flow_limits,
            )?
        } else {
            generate_flow_paths(&chip, PathModelOptions::default(), &flow_limits)?
        };
        eprintln!(
            "flow generation took {:.3}s",
            started.elapsed().as_secs_f64()
        );
        flow = Some(generation);
    }
    let mut cuts = None;
    if mode.includes_cut() {
        let started = Instant::now();
        cuts = Some(generate_cut_sets(&chip, &cut_limits)?);
        eprintln!(
            "cut generation took {:.3}s",
            started.elapsed().as_secs_f64()
        );
    }

    let suite = assemble(&chip, flow.as_ref(), cuts.as_ref())?;
    report_and_write_suite(&chip, &suite, &args.chip, &args.out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let chip = read_chip(&args.chip)?;
    let suite = read_suite(&chip, &args.vectors)?;
    let report = verify(&chip, &suite)?;
    if !report.all_passed() {
        print!("{report}");
        eprintln!("suite failed verification; not simulating");
        return Ok(1);
    }
    let started = Instant::now();
    let outcome = random_campaign(
        &chip,
        &suite.vectors,
        args.faults as usize,
        args.trials,
        args.seed,
    )?;
    eprintln!("campaign took {:.3}s", started.elapsed().as_secs_f64());
    let description = format!("{} random stuck valves per trial", args.faults);
    print!("{}", campaign_report(&outcome, &description, Some(args.seed)));
    let rate = if outcome.trials == 0 {
        1.0
    } else {
        outcome.detected as f64 / outcome.trials as f64
    };
    println!("detection_rate = {rate:.6}");
    Ok(if outcome.missed.is_empty() { 0 } else { 1 })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let chip = read_chip(&args.chip)?;
    let suite = read_suite(&chip, &args.vectors)?;
    let report = verify(&chip, &suite)?;
    print!("{report}");
    Ok(if report.all_passed() { 0 } else { 1 })
}

fn cmd_render(args: RenderArgs) -> Result<u8> {
    let chip = read_chip(&args.chip)?;
    let suite = read_suite(&chip, &args.vectors)?;
    let drawing = match args.format {
        RenderFormat::Ascii => render_ascii(&chip, &suite.vectors),
        RenderFormat::Svg => render_svg(&chip, &suite.vectors),
    };
    fs::write(&args.out, drawing)
        .with_context(|| format!("writing drawing file {}", args.out.display()))?;
    Ok(0)
}

/// Prints the model layout shared by `emit-lp` and `import-solution`.
fn print_model_layout(encoding: &crate::flow::PathEncoding) {
    println!("variables_p = {}", encoding.p.len());
    println!(
        "variables_c = {}",
        encoding.c.iter().map(|m| m.len()).sum::<usize>()
    );
    println!(
        "variables_v = {}",
        encoding.v.iter().map(|m| m.len()).sum::<usize>()
    );
    println!(
        "variables_f = {}",
        encoding.f.iter().map(|m| m.len()).sum::<usize>()
    );
    println!(
        "variables_total = {}",
        encoding.model.variables().len()
    );
    println!("rows = {}", encoding.model.constraints().len());
}

fn cmd_emit_lp(args: EmitLpArgs) -> Result<u8> {
    let chip = read_chip(&args.chip)?;
    let slots = args.paths as usize;
    let encoding = build_path_model(&chip, slots, PathModelOptions::default())?;
    fs::write(&args.out, emit_lp(&encoding.model))
        .with_context(|| format!("writing LP file {}", args.out.display()))?;
    println!("model = flow-paths");
    println!("chip = {}", args.chip.display());
    println!("slots = {slots}");
    print_model_layout(&encoding);
    println!("lp = {}", args.out.display());
    Ok(0)
}

fn cmd_import_solution(args: ImportSolutionArgs) -> Result<u8> {
    let chip = read_chip(&args.chip)?;
    let slots = args.paths as usize;
    let encoding = build_path_model(&chip, slots, PathModelOptions::default())?;
    let text = fs::read_to_string(&args.solution)
        .with_context(|| format!("reading solution file {}", args.solution.display()))?;
    let outcome = import_solution(&encoding.model, &text)
        .context("imported assignment rejected")?;
    let values = outcome
        .values
        .as_ref()
        .expect("a feasible import carries values");
    let problem = PathProblem::whole_chip(&chip, slots);
    let paths = extract_paths(&problem, &encoding, values)?;
    let generation = FlowGeneration {
        paths,
        status: outcome.status,
        nodes: outcome.nodes,
        budget: slots,
    };
    let suite = assemble(&chip, Some(&generation), None)?;
    println!("model = flow-paths");
    println!("slots = {slots}");
    print_model_layout(&encoding);
    report_and_write_suite(&chip, &suite, &args.chip, &args.out)
}
