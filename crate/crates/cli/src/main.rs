//! `forge`: curate synthetic makeup pairs and check the injector reference.
//!
//! Exit codes: 0 success, 1 usage/config/runtime error, 2 unreadable
//! manifest, 3 injector property failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use forge_core::model::{
    manifest_base_dir, read_manifest, write_manifest, FilterConfig, PairRecord,
};
use forge_core::pipeline::{
    default_workers, filter_records, gen_synthetic_corpus, measure_records, rejected_path_for,
    report, ClassCounts, CorpusSpec, FilterRunSummary, MetricsOptions,
};
use forge_core::ref_injector::{run_injector_checks, CheckShape};
use forge_core::ForgeError;

#[derive(Debug, Parser)]
#[command(
    name = "forge",
    version,
    about = "Paired makeup dataset curation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the misalignment, makeup and background filters over a manifest.
    Filter(FilterArgs),
    /// Compute CLIP-I, SSIM and L2-M for every pair.
    Metrics(MetricsArgs),
    /// Print pass rate and rejection counts of a filtered manifest.
    Report(ReportArgs),
    /// Generate a labeled synthetic corpus.
    GenCorpus(GenCorpusArgs),
    /// Run the injector property suite on seeded random instances.
    InjectCheck(InjectCheckArgs),
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// TOML filter configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Failed records only; defaults to `<out stem>.rejected.jsonl`.
    #[arg(long)]
    rejected: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Read `<image>.emb` files and compute CLIP-I.
    #[arg(long)]
    with_embeddings: bool,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Emit the machine-readable summary instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Image size as WIDTHxHEIGHT (at least 64x64).
    #[arg(long, value_parser = parse_dims, default_value = "128x128")]
    dims: (u32, u32),
    /// Pairs per class, e.g. clean=25,misaligned=25,nomakeup=25,bgshift=25.
    #[arg(long)]
    counts: ClassCounts,
    /// Mask translation of misaligned pairs as a fraction of face width.
    #[arg(long, default_value_t = 0.15)]
    mask_shift: f64,
}

#[derive(Debug, Args)]
struct InjectCheckArgs {
    /// First seed; seeds `seed .. seed + count` are checked.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    count: u64,
    #[arg(long, default_value_t = CheckShape::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = CheckShape::default().rank)]
    rank: usize,
}

fn parse_dims(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

enum Failure {
    Usage(String),
    Manifest(String),
    Property,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Manifest(_) => 2,
            Failure::Property => 3,
        }
    }
}

impl From<ForgeError> for Failure {
    fn from(e: ForgeError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_manifest(path: &Path) -> Result<Vec<PairRecord>, Failure> {
    read_manifest(path).map_err(|e| Failure::Manifest(format!("cannot read manifest: {e}")))
}

fn filter(args: FilterArgs) -> Result<(), Failure> {
    let config = match &args.config {
        Some(path) => FilterConfig::load(path)?,
        None => FilterConfig::default(),
    };
    let records = load_manifest(&args.manifest)?;
    let started = Instant::now();
    let base_dir = manifest_base_dir(&args.manifest);
    let annotated = filter_records(records, &base_dir, &config, args.workers)?;
    write_manifest(&args.out, &annotated)?;
    let rejected = args
        .rejected
        .unwrap_or_else(|| rejected_path_for(&args.out));
    write_manifest(
        &rejected,
        annotated
            .iter()
            .filter(|r| r.error.is_none() && r.passed == Some(false)),
    )?;
    let s = FilterRunSummary::of(&annotated);
    eprintln!(
        "filtered {} pairs in {:.2}s: {} passed, {} failed, {} errors",
        s.total,
        started.elapsed().as_secs_f64(),
        s.passed,
        s.failed,
        s.errors
    );
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.manifest)?;
    let options = MetricsOptions {
        with_embeddings: args.with_embeddings,
        workers: args.workers,
    };
    let base_dir = manifest_base_dir(&args.manifest);
    let (records, summary) = measure_records(records, &base_dir, &options)?;
    write_manifest(&args.out, &records)?;
    if summary.missing_embeddings > 0 {
        eprintln!(
            "warning: {} pairs without embeddings; CLIP-I omitted for them",
            summary.missing_embeddings
        );
    }
    if summary.errors > 0 {
        eprintln!("warning: {} pairs could not be measured", summary.errors);
    }
    let label = args
        .manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    print!("{}", summary.render_table(&label));
    Ok(())
}

fn report_cmd(args: ReportArgs) -> Result<(), Failure> {
    let records = load_manifest(&args.manifest)?;
    let r = report(&records)?;
    if args.json {
        println!("{}", r.to_json());
    } else {
        print!("{}", r.render_text());
    }
    Ok(())
}

fn gen_corpus(args: GenCorpusArgs) -> Result<(), Failure> {
    let (width, height) = args.dims;
    let spec = CorpusSpec {
        mask_shift: args.mask_shift,
        ..CorpusSpec::new(args.seed, args.counts, width, height)
    };
    let corpus = gen_synthetic_corpus(&spec, &args.out)?;
    eprintln!(
        "wrote {} pairs to {}",
        corpus.records.len(),
        corpus.manifest_path.display()
    );
    Ok(())
}

fn inject_check(args: InjectCheckArgs) -> Result<(), Failure> {
    let shape = CheckShape {
        dim: args.dim,
        rank: args.rank,
        ..CheckShape::default()
    };
    let started = Instant::now();
    let mut all_passed = true;
    println!(
        "{:<8} {:<34} {:>12} {:>10}  result",
        "seed", "property", "measured", "tolerance"
    );
    for seed in args.seed..args.seed.saturating_add(args.count) {
        let report = run_injector_checks(seed, shape)?;
        for o in &report.outcomes {
            println!(
                "{:<8} {:<34} {:>12.3e} {:>10.1e}  {}",
                seed,
                o.name,
                o.measured,
                o.tolerance,
                if o.passed { "PASS" } else { "FAIL" }
            );
        }
        all_passed &= report.passed();
    }
    println!(
        "{} seeds in {:.2}s: {}",
        args.count,
        started.elapsed().as_secs_f64(),
        if all_passed {
            "all properties hold"
        } else {
            "FAILURES"
        }
    );
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Property)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Filter(a) => filter(a),
        Command::Metrics(a) => metrics(a),
        Command::Report(a) => report_cmd(a),
        Command::GenCorpus(a) => gen_corpus(a),
        Command::InjectCheck(a) => inject_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(m) | Failure::Manifest(m) => eprintln!("error: {m}"),
                Failure::Property => eprintln!("error: injector property suite failed"),
            }
            ExitCode::from(failure.code())
        }
    }
}
