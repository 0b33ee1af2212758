//! Batch CLI for Bayesian pairwise protein structure/sequence alignment.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use bayalign::domain::{Configuration, GapParams, SeqMode};
use bayalign::gapmodel;
use bayalign::io::{self, RunConfigFile};
use bayalign::model::ModelTables;
use bayalign::oracle;
use bayalign::pam::{self, SubstitutionChain};
use bayalign::sampler::{self, InitState};
use bayalign::summary;

#[derive(Parser)]
#[command(name = "bayalign", version, about = "Bayesian protein structure and sequence alignment", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run the MCMC alignment and write samples.csv, matchprobs.csv,
    /// matchprobs_dense.csv and summary.json.
    Align(AlignArgs),
    /// Compare the dynamic-programming log-normalizer against exhaustive
    /// enumeration for small (m, n).
    Zcheck(ZcheckArgs),
    /// Build a PAM-l likelihood-ratio table and dump it as text.
    Pam(PamArgs),
    /// Recompute summary statistics from a samples.csv file.
    Summarize(SummarizeArgs),
    /// Decision-theoretic point estimate from a dense match-probability
    /// table.
    PointEstimate(PointEstimateArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// PDB file of the x configuration.
    #[arg(long, required_unless_present = "oracle_fixture")]
    x: Option<PathBuf>,
    /// PDB file of the y configuration.
    #[arg(long, required_unless_present = "oracle_fixture")]
    y: Option<PathBuf>,
    /// Chain identifier within --x.
    #[arg(long, required_unless_present = "oracle_fixture")]
    chain_x: Option<char>,
    /// Chain identifier within --y.
    #[arg(long, required_unless_present = "oracle_fixture")]
    chain_y: Option<char>,
    /// Run a bundled synthetic fixture instead of PDB input:
    /// "small4" (4x4) or "recovery" (40x50).
    #[arg(long, conflicts_with_all = ["x", "y"])]
    oracle_fixture: Option<String>,
    /// Key-value run configuration file; defaults used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "bayalign-out")]
    out_dir: PathBuf,
    /// Starting matching as a text file of 1-based "j k" pairs.
    #[arg(long)]
    init_matching: Option<PathBuf>,
    /// Enable parallel tempering with the default geometric ladder.
    #[arg(long)]
    tempering: bool,
    /// Gap-parameter treatment: fixed | sampled | integrated.
    #[arg(long)]
    gap_mode: Option<String>,
    /// Sequence treatment: off | fixed-pam | sampled-pam
    /// (fixed-pam takes its distance from --pam-l / the config).
    #[arg(long)]
    seq_mode: Option<String>,
    /// PAM distance for --seq-mode fixed-pam.
    #[arg(long)]
    pam_l: Option<u32>,
    /// Hidden-point volume v (overrides the config file).
    #[arg(long)]
    v: Option<f64>,
    /// PAM-1 file (20x20 transition rows + 20 abundances).
    #[arg(long)]
    pam_file: Option<PathBuf>,
    /// Use the bundled synthetic reversible chain instead of --pam-file.
    #[arg(long)]
    synthetic_pam: bool,
    /// FASTA override for the x sequence.
    #[arg(long)]
    fasta_x: Option<PathBuf>,
    /// FASTA override for the y sequence.
    #[arg(long)]
    fasta_y: Option<PathBuf>,
    /// Override sweep count (handy for quick runs).
    #[arg(long)]
    sweeps: Option<u64>,
    /// Override burn-in.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Override thinning interval.
    #[arg(long)]
    thin: Option<u64>,
}

#[derive(Args)]
struct ZcheckArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    g: f64,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
}

#[derive(Args)]
struct PamArgs {
    /// Evolutionary distance l.
    #[arg(long)]
    l: u32,
    /// PAM-1 file; the bundled synthetic chain is used when absent.
    #[arg(long)]
    pam_file: Option<PathBuf>,
    /// Output path for the ψ table (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// samples.csv produced by `align`.
    #[arg(long)]
    samples: PathBuf,
    /// Where to write summary.json (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PointEstimateArgs {
    /// Dense match-probability matrix (matchprobs_dense.csv).
    #[arg(long)]
    matchprobs: PathBuf,
    /// Cost ratio K in (0, 1); larger K gives fewer matches.
    #[arg(long)]
    k: f64,
    /// Output pair-list path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Align(args) => run_align(args),
        Command::Zcheck(args) => run_zcheck(args),
        Command::Pam(args) => run_pam(args),
        Command::Summarize(args) => run_summarize(args),
        Command::PointEstimate(args) => run_point_estimate(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn load_chain(pam_file: &Option<PathBuf>, synthetic: bool) -> anyhow::Result<SubstitutionChain> {
    match pam_file {
        Some(path) => io::load_pam1(path).with_context(|| format!("loading {}", path.display())),
        None if synthetic => Ok(SubstitutionChain::synthetic_test_chain()),
        None => bail!("sequence mode needs --pam-file or --synthetic-pam"),
    }
}

fn apply_fasta(cfg: Configuration, fasta: &Option<PathBuf>) -> anyhow::Result<Configuration> {
    let Some(path) = fasta else { return Ok(cfg) };
    let records = io::parse_fasta(path)?;
    let Some((_, seq)) = records.into_iter().next() else {
        bail!("{} contains no FASTA records", path.display());
    };
    if seq.len() != cfg.len() {
        bail!(
            "FASTA override length {} does not match the {} points of {}",
            seq.len(),
            cfg.len(),
            cfg.id()
        );
    }
    Ok(Configuration::new(
        cfg.points().to_vec(),
        Some(seq),
        cfg.id(),
    )?)
}

fn run_align(args: AlignArgs) -> anyhow::Result<()> {
    let mut file_cfg = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    if let Some(seed) = args.seed {
        file_cfg.seed = seed;
    }
    if let Some(v) = args.v {
        file_cfg.v = v;
    }
    if let Some(mode) = &args.gap_mode {
        file_cfg.gap_mode = mode.clone();
    }
    if let Some(mode) = &args.seq_mode {
        file_cfg.seq_mode = mode.replace('-', "_");
    }
    if let Some(l) = args.pam_l {
        file_cfg.pam_l = l;
    }
    if args.tempering {
        file_cfg.tempering = true;
    }
    if let Some(sweeps) = args.sweeps {
        file_cfg.sweeps = sweeps;
    }
    if let Some(burn_in) = args.burn_in {
        file_cfg.burn_in = burn_in;
    }
    if let Some(thin) = args.thin {
        file_cfg.thin = thin;
    }

    let (x, y) = match &args.oracle_fixture {
        Some(name) => {
            let inst = match name.as_str() {
                "small4" => oracle::fixture_small4(),
                "recovery" => oracle::fixture_recovery(),
                other => bail!("unknown fixture {other:?} (expected small4 or recovery)"),
            };
            (inst.x, inst.y)
        }
        None => {
            let x_path = args.x.as_ref().expect("clap enforces presence");
            let y_path = args.y.as_ref().expect("clap enforces presence");
            let chain_x = args.chain_x.expect("clap enforces presence");
            let chain_y = args.chain_y.expect("clap enforces presence");
            let px = io::parse_pdb(x_path, chain_x, 0)
                .with_context(|| format!("parsing {}", x_path.display()))?;
            let py = io::parse_pdb(y_path, chain_y, 0)
                .with_context(|| format!("parsing {}", y_path.display()))?;
            for skipped in px.skipped.iter().chain(py.skipped.iter()) {
                eprintln!(
                    "note: skipped non-standard residue {} at {} (line {})",
                    skipped.res_name, skipped.res_seq, skipped.line
                );
            }
            (px.configuration, py.configuration)
        }
    };
    let x = apply_fasta(x, &args.fasta_x)?;
    let y = apply_fasta(y, &args.fasta_y)?;

    let mu_tau_auto = x.centroid() - y.centroid();
    let cfg = file_cfg.to_model_config(mu_tau_auto)?;

    let chain = match cfg.seq_mode {
        SeqMode::Off => None,
        _ => Some(load_chain(&args.pam_file, args.synthetic_pam)?),
    };
    let tables = ModelTables::build(&cfg, x.len(), y.len(), chain)?;

    let init = match &args.init_matching {
        Some(path) => {
            let mt = io::parse_initial_matching(path, x.len(), y.len())?;
            // An external alignment implies a superposition; start there.
            InitState::fitted(&x, &y, mt)?
        }
        None => InitState::empty(x.len(), y.len()),
    };

    let out = if cfg.temperatures.is_some() {
        sampler::run_tempered(&x, &y, &cfg, &tables, &init)?
    } else {
        sampler::run_chain(&x, &y, &cfg, &tables, &init)?
    };

    std::fs::create_dir_all(&args.out_dir)?;
    io::write_samples_csv(&args.out_dir.join("samples.csv"), &out.samples)?;
    let probs = summary::marginal_probs(&out.samples)?;
    summary::export_heatmap(
        &probs,
        &args.out_dir.join("matchprobs.csv"),
        &args.out_dir.join("matchprobs_dense.csv"),
    )?;
    let run_summary = summary::summarize(&out.samples)?;
    io::write_summary_json(&args.out_dir.join("summary.json"), &run_summary)?;

    let acc = &out.acceptance;
    println!(
        "{} samples; median L = {}, median log-posterior = {:.1}",
        run_summary.n_samples, run_summary.l.median, run_summary.log_post.median
    );
    if let Some(rmsd) = &run_summary.rmsd {
        println!(
            "median RMSD = {:.3} ({:.3}, {:.3})",
            rmsd.median, rmsd.lo95, rmsd.hi95
        );
    }
    println!(
        "acceptance: match {:.1}%, rotation {:.1}%{}{}",
        100.0 * acc.match_accepted as f64 / acc.match_proposed.max(1) as f64,
        100.0 * acc.rot_accepted as f64 / acc.rot_proposed.max(1) as f64,
        if acc.gap_proposed > 0 {
            format!(
                ", gap {:.1}%",
                100.0 * acc.gap_accepted as f64 / acc.gap_proposed as f64
            )
        } else {
            String::new()
        },
        if acc.pam_proposed > 0 {
            format!(
                ", PAM {:.1}%",
                100.0 * acc.pam_accepted as f64 / acc.pam_proposed as f64
            )
        } else {
            String::new()
        },
    );
    println!("results written to {}", args.out_dir.display());
    Ok(())
}

fn run_zcheck(args: ZcheckArgs) -> anyhow::Result<()> {
    let gp = GapParams::new(args.g, args.h)?;
    let log_z = gapmodel::log_normalizer(args.m, args.n, &gp);
    println!("log Z({}, {}) = {log_z:.12}", args.g, args.h);
    match oracle::enumerate_matchings(args.m, args.n) {
        Ok(all) => {
            let sum: f64 = all
                .iter()
                .map(|mt| (-oracle::penalty_by_run_counting(mt, &gp)).exp())
                .sum();
            let enum_log_z = -sum.ln();
            let rel = ((log_z - enum_log_z).exp() - 1.0).abs();
            println!(
                "enumeration over {} matchings: log Z = {enum_log_z:.12}",
                all.len()
            );
            println!("relative error = {rel:.3e}");
            if rel > 1e-9 {
                bail!("normalizer mismatch beyond tolerance");
            }
        }
        Err(_) => {
            println!(
                "({}, {}) too large to enumerate; skipping cross-check",
                args.m, args.n
            );
        }
    }
    Ok(())
}

fn run_pam(args: PamArgs) -> anyhow::Result<()> {
    let chain = match &args.pam_file {
        Some(path) => io::load_pam1(path)?,
        None => SubstitutionChain::synthetic_test_chain(),
    };
    let table = pam::build_pam(&chain, args.l)?;
    let mut text = String::new();
    for a in 0..20 {
        let row: Vec<String> = (0..20)
            .map(|b| format!("{:.6e}", table.psi()[(a, b)]))
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_summarize(args: SummarizeArgs) -> anyhow::Result<()> {
    let samples = io::read_samples_csv(&args.samples)?;
    let run_summary = summary::summarize(&samples)?;
    match &args.out {
        Some(path) => io::write_summary_json(path, &run_summary)?,
        None => println!("{}", io::summary_json_string(&run_summary)?),
    }
    Ok(())
}

fn run_point_estimate(args: PointEstimateArgs) -> anyhow::Result<()> {
    let table = summary::parse_heatmap_dense(&args.matchprobs)?;
    let est = summary::point_estimate(&table, args.k)?;
    if !est.monotone {
        eprintln!("note: point estimate violates the sequence-order constraint");
    }
    println!(
        "{} matches, objective {:.4}, monotone: {}",
        est.pairs.len(),
        est.objective,
        est.monotone
    );
    if let Some(path) = &args.out {
        // The estimate may be non-monotone; write the pairs directly
        // rather than forcing them through the Matching invariants.
        let body: String = est
            .pairs
            .iter()
            .map(|(j, k)| format!("{j} {k}\n"))
            .collect();
        std::fs::write(path, body)?;
    }
    Ok(())
}
