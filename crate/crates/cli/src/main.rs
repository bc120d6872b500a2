//! `free-stein`: run moment, bound, Breuer–Major, Monte Carlo and self-check
//! experiments from JSON configs, writing CSV and JSON tables.
//!
//! Exit status: 0 on success, 1 when a check or comparison fails or an input
//! is outside the domain of an operation, 2 on I/O and config errors.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use free_stein::breuer_major::bm_rate_experiment;
use free_stein::kernel_tensor::Kernel;
use free_stein::randmat_mc::mc_compare;
use free_stein::spd::SpdCovariance;
use free_stein::stein_bounds::{bound_report, WignerVector};
use free_stein::verify::run_verify;
use free_stein::wigner_moments::{joint_moment_by_pairings, wigner_joint_moment};
use serde::Serialize;

use config::{BoundsConfig, BreuerMajorConfig, McConfig, MomentsConfig, VerifyConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] free_stein::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn status(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Config(_) => 2,
            CliError::Core(free_stein::Error::Io(_) | free_stein::Error::Parse(_)) => 2,
            CliError::Core(_) | CliError::Failed(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "free-stein",
    version,
    about = "Free Stein discrepancies and Wigner chaos experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config for the command (optional for `verify`).
    #[arg(long, global = true, env = "FREE_STEIN_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON tables.
    #[arg(long, global = true, env = "FREE_STEIN_OUT", default_value = "out")]
    out: PathBuf,
    /// Seed; overrides the config's `seed`.
    #[arg(long, global = true, env = "FREE_STEIN_SEED")]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "FREE_STEIN_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Joint moments of Wigner integrals.
    Moments,
    /// Stein discrepancy and distance bounds for a Wigner vector.
    Bounds,
    /// Breuer–Major rate experiment.
    BreuerMajor,
    /// GUE Monte Carlo against semicircular predictions.
    Mc,
    /// Seeded self-check suite.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Moments => "moments",
            Command::Bounds => "bounds",
            Command::BreuerMajor => "breuer_major",
            Command::Mc => "mc",
            Command::Verify => "verify",
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    config_digest: String,
    seed: u64,
    config: &'a C,
    result: R,
}

struct Output<'a> {
    dir: &'a Path,
    command: Command,
    digest: String,
    seed: u64,
}

impl Output<'_> {
    fn write_json<C: Serialize, R: Serialize>(&self, cfg: &C, result: R) -> Result<(), CliError> {
        let env = Envelope {
            command: self.command.name(),
            config_digest: self.digest.clone(),
            seed: self.seed,
            config: cfg,
            result,
        };
        let mut text =
            serde_json::to_string_pretty(&env).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(format!("{}.json", self.command.name()));
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// Header row, then one row per record; the config digest and seed are
    /// appended to every row.
    fn write_csv(&self, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}.csv", self.command.name()));
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(io)?;
        let mut full: Vec<&str> = header.to_vec();
        full.extend(["config_digest", "seed"]);
        w.write_record(&full).map_err(io)?;
        let seed = self.seed.to_string();
        for mut row in rows {
            row.push(self.digest.clone());
            row.push(seed.clone());
            w.write_record(&row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// Shortest round-trip decimal, switching to exponent form outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn word_label(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

fn require_config(cli: &Cli) -> Result<&Path, CliError> {
    cli.config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))
}

fn build_kernels(specs: &[free_stein::kernel_tensor::KernelSpec]) -> Result<Vec<Kernel>, CliError> {
    if specs.is_empty() {
        return Err(CliError::Config("`kernels` must not be empty".into()));
    }
    Ok(specs.iter().map(|s| s.build()).collect::<Result<_, _>>()?)
}

#[derive(Serialize)]
struct MomentRow {
    word: Vec<usize>,
    re: f64,
    im: f64,
    pairing_abs_diff: Option<f64>,
}

fn run_moments(cli: &Cli) -> Result<(), CliError> {
    let cfg: MomentsConfig = config::load(require_config(cli)?)?;
    let kernels = build_kernels(&cfg.kernels)?;
    let mut rows = Vec::with_capacity(cfg.words.len());
    for w in &cfg.words {
        let fs: Vec<&Kernel> = w
            .iter()
            .map(|&i| {
                kernels
                    .get(i)
                    .ok_or_else(|| CliError::Config(format!("word index {i} has no kernel")))
            })
            .collect::<Result<_, _>>()?;
        let z = wigner_joint_moment(&fs)?;
        let diff = if cfg.check_pairings {
            Some((joint_moment_by_pairings(&fs)? - z).norm())
        } else {
            None
        };
        rows.push(MomentRow {
            word: w.clone(),
            re: z.re,
            im: z.im,
            pairing_abs_diff: diff,
        });
    }
    let out = output(cli, Command::Moments, &cfg, cfg.seed)?;
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                word_label(&r.word),
                num(r.re),
                num(r.im),
                r.pairing_abs_diff.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    out.write_csv(&["word", "re", "im", "pairing_abs_diff"], csv_rows)?;
    out.write_json(&cfg, &rows)?;
    for r in &rows {
        println!("{}\t{}\t{}", word_label(&r.word), r.re, r.im);
    }
    Ok(())
}

fn run_bounds(cli: &Cli) -> Result<(), CliError> {
    let cfg: BoundsConfig = config::load(require_config(cli)?)?;
    let fv = WignerVector::new(build_kernels(&cfg.kernels)?)?;
    let report = bound_report(&fv, cfg.fisher)?;
    let out = output(cli, Command::Bounds, &cfg, cfg.seed)?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let scalars = [
        ("m_of_f", num(report.m_of_f)),
        ("stein_upper", num(report.stein_upper)),
        ("dw_thm8", num(report.dw_thm8)),
        ("dw_lemma", num(report.dw_lemma)),
        ("op_norm", num(report.op_norm)),
        ("inv_op_norm", num(report.inv_op_norm)),
        ("hsi_rhs", opt(report.hsi_rhs)),
        ("lsi_rhs", opt(report.lsi_rhs)),
    ];
    out.write_csv(
        &["quantity", "value"],
        scalars
            .iter()
            .map(|(k, v)| vec![k.to_string(), v.clone()])
            .collect(),
    )?;
    out.write_json(&cfg, &report)?;
    for (k, v) in &scalars {
        println!("{k}\t{v}");
    }
    Ok(())
}

fn run_breuer_major(cli: &Cli) -> Result<(), CliError> {
    let cfg: BreuerMajorConfig = config::load(require_config(cli)?)?;
    let report = bm_rate_experiment(cfg.q, cfg.h, &cfg.times, &cfg.n_list)?;
    let out = output(cli, Command::BreuerMajor, &cfg, cfg.seed)?;
    let d = cfg.times.len() - 1;
    let mut header = vec!["n".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend(["M".to_string(), "dw_thm8".to_string(), "slope".to_string()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string()];
            row.extend(r.fourth_cumulants.iter().copied().map(num));
            row.extend([
                num(r.m_of_f),
                num(r.dw_thm8),
                r.slope.map(num).unwrap_or_default(),
            ]);
            row
        })
        .collect();
    out.write_csv(&header_refs, rows)?;
    out.write_json(&cfg, &report)?;
    println!(
        "last slope {:?}, Aitken slope {:?}, theoretical rate {}, monotone {}",
        report.last_slope, report.aitken_slope, report.theoretical_rate, report.monotone
    );
    Ok(())
}

fn run_mc(cli: &Cli) -> Result<(), CliError> {
    let cfg: McConfig = config::load(require_config(cli)?)?;
    let c = SpdCovariance::from_rows(&cfg.covariance)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let report = mc_compare(&c, &cfg.words, cfg.n, cfg.reps, seed)?;
    let out = output(cli, Command::Mc, &cfg, cfg.seed)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                word_label(&r.word),
                num(r.prediction),
                num(r.estimate),
                num(r.stderr),
                r.pass.to_string(),
            ]
        })
        .collect();
    out.write_csv(&["word", "prediction", "estimate", "stderr", "pass"], rows)?;
    out.write_json(&cfg, &report)?;
    for r in &report.rows {
        println!(
            "{}\t{}\t{}\t{}",
            word_label(&r.word),
            r.prediction,
            r.estimate,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    if !report.all_pass() {
        return Err(CliError::Failed(
            "some Monte Carlo estimates are outside their allowance".into(),
        ));
    }
    Ok(())
}

fn run_verify_command(cli: &Cli) -> Result<(), CliError> {
    let cfg: VerifyConfig = match &cli.config {
        Some(p) => config::load(p)?,
        None => VerifyConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let report = run_verify(seed)?;
    let out = output(cli, Command::Verify, &cfg, cfg.seed)?;
    let rows = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.cases.to_string(),
                num(c.worst),
                num(c.tolerance),
                c.pass.to_string(),
            ]
        })
        .collect();
    out.write_csv(&["check", "cases", "worst", "tolerance", "pass"], rows)?;
    out.write_json(&cfg, &report)?;
    for c in &report.checks {
        println!("{:<32} {}", c.name, if c.pass { "ok" } else { "FAIL" });
    }
    if !report.all_pass() {
        return Err(CliError::Failed(
            "self-check suite reported failures".into(),
        ));
    }
    Ok(())
}

fn output<'a, C: serde::Serialize>(
    cli: &'a Cli,
    command: Command,
    cfg: &C,
    cfg_seed: Option<u64>,
) -> Result<Output<'a>, CliError> {
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", cli.out.display())))?;
    Ok(Output {
        dir: &cli.out,
        command,
        digest: config::digest(cfg),
        seed: cli.seed.or(cfg_seed).unwrap_or(0),
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Moments => run_moments(cli),
        Command::Bounds => run_bounds(cli),
        Command::BreuerMajor => run_breuer_major(cli),
        Command::Mc => run_mc(cli),
        Command::Verify => run_verify_command(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status())
        }
    }
}
