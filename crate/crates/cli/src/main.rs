//! `sfuda`: run probing and adaptation experiments on precomputed features.
//!
//! Exit codes: 0 success, 2 bad arguments or configuration, 3 I/O failure,
//! 4 invalid input data, 5 degenerate adaptation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sfuda_core::align::Initialization;
use sfuda_core::harness::{
    format_sig6, load_pair, render_results, run_manifest, run_pair, write_results_atomic,
    Method, MethodParams, ResultRow, ShiftSpec,
};
use sfuda_core::io::{read_manifest, read_records, write_sfdk};
use sfuda_core::stats::{fit_interaction, fit_linear, prune_insignificant, RegressionFit, DEFAULT_ALPHA};
use sfuda_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "sfuda", version, about = "Source-free domain adaptation on precomputed features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a source-trained probe on the target without adaptation.
    Probe {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum, default_value_t = ProbeMethod::Lp)]
        method: ProbeMethod,
        /// Ridge coefficient of the linear probe.
        #[arg(long, value_parser = non_negative)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Adapt to the unlabeled target and score against the LP baseline.
    Adapt {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        method: AdaptMethod,
        /// Prototype initialization (sca only).
        #[arg(long, value_parser = parse_init)]
        init: Option<Initialization>,
        /// Training epochs (shot_lite only).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
        /// Pseudo-label loss weight (shot_lite only).
        #[arg(long, value_parser = non_negative)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every experiment of a manifest and write a result CSV.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to SFUDA_THREADS, then the CPU count.
        #[arg(long, env = "SFUDA_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
        jobs: Option<u64>,
    },
    /// Fit the accuracy-versus-top1 regression models.
    Stats {
        /// CSV with columns top1, pretrain, accuracy.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        model: StatsModel,
        /// Drop shift terms that are not significant at 0.01.
        #[arg(long)]
        prune: bool,
    },
    /// Write a synthetic source/target pair as SFDK files.
    Gen {
        /// JSON shift specification.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_source: PathBuf,
        #[arg(long)]
        out_target: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeMethod {
    Lp,
    Cp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdaptMethod {
    Sca,
    #[value(name = "shot_lite")]
    ShotLite,
    #[value(name = "ft_stats")]
    FtStats,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum StatsModel {
    Linear,
    Interaction,
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("expected a finite value >= 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_init(s: &str) -> Result<Initialization, String> {
    s.parse::<Initialization>().map_err(|e| e.to_string())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Io => 3,
        ErrorKind::Validation => 4,
        ErrorKind::Degenerate => 5,
    }
}

fn pair_id(source: &Path, target: &Path) -> String {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    format!("{}->{}", stem(source), stem(target))
}

fn single_row(
    source: &Path,
    target: &Path,
    method: Method,
    params: &MethodParams,
    seed: u64,
) -> Result<String, Error> {
    let (src, tgt) = load_pair(source, target)?;
    let outcome = run_pair(&src, &tgt, method, params, seed)?;
    let row = ResultRow::from_outcome(
        &pair_id(source, target),
        &source.display().to_string(),
        &target.display().to_string(),
        seed,
        &outcome,
    );
    Ok(format!("{}\n{}\n", ResultRow::csv_header(), row.to_csv()))
}

fn render_fit(fit: &RegressionFit, removed: &[sfuda_core::stats::Term]) -> String {
    let mut out = String::from("term,coefficient,std_error,t,p\n");
    for (i, term) in fit.terms.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            term,
            format_sig6(fit.coefficients[i]),
            format_sig6(fit.std_errors[i]),
            format_sig6(fit.t_stats[i]),
            format_sig6(fit.p_values[i])
        );
    }
    out.push_str("\nmetric,value\n");
    let _ = writeln!(out, "n,{}", fit.n());
    let _ = writeln!(out, "df,{}", fit.df);
    let _ = writeln!(out, "r2,{}", format_sig6(fit.r2));
    let _ = writeln!(out, "adj_r2,{}", format_sig6(fit.adj_r2));
    if !removed.is_empty() {
        let names: Vec<&str> = removed.iter().map(|t| t.name()).collect();
        let _ = writeln!(out, "removed,{}", names.join(" "));
    }
    out
}

fn run(command: Command) -> Result<String, Error> {
    match command {
        Command::Probe {
            source,
            target,
            method,
            lambda,
            seed,
        } => {
            let method = match method {
                ProbeMethod::Lp => Method::Lp,
                ProbeMethod::Cp => Method::Cp,
            };
            let params = MethodParams {
                lambda,
                ..MethodParams::default()
            };
            single_row(&source, &target, method, &params, seed)
        }
        Command::Adapt {
            source,
            target,
            method,
            init,
            epochs,
            beta,
            seed,
        } => {
            let method = match method {
                AdaptMethod::Sca => Method::Sca,
                AdaptMethod::ShotLite => Method::ShotLite,
                AdaptMethod::FtStats => Method::FtStats,
            };
            let params = MethodParams {
                init,
                epochs: epochs.map(|e| e as usize),
                beta,
                ..MethodParams::default()
            };
            single_row(&source, &target, method, &params, seed)
        }
        Command::Run {
            manifest,
            out,
            jobs,
        } => {
            let jobs = match jobs {
                Some(j) => j as usize,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            };
            let parsed = read_manifest(&manifest)?;
            let base = manifest.parent().unwrap_or_else(|| Path::new("."));
            let report = run_manifest(&parsed, base, jobs)?;
            write_results_atomic(&out, &render_results(&report))?;
            Ok(String::new())
        }
        Command::Stats {
            input,
            model,
            prune,
        } => {
            if prune && model == StatsModel::Linear {
                return Err(Error::InvalidConfig("--prune needs --model interaction".into()));
            }
            let records = read_records(&input, model == StatsModel::Interaction)?;
            let (fit, removed) = match (model, prune) {
                (StatsModel::Linear, _) => (fit_linear(&records)?, Vec::new()),
                (StatsModel::Interaction, false) => (fit_interaction(&records)?, Vec::new()),
                (StatsModel::Interaction, true) => prune_insignificant(&records, DEFAULT_ALPHA)?,
            };
            Ok(render_fit(&fit, &removed))
        }
        Command::Gen {
            spec,
            out_source,
            out_target,
        } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::Io {
                path: spec.clone(),
                source: e,
            })?;
            let spec: ShiftSpec = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", spec.display())))?;
            let (source, target) = sfuda_core::harness::gen_domain_pair(&spec)?;
            write_sfdk(&source, &out_source)?;
            write_sfdk(&target, &out_target)?;
            Ok(String::new())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
