//! `entmap`: fit and apply entropic transport maps, run benchmark grids, self-check.

mod output;
mod selfcheck;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use entmap::bench::{EpsRule, GridSpec};
use entmap::geometry::{read_points_csv, write_points_csv};
use entmap::map::fit_with;
use entmap::sinkhorn::{SinkhornOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use entmap::{EntropicMapModel, PointCloud};

use crate::output::write_atomically;

#[derive(Parser)]
#[command(name = "entmap", version, about = "Entropic optimal transport map estimation", propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an entropic map from source and target samples and write it as JSON.
    Fit(FitArgs),
    /// Apply a fitted map to query points.
    Map(MapArgs),
    /// Run a benchmark grid comparing estimators on synthetic data.
    Bench(BenchArgs),
    /// Run built-in invariant checks on small instances.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Source samples (CSV, one point per row).
    source: PathBuf,
    /// Target samples (CSV, one point per row).
    target: PathBuf,
    /// Fixed regularization.
    #[arg(long, conflicts_with = "eps_auto")]
    eps: Option<f64>,
    /// Size-dependent regularization `c * n^(-1/(d' + alpha_bar + 1))`, given as `alpha_bar,c`.
    /// This is the default (3,1) when neither flag is given.
    #[arg(long, value_name = "ALPHA_BAR,C")]
    eps_auto: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MapArgs {
    /// Model JSON written by `fit`.
    model: PathBuf,
    /// Query points (CSV).
    queries: PathBuf,
    /// Where to write the mapped points (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("grid_source").required(true).args(["grid", "config"])))]
struct BenchArgs {
    /// Inline grid, e.g. `ns=100,400;ds=2;kinds=exp;estimators=entropic,onenn;repeats=20`.
    #[arg(long)]
    grid: Option<String>,
    /// Grid description as a JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-repeat results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-cell summary JSON; defaults to the results path with a `.json` extension.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Number of grid cells run concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    /// Flip the sign of the transport cost inside map evaluation.
    FlipCostSign,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Run the checks against a deliberately broken evaluator (negative control).
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<Fault>,
}

type CmdResult = Result<ExitCode, String>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share exit code 1 with every other failure; 2 is reserved for max-iter.
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Map(args) => cmd_map(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Selfcheck(args) => Ok(cmd_selfcheck(args)),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        ExitCode::from(1)
    })
}

fn read_cloud(path: &Path) -> Result<PointCloud, String> {
    PointCloud::read_csv(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_fit(args: FitArgs) -> CmdResult {
    let x = read_cloud(&args.source)?;
    let y = read_cloud(&args.target)?;
    if x.dim() != y.dim() {
        return Err(format!("source has dimension {} but target has dimension {}", x.dim(), y.dim()));
    }
    let rule = match (args.eps, &args.eps_auto) {
        (Some(eps), _) => EpsRule::Fixed(eps),
        (None, Some(spec)) => format!("auto:{}", spec.replace(',', ":")).parse().map_err(|e| format!("--eps-auto: {e}"))?,
        (None, None) => EpsRule::default(),
    };
    let eps = rule.eps(x.len().max(y.len()), x.dim()).map_err(|e| e.to_string())?;
    let opts = SinkhornOptions::new(eps).tol(args.tol).max_iter(args.max_iter);
    let (model, report) = fit_with(&x, &y, &opts).map_err(|e| e.to_string())?;

    write_atomically(&args.out, |w| model.write_json(w)).map_err(|e| format!("{}: {e}", args.out.display()))?;
    println!(
        "n={} m={} d={} eps={} iterations={} marginal_violation={:e} dual={} converged={}",
        x.len(),
        y.len(),
        x.dim(),
        eps,
        report.iterations,
        report.marginal_violation,
        report.dual_trace.last().copied().unwrap_or(f64::NAN),
        report.converged
    );
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: reached max-iter {} before tol {}; model written anyway", args.max_iter, args.tol);
        Ok(ExitCode::from(2))
    }
}

fn cmd_map(args: MapArgs) -> CmdResult {
    let file = std::fs::File::open(&args.model).map_err(|e| format!("{}: {e}", args.model.display()))?;
    let model = EntropicMapModel::read_json(std::io::BufReader::new(file))
        .map_err(|e| format!("{}: {e}", args.model.display()))?;
    let file = std::fs::File::open(&args.queries).map_err(|e| format!("{}: {e}", args.queries.display()))?;
    let rows = read_points_csv(file).map_err(|e| format!("{}: {e}", args.queries.display()))?;
    let mapped = if rows.is_empty() {
        Vec::new()
    } else {
        let queries = PointCloud::new(rows).map_err(|e| format!("{}: {e}", args.queries.display()))?;
        model.eval_batch(&queries).map_err(|e| e.to_string())?.to_rows()
    };
    write_atomically(&args.out, |w| write_points_csv(w, mapped.iter().map(Vec::as_slice)))
        .map_err(|e| format!("{}: {e}", args.out.display()))?;
    println!("mapped {} points (d={}) with eps={}", mapped.len(), model.dim(), model.eps());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let spec: GridSpec = match (&args.grid, &args.config) {
        (Some(grid), _) => grid.parse().map_err(|e| format!("--grid: {e}"))?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, None) => unreachable!("clap enforces one grid source"),
    };
    let report = spec.run(args.workers).map_err(|e| e.to_string())?;
    let summary = args.summary.clone().unwrap_or_else(|| args.out.with_extension("json"));
    write_atomically(&args.out, |w| report.write_csv(w)).map_err(|e| format!("{}: {e}", args.out.display()))?;
    write_atomically(&summary, |w| report.write_summary_json(w)).map_err(|e| format!("{}: {e}", summary.display()))?;

    for c in &report.cells {
        println!(
            "{:<8} {:<9} d={:<3} n={:<6} eps={:<10.4} mse={:.6} (sd {:.6})  runtime={:.1}ms (sd {:.1})  failed={}/{}",
            c.estimator.to_string(),
            c.map_kind.to_string(),
            c.d,
            c.n,
            c.eps,
            c.mean_mse,
            c.std_mse,
            c.mean_runtime_ms,
            c.std_runtime_ms,
            c.failures,
            c.repeats
        );
    }
    if report.any_failed() {
        eprintln!("some repeats failed; see the status column of {}", args.out.display());
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_selfcheck(args: SelfcheckArgs) -> ExitCode {
    let cost_sign = match args.inject_fault {
        Some(Fault::FlipCostSign) => -1.0,
        None => 1.0,
    };
    let outcomes = selfcheck::run(cost_sign);
    let mut all = true;
    for o in &outcomes {
        all &= o.passed;
        println!("{} {:<28} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
