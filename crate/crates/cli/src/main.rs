// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use icpot::certificates::{certify, Certificate};
use icpot::entropic::{sinkhorn_augmented, EntropicConfig};
use icpot::geo::{
    partial_w_tradeoff_sweep, price_grid, run_geo_case, simulate_geo_case, summarize,
    GeoBenchConfig, GeoCaseResult, GeoMetrics,
};
use icpot::io::{matrix_rows, AugmentedFile, ProblemFile, SolutionFile};
use icpot::oracle::oracle_solve;
use icpot::pu::{
    mean_f1, negative_offset_sweep, run_pu_bench, selection_bias_sweep, PuConfig,
    PuPipelineParams, PuRegime, PuSweepRow,
};
use icpot::reduction::to_augmented;
use icpot::{solve_icpot_with, IcPotProblem, SolverMode, SolverOptions};

/// Exit status for unreadable or invalid input files.
const EXIT_INPUT: u8 = 3;
/// Exit status when a solve or benchmark fails.
const EXIT_SOLVER: u8 = 4;
/// Exit status when an output cannot be written.
const EXIT_OUTPUT: u8 = 1;

#[derive(Parser)]
#[command(name = "icpot", version, about = "Partial optimal transport with pointwise unmatched costs")]
struct Cli {
    /// Override the feasibility and certificate tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and print or write the solution.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value = "sparse")]
        mode: SolverMode,
        /// Use the dense reference simplex (tiny instances only, no duals).
        #[arg(long)]
        oracle: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a solution against every optimality certificate.
    Verify {
        problem: PathBuf,
        solution: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit the balanced augmented form of a problem.
    Reduce {
        problem: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Entropic coupling of the augmented problem.
    SinkhornAugmented {
        problem: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iterations: usize,
        /// Marginal residual at which iterations stop.
        #[arg(long, default_value_t = 1e-9)]
        residual: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    #[command(subcommand)]
    Bench(Bench),
    #[command(subcommand)]
    Sweep(Sweep),
}

#[derive(Args, Clone)]
struct SeedArgs {
    /// First seed; later runs use consecutive seeds.
    #[arg(long, env = "ICPOT_SEED", default_value_t = 0)]
    seed: u64,
    /// Directory for CSV and JSON artifacts; without it CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Bench {
    /// PU selection-bias benchmark over both regimes and all policies.
    Pu {
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[command(flatten)]
        common: SeedArgs,
    },
    /// SWIM/SAR benchmark comparing IC-POT with low and high partial-W prices.
    Geo {
        #[arg(long, default_value_t = 20)]
        cases: usize,
        /// Also write the partial-W trade-off curve of the first case.
        #[arg(long)]
        sweep: bool,
        /// Write every simulated case as a JSON bundle.
        #[arg(long)]
        save_cases: bool,
        #[command(flatten)]
        common: SeedArgs,
    },
}

#[derive(Subcommand)]
enum Sweep {
    /// Heterogeneous PU F1 as the fringe selection probability decreases.
    PuBias {
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[command(flatten)]
        common: SeedArgs,
    },
    /// PU F1 in both regimes as the negative modes move vertically.
    PuOffset {
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.55, 0.6, 0.7, 0.85, 1.0, 1.2])]
        offsets: Vec<f64>,
        #[command(flatten)]
        common: SeedArgs,
    },
    /// Partial-W trade-off curve on one geo case, with the IC-POT point.
    Geo {
        #[arg(long, default_value_t = 1e-3)]
        a_min: f64,
        #[arg(long, default_value_t = 2.0)]
        a_max: f64,
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[command(flatten)]
        common: SeedArgs,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn solver(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.to_string(),
        }
    }

    fn output(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_OUTPUT,
            message: message.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_problem(path: &Path) -> CliResult<IcPotProblem> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    file.into_problem()
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_solution(path: &Path) -> CliResult<SolutionFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::output)?;
    text.push('\n');
    emit_text(&text, output)
}

fn emit_text(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::output(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Failure::output),
    }
}

fn csv_string<R: Serialize>(rows: &[R]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(Failure::output)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::output(e.to_string()))?;
    String::from_utf8(bytes).map_err(Failure::output)
}

/// Writes `name` into the artifact directory, or the CSV to stdout.
fn emit_artifact(out: Option<&Path>, name: &str, text: &str, to_stdout: bool) -> CliResult<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::output(format!("cannot create {}: {e}", dir.display())))?;
            emit_text(text, Some(&dir.join(name)))
        }
        None if to_stdout => emit_text(text, None),
        None => Ok(()),
    }
}

fn solver_options(tol: Option<f64>) -> CliResult<SolverOptions> {
    let mut opts = SolverOptions::default();
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::input(format!("--tol must be positive, got {t}")));
        }
        opts.tolerance = t;
    }
    Ok(opts)
}

const CERTIFICATE_TOL: f64 = 1e-7;

#[derive(Serialize)]
struct Verdict {
    pass: bool,
    /// `file` when the solution carried duals, `solver` when they were
    /// recomputed from an independent solve.
    duals_source: &'static str,
    failures: Vec<String>,
    certificate: Certificate,
}

fn failures(c: &Certificate) -> Vec<String> {
    let tol = c.tolerance;
    let mut out = Vec::new();
    if !c.primal.is_feasible(tol) {
        out.push(format!(
            "primal infeasible: row residual {:e}, column residual {:e}, min entry {:e}",
            c.primal.max_row_residual, c.primal.max_col_residual, c.primal.min_entry
        ));
    }
    if !c.dual.is_feasible(tol) {
        out.push(format!(
            "dual infeasible: edge violation {:e}, source cap {:e}, target cap {:e}",
            c.dual.max_edge_violation,
            c.dual.max_source_cap_violation,
            c.dual.max_target_cap_violation
        ));
    }
    for (i, j, gap) in &c.slackness.edges {
        out.push(format!("complementary slackness violated at edge ({i}, {j}), gap {gap:e}"));
    }
    for (i, gap) in &c.slackness.sources {
        out.push(format!("complementary slackness violated at source {i}, gap {gap:e}"));
    }
    for (j, gap) in &c.slackness.targets {
        out.push(format!("complementary slackness violated at target {j}, gap {gap:e}"));
    }
    for (i, j) in &c.dominated_edges {
        out.push(format!("dominated edge ({i}, {j}) carries mass"));
    }
    if !(c.duality_gap.abs() <= tol * (1.0 + c.primal_objective.abs())) {
        out.push(format!("duality gap {:e}", c.duality_gap));
    }
    out
}

#[derive(Serialize)]
struct SinkhornFile {
    epsilon: f64,
    iterations: usize,
    residual: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    coupling: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GeoRow {
    seed: u64,
    method: &'static str,
    comparable_recovery: f64,
    unmatch_precision: f64,
    reliable_loss: f64,
    spurious_transport: f64,
}

fn geo_row(seed: u64, method: &'static str, m: &GeoMetrics) -> GeoRow {
    GeoRow {
        seed,
        method,
        comparable_recovery: m.comparable_recovery,
        unmatch_precision: m.unmatch_precision,
        reliable_loss: m.reliable_loss,
        spurious_transport: m.spurious_transport,
    }
}

#[derive(Serialize)]
struct SweepCsvRow {
    method: &'static str,
    a: Option<f64>,
    spurious_transport: f64,
    comparable_recovery: f64,
}

fn sweep_csv(curve: &icpot::geo::TradeoffCurve) -> CliResult<String> {
    let mut rows: Vec<SweepCsvRow> = curve
        .partial_w
        .iter()
        .map(|p| SweepCsvRow {
            method: "partial_w",
            a: Some(p.a),
            spurious_transport: p.metrics.spurious_transport,
            comparable_recovery: p.metrics.comparable_recovery,
        })
        .collect();
    rows.push(SweepCsvRow {
        method: "icpot",
        a: None,
        spurious_transport: curve.icpot.spurious_transport,
        comparable_recovery: curve.icpot.comparable_recovery,
    });
    csv_string(&rows)
}

#[derive(Serialize)]
struct PuSweepCsvRow {
    value: f64,
    regime: &'static str,
    partial_w_f1: f64,
    aligned_f1: f64,
    misaligned_f1: f64,
    aligned_gap: f64,
    misaligned_gap: f64,
}

fn pu_sweep_csv(rows: &[PuSweepRow]) -> CliResult<String> {
    let rows: Vec<PuSweepCsvRow> = rows
        .iter()
        .map(|r| PuSweepCsvRow {
            value: r.value,
            regime: r.regime.name(),
            partial_w_f1: r.partial_w_f1,
            aligned_f1: r.aligned_f1,
            misaligned_f1: r.misaligned_f1,
            aligned_gap: r.aligned_gap(),
            misaligned_gap: r.misaligned_gap(),
        })
        .collect();
    csv_string(&rows)
}

fn run(cli: Cli) -> CliResult<()> {
    let opts = solver_options(cli.tol)?;
    let cert_tol = cli.tol.unwrap_or(CERTIFICATE_TOL);
    match cli.command {
        Command::Solve {
            problem,
            mode,
            oracle,
            output,
        } => {
            let p = read_problem(&problem)?;
            let file = if oracle {
                let sol = oracle_solve(&p).map_err(Failure::solver)?;
                SolutionFile::new(&sol, None, None)
            } else {
                let out = solve_icpot_with(&p, mode, &opts).map_err(Failure::solver)?;
                SolutionFile::new(&out.solution, Some(&out.duals), Some(&out.report))
            };
            emit_json(&file, output.as_deref())
        }
        Command::Verify {
            problem,
            solution,
            output,
        } => {
            let p = read_problem(&problem)?;
            let file = read_solution(&solution)?;
            let sol = file.solution().map_err(Failure::input)?;
            // Any optimal dual certifies any optimal primal, so a solution
            // without duals is checked against freshly computed ones.
            let (duals, duals_source) = match file.duals() {
                Some(d) => (d, "file"),
                None => (
                    solve_icpot_with(&p, SolverMode::Sparse, &opts)
                        .map_err(Failure::solver)?
                        .duals,
                    "solver",
                ),
            };
            let certificate = certify(&sol, &duals, &p, cert_tol);
            let failures = failures(&certificate);
            let verdict = Verdict {
                pass: failures.is_empty() && certificate.passes(),
                duals_source,
                failures,
                certificate,
            };
            emit_json(&verdict, output.as_deref())
        }
        Command::Reduce { problem, output } => {
            let p = read_problem(&problem)?;
            emit_json(&AugmentedFile::from(&to_augmented(&p)), output.as_deref())
        }
        Command::SinkhornAugmented {
            problem,
            epsilon,
            max_iterations,
            residual,
            output,
        } => {
            let p = read_problem(&problem)?;
            let cfg = EntropicConfig::new(epsilon, max_iterations, residual).map_err(Failure::input)?;
            let out = sinkhorn_augmented(&p, &cfg).map_err(Failure::solver)?;
            let file = SinkhornFile {
                epsilon,
                iterations: out.iterations,
                residual: out.residual,
                alpha: out.alpha,
                beta: out.beta,
                coupling: matrix_rows(&out.coupling),
            };
            emit_json(&file, output.as_deref())
        }
        Command::Bench(Bench::Pu { seeds, common }) => {
            let rows = run_pu_bench(seeds, common.seed, &PuConfig::default(), &PuPipelineParams::default())
                .map_err(Failure::solver)?;
            let out = common.out.as_deref();
            emit_artifact(out, "pu.csv", &csv_string(&rows)?, true)?;
            let mut summary = serde_json::Map::new();
            for regime in PuRegime::ALL {
                let mut by_policy = serde_json::Map::new();
                for policy in ["partial_w", "icpot_aligned", "icpot_misaligned"] {
                    by_policy.insert(policy.into(), mean_f1(&rows, regime, policy).into());
                }
                summary.insert(regime.name().into(), by_policy.into());
            }
            let text = serde_json::to_string_pretty(&summary).map_err(Failure::output)? + "\n";
            emit_artifact(out, "pu_summary.json", &text, false)
        }
        Command::Bench(Bench::Geo {
            cases,
            sweep,
            save_cases,
            common,
        }) => {
            let cfg = GeoBenchConfig {
                cases,
                first_seed: common.seed,
                ..GeoBenchConfig::default()
            };
            let out = common.out.as_deref();
            let mut results: Vec<GeoCaseResult> = Vec::with_capacity(cases);
            for t in 0..cases as u64 {
                let seed = common.seed + t;
                if save_cases && out.is_some() {
                    let case = simulate_geo_case(seed, &cfg.scenario).map_err(Failure::solver)?;
                    let text = serde_json::to_string(&case).map_err(Failure::output)? + "\n";
                    emit_artifact(out, &format!("geo_case_{seed}.json"), &text, false)?;
                }
                results.push(run_geo_case(seed, &cfg).map_err(Failure::solver)?);
            }
            let mut rows = Vec::with_capacity(3 * cases);
            for r in &results {
                rows.push(geo_row(r.seed, "icpot", &r.icpot));
                rows.push(geo_row(r.seed, "partial_w_low", &r.partial_w_low));
                rows.push(geo_row(r.seed, "partial_w_high", &r.partial_w_high));
            }
            emit_artifact(out, "geo.csv", &csv_string(&rows)?, true)?;
            let summary = serde_json::json!({
                "a_low": cfg.a_low,
                "a_high": cfg.a_high,
                "icpot": summarize(&results.iter().map(|r| r.icpot).collect::<Vec<_>>()),
                "partial_w_low": summarize(&results.iter().map(|r| r.partial_w_low).collect::<Vec<_>>()),
                "partial_w_high": summarize(&results.iter().map(|r| r.partial_w_high).collect::<Vec<_>>()),
            });
            let text = serde_json::to_string_pretty(&summary).map_err(Failure::output)? + "\n";
            emit_artifact(out, "geo_summary.json", &text, false)?;
            if sweep {
                let case = simulate_geo_case(common.seed, &cfg.scenario).map_err(Failure::solver)?;
                let curve = partial_w_tradeoff_sweep(&case, &price_grid(1e-3, 2.0, 16), &cfg.costs)
                    .map_err(Failure::solver)?;
                emit_artifact(out, "geo_sweep.csv", &sweep_csv(&curve)?, true)?;
            }
            Ok(())
        }
        Command::Sweep(Sweep::PuBias {
            seeds,
            points,
            common,
        }) => {
            let (center, _) = PuRegime::Heterogeneous.selection();
            let fringes: Vec<f64> = match points {
                0 => Vec::new(),
                1 => vec![center],
                _ => (0..points)
                    .map(|t| center + (0.03 - center) * t as f64 / (points - 1) as f64)
                    .collect(),
            };
            let base = PuConfig {
                seed: common.seed,
                ..PuConfig::default()
            };
            let rows = selection_bias_sweep(&fringes, seeds, &base, &PuPipelineParams::default())
                .map_err(Failure::solver)?;
            emit_artifact(common.out.as_deref(), "pu_bias_sweep.csv", &pu_sweep_csv(&rows)?, true)
        }
        Command::Sweep(Sweep::PuOffset {
            seeds,
            offsets,
            common,
        }) => {
            let base = PuConfig {
                seed: common.seed,
                ..PuConfig::default()
            };
            let rows = negative_offset_sweep(&offsets, seeds, &base, &PuPipelineParams::default())
                .map_err(Failure::solver)?;
            emit_artifact(common.out.as_deref(), "pu_offset_sweep.csv", &pu_sweep_csv(&rows)?, true)
        }
        Command::Sweep(Sweep::Geo {
            a_min,
            a_max,
            points,
            common,
        }) => {
            if !(a_min > 0.0 && a_max >= a_min) {
                return Err(Failure::input("price range needs 0 < a_min <= a_max"));
            }
            let cfg = GeoBenchConfig::default();
            let case = simulate_geo_case(common.seed, &cfg.scenario).map_err(Failure::solver)?;
            let curve = partial_w_tradeoff_sweep(&case, &price_grid(a_min, a_max, points), &cfg.costs)
                .map_err(Failure::solver)?;
            emit_artifact(common.out.as_deref(), "geo_sweep.csv", &sweep_csv(&curve)?, true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
