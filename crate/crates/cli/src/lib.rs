//! Command-line front end: argument parsing, dispatch and JSON reports.
//!
//! [`run_command`] is the whole program; `main` only forwards the process
//! arguments and exits with the returned code.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use vqfp::certify::{certify_point_with_tau, CertificateStatus};
use vqfp::duality::{
    converse_duality_check, dual_feasible, strict_converse_check, strong_duality_construct,
    weak_duality_check, DualPoint, StrongDuality,
};
use vqfp::io::load_instance;
use vqfp::kkt::{find_multipliers, MultiplierSearch};
use vqfp::oracle::{approximate_pareto_front, dominance_check};
use vqfp::scalarize::{dinkelbach_search, seek_psd_weights, simplex_lattice, DinkelbachOutcome};
use vqfp::spectral::objective_spectra;
use vqfp::{Error, ProblemInstance, Route, RunConfig, Vector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_NOT_KKT: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_INVALID: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

const THREADS_VAR: &str = "VQFP_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "vqfp",
    version,
    about = "Pareto certificates, scalarized search and duality checks for vector quadratic fractional programs",
    after_help = "Vectors are comma-separated decimals with a dot separator, e.g. \"0.5,-1,2e-3\".\n\
                  Exit codes: 0 success or certified, 2 not a KKT point, 3 inconclusive,\n\
                  4 invalid input or infeasible point, 1 internal error, 64 usage error.\n\
                  VQFP_THREADS caps the worker threads."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Suppress the one-line summary on stderr.
    #[arg(long, global = true)]
    json_only: bool,
    /// Seed for randomized heuristics.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover multipliers (tau, lambda) at a feasible point.
    Kkt {
        instance: PathBuf,
        #[arg(long, value_name = "X")]
        point: String,
        /// Include the eigendecompositions of every A_i and B_i.
        #[arg(long)]
        dump_eigen: bool,
    },
    /// Try to certify a feasible point as Pareto optimal.
    Certify {
        instance: PathBuf,
        #[arg(long, value_name = "X")]
        point: String,
        #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
        route: RouteArg,
        /// Slack allowed when deciding that a route inequality holds.
        #[arg(long, value_name = "T")]
        tol: Option<f64>,
        /// Objective multipliers to use instead of the LP vertex.
        #[arg(long, value_name = "TAU")]
        tau: Option<String>,
        /// Include the eigendecompositions of every A_i and B_i.
        #[arg(long)]
        dump_eigen: bool,
    },
    /// Weighted scalarized search for Pareto points.
    Search {
        instance: PathBuf,
        /// Positive weights, one per objective.
        #[arg(long, value_name = "W", conflicts_with_all = ["sweep", "seek_psd_weights"])]
        weights: Option<String>,
        /// Sweep the simplex lattice with N divisions.
        #[arg(long, value_name = "N", conflicts_with = "seek_psd_weights")]
        sweep: Option<usize>,
        /// Start point; defaults to the box centre or the origin.
        #[arg(long, value_name = "X")]
        x0: Option<String>,
        /// Derive weights that make the scalarized problem convex at x0.
        #[arg(long)]
        seek_psd_weights: bool,
    },
    /// Weak, strong and converse duality checks.
    DualCheck {
        instance: PathBuf,
        #[arg(long, value_name = "X", required_unless_present = "roundtrip")]
        primal: Option<String>,
        #[arg(long, value_name = "U", required_unless_present = "roundtrip")]
        dual_u: Option<String>,
        #[arg(long, value_name = "TAU", required_unless_present = "roundtrip")]
        tau: Option<String>,
        #[arg(long, value_name = "LAMBDA", required_unless_present = "roundtrip")]
        lambda: Option<String>,
        /// Build a dual point from the multipliers at --point and check it.
        #[arg(long, requires = "point", conflicts_with_all = ["primal", "dual_u", "tau", "lambda"])]
        roundtrip: bool,
        #[arg(long, value_name = "X")]
        point: Option<String>,
    },
    /// Brute-force dominance oracle on a grid over the bounding box.
    Oracle {
        instance: PathBuf,
        #[arg(
            long,
            value_name = "X",
            required_unless_present = "front",
            conflicts_with = "front"
        )]
        point: Option<String>,
        /// List the grid points that no other grid point dominates.
        #[arg(long)]
        front: bool,
        #[arg(long, value_name = "S")]
        step: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Auto,
    Psd,
    H,
    Eigen,
    Zmin,
}

impl RouteArg {
    fn routes(self) -> Vec<Route> {
        match self {
            RouteArg::Auto => Route::AUTO.to_vec(),
            RouteArg::Psd => vec![Route::PointwisePsd],
            RouteArg::H => vec![Route::HPsdAlphaZero, Route::HNonneg],
            RouteArg::Eigen => vec![Route::EigenInequality],
            RouteArg::Zmin => vec![Route::ZMinimization],
        }
    }
}

/// A report plus the exit code it implies.
struct Outcome {
    report: Value,
    summary: String,
    code: i32,
}

/// Parses a comma-separated vector such as `"0.5,-1,2e-3"`.
pub fn parse_vector(text: &str) -> Result<Vector, Error> {
    let values = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse(format!(
                    "`{s}` is not a finite decimal number"
                ))),
            }
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    Ok(Vector::from_vec(values))
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. }
        | Error::InfeasiblePoint { .. }
        | Error::Parse(_)
        | Error::Dimension { .. }
        | Error::Domain { .. }
        | Error::Config(_)
        | Error::Io(_) => EXIT_INVALID,
        Error::HypothesisNotMet(_) | Error::InapplicableRoute(_) => EXIT_INCONCLUSIVE,
        Error::Convergence { .. } | Error::Numerical(_) => EXIT_INTERNAL,
    }
}

/// Runs one command. `argv[0]` is the program name. The JSON report goes to
/// `out` (or `--out`); summaries and diagnostics go to `err`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    let mut cfg = RunConfig::default();
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    let outcome = match dispatch(&cli.command, cfg) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let mut text = match serde_json::to_string_pretty(&outcome.report) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot serialize report: {e}");
            return EXIT_INTERNAL;
        }
    };
    text.push('\n');
    let written = match &cli.global.out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => out.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write report: {e}");
        return EXIT_INVALID;
    }
    if !cli.global.json_only {
        let _ = writeln!(err, "{}", outcome.summary);
    }
    outcome.code
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))
}

fn load(path: &PathBuf, cfg: &RunConfig) -> Result<ProblemInstance, Error> {
    load_instance(path, &cfg.tol)
}

fn with_spectra(mut report: Value, p: &ProblemInstance) -> Result<Value, Error> {
    let spectra: Vec<Value> = objective_spectra(p)?
        .iter()
        .enumerate()
        .map(|(i, (a, b))| Ok(json!({ "objective": i, "a": to_value(a)?, "b": to_value(b)? })))
        .collect::<Result<_, Error>>()?;
    if let Value::Object(map) = &mut report {
        map.insert("spectra".into(), Value::Array(spectra));
    }
    Ok(report)
}

fn default_start(p: &ProblemInstance) -> Vector {
    match p.bounding_box() {
        Some((lo, hi)) => (lo + hi) * 0.5,
        None => Vector::zeros(p.dim()),
    }
}

/// Reports a library error that a theorem check raises when its hypothesis fails.
fn hypothesis<T: Serialize>(r: Result<T, Error>) -> Result<Value, Error> {
    match r {
        Ok(v) => to_value(&v),
        Err(Error::HypothesisNotMet(reason)) => {
            Ok(json!({ "status": "hypothesis_not_met", "reason": reason }))
        }
        Err(e) => Err(e),
    }
}

fn dispatch(cmd: &Command, mut cfg: RunConfig) -> Result<Outcome, Error> {
    match cmd {
        Command::Kkt {
            instance,
            point,
            dump_eigen,
        } => {
            let p = load(instance, &cfg)?;
            let x = parse_vector(point)?;
            let search = find_multipliers(&p, &x, &cfg)?;
            let (summary, code) = match &search {
                MultiplierSearch::Found(mp) => (
                    format!(
                        "kkt: multipliers found, stationarity {:.3e}",
                        mp.stationarity_residual
                    ),
                    EXIT_OK,
                ),
                MultiplierSearch::NoneExist { floor } => (
                    format!("kkt: no multipliers (floor {floor:.3e})"),
                    EXIT_NOT_KKT,
                ),
            };
            let mut report = to_value(&search)?;
            if *dump_eigen {
                report = with_spectra(report, &p)?;
            }
            Ok(Outcome {
                report,
                summary,
                code,
            })
        }
        Command::Certify {
            instance,
            point,
            route,
            tol,
            tau,
            dump_eigen,
        } => {
            cfg.routes = route.routes();
            if let Some(t) = tol {
                cfg.tol.route = *t;
            }
            let p = load(instance, &cfg)?;
            let x = parse_vector(point)?;
            let tau = tau.as_deref().map(parse_vector).transpose()?;
            let cert = certify_point_with_tau(&p, &x, &cfg, tau.as_ref())?;
            let (summary, code) = match &cert.status {
                CertificateStatus::CertifiedPareto { route } => {
                    (format!("certify: Pareto optimal via {route:?}"), EXIT_OK)
                }
                CertificateStatus::NotKkt => ("certify: not a KKT point".to_string(), EXIT_NOT_KKT),
                CertificateStatus::Inconclusive { reason, .. } => (
                    format!("certify: inconclusive ({reason})"),
                    EXIT_INCONCLUSIVE,
                ),
            };
            let mut report = to_value(&cert)?;
            if *dump_eigen {
                report = with_spectra(report, &p)?;
            }
            Ok(Outcome {
                report,
                summary,
                code,
            })
        }
        Command::Search {
            instance,
            weights,
            sweep,
            x0,
            seek_psd_weights: seek,
        } => {
            let p = load(instance, &cfg)?;
            let x0 = match x0 {
                Some(s) => parse_vector(s)?,
                None => default_start(&p),
            };
            let lattice = if let Some(w) = weights {
                vec![parse_vector(w)?]
            } else if *seek {
                match seek_psd_weights(&p, &x0, &cfg)? {
                    Some(pw) => vec![pw.weights],
                    None => {
                        return Ok(Outcome {
                            report: Value::Array(Vec::new()),
                            summary: "search: no weights make the scalarized problem convex at x0"
                                .into(),
                            code: EXIT_INCONCLUSIVE,
                        })
                    }
                }
            } else {
                let divisions = sweep.unwrap_or(1).max(1);
                if sweep.is_some() {
                    simplex_lattice(p.num_objectives(), divisions)
                } else {
                    let m = p.num_objectives();
                    vec![Vector::from_element(m, 1.0 / m as f64)]
                }
            };
            if lattice.is_empty() {
                return Err(Error::Config(format!(
                    "sweep divisions must be at least the number of objectives ({})",
                    p.num_objectives()
                )));
            }
            let mut entries = Vec::with_capacity(lattice.len());
            let mut converged = 0usize;
            for w in &lattice {
                let outcome = dinkelbach_search(&p, w, &x0, &cfg)?;
                let point = outcome.point().clone();
                let ratios = p.evaluate_ratios(&point)?;
                let ok = matches!(outcome, DinkelbachOutcome::Converged { .. });
                let certified = certify_point_with_tau(&p, &point, &cfg, None)?.is_certified();
                converged += ok as usize;
                entries.push(json!({
                    "weights": w.as_slice(),
                    "point": point.as_slice(),
                    "ratios": ratios.as_slice(),
                    "converged": ok,
                    "certified": certified,
                    "outcome": to_value(&outcome)?,
                }));
            }
            let summary = format!("search: {converged}/{} runs converged", entries.len());
            Ok(Outcome {
                report: Value::Array(entries),
                summary,
                code: EXIT_OK,
            })
        }
        Command::DualCheck {
            instance,
            primal,
            dual_u,
            tau,
            lambda,
            roundtrip,
            point,
        } => {
            let p = load(instance, &cfg)?;
            if *roundtrip {
                let x = parse_vector(point.as_deref().unwrap_or_default())?;
                return roundtrip_report(&p, &x, &cfg);
            }
            let field = |s: &Option<String>| parse_vector(s.as_deref().unwrap_or_default());
            let x = field(primal)?;
            let dp = DualPoint::new(&p, field(dual_u)?, field(tau)?, field(lambda)?)?;
            let feasibility = dual_feasible(&p, &dp, &cfg.tol);
            let report = json!({
                "dual_point": to_value(&dp)?,
                "dual_feasibility": to_value(&feasibility)?,
                "weak": hypothesis(weak_duality_check(&p, &x, &dp, &cfg))?,
                "converse": hypothesis(converse_duality_check(&p, &dp, None, &cfg))?,
                "strict_converse": hypothesis(strict_converse_check(&p, &x, &dp, &cfg))?,
            });
            let summary = format!(
                "dual-check: dual point {}, weak duality {}",
                if feasibility.is_feasible() {
                    "feasible"
                } else {
                    "infeasible"
                },
                report["weak"]["status"].as_str().unwrap_or("?")
            );
            Ok(Outcome {
                report,
                summary,
                code: EXIT_OK,
            })
        }
        Command::Oracle {
            instance,
            point,
            front,
            step,
        } => {
            let p = load(instance, &cfg)?;
            if *front {
                let pts = approximate_pareto_front(&p, *step, cfg.tol.dominance, &cfg)?;
                let summary = format!("oracle: {} undominated grid points", pts.len());
                return Ok(Outcome {
                    report: to_value(&pts)?,
                    summary,
                    code: EXIT_OK,
                });
            }
            let x = parse_vector(point.as_deref().unwrap_or_default())?;
            let r = dominance_check(&p, &x, *step, cfg.tol.dominance, &cfg)?;
            let summary = format!(
                "oracle: {} after {} grid points",
                if r.dominated {
                    "dominated"
                } else {
                    "not dominated"
                },
                r.points_checked
            );
            Ok(Outcome {
                report: to_value(&r)?,
                summary,
                code: EXIT_OK,
            })
        }
    }
}

fn roundtrip_report(p: &ProblemInstance, x: &Vector, cfg: &RunConfig) -> Result<Outcome, Error> {
    let search = find_multipliers(p, x, cfg)?;
    let Some(mp) = search.found() else {
        return Ok(Outcome {
            report: json!({ "multipliers": to_value(&search)? }),
            summary: "dual-check: no multipliers at the point".into(),
            code: EXIT_NOT_KKT,
        });
    };
    let strong = strong_duality_construct(p, x, mp, cfg)?;
    let mut report = json!({
        "multipliers": to_value(&search)?,
        "strong": to_value(&strong)?,
    });
    let summary = match &strong {
        StrongDuality::Dual { dual, .. } => {
            report["converse"] = hypothesis(converse_duality_check(p, dual, None, cfg))?;
            report["strict_converse"] = hypothesis(strict_converse_check(p, x, dual, cfg))?;
            "dual-check: dual point constructed".to_string()
        }
        StrongDuality::NotConstructible { reason } => {
            format!("dual-check: no dual point ({reason})")
        }
    };
    Ok(Outcome {
        report,
        summary,
        code: EXIT_OK,
    })
}
