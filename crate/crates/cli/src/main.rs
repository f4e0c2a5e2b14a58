//! Batch front-end: build, refine, check and analyse G-spline surfaces.

use clap::{Args, Parser, Subcommand};
use gspline::archive;
use gspline::check::check_surface;
use gspline::mesh::{load_obj_file, write_obj_file};
use gspline::quality::{min_invalid_thickness, DEFAULT_TOL, DEFAULT_T_HI, DEFAULT_T_LO};
use gspline::refine::refine_n;
use gspline::solve::{convergence_study, membrane_eigen, ConvergenceReport, Manufactured, MassKind};
use gspline::{build, ControlNet, Error, GSplineSurface, Variant};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_ENV: &str = "GSPLINE_THREADS";

#[derive(Parser)]
#[command(name = "gspline", version, about = "G-spline surfaces on unstructured quadrilateral control nets")]
struct Cli {
    /// Worker threads (default: hardware count; GSPLINE_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surface from an OBJ control net and write a surface archive.
    Build {
        input: PathBuf,
        #[arg(long, default_value = "g1p")]
        variant: Variant,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Refine a control net; archives are rebuilt with their own construction.
    Refine {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Minimum invalid shell thickness.
    Quality {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_T_LO)]
        t_lo: f64,
        #[arg(long, default_value_t = DEFAULT_T_HI)]
        t_hi: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Also write the CSV header and row here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Poisson convergence study with a manufactured solution on the unit square.
    Poisson {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Defaults to the archive's construction, or g1p for OBJ input.
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long, default_value = "sine", value_parser = ["sine", "linear_x"])]
        problem: String,
        #[command(flatten)]
        tables: Tables,
    },
    /// Smallest membrane eigenvalues against the unit-square spectrum.
    Eigen {
        input: PathBuf,
        #[arg(short, long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value = "consistent")]
        mass: MassKind,
    },
    /// Continuity, partition-of-unity and rank diagnostics.
    Check {
        input: PathBuf,
        /// Skip the dense collocation SVD.
        #[arg(long)]
        no_rank: bool,
        /// Exit with the numeric-failure code when a check fails.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct Tables {
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format(_) | Error::Json(_) | Error::Io(_) | Error::Domain(_) => 2,
        Error::Topology(_) | Error::Empty => 3,
        Error::InfeasibleConstraint { .. } | Error::DegenerateBasis { .. } => 4,
        _ => 5,
    }
}

fn is_archive(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

enum Input {
    Net(ControlNet),
    Surface(GSplineSurface),
}

fn read_input(path: &Path) -> gspline::Result<Input> {
    if is_archive(path) {
        archive::load(path).map(Input::Surface)
    } else {
        load_obj_file(path).map(Input::Net)
    }
}

fn read_surface(path: &Path) -> gspline::Result<GSplineSurface> {
    match read_input(path)? {
        Input::Surface(s) => Ok(s),
        Input::Net(_) => Err(Error::Format(format!("{} is not a surface archive", path.display()))),
    }
}

fn print_json<T: Serialize>(value: &T) -> gspline::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_lines(path: &Path, header: &str, rows: &[String]) -> gspline::Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct BuildSummary {
    variant: Variant,
    elements: usize,
    basis_functions: usize,
    extraordinary: Vec<usize>,
    solves: usize,
    max_equality_residual: f64,
    output: PathBuf,
}

#[derive(Serialize)]
struct RefineSummary {
    levels: Vec<gspline::refine::LevelCounts>,
    output: PathBuf,
}

fn run(cmd: Command) -> gspline::Result<bool> {
    match cmd {
        Command::Build { input, variant, output } => {
            let net = load_obj_file(&input)?;
            let s = build(&net, variant)?;
            archive::save(&s, &output)?;
            print_json(&BuildSummary {
                variant,
                elements: s.n_elements(),
                basis_functions: s.n_basis(),
                extraordinary: s.cnet().extraordinary_vertices(),
                solves: s.diagnostics.len(),
                max_equality_residual: s.diagnostics.iter().map(|d| d.equality_residual).fold(0.0, f64::max),
                output,
            })?;
        }
        Command::Refine { input, levels, output } => {
            let (net, variant) = match read_input(&input)? {
                Input::Net(net) => (net, None),
                Input::Surface(s) => (s.net, Some(s.variant)),
            };
            let (fine, counts) = refine_n(&net, levels)?;
            match variant {
                Some(v) if is_archive(&output) => archive::save(&build(&fine, v)?, &output)?,
                None if is_archive(&output) => {
                    return Err(Error::Format("OBJ input refines to OBJ output; use build for archives".into()));
                }
                _ => write_obj_file(&fine, &output)?,
            }
            print_json(&RefineSummary { levels: counts, output })?;
        }
        Command::Quality { input, t_lo, t_hi, tol, csv } => {
            let s = read_surface(&input)?;
            let report = min_invalid_thickness(&s, t_lo, t_hi, tol)?;
            if let Some(path) = csv {
                write_lines(&path, gspline::quality::QualityReport::CSV_HEADER, &[report.csv_row()])?;
            }
            print_json(&report)?;
        }
        Command::Poisson { input, levels, variant, problem, tables } => {
            let (net, own) = match read_input(&input)? {
                Input::Net(net) => (net, Variant::G1P),
                Input::Surface(s) => (s.net, s.variant),
            };
            let problem = match problem.as_str() {
                "linear_x" => Manufactured::linear_x(),
                _ => Manufactured::sine(),
            };
            let report = convergence_study(&net, variant.unwrap_or(own), levels, &problem)?;
            if let Some(path) = tables.csv {
                write_lines(&path, ConvergenceReport::CSV_HEADER, &report.csv_rows())?;
            }
            if let Some(path) = tables.dat {
                std::fs::write(path, report.dat())?;
            }
            print_json(&report)?;
        }
        Command::Eigen { input, k, mass } => {
            let s = read_surface(&input)?;
            print_json(&membrane_eigen(&s, mass, k)?)?;
        }
        Command::Check { input, no_rank, strict } => {
            let s = read_surface(&input)?;
            let report = check_surface(&s, !no_rank)?;
            print_json(&report)?;
            return Ok(report.passed || !strict);
        }
    }
    Ok(true)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Format(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(flag),
    }
}

fn fail(e: &Error) -> ExitCode {
    let code = exit_code(e);
    let report = ErrorReport { error: e.kind(), message: e.to_string(), exit_code: code };
    eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    if let Some(n) = threads.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::Internal(e.to_string()));
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(5),
        Err(e) => fail(&e),
    }
}
