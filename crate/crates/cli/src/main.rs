// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qrecur::io::{
    class_name, configure_threads_from_env, emit, parse_matrix, parse_spec, resolve, run_system, to_json_string,
    AnalysisOptions, AnalysisReport, Format, Section, System,
};
use qrecur::models::list_models;
use qrecur::numerics::ComplexMatrix;
use qrecur::stability::{spectral_stability_test, TimeMode, PERIPHERAL_TOL};
use qrecur::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "qrecur", version, about = "Recurrence, stability and decomposition analyses of quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a system spec.
    Analyze {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Correlation sequences and recurrence sets for chosen observables.
    Recurrence {
        spec: PathBuf,
        /// Spec observable name, matrix unit `E_i_j`, or a JSON matrix file.
        #[arg(long = "observable", value_name = "NAME|E_i_j|FILE")]
        observables: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Stability splitting of a spec, or spectral test of a bare generator.
    Stability {
        #[arg(required_unless_present = "generator", conflicts_with = "generator")]
        spec: Option<PathBuf>,
        /// JSON matrix file holding a generator or single-step map.
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Discrete, requires = "generator")]
        mode: Mode,
        #[command(flatten)]
        common: Common,
    },
    /// Reversible/decaying decomposition and the obstruction check.
    Decompose {
        spec: PathBuf,
        #[arg(long)]
        horizon: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Built-in models.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Subcommand)]
enum ModelsAction {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Continuous,
    Discrete,
}

#[derive(Args)]
struct Common {
    /// Directory for report.json and CSV series; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    steps: u64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record per-stage wall-clock time (makes output nondeterministic).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            steps: self.steps,
            epsilon: self.epsilon,
            tol: self.tol,
            seed: self.seed,
            include_timing: self.timing,
            ..Default::default()
        }
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::InvalidSpec => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Precondition => 3,
    }
}

fn load_system(path: &Path) -> Result<System, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvariantViolation {
        path: "$".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    resolve(&parse_spec(&text)?)
}

fn matrix_unit(name: &str, d: usize) -> Option<ComplexMatrix> {
    let rest = name.strip_prefix("E_")?;
    let (i, j) = match rest.split_once('_') {
        Some((i, j)) => (i.parse().ok()?, j.parse().ok()?),
        None if rest.len() == 2 => (rest[..1].parse().ok()?, rest[1..].parse().ok()?),
        None => return None,
    };
    (i < d && j < d).then(|| ComplexMatrix::unit(d, i, j))
}

fn observable(sys: &System, arg: &str) -> Result<(String, ComplexMatrix), Error> {
    if let Some((name, m)) = sys.observables.iter().find(|(n, _)| n == arg) {
        return Ok((name.clone(), m.clone()));
    }
    let d = sys.op.dim();
    if let Some(m) = matrix_unit(arg, d) {
        return Ok((arg.to_string(), m));
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return Err(Error::InvariantViolation {
            path: "--observable".into(),
            message: format!("'{arg}' is not a spec observable, a matrix unit below {d}, or a readable file"),
        });
    }
    let text = fs::read_to_string(path)?;
    let m = parse_matrix(&text).map_err(|e| match e {
        Error::Parse { path: p, message } | Error::InvariantViolation { path: p, message } => {
            Error::InvariantViolation { path: format!("{arg}:{p}"), message }
        }
        other => other,
    })?;
    if m.rows() != d {
        return Err(Error::InvariantViolation {
            path: arg.into(),
            message: format!("expected a {d}x{d} matrix, found {}x{}", m.rows(), m.cols()),
        });
    }
    let name = path.file_stem().map_or(arg.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, m))
}

fn write_report(report: &AnalysisReport, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(dir) => {
            emit(report, Format::Json, dir)?;
            emit(report, Format::CsvSeries, dir)?;
        }
        None => print!("{}", to_json_string(report)?),
    }
    Ok(())
}

fn finish(report: &AnalysisReport, out: Option<&Path>) -> Result<u8, Error> {
    write_report(report, out)?;
    for f in &report.failures {
        eprintln!("qrecur: stage {} failed ({}, {}): {}", f.stage, f.kind, f.class, f.message);
    }
    Ok(report.failure_class().map_or(0, exit_code))
}

fn run(cli: Cli) -> Result<u8, Error> {
    configure_threads_from_env()?;
    match cli.command {
        Command::Analyze { spec, common, horizon } => {
            let sys = load_system(&spec)?;
            let opts = AnalysisOptions { horizon, ..common.options() };
            opts.validate()?;
            finish(&run_system(&sys, &opts), common.out.as_deref())
        }
        Command::Recurrence { spec, observables, common } => {
            let mut sys = load_system(&spec)?;
            let mut opts = AnalysisOptions { only: Some(Section::Recurrence), ..common.options() };
            if !observables.is_empty() {
                sys.observables = observables.iter().map(|a| observable(&sys, a)).collect::<Result<_, _>>()?;
                opts.default_observables = false;
            }
            opts.validate()?;
            finish(&run_system(&sys, &opts), common.out.as_deref())
        }
        Command::Stability { spec: Some(spec), common, .. } => {
            let sys = load_system(&spec)?;
            let opts = AnalysisOptions { only: Some(Section::Stability), ..common.options() };
            opts.validate()?;
            finish(&run_system(&sys, &opts), common.out.as_deref())
        }
        Command::Stability { generator, mode, common, .. } => {
            let path = generator.expect("clap enforces spec or generator");
            let text = fs::read_to_string(&path)?;
            let m = parse_matrix(&text)?;
            let mode = match mode {
                Mode::Continuous => TimeMode::Continuous,
                Mode::Discrete => TimeMode::Discrete,
            };
            let report = spectral_stability_test(&m, mode, PERIPHERAL_TOL)?;
            let json = to_json_string(&report)?;
            match common.out.as_deref() {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("stability.json"), json)?;
                }
                None => print!("{json}"),
            }
            Ok(0)
        }
        Command::Decompose { spec, horizon, common } => {
            let sys = load_system(&spec)?;
            let opts = AnalysisOptions { only: Some(Section::Decomposition), horizon, ..common.options() };
            opts.validate()?;
            finish(&run_system(&sys, &opts), common.out.as_deref())
        }
        Command::Models { action: ModelsAction::List } => {
            print!("{}", to_json_string(&list_models())?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the invalid-input code
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qrecur: {} ({}): {e}", e.kind(), class_name(e.class()));
            ExitCode::from(exit_code(e.class()))
        }
    }
}
