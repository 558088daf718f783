use std::path::{Path, PathBuf};

use symext::bounds::{find_cutoff_in, one_way_upper_bound_with, sweep_with, BoundPoint, CUTOFF_BRACKET};
use symext::extendibility::{best_extendible_decomposition_with, LAMBDA_TOL};
use symext::protocols::{CustomProtocol, ProtocolSpec};
use symext::Error;

use crate::config::{Command, OutputFormat, ProtocolChoice, RunConfig};
use crate::output;

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Solver trouble or data no state reproduces (exit 1).
    Solver(String),
    /// Bad flags, files or values (exit 2).
    Invalid(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Solver(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Solver(m) | Failure::Invalid(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Solver { .. } | Error::InconsistentData(_) | Error::NotBracketed { .. } => {
                Failure::Solver(err.to_string())
            }
            other => Failure::Invalid(other.to_string()),
        }
    }
}

/// What a successful run wants printed; files are already written.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub stdout: String,
    /// Set when some sweep points failed.
    pub partial_failure: Option<String>,
}

fn protocol_spec(cfg: &RunConfig, e: f64) -> Result<ProtocolSpec, Failure> {
    let spec = match &cfg.protocol {
        ProtocolChoice::Builtin(name) => ProtocolSpec::named(*name, e)?.with_source_constraint(cfg.source_constraint),
        ProtocolChoice::Custom(path) => ProtocolSpec::custom(CustomProtocol::from_path(path)?),
    };
    Ok(match cfg.direction {
        Some(d) => spec.with_direction(d),
        None => spec,
    })
}

fn check_writable(path: &Path) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if !parent.is_dir() {
        return Err(Failure::Invalid(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(Failure::Invalid(format!(
            "output path {} is a directory",
            path.display()
        )));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn render(points: &[BoundPoint], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => output::csv(points),
        OutputFormat::Json => output::json(points),
    }
}

fn emit(cfg: &RunConfig, body: String) -> Result<Report, Failure> {
    match cfg.output_path() {
        Some(path) => {
            write_file(&path, &body)?;
            if cfg.emit_gnuplot {
                let script = output::gnuplot_script(&path, &cfg.protocol.to_string());
                write_file(&path.with_extension("gp"), &script)?;
            }
            Ok(Report {
                stdout: String::new(),
                partial_failure: None,
            })
        }
        None => Ok(Report {
            stdout: body,
            partial_failure: None,
        }),
    }
}

/// Validates, computes, and writes outputs only once everything succeeded.
pub fn run(cfg: &RunConfig) -> Result<Report, Failure> {
    cfg.validate().map_err(Failure::Invalid)?;
    if let Some(path) = cfg.output_path() {
        check_writable(&path)?;
    }
    let settings = cfg.tolerances.solver_settings();
    let e = cfg.e.unwrap_or(0.0);

    match cfg.command {
        Command::Bound => {
            let spec = protocol_spec(cfg, e)?;
            let point = one_way_upper_bound_with(&spec, &settings)?;
            if let Some(msg) = failure_of(std::slice::from_ref(&point)) {
                return Err(Failure::Solver(msg));
            }
            emit(cfg, render(&[point], cfg.format))
        }
        Command::Sweep => {
            let template = protocol_spec(cfg, 0.0)?;
            let grid = cfg.grid.expect("validated").values();
            let points = match cfg.jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Failure::Invalid(format!("thread pool: {e}")))?
                    .install(|| sweep_with(&template, &grid, &settings)),
                None => sweep_with(&template, &grid, &settings),
            };
            let mut report = emit(cfg, render(&points, cfg.format))?;
            report.partial_failure = failure_of(&points);
            Ok(report)
        }
        Command::Cutoff => {
            let template = protocol_spec(cfg, 0.0)?;
            let cut = find_cutoff_in(&template, cfg.tolerances.cutoff, CUTOFF_BRACKET, &settings)?;
            let body = match cfg.format {
                OutputFormat::Csv => format!(
                    "cutoff,lower,upper,iterations\n{},{},{},{}\n",
                    output::format_sig10(cut.value),
                    output::format_sig10(cut.lower),
                    output::format_sig10(cut.upper),
                    cut.iterations
                ),
                OutputFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&cut).expect("cutoff serializes");
                    s.push('\n');
                    s
                }
            };
            emit(cfg, body)
        }
        Command::CheckExtendible => {
            let spec = protocol_spec(cfg, e)?;
            let class = spec.assemble()?.3;
            let result = best_extendible_decomposition_with(&class, &settings)?;
            let verdict = if result.lambda_max >= 1.0 - LAMBDA_TOL {
                "extendible"
            } else {
                "NOT extendible"
            };
            let body = match cfg.format {
                OutputFormat::Csv => format!("{verdict} (lambda_max = {})\n", output::format_sig10(result.lambda_max)),
                OutputFormat::Json => format!(
                    "{}\n",
                    serde_json::json!({
                        "extendible": verdict == "extendible",
                        "lambda_max": result.lambda_max,
                        "duality_gap": result.diagnostics.duality_gap,
                    })
                ),
            };
            emit(cfg, body)
        }
    }
}

fn failure_of(points: &[BoundPoint]) -> Option<String> {
    let failed: Vec<String> = points
        .iter()
        .filter(|p| !p.is_ok())
        .map(|p| format!("e = {}: {:?}", output::format_sig10(p.e), p.status))
        .collect();
    (!failed.is_empty()).then(|| format!("{} point(s) failed: {}", failed.len(), failed.join("; ")))
}
