//! Command-line front end.
//!
//! Every JSON report is wrapped as `{"config": ..., "report": ...}` with the
//! resolved configuration (angles in radians), so a run can be repeated from
//! its own output. Exit status is 0 on success, 2 when a verification fails
//! and 1 on usage or input errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bounds::{
    random_povm_search, region_data, sigma_min, write_region_csv, DEFAULT_REGION_GRID, DEFAULT_REGION_N_MAX,
};
use crate::circuit::{min_n, solve_params, DEFAULT_SOLVER_TOL};
use crate::ontology::{
    load_model, max_deviation, posterior_response, sample_overlap_region, DEFAULT_MC_SAMPLES,
};
use crate::qcore::BitString;
use crate::verifier::{twobox_check, verify_nogo_with, VerifyOptions, DEFAULT_SEED, DEFAULT_VERIFY_TOL};
use crate::{Error, Result};

/// Environment variable overriding the default seed.
pub const SEED_ENV: &str = "ONTIC_SEED";

/// Random search may not undercut the parametric minimum by more than this.
pub const SEARCH_UNDERCUT_TOL: f64 = 1e-6;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFICATION_FAILED: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Parser, Serialize)]
#[command(name = "ontic", version, about = "No-go measurement construction and overlap bounds for ontological models")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Read angles in degrees instead of radians (output is always radians).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub degrees: bool,

    /// Output format; `regions` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write output here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Smallest number of systems for the preparation angle.
    MinN {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
    },
    /// Solve for alpha and beta.
    Params {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        /// Defaults to min-n.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SOLVER_TOL)]
        tol: f64,
    },
    /// Simulate every product preparation and check its forbidden outcome.
    Verify {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_VERIFY_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_SOLVER_TOL)]
        solver_tol: f64,
    },
    /// Check the explicit two-qubit basis for |0> and |+>.
    Twobox,
    /// Lower bound 1 - 2 eps^(1/n) on the total variation distance.
    Bound {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        n: usize,
    },
    /// Load a model file and measure its deviation from quantum predictions.
    ModelCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        n: Option<usize>,
        /// Monte Carlo samples for the overlap-region frequency (0 skips it).
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        samples: usize,
    },
    /// Overlap upper bounds versus trace distance.
    Regions {
        #[arg(long, default_value_t = DEFAULT_REGION_N_MAX)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_REGION_GRID)]
        grid: usize,
    },
    /// Minimum of the discrimination objective over the circuit family.
    Sigma {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        n: usize,
        /// Random projective measurements to sample as a cross-check (n <= 3).
        #[arg(long, default_value_t = 0)]
        trials: usize,
    },
}

impl Command {
    fn theta_mut(&mut self) -> Option<&mut f64> {
        match self {
            Command::MinN { theta }
            | Command::Params { theta, .. }
            | Command::Verify { theta, .. }
            | Command::ModelCheck { theta, .. }
            | Command::Sigma { theta, .. } => Some(theta),
            Command::Twobox | Command::Bound { .. } | Command::Regions { .. } => None,
        }
    }
}

impl RunConfig {
    /// Converts angles to radians and fills the per-command format default.
    pub fn resolved(mut self) -> Self {
        if self.degrees {
            if let Some(theta) = self.command.theta_mut() {
                *theta = theta.to_radians();
            }
            self.degrees = false;
        }
        if self.format.is_none() {
            self.format = Some(match self.command {
                Command::Regions { .. } => Format::Csv,
                _ => Format::Json,
            });
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub status: i32,
    pub output: String,
}

fn json_report<T: Serialize>(config: &RunConfig, report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&json!({ "config": config, "report": report }))?;
    s.push('\n');
    Ok(s)
}

fn n_or_min(theta: f64, n: Option<usize>) -> Result<usize> {
    match n {
        Some(n) => Ok(n),
        None => min_n(theta),
    }
}

fn status(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_VERIFICATION_FAILED
    }
}

fn csv_unsupported(command: &str) -> Error {
    Error::Domain(format!("csv output is not available for `{command}`; use --format json"))
}

/// Executes a parsed configuration.
pub fn run(config: RunConfig) -> Result<RunOutcome> {
    let config = config.resolved();
    let format = config.format.expect("resolved");
    let ok = |output| Ok(RunOutcome { status: EXIT_OK, output });

    match &config.command {
        Command::MinN { theta } => {
            if format == Format::Csv {
                return Err(csv_unsupported("min-n"));
            }
            let n = min_n(*theta)?;
            ok(json_report(&config, &json!({ "theta": theta, "min_n": n }))?)
        }
        Command::Params { theta, n, tol } => {
            if format == Format::Csv {
                return Err(csv_unsupported("params"));
            }
            let n = n_or_min(*theta, *n)?;
            let s = solve_params(*theta, n, *tol)?;
            let report = json!({
                "theta": theta,
                "n": n,
                "alpha": s.params.alpha,
                "beta": s.params.beta,
                "residual": s.params.residual(),
                "beta_residual": s.beta_residual,
                "beta_bracket": s.bracket,
                "bisection_iterations": s.iterations,
                "analytic_beta": s.analytic_beta,
            });
            ok(json_report(&config, &report)?)
        }
        Command::Verify { theta, n, tol, solver_tol } => {
            let n = n_or_min(*theta, *n)?;
            let opts = VerifyOptions { tol: *tol, solver_tol: *solver_tol, seed: config.seed, ..Default::default() };
            let report = verify_nogo_with(*theta, n, &opts)?;
            let output = match format {
                Format::Json => json_report(&config, &report)?,
                Format::Csv => {
                    let mut out = String::from("preparation,outcome,probability\n");
                    for r in &report.per_preparation {
                        out.push_str(&format!("{},{},{:e}\n", r.preparation, r.outcome, r.probability));
                    }
                    out
                }
            };
            Ok(RunOutcome { status: status(report.passed), output })
        }
        Command::Twobox => {
            if format == Format::Csv {
                return Err(csv_unsupported("twobox"));
            }
            let report = twobox_check()?;
            Ok(RunOutcome { status: status(report.passed), output: json_report(&config, &report)? })
        }
        Command::Bound { epsilon, n } => {
            if format == Format::Csv {
                return Err(csv_unsupported("bound"));
            }
            if !(0.0..=1.0).contains(epsilon) {
                return Err(Error::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
            }
            if *n == 0 {
                return Err(Error::Domain("n must be at least 1".into()));
            }
            let root = epsilon.powf(1.0 / *n as f64);
            let report = json!({
                "epsilon": epsilon,
                "n": n,
                "D_lower": 1.0 - 2.0 * root,
                "omega_upper": (2.0 * root).min(1.0),
            });
            ok(json_report(&config, &report)?)
        }
        Command::ModelCheck { model, theta, n, samples } => {
            if format == Format::Csv {
                return Err(csv_unsupported("model-check"));
            }
            let (ont, resp) = load_model(model).map_err(|e| match e {
                Error::Io(err) => Error::Domain(format!("cannot read model file {}: {err}", model.display())),
                Error::Parse(err) => Error::Domain(format!("malformed model file {}: {err}", model.display())),
                other => other,
            })?;
            let n = n_or_min(*theta, *n)?;
            let params = solve_params(*theta, n, DEFAULT_SOLVER_TOL)?.params;
            let (resp, response_source) = match resp {
                Some(r) => (r, "file"),
                None => (posterior_response(&ont, &params)?, "posterior"),
            };
            let deviation = max_deviation(&ont, &resp, &params)?;
            let mc = if *samples > 0 {
                Some(sample_overlap_region(&ont, &BitString::from_index(n, 0)?, *samples, config.seed)?)
            } else {
                None
            };
            let report = json!({
                "response_source": response_source,
                "deviation": deviation,
                "overlap_region_sampling": mc,
            });
            Ok(RunOutcome {
                status: status(deviation.bound_holds && deviation.chain_holds),
                output: json_report(&config, &report)?,
            })
        }
        Command::Regions { n_max, grid } => {
            let points = region_data(*n_max, *grid)?;
            let output = match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_region_csv(&points, &mut buf)?;
                    String::from_utf8(buf).expect("ascii csv")
                }
                Format::Json => json_report(&config, &points)?,
            };
            ok(output)
        }
        Command::Sigma { theta, n, trials } => {
            if format == Format::Csv {
                return Err(csv_unsupported("sigma"));
            }
            let s = sigma_min(*theta, *n)?;
            let search = if *trials > 0 { Some(random_povm_search(*theta, *n, *trials, config.seed)?) } else { None };
            let undercut = search.is_some_and(|r| r.min_sigma < s.sigma - SEARCH_UNDERCUT_TOL);
            let report = json!({ "sigma_min": s, "random_search": search });
            Ok(RunOutcome { status: status(!undercut), output: json_report(&config, &report)? })
        }
    }
}

/// Parses `args`, runs, writes the output and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let output_path = config.output.clone();
    match run(config) {
        Ok(outcome) => {
            let written = match &output_path {
                Some(path) => fs::write(path, &outcome.output),
                None => std::io::stdout().write_all(outcome.output.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return EXIT_USAGE;
            }
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
