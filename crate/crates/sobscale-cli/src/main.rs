//! The `sobscale` binary: parses flags, loads JSON payloads, and hands a
//! validated configuration to the library driver.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use sobscale::pdo::Symbol;
use sobscale::ro::{PsiExpr, RoFunction};
use sobscale_cli::{
    execute, Command, InterpJob, OutputFormat, Preset, RunConfig, EXIT_CONFIG_ERROR,
};

#[derive(Parser)]
#[command(
    name = "sobscale",
    version,
    about = "Verification harness for weighted square-summable scales on integer lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// Lattice dimension (1 to 3)
    #[arg(long, default_value_t = 1)]
    n: usize,

    /// Box radius N; the domain is the cube of side 2N + 1
    #[arg(long = "N", value_name = "RADIUS", default_value_t = 8)]
    radius: i64,

    /// Quadrature nodes per axis, odd and at least 2(2N + 1) - 1; defaults
    /// to 4N + 3. Applies to the commands that work on a single box.
    #[arg(long = "M", value_name = "POINTS")]
    grid_points: Option<usize>,

    /// Seed for the counter-based random generator
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Number of random draws (command-specific default)
    #[arg(long)]
    trials: Option<usize>,

    /// Report file; without it the report goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report representation
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Ratio bounds, variation indices, and parameter round trips for a
    /// weight generator
    RoAnalyze {
        /// Weight generator as JSON, inline or a file path
        #[arg(long)]
        phi: String,
        #[command(flatten)]
        common: Common,
    },

    /// Interpolation norm identities: power-scale reproduction, quadratic
    /// composition, or reiteration
    VerifyInterp {
        /// Weight generator for the power-scale identity
        #[arg(long)]
        phi: Option<String>,
        /// Lower exponent (power-scale and reiteration forms)
        #[arg(long)]
        s0: Option<f64>,
        /// Upper exponent (power-scale and reiteration forms)
        #[arg(long)]
        s1: Option<f64>,
        /// First generator of the interpolation couple
        #[arg(long)]
        phi0: Option<String>,
        /// Second generator of the interpolation couple
        #[arg(long)]
        phi1: Option<String>,
        /// Interpolation parameter as JSON
        #[arg(long)]
        psi: Option<String>,
        /// First-step parameter for reiteration
        #[arg(long)]
        lambda: Option<String>,
        /// Second-step parameter for reiteration
        #[arg(long)]
        eta: Option<String>,
        #[command(flatten)]
        common: Common,
    },

    /// Pairing bound, norming functional, and maximizer checks between a
    /// space and its dual
    VerifyDuality {
        /// Exponent of the primal space
        #[arg(long, default_value_t = 1.5)]
        s: f64,
        /// Optional weight generator; the pairing is then checked between
        /// the generated space and its reciprocal-weight dual
        #[arg(long)]
        phi: Option<String>,
        #[command(flatten)]
        common: Common,
    },

    /// Apply a symbol to a seeded random function and cross-check against
    /// the assembled matrix
    PdoApply {
        /// Symbol as JSON, inline or a file path
        #[arg(long)]
        symbol: String,
        #[command(flatten)]
        common: Common,
    },

    /// Class constants, decay slopes, and the ellipticity screen of a symbol
    SymbolCheck {
        /// Symbol as JSON, inline or a file path
        #[arg(long)]
        symbol: String,
        /// Largest difference order in k
        #[arg(long, default_value_t = 1)]
        max_alpha: usize,
        /// Largest derivative order in x
        #[arg(long, default_value_t = 1)]
        max_beta: usize,
        #[command(flatten)]
        common: Common,
    },

    /// Weighted operator norms of a symbol across box radii
    MappingScan {
        /// Symbol as JSON, inline or a file path
        #[arg(long)]
        symbol: String,
        /// Weight generator defining the norms
        #[arg(long)]
        phi: String,
        /// Comma-separated strictly increasing box radii
        #[arg(long, value_delimiter = ',', default_values_t = [4i64, 8, 16])]
        radii: Vec<i64>,
        #[command(flatten)]
        common: Common,
    },

    /// Kernel and cokernel diagnostics of a symbol on a truncation
    Fredholm {
        /// Symbol as JSON, inline or a file path
        #[arg(long)]
        symbol: String,
        /// Exponent of the source space
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        /// Singular-value threshold as a fraction of the largest one
        #[arg(long)]
        tolerance: Option<f64>,
        #[command(flatten)]
        common: Common,
    },

    /// Norm equivalence bands of the operator scale built from an order-1
    /// symbol
    AScale {
        /// Symbol as JSON, inline or a file path
        #[arg(long)]
        symbol: String,
        /// Weight generator defining the reference norms
        #[arg(long)]
        phi: String,
        /// Comma-separated strictly increasing box radii
        #[arg(long, value_delimiter = ',', default_values_t = [4i64, 8, 16])]
        radii: Vec<i64>,
        #[command(flatten)]
        common: Common,
    },

    /// Run a named preset suite
    Suite {
        /// One of: theorem2, theorem3, theorem4, theorem5,
        /// theorem6-surrogate, theorem7, appendix-duality
        #[arg(long)]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Accepts either inline JSON (first non-space byte `{`) or a file path.
fn load_payload(raw: &str) -> Result<String, String> {
    let trimmed = raw.trim_start();
    if trimmed.starts_with('{') {
        Ok(raw.to_string())
    } else {
        fs::read_to_string(raw)
            .map_err(|e| format!("cannot read {raw} (expected inline JSON or a file path): {e}"))
    }
}

fn parse_phi(raw: &str) -> Result<RoFunction, String> {
    let text = load_payload(raw)?;
    RoFunction::from_json(&text).map_err(|e| e.to_string())
}

fn parse_symbol(raw: &str) -> Result<Symbol, String> {
    let text = load_payload(raw)?;
    Symbol::from_json(&text).map_err(|e| e.to_string())
}

fn parse_psi(raw: &str) -> Result<PsiExpr, String> {
    let text = load_payload(raw)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| format!("parameter is not valid JSON: {e}"))?;
    PsiExpr::from_json_value(&value).map_err(|e| e.to_string())
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("SOBSCALE_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("SOBSCALE_THREADS is not readable: {e}")),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(format!(
                "SOBSCALE_THREADS must be a positive integer, got {raw:?}"
            )),
        },
    }
}

fn interp_job(
    phi: Option<String>,
    s0: Option<f64>,
    s1: Option<f64>,
    phi0: Option<String>,
    phi1: Option<String>,
    psi: Option<String>,
    lambda: Option<String>,
    eta: Option<String>,
) -> Result<InterpJob, String> {
    match (phi, phi0, phi1, psi, lambda, eta) {
        (Some(phi), None, None, None, None, None) => {
            let (s0, s1) = match (s0, s1) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err("the power-scale form needs --s0 and --s1".into()),
            };
            Ok(InterpJob::Exponents {
                phi: parse_phi(&phi)?,
                s0,
                s1,
            })
        }
        (None, Some(phi0), Some(phi1), Some(psi), None, None) => Ok(InterpJob::Composition {
            phi0: parse_phi(&phi0)?,
            phi1: parse_phi(&phi1)?,
            psi: parse_psi(&psi)?,
        }),
        (None, None, None, Some(psi), Some(lambda), Some(eta)) => {
            let (s0, s1) = match (s0, s1) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err("the reiteration form needs --s0 and --s1".into()),
            };
            Ok(InterpJob::Reiteration {
                s0,
                s1,
                lambda: parse_psi(&lambda)?,
                eta: parse_psi(&eta)?,
                psi: parse_psi(&psi)?,
            })
        }
        _ => Err("verify-interp takes one of: --phi with --s0/--s1; \
                  --phi0/--phi1/--psi; or --s0/--s1/--lambda/--eta/--psi"
            .into()),
    }
}

fn build_config(cli: Cli) -> Result<RunConfig, String> {
    let (command, common) = match cli.command {
        Cmd::RoAnalyze { phi, common } => (
            Command::RoAnalyze {
                phi: parse_phi(&phi)?,
            },
            common,
        ),
        Cmd::VerifyInterp {
            phi,
            s0,
            s1,
            phi0,
            phi1,
            psi,
            lambda,
            eta,
            common,
        } => (
            Command::VerifyInterp {
                job: interp_job(phi, s0, s1, phi0, phi1, psi, lambda, eta)?,
            },
            common,
        ),
        Cmd::VerifyDuality { s, phi, common } => (
            Command::VerifyDuality {
                s,
                phi: phi.as_deref().map(parse_phi).transpose()?,
            },
            common,
        ),
        Cmd::PdoApply { symbol, common } => (
            Command::PdoApply {
                symbol: parse_symbol(&symbol)?,
            },
            common,
        ),
        Cmd::SymbolCheck {
            symbol,
            max_alpha,
            max_beta,
            common,
        } => (
            Command::SymbolCheck {
                symbol: parse_symbol(&symbol)?,
                max_alpha,
                max_beta,
            },
            common,
        ),
        Cmd::MappingScan {
            symbol,
            phi,
            radii,
            common,
        } => (
            Command::MappingScan {
                symbol: parse_symbol(&symbol)?,
                phi: parse_phi(&phi)?,
                radii,
            },
            common,
        ),
        Cmd::Fredholm {
            symbol,
            s,
            tolerance,
            common,
        } => (
            Command::Fredholm {
                symbol: parse_symbol(&symbol)?,
                s,
                tolerance,
            },
            common,
        ),
        Cmd::AScale {
            symbol,
            phi,
            radii,
            common,
        } => (
            Command::AScale {
                symbol: parse_symbol(&symbol)?,
                phi: parse_phi(&phi)?,
                radii,
            },
            common,
        ),
        Cmd::Suite { preset, common } => {
            let preset = Preset::from_name(&preset).ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset {preset:?}; valid presets: {}", names.join(", "))
            })?;
            (Command::Suite { preset }, common)
        }
    };
    Ok(RunConfig {
        command,
        n: common.n,
        radius: common.radius,
        grid_points: common.grid_points,
        seed: common.seed,
        trials: common.trials,
        out: common.out,
        format: common.format.into(),
        threads: threads_from_env()?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match build_config(cli) {
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG_ERROR as u8)
        }
        Ok(config) => ExitCode::from(execute(&config) as u8),
    }
}
