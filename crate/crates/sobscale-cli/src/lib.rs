//! Configuration, validation, command drivers, preset suites, and report
//! emission for the `sobscale` binary.
//!
//! Every run produces a JSON report with a versioned schema, a config echo,
//! and one pass/fail entry per check. Reports are deterministic: identical
//! configuration and seed produce byte-identical report files. Wall-clock
//! metadata is written to a separate `<out>.meta.json` sidecar that is
//! excluded from that contract. The process exit code is the conjunction of
//! the check verdicts: 0 when all pass, 1 when any fails (the report is
//! still written), 2 for invalid configuration or input.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use sobscale::interp::{
    make_power_pair, verify_reiteration, verify_theorem2, verify_theorem3,
};
use sobscale::lattice::LatticeBox;
use sobscale::numeric::{linspace, pairwise_sum, rel_dev};
use sobscale::pdo::{
    ascale_build, fredholm_of_operator, fredholm_surrogate, mapping_norm_scan, pdo_apply,
    pdo_matrix, symbol_class_estimate, verify_theorem7, KFactor, Symbol, SymbolTerm, XMode,
};
use sobscale::rng::{random_lattice_function, trial_rng, GENERATOR_NAME};
use sobscale::ro::{
    check_pseudoconcave, estimate_matuszewska, make_interp_parameter_checked, reconstruct_phi,
    verify_ro, InterpParameter, PsiExpr, RoFunction,
};
use sobscale::spaces::{
    duality_pairing_bound, duality_pairing_bound_phi, duality_sup, h_phi_norm,
    linf_embedding_constant, WeightFamily,
};
use sobscale::torus::TorusGrid;

/// Report schema identifier, bumped on breaking layout changes.
pub const SCHEMA: &str = "sobscale/1";

/// Exit code when every check passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when the run completed but at least one check failed.
pub const EXIT_CHECK_FAILURE: i32 = 1;
/// Exit code for invalid configuration, unreadable input, or output errors.
pub const EXIT_CONFIG_ERROR: i32 = 2;

/// Relative tolerance for the identities that hold exactly up to rounding.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Relative residual allowed between direct application and the assembled
/// matrix acting on the same function.
pub const APPLY_RESIDUAL_TOLERANCE: f64 = 1e-13;
/// Largest matrix dimension for which the application cross-check assembles
/// the dense operator.
pub const DENSE_CROSS_CHECK_LIMIT: usize = 2048;
/// Bound demanded of the forward-difference operator norms in the preset
/// scan, and allowed relative variation between the two largest radii.
pub const DIFFERENCE_NORM_BOUND: f64 = 4.0;
pub const DIFFERENCE_STABLE_VARIATION: f64 = 0.05;
/// Window around the limiting embedding constant demanded at the largest
/// preset radius.
pub const EMBEDDING_WINDOW: f64 = 1e-3;
/// Number of norming-functional draws in the duality checks.
pub const NORMING_DRAWS: usize = 200;

/// Output representation for the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Named preset suites runnable with `suite --preset <name>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Theorem2,
    Theorem3,
    Theorem4,
    Theorem5,
    Theorem6Surrogate,
    Theorem7,
    AppendixDuality,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Theorem2,
        Preset::Theorem3,
        Preset::Theorem4,
        Preset::Theorem5,
        Preset::Theorem6Surrogate,
        Preset::Theorem7,
        Preset::AppendixDuality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Theorem2 => "theorem2",
            Preset::Theorem3 => "theorem3",
            Preset::Theorem4 => "theorem4",
            Preset::Theorem5 => "theorem5",
            Preset::Theorem6Surrogate => "theorem6-surrogate",
            Preset::Theorem7 => "theorem7",
            Preset::AppendixDuality => "appendix-duality",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.iter().copied().find(|p| p.name() == name)
    }

    fn default_trials(self) -> usize {
        match self {
            Preset::Theorem2 | Preset::Theorem3 | Preset::Theorem7 => 200,
            Preset::Theorem4 => 1000,
            Preset::Theorem5 | Preset::Theorem6Surrogate => 1,
            Preset::AppendixDuality => 10_000,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The interpolation identity a `verify-interp` run checks.
#[derive(Debug, Clone)]
pub enum InterpJob {
    /// Interpolating the power pair (s0, s1) with the parameter derived from
    /// phi reproduces the norm generated by phi.
    Exponents { phi: RoFunction, s0: f64, s1: f64 },
    /// Interpolating [H^phi0, H^phi1] by psi matches the norm generated by
    /// the composition phi0 * psi(phi1 / phi0).
    Composition {
        phi0: RoFunction,
        phi1: RoFunction,
        psi: PsiExpr,
    },
    /// Two-step interpolation of the power pair (s0, s1) by lambda and eta,
    /// recombined by psi, matches the one-step parameter lambda * psi(eta /
    /// lambda).
    Reiteration {
        s0: f64,
        s1: f64,
        lambda: PsiExpr,
        eta: PsiExpr,
        psi: PsiExpr,
    },
}

/// The verification a run executes, with its command-specific inputs.
#[derive(Debug, Clone)]
pub enum Command {
    RoAnalyze {
        phi: RoFunction,
    },
    VerifyInterp {
        job: InterpJob,
    },
    VerifyDuality {
        s: f64,
        phi: Option<RoFunction>,
    },
    PdoApply {
        symbol: Symbol,
    },
    SymbolCheck {
        symbol: Symbol,
        max_alpha: usize,
        max_beta: usize,
    },
    MappingScan {
        symbol: Symbol,
        phi: RoFunction,
        radii: Vec<i64>,
    },
    Fredholm {
        symbol: Symbol,
        s: f64,
        tolerance: Option<f64>,
    },
    AScale {
        symbol: Symbol,
        phi: RoFunction,
        radii: Vec<i64>,
    },
    Suite {
        preset: Preset,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::RoAnalyze { .. } => "ro-analyze",
            Command::VerifyInterp { .. } => "verify-interp",
            Command::VerifyDuality { .. } => "verify-duality",
            Command::PdoApply { .. } => "pdo-apply",
            Command::SymbolCheck { .. } => "symbol-check",
            Command::MappingScan { .. } => "mapping-scan",
            Command::Fredholm { .. } => "fredholm",
            Command::AScale { .. } => "a-scale",
            Command::Suite { .. } => "suite",
        }
    }

    fn default_trials(&self) -> usize {
        match self {
            Command::VerifyInterp { .. } => 200,
            Command::VerifyDuality { .. } => 1000,
            Command::AScale { .. } => 25,
            Command::Suite { preset } => preset.default_trials(),
            _ => 1,
        }
    }

    fn symbol(&self) -> Option<&Symbol> {
        match self {
            Command::PdoApply { symbol }
            | Command::SymbolCheck { symbol, .. }
            | Command::MappingScan { symbol, .. }
            | Command::Fredholm { symbol, .. }
            | Command::AScale { symbol, .. } => Some(symbol),
            _ => None,
        }
    }

    fn scan_radii(&self) -> Option<&[i64]> {
        match self {
            Command::MappingScan { radii, .. } | Command::AScale { radii, .. } => Some(radii),
            _ => None,
        }
    }
}

/// A fully resolved run: the command plus the shared numeric parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// Lattice dimension n.
    pub n: usize,
    /// Box radius N; the domain is the cube of side 2N + 1.
    pub radius: i64,
    /// Quadrature nodes per axis M; `None` selects the 4N + 3 default.
    pub grid_points: Option<usize>,
    pub seed: u64,
    /// Random draw count; `None` selects the command default.
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Parallelism cap from SOBSCALE_THREADS. Execution is sequential, so
    /// any positive cap is honored; the value never enters the report.
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Smallest admissible odd node count for the configured radius.
    pub fn nyquist_floor(&self) -> usize {
        2 * (2 * self.radius as usize + 1) - 1
    }

    /// Largest radius the dense-matrix paths allow in this dimension.
    pub fn radius_cap(n: usize) -> i64 {
        match n {
            2 => 32,
            3 => 8,
            _ => i64::MAX,
        }
    }

    /// Checks the shared invariants; the error text names the violated rule.
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=3).contains(&self.n) {
            return Err(format!("n must lie in [1, 3], got {}", self.n));
        }
        if self.radius < 1 {
            return Err(format!("N must be at least 1, got {}", self.radius));
        }
        let cap = Self::radius_cap(self.n);
        if self.radius > cap {
            return Err(format!(
                "N = {} exceeds the dense-matrix memory guard for n = {} (max N = {})",
                self.radius, self.n, cap
            ));
        }
        if let Some(m) = self.grid_points {
            let floor = self.nyquist_floor();
            if m % 2 == 0 {
                return Err(format!(
                    "M = {m} is even; the Nyquist rule requires M odd and M >= 2(2N + 1) - 1 = {floor}"
                ));
            }
            if m < floor {
                return Err(format!(
                    "M = {m} violates the Nyquist rule M >= 2(2N + 1) - 1 = {floor}"
                ));
            }
        }
        if let Some(symbol) = self.command.symbol() {
            if symbol.n() != self.n {
                return Err(format!(
                    "--symbol has dimension {} but n = {}",
                    symbol.n(),
                    self.n
                ));
            }
        }
        if let Some(radii) = self.command.scan_radii() {
            if radii.is_empty() {
                return Err("--radii must list at least one radius".into());
            }
            if radii.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("--radii must be strictly increasing, got {radii:?}"));
            }
            if radii[0] < 1 {
                return Err(format!("--radii must be positive, got {radii:?}"));
            }
            let largest = *radii.last().expect("radii is nonempty");
            if largest > cap {
                return Err(format!(
                    "--radii reaches {largest}, beyond the memory guard for n = {} (max N = {cap})",
                    self.n
                ));
            }
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err("SOBSCALE_THREADS must be a positive integer".into());
            }
        }
        if let Some(t) = self.trials {
            if t == 0 {
                return Err("--trials must be positive".into());
            }
        }
        Ok(())
    }

    fn resolved_trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.command.default_trials())
    }

    fn domain(&self) -> sobscale::Result<LatticeBox> {
        LatticeBox::new(self.n, self.radius)
    }

    fn grid(&self, domain: &LatticeBox) -> sobscale::Result<TorusGrid> {
        match self.grid_points {
            Some(m) => TorusGrid::new(self.n, m),
            None => Ok(TorusGrid::default_for(domain)),
        }
    }
}

/// One named verification with its verdict and supporting numbers.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub details: Value,
}

impl CheckResult {
    fn new(name: impl Into<String>, pass: bool, details: Value) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            details,
        }
    }
}

/// The deterministic run report.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: Value,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }
}

/// A completed run: the report plus its plot-ready CSV rendering.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub csv: String,
}

fn detail<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("detail serialization cannot fail")
}

fn config_echo(config: &RunConfig, inputs: Value) -> Value {
    json!({
        "command": config.command.name(),
        "n": config.n,
        "N": config.radius,
        "M": config.grid_points,
        "seed": config.seed,
        "trials": config.trials,
        "format": config.format.name(),
        "generator": GENERATOR_NAME,
        "inputs": inputs,
    })
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn checks_csv(checks: &[CheckResult]) -> String {
    let mut out = String::from("check,pass\n");
    for c in checks {
        out.push_str(&format!("{},{}\n", csv_escape(&c.name), c.pass));
    }
    out
}

fn quantities_csv(rows: &[(String, String)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (name, value) in rows {
        out.push_str(&format!("{},{}\n", csv_escape(name), csv_escape(value)));
    }
    out
}

/// Executes the configured verification and assembles the report.
pub fn run(config: &RunConfig) -> sobscale::Result<RunOutcome> {
    let trials = config.resolved_trials();
    let seed = config.seed;
    let (inputs, checks, csv) = match &config.command {
        Command::RoAnalyze { phi } => run_ro_analyze(phi)?,
        Command::VerifyInterp { job } => run_verify_interp(config, job, trials, seed)?,
        Command::VerifyDuality { s, phi } => run_verify_duality(config, *s, phi, trials, seed)?,
        Command::PdoApply { symbol } => run_pdo_apply(config, symbol, seed)?,
        Command::SymbolCheck {
            symbol,
            max_alpha,
            max_beta,
        } => run_symbol_check(config, symbol, *max_alpha, *max_beta)?,
        Command::MappingScan { symbol, phi, radii } => run_mapping_scan(symbol, phi, radii)?,
        Command::Fredholm {
            symbol,
            s,
            tolerance,
        } => run_fredholm(config, symbol, *s, *tolerance)?,
        Command::AScale { symbol, phi, radii } => {
            run_a_scale(symbol, phi, radii, trials, seed)?
        }
        Command::Suite { preset } => run_suite(*preset, trials, seed)?,
    };
    let pass = checks.iter().all(|c| c.pass);
    let report = Report {
        schema: SCHEMA,
        command: config.command.name().to_string(),
        config: config_echo(config, inputs),
        checks,
        pass,
    };
    Ok(RunOutcome { report, csv })
}

type CommandOutput = (Value, Vec<CheckResult>, String);

fn run_ro_analyze(phi: &RoFunction) -> sobscale::Result<CommandOutput> {
    let ratio = verify_ro(phi, 2.0, 1e6, 64)?;
    let indices = estimate_matuszewska(phi, 1e250, 1e6)?;
    let mut checks = vec![
        CheckResult::new(
            "ratio-bounds",
            ratio.verdict && ratio.c_estimate.is_finite(),
            detail(&ratio),
        ),
        CheckResult::new(
            "variation-indices",
            indices.sigma0.is_finite()
                && indices.sigma1.is_finite()
                && indices.sigma0 <= indices.sigma1,
            detail(&indices),
        ),
    ];

    // Straddle the estimated indices with a whole unit of margin so the
    // derived parameter is admissible for any family the estimator accepts.
    let s0 = indices.sigma0.floor() - 1.0;
    let s1 = indices.sigma1.ceil() + 1.0;
    let psi = make_interp_parameter_checked(phi, s0, s1, &indices)?;
    let back = reconstruct_phi(&psi, s0, s1)?;
    let mut round_trip_dev = 0.0f64;
    for &lt in &linspace(0.0, 1e6f64.ln(), 41) {
        let t = lt.exp();
        round_trip_dev = round_trip_dev.max(rel_dev(phi.eval(t)?, back.eval(t)?));
    }
    checks.push(CheckResult::new(
        "parameter-round-trip",
        round_trip_dev <= IDENTITY_TOLERANCE,
        json!({
            "s0": s0,
            "s1": s1,
            "psi": psi.expr().to_json_value(),
            "max_rel_deviation": round_trip_dev,
            "tolerance": IDENTITY_TOLERANCE,
        }),
    ));

    let concavity = check_pseudoconcave(&psi, 1.0, 1e4)?;
    checks.push(CheckResult::new(
        "parameter-pseudoconcavity",
        concavity.pseudoconcave,
        detail(&concavity),
    ));

    let csv = quantities_csv(&[
        ("sigma0".into(), indices.sigma0.to_string()),
        ("sigma1".into(), indices.sigma1.to_string()),
        ("c_estimate".into(), ratio.c_estimate.to_string()),
        ("round_trip_deviation".into(), round_trip_dev.to_string()),
        ("hull_ratio".into(), concavity.hull_ratio.to_string()),
    ]);
    Ok((json!({ "phi": phi.to_json_value() }), checks, csv))
}

fn interp_csv(checks: &[CheckResult]) -> String {
    let mut out = String::from("check,trials,max_rel_deviation,pass\n");
    for c in checks {
        let trials = c.details.get("trials").cloned().unwrap_or(Value::Null);
        let dev = c
            .details
            .get("max_rel_deviation")
            .cloned()
            .unwrap_or(Value::Null);
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_escape(&c.name),
            trials,
            dev,
            c.pass
        ));
    }
    out
}

fn run_verify_interp(
    config: &RunConfig,
    job: &InterpJob,
    trials: usize,
    seed: u64,
) -> sobscale::Result<CommandOutput> {
    let domain = config.domain()?;
    let (inputs, check) = match job {
        InterpJob::Exponents { phi, s0, s1 } => {
            let report = verify_theorem2(phi, *s0, *s1, domain, trials, seed)?;
            (
                json!({ "phi": phi.to_json_value(), "s0": s0, "s1": s1 }),
                CheckResult::new("power-scale-interpolation", report.pass, detail(&report)),
            )
        }
        InterpJob::Composition { phi0, phi1, psi } => {
            let parameter = InterpParameter::new(psi.clone())?;
            let report = verify_theorem3(phi0, phi1, &parameter, domain, trials, seed)?;
            (
                json!({
                    "phi0": phi0.to_json_value(),
                    "phi1": phi1.to_json_value(),
                    "psi": psi.to_json_value(),
                }),
                CheckResult::new("quadratic-composition", report.pass, detail(&report)),
            )
        }
        InterpJob::Reiteration {
            s0,
            s1,
            lambda,
            eta,
            psi,
        } => {
            let pair = make_power_pair(*s0, *s1, domain)?;
            let lambda_p = InterpParameter::new(lambda.clone())?;
            let eta_p = InterpParameter::new(eta.clone())?;
            let psi_p = InterpParameter::new(psi.clone())?;
            let report = verify_reiteration(&pair, &lambda_p, &eta_p, &psi_p, trials, seed)?;
            (
                json!({
                    "s0": s0,
                    "s1": s1,
                    "lambda": lambda.to_json_value(),
                    "eta": eta.to_json_value(),
                    "psi": psi.to_json_value(),
                }),
                CheckResult::new("reiteration", report.pass, detail(&report)),
            )
        }
    };
    let checks = vec![check];
    let csv = interp_csv(&checks);
    Ok((inputs, checks, csv))
}

struct DualityOutcome {
    trials: usize,
    violations: usize,
    max_pairing_ratio: f64,
    max_norm_deviation: f64,
    max_dual_norm_deviation: f64,
    norming_draws: usize,
}

fn duality_checks(
    domain: &LatticeBox,
    s: f64,
    phi: Option<&RoFunction>,
    trials: usize,
    seed: u64,
) -> sobscale::Result<(DualityOutcome, Vec<CheckResult>)> {
    let mut violations = 0usize;
    let mut max_pairing_ratio = 0.0f64;
    for t in 0..trials {
        let u = random_lattice_function(domain.clone(), &mut trial_rng(seed, 2 * t as u64));
        let v = random_lattice_function(domain.clone(), &mut trial_rng(seed, 2 * t as u64 + 1));
        let (pairing, bound) = match phi {
            Some(p) => duality_pairing_bound_phi(&u, &v, p)?,
            None => duality_pairing_bound(&u, &v, s)?,
        };
        let ratio = if bound > 0.0 {
            pairing.norm() / bound
        } else {
            0.0
        };
        if ratio > 1.0 + IDENTITY_TOLERANCE {
            violations += 1;
        }
        max_pairing_ratio = max_pairing_ratio.max(ratio);
    }

    let w_s = WeightFamily::from_exponent(domain.clone(), s);
    let w_dual = WeightFamily::from_exponent(domain.clone(), -s);
    let norming_draws = NORMING_DRAWS.min(trials);
    let mut max_norm_deviation = 0.0f64;
    let mut max_dual_norm_deviation = 0.0f64;
    for j in 0..norming_draws {
        let stream = 2 * trials as u64 + j as u64;
        let u = random_lattice_function(domain.clone(), &mut trial_rng(seed, stream));
        let (sup, maximizer) = duality_sup(&u, s)?;
        max_norm_deviation = max_norm_deviation.max(rel_dev(sup, h_phi_norm(&u, &w_s)?));
        max_dual_norm_deviation =
            max_dual_norm_deviation.max((h_phi_norm(&maximizer, &w_dual)? - 1.0).abs());
    }

    let outcome = DualityOutcome {
        trials,
        violations,
        max_pairing_ratio,
        max_norm_deviation,
        max_dual_norm_deviation,
        norming_draws,
    };
    let checks = vec![
        CheckResult::new(
            "pairing-bound",
            outcome.violations == 0,
            json!({
                "trials": outcome.trials,
                "violations": outcome.violations,
                "max_pairing_ratio": outcome.max_pairing_ratio,
                "slack": IDENTITY_TOLERANCE,
            }),
        ),
        CheckResult::new(
            "norming-functional",
            outcome.max_norm_deviation <= IDENTITY_TOLERANCE,
            json!({
                "s": s,
                "draws": outcome.norming_draws,
                "max_rel_deviation": outcome.max_norm_deviation,
                "tolerance": IDENTITY_TOLERANCE,
            }),
        ),
        CheckResult::new(
            "maximizer-unit-norm",
            outcome.max_dual_norm_deviation <= IDENTITY_TOLERANCE,
            json!({
                "s": s,
                "draws": outcome.norming_draws,
                "max_abs_deviation": outcome.max_dual_norm_deviation,
                "tolerance": IDENTITY_TOLERANCE,
            }),
        ),
    ];
    Ok((outcome, checks))
}

fn run_verify_duality(
    config: &RunConfig,
    s: f64,
    phi: &Option<RoFunction>,
    trials: usize,
    seed: u64,
) -> sobscale::Result<CommandOutput> {
    let domain = config.domain()?;
    let (outcome, checks) = duality_checks(&domain, s, phi.as_ref(), trials, seed)?;
    let csv = quantities_csv(&[
        ("trials".into(), outcome.trials.to_string()),
        ("violations".into(), outcome.violations.to_string()),
        (
            "max_pairing_ratio".into(),
            outcome.max_pairing_ratio.to_string(),
        ),
        (
            "max_norming_deviation".into(),
            outcome.max_norm_deviation.to_string(),
        ),
        (
            "max_maximizer_norm_deviation".into(),
            outcome.max_dual_norm_deviation.to_string(),
        ),
    ]);
    let inputs = json!({
        "s": s,
        "phi": phi.as_ref().map(|p| p.to_json_value()),
    });
    Ok((inputs, checks, csv))
}

fn l2_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let terms: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d.norm_sqr()
        })
        .collect();
    pairwise_sum(&terms).sqrt()
}

fn l2_norm(a: &[Complex64]) -> f64 {
    let terms: Vec<f64> = a.iter().map(|z| z.norm_sqr()).collect();
    pairwise_sum(&terms).sqrt()
}

fn run_pdo_apply(
    config: &RunConfig,
    symbol: &Symbol,
    seed: u64,
) -> sobscale::Result<CommandOutput> {
    let domain = config.domain()?;
    let grid = config.grid(&domain)?;
    let u = random_lattice_function(domain.clone(), &mut trial_rng(seed, 0));
    let applied = pdo_apply(symbol, &u, &grid)?;
    let result_norm = l2_norm(applied.result.values());
    let finite = applied
        .result
        .values()
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite());
    let mut checks = vec![CheckResult::new(
        "result-finite",
        finite && applied.leakage.is_finite(),
        json!({
            "input_l2_norm": l2_norm(u.values()),
            "result_l2_norm": result_norm,
            "leakage": applied.leakage,
            "warning": applied.warning,
        }),
    )];

    if domain.len() <= DENSE_CROSS_CHECK_LIMIT {
        let t = pdo_matrix(symbol, &domain, &grid)?;
        let via_matrix = t.apply(&u)?;
        let residual =
            l2_distance(applied.result.values(), via_matrix.values()) / result_norm.max(1.0);
        checks.push(CheckResult::new(
            "matrix-agreement",
            residual <= APPLY_RESIDUAL_TOLERANCE,
            json!({
                "residual": residual,
                "tolerance": APPLY_RESIDUAL_TOLERANCE,
                "dimension": domain.len(),
            }),
        ));
    } else {
        checks.push(CheckResult::new(
            "matrix-agreement",
            true,
            json!({
                "skipped": format!(
                    "dimension {} exceeds the dense cross-check limit {}",
                    domain.len(),
                    DENSE_CROSS_CHECK_LIMIT
                ),
            }),
        ));
    }

    let csv = applied.result.to_csv();
    let inputs = json!({ "symbol": symbol.to_json_value() });
    Ok((inputs, checks, csv))
}

fn run_symbol_check(
    config: &RunConfig,
    symbol: &Symbol,
    max_alpha: usize,
    max_beta: usize,
) -> sobscale::Result<CommandOutput> {
    let domain = config.domain()?;
    let grid = config.grid(&domain)?;
    let estimates = symbol_class_estimate(symbol, &domain, &grid, max_alpha, max_beta)?;
    let checks = vec![CheckResult::new(
        "class-consistency",
        estimates.consistent_with_class,
        detail(&estimates),
    )];
    let mut csv = String::from("alpha,beta,constant,slope,slope_bound\n");
    for entry in &estimates.entries {
        let alpha: Vec<String> = entry.alpha.iter().map(|a| a.to_string()).collect();
        let beta: Vec<String> = entry.beta.iter().map(|b| b.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            alpha.join(" "),
            beta.join(" "),
            entry.constant,
            entry
                .slope
                .map(|s| s.to_string())
                .unwrap_or_else(|| "".into()),
            entry.slope_bound,
        ));
    }
    let inputs = json!({
        "symbol": symbol.to_json_value(),
        "max_alpha": max_alpha,
        "max_beta": max_beta,
    });
    Ok((inputs, checks, csv))
}

/// True when the symbol is exactly the bracket power of its declared order,
/// the one case whose scan norms cancel to exactly 1.
fn is_exact_bracket_multiplier(symbol: &Symbol) -> bool {
    symbol.is_multiplier()
        && symbol.terms().len() == 1
        && matches!(
            symbol.terms()[0].k_factor,
            KFactor::BracketPower { s } if s == symbol.order()
        )
}

fn run_mapping_scan(
    symbol: &Symbol,
    phi: &RoFunction,
    radii: &[i64],
) -> sobscale::Result<CommandOutput> {
    let scan = mapping_norm_scan(symbol, phi, radii)?;
    let mut checks = vec![CheckResult::new(
        "norms-finite",
        scan.iter().all(|&(_, v)| v.is_finite() && v > 0.0),
        json!({ "scan": scan }),
    )];
    if is_exact_bracket_multiplier(symbol) {
        checks.push(CheckResult::new(
            "multiplier-exact",
            scan.iter().all(|&(_, v)| v == 1.0),
            json!({ "scan": scan, "expected": 1.0 }),
        ));
    }
    if scan.len() >= 2 {
        let a = scan[scan.len() - 2].1;
        let b = scan[scan.len() - 1].1;
        let variation = rel_dev(b, a);
        checks.push(CheckResult::new(
            "stabilization",
            variation < DIFFERENCE_STABLE_VARIATION,
            json!({
                "last_two": [a, b],
                "variation": variation,
                "threshold": DIFFERENCE_STABLE_VARIATION,
            }),
        ));
    }
    let mut csv = String::from("radius,norm\n");
    for (r, v) in &scan {
        csv.push_str(&format!("{r},{v}\n"));
    }
    let inputs = json!({
        "symbol": symbol.to_json_value(),
        "phi": phi.to_json_value(),
        "radii": radii,
    });
    Ok((inputs, checks, csv))
}

fn run_fredholm(
    config: &RunConfig,
    symbol: &Symbol,
    s: f64,
    tolerance: Option<f64>,
) -> sobscale::Result<CommandOutput> {
    let domain = config.domain()?;
    let grid = config.grid(&domain)?;
    let report = fredholm_surrogate(symbol, s, &domain, &grid, tolerance)?;
    let checks = vec![CheckResult::new(
        "rank-defect-stable",
        report.rank_defect_stable,
        detail(&report),
    )];
    let mut rows = vec![
        ("s".to_string(), report.s.to_string()),
        ("dim_ker".to_string(), report.dim_ker.to_string()),
        ("dim_coker".to_string(), report.dim_coker.to_string()),
        ("index".to_string(), report.index.to_string()),
        ("rank_defect".to_string(), report.rank_defect.to_string()),
        (
            "cross_check_s".to_string(),
            report.cross_check_s.to_string(),
        ),
        (
            "cross_check_rank_defect".to_string(),
            report.cross_check_rank_defect.to_string(),
        ),
    ];
    for (i, sv) in report.smallest_singulars.iter().enumerate() {
        rows.push((format!("sigma_{i}"), sv.to_string()));
    }
    let csv = quantities_csv(&rows);
    let inputs = json!({
        "symbol": symbol.to_json_value(),
        "s": s,
        "tolerance": tolerance,
    });
    Ok((inputs, checks, csv))
}

fn run_a_scale(
    symbol: &Symbol,
    phi: &RoFunction,
    radii: &[i64],
    trials: usize,
    seed: u64,
) -> sobscale::Result<CommandOutput> {
    let report = verify_theorem7(symbol, phi, radii, trials, seed)?;
    let checks = vec![CheckResult::new(
        "equivalence-band",
        report.pass,
        detail(&report),
    )];
    let mut csv =
        String::from("radius,sampled_low,sampled_high,exact_low,exact_high,shift\n");
    for band in &report.bands {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            band.radius,
            band.sampled_low,
            band.sampled_high,
            band.exact_low,
            band.exact_high,
            band.shift,
        ));
    }
    let inputs = json!({
        "symbol": symbol.to_json_value(),
        "phi": phi.to_json_value(),
        "radii": radii,
    });
    Ok((inputs, checks, csv))
}

fn run_suite(preset: Preset, trials: usize, seed: u64) -> sobscale::Result<CommandOutput> {
    let checks = match preset {
        Preset::Theorem2 => preset_theorem2(trials, seed)?,
        Preset::Theorem3 => preset_theorem3(trials, seed)?,
        Preset::Theorem4 => preset_theorem4(trials, seed)?,
        Preset::Theorem5 => preset_theorem5()?,
        Preset::Theorem6Surrogate => preset_theorem6_surrogate()?,
        Preset::Theorem7 => preset_theorem7(trials, seed)?,
        Preset::AppendixDuality => preset_appendix_duality(trials, seed)?,
    };
    let csv = checks_csv(&checks);
    let inputs = json!({ "preset": preset.name(), "trials": trials, "seed": seed });
    Ok((inputs, checks, csv))
}

/// The weight generators exercised by the interpolation presets, with the
/// exponent windows used to straddle their variation indices.
fn preset_families() -> Vec<(&'static str, RoFunction)> {
    vec![
        ("power", RoFunction::power(1.5)),
        ("power-log", RoFunction::power_log(1.5, 1.0)),
        ("power-log-decay", RoFunction::power_log(1.5, -0.75)),
        ("oscillating", RoFunction::osc_exponent(1.5, 0.2)),
        (
            "product",
            RoFunction::product(vec![
                RoFunction::power(0.75),
                RoFunction::power_log(0.75, 0.25),
            ]),
        ),
    ]
}

fn preset_theorem2(trials: usize, seed: u64) -> sobscale::Result<Vec<CheckResult>> {
    let domain = LatticeBox::new(1, 8)?;
    let straddles = [(1.0, 2.0), (0.0, 3.0), (1.25, 1.75)];
    let mut checks = Vec::new();
    for (label, phi) in preset_families() {
        for (s0, s1) in straddles {
            let report = verify_theorem2(&phi, s0, s1, domain.clone(), trials, seed)?;
            checks.push(CheckResult::new(
                format!("exact-norm/{label}/{s0}..{s1}"),
                report.pass,
                detail(&report),
            ));
        }
    }
    Ok(checks)
}

fn preset_theorem3(trials: usize, seed: u64) -> sobscale::Result<Vec<CheckResult>> {
    let domain = LatticeBox::new(1, 8)?;
    let triples: Vec<(&str, RoFunction, RoFunction, PsiExpr)> = vec![
        (
            "half-power",
            RoFunction::power(1.0),
            RoFunction::power(2.0),
            PsiExpr::Power { e: 0.5 },
        ),
        (
            "third-power",
            RoFunction::power_log(1.0, -1.0),
            RoFunction::power(2.0),
            PsiExpr::Power { e: 1.0 / 3.0 },
        ),
        (
            "two-fifths",
            RoFunction::power(0.5),
            RoFunction::power_log(2.5, 0.5),
            PsiExpr::Power { e: 0.4 },
        ),
        (
            "power-log",
            RoFunction::power(1.0),
            RoFunction::power(3.0),
            PsiExpr::PowerLog { e: 0.5, r: 0.25 },
        ),
        (
            "capped",
            RoFunction::power(0.5),
            RoFunction::power(2.0),
            PsiExpr::MinCap { cap: 100.0 },
        ),
    ];
    let mut checks = Vec::new();
    for (label, phi0, phi1, psi) in triples {
        let parameter = InterpParameter::new(psi)?;
        let report = verify_theorem3(&phi0, &phi1, &parameter, domain.clone(), trials, seed)?;
        checks.push(CheckResult::new(
            format!("quadratic-composition/{label}"),
            report.pass,
            detail(&report),
        ));
    }

    let pair = make_power_pair(0.0, 2.0, domain)?;
    let reiterations: Vec<(&str, PsiExpr, PsiExpr, PsiExpr)> = vec![
        (
            "power-split",
            PsiExpr::Power { e: 0.25 },
            PsiExpr::Power { e: 0.75 },
            PsiExpr::Power { e: 0.5 },
        ),
        (
            "log-corrected",
            PsiExpr::Power { e: 1.0 / 3.0 },
            PsiExpr::PowerLog {
                e: 2.0 / 3.0,
                r: -0.25,
            },
            PsiExpr::Power { e: 0.5 },
        ),
    ];
    for (label, lambda, eta, psi) in reiterations {
        let lambda_p = InterpParameter::new(lambda)?;
        let eta_p = InterpParameter::new(eta)?;
        let psi_p = InterpParameter::new(psi)?;
        let report = verify_reiteration(&pair, &lambda_p, &eta_p, &psi_p, trials, seed)?;
        checks.push(CheckResult::new(
            format!("reiteration/{label}"),
            report.pass,
            detail(&report),
        ));
    }
    Ok(checks)
}

fn embedding_json(emb: &sobscale::spaces::LinfEmbedding) -> Value {
    json!({
        "constant": emb.constant,
        "trend": emb.trend,
    })
}

fn preset_theorem4(trials: usize, seed: u64) -> sobscale::Result<Vec<CheckResult>> {
    let phi = RoFunction::power(1.0);
    let small = LatticeBox::new(1, 8)?;
    let large = LatticeBox::new(1, 2000)?;
    let small_draws = trials / 2;

    let mut violations = 0usize;
    let mut max_ratio = 0.0f64;
    let mut stream = 0u64;
    for (domain, draws) in [(&small, small_draws), (&large, trials - small_draws)] {
        let w = WeightFamily::from_generator(domain.clone(), &phi)?;
        let emb = linf_embedding_constant(&w);
        for _ in 0..draws {
            let u = random_lattice_function(domain.clone(), &mut trial_rng(seed, stream));
            stream += 1;
            let sup = u.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let bound = emb.constant * h_phi_norm(&u, &w)?;
            if sup > bound * (1.0 + IDENTITY_TOLERANCE) {
                violations += 1;
            }
            if bound > 0.0 {
                max_ratio = max_ratio.max(sup / bound);
            }
        }
    }

    let w_large = WeightFamily::from_generator(large.clone(), &phi)?;
    let emb = linf_embedding_constant(&w_large);
    let limit = std::f64::consts::PI / std::f64::consts::PI.tanh();
    let gap = (emb.constant * emb.constant - limit).abs();
    let increasing = emb.trend.windows(2).all(|w| w[0].1 <= w[1].1);
    let below = emb
        .trend
        .iter()
        .all(|&(_, c)| c * c <= limit + EMBEDDING_WINDOW);

    Ok(vec![
        CheckResult::new(
            "uniform-bound",
            violations == 0,
            json!({
                "trials": trials,
                "violations": violations,
                "max_ratio": max_ratio,
                "radii": [small.radius(), large.radius()],
            }),
        ),
        CheckResult::new(
            "constant-convergence",
            gap <= EMBEDDING_WINDOW && increasing && below,
            json!({
                "embedding": embedding_json(&emb),
                "squared_constant": emb.constant * emb.constant,
                "limit": limit,
                "gap": gap,
                "window": EMBEDDING_WINDOW,
            }),
        ),
    ])
}

/// The order-1 forward-difference symbol e^{2 pi i x} - 1 in one dimension.
fn difference_symbol() -> sobscale::Result<Symbol> {
    Symbol::new(
        1,
        1.0,
        vec![SymbolTerm {
            k_factor: KFactor::BracketPower { s: 0.0 },
            x_modes: vec![
                XMode {
                    q: vec![1],
                    coeff: Complex64::new(1.0, 0.0),
                },
                XMode {
                    q: vec![0],
                    coeff: Complex64::new(-1.0, 0.0),
                },
            ],
        }],
    )
}

fn preset_theorem5() -> sobscale::Result<Vec<CheckResult>> {
    let radii = [4i64, 8, 16];
    let generators = [
        ("power", RoFunction::power(1.0)),
        ("power-log", RoFunction::power_log(2.0, 1.0)),
    ];
    let mut checks = Vec::new();
    for m in [0.0, 1.0, 2.5] {
        for (label, phi) in &generators {
            let scan = mapping_norm_scan(&Symbol::bracket_power(1, m), phi, &radii)?;
            checks.push(CheckResult::new(
                format!("multiplier-exact/order-{m}/{label}"),
                scan.iter().all(|&(_, v)| v == 1.0),
                json!({ "scan": scan, "expected": 1.0 }),
            ));
        }
    }

    let scan = mapping_norm_scan(&difference_symbol()?, &RoFunction::power(1.0), &radii)?;
    let bounded = scan
        .iter()
        .all(|&(_, v)| v.is_finite() && v <= DIFFERENCE_NORM_BOUND);
    checks.push(CheckResult::new(
        "difference-bounded",
        bounded,
        json!({ "scan": scan, "bound": DIFFERENCE_NORM_BOUND }),
    ));
    let a = scan[scan.len() - 2].1;
    let b = scan[scan.len() - 1].1;
    let variation = rel_dev(b, a);
    checks.push(CheckResult::new(
        "difference-stable",
        variation < DIFFERENCE_STABLE_VARIATION,
        json!({
            "last_two": [a, b],
            "variation": variation,
            "threshold": DIFFERENCE_STABLE_VARIATION,
        }),
    ));
    Ok(checks)
}

/// The order-1 symbol <k> + 0.3 cos(2 pi x_1) in one dimension.
fn perturbed_bracket_symbol() -> sobscale::Result<Symbol> {
    Symbol::new(
        1,
        1.0,
        vec![
            SymbolTerm {
                k_factor: KFactor::BracketPower { s: 1.0 },
                x_modes: vec![XMode {
                    q: vec![0],
                    coeff: Complex64::new(1.0, 0.0),
                }],
            },
            SymbolTerm {
                k_factor: KFactor::BracketPower { s: 0.0 },
                x_modes: vec![
                    XMode {
                        q: vec![1],
                        coeff: Complex64::new(0.15, 0.0),
                    },
                    XMode {
                        q: vec![-1],
                        coeff: Complex64::new(0.15, 0.0),
                    },
                ],
            },
        ],
    )
}

fn preset_theorem6_surrogate() -> sobscale::Result<Vec<CheckResult>> {
    let domain = LatticeBox::new(1, 8)?;
    let grid = TorusGrid::default_for(&domain);
    let symbol = perturbed_bracket_symbol()?;
    let scale = ascale_build(&symbol, &RoFunction::power(1.0), &domain, &grid)?;

    let mut checks = Vec::new();
    let mut defects = Vec::new();
    for s in [0.0, 1.0, 2.5] {
        let report = fredholm_of_operator(scale.operator().entries(), 1.0, s, &domain, None)?;
        let pass = report.dim_ker == 0
            && report.dim_coker == 0
            && report.index == 0
            && report.rank_defect_stable;
        defects.push(report.rank_defect);
        checks.push(CheckResult::new(
            format!("kernel-free/s-{s}"),
            pass,
            detail(&report),
        ));
    }
    let uniform = defects.iter().all(|&d| d == defects[0]);
    checks.push(CheckResult::new(
        "rank-defect-uniform",
        uniform,
        json!({
            "rank_defects": defects,
            "sampled_s": [0.0, 1.0, 2.5],
            "shift": scale.shift(),
        }),
    ));
    Ok(checks)
}

/// The order-1 symbol <k> (1 + 0.2 cos(2 pi x_1)) in one dimension.
fn modulated_bracket_symbol() -> sobscale::Result<Symbol> {
    Symbol::new(
        1,
        1.0,
        vec![
            SymbolTerm {
                k_factor: KFactor::BracketPower { s: 1.0 },
                x_modes: vec![XMode {
                    q: vec![0],
                    coeff: Complex64::new(1.0, 0.0),
                }],
            },
            SymbolTerm {
                k_factor: KFactor::BracketPower { s: 1.0 },
                x_modes: vec![
                    XMode {
                        q: vec![1],
                        coeff: Complex64::new(0.1, 0.0),
                    },
                    XMode {
                        q: vec![-1],
                        coeff: Complex64::new(0.1, 0.0),
                    },
                ],
            },
        ],
    )
}

fn preset_theorem7(trials: usize, seed: u64) -> sobscale::Result<Vec<CheckResult>> {
    let phi = RoFunction::power(1.0);
    let multiplier = verify_theorem7(
        &Symbol::bracket_power(1, 1.0),
        &phi,
        &[4, 8, 16],
        trials,
        seed,
    )?;
    let exact_one = multiplier.bands.iter().all(|b| {
        (b.sampled_low - 1.0).abs() <= IDENTITY_TOLERANCE
            && (b.sampled_high - 1.0).abs() <= IDENTITY_TOLERANCE
    });
    let mut checks = vec![CheckResult::new(
        "multiplier-band-exact",
        multiplier.pass && exact_one,
        detail(&multiplier),
    )];

    let perturbed = verify_theorem7(&modulated_bracket_symbol()?, &phi, &[8, 16], trials, seed)?;
    checks.push(CheckResult::new(
        "perturbed-band",
        perturbed.pass,
        detail(&perturbed),
    ));
    let widths: Vec<f64> = perturbed
        .bands
        .iter()
        .map(|b| b.sampled_high - b.sampled_low)
        .collect();
    checks.push(CheckResult::new(
        "perturbed-width-tightening",
        widths.windows(2).all(|w| w[1] <= w[0] + IDENTITY_TOLERANCE),
        json!({
            "radii": perturbed.bands.iter().map(|b| b.radius).collect::<Vec<_>>(),
            "widths": widths,
            "trials": trials,
        }),
    ));
    Ok(checks)
}

fn preset_appendix_duality(trials: usize, seed: u64) -> sobscale::Result<Vec<CheckResult>> {
    let domain = LatticeBox::new(1, 8)?;
    let (_, checks) = duality_checks(&domain, 1.5, None, trials, seed)?;
    Ok(checks)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Writes or prints the outcome. The report file itself is deterministic;
/// wall-clock metadata goes only to the sidecar.
fn emit(config: &RunConfig, outcome: &RunOutcome) -> Result<(), String> {
    let body = match config.format {
        OutputFormat::Json => outcome.report.to_json(),
        OutputFormat::Csv => outcome.csv.clone(),
    };
    match &config.out {
        None => {
            print!("{body}");
        }
        Some(path) => {
            fs::write(path, &body)
                .map_err(|e| format!("cannot write report to {}: {e}", path.display()))?;
            let meta = json!({
                "schema": SCHEMA,
                "report": path.display().to_string(),
                "written_unix_ms": now_unix_ms(),
            });
            let meta_path = sidecar_path(path);
            let mut meta_text = serde_json::to_string_pretty(&meta)
                .expect("metadata serialization cannot fail");
            meta_text.push('\n');
            fs::write(&meta_path, meta_text)
                .map_err(|e| format!("cannot write metadata to {}: {e}", meta_path.display()))?;
            for check in &outcome.report.checks {
                println!(
                    "{}: {}",
                    check.name,
                    if check.pass { "pass" } else { "FAIL" }
                );
            }
            let passed = outcome.report.checks.iter().filter(|c| c.pass).count();
            println!(
                "result: {} ({passed}/{} checks) -> {}",
                if outcome.report.pass { "pass" } else { "FAIL" },
                outcome.report.checks.len(),
                path.display()
            );
        }
    }
    Ok(())
}

/// Validates, runs, and emits; returns the process exit code.
pub fn execute(config: &RunConfig) -> i32 {
    if let Err(msg) = config.validate() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG_ERROR;
    }
    let outcome = match run(config) {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_CONFIG_ERROR;
        }
    };
    if let Err(msg) = emit(config, &outcome) {
        eprintln!("error: {msg}");
        return EXIT_CONFIG_ERROR;
    }
    if outcome.report.pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILURE
    }
}
