//! Acceptance gate: ten end-to-end criteria covering the Fourier layer, the
//! interpolation identities, duality, the uniform-norm embedding, mapping
//! norms, Fredholm diagnostics, operator-scale equivalence bands, the
//! variation-index toolkit, and report determinism.
//!
//! Each criterion is one test that prints a single `criterion N: pass/FAIL`
//! line (visible with `--nocapture`, or on failure) and then asserts.

use std::process::Command as Process;
use std::time::Instant;

use serde_json::Value;

use sobscale::lattice::LatticeBox;
use sobscale::numeric::{linspace, rel_dev};
use sobscale::rng::{random_lattice_function, trial_rng};
use sobscale::ro::{
    estimate_matuszewska, make_interp_parameter, reconstruct_phi, RoFunction,
};
use sobscale::torus::{dft, idft, TorusGrid};
use sobscale_cli::{run, CheckResult, Command, OutputFormat, Preset, RunConfig, RunOutcome};

/// Relative tolerance for the identities that are exact up to rounding.
const REL_TOLERANCE: f64 = 1e-12;
/// Allowed gap between the squared embedding constant and its limit at the
/// largest preset radius.
const EMBEDDING_WINDOW: f64 = 1e-3;
/// Bound and stabilization threshold for the forward-difference norm scan.
const MAPPING_BOUND: f64 = 4.0;
const MAPPING_VARIATION: f64 = 0.05;
/// Index-recovery tolerances: pure powers, then log-corrected powers.
const POWER_INDEX_TOLERANCE: f64 = 1e-9;
const LOG_INDEX_TOLERANCE: f64 = 0.02;
/// Wall-clock budgets, in seconds.
const FOURIER_BUDGET: f64 = 5.0;
const INTERP_BUDGET: f64 = 10.0;

fn verdict(criterion: usize, ok: bool, what: &str) {
    println!(
        "criterion {criterion}: {} - {what}",
        if ok { "pass" } else { "FAIL" }
    );
}

fn suite_outcome(preset: Preset, trials: Option<usize>, seed: u64) -> RunOutcome {
    let config = RunConfig {
        command: Command::Suite { preset },
        n: 1,
        radius: 8,
        grid_points: None,
        seed,
        trials,
        out: None,
        format: OutputFormat::Json,
        threads: None,
    };
    run(&config).expect("preset suite runs")
}

fn check<'a>(outcome: &'a RunOutcome, name: &str) -> &'a CheckResult {
    outcome
        .report
        .checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("check {name} missing"))
}

fn l2(values: &[num_complex::Complex64]) -> f64 {
    values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_fourier_round_trip_and_plancherel() {
    let start = Instant::now();
    let seed = 2024u64;
    let mut worst_round_trip = 0.0f64;
    let mut worst_plancherel = 0.0f64;
    for trial in 0..200u64 {
        let n = if trial % 2 == 0 { 1 } else { 2 };
        let domain = LatticeBox::new(n, 8).unwrap();
        let grid = TorusGrid::default_for(&domain);
        let u = random_lattice_function(domain.clone(), &mut trial_rng(seed, trial));
        let f = dft(&u, &grid).unwrap();
        let back = idft(&f, &domain).unwrap();

        let diff: Vec<num_complex::Complex64> = u
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| a - b)
            .collect();
        worst_round_trip = worst_round_trip.max(l2(&diff) / l2(u.values()));

        let lattice_energy: f64 = u.values().iter().map(|z| z.norm_sqr()).sum();
        let grid_energy: f64 =
            f.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.weight();
        worst_plancherel = worst_plancherel.max(rel_dev(grid_energy, lattice_energy));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst_round_trip <= REL_TOLERANCE
        && worst_plancherel <= REL_TOLERANCE
        && elapsed < FOURIER_BUDGET;
    verdict(
        1,
        ok,
        "dft/idft round-trip and Plancherel within 1e-12 on 200 draws, n in {1,2}",
    );
    assert!(
        ok,
        "round trip {worst_round_trip:.3e}, plancherel {worst_plancherel:.3e}, {elapsed:.2}s"
    );
}

#[test]
fn criterion_02_power_scale_interpolation_is_exact() {
    let start = Instant::now();
    let outcome = suite_outcome(Preset::Theorem2, None, 42);
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for c in &outcome.report.checks {
        worst = worst.max(c.details["max_rel_deviation"].as_f64().unwrap());
    }
    let ok = outcome.report.pass
        && outcome.report.checks.len() == 15
        && worst <= REL_TOLERANCE
        && elapsed < INTERP_BUDGET;
    verdict(
        2,
        ok,
        "norm equality across 5 weight families x 3 exponent straddles, 200 draws each",
    );
    assert!(ok, "worst deviation {worst:.3e}, {elapsed:.2}s");
}

#[test]
fn criterion_03_composition_and_reiteration_are_exact() {
    let outcome = suite_outcome(Preset::Theorem3, None, 42);
    let compositions = outcome
        .report
        .checks
        .iter()
        .filter(|c| c.name.starts_with("quadratic-composition/"))
        .count();
    let reiterations = outcome
        .report
        .checks
        .iter()
        .filter(|c| c.name.starts_with("reiteration/"))
        .count();
    let mut worst = 0.0f64;
    for c in &outcome.report.checks {
        worst = worst.max(c.details["max_rel_deviation"].as_f64().unwrap());
    }
    let ok = outcome.report.pass && compositions == 5 && reiterations == 2 && worst <= REL_TOLERANCE;
    verdict(
        3,
        ok,
        "quadratic composition on 5 generator triples plus two-step reiteration, all within 1e-12",
    );
    assert!(ok, "worst deviation {worst:.3e}");
}

#[test]
fn criterion_04_duality_pairing_and_norming_functional() {
    let outcome = suite_outcome(Preset::AppendixDuality, Some(10_000), 42);
    let pairing = check(&outcome, "pairing-bound");
    let norming = check(&outcome, "norming-functional");
    let maximizer = check(&outcome, "maximizer-unit-norm");
    let violations = pairing.details["violations"].as_u64().unwrap();
    let norming_dev = norming.details["max_rel_deviation"].as_f64().unwrap();
    let unit_dev = maximizer.details["max_abs_deviation"].as_f64().unwrap();
    let ok = outcome.report.pass
        && pairing.details["trials"].as_u64() == Some(10_000)
        && violations == 0
        && norming_dev <= REL_TOLERANCE
        && unit_dev <= REL_TOLERANCE;
    verdict(
        4,
        ok,
        "pairing bound unviolated on 10,000 pairs; norming functional and maximizer exact to 1e-12",
    );
    assert!(ok, "violations {violations}, norming {norming_dev:.3e}, unit {unit_dev:.3e}");
}

#[test]
fn criterion_05_uniform_norm_embedding_constant() {
    let outcome = suite_outcome(Preset::Theorem4, Some(1000), 42);
    let bound = check(&outcome, "uniform-bound");
    let convergence = check(&outcome, "constant-convergence");
    let violations = bound.details["violations"].as_u64().unwrap();
    let gap = convergence.details["gap"].as_f64().unwrap();
    let ok = outcome.report.pass
        && bound.details["trials"].as_u64() == Some(1000)
        && violations == 0
        && gap <= EMBEDDING_WINDOW;
    verdict(
        5,
        ok,
        "sup-norm bound holds on 1,000 draws; squared constant within 1e-3 of pi*coth(pi) at N=2000",
    );
    assert!(ok, "violations {violations}, gap {gap:.3e}");
}

#[test]
fn criterion_06_mapping_norms_exact_and_stable() {
    let outcome = suite_outcome(Preset::Theorem5, None, 42);
    let mut multiplier_checks = 0;
    let mut all_exactly_one = true;
    for c in &outcome.report.checks {
        if c.name.starts_with("multiplier-exact/") {
            multiplier_checks += 1;
            for entry in c.details["scan"].as_array().unwrap() {
                all_exactly_one &= entry[1].as_f64() == Some(1.0);
            }
        }
    }
    let bounded = check(&outcome, "difference-bounded");
    let stable = check(&outcome, "difference-stable");
    let max_norm = bounded.details["scan"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e[1].as_f64().unwrap())
        .fold(0.0f64, f64::max);
    let variation = stable.details["variation"].as_f64().unwrap();
    let ok = outcome.report.pass
        && multiplier_checks == 6
        && all_exactly_one
        && max_norm <= MAPPING_BOUND
        && variation < MAPPING_VARIATION;
    verdict(
        6,
        ok,
        "multiplier operator norms exactly 1 at every radius; difference scan bounded by 4, stable to 5%",
    );
    assert!(ok, "max norm {max_norm}, last-two variation {variation:.3e}");
}

#[test]
fn criterion_07_fredholm_surrogate_kernel_free_and_s_independent() {
    let outcome = suite_outcome(Preset::Theorem6Surrogate, None, 42);
    let mut kernel_checks = 0;
    for s in ["0", "1", "2.5"] {
        let c = check(&outcome, &format!("kernel-free/s-{s}"));
        assert_eq!(c.details["dim_ker"].as_u64(), Some(0), "s = {s}");
        assert_eq!(c.details["dim_coker"].as_u64(), Some(0), "s = {s}");
        assert_eq!(c.details["index"].as_i64(), Some(0), "s = {s}");
        kernel_checks += 1;
    }
    let uniform = check(&outcome, "rank-defect-uniform");
    let defects: Vec<u64> = uniform.details["rank_defects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d.as_u64().unwrap())
        .collect();
    let ok = outcome.report.pass
        && kernel_checks == 3
        && defects.iter().all(|&d| d == defects[0]);
    verdict(
        7,
        ok,
        "symmetrized perturbed-bracket operator has trivial kernel and cokernel at s in {0, 1, 2.5}, rank defect s-independent",
    );
    assert!(ok, "defects {defects:?}");
}

#[test]
fn criterion_08_operator_scale_equivalence_bands() {
    let outcome = suite_outcome(Preset::Theorem7, None, 42);
    let multiplier = check(&outcome, "multiplier-band-exact");
    let mut ratio_dev = 0.0f64;
    for band in multiplier.details["bands"].as_array().unwrap() {
        ratio_dev = ratio_dev.max((band["sampled_low"].as_f64().unwrap() - 1.0).abs());
        ratio_dev = ratio_dev.max((band["sampled_high"].as_f64().unwrap() - 1.0).abs());
    }
    let perturbed = check(&outcome, "perturbed-band");
    let bands = perturbed.details["bands"].as_array().unwrap();
    let mut inside = true;
    let mut widths = Vec::new();
    for band in bands {
        let lo = band["sampled_low"].as_f64().unwrap();
        let hi = band["sampled_high"].as_f64().unwrap();
        inside &= lo >= 0.5 && hi <= 2.0;
        widths.push(hi - lo);
    }
    let tightening = check(&outcome, "perturbed-width-tightening");
    let ok = outcome.report.pass
        && ratio_dev <= REL_TOLERANCE
        && inside
        && widths.len() == 2
        && widths[1] <= widths[0]
        && tightening.pass;
    verdict(
        8,
        ok,
        "multiplier ratios identically 1; perturbed band inside [0.5, 2.0] with width non-increasing from N=8 to N=16",
    );
    assert!(ok, "ratio deviation {ratio_dev:.3e}, widths {widths:?}");
}

#[test]
fn criterion_09_index_recovery_and_parameter_round_trip() {
    let mut worst_power = 0.0f64;
    for s in [-2.0, -0.5, 0.0, 1.5, 3.0] {
        let a = estimate_matuszewska(&RoFunction::power(s), 1e250, 1e6).unwrap();
        worst_power = worst_power.max((a.sigma0 - s).abs()).max((a.sigma1 - s).abs());
    }
    let mut worst_log = 0.0f64;
    for s in [0.5, 1.5] {
        let a = estimate_matuszewska(&RoFunction::power_log(s, 1.0), 1e250, 1e6).unwrap();
        worst_log = worst_log.max((a.sigma0 - s).abs()).max((a.sigma1 - s).abs());
    }

    let families = vec![
        RoFunction::power(1.5),
        RoFunction::power(-0.7),
        RoFunction::power_log(2.0, 1.0),
        RoFunction::power_log(0.0, 2.0),
        RoFunction::osc_exponent(1.0, 0.3),
        RoFunction::product(vec![
            RoFunction::power(1.0),
            RoFunction::power_log(0.5, -1.0),
        ]),
        RoFunction::power_log(1.0, 1.0).reciprocal(),
        RoFunction::power(2.0).powf(0.75),
    ];
    let mut worst_round_trip = 0.0f64;
    for phi in &families {
        let (s0, s1) = (-3.0, 4.0);
        let psi = make_interp_parameter(phi, s0, s1).unwrap();
        let back = reconstruct_phi(&psi, s0, s1).unwrap();
        for &lt in &linspace(0.0, 1e6f64.ln(), 41) {
            let t = lt.exp();
            worst_round_trip =
                worst_round_trip.max(rel_dev(phi.eval(t).unwrap(), back.eval(t).unwrap()));
        }
    }
    let ok = worst_power <= POWER_INDEX_TOLERANCE
        && worst_log <= LOG_INDEX_TOLERANCE
        && worst_round_trip <= REL_TOLERANCE;
    verdict(
        9,
        ok,
        "variation indices recover pure powers to 1e-9 and log-corrected powers to 0.02; parameter round-trip exact on the family closure",
    );
    assert!(
        ok,
        "power {worst_power:.3e}, log {worst_log:.3e}, round trip {worst_round_trip:.3e}"
    );
}

#[test]
fn criterion_10_preset_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    for preset in Preset::ALL {
        let mut bodies = Vec::new();
        for run_idx in 0..2 {
            let path = dir.path().join(format!("{}-{run_idx}.json", preset.name()));
            let out = Process::new(env!("CARGO_BIN_EXE_sobscale"))
                .args([
                    "suite",
                    "--preset",
                    preset.name(),
                    "--seed",
                    "7",
                    "--out",
                    path.to_str().unwrap(),
                ])
                .env_remove("SOBSCALE_THREADS")
                .output()
                .expect("binary runs");
            assert_eq!(out.status.code(), Some(0), "{} run {run_idx}", preset.name());
            bodies.push(std::fs::read(&path).unwrap());
        }
        let identical = bodies[0] == bodies[1];
        let parses = serde_json::from_slice::<Value>(&bodies[0]).is_ok();
        ok &= identical && parses;
        assert!(identical, "{} reports differ between runs", preset.name());
        assert!(parses, "{} report is not valid JSON", preset.name());
    }
    verdict(
        10,
        ok,
        "every preset suite produces byte-identical reports across repeated runs at a fixed seed",
    );
    assert!(ok);
}
