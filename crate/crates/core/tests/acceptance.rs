//! Acceptance criteria at pinned tolerances.
//!
//! Each test prints one `criterion N: PASS|FAIL` line on stderr (written
//! directly, so it is visible even when libtest captures output) and then
//! asserts the outcome. Tests hold a global lock so that runtime limits are
//! measured without contention.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nodalfrac::cli::{positivity_failures, sensitivity_check, ROW_SUM_ROUNDOFF_FLOOR};
use nodalfrac::config::ExperimentConfig;
use nodalfrac::discretize::{assemble_on, fractional_constant, Domain, IntervalUnion};
use nodalfrac::eigen::solve_lowest;
use nodalfrac::matmodel::{phase_scan, SecondEigenvectorClass};
use nodalfrac::perturb::{reference_state, splitting_fit, RationalOrder, RescaledSystem};
use nodalfrac::wells::{
    convergence_from, counterexample_run, dirichlet_split, exterior_mass_from, finite_well_sweep,
    lp_bound_check, solve_infinite_well, CounterexampleConfig, VerdictStatus, WellProblem,
};

static SERIAL: Mutex<()> = Mutex::new(());

const SEED: u64 = 0;
const TAU: f64 = 1e-8;
const CENTERS: [f64; 3] = [-0.5, 0.0, 0.5];
const WELL_EPS: f64 = 0.05;
const DEFAULT_V: [f64; 3] = [0.0, 50.0, 0.0];
const WELL_GRID: usize = 400;

fn report(n: usize, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let in_time = elapsed <= limit;
    let line = format!(
        "\ncriterion {n}: {} — {detail}; runtime {:.2} s (limit {:.0} s)\n",
        if pass && in_time { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} exceeded its runtime limit");
}

fn default_problem(s: f64) -> WellProblem {
    WellProblem::new(
        IntervalUnion::new(CENTERS.to_vec(), WELL_EPS).unwrap(),
        DEFAULT_V.to_vec(),
        s,
        WELL_GRID,
    )
    .unwrap()
}

fn default_deltas() -> Vec<f64> {
    ExperimentConfig::default().delta_list
}

#[test]
fn criterion_01_matrix_phase_diagram() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let points = phase_scan(cfg.a, cfg.b, cfg.c, 41, TAU).unwrap();
    let elapsed = start.elapsed();
    let disagree = points.iter().filter(|p| !p.routes_agree()).count();
    let in_quadrant: Vec<_> = points.iter().filter(|p| p.x < 0.0 && p.z < 0.0).collect();
    let hits = in_quadrant
        .iter()
        .filter(|p| {
            matches!(&p.closed_form, SecondEigenvectorClass::Classified { report, lambda2, .. }
                if report.changes == 2 && *lambda2 < 0.0)
        })
        .count();
    let two_change_region: Vec<_> = points.iter().filter(|p| p.closed_form.changes() == Some(2)).collect();
    let all_positive = two_change_region.iter().all(|p| p.x > 0.0 && p.z > 0.0);
    let detail = format!(
        "{} points, {disagree} route disagreements; X<0,Z<0: {hits}/{} with two changes and λ₂<0; \
         two-change points: {} (all in X>0,Z>0: {all_positive})",
        points.len(),
        in_quadrant.len(),
        two_change_region.len()
    );
    report(
        1,
        points.len() == 1600 && disagree == 0 && hits == in_quadrant.len(),
        elapsed,
        Duration::from_secs(1),
        &detail,
    );
}

#[test]
fn criterion_02_sensitivity_formulas() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let worst = sensitivity_check(SEED, 100).unwrap();
    let elapsed = start.elapsed();
    report(
        2,
        worst <= 1e-3,
        elapsed,
        Duration::from_secs(1),
        &format!("max relative deviation of λ′, x′ from centered differences {worst:.3e} over 100 instances"),
    );
}

#[test]
fn criterion_03_perron_positivity() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let failures = positivity_failures(SEED, 1000);
    let elapsed = start.elapsed();
    report(
        3,
        failures == 0,
        elapsed,
        Duration::from_secs(1),
        &format!("{failures} failures over 1000 random instances"),
    );
}

#[test]
fn criterion_04_discretization_sanity() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let s = 0.5;
    let c = fractional_constant(s).unwrap();
    // Closed form of κ on (−1, 1): c_s/(2s) · ((1−x)^{−2s} + (1+x)^{−2s}).
    let kappa = |x: f64| c / (2.0 * s) * ((1.0 - x).powf(-2.0 * s) + (1.0 + x).powf(-2.0 * s));
    let start = Instant::now();
    let mut errors = Vec::new();
    let mut lowest = Vec::new();
    for cells in [100usize, 200, 400, 800] {
        let op = assemble_on(&Domain::interval(-1.0, 1.0), cells / 2, s).unwrap();
        assert_eq!(op.len(), cells);
        let err = op
            .grid()
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let row: f64 = op.matrix().row(i).iter().sum();
                ((row - kappa(x)) / kappa(x)).abs()
            })
            .fold(0.0, f64::max);
        errors.push((cells, err));
        lowest.push((cells, solve_lowest(&op, 1).unwrap()[0].value));
    }
    let elapsed = start.elapsed();
    let at_400 = errors.iter().find(|e| e.0 == 400).unwrap().1;
    let improving = errors.windows(2).all(|w| w[1].1 <= w[0].1.max(ROW_SUM_ROUNDOFF_FLOOR));
    let positive = lowest.iter().all(|l| l.1 > 0.0);
    let detail = format!(
        "max relative |A·1 − κ|/κ by cells {errors:?} (≤ 5% at 400: {}; non-increasing above {ROW_SUM_ROUNDOFF_FLOOR:.0e}: {improving}); λ₁ {lowest:?}",
        at_400 <= 0.05
    );
    report(4, at_400 <= 0.05 && improving && positive, elapsed, Duration::from_secs(10), &detail);
}

#[test]
fn criterion_05_degeneracy_and_splitting_order() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let eps_list: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
    let sys = RescaledSystem::new(
        CENTERS.to_vec(),
        eps_list[0],
        RationalOrder::new(1, 2).unwrap(),
        DEFAULT_V.to_vec(),
        200,
    )
    .unwrap();
    let reference = reference_state(&sys).unwrap();
    assert_eq!(reference.op.len(), 400);
    let sweep = splitting_fit(&sys, &eps_list, &reference).unwrap();
    let elapsed = start.elapsed();
    let worst = sweep.ratio_errors.iter().copied().fold(0.0, f64::max);
    let pass = sweep.degeneracy_spread <= 1e-8
        && (sweep.slope.slope - 2.0).abs() <= 0.1
        && (sweep.beta_slope - 4.0).abs() <= 0.2
        && worst <= 0.05;
    let detail = format!(
        "spread at ε=0 {:.2e}; slope {:.4} (CI {:?}); β-exponent {:.3}; ratios {:?} vs M̂ {:?}, max deviation {worst:.4}",
        sweep.degeneracy_spread,
        sweep.slope.slope,
        sweep.slope.ci,
        sweep.beta_slope,
        sweep.limit_ratios,
        sweep.mhat_eigenvalues
    );
    report(5, pass, elapsed, Duration::from_secs(300), &detail);
}

#[test]
fn criterion_06_eigenvalue_inequality() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let p = default_problem(0.5);
    let deltas = default_deltas();
    let reference = solve_infinite_well(&p, 3).unwrap();
    let spectra = finite_well_sweep(&p, &deltas, 3).unwrap();
    let elapsed = start.elapsed();
    let mut worst = f64::NEG_INFINITY;
    for spec in &spectra {
        for i in 0..3 {
            worst = worst.max(spec.pairs[i].value - reference.pairs[i].value);
        }
    }
    report(
        6,
        worst <= 1e-9,
        elapsed,
        Duration::from_secs(120),
        &format!("max λ_(i,δ) − λ_i over i = 1..3 and {} values of δ: {worst:.3e}", deltas.len()),
    );
}

#[test]
fn criterion_07_exterior_mass_rate() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let p = default_problem(0.5);
    let deltas = default_deltas();
    let spectra = finite_well_sweep(&p, &deltas, 2).unwrap();
    let sweep = exterior_mass_from(&p, &deltas, &spectra, TAU).unwrap();
    let elapsed = start.elapsed();
    let slopes: Vec<f64> = (1..=2).map(|i| sweep.slope(i).unwrap()).collect();
    report(
        7,
        slopes.iter().all(|s| (0.45..=0.60).contains(s)),
        elapsed,
        Duration::from_secs(120),
        &format!("log-log slopes of ‖u_(i,δ)‖ on I∖U for i = 1, 2: {slopes:.4?}; flags {:?}", sweep.flags),
    );
}

#[test]
fn criterion_08_l2_convergence_rate() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let deltas = default_deltas();
    let study = |p: &WellProblem| {
        let reference = solve_infinite_well(p, 4).unwrap();
        let spectra = finite_well_sweep(p, &deltas, 3).unwrap();
        convergence_from(p, &deltas, &reference, &spectra, 3, TAU).unwrap()
    };
    let p = default_problem(0.5);
    let coarse = study(&p);
    let fine = study(&p.with_resolution(2 * WELL_GRID).unwrap());
    let elapsed = start.elapsed();
    let simple: Vec<usize> = (1..=3)
        .filter(|i| !coarse.flags.iter().any(|f| f.starts_with(&format!("level {i} "))))
        .collect();
    let slopes: Vec<f64> = simple.iter().map(|&i| coarse.slope(i).unwrap()).collect();
    let finals: Vec<f64> = simple.iter().map(|&i| coarse.level(i).last().unwrap().value).collect();
    let refine = coarse
        .records
        .iter()
        .zip(&fine.records)
        .map(|(c, f)| ((f.value - c.value) / c.value).abs())
        .fold(0.0, f64::max);
    let pass = !simple.is_empty()
        && slopes.iter().all(|s| (0.4..=0.6).contains(s))
        && finals.iter().all(|v| *v < 0.05)
        && refine <= 0.02;
    report(
        8,
        pass,
        elapsed,
        Duration::from_secs(300),
        &format!(
            "simple levels {simple:?}: slopes {slopes:.4?}, distance at smallest δ [{}], \
             max relative change under 2× refinement {refine:.4}",
            finals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

#[test]
fn criterion_09_lp_boundedness() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let deltas: Vec<f64> = (0..6).map(|k| 0.1 * 10f64.powf(-0.8 * k as f64)).collect();
    let mut spreads = Vec::new();
    for (s, exponent) in [(0.5, 4.0), (0.75, 5.0)] {
        let p = default_problem(s);
        let spectra = finite_well_sweep(&p, &deltas, 3).unwrap();
        for i in 0..3 {
            let ratios: Vec<f64> = spectra
                .iter()
                .filter_map(|spec| lp_bound_check(&dirichlet_split(&spec.pairs[i], &p).unwrap(), &p, exponent).unwrap().ratio)
                .collect();
            let max = ratios.iter().copied().fold(0.0, f64::max);
            let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            spreads.push((s, exponent, i + 1, ratios.len(), max / min));
        }
    }
    let elapsed = start.elapsed();
    let pass = spreads.iter().all(|&(_, _, _, n, r)| n == deltas.len() && r <= 10.0);
    let detail = spreads
        .iter()
        .map(|(s, p, i, _, r)| format!("s={s} p={p} i={i}: {r:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(9, pass, elapsed, Duration::from_secs(180), &format!("max/min ratio over 6 δ: {detail}"));
}

#[test]
fn criterion_10_end_to_end_counterexample() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let config = CounterexampleConfig::default();
    assert_eq!(config.centers, CENTERS.to_vec());
    assert_eq!((config.eps, config.values.as_slice(), config.delta, config.s), (0.05, &DEFAULT_V[..], 1e-4, 0.5));
    let v = counterexample_run(&config).unwrap();
    let elapsed = start.elapsed();
    let (pc, cc) = (&v.perturbed, &v.control);
    let pass = pc.changes == [0, 2, 1]
        && pc.refinement_stable
        && cc.refinement_stable
        && cc.changes[0] == 0
        && cc.changes[1] == 1
        && (1..=2).contains(&cc.changes[2])
        && v.status == VerdictStatus::Pass;
    report(
        10,
        pass,
        elapsed,
        Duration::from_secs(180),
        &format!(
            "perturbed {:?} (refined {:?}), control {:?} (refined {:?}), status {:?}",
            pc.changes, pc.changes_refined, cc.changes, cc.changes_refined, v.status
        ),
    );
}
