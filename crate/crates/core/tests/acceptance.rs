//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Runs with `harness = false` so the verdict lines are always printed.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::{load_config, rng, unit_field};
use splf::cli::run_simulate;
use splf::constitutive::{pairing_convection, pairing_stress, DriftEngine, FluidParams};
use splf::diagnostics::{
    deterministic_energy_defect, energy_ladder, noise_variance_ratio, structural_check, uniqueness_experiment,
    StructuralReport, BIAS_RATIO_RANGE,
};
use splf::exponents::{critical_exponents, Rational};
use splf::integrator::{InitialCondition, SimConfig, Simulator, StepperKind};
use splf::noise::{self, CovarianceSpectrum};
use splf::spectral::{inner_product, make_basis};

// Every tolerance used below.
const IDENTITY_ABS_TOL: f64 = 1e-10;
const IDENTITY_TRIPLES: usize = 1000;
const NEWTONIAN_BOUND_FACTOR: f64 = 5.0;
const UNIQUENESS_EXACT_TOL: f64 = 1e-12;
const GRONWALL_EPS: f64 = 1e-3;
const GRONWALL_MARGIN: f64 = 0.5;
const GRONWALL_CALIBRATION_PAIRS: usize = 200;
const GRONWALL_VALIDATION_PAIRS: usize = 50;
const STRUCTURE_TOL: f64 = 1e-12;
const VARIANCE_DRAWS: usize = 100_000;
const VARIANCE_SIGMAS: f64 = 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let exact = [(2, (3, 2)), (3, (9, 5)), (4, (2, 1)), (5, (11, 5))];
    let mut pass = exact
        .iter()
        .all(|&(d, (a, b))| critical_exponents(d).unwrap().p1 == Rational::new(a, b));
    let c = critical_exponents(9).unwrap();
    let trunc3 = |x: f64| (x * 1e3).floor() / 1e3;
    pass &= trunc3(c.p1_f64()) == 2.555;
    pass &= c.p2 == Some(Rational::new(18, 7)) && (c.p2_f64() * 1e4).floor() == 25714.0;
    pass &= trunc3(c.p3) == 2.620;
    outcome(
        pass,
        format!(
            "p1(2..5) = {}; p1(9) = {:.5}, p2(9) = {:.5}, p3(9) = {:.5}",
            (2..=5).map(|d| critical_exponents(d).unwrap().p1.to_string()).collect::<Vec<_>>().join(", "),
            c.p1_f64(),
            c.p2_f64(),
            c.p3
        ),
    )
}

fn criterion_2() -> Outcome {
    let basis = Arc::new(make_basis(4, 2).unwrap());
    let newtonian = FluidParams::new(2.0, 0.8).unwrap();
    let engines: Vec<DriftEngine> = [2.0, 3.0, 1.6]
        .iter()
        .map(|&p| DriftEngine::new(basis.clone(), FluidParams::new(p, 0.8).unwrap()).unwrap())
        .collect();
    let mut ws: Vec<_> = engines.iter().map(|e| e.workspace()).collect();
    let mut r = rng(2);
    let mut worst = [0.0f64; 4];
    for _ in 0..IDENTITY_TRIPLES {
        let (u, v, w) = (unit_field(&basis, &mut r), unit_field(&basis, &mut r), unit_field(&basis, &mut r));
        // ⟨w, (v·∇)u⟩ = −⟨u, (v·∇)w⟩
        let anti = pairing_convection(&w, &v, &u).unwrap() + pairing_convection(&u, &v, &w).unwrap();
        // ⟨w, (v·∇)w⟩ = 0
        let self_pair = pairing_convection(&w, &v, &w).unwrap();
        // p = 2: ⟨e(u), τ(v)⟩ = −ν⟨u, Δv⟩
        let lap_v = v.apply_multiplier(|z| -4.0 * std::f64::consts::PI.powi(2) * z.norm_sq());
        let stress = pairing_stress(&u, &v, &newtonian).unwrap() + newtonian.nu * inner_product(&u, &lap_v).unwrap();
        // ⟨X, P_n b(X)⟩ = −⟨e(X), τ(X)⟩
        let x = basis.coordinates(&u).unwrap();
        let mut energy = 0.0f64;
        for (e, ws) in engines.iter().zip(ws.iter_mut()) {
            let mut b = vec![0.0; x.len()];
            let diss = e.evaluate(ws, &x, &mut b);
            let xb: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
            energy = energy.max((xb + diss).abs());
        }
        for (slot, v) in worst.iter_mut().zip([anti.abs(), self_pair.abs(), stress.abs(), energy]) {
            *slot = slot.max(v);
        }
    }
    outcome(
        worst.iter().all(|&v| v < IDENTITY_ABS_TOL),
        format!(
            "{IDENTITY_TRIPLES} triples, max |defect|: antisymmetry {:.1e}, self-pairing {:.1e}, stress/Laplacian {:.1e}, energy pairing {:.1e} (tol {IDENTITY_ABS_TOL:e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_3(structure: &mut StructuralReport) -> Outcome {
    let config = load_config("energy.toml");
    let r = energy_ladder(&config).unwrap();
    *structure = structure.merge(r.structure);
    let c = r.coarse();
    outcome(
        r.passed(),
        format!(
            "|LHS-RHS| = {:.3e} <= 3*{:.3e} + {:.3e}: {}; bias ratio {:.3} in {:?}: {}; z = {:+.2}, diverged {}",
            c.residual().abs(),
            c.lhs_stderr,
            r.bias_allowance,
            r.within_tolerance,
            r.bias_ratio,
            BIAS_RATIO_RANGE,
            r.ratio_ok,
            c.z_score,
            c.n_diverged
        ),
    )
}

fn single_mode(p: f64, dt: f64) -> SimConfig {
    SimConfig::new(2, p, 1.0, 2, dt, 0.1, 1, 1)
}

fn criterion_4(structure: &mut StructuralReport) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [2.0, 3.0] {
        let defects: Vec<f64> = [1e-3, 5e-4]
            .iter()
            .map(|&dt| {
                let sim = Simulator::new(&single_mode(p, dt)).unwrap();
                let rec = sim.simulate(0);
                *structure = structure.merge(structural_check([&rec], sim.basis()).unwrap());
                deterministic_energy_defect(&rec)
            })
            .collect();
        let ratio = defects[0] / defects[1];
        pass &= (BIAS_RATIO_RANGE.0..=BIAS_RATIO_RANGE.1).contains(&ratio);
        parts.push(format!("p={p}: defect {:.3e} -> {:.3e}, ratio {:.3}", defects[0], defects[1], ratio));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5(structure: &mut StructuralReport) -> Outcome {
    let config = single_mode(2.0, 1e-3);
    let sim = Simulator::new(&config).unwrap();
    let rec = sim.simulate(0);
    *structure = structure.merge(structural_check([&rec], sim.basis()).unwrap());
    let k = sim.basis().index_of(&[1, 0], 1).unwrap();
    let rate = config.nu * 4.0 * std::f64::consts::PI.powi(2);
    let err = rec
        .rows
        .iter()
        .map(|r| (r.coords[k] - (-rate * r.t).exp()).abs())
        .fold(0.0, f64::max);
    let bound = NEWTONIAN_BOUND_FACTOR * config.dt * rate * config.horizon;
    outcome(err < bound, format!("max |X - exp(-nu 4pi^2 t)| = {err:.3e} < {bound:.3e}"))
}

fn criterion_6(structure: &mut StructuralReport) -> Outcome {
    let mut config = load_config("uniqueness.toml");
    config.n_paths = 20;
    let sim = Simulator::new(&config).unwrap();
    let mut worst = 0.0f64;
    for path in 0..config.n_paths as u64 {
        let x = sim.initial_condition(path);
        let (a, b) = sim.simulate_paired(path, x.clone(), x);
        *structure = structure.merge(structural_check([&a, &b], sim.basis()).unwrap());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            let z: f64 = ra.coords.iter().zip(&rb.coords).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(z);
        }
    }
    outcome(
        worst < UNIQUENESS_EXACT_TOL,
        format!("{} paired paths, max ||Z_t|| = {worst:.1e}", config.n_paths),
    )
}

fn criterion_7(structure: &mut StructuralReport) -> Outcome {
    let config = load_config("uniqueness.toml");
    let r = uniqueness_experiment(
        &config,
        GRONWALL_EPS,
        GRONWALL_CALIBRATION_PAIRS,
        GRONWALL_VALIDATION_PAIRS,
        GRONWALL_MARGIN,
    )
    .unwrap();
    *structure = structure.merge(r.structure);
    outcome(
        r.holds() && r.exponent == 2.0 && r.in_theorem && r.pairs.len() == GRONWALL_VALIDATION_PAIRS,
        format!(
            "exponent {}, C_hat {:.4e}, largest validation need {:.4e}, {} violations in {} recorded times",
            r.exponent,
            r.c_hat,
            r.max_required(),
            r.violations,
            r.checked
        ),
    )
}

fn criterion_8(structure: &StructuralReport) -> Outcome {
    let basis = make_basis(2, 2).unwrap();
    let spec = noise::validate(&CovarianceSpectrum::Power { c: 0.1, s: 3.0 }, 2).unwrap();
    let v = noise_variance_ratio(&spec, &basis, 0, 1e-3, VARIANCE_DRAWS, 8).unwrap();
    let pass = structure.max_divergence < STRUCTURE_TOL
        && structure.max_conjugate_defect < STRUCTURE_TOL
        && v.within(VARIANCE_SIGMAS);
    outcome(
        pass,
        format!(
            "{} states: max |z.X_z| {:.1e}, conjugate defect {:.1e}; variance ratio {:.4} +/- {:.4} vs 4",
            structure.states, structure.max_divergence, structure.max_conjugate_defect, v.ratio, v.ratio_stderr
        ),
    )
}

fn criterion_9() -> Outcome {
    let config = load_config("energy.toml");
    let digests: Vec<Vec<(String, String)>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let m = run_simulate(&config, Vec::new(), dir.path(), false).unwrap();
            m.outputs.into_iter().map(|o| (o.file, o.sha256)).collect()
        })
        .collect();
    outcome(
        digests[0] == digests[1] && digests[0].len() == config.n_paths,
        format!("{} CSV digests compared, identical: {}", digests[0].len(), digests[0] == digests[1]),
    )
}

fn main() -> ExitCode {
    // keep the stepper choice of the configs visible in the log
    assert_eq!(load_config("energy.toml").stepper, StepperKind::Tamed);
    assert!(matches!(load_config("uniqueness.toml").init, InitialCondition::Gaussian { .. }));

    let mut structure = StructuralReport::default();
    let mut results = Vec::new();
    let mut run = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {n}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        results.push(o.pass);
    };
    run(1, &mut criterion_1);
    run(2, &mut criterion_2);
    run(3, &mut || criterion_3(&mut structure));
    run(4, &mut || criterion_4(&mut structure));
    run(5, &mut || criterion_5(&mut structure));
    run(6, &mut || criterion_6(&mut structure));
    run(7, &mut || criterion_7(&mut structure));
    run(8, &mut || criterion_8(&structure));
    run(9, &mut criterion_9);
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
