mod common;

use common::{config, Instance};
use num_complex::Complex64 as C64;
use symbiosr_core::signal::{sum_rate, IrsCodebook};
use symbiosr_sca::sca::{run_from, run_model, solve_step, ScaState};
use symbiosr_sca::subproblem::{AssembleOptions, Goal};
use symbiosr_sca::{initialize_feasible, InitVerdict, ScaOptions, Scheme, Verdict};

fn small(p_e_max: f64, seed: u64) -> Instance {
    let mut c = config(2, 3, 8, 3, 30);
    c.p_e_max = p_e_max;
    Instance::new(c, seed)
}

fn quick() -> ScaOptions {
    ScaOptions { tau_max: 8, restarts: 6, ..ScaOptions::default() }
}

#[test]
fn every_scheme_keeps_its_guarantees() {
    let inst = small(0.3, 11);
    let opts = quick();
    let tol = 10.0 * opts.solver.feas_tol;
    for scheme in Scheme::ALL {
        let model = inst.model(scheme);
        let out = run_model(&model, &opts).unwrap();
        assert_ne!(out.verdict, Verdict::InfeasibleAtInit, "{scheme:?}");
        let objectives: Vec<f64> = out.trace.entries.iter().map(|e| e.objective).collect();
        for pair in objectives.windows(2) {
            assert!(pair[1] >= pair[0] - tol, "{scheme:?}: {objectives:?}");
        }
        assert!(out.point.total_power() <= 1.0 + 1e-9);
        assert!(out.point.phi.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        assert!(out.lift_residual <= 1e-4, "{scheme:?}: {}", out.lift_residual);
        if scheme.has_qos() {
            assert!(out.meets_ser && out.ser_bound <= inst.config.p_e_max, "{scheme:?}");
        }

        let codebook = match scheme {
            Scheme::AllOnUpper => IrsCodebook::all_on(inst.config.n_irs),
            _ => inst.codebook.clone(),
        };
        let direct = sum_rate(&inst.ch, &out.solution, &codebook, &inst.config.noise_pu);
        assert!((direct - out.sum_rate).abs() <= 1e-9 * direct.max(1.0), "{scheme:?}: {direct} vs {}", out.sum_rate);
        assert!(out.solution.total_power() <= inst.config.p_max * (1.0 + 1e-9));
    }
}

#[test]
fn optimizing_phases_does_not_lose_to_fixed_phases() {
    let inst = small(0.1, 12);
    let opts = quick();
    let proposed = run_model(&inst.model(Scheme::Proposed), &opts).unwrap();
    let upper = run_model(&inst.model(Scheme::AllOnUpper), &opts).unwrap();
    assert!(proposed.meets_ser);
    // The all-on bound reflects with every element in every symbol.
    assert!(upper.sum_rate >= proposed.sum_rate * 0.99, "{} vs {}", upper.sum_rate, proposed.sum_rate);
}

#[test]
fn rates_ignore_a_common_phase_rotation() {
    let inst = small(0.3, 13);
    let model = inst.model(Scheme::Proposed);
    let InitVerdict::Feasible(p) = initialize_feasible(&model, &quick()).unwrap() else { panic!("no start") };
    let mut r = p.clone();
    let rot = C64::from_polar(1.0, 0.83);
    for v in &mut r.phi {
        *v *= rot;
    }
    for w in &mut r.w {
        *w *= rot.conj();
    }
    assert!((model.sum_rate(&p) - model.sum_rate(&r)).abs() < 1e-12);
    let (a, b) = (model.su_powers(&p), model.su_powers(&r));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }
}

#[test]
fn a_heavy_penalty_returns_unit_modulus_phases() {
    let inst = small(0.1, 14);
    let model = inst.model(Scheme::Proposed);
    let opts = quick();
    let InitVerdict::Feasible(p) = initialize_feasible(&model, &opts).unwrap() else { panic!("no start") };
    let state = ScaState::new(&model, p, opts.lift);
    let assemble = AssembleOptions { goal: Goal::SumRate, lift: opts.lift, rho: 1e4, p_target: model.p_e_max };
    let step = solve_step(&model, &state, assemble, &opts.solver).unwrap();
    for v in &step.raw.phi {
        assert!(v.norm() <= 1.0 + 1e-6 && v.norm() >= 1.0 - 1e-5, "{}", v.norm());
    }
    assert!(step.residuals.u_rel <= 1e-4, "{:?}", step.residuals);
}

#[test]
fn surrogate_solution_meets_the_original_ser_rows() {
    let inst = small(0.1, 15);
    let model = inst.model(Scheme::Proposed);
    let opts = quick();
    let InitVerdict::Feasible(p) = initialize_feasible(&model, &opts).unwrap() else { panic!("no start") };
    let state = ScaState::new(&model, p, opts.lift);
    let assemble = AssembleOptions { goal: Goal::SumRate, lift: opts.lift, rho: 1e3, p_target: model.p_e_max };
    let step = solve_step(&model, &state, assemble, &opts.solver).unwrap();
    let slack = 1e-5;
    for (label, v) in step.aux.original_ser_violations(&model, model.p_e_max) {
        assert!(v <= slack, "{label}: {v}");
    }
}

#[test]
fn unreachable_target_is_reported_at_initialization() {
    let inst = small(1e-300, 16);
    let out = run_model(&inst.model(Scheme::Proposed), &quick()).unwrap();
    assert_eq!(out.verdict, Verdict::InfeasibleAtInit);
    assert!(!out.meets_ser);
    assert_eq!(out.scored_rate(), 0.0);
}

#[test]
fn a_failing_subproblem_keeps_the_feasible_start() {
    let inst = small(0.1, 15);
    let model = inst.model(Scheme::Proposed);
    let opts = quick();
    let InitVerdict::Feasible(p) = initialize_feasible(&model, &opts).unwrap() else { panic!("no start") };
    let mut starved = opts;
    starved.solver.max_iter = 1;
    let out = run_from(&model, p.clone(), &starved).unwrap();
    assert_eq!(out.verdict, Verdict::SubproblemFailed);
    assert_eq!(out.point, p);
    assert!(out.meets_ser);
    assert_eq!(out.iterations, 0);
}
