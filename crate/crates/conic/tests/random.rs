mod common;

use common::{ellipsoid_reference, kkt_instance};
use symbiosr_conic::{solve, verify_point, SolveStatus, SolverOptions};

#[test]
fn kkt_certified_instances_match() {
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    let mut max_iters = 0;
    for seed in 0..100 {
        let inst = kkt_instance(seed);
        assert!(verify_point(&inst.program, &inst.x_star).unwrap().max_violation < 1e-9, "seed {seed}");
        let rep = solve(&inst.program, &opts);
        assert_eq!(rep.status, SolveStatus::Optimal, "seed {seed}: {:?}", (rep.objective, inst.optimum, rep.kkt_residual, rep.iterations));
        let rel = (rep.objective - inst.optimum).abs() / (1.0 + inst.optimum.abs());
        worst = worst.max(rel);
        max_iters = max_iters.max(rep.iterations);
        assert!(rel < 1e-6, "seed {seed}: {} vs {}", rep.objective, inst.optimum);
        assert!(rep.max_violation <= opts.feas_tol);
        // The reported bound must hold against the certified optimum.
        assert!(rep.dual_bound <= inst.optimum + opts.kkt_tol * (1.0 + inst.optimum.abs()), "seed {seed}");
        assert!(rep.dual_bound <= rep.objective + opts.kkt_tol);
    }
    println!("worst relative error {worst:.2e}, most Newton steps {max_iters}");
}

#[test]
fn ellipsoid_reference_agrees() {
    for seed in 0..10 {
        let inst = kkt_instance(1000 + seed);
        let rep = solve(&inst.program, &SolverOptions::default());
        assert!(rep.is_optimal());
        let reference = ellipsoid_reference(&inst, 40_000, 1e-10);
        let rel = (rep.objective - reference).abs() / (1.0 + reference.abs());
        assert!(rel < 1e-4, "seed {seed}: solver {} vs ellipsoid {reference}", rep.objective);
    }
}

#[test]
fn warm_start_reaches_same_optimum() {
    let inst = kkt_instance(5);
    let cold = solve(&inst.program, &SolverOptions::default());
    let mut warm_prog = inst.program.clone();
    warm_prog.set_warm_start(cold.x.clone()).unwrap();
    let warm = solve(&warm_prog, &SolverOptions::default());
    assert!(warm.is_optimal());
    assert!((warm.objective - cold.objective).abs() < 1e-6 * (1.0 + cold.objective.abs()));
}
