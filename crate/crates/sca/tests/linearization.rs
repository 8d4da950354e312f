mod common;

use common::{config, Instance};
use symbiosr_core::ser::{ln_partial_exp_sum, upper_bound_from_powers};
use symbiosr_sca::init::structured_candidate;
use symbiosr_sca::lifted::{AuxiliarySet, SerAux};
use symbiosr_sca::subproblem::Linearization;
use symbiosr_sca::{LiftOptions, Scheme};

fn anchored(l: usize, seed: u64) -> (symbiosr_sca::Model, Linearization) {
    let inst = Instance::new(config(2, 3, 10, 4, l), seed);
    let model = inst.model(Scheme::Proposed);
    let c = (0..symbiosr_sca::init::STRUCTURED_ATTEMPTS)
        .filter_map(|a| structured_candidate(&model, seed, a))
        .find(|c| c.monotone)
        .expect("increasing levels");
    let aux = AuxiliarySet::consistent(&model, &c.point, LiftOptions::compact());
    let lin = Linearization::new(&model, &c.point, &aux);
    (model, lin)
}

#[test]
fn upsilon_is_the_tangent_of_log_complement() {
    let (_, lin) = anchored(8, 2);
    let s = lin.aux.ser.clone().unwrap();
    for h in 0..s.gamma.len() {
        let g0 = s.gamma[h];
        assert!((lin.upsilon(h, g0) - (1.0 - g0).ln()).abs() < 1e-10, "pair {h}");
        // ln(1 − γ) is concave, so the tangent lies above it.
        for t in [0.0, 0.25, 0.5, 0.9] {
            let g = g0 + t * (1.0 - g0) * 0.99;
            assert!(lin.upsilon(h, g) >= (1.0 - g).ln() - 1e-12);
        }
    }
}

#[test]
fn partial_sum_tangent_is_exact_at_anchor_and_below_elsewhere() {
    let (model, lin) = anchored(8, 3);
    let s = lin.aux.ser.clone().unwrap();
    let l = model.frame_len;
    for h in 0..s.gamma.len() {
        let e0 = s.eps_gamma2[h];
        assert!((lin.c2b2_rhs(h, e0) - 1.0).abs() < 1e-9);
        // The partial exponential sum is convex, so its tangent is a lower bound.
        for e in [0.0, 0.5 * e0, 2.0 * e0 + 0.1] {
            let exact = (ln_partial_exp_sum(l, l as f64 * e) - s.ln_xi_gamma[h]).exp();
            assert!(lin.c2b2_rhs(h, e) <= exact * (1.0 + 1e-12) + 1e-15, "pair {h} at {e}");
        }
    }
}

#[test]
fn partial_sum_tangent_at_zero_has_slope_frame_length() {
    // S_3(3ε) = 1 + 3ε + 9ε²/2, whose tangent at ε = 0 is 1 + 3ε.
    let powers = [0.0, 0.0];
    let aux = SerAux::consistent(&powers, 1.0, 3);
    assert_eq!(aux.eps_gamma2[0], 0.0);
    let (model, lin) = anchored(3, 4);
    let mut lin = lin;
    let mut ser = lin.aux.ser.clone().unwrap();
    ser.eps_gamma2[0] = 0.0;
    ser.ln_xi_gamma[0] = 0.0;
    lin.aux.ser = Some(ser);
    assert_eq!(model.frame_len, 3);
    for e in [0.0, 0.1, 0.7] {
        assert!((lin.c2b2_rhs(0, e) - (1.0 + 3.0 * e)).abs() < 1e-12);
    }
}

#[test]
fn tail_sum_reproduces_the_union_bound() {
    let (model, lin) = anchored(30, 5);
    let p = &lin.su_power;
    let s = lin.aux.ser.as_ref().unwrap();
    let bound = upper_bound_from_powers(p, model.nu_su, model.frame_len);
    assert!((s.tail_sum() / p.len() as f64 - bound).abs() <= 1e-12 * bound.max(1e-300) + 1e-300);
}

#[test]
fn consistent_values_meet_every_original_ser_row() {
    let (model, lin) = anchored(16, 6);
    let bound = upper_bound_from_powers(&lin.su_power, model.nu_su, model.frame_len);
    for (label, v) in lin.aux.original_ser_violations(&model, bound) {
        assert!(v <= 1e-9, "{label}: {v}");
    }
}

#[test]
fn difference_of_norms_tangent_dominates() {
    // −‖f‖² ≤ −‖f0‖² − 2 Re⟨f0, f − f0⟩: the linearized trace row is a
    // restriction of the original.
    use num_complex::Complex64 as C64;
    let f0 = [C64::new(0.3, -1.2), C64::new(2.0, 0.5)];
    for f in [[C64::new(1.0, 1.0), C64::new(-0.5, 0.0)], [C64::new(0.3, -1.2), C64::new(2.0, 0.5)]] {
        let lhs: f64 = -f.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let rhs: f64 = -f0.iter().map(|v| v.norm_sqr()).sum::<f64>()
            - 2.0 * f0.iter().zip(&f).map(|(a, b)| (a.conj() * (b - a)).re).sum::<f64>();
        assert!(lhs <= rhs + 1e-12);
    }
}
