use symbiosr_core::rng::stream;
use symbiosr_core::ser::*;
use symbiosr_core::signal::HypothesisPowers;
use rand::Rng;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728_0,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    if e <= tol.max(1e-300) || (b - a) < 1e-12 {
        v
    } else {
        let m = 0.5 * (a + b);
        integrate(f, a, m, 0.5 * tol) + integrate(f, m, b, 0.5 * tol)
    }
}

fn quad_lower(l: usize, x: f64) -> f64 {
    let f = |t: f64| if t <= 0.0 { if l == 1 { 1.0 } else { 0.0 } } else { t.powi(l as i32 - 1) * (-t).exp() };
    integrate(&f, 0.0, x, 1e-13 * factorial(l - 1))
}

fn quad_upper(l: usize, x: f64) -> f64 {
    let f = |t: f64| t.powi(l as i32 - 1) * (-t).exp();
    let end = x + 60.0 + 20.0 * (l as f64);
    integrate(&f, x, end, 1e-13 * factorial(l - 1))
}

#[test]
fn gamma_identity_on_grid() {
    for l in [1usize, 2, 5, 30] {
        let full = factorial(l - 1);
        for i in 0..100 {
            let x = 10.0 * l as f64 * i as f64 / 99.0;
            let s = lower_gamma_int(l, x) + upper_gamma_int(l, x);
            assert!((s / full - 1.0).abs() <= 1e-12, "L={l} x={x}: {s} vs {full}");
        }
    }
}

#[test]
fn gamma_matches_quadrature() {
    let q = quad_lower(30, 30.0);
    assert!((lower_gamma_int(30, 30.0) / q - 1.0).abs() < 1e-9);
    let q = quad_upper(30, 45.0);
    assert!((upper_gamma_int(30, 45.0) / q - 1.0).abs() < 1e-9);
    for (l, x) in [(1, 0.3), (2, 4.0), (5, 0.5), (5, 12.0), (30, 5.0), (30, 80.0), (12, 12.0)] {
        let ql = quad_lower(l, x);
        let qu = quad_upper(l, x);
        assert!((lower_gamma_int(l, x) / ql - 1.0).abs() < 1e-9, "lower L={l} x={x}");
        assert!((upper_gamma_int(l, x) / qu - 1.0).abs() < 1e-9, "upper L={l} x={x}");
    }
}

#[test]
fn gamma_edge_values() {
    assert_eq!(lower_gamma_int(30, 0.0), 0.0);
    assert!((upper_gamma_int(30, 0.0) / factorial(29) - 1.0).abs() < 1e-13);
    assert!((ln_partial_exp_sum(30, 0.0)).abs() == 0.0);
    assert!((ln_partial_exp_sum(3, 2.0) - (1.0f64 + 2.0 + 2.0).ln()).abs() < 1e-15);
}

#[test]
fn erlang_density_integrates_to_one() {
    for l in [1usize, 5, 30] {
        let lambda = 0.7;
        let f = |e: f64| erlang_pdf(l, lambda, e);
        let end = (l as f64 + 40.0 * (l as f64).sqrt() + 60.0) / lambda;
        let v = integrate(&f, 0.0, end, 1e-12);
        assert!((v - 1.0).abs() < 1e-8, "L={l}: {v}");
    }
}

#[test]
fn detector_thresholds() {
    let hp = HypothesisPowers { p_sq: vec![1.0, 3.0], sigma_su: 0.0 };
    let d = build_detector(&hp, 10);
    assert_eq!(d.thresholds, vec![1.0]);
    assert_eq!(d.thresholds_mid, vec![2.0]);
    let eq = HypothesisPowers { p_sq: vec![2.0; 4], sigma_su: 0.1 };
    let d = build_detector(&eq, 10);
    assert!(d.thresholds.iter().all(|&t| t == 0.0));
    assert!(d.degenerate);

    let mut rng = stream(5, "det");
    for _ in 0..50 {
        let p: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 10.0).collect();
        let d = build_detector(&HypothesisPowers { p_sq: p.clone(), sigma_su: 0.3 }, 30);
        assert!(d.lambdas.windows(2).all(|w| w[0] >= w[1]));
        assert!(d.sorted_powers.windows(2).all(|w| w[0] <= w[1]));
        for (i, &q) in d.order.iter().enumerate() {
            assert_eq!(d.sorted_powers[i], p[q]);
            assert_eq!(d.lambdas[i], 1.0 / (p[q] + 0.3));
        }
    }
}

fn brute_density_argmax(e: f64, p: &[f64], s2: f64, l: usize) -> usize {
    // Full Erlang densities, compared in linear scale where they are representable.
    let dens: Vec<f64> = p
        .iter()
        .map(|pq| {
            let lam = 1.0 / (pq + s2);
            lam.powi(l as i32) * e.powi(l as i32 - 1) * (-lam * e).exp() / factorial(l - 1)
        })
        .collect();
    let mut best = 0;
    for q in 1..p.len() {
        if dens[q] > dens[best] {
            best = q;
        }
    }
    best
}

#[test]
fn map_detect_examples() {
    let p = vec![4.0, 0.0, 16.0, 1.0];
    let s2 = 0.1;
    let l = 30;
    let spec = build_detector(&HypothesisPowers { p_sq: p.clone(), sigma_su: s2 }, l);
    for q in 0..4 {
        let e = l as f64 * (p[q] + s2);
        assert_eq!(map_detect(e, &spec), q);
        assert_eq!(brute_density_argmax(e, &p, s2, l), q);
    }
    assert_eq!(map_detect(0.0, &spec), 1);

    let ties = build_detector(&HypothesisPowers { p_sq: vec![3.0, 1.0, 3.0], sigma_su: s2 }, 5);
    assert_eq!(map_detect(100.0, &ties), 0);
    assert_eq!(map_detect(0.01, &ties), 1);
}

#[test]
fn map_is_a_threshold_rule() {
    let mut rng = stream(9, "map");
    for _ in 0..5 {
        let p: Vec<f64> = (0..4).map(|_| rng.random::<f64>().powi(3) * 20.0).collect();
        let s2 = 0.2;
        let l = 12;
        let spec = build_detector(&HypothesisPowers { p_sq: p.clone(), sigma_su: s2 }, l);
        let top = 3.0 * l as f64 * (p.iter().cloned().fold(0.0, f64::max) + s2);
        for i in 1..=10_000 {
            let e = top * i as f64 / 10_000.0;
            let b = brute_density_argmax(e, &p, s2, l);
            assert_eq!(map_detect(e, &spec), b, "e={e}");
            assert_eq!(spec.crossover_detect(e), b, "e={e}");
        }
    }
}

#[test]
fn equal_powers_give_q_over_q_plus_one() {
    for q in [1usize, 3, 7] {
        for l in [1usize, 2, 30] {
            let hp = HypothesisPowers { p_sq: vec![0.37; q + 1], sigma_su: 1e-3 };
            let r = ser_upper_bound(&build_detector(&hp, l));
            assert_eq!(r.upper_bound, q as f64 / (q + 1) as f64);
        }
    }
}

#[test]
fn single_frame_binary_case() {
    let (p1, p2, s2) = (0.5, 2.5, 0.2);
    let r = ser_upper_bound(&build_detector(&HypothesisPowers { p_sq: vec![p1, p2], sigma_su: s2 }, 1));
    let (l1, l2) = (1.0 / (p1 + s2), 1.0 / (p2 + s2));
    let d1 = 0.5 * (p2 - p1);
    let expect = 0.5 * ((1.0 - (-l2 * d1).exp()) + (-l1 * d1).exp());
    assert!((r.upper_bound - expect).abs() < 1e-15);
}

#[test]
fn bound_under_growing_separation() {
    // Both threshold variants sit at a fixed fraction of the upper level when
    // the ratio grows, so the lower tails tend to P(L, L/2), not to zero.
    let l = 30;
    for q in [1usize, 3] {
        let floor = q as f64 / (q + 1) as f64 * reg_lower_gamma(l, l as f64 / 2.0);
        for v in [ThresholdVariant::HalfGap, ThresholdVariant::Midpoint] {
            let p: Vec<f64> = (0..=q).map(|i| f64::powi(1e8, i as i32)).collect();
            let hp = HypothesisPowers { p_sq: p, sigma_su: 1e-12 };
            let b = ser_upper_bound(&build_detector_with(&hp, l, v)).upper_bound;
            assert!((b / floor - 1.0).abs() < 1e-6, "{v:?}: {b} vs {floor}");
        }
        assert!(floor < 1e-3);
    }
    // With L growing as well the floor itself vanishes.
    assert!(reg_lower_gamma(200, 100.0) < 1e-12);
}

#[test]
fn per_hypothesis_terms_average_to_bound() {
    let mut rng = stream(2, "avg");
    for _ in 0..100 {
        let p: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 5.0).collect();
        let r = ser_upper_bound(&build_detector(&HypothesisPowers { p_sq: p, sigma_su: 0.05 }, 16));
        let m = r.per_hypothesis_error.iter().sum::<f64>() / 8.0;
        assert!((m - r.upper_bound).abs() < 1e-15);
        assert!(r.per_hypothesis_error.iter().all(|&e| e >= 0.0));
    }
}

#[test]
fn midpoint_bound_nonincreasing_in_edge_gaps() {
    // Raising the top level (or lowering the bottom one) widens exactly one
    // gap and leaves every other level untouched.
    let mut rng = stream(4, "mono");
    let mut literal_up = 0;
    for _ in 0..200 {
        let mut p: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 4.0 + 0.2).collect();
        p.sort_by(f64::total_cmp);
        let eval = |p: &[f64], v| {
            let hp = HypothesisPowers { p_sq: p.to_vec(), sigma_su: 0.1 };
            ser_upper_bound(&build_detector_with(&hp, 30, v)).upper_bound
        };
        let mut top = p.clone();
        top[3] += 0.5;
        let mut bottom = p.clone();
        bottom[0] *= 0.5;
        for wider in [top, bottom] {
            let a = eval(&wider, ThresholdVariant::Midpoint);
            let b = eval(&p, ThresholdVariant::Midpoint);
            assert!(a <= b + 1e-14, "{a} > {b}");
            if eval(&wider, ThresholdVariant::HalfGap) > eval(&p, ThresholdVariant::HalfGap) + 1e-14 {
                literal_up += 1;
            }
        }
    }
    println!("half-gap bound rose after widening an edge gap in {literal_up}/400 cases");
}
