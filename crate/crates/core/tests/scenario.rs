use symbiosr_core::scenario::*;

const FULL_DOC: &str = r#"
n_pu = 2
n_ice = 3
n_tx = 4
n_irs = 30
frame_len = 30
ap_position = [0, 0]
irs_position = [15, 10]
su_position = [20, 2]
pu_positions = [[65, 2], [65, -2]]
carrier_hz = 2.4e9
pathloss_exponent_ai = 2.2
pathloss_exponent_is = 2.2
pathloss_exponent_ip = 2.2
rician_factor_ai = 3
rician_factor_is = 3
rician_factor_ip = [3, 3]
p_max_dbm = 30
noise_pu_dbm = -100
noise_su_dbm = -100
"#;

#[test]
fn full_document_loads() {
    let c = load_config(FULL_DOC).unwrap();
    assert_eq!((c.n_pu, c.n_ice, c.n_tx, c.n_irs, c.frame_len), (2, 3, 4, 30, 30));
    assert!((c.p_max - 1.0).abs() < 1e-15);
    assert!((c.noise_su / 1e-13 - 1.0).abs() < 1e-12);
    assert!(c.noise_pu.iter().all(|s| (s / 1e-13 - 1.0).abs() < 1e-12));
    assert_eq!(c.pu_pos, vec![[65.0, 2.0], [65.0, -2.0]]);
}

#[test]
fn empty_document_is_default_scenario() {
    let c = load_config("").unwrap();
    assert_eq!(c, ScenarioConfig::default());
    assert_eq!(c, load_config(FULL_DOC).unwrap());
    assert_eq!(c.ice_indices, vec![0, 1, 2]);
}

#[test]
fn q_plus_one_must_be_power_of_two() {
    let e = load_config("n_ice = 2").unwrap_err();
    assert!(matches!(e, ConfigError::Validation(ref m) if m.contains("power of two")), "{e}");
}

#[test]
fn ill_typed_key_is_named() {
    let e = load_config("n_irs = \"thirty\"").unwrap_err();
    assert_eq!(e, ConfigError::IllTyped { key: "n_irs".into(), expected: "nonnegative integer" });
    assert!(e.to_string().contains("n_irs"));
    let e = load_config("su_position = [1]").unwrap_err();
    assert!(e.to_string().contains("su_position"));
}

#[test]
fn unknown_key_is_named() {
    let e = load_config("n_irss = 4").unwrap_err();
    assert_eq!(e, ConfigError::UnknownKey("n_irss".into()));
}

#[test]
fn other_invariants_rejected() {
    for doc in [
        "n_pu = 0",
        "n_irs = 3",
        "p_e_max = 1.0",
        "p_e_max = 0",
        "ice_indices = [0, 0, 1]",
        "ice_indices = [0, 1, 30]",
        "n_pu = 3\npu_positions = [[65, 0]]",
        "noise_pu_dbm = [-100, -100, -100]",
        "su_position = [15, 10.5]",
    ] {
        assert!(matches!(load_config(doc), Err(ConfigError::Validation(_))), "{doc}");
    }
}

#[test]
fn per_user_values_broadcast() {
    let c = load_config("n_pu = 3\nrician_factor_ip = 5").unwrap();
    assert_eq!(c.beta_ip, vec![5.0; 3]);
    assert_eq!(c.pu_pos.len(), 3);
    assert_eq!(c.pu_pos[1], [65.0, 0.0]);
}

#[test]
fn path_gain_examples() {
    let c0 = 10f64.powf(-3.0);
    for a in [0.0, 2.0, 2.2, 3.5] {
        assert!((path_gain(1.0, a, c0).unwrap() - c0).abs() < 1e-18);
    }
    let g = path_gain(10.0, 2.2, c0).unwrap();
    assert!((10.0 * g.log10() + 52.0).abs() < 1e-12);
    assert!(matches!(path_gain(0.5, 2.2, c0), Err(ScenarioError::BelowReference(_))));
    let d = distance([0.0, 0.0], [15.0, 10.0]);
    assert!((d - 325f64.sqrt()).abs() < 1e-14);
    assert!((d - 18.027_756_377).abs() < 1e-9);
    assert_eq!(distance([1.0, 2.0], [4.0, 6.0]), distance([4.0, 6.0], [1.0, 2.0]));
}

#[test]
fn same_seed_same_channels() {
    let c = ScenarioConfig::default();
    let a = synthesize_channels(&c, 99).unwrap();
    let b = synthesize_channels(&c, 99).unwrap();
    assert_eq!(a, b);
    let d = synthesize_channels(&c, 100).unwrap();
    assert_ne!(a.g, d.g);
    assert_eq!(a.g.shape(), (30, 4));
    assert_eq!(a.h_pu.len(), 2);
    assert!(a.g.iter().chain(a.h_su.iter()).all(|z| z.re.is_finite() && z.im.is_finite()));
}

#[test]
fn huge_rician_factor_leaves_los() {
    let mut c = ScenarioConfig::default();
    c.beta_ai = 1e9;
    c.beta_is = 1e9;
    c.beta_ip = vec![1e9; 2];
    let ch = synthesize_channels(&c, 3).unwrap();
    let unit = |a: [f64; 2], b: [f64; 2]| {
        let d = distance(a, b);
        [(b[0] - a[0]) / d, (b[1] - a[1]) / d]
    };
    let gain = path_gain(distance(c.ap_pos, c.irs_pos), c.alpha_ai, c.c0()).unwrap();
    let a_ap = ula_steering(c.n_tx, 0.5, c.ap_axis_deg, unit(c.ap_pos, c.irs_pos));
    let a_irs = ula_steering(c.n_irs, 0.5, c.irs_axis_deg, unit(c.irs_pos, c.ap_pos));
    let los = &a_irs * a_ap.adjoint();
    let resid: Vec<f64> = ch
        .g
        .iter()
        .zip(los.iter())
        .map(|(h, l)| (h / gain.sqrt() - l).norm_sqr())
        .collect();
    let var = resid.iter().sum::<f64>() / resid.len() as f64;
    assert!(var < 1e-6, "{var}");
    let gain_s = path_gain(distance(c.irs_pos, c.su_pos), c.alpha_is, c.c0()).unwrap();
    let los_s = ula_steering(c.n_irs, 0.5, c.irs_axis_deg, unit(c.irs_pos, c.su_pos));
    let var_s: f64 = ch
        .h_su
        .iter()
        .zip(los_s.iter())
        .map(|(h, l)| (h / gain_s.sqrt() - l).norm_sqr())
        .sum::<f64>()
        / c.n_irs as f64;
    assert!(var_s < 1e-6, "{var_s}");
}

fn link_power_samples(c: &ScenarioConfig, seeds: std::ops::Range<u64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut g = Vec::new();
    let mut s = Vec::new();
    let mut p = Vec::new();
    for seed in seeds {
        let ch = synthesize_channels(c, seed).unwrap();
        g.extend(ch.g.iter().map(|z| z.norm_sqr()));
        s.extend(ch.h_su.iter().map(|z| z.norm_sqr()));
        p.extend(ch.h_pu[0].iter().map(|z| z.norm_sqr()));
    }
    (g, s, p)
}

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn rayleigh_links_have_path_gain_power() {
    let mut c = ScenarioConfig::default();
    c.beta_ai = 0.0;
    c.beta_is = 0.0;
    c.beta_ip = vec![0.0; 2];
    let (g, s, p) = link_power_samples(&c, 0..3400);
    let gains = [
        path_gain(distance(c.ap_pos, c.irs_pos), 2.2, c.c0()).unwrap(),
        path_gain(distance(c.irs_pos, c.su_pos), 2.2, c.c0()).unwrap(),
        path_gain(distance(c.irs_pos, c.pu_pos[0]), 2.2, c.c0()).unwrap(),
    ];
    for (x, gain) in [g, s, p].iter().zip(gains) {
        assert!(x.len() >= 100_000);
        let (m, _) = mean_and_se(x);
        assert!((m / gain - 1.0).abs() < 0.01, "{m} vs {gain}");
    }
}

#[test]
fn rician_links_have_path_gain_power() {
    let c = ScenarioConfig::default();
    let (g, s, p) = link_power_samples(&c, 0..3400);
    let gains = [
        path_gain(distance(c.ap_pos, c.irs_pos), 2.2, c.c0()).unwrap(),
        path_gain(distance(c.irs_pos, c.su_pos), 2.2, c.c0()).unwrap(),
        path_gain(distance(c.irs_pos, c.pu_pos[0]), 2.2, c.c0()).unwrap(),
    ];
    for (x, gain) in [g, s, p].iter().zip(gains) {
        let (m, se) = mean_and_se(x);
        assert!((m - gain).abs() < 3.0 * se, "{m} vs {gain} (se {se})");
    }
}
