use bai_core::constructions::{construct_beating_instance, verify_certificate, ConstructionCertificate};
use bai_core::exact::{exact_summary, static_error_exact, static_log_error_exact, ExactEngine};
use bai_core::mc::simulate_tilted_static;
use bai_core::oracle::enumerate_paths;
use bai_core::policies::PolicySpec;
use bai_core::rates::g_closed;
use bai_core::{Allocation, BanditInstance};

fn policies() -> Vec<PolicySpec> {
    vec![
        PolicySpec::uniform(),
        PolicySpec::static_rule(Allocation::new(0.35).unwrap()),
        PolicySpec::oracle_static(BanditInstance::new(0.9, 0.5).unwrap()).unwrap(),
        PolicySpec::plugin_tracking(0.25).unwrap(),
        PolicySpec::plugin_tracking(1.0).unwrap(),
    ]
}

#[test]
fn dp_agrees_with_path_enumeration() {
    let inst = BanditInstance::new(0.62, 0.41).unwrap();
    for p in policies() {
        for budget in [3, 6, 9] {
            let dp = exact_summary(&p, &inst, budget).unwrap();
            let en = enumerate_paths(&p, &inst, budget).unwrap();
            assert!((dp.p_error - en.p_pick2).abs() <= 1e-12, "{p} T={budget}");
            assert!((dp.e_n1 - en.e_n1).abs() <= 1e-12, "{p} T={budget}");
        }
    }
}

#[test]
fn dp_agrees_with_fast_path_on_static_rules() {
    let inst = BanditInstance::new(0.55, 0.3).unwrap();
    let engine = ExactEngine::default();
    for x in [0.2, 0.5, 0.73] {
        let x = Allocation::new(x).unwrap();
        let dp = engine.summary(&PolicySpec::static_rule(x), &inst, 60).unwrap();
        let fast = static_error_exact(x, &inst, 60).unwrap();
        assert!((dp.p_error - fast).abs() <= 1e-12);
    }
}

#[test]
fn tilted_estimate_at_long_budget() {
    let inst = BanditInstance::complementary(0.7).unwrap();
    let t = 600;
    let exact_log = static_log_error_exact(Allocation::UNIFORM, &inst, t).unwrap();
    let e = simulate_tilted_static(Allocation::UNIFORM, &inst, t, 100_000, 42).unwrap();
    assert!((e.mean - exact_log.exp()).abs() <= 3.0 * e.std_err, "{e:?} vs {}", exact_log.exp());
    let g = g_closed(Allocation::UNIFORM, &inst);
    let tf = t as f64;
    assert!((-e.mean.ln() / tf - g).abs() <= (0.5 * tf.ln() + 5.0) / tf);
}

#[test]
fn certificate_json_round_trip() {
    let cert = construct_beating_instance(0.4, Allocation::new(0.25).unwrap()).unwrap();
    let text = serde_json::to_string(&cert).unwrap();
    let back: ConstructionCertificate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cert);
    assert!(verify_certificate(&back).unwrap().passed());
}

#[test]
fn policy_spec_round_trip() {
    for p in policies() {
        let text = serde_json::to_string(&p).unwrap();
        let back: PolicySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_string(), p.to_string());
    }
}
