use pmc_cli::config::{RunConfig, ScenarioConfig, Setting};
use proptest::prelude::*;

fn setting() -> impl Strategy<Value = Option<Setting>> {
    prop_oneof![
        Just(None),
        Just(Some(Setting::Auto)),
        (1e-3f64..1e6).prop_map(|v| Some(Setting::Value(v))),
    ]
}

proptest! {
    #[test]
    fn valid_configs_survive_a_json_round_trip(
        beta in 0.1f64..10.0,
        n in 1usize..=2,
        tol in 1e-14f64..1e-2,
        damping in 0.05f64..0.95,
        max_outer in 1usize..1000,
        gamma in setting(),
        mu in setting(),
        seed in any::<u64>(),
    ) {
        let mut cfg = RunConfig::for_bundled("euclidean-radial-s1");
        cfg.scenario = ScenarioConfig::EuclideanRadial { n, beta };
        cfg.newton.tol = tol;
        cfg.newton.damping = damping;
        cfg.outer.max_outer = max_outer;
        cfg.penalty.gamma = gamma;
        cfg.penalty.mu = mu;
        cfg.probe.seed = seed;
        prop_assert!(cfg.validate().is_ok());
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn nonpositive_tolerances_are_rejected(tol in -1e3f64..=0.0) {
        let mut cfg = RunConfig::for_bundled("euclidean-radial-s1");
        cfg.newton.tol = tol;
        let err = cfg.validate().unwrap_err();
        prop_assert!(err.fields().contains(&"newton.tol".to_string()));
    }
}
