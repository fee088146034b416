mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcrit::quantum::apply_noise_to_tensor;
use vcrit::{critical_visibility, minimize_vcrit, mix_white_noise, probability_tensor, Observable, Scenario, SearchOptions};

use common::{random_angles, random_scenario, random_state};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 100, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn noise_commutes_with_measurement(seed in any::<u64>(), v in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng, 8);
        let rho = random_state(&mut rng, scenario.num_observers());
        let angles = random_angles(&mut rng, &scenario);
        let noisy_state = probability_tensor(&mix_white_noise(&rho, v).unwrap(), &angles, &scenario).unwrap();
        let noisy_tensor = apply_noise_to_tensor(&probability_tensor(&rho, &angles, &scenario).unwrap(), v).unwrap();
        for (a, b) in noisy_state.values().iter().zip(noisy_tensor.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_rows_are_distributions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng, 9);
        let rho = random_state(&mut rng, scenario.num_observers());
        let p = probability_tensor(&rho, &random_angles(&mut rng, &scenario), &scenario).unwrap();
        prop_assert!(p.max_normalization_error() < 1e-12);
        prop_assert!(p.values().iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn quantum_tensors_do_not_signal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng, 9);
        let rho = random_state(&mut rng, scenario.num_observers());
        let p = probability_tensor(&rho, &random_angles(&mut rng, &scenario), &scenario).unwrap();
        prop_assert!(p.max_signaling_deviation() < 1e-10);
    }

    #[test]
    fn extra_setting_never_raises_visibility(seed in any::<u64>(), observer in 0usize..4, theta in 0.0f64..3.14, phi in 0.0f64..6.28) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng, 7);
        let observer = observer % scenario.num_observers();
        let rho = random_state(&mut rng, scenario.num_observers());
        let angles = random_angles(&mut rng, &scenario);
        let base = critical_visibility(&rho, &angles, &scenario).unwrap();
        let wider = scenario.with_extra_setting(observer).unwrap();
        let extended = angles.with_extra_setting(observer, Observable::new(theta, phi)).unwrap();
        let more = critical_visibility(&rho, &extended, &wider).unwrap();
        prop_assert!(base.is_certified() && more.is_certified());
        prop_assert!(more.visibility <= base.visibility + 1e-9, "{} > {}", more.visibility, base.visibility);
    }

    #[test]
    fn search_is_deterministic_for_a_seed(seed in any::<u64>(), state_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
        let scenario = Scenario::uniform(2, 2).unwrap();
        let rho = random_state(&mut rng, 2);
        let opts = SearchOptions { restarts: 2, seed, max_iterations: Some(40), kicks: 1, ..SearchOptions::default() };
        let a = minimize_vcrit(&rho, &scenario, &opts).unwrap();
        let b = minimize_vcrit(&rho, &scenario, &opts).unwrap();
        prop_assert_eq!(a.v_crit.to_bits(), b.v_crit.to_bits());
        prop_assert_eq!(a.best_angles.to_flat(), b.best_angles.to_flat());
        let bits = |r: &vcrit::VisibilityResult| r.per_restart_values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn solver_results_are_certified(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng, 8);
        let rho = random_state(&mut rng, scenario.num_observers());
        let angles = random_angles(&mut rng, &scenario);
        let sol = critical_visibility(&rho, &angles, &scenario).unwrap();
        let p = probability_tensor(&rho, &angles, &scenario).unwrap();
        let report = vcrit::verify_lhv_model(&sol.atoms, sol.visibility, &p, 1e-8).unwrap();
        prop_assert!(report.pass);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&sol.visibility));
        let mass: f64 = sol.atoms.iter().sum();
        prop_assert!((mass - 1.0).abs() < 1e-8);
    }
}

#[test]
fn permuting_observers_preserves_visibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let scenario = Scenario::new(vec![2, 3, 2]).unwrap();
        let rho = random_state(&mut rng, 3);
        let angles = random_angles(&mut rng, &scenario);
        let v = critical_visibility(&rho, &angles, &scenario).unwrap().visibility;
        let perm = [2, 0, 1];
        let swapped_rho = rho.permute_qubits(&perm).unwrap();
        let swapped_sc = Scenario::new(perm.iter().map(|&k| scenario.settings()[k]).collect()).unwrap();
        let w = critical_visibility(&swapped_rho, &angles.permuted(&perm), &swapped_sc).unwrap().visibility;
        assert!((v - w).abs() < 1e-9, "{v} vs {w}");
    }
}
