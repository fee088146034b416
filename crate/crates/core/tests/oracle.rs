mod common;

use std::f64::consts::FRAC_PI_4;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcrit::{critical_visibility, make_state, probability_tensor, StateSpec};

use common::{lhv_oracle, quantum_probabilities, random_angles, random_scenario, random_state};

pub const INSTANCES: usize = 200;

#[test]
fn lp_optimum_matches_strategy_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut nonlocal = 0;
    for case in 0..INSTANCES {
        let scenario = random_scenario(&mut rng, 8);
        assert!(scenario.atom_count() <= 256);
        // Every third instance uses a GHZ state, which is far from local.
        let rho = if case % 3 == 0 {
            make_state(&StateSpec::Ghz { qubits: scenario.num_observers(), alpha: FRAC_PI_4 }).unwrap()
        } else {
            random_state(&mut rng, scenario.num_observers())
        };
        let angles = random_angles(&mut rng, &scenario);

        let reference = quantum_probabilities(&rho, &angles, &scenario);
        let p = probability_tensor(&rho, &angles, &scenario).unwrap();
        for (a, b) in p.values().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "case {case}: tensor entry {a} vs {b}");
        }

        let sol = critical_visibility(&rho, &angles, &scenario).unwrap();
        assert!(sol.is_certified(), "case {case}: {:?}", sol.diagnostics);
        let expected = lhv_oracle(&reference, &scenario);
        let gap = (sol.visibility - expected).abs();
        worst = worst.max(gap);
        nonlocal += usize::from(expected < 1.0 - 1e-6);
        assert!(gap < 1e-7, "case {case} ({scenario}): simplex {} vs oracle {expected}", sol.visibility);
    }
    eprintln!("largest deviation from oracle: {worst:.2e}; {nonlocal} nonlocal instances");
    assert!(nonlocal >= INSTANCES / 5, "only {nonlocal} instances violate local realism");
}

/// Angles found by the search at which the four-qubit cluster state stays
/// nonlocal down to a visibility of about 0.4459, below 1/2.
#[test]
fn cluster4_reaches_below_one_half() {
    let flat = [
        0.312925046157257, 1.3857486706645346, 1.257871312726902, 1.3857487113340434,
        1.8837213770658587, 3.3266402657711427, 2.828667612839256, 3.326640341391485,
        2.3105966029390856e-09, 2.12472269251615, 1.5707963384431871, 3.6955190323855396,
        1.5707963199449384, 3.373064433716236, 5.933977513857328e-10, 4.943860772557534,
    ];
    let scenario = vcrit::Scenario::uniform(4, 2).unwrap();
    let angles = vcrit::AngleConfiguration::from_flat(&flat, &scenario).unwrap();
    let rho = make_state(&StateSpec::Cluster { qubits: 4 }).unwrap();
    let sol = critical_visibility(&rho, &angles, &scenario).unwrap();
    let reference = lhv_oracle(&quantum_probabilities(&rho, &angles, &scenario), &scenario);
    assert!(sol.is_certified());
    assert!((sol.visibility - reference).abs() < 1e-9, "{} vs {reference}", sol.visibility);
    assert!((sol.visibility - 0.4459029062228).abs() < 1e-9, "{}", sol.visibility);
}
