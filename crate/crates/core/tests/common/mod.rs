//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_4;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use num_complex::Complex64;
use rand::Rng;
use vcrit::{AngleConfiguration, DensityMatrix, Scenario};

/// Eigenvector of a dichotomic observable for outcome `sign`.
fn eigenvector(theta: f64, phi: f64, sign: f64) -> [Complex64; 2] {
    let a = sign * FRAC_PI_4 + theta;
    [Complex64::new(a.cos(), 0.0), Complex64::from_polar(a.sin(), phi)]
}

/// Joint outcome probabilities by direct summation of `Tr(rho M)`, laid out
/// as `combination * 2^N + outcome` with the first observer in the high bit
/// and `+1` encoded as bit 1.
pub fn quantum_probabilities(rho: &DensityMatrix, angles: &AngleConfiguration, scenario: &Scenario) -> Vec<f64> {
    let n = scenario.num_observers();
    let dim = 1usize << n;
    let mut out = Vec::with_capacity(scenario.setting_combinations() * dim);
    for c in 0..scenario.setting_combinations() {
        let choice = scenario.decode_combination(c);
        for outcome in 0..dim {
            let vecs: Vec<[Complex64; 2]> = (0..n)
                .map(|k| {
                    let o = angles.get(k, choice[k]).unwrap();
                    let sign = if outcome >> (n - 1 - k) & 1 == 1 { 1.0 } else { -1.0 };
                    eigenvector(o.theta(), o.phi(), sign)
                })
                .collect();
            // Product ket amplitudes.
            let amp: Vec<Complex64> = (0..dim)
                .map(|i| (0..n).map(|k| vecs[k][i >> (n - 1 - k) & 1]).product())
                .collect();
            let mut p = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                for j in 0..dim {
                    p += amp[i].conj() * rho.entry(i, j) * amp[j];
                }
            }
            out.push(p.re);
        }
    }
    out
}

/// Largest `v` for which `v p + (1 - v)/2^N` is a mixture of deterministic
/// local strategies, capped at 1 and solved with an unrelated LP code.
pub fn lhv_oracle(p: &[f64], scenario: &Scenario) -> f64 {
    let n = scenario.num_observers();
    let dim = 1usize << n;
    let offsets: Vec<usize> = scenario
        .settings()
        .iter()
        .scan(0, |acc, &m| {
            let o = *acc;
            *acc += m;
            Some(o)
        })
        .collect();
    let strategies = 1usize << scenario.total_settings();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let weights: Vec<_> = (0..strategies).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let v = lp.add_var(1.0, (0.0, 1.0));
    let noise = 1.0 / dim as f64;
    for c in 0..scenario.setting_combinations() {
        let choice = scenario.decode_combination(c);
        for outcome in 0..dim {
            let mut expr = LinearExpr::empty();
            for (s, &w) in weights.iter().enumerate() {
                let produced: usize = (0..n).fold(0, |acc, k| (acc << 1) | (s >> (offsets[k] + choice[k]) & 1));
                if produced == outcome {
                    expr.add(w, 1.0);
                }
            }
            expr.add(v, noise - p[c * dim + outcome]);
            lp.add_constraint(expr, ComparisonOp::Eq, noise);
        }
    }
    lp.solve().expect("oracle LP failed").objective()
}

/// Random state: a mixture of two random pure states.
pub fn random_state<R: Rng>(rng: &mut R, qubits: usize) -> DensityMatrix {
    let dim = 1usize << qubits;
    let mut pure = || {
        let psi: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        psi.into_iter().map(|a| a / norm).collect::<Vec<_>>()
    };
    let (a, b) = (pure(), pure());
    let w: f64 = rng.gen_range(0.8..1.0);
    let entries = (0..dim * dim)
        .map(|k| {
            let (i, j) = (k / dim, k % dim);
            a[i] * a[j].conj() * w + b[i] * b[j].conj() * (1.0 - w)
        })
        .collect();
    DensityMatrix::new(qubits, entries).unwrap()
}

pub fn random_angles<R: Rng>(rng: &mut R, scenario: &Scenario) -> AngleConfiguration {
    let flat: Vec<f64> = (0..2 * scenario.total_settings())
        .map(|i| if i % 2 == 0 { rng.gen_range(0.0..std::f64::consts::PI) } else { rng.gen_range(0.0..std::f64::consts::TAU) })
        .collect();
    AngleConfiguration::from_flat(&flat, scenario).unwrap()
}

/// Scenario with at most `max_atom_bits` settings in total.
pub fn random_scenario<R: Rng>(rng: &mut R, max_atom_bits: usize) -> Scenario {
    loop {
        let n = rng.gen_range(2..=4);
        let settings: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
        if settings.iter().sum::<usize>() <= max_atom_bits && settings.iter().filter(|&&m| m > 1).count() >= 2 {
            return Scenario::new(settings).unwrap();
        }
    }
}
