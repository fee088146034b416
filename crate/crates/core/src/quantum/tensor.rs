use num_complex::Complex64;
use rayon::prelude::*;

use super::density::check_visibility;
use super::{AngleConfiguration, DensityMatrix, Scenario};
use crate::error::{Error, Result};

/// `P(outcome tuple | setting combination)` for every combination.
///
/// Values are laid out combination-major: entry `combo * 2^N + outcome`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTensor {
    scenario: Scenario,
    values: Vec<f64>,
}

impl ProbabilityTensor {
    pub fn new(scenario: Scenario, values: Vec<f64>) -> Result<Self> {
        let expected = scenario.constraint_count();
        if values.len() != expected {
            return Err(Error::Config(format!(
                "scenario {scenario} needs {expected} probabilities, got {}",
                values.len()
            )));
        }
        Ok(ProbabilityTensor { scenario, values })
    }

    /// Every entry `1 / 2^N`.
    pub fn uniform(scenario: &Scenario) -> Self {
        let u = 1.0 / scenario.outcome_tuples() as f64;
        ProbabilityTensor {
            scenario: scenario.clone(),
            values: vec![u; scenario.constraint_count()],
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, combination: usize, outcome: usize) -> f64 {
        self.values[combination * self.scenario.outcome_tuples() + outcome]
    }

    /// Distribution over outcome tuples for one setting combination.
    pub fn row(&self, combination: usize) -> &[f64] {
        let t = self.scenario.outcome_tuples();
        &self.values[combination * t..(combination + 1) * t]
    }

    /// `v P + (1 - v) / 2^N` entrywise.
    pub fn apply_noise(&self, v: f64) -> Result<Self> {
        check_visibility(v)?;
        let u = 1.0 / self.scenario.outcome_tuples() as f64;
        Ok(ProbabilityTensor {
            scenario: self.scenario.clone(),
            values: self.values.iter().map(|p| v * p + (1.0 - v) * u).collect(),
        })
    }

    /// Largest `|sum_r P(r|s) - 1|` over setting combinations.
    pub fn max_normalization_error(&self) -> f64 {
        (0..self.scenario.setting_combinations())
            .map(|s| (self.row(s).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Probability that every observer in `subset` (bitmask, bit `i` for
    /// observer `i`) outputs `+1`, under setting combination `combo`.
    pub fn all_plus_marginal(&self, subset: usize, combination: usize) -> f64 {
        let n = self.scenario.num_observers();
        let mask = (0..n)
            .filter(|i| subset >> i & 1 == 1)
            .fold(0usize, |m, i| m | 1 << self.scenario.outcome_bit(i));
        self.row(combination)
            .iter()
            .enumerate()
            .filter(|(r, _)| r & mask == mask)
            .map(|(_, p)| p)
            .sum()
    }

    /// Largest change of any observer subset's marginal distribution when
    /// only the settings outside the subset change.
    pub fn max_signaling_deviation(&self) -> f64 {
        let sc = &self.scenario;
        let n = sc.num_observers();
        let t = sc.outcome_tuples();
        let mut worst = 0.0f64;
        // Proper, non-empty subsets; the full set has no complement.
        for subset in 1..(1usize << n) - 1 {
            let members: Vec<usize> = (0..n).filter(|i| subset >> i & 1 == 1).collect();
            let sub_outcomes = 1usize << members.len();
            // Reference marginal per restricted setting choice.
            let mut reference: std::collections::HashMap<Vec<usize>, Vec<f64>> = Default::default();
            for combo in 0..sc.setting_combinations() {
                let choice = sc.decode_combination(combo);
                let key: Vec<usize> = members.iter().map(|&i| choice[i]).collect();
                let mut marginal = vec![0.0; sub_outcomes];
                for r in 0..t {
                    let idx = members
                        .iter()
                        .fold(0usize, |acc, &i| acc << 1 | (r >> sc.outcome_bit(i) & 1));
                    marginal[idx] += self.row(combo)[r];
                }
                match reference.get(&key) {
                    Some(base) => {
                        for (a, b) in base.iter().zip(&marginal) {
                            worst = worst.max((a - b).abs());
                        }
                    }
                    None => {
                        reference.insert(key, marginal);
                    }
                }
            }
        }
        worst
    }
}

const PARALLEL_THRESHOLD: usize = 1 << 16;

/// Apply a 2x2 matrix `u` to qubit `bit` from the left and `u^dagger` from
/// the right.
fn conjugate_qubit(rho: &[Complex64], dim: usize, bit: usize, u: &[[Complex64; 2]; 2]) -> Vec<Complex64> {
    let stride = 1usize << bit;
    let mut left = vec![Complex64::new(0.0, 0.0); rho.len()];
    for i0 in (0..dim).filter(|i| i & stride == 0) {
        let i1 = i0 | stride;
        let (r0, r1) = (&rho[i0 * dim..(i0 + 1) * dim], &rho[i1 * dim..(i1 + 1) * dim]);
        for c in 0..dim {
            left[i0 * dim + c] = u[0][0] * r0[c] + u[0][1] * r1[c];
            left[i1 * dim + c] = u[1][0] * r0[c] + u[1][1] * r1[c];
        }
    }
    let conj = [[u[0][0].conj(), u[0][1].conj()], [u[1][0].conj(), u[1][1].conj()]];
    let mut out = vec![Complex64::new(0.0, 0.0); rho.len()];
    for r in 0..dim {
        let row = &left[r * dim..(r + 1) * dim];
        let dst = &mut out[r * dim..(r + 1) * dim];
        for j0 in (0..dim).filter(|j| j & stride == 0) {
            let j1 = j0 | stride;
            dst[j0] = row[j0] * conj[0][0] + row[j1] * conj[0][1];
            dst[j1] = row[j0] * conj[1][0] + row[j1] * conj[1][1];
        }
    }
    out
}

/// Diagonal of `u rho u^dagger` for `u` acting on qubit `bit`.
fn conjugated_diagonal(rho: &[Complex64], dim: usize, bit: usize, u: &[[Complex64; 2]; 2], out: &mut [f64]) {
    let stride = 1usize << bit;
    for i0 in (0..dim).filter(|i| i & stride == 0) {
        let i1 = i0 | stride;
        let (a, b, c, d) = (rho[i0 * dim + i0], rho[i0 * dim + i1], rho[i1 * dim + i0], rho[i1 * dim + i1]);
        for (k, idx) in [(0, i0), (1, i1)] {
            let (x, y) = (u[k][0], u[k][1]);
            let val = x * a * x.conj() + x * b * y.conj() + y * c * x.conj() + y * d * y.conj();
            out[idx] = val.re;
        }
    }
}

/// `P(r | s) = Tr(rho (x)_i Pi(obs_{i, s_i}, r_i))` for every setting
/// combination `s` and outcome tuple `r`.
///
/// The state is rotated into each observer's measurement basis one qubit at a
/// time; partially rotated states are shared by all combinations with the same
/// leading settings, so the last observer only needs diagonals.
pub fn probability_tensor(
    rho: &DensityMatrix,
    angles: &AngleConfiguration,
    scenario: &Scenario,
) -> Result<ProbabilityTensor> {
    angles.check(scenario)?;
    if rho.qubits() != scenario.num_observers() {
        return Err(Error::Config(format!(
            "state has {} qubits, scenario {scenario} has {} observers",
            rho.qubits(),
            scenario.num_observers()
        )));
    }
    let n = scenario.num_observers();
    let dim = scenario.dim();
    let rows: Vec<Vec<[[Complex64; 2]; 2]>> = angles
        .observers()
        .iter()
        .map(|obs| obs.iter().map(|o| o.measurement_rows()).collect())
        .collect();

    // Combinations sharing the first observer's setting form a contiguous
    // block, so the top level is split across threads.
    let block = scenario.setting_combinations() / scenario.settings()[0];
    let mut values = vec![0.0; scenario.constraint_count()];
    let chunk = block * dim;
    let work = |(s0, out): (usize, &mut [f64])| {
        let rotated = conjugate_qubit(rho.entries(), dim, n - 1, &rows[0][s0]);
        fill(&rotated, &rows, 1, n, dim, out);
    };
    if dim * dim * scenario.setting_combinations() < PARALLEL_THRESHOLD {
        values.chunks_mut(chunk).enumerate().for_each(work);
    } else {
        values.par_chunks_mut(chunk).enumerate().for_each(work);
    }
    ProbabilityTensor::new(scenario.clone(), values)
}

fn fill(rho: &[Complex64], rows: &[Vec<[[Complex64; 2]; 2]>], observer: usize, n: usize, dim: usize, out: &mut [f64]) {
    let bit = n - 1 - observer;
    if observer == n - 1 {
        for (s, slot) in out.chunks_exact_mut(dim).enumerate() {
            conjugated_diagonal(rho, dim, bit, &rows[observer][s], slot);
        }
        return;
    }
    let per = out.len() / rows[observer].len();
    for (s, slot) in out.chunks_exact_mut(per).enumerate() {
        let rotated = conjugate_qubit(rho, dim, bit, &rows[observer][s]);
        fill(&rotated, rows, observer + 1, n, dim, slot);
    }
}

/// `v P + (1 - v) / 2^N` entrywise.
pub fn apply_noise_to_tensor(p: &ProbabilityTensor, v: f64) -> Result<ProbabilityTensor> {
    p.apply_noise(v)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    use super::*;
    use crate::quantum::{make_state, Observable, Outcome, StateSpec};

    fn chsh_angles() -> AngleConfiguration {
        AngleConfiguration::new(vec![
            vec![Observable::new(0.0, 0.0), Observable::new(0.0, FRAC_PI_2)],
            vec![Observable::new(0.0, FRAC_PI_4), Observable::new(0.0, 3.0 * FRAC_PI_4)],
        ])
    }

    fn ghz2() -> DensityMatrix {
        make_state(&StateSpec::Ghz { qubits: 2, alpha: FRAC_PI_4 }).unwrap()
    }

    /// Direct trace with explicit Kronecker products of projectors.
    fn brute_force(rho: &DensityMatrix, angles: &AngleConfiguration, sc: &Scenario, combo: usize, r: usize) -> f64 {
        let choice = sc.decode_combination(combo);
        let n = sc.num_observers();
        let mut pi = nalgebra::DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for i in 0..n {
            let o = angles.get(i, choice[i]).unwrap();
            let p = o.projector(Outcome::from_bit(r >> sc.outcome_bit(i)));
            let p = nalgebra::DMatrix::from_fn(2, 2, |a, b| p[(a, b)]);
            pi = pi.kronecker(&p);
        }
        (rho.to_nalgebra() * pi).trace().re
    }

    #[test]
    fn ghz2_chsh_entry() {
        let sc = Scenario::uniform(2, 2).unwrap();
        let p = probability_tensor(&ghz2(), &chsh_angles(), &sc).unwrap();
        let expected = (1.0 + FRAC_1_SQRT_2) / 4.0;
        // setting pair (1,1) is combination 0; outcome (+,+) is 0b11.
        assert!((p.get(0, 3) - expected).abs() < 1e-15);
        let noisy = p.apply_noise(FRAC_1_SQRT_2).unwrap();
        assert!((noisy.get(0, 3) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_trace() {
        let sc: Scenario = "2x3x2".parse().unwrap();
        let rho = make_state(&StateSpec::W { qubits: 3 }).unwrap().mix_white_noise(0.8).unwrap();
        let flat: Vec<f64> = (0..2 * sc.total_settings()).map(|i| 0.37 * i as f64 + 0.1).collect();
        let angles = AngleConfiguration::from_flat(&flat, &sc).unwrap();
        let p = probability_tensor(&rho, &angles, &sc).unwrap();
        for combo in 0..sc.setting_combinations() {
            for r in 0..8 {
                let b = brute_force(&rho, &angles, &sc, combo, r);
                assert!((p.get(combo, r) - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn w3_x_basis_from_amplitudes() {
        // Amplitude of |+++> in W_3 is 3 * (1/sqrt3) * (1/sqrt2)^3.
        let sc = Scenario::uniform(3, 1).unwrap();
        let rho = make_state(&StateSpec::W { qubits: 3 }).unwrap();
        let angles = AngleConfiguration::constant(&sc, Observable::new(0.0, 0.0));
        let p = probability_tensor(&rho, &angles, &sc).unwrap();
        let amp = 3.0 / 3f64.sqrt() * FRAC_1_SQRT_2.powi(3);
        assert!((p.get(0, 7) - amp * amp).abs() < 1e-15);
        assert!((p.get(0, 7) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn mixed_state_is_uniform() {
        let sc = Scenario::uniform(3, 2).unwrap();
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        let flat: Vec<f64> = (0..12).map(|i| (i as f64).sin() * 3.0).collect();
        let p = probability_tensor(&rho, &AngleConfiguration::from_flat(&flat, &sc).unwrap(), &sc).unwrap();
        assert!(p.values().iter().all(|&x| (x - 0.125).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch() {
        let sc = Scenario::uniform(3, 2).unwrap();
        let angles = AngleConfiguration::constant(&sc, Observable::new(0.0, 0.0));
        assert!(probability_tensor(&ghz2(), &angles, &sc).is_err());
        let sc2 = Scenario::uniform(2, 2).unwrap();
        assert!(probability_tensor(&ghz2(), &angles, &sc2).is_err());
    }

    #[test]
    fn noise_endpoints() {
        let sc = Scenario::uniform(2, 2).unwrap();
        let p = probability_tensor(&ghz2(), &chsh_angles(), &sc).unwrap();
        assert_eq!(p.apply_noise(1.0).unwrap(), p);
        assert!(p.apply_noise(0.0).unwrap().values().iter().all(|&x| x == 0.25));
        assert!(p.apply_noise(2.0).is_err());
    }

    #[test]
    fn signaling_detector_sees_tampering() {
        let sc = Scenario::uniform(2, 2).unwrap();
        let p = probability_tensor(&ghz2(), &chsh_angles(), &sc).unwrap();
        assert!(p.max_signaling_deviation() < 1e-15);
        let mut v = p.values().to_vec();
        v[0] += 0.1;
        v[1] -= 0.1;
        let bad = ProbabilityTensor::new(sc, v).unwrap();
        assert!(bad.max_signaling_deviation() > 0.09);
        assert!(bad.max_normalization_error() < 1e-15);
    }
}
