use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;

use super::Scenario;
use crate::error::{Error, Result};

/// Result of a dichotomic measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Minus,
    Plus,
}

impl Outcome {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::Config(format!("outcome must be +1 or -1, got {other}"))),
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit & 1 == 1 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn bit(self) -> usize {
        match self {
            Outcome::Minus => 0,
            Outcome::Plus => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Minus => -1.0,
            Outcome::Plus => 1.0,
        }
    }
}

/// Wrap into `[0, period)`.
pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can round up to `period` for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Rank-1 projective `+-1` observable on one qubit.
///
/// The `+1` eigenvector is `cos(pi/4 + theta)|0> + e^{i phi} sin(pi/4 + theta)|1>`
/// and the `-1` eigenvector uses `-pi/4` in place of `pi/4`. Shifting `theta`
/// by `pi` only flips the sign of both vectors, so `theta` is kept in
/// `[0, pi)` and `phi` in `[0, 2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observable {
    theta: f64,
    phi: f64,
}

impl Observable {
    pub fn new(theta: f64, phi: f64) -> Self {
        Observable {
            theta: wrap(theta, PI),
            phi: wrap(phi, TAU),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Eigenvector amplitudes `(<0|e>, <1|e>)` for the given outcome.
    pub fn eigenvector(&self, outcome: Outcome) -> [Complex64; 2] {
        let a = outcome.sign() * FRAC_PI_4 + self.theta;
        [
            Complex64::new(a.cos(), 0.0),
            Complex64::from_polar(a.sin(), self.phi),
        ]
    }

    /// Projector onto the eigenspace of `outcome`.
    pub fn projector(&self, outcome: Outcome) -> Matrix2<Complex64> {
        let e = self.eigenvector(outcome);
        Matrix2::new(
            e[0] * e[0].conj(),
            e[0] * e[1].conj(),
            e[1] * e[0].conj(),
            e[1] * e[1].conj(),
        )
    }

    /// Rows are the bras `<-|` and `<+|`; conjugating a state with this
    /// matrix puts outcome probabilities on the diagonal in bit order.
    pub(crate) fn measurement_rows(&self) -> [[Complex64; 2]; 2] {
        let m = self.eigenvector(Outcome::Minus);
        let p = self.eigenvector(Outcome::Plus);
        [[m[0].conj(), m[1].conj()], [p[0].conj(), p[1].conj()]]
    }
}

/// Projector for a `+-1` outcome given as a sign.
pub fn projector(obs: &Observable, outcome: i32) -> Result<Matrix2<Complex64>> {
    Ok(obs.projector(Outcome::from_sign(outcome)?))
}

/// Observables for every setting of every observer.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleConfiguration {
    observers: Vec<Vec<Observable>>,
}

impl AngleConfiguration {
    pub fn new(observers: Vec<Vec<Observable>>) -> Self {
        AngleConfiguration { observers }
    }

    /// Flat `[theta, phi, theta, phi, ...]` vector, observer by observer and
    /// setting by setting.
    pub fn from_flat(values: &[f64], scenario: &Scenario) -> Result<Self> {
        let expected = 2 * scenario.total_settings();
        if values.len() != expected {
            return Err(Error::Config(format!(
                "expected {expected} angles for scenario {scenario}, got {}",
                values.len()
            )));
        }
        let mut pairs = values.chunks_exact(2).map(|c| Observable::new(c[0], c[1]));
        let observers = scenario
            .settings()
            .iter()
            .map(|&m| pairs.by_ref().take(m).collect())
            .collect();
        Ok(AngleConfiguration { observers })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.observers
            .iter()
            .flatten()
            .flat_map(|o| [o.theta, o.phi])
            .collect()
    }

    /// Every observer measures the same observable for all `m_i` settings.
    pub fn constant(scenario: &Scenario, obs: Observable) -> Self {
        AngleConfiguration {
            observers: scenario.settings().iter().map(|&m| vec![obs; m]).collect(),
        }
    }

    pub fn observers(&self) -> &[Vec<Observable>] {
        &self.observers
    }

    pub fn get(&self, observer: usize, setting: usize) -> Option<&Observable> {
        self.observers.get(observer)?.get(setting)
    }

    pub fn matches(&self, scenario: &Scenario) -> bool {
        self.observers.len() == scenario.num_observers()
            && self
                .observers
                .iter()
                .zip(scenario.settings())
                .all(|(o, &m)| o.len() == m)
    }

    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        if self.matches(scenario) {
            Ok(())
        } else {
            let shape: Vec<usize> = self.observers.iter().map(Vec::len).collect();
            Err(Error::Config(format!(
                "angle configuration has shape {shape:?}, scenario is {scenario}"
            )))
        }
    }

    /// Appends an observable to one observer's setting list.
    pub fn with_extra_setting(&self, observer: usize, obs: Observable) -> Result<Self> {
        let mut observers = self.observers.clone();
        observers
            .get_mut(observer)
            .ok_or_else(|| Error::Index(format!("observer {observer}")))?
            .push(obs);
        Ok(AngleConfiguration { observers })
    }

    /// Observers reordered so that new observer `i` is old observer `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        AngleConfiguration {
            observers: perm.iter().map(|&i| self.observers[i].clone()).collect(),
        }
    }
}
