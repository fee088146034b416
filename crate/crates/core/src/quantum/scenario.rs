use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Observer count and per-observer setting counts of a Bell experiment.
///
/// Index conventions shared by every module:
///
/// * observer 1 owns the most significant position of basis indices, outcome
///   tuples and setting combinations (all mixed-radix, observer 1 first);
/// * outcome `-1` is bit 0 and outcome `+1` is bit 1;
/// * an atom (joint outcome assignment to every setting of every observer) is
///   an integer of `sum(m_i)` bits, observer 1's first setting most
///   significant, so atom 0 is the all-minus assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scenario {
    settings: Vec<usize>,
    // Offset of each observer's first setting among the atom bits, counted
    // from the most significant end.
    offsets: Vec<usize>,
    atom_bits: usize,
    combinations: usize,
}

impl Scenario {
    pub fn new(settings: Vec<usize>) -> Result<Self> {
        if settings.len() < 2 {
            return Err(Error::Config(format!(
                "a scenario needs at least 2 observers, got {}",
                settings.len()
            )));
        }
        if let Some(i) = settings.iter().position(|&m| m == 0) {
            return Err(Error::Config(format!("observer {} has no settings", i + 1)));
        }
        let overflow = || Error::Config(format!("scenario {settings:?} exceeds the native integer width"));
        let atom_bits = settings
            .iter()
            .try_fold(0usize, |acc, &m| acc.checked_add(m))
            .ok_or_else(overflow)?;
        if atom_bits >= usize::BITS as usize {
            return Err(overflow());
        }
        if settings.len() >= usize::BITS as usize {
            return Err(overflow());
        }
        let combinations = settings
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(overflow)?;
        combinations
            .checked_mul(1usize << settings.len())
            .and_then(|c| c.checked_add(1))
            .ok_or_else(overflow)?;
        // Atom count plus the visibility column.
        (1usize << atom_bits).checked_add(1).ok_or_else(overflow)?;

        let mut offsets = Vec::with_capacity(settings.len());
        let mut acc = 0;
        for &m in &settings {
            offsets.push(acc);
            acc += m;
        }
        Ok(Scenario {
            settings,
            offsets,
            atom_bits,
            combinations,
        })
    }

    /// `count` observers with `m` settings each.
    pub fn uniform(count: usize, m: usize) -> Result<Self> {
        Scenario::new(vec![m; count])
    }

    pub fn num_observers(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    pub fn total_settings(&self) -> usize {
        self.atom_bits
    }

    /// Number of joint-distribution atoms, `2^(m_1 + ... + m_N)`.
    pub fn atom_count(&self) -> usize {
        1usize << self.atom_bits
    }

    /// Number of marginal equalities, `2^N m_1 ... m_N`.
    pub fn constraint_count(&self) -> usize {
        self.combinations << self.settings.len()
    }

    pub fn setting_combinations(&self) -> usize {
        self.combinations
    }

    pub fn outcome_tuples(&self) -> usize {
        1usize << self.settings.len()
    }

    /// Dimension of the joint Hilbert space.
    pub fn dim(&self) -> usize {
        self.outcome_tuples()
    }

    /// Per-observer settings of a combination index.
    pub fn decode_combination(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.settings.len()];
        for (slot, &m) in out.iter_mut().zip(&self.settings).rev() {
            *slot = index % m;
            index /= m;
        }
        out
    }

    pub fn encode_combination(&self, choice: &[usize]) -> usize {
        choice
            .iter()
            .zip(&self.settings)
            .fold(0, |acc, (&s, &m)| acc * m + s)
    }

    /// Bit position (from the least significant end) of the atom bit holding
    /// the outcome of `observer`'s `setting`.
    pub fn atom_bit(&self, observer: usize, setting: usize) -> usize {
        self.atom_bits - 1 - (self.offsets[observer] + setting)
    }

    /// Bit position of `observer`'s outcome inside an outcome-tuple index.
    pub fn outcome_bit(&self, observer: usize) -> usize {
        self.settings.len() - 1 - observer
    }

    /// Scenario with one more setting for `observer`.
    pub fn with_extra_setting(&self, observer: usize) -> Result<Self> {
        let mut settings = self.settings.clone();
        *settings
            .get_mut(observer)
            .ok_or_else(|| Error::Index(format!("observer {observer}")))? += 1;
        Scenario::new(settings)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.settings.iter().map(|m| m.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// Accepts `2x2x3` or `2,2,3`.
impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let sep = if s.contains(',') { ',' } else { 'x' };
        let settings = s
            .split(sep)
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad setting count {p:?} in scenario {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(settings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_setting_lists() {
        let s = Scenario::uniform(2, 2).unwrap();
        assert_eq!(s.atom_count(), 16);
        assert_eq!(s.constraint_count(), 16);

        let s = Scenario::uniform(3, 6).unwrap();
        assert_eq!(s.constraint_count(), 1728);

        let s = Scenario::uniform(3, 2).unwrap();
        assert_eq!((s.atom_count(), s.constraint_count()), (64, 64));

        let s: Scenario = "3x3x3x2".parse().unwrap();
        assert_eq!(s.atom_count(), 1 << 11);
        assert_eq!(s.constraint_count(), 16 * 54);
    }

    #[test]
    fn rejects_degenerate_and_oversized() {
        assert!(Scenario::new(vec![2]).is_err());
        assert!(Scenario::new(vec![2, 0]).is_err());
        assert!(Scenario::new(vec![40, 40]).is_err());
        assert!("2xq".parse::<Scenario>().is_err());
    }

    #[test]
    fn combination_round_trip() {
        let s: Scenario = "2,3,4".parse().unwrap();
        for idx in 0..s.setting_combinations() {
            assert_eq!(s.encode_combination(&s.decode_combination(idx)), idx);
        }
        assert_eq!(s.decode_combination(1), vec![0, 0, 1]);
        assert_eq!(s.to_string(), "2x3x4");
    }

    #[test]
    fn atom_bits_put_first_observer_high() {
        let s = Scenario::uniform(2, 2).unwrap();
        assert_eq!(s.atom_bit(0, 0), 3);
        assert_eq!(s.atom_bit(0, 1), 2);
        assert_eq!(s.atom_bit(1, 0), 1);
        assert_eq!(s.atom_bit(1, 1), 0);
        assert_eq!(s.outcome_bit(0), 1);
    }
}
