use std::io::Write;

use crate::error::{Error, Result};
use crate::quantum::{Outcome, ProbabilityTensor, Scenario};

/// Index of one atom of the joint local-realistic distribution.
///
/// Bit `scenario.atom_bit(i, j)` holds the outcome of observer `i`'s setting
/// `j` (`1` for `+1`), so index 0 assigns `-1` everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomIndex(usize);

impl AtomIndex {
    pub fn new(index: usize, scenario: &Scenario) -> Result<Self> {
        if index < scenario.atom_count() {
            Ok(AtomIndex(index))
        } else {
            Err(Error::Index(format!(
                "atom {index} outside [0, {}) for scenario {scenario}",
                scenario.atom_count()
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0
    }

    /// Outcome of every setting of every observer.
    pub fn assignment(self, scenario: &Scenario) -> Vec<Vec<Outcome>> {
        scenario
            .settings()
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                (0..m)
                    .map(|j| Outcome::from_bit(self.0 >> scenario.atom_bit(i, j)))
                    .collect()
            })
            .collect()
    }

    pub fn from_assignment(assignment: &[Vec<Outcome>], scenario: &Scenario) -> Result<Self> {
        let shape_ok = assignment.len() == scenario.num_observers()
            && assignment.iter().zip(scenario.settings()).all(|(a, &m)| a.len() == m);
        if !shape_ok {
            return Err(Error::Config(format!("assignment shape does not match scenario {scenario}")));
        }
        let mut index = 0;
        for (i, outcomes) in assignment.iter().enumerate() {
            for (j, o) in outcomes.iter().enumerate() {
                index |= o.bit() << scenario.atom_bit(i, j);
            }
        }
        Ok(AtomIndex(index))
    }
}

/// Outcome tuple that `atom` predicts under setting combination
/// `combination`.
pub fn atom_outcome(atom: AtomIndex, combination: usize, scenario: &Scenario) -> Result<usize> {
    if atom.0 >= scenario.atom_count() {
        return Err(Error::Index(format!("atom {} out of range", atom.0)));
    }
    if combination >= scenario.setting_combinations() {
        return Err(Error::Index(format!("setting combination {combination} out of range")));
    }
    let choice = scenario.decode_combination(combination);
    Ok(outcome_for_choice(atom.0, &choice, scenario))
}

fn outcome_for_choice(atom: usize, choice: &[usize], scenario: &Scenario) -> usize {
    choice.iter().enumerate().fold(0, |acc, (i, &s)| {
        acc << 1 | (atom >> scenario.atom_bit(i, s) & 1)
    })
}

/// Per combination, the atom bit consulted for each observer.
pub(crate) fn combination_bits(scenario: &Scenario) -> Vec<Vec<usize>> {
    (0..scenario.setting_combinations())
        .map(|c| {
            scenario
                .decode_combination(c)
                .iter()
                .enumerate()
                .map(|(i, &s)| scenario.atom_bit(i, s))
                .collect()
        })
        .collect()
}

/// Row layout of an [`LpProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowForm {
    /// One equality per (setting combination, outcome tuple), then the
    /// normalization row.
    Marginal,
    /// One equality per choice of an observer subset and a setting for each
    /// member, fixing the probability that every member outputs `+1`. The
    /// empty subset is the normalization row (row 0). Equivalent to
    /// [`RowForm::Marginal`] for no-signaling targets and free of redundant
    /// rows.
    AllPlus,
}

/// Equality-form LP maximizing `v` over atoms `p_k` and visibility `v`:
///
/// `sum_k A[row, k] p_k + visibility_column[row] v = rhs[row]`,
/// `0 <= p_k <= 1`, `0 <= v <= 1`.
///
/// Atom columns have unit entries, stored as row-index lists.
#[derive(Clone, Debug)]
pub struct LpProblem {
    form: RowForm,
    target: ProbabilityTensor,
    col_start: Vec<usize>,
    row_index: Vec<u32>,
    visibility: Vec<f64>,
    rhs: Vec<f64>,
}

impl LpProblem {
    /// Marginal-form program for a noise-free probability tensor.
    pub fn build(p: &ProbabilityTensor) -> Result<Self> {
        let sc = p.scenario();
        let c = sc.constraint_count();
        if c >= u32::MAX as usize {
            return Err(Error::Config(format!("scenario {sc} has too many rows")));
        }
        let n = sc.atom_count();
        let t = sc.outcome_tuples();
        let u = 1.0 / t as f64;
        let bits = combination_bits(sc);
        let per_col = sc.setting_combinations() + 1;
        let mut row_index = Vec::with_capacity(n * per_col);
        let mut col_start = Vec::with_capacity(n + 1);
        for atom in 0..n {
            col_start.push(row_index.len());
            for (combo, b) in bits.iter().enumerate() {
                let r = b.iter().fold(0, |acc, &bit| acc << 1 | (atom >> bit & 1));
                row_index.push((combo * t + r) as u32);
            }
            row_index.push(c as u32);
        }
        col_start.push(row_index.len());
        let mut visibility: Vec<f64> = p.values().iter().map(|q| u - q).collect();
        visibility.push(0.0);
        let mut rhs = vec![u; c];
        rhs.push(1.0);
        Ok(LpProblem {
            form: RowForm::Marginal,
            target: p.clone(),
            col_start,
            row_index,
            visibility,
            rhs,
        })
    }

    /// All-plus form of the same program (see [`RowForm::AllPlus`]).
    pub fn build_all_plus(p: &ProbabilityTensor) -> Result<Self> {
        let sc = p.scenario();
        let n_obs = sc.num_observers();
        let radix: Vec<usize> = sc.settings().iter().map(|m| m + 1).collect();
        let rows: usize = radix.iter().product();
        if rows >= u32::MAX as usize {
            return Err(Error::Config(format!("scenario {sc} has too many rows")));
        }
        // Row r: per observer 0 = absent, j + 1 = setting j.
        let decode = |mut r: usize| {
            let mut out = vec![0; n_obs];
            for (slot, &b) in out.iter_mut().zip(&radix).rev() {
                *slot = r % b;
                r /= b;
            }
            out
        };
        let mut visibility = Vec::with_capacity(rows);
        let mut rhs = Vec::with_capacity(rows);
        for r in 0..rows {
            let choice = decode(r);
            let subset = choice
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .fold(0usize, |m, (i, _)| m | 1 << i);
            let combo = sc.encode_combination(&choice.iter().map(|&c| c.saturating_sub(1)).collect::<Vec<_>>());
            let u = 0.5f64.powi(subset.count_ones() as i32);
            let q = if subset == 0 { 1.0 } else { p.all_plus_marginal(subset, combo) };
            visibility.push(u - q);
            rhs.push(u);
        }

        let n = sc.atom_count();
        let mut col_start = Vec::with_capacity(n + 1);
        let mut row_index = Vec::new();
        let mut rows_of_atom: Vec<usize> = Vec::new();
        let mut next: Vec<usize> = Vec::new();
        for atom in 0..n {
            col_start.push(row_index.len());
            // Rows are mixed-radix over observers, each observer either
            // absent or at one of its settings with outcome +1.
            rows_of_atom.clear();
            rows_of_atom.push(0);
            for (i, &m) in sc.settings().iter().enumerate() {
                next.clear();
                for &r in &rows_of_atom {
                    next.push(r * radix[i]);
                    next.extend(
                        (0..m)
                            .filter(|&j| atom >> sc.atom_bit(i, j) & 1 == 1)
                            .map(|j| r * radix[i] + j + 1),
                    );
                }
                std::mem::swap(&mut rows_of_atom, &mut next);
            }
            row_index.extend(rows_of_atom.iter().map(|&r| r as u32));
        }
        col_start.push(row_index.len());
        Ok(LpProblem {
            form: RowForm::AllPlus,
            target: p.clone(),
            col_start,
            row_index,
            visibility,
            rhs,
        })
    }

    pub fn form(&self) -> RowForm {
        self.form
    }

    pub fn scenario(&self) -> &Scenario {
        self.target.scenario()
    }

    /// Noise-free quantum probabilities the program was built from.
    pub fn target(&self) -> &ProbabilityTensor {
        &self.target
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.col_start.len() - 1
    }

    /// Atom columns plus the visibility column.
    pub fn num_columns(&self) -> usize {
        self.num_atoms() + 1
    }

    /// Rows where atom `k` has a unit coefficient.
    pub fn column(&self, k: usize) -> &[u32] {
        &self.row_index[self.col_start[k]..self.col_start[k + 1]]
    }

    pub fn visibility_column(&self) -> &[f64] {
        &self.visibility
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn nonzeros(&self) -> usize {
        self.row_index.len() + self.visibility.iter().filter(|x| **x != 0.0).count()
    }

    /// Largest violation of this program's equalities.
    pub fn max_row_residual(&self, atoms: &[f64], v: f64) -> f64 {
        let mut lhs: Vec<f64> = self.visibility.iter().map(|c| c * v).collect();
        for (k, &p) in atoms.iter().enumerate() {
            if p != 0.0 {
                for &r in self.column(k) {
                    lhs[r as usize] += p;
                }
            }
        }
        lhs.iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the program in CPLEX LP text format. Atoms are `p<k>`, the
    /// visibility is `v`, rows are `r<i>`.
    pub fn write_cplex_lp<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "\\ scenario {} ({:?} rows)", self.scenario(), self.form)?;
        writeln!(out, "Maximize")?;
        writeln!(out, " z: v")?;
        writeln!(out, "Subject To")?;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.num_rows()];
        for k in 0..self.num_atoms() {
            for &r in self.column(k) {
                rows[r as usize].push(k);
            }
        }
        for (i, atoms) in rows.iter().enumerate() {
            write!(out, " r{i}:")?;
            for (col, k) in atoms.iter().enumerate() {
                if col > 0 && col % 8 == 0 {
                    write!(out, "\n   ")?;
                }
                write!(out, " + p{k}")?;
            }
            let c = self.visibility[i];
            if c != 0.0 {
                write!(out, " {} {:.17e} v", if c < 0.0 { '-' } else { '+' }, c.abs())?;
            }
            writeln!(out, " = {:.17e}", self.rhs[i])?;
        }
        writeln!(out, "Bounds")?;
        writeln!(out, " 0 <= v <= 1")?;
        for k in 0..self.num_atoms() {
            writeln!(out, " 0 <= p{k} <= 1")?;
        }
        writeln!(out, "End")
    }
}

/// Marginal-form program for `p`; `scenario` must match the tensor.
pub fn build_lp(p: &ProbabilityTensor, scenario: &Scenario) -> Result<LpProblem> {
    if p.scenario() != scenario {
        return Err(Error::Config(format!(
            "tensor scenario {} does not match {scenario}",
            p.scenario()
        )));
    }
    LpProblem::build(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus_minus(s: &str) -> Vec<Outcome> {
        s.chars().map(|c| if c == '+' { Outcome::Plus } else { Outcome::Minus }).collect()
    }

    #[test]
    fn extreme_atoms() {
        let sc = Scenario::uniform(2, 2).unwrap();
        for combo in 0..4 {
            assert_eq!(atom_outcome(AtomIndex(0), combo, &sc).unwrap(), 0);
            assert_eq!(atom_outcome(AtomIndex(15), combo, &sc).unwrap(), 3);
        }
    }

    #[test]
    fn reads_selected_bits() {
        let sc = Scenario::uniform(2, 2).unwrap();
        // (a1, a2, b1, b2) = (+, -, -, +), settings (A2, B1) -> (-, -)
        let atom = AtomIndex::from_assignment(&[plus_minus("+-"), plus_minus("-+")], &sc).unwrap();
        assert_eq!(atom.index(), 0b1001);
        let combo = sc.encode_combination(&[1, 0]);
        assert_eq!(atom_outcome(atom, combo, &sc).unwrap(), 0);
        // (A1, B2) -> (+, +)
        assert_eq!(atom_outcome(atom, sc.encode_combination(&[0, 1]), &sc).unwrap(), 3);
    }

    #[test]
    fn out_of_range() {
        let sc = Scenario::uniform(2, 2).unwrap();
        assert!(AtomIndex::new(16, &sc).is_err());
        assert!(atom_outcome(AtomIndex(3), 4, &sc).is_err());
        assert!(atom_outcome(AtomIndex(16), 0, &sc).is_err());
    }

    #[test]
    fn assignment_round_trip() {
        let sc: Scenario = "2x3x1".parse().unwrap();
        for k in 0..sc.atom_count() {
            let a = AtomIndex(k).assignment(&sc);
            assert_eq!(AtomIndex::from_assignment(&a, &sc).unwrap().index(), k);
        }
    }

    #[test]
    fn marginal_shape() {
        for (spec, atoms, rows) in [("2x2", 16, 16), ("2x2x2", 64, 64), ("6x6x6", 1 << 18, 1728)] {
            let sc: Scenario = spec.parse().unwrap();
            assert_eq!(sc.atom_count(), atoms);
            assert_eq!(sc.constraint_count(), rows);
            if atoms <= 64 {
                let lp = LpProblem::build(&ProbabilityTensor::uniform(&sc)).unwrap();
                assert_eq!(lp.num_rows(), rows + 1);
                assert_eq!(lp.num_columns(), atoms + 1);
                for k in 0..atoms {
                    // one unit per setting combination plus normalization
                    assert_eq!(lp.column(k).len(), sc.setting_combinations() + 1);
                }
            }
        }
    }

    #[test]
    fn all_plus_rows_for_two_by_two() {
        // Rows of the 2x2 program as sets of atoms, keyed by (combination, outcome).
        let sc = Scenario::uniform(2, 2).unwrap();
        let lp = LpProblem::build(&ProbabilityTensor::uniform(&sc)).unwrap();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); 17];
        for k in 0..16 {
            for &r in lp.column(k) {
                rows[r as usize].push(k);
            }
        }
        // (-,-) under (A1,B1), (A1,B2), (A2,B1), (A2,B2)
        assert_eq!(rows[0], vec![0, 1, 4, 5]);
        assert_eq!(rows[4], vec![0, 2, 4, 6]);
        assert_eq!(rows[8], vec![0, 1, 8, 9]);
        assert_eq!(rows[12], vec![0, 2, 8, 10]);
        assert_eq!(rows[16].len(), 16);
    }

    #[test]
    fn all_plus_shape() {
        let sc: Scenario = "2x3x2".parse().unwrap();
        let lp = LpProblem::build_all_plus(&ProbabilityTensor::uniform(&sc)).unwrap();
        assert_eq!(lp.num_rows(), 3 * 4 * 3);
        assert_eq!(lp.column(0), &[0]);
        assert_eq!(lp.column(sc.atom_count() - 1).len(), 36);
        // uniform target: visibility column vanishes
        assert!(lp.visibility_column().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn uniform_atoms_satisfy_both_forms_at_zero() {
        let sc: Scenario = "2x2x3".parse().unwrap();
        let p = ProbabilityTensor::uniform(&sc);
        let atoms = vec![1.0 / sc.atom_count() as f64; sc.atom_count()];
        for lp in [LpProblem::build(&p).unwrap(), LpProblem::build_all_plus(&p).unwrap()] {
            assert!(lp.max_row_residual(&atoms, 0.0) < 1e-14);
        }
    }

    #[test]
    fn cplex_export_mentions_every_row() {
        let sc = Scenario::uniform(2, 2).unwrap();
        let lp = LpProblem::build(&ProbabilityTensor::uniform(&sc)).unwrap();
        let mut buf = Vec::new();
        lp.write_cplex_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(" r16:"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn build_lp_checks_scenario() {
        let p = ProbabilityTensor::uniform(&Scenario::uniform(2, 2).unwrap());
        assert!(build_lp(&p, &Scenario::uniform(2, 3).unwrap()).is_err());
    }
}
