//! Bounded-variable revised simplex for [`LpProblem`].
//!
//! Columns `0..n` are atoms, column `n` is the visibility and columns
//! `n + 1..n + 1 + m` are phase-one artificials (signed unit columns). The
//! basis inverse is kept dense, column-major, updated by eta transformations
//! and rebuilt by Gauss-Jordan elimination every `refactor_every` pivots.

use super::LpProblem;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    /// Degenerate pivots in a row, as a multiple of the row count, before
    /// switching to Bland's rule.
    pub stall_factor: usize,
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-10,
            refactor_every: 100,
            stall_factor: 5,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimplexStats {
    pub iterations: usize,
    pub phase_one_iterations: usize,
    pub bound_flips: usize,
    pub refactorizations: usize,
    pub bland_switches: usize,
}

/// Basic variables of an optimal basis, reusable as a starting point for a
/// program with the same structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    rows: usize,
    atoms: usize,
    basic: Vec<usize>,
    at_upper: Vec<usize>,
}

impl Basis {
    /// Whether this basis has the shape of `lp`'s.
    pub fn fits(&self, lp: &LpProblem) -> bool {
        self.rows == lp.num_rows() && self.atoms == lp.num_atoms()
    }
}

pub(crate) struct SimplexOutcome {
    /// Atoms followed by the visibility.
    pub values: Vec<f64>,
    pub stats: SimplexStats,
    pub basis: Basis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
}

struct Solver<'a> {
    lp: &'a LpProblem,
    opts: SimplexOptions,
    m: usize,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    // Column-major basis inverse.
    binv: Vec<f64>,
    art_sign: Vec<f64>,
    since_refactor: usize,
    degenerate_streak: usize,
    bland: bool,
    stats: SimplexStats,
    // scratch
    y: Vec<f64>,
    w: Vec<f64>,
}

enum Step {
    Optimal,
    Progress,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LpProblem, opts: SimplexOptions) -> Self {
        let m = lp.num_rows();
        let n = lp.num_atoms();
        let total = n + 1 + m;
        let mut lower = vec![0.0; total];
        let mut upper = vec![1.0; total];
        for u in &mut upper[n + 1..] {
            *u = f64::INFINITY;
        }
        lower.truncate(total);
        Solver {
            lp,
            opts,
            m,
            n,
            lower,
            upper,
            cost: vec![0.0; total],
            x: vec![0.0; total],
            state: vec![State::Lower; total],
            basis: Vec::with_capacity(m),
            binv: vec![0.0; m * m],
            art_sign: vec![1.0; m],
            since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
            stats: SimplexStats::default(),
            y: vec![0.0; m],
            w: vec![0.0; m],
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j > self.n
    }

    /// `a_j . y`
    fn dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.lp.column(j).iter().map(|&r| y[r as usize]).sum()
        } else if j == self.n {
            self.lp.visibility_column().iter().zip(y).map(|(a, b)| a * b).sum()
        } else {
            let i = j - self.n - 1;
            self.art_sign[i] * y[i]
        }
    }

    /// Dense column `a_j`.
    fn scatter(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for &r in self.lp.column(j) {
                out[r as usize] = 1.0;
            }
        } else if j == self.n {
            out.copy_from_slice(self.lp.visibility_column());
        } else {
            let i = j - self.n - 1;
            out[i] = self.art_sign[i];
        }
    }

    /// `w = B^-1 a_j`
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        let w = &mut self.w;
        w.iter_mut().for_each(|v| *v = 0.0);
        let add = |r: usize, coef: f64, w: &mut [f64]| {
            let col = &self.binv[r * m..(r + 1) * m];
            for (wi, b) in w.iter_mut().zip(col) {
                *wi += coef * b;
            }
        };
        if j < self.n {
            for &r in self.lp.column(j) {
                add(r as usize, 1.0, w);
            }
        } else if j == self.n {
            for (r, &c) in self.lp.visibility_column().iter().enumerate() {
                if c != 0.0 {
                    add(r, c, w);
                }
            }
        } else {
            let i = j - self.n - 1;
            add(i, self.art_sign[i], w);
        }
    }

    /// `y = c_B^T B^-1`
    fn btran_costs(&mut self) {
        let m = self.m;
        let cb: Vec<(usize, f64)> = self
            .basis
            .iter()
            .enumerate()
            .filter_map(|(i, &j)| (self.cost[j] != 0.0).then(|| (i, self.cost[j])))
            .collect();
        for r in 0..m {
            let col = &self.binv[r * m..(r + 1) * m];
            self.y[r] = cb.iter().map(|&(i, c)| c * col[i]).sum();
        }
    }

    fn start_with_artificials(&mut self) {
        let m = self.m;
        // Structurals at their lower bound (zero): residual is the rhs.
        let rhs = self.lp.rhs().to_vec();
        self.basis.clear();
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for (i, &b) in rhs.iter().enumerate() {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            self.art_sign[i] = sign;
            let j = self.n + 1 + i;
            self.basis.push(j);
            self.state[j] = State::Basic(i);
            self.x[j] = b.abs();
            self.binv[i * m + i] = sign;
        }
        self.since_refactor = 0;
    }

    /// Rebuild `B^-1` and the basic values from scratch.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        // Row-major augmented [B | I] elimination on a dense copy.
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.scatter(j, &mut col);
            for r in 0..m {
                a[r * m + pos] = col[r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let (piv, val) = (k..m)
                .map(|r| (r, a[r * m + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if val < 1e-11 {
                return Err(Error::Numerical(format!("singular basis at column {k} (pivot {val:.3e})")));
            }
            if piv != k {
                for c in 0..m {
                    a.swap(k * m + c, piv * m + c);
                    inv.swap(k * m + c, piv * m + c);
                }
            }
            let d = 1.0 / a[k * m + k];
            for c in 0..m {
                a[k * m + c] *= d;
                inv[k * m + c] *= d;
            }
            let (krow_a, krow_i) = (a[k * m..(k + 1) * m].to_vec(), inv[k * m..(k + 1) * m].to_vec());
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = a[r * m + k];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    a[r * m + c] -= f * krow_a[c];
                    inv[r * m + c] -= f * krow_i[c];
                }
            }
        }
        // inv is row-major B^-1; store column-major.
        for r in 0..m {
            for c in 0..m {
                self.binv[c * m + r] = inv[r * m + c];
            }
        }
        self.since_refactor = 0;
        self.stats.refactorizations += 1;
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut residual = self.lp.rhs().to_vec();
        let mut col = vec![0.0; m];
        for j in 0..self.x.len() {
            if matches!(self.state[j], State::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            self.scatter(j, &mut col);
            for (r, c) in residual.iter_mut().zip(&col) {
                *r -= c * self.x[j];
            }
        }
        let mut xb = vec![0.0; m];
        for (r, &res) in residual.iter().enumerate() {
            if res != 0.0 {
                let col = &self.binv[r * m..(r + 1) * m];
                for (x, b) in xb.iter_mut().zip(col) {
                    *x += res * b;
                }
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[i];
        }
    }

    fn eligible(&self, j: usize, d: f64) -> bool {
        if self.upper[j] <= self.lower[j] {
            return false;
        }
        match self.state[j] {
            State::Lower => d < -self.opts.optimality_tol,
            State::Upper => d > self.opts.optimality_tol,
            State::Basic(_) => false,
        }
    }

    fn price(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.x.len() {
            if matches!(self.state[j], State::Basic(_)) || self.upper[j] <= self.lower[j] {
                continue;
            }
            let d = self.cost[j] - self.dot(j, &self.y);
            if !self.eligible(j, d) {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<Step> {
        if self.since_refactor >= self.opts.refactor_every {
            self.refactor()?;
        }
        self.btran_costs();
        let (q, d) = match self.price() {
            Some(e) => e,
            None => {
                if self.since_refactor == 0 {
                    return Ok(Step::Optimal);
                }
                // Confirm optimality on a fresh factorization.
                self.refactor()?;
                self.btran_costs();
                match self.price() {
                    Some(e) => e,
                    None => return Ok(Step::Optimal),
                }
            }
        };
        self.ftran(q);
        let dir = if d < 0.0 { 1.0 } else { -1.0 };
        let range = self.upper[q] - self.lower[q];
        let (leave, step) = self.ratio_test(dir, range)?;
        self.apply(q, dir, range, leave, step);
        Ok(Step::Progress)
    }

    /// Moves entering `q` by `step` in direction `dir` and updates the basis.
    fn apply(&mut self, q: usize, dir: f64, range: f64, leave: Option<(usize, bool)>, step: f64) {
        self.stats.iterations += 1;
        if step * self.w.iter().fold(0.0f64, |a, b| a.max(b.abs())) < 1e-12 && range > step {
            self.degenerate_streak += 1;
            if !self.bland && self.degenerate_streak > self.opts.stall_factor * self.m {
                self.bland = true;
                self.stats.bland_switches += 1;
            }
        } else {
            self.degenerate_streak = 0;
            self.bland = false;
        }

        self.x[q] += dir * step;
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] -= dir * step * self.w[i];
        }
        match leave {
            None => {
                // Bound flip.
                self.stats.bound_flips += 1;
                self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some((p, to_upper)) => {
                let out = self.basis[p];
                self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                self.state[out] = if to_upper { State::Upper } else { State::Lower };
                if self.is_artificial(out) {
                    // Artificials never re-enter.
                    self.upper[out] = 0.0;
                    self.x[out] = 0.0;
                }
                self.basis[p] = q;
                self.state[q] = State::Basic(p);
                self.pivot(p);
            }
        }
    }

    /// Installs a previous basis. Returns `false` if it is singular here.
    fn install(&mut self, warm: &Basis) -> Result<bool> {
        let total = self.x.len();
        for j in self.n + 1..total {
            self.upper[j] = 0.0;
        }
        self.state.iter_mut().for_each(|s| *s = State::Lower);
        self.x.iter_mut().for_each(|x| *x = 0.0);
        for &j in &warm.at_upper {
            self.state[j] = State::Upper;
            self.x[j] = self.upper[j];
        }
        self.basis.clear();
        for (p, &j) in warm.basic.iter().enumerate() {
            self.basis.push(j);
            self.state[j] = State::Basic(p);
        }
        match self.refactor() {
            Ok(()) => Ok(true),
            Err(Error::Numerical(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Minimizes the sum of bound violations of the basic variables. Returns
    /// whether a feasible basis was reached.
    fn composite_phase_one(&mut self, limit: usize) -> Result<bool> {
        let tol = self.opts.feasibility_tol;
        loop {
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            self.cost.iter_mut().for_each(|c| *c = 0.0);
            let mut infeasible = false;
            for &j in &self.basis {
                if self.x[j] < self.lower[j] - tol {
                    self.cost[j] = -1.0;
                    infeasible = true;
                } else if self.x[j] > self.upper[j] + tol {
                    self.cost[j] = 1.0;
                    infeasible = true;
                }
            }
            if !infeasible {
                return Ok(true);
            }
            if self.stats.iterations >= limit {
                return Ok(false);
            }
            self.btran_costs();
            let Some((q, d)) = self.price() else {
                return Ok(false);
            };
            self.ftran(q);
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let range = self.upper[q] - self.lower[q];
            let piv = self.opts.pivot_tol;
            // Every bound a basic variable reaches is a breakpoint.
            let mut best: Option<(usize, bool, f64, f64)> = None;
            for (i, &j) in self.basis.iter().enumerate() {
                let alpha = dir * self.w[i];
                let (lo, hi, x) = (self.lower[j], self.upper[j], self.x[j]);
                let hit = if alpha > piv {
                    if x > hi + tol {
                        Some(((x - hi) / alpha, true))
                    } else if x >= lo - tol {
                        Some((((x - lo) / alpha).max(0.0), false))
                    } else {
                        None
                    }
                } else if alpha < -piv {
                    if x < lo - tol {
                        Some(((lo - x) / -alpha, false))
                    } else if x <= hi + tol && hi.is_finite() {
                        Some((((hi - x) / -alpha).max(0.0), true))
                    } else {
                        None
                    }
                } else {
                    None
                };
                if let Some((ratio, up)) = hit {
                    let better = match best {
                        None => true,
                        Some((_, _, r, a)) => ratio < r - 1e-12 || (ratio <= r + 1e-12 && alpha.abs() > a),
                    };
                    if better {
                        best = Some((i, up, ratio, alpha.abs()));
                    }
                }
            }
            let (leave, step) = match best {
                Some((_, _, r, _)) if range <= r => (None, range),
                Some((i, up, r, _)) => (Some((i, up)), r),
                None if range.is_finite() => (None, range),
                None => return Ok(false),
            };
            self.apply(q, dir, range, leave, step);
        }
    }

    /// Returns the leaving position (and whether it leaves at its upper
    /// bound), or `None` for a bound flip of the entering variable.
    fn ratio_test(&self, dir: f64, range: f64) -> Result<(Option<(usize, bool)>, f64)> {
        let tol = self.opts.feasibility_tol;
        let piv = self.opts.pivot_tol;
        if self.bland {
            // Textbook minimum ratio, ties to the smallest variable index.
            let mut best: Option<(usize, bool, f64)> = None;
            for (i, &j) in self.basis.iter().enumerate() {
                let alpha = dir * self.w[i];
                let (ratio, up) = if alpha > piv {
                    (((self.x[j] - self.lower[j]) / alpha).max(0.0), false)
                } else if alpha < -piv && self.upper[j].is_finite() {
                    (((self.upper[j] - self.x[j]) / -alpha).max(0.0), true)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((bi, _, br)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && j < self.basis[bi]),
                };
                if better {
                    best = Some((i, up, ratio));
                }
            }
            return match best {
                Some((_, _, r)) if range <= r => Ok((None, range)),
                Some((i, up, r)) => Ok((Some((i, up)), r)),
                None if range.is_finite() => Ok((None, range)),
                None => Err(Error::Numerical("unbounded direction".into())),
            };
        }

        // Harris two-pass test.
        let mut bound = range;
        for (i, &j) in self.basis.iter().enumerate() {
            let alpha = dir * self.w[i];
            if alpha > piv {
                bound = bound.min((self.x[j] - self.lower[j] + tol) / alpha);
            } else if alpha < -piv && self.upper[j].is_finite() {
                bound = bound.min((self.upper[j] - self.x[j] + tol) / -alpha);
            }
        }
        if !bound.is_finite() {
            return Err(Error::Numerical("unbounded direction".into()));
        }
        if range <= bound {
            return Ok((None, range));
        }
        let mut best: Option<(usize, bool, f64, f64)> = None;
        for (i, &j) in self.basis.iter().enumerate() {
            let alpha = dir * self.w[i];
            let (ratio, up) = if alpha > piv {
                ((self.x[j] - self.lower[j]) / alpha, false)
            } else if alpha < -piv && self.upper[j].is_finite() {
                ((self.upper[j] - self.x[j]) / -alpha, true)
            } else {
                continue;
            };
            if ratio <= bound && best.map_or(true, |(_, _, _, a)| alpha.abs() > a) {
                best = Some((i, up, ratio, alpha.abs()));
            }
        }
        match best {
            Some((i, up, ratio, _)) => Ok((Some((i, up)), ratio.max(0.0))),
            None => Err(Error::Numerical("ratio test found no leaving variable".into())),
        }
    }

    /// Eta update of `B^-1` for entering column `w` at position `p`.
    fn pivot(&mut self, p: usize) {
        let m = self.m;
        let wp = self.w[p];
        for r in 0..m {
            let col = &mut self.binv[r * m..(r + 1) * m];
            let t = col[p] / wp;
            if t != 0.0 {
                for (c, w) in col.iter_mut().zip(&self.w) {
                    *c -= w * t;
                }
            }
            col[p] = t;
        }
        self.since_refactor += 1;
    }

    fn run(&mut self, limit: usize) -> Result<()> {
        loop {
            if self.stats.iterations >= limit {
                return Err(Error::Numerical(format!(
                    "iteration limit {limit} reached (cycling or stalling)"
                )));
            }
            if let Step::Optimal = self.iterate()? {
                return Ok(());
            }
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Pivot basic artificials out where a structural can replace them; the
    /// rest sit on redundant rows and stay basic, fixed at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        for p in 0..m {
            let j = self.basis[p];
            if !self.is_artificial(j) {
                continue;
            }
            // Row p of B^-1.
            let row: Vec<f64> = (0..m).map(|r| self.binv[r * m + p]).collect();
            let candidate = (0..=self.n)
                .filter(|&k| !matches!(self.state[k], State::Basic(_)))
                .map(|k| (k, self.dot(k, &row)))
                .filter(|(_, a)| a.abs() > 1e-7)
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            if let Some((k, _)) = candidate {
                self.ftran(k);
                self.state[j] = State::Lower;
                self.x[j] = 0.0;
                self.basis[p] = k;
                self.state[k] = State::Basic(p);
                self.pivot(p);
            }
        }
        self.refactor()
    }
}

/// Maximizes the visibility. Returns atom values followed by `v`.
#[cfg(test)]
pub(crate) fn solve(lp: &LpProblem, opts: &SimplexOptions) -> Result<SimplexOutcome> {
    solve_from(lp, opts, None)
}

/// Maximizes the visibility, starting from `warm` when it fits and can be made feasible,
/// otherwise from the artificial basis.
pub(crate) fn solve_from(lp: &LpProblem, opts: &SimplexOptions, warm: Option<&Basis>) -> Result<SimplexOutcome> {
    let mut s = Solver::new(lp, opts.clone());
    let limit = opts
        .max_iterations
        .unwrap_or(20 * (s.m + s.n) + 10_000);

    let mut warmed = false;
    if let Some(b) = warm.filter(|b| b.fits(lp)) {
        if s.install(b)? && s.composite_phase_one(limit / 4)? {
            s.stats.phase_one_iterations = s.stats.iterations;
            warmed = true;
        } else {
            log::trace!("warm basis rejected after {} iterations", s.stats.iterations);
            let spent = s.stats.iterations;
            s = Solver::new(lp, opts.clone());
            s.stats.iterations = spent;
        }
    }
    if !warmed {
        cold_phase_one(&mut s, limit)?;
    }

    // Phase two: maximize v.
    s.cost.iter_mut().for_each(|c| *c = 0.0);
    s.cost[s.n] = -1.0;
    s.bland = false;
    s.degenerate_streak = 0;
    s.run(limit)?;
    s.refactor()?;
    let infeas = s.infeasibility();
    if infeas > 1e-7 {
        return Err(Error::Numerical(format!("final basis infeasible by {infeas:.3e}")));
    }

    let basis = Basis {
        rows: s.m,
        atoms: s.n,
        basic: s.basis.clone(),
        at_upper: (0..s.x.len()).filter(|&j| s.state[j] == State::Upper).collect(),
    };
    let values = s.x[..=s.n].to_vec();
    Ok(SimplexOutcome {
        values,
        stats: s.stats,
        basis,
    })
}

/// Phase one over artificials: minimize their sum from the slack basis.
fn cold_phase_one(s: &mut Solver<'_>, limit: usize) -> Result<()> {
    let start = s.stats.iterations;
    s.start_with_artificials();
    for j in s.n + 1..s.x.len() {
        s.cost[j] = 1.0;
    }
    s.run(limit)?;
    s.stats.phase_one_iterations = s.stats.iterations - start;
    let scale = s.lp.rhs().iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let residual: f64 = (s.n + 1..s.x.len()).map(|j| s.x[j]).sum();
    if residual > 1e-7 * scale {
        return Err(Error::Numerical(format!(
            "phase one ended with artificial mass {residual:.3e}"
        )));
    }
    for j in s.n + 1..s.x.len() {
        s.cost[j] = 0.0;
        s.upper[j] = 0.0;
    }
    s.drive_out_artificials()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{ProbabilityTensor, Scenario};

    #[test]
    fn uniform_target_reaches_full_visibility() {
        let sc = Scenario::uniform(2, 2).unwrap();
        let lp = LpProblem::build(&ProbabilityTensor::uniform(&sc)).unwrap();
        let out = solve(&lp, &SimplexOptions::default()).unwrap();
        assert!((out.values[16] - 1.0).abs() < 1e-12);
        assert!(lp.max_row_residual(&out.values[..16], 1.0) < 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // The marginal form has one dependent row per setting combination.
        let sc = Scenario::uniform(3, 2).unwrap();
        let lp = LpProblem::build(&ProbabilityTensor::uniform(&sc)).unwrap();
        let out = solve(&lp, &SimplexOptions::default()).unwrap();
        assert!((out.values[64] - 1.0).abs() < 1e-12);
    }
}
