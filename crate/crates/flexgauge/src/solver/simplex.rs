//! Bounded-variable two-phase revised simplex with an explicitly maintained
//! basis inverse.
//!
//! Internal form: every row becomes an equality by adding a signed slack
//! column (`<=` gets a slack in `[0, inf)`, `>=` in `(-inf, 0]`). A crash
//! basis is built from row slacks, singleton columns, and artificials; phase
//! one minimizes the artificial sum, phase two the real objective.
//! Maximization is solved as minimization of the negated objective and the
//! duals are negated back, so reported duals are always shadow prices.

use super::{
    LinearProgram, RowSense, Sense, SolveResult, SolveStats, SolverConfig, SolverError, Status,
};

#[derive(Clone, Copy, PartialEq, Debug)]
enum VStat {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting at zero while nonbasic.
    FreeZero,
}

struct Simplex<'a> {
    cfg: &'a SolverConfig,
    m: usize,
    nstruct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    artificial: Vec<bool>,
    cost: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    stat: Vec<VStat>,
    /// Row-major m*m inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
    stats: SolveStats,
    pivots_since_refactor: usize,
    iter_limit: usize,
}

const REFACTOR_EVERY: usize = 100;

pub(super) fn solve(
    lp: &LinearProgram,
    cfg: &SolverConfig,
    bounds: Option<(&[f64], &[f64])>,
) -> Result<SolveResult, SolverError> {
    let m = lp.num_rows();
    let n = lp.num_cols();
    let sgn = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let (lo, up): (&[f64], &[f64]) = match bounds {
        Some((l, u)) => (l, u),
        None => (lp.lower_slice(), lp.upper_slice()),
    };

    if m == 0 {
        return Ok(solve_boxed(lp, sgn, lo, up));
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..m {
        for &(j, a) in lp.row_entries(i) {
            cols[j].push((i, a));
        }
    }
    let mut lower = lo.to_vec();
    let mut upper = up.to_vec();
    let mut cost: Vec<f64> = (0..n).map(|j| sgn * lp.objective_coef(j)).collect();
    let mut artificial = vec![false; n];

    // Signed slack per inequality row.
    let mut slack_of_row = vec![usize::MAX; m];
    for i in 0..m {
        match lp.row_sense(i) {
            RowSense::Le => {
                slack_of_row[i] = cols.len();
                cols.push(vec![(i, 1.0)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                cost.push(0.0);
                artificial.push(false);
            }
            RowSense::Ge => {
                slack_of_row[i] = cols.len();
                cols.push(vec![(i, 1.0)]);
                lower.push(f64::NEG_INFINITY);
                upper.push(0.0);
                cost.push(0.0);
                artificial.push(false);
            }
            RowSense::Eq => {}
        }
    }

    let b: Vec<f64> = (0..m).map(|i| lp.rhs(i)).collect();

    let mut sx = Simplex {
        cfg,
        m,
        nstruct: n,
        cols,
        lower,
        upper,
        artificial,
        cost,
        b,
        basis: vec![usize::MAX; m],
        stat: Vec::new(),
        binv: vec![0.0; m * m],
        xb: vec![0.0; m],
        stats: SolveStats::default(),
        pivots_since_refactor: 0,
        iter_limit: cfg.iter_limit_factor * (m + n),
    };
    sx.crash(&slack_of_row);

    // Phase 1 runs only when the crash basis needed artificial support.
    let phase1_needed = sx
        .basis
        .iter()
        .any(|&j| sx.artificial[j]);
    if phase1_needed {
        let real_cost = std::mem::replace(
            &mut sx.cost,
            sx.artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
        );
        let outcome = sx.iterate(true)?;
        sx.stats.phase1_iterations = sx.stats.iterations;
        match outcome {
            LoopEnd::Optimal => {}
            LoopEnd::IterLimit => {
                return Ok(SolveResult::non_optimal(Status::IterationLimit, sx.stats))
            }
            LoopEnd::Unbounded => return Err(SolverError::SingularBasis),
        }
        let infeas = sx.artificial_sum();
        if infeas > cfg.feas {
            return Ok(SolveResult::non_optimal(Status::Infeasible, sx.stats));
        }
        sx.expel_artificials()?;
        sx.cost = real_cost;
    }
    for j in 0..sx.cols.len() {
        if sx.artificial[j] {
            sx.lower[j] = 0.0;
            sx.upper[j] = 0.0;
        }
    }

    match sx.iterate(false)? {
        LoopEnd::Optimal => {}
        LoopEnd::IterLimit => {
            return Ok(SolveResult::non_optimal(Status::IterationLimit, sx.stats))
        }
        LoopEnd::Unbounded => {
            return Ok(SolveResult::non_optimal(Status::Unbounded, sx.stats))
        }
    }

    // Clean factorization before reading the solution off the basis.
    if sx.pivots_since_refactor > 0 {
        sx.refactor()?;
        if let LoopEnd::IterLimit = sx.iterate(false)? {
            return Ok(SolveResult::non_optimal(Status::IterationLimit, sx.stats));
        }
        if sx.pivots_since_refactor > 0 {
            sx.refactor()?;
        }
    }

    let mut primal = vec![0.0; n];
    for j in 0..n {
        primal[j] = sx.value_of(j);
    }
    let y = sx.row_prices();
    let duals: Vec<f64> = y.iter().map(|v| sgn * v).collect();
    let objective: f64 = (0..n).map(|j| lp.objective_coef(j) * primal[j]).sum();

    Ok(SolveResult {
        status: Status::Optimal,
        objective,
        primal,
        duals,
        stats: sx.stats,
    })
}

enum LoopEnd {
    Optimal,
    Unbounded,
    IterLimit,
}

impl<'a> Simplex<'a> {
    /// Builds a starting basis from row slacks, singleton columns, and
    /// artificials, and sets the (diagonal) basis inverse directly.
    fn crash(&mut self, slack_of_row: &[usize]) {
        let total = self.cols.len();
        self.stat = (0..total)
            .map(|j| {
                if self.lower[j].is_finite() {
                    VStat::AtLower
                } else if self.upper[j].is_finite() {
                    VStat::AtUpper
                } else {
                    VStat::FreeZero
                }
            })
            .collect();

        // Residual of each row at the nonbasic point.
        let mut r = self.b.clone();
        for j in 0..total {
            let v = self.value_of(j);
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * v;
                }
            }
        }

        // Singleton structural columns per row, in column order.
        let mut singletons: Vec<Vec<usize>> = vec![Vec::new(); self.m];
        for j in 0..self.nstruct {
            if self.cols[j].len() == 1 && self.lower[j] < self.upper[j] {
                singletons[self.cols[j][0].0].push(j);
            }
        }

        for i in 0..self.m {
            let sj = slack_of_row[i];
            if sj != usize::MAX {
                let v = r[i];
                let ok = v >= self.lower[sj] - 1e-12 && v <= self.upper[sj] + 1e-12;
                if ok {
                    self.make_basic(i, sj, v.clamp(self.lower[sj], self.upper[sj]), 1.0);
                    continue;
                }
            }
            let mut placed = false;
            for &j in &singletons[i] {
                if self.stat[j] == VStat::Basic {
                    continue;
                }
                let a = self.cols[j][0].1;
                if a.abs() <= self.cfg.zero_pivot {
                    continue;
                }
                let v = r[i] / a + self.value_of(j);
                if v >= self.lower[j] - 1e-12 && v <= self.upper[j] + 1e-12 {
                    self.make_basic(i, j, v.clamp(self.lower[j], self.upper[j]), a);
                    placed = true;
                    break;
                }
            }
            if placed {
                continue;
            }
            // Artificial support for this row.
            let s = if r[i] >= 0.0 { 1.0 } else { -1.0 };
            let aj = self.cols.len();
            self.cols.push(vec![(i, s)]);
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.cost.push(0.0);
            self.artificial.push(false);
            self.artificial[aj] = true;
            self.stat.push(VStat::AtLower);
            self.make_basic(i, aj, r[i].abs(), s);
        }
    }

    fn make_basic(&mut self, row: usize, col: usize, value: f64, diag: f64) {
        self.basis[row] = col;
        self.stat[col] = VStat::Basic;
        self.xb[row] = value;
        self.binv[row * self.m + row] = 1.0 / diag;
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.stat[j] {
            VStat::AtLower => self.lower[j],
            VStat::AtUpper => self.upper[j],
            VStat::FreeZero => 0.0,
            VStat::Basic => {
                let row = self.basis.iter().position(|&k| k == j).expect("basic column");
                self.xb[row]
            }
        }
    }

    fn artificial_sum(&self) -> f64 {
        (0..self.m)
            .filter(|&i| self.artificial[self.basis[i]])
            .map(|i| self.xb[i].max(0.0))
            .sum()
    }

    /// Row prices under the current cost vector: y = c_B' * B^-1.
    fn row_prices(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += cb * row[k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        for &(i, a) in &self.cols[j] {
            d -= y[i] * a;
        }
        d
    }

    /// Core pivoting loop for the current cost vector.
    fn iterate(&mut self, phase1: bool) -> Result<LoopEnd, SolverError> {
        let mut stall = 0usize;
        let stall_limit = self.m.max(4);
        let mut bland = false;
        let mut prev_obj = f64::INFINITY;
        // Row prices are maintained incrementally across pivots and rebuilt
        // whenever the basis inverse is refactorized.
        let mut y = self.row_prices();

        loop {
            if self.stats.iterations > self.iter_limit {
                return Ok(LoopEnd::IterLimit);
            }
            if phase1 && self.artificial_sum() <= 1e-12 {
                return Ok(LoopEnd::Optimal);
            }

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (col, d, score)
            for j in 0..self.cols.len() {
                if self.stat[j] == VStat::Basic {
                    continue;
                }
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                if !phase1 && self.artificial[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let eligible = match self.stat[j] {
                    VStat::AtLower => d < -self.cfg.dual_tol,
                    VStat::AtUpper => d > self.cfg.dual_tol,
                    VStat::FreeZero => d.abs() > self.cfg.dual_tol,
                    VStat::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d, d.abs()));
                    break;
                }
                match entering {
                    Some((_, _, best)) if d.abs() <= best => {}
                    _ => entering = Some((j, d, d.abs())),
                }
            }

            let (jq, dq, _) = match entering {
                Some(e) => e,
                None => return Ok(LoopEnd::Optimal),
            };

            let dir = match self.stat[jq] {
                VStat::AtLower => 1.0,
                VStat::AtUpper => -1.0,
                VStat::FreeZero => {
                    if dq < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VStat::Basic => unreachable!(),
            };

            // w = B^-1 * a_q
            let m = self.m;
            let mut w = vec![0.0; m];
            for &(r, a) in &self.cols[jq] {
                if a == 0.0 {
                    continue;
                }
                for i in 0..m {
                    w[i] += self.binv[i * m + r] * a;
                }
            }

            // Ratio test against basic bounds.
            let mut t_best = f64::INFINITY;
            let mut leave: Option<(usize, bool, f64)> = None; // (row, to_lower, |pivot|)
            for i in 0..m {
                let wi = dir * w[i];
                let k = self.basis[i];
                if wi > self.cfg.zero_pivot {
                    let lk = self.lower[k];
                    if lk.is_finite() {
                        let ratio = ((self.xb[i] - lk) / wi).max(0.0);
                        if better_ratio(ratio, wi.abs(), t_best, &leave) {
                            t_best = ratio;
                            leave = Some((i, true, wi.abs()));
                        }
                    }
                } else if wi < -self.cfg.zero_pivot {
                    let uk = self.upper[k];
                    if uk.is_finite() {
                        let ratio = ((uk - self.xb[i]) / -wi).max(0.0);
                        if better_ratio(ratio, wi.abs(), t_best, &leave) {
                            t_best = ratio;
                            leave = Some((i, false, wi.abs()));
                        }
                    }
                }
            }

            let t_flip = self.upper[jq] - self.lower[jq]; // infinite unless boxed
            if t_flip.is_finite() && t_flip <= t_best {
                // Bound flip: the entering column runs to its opposite bound.
                for i in 0..m {
                    self.xb[i] -= dir * t_flip * w[i];
                }
                self.stat[jq] = match self.stat[jq] {
                    VStat::AtLower => VStat::AtUpper,
                    VStat::AtUpper => VStat::AtLower,
                    other => other,
                };
                self.stats.iterations += 1;
                continue;
            }

            let (r, to_lower, _) = match leave {
                Some(l) => l,
                None => {
                    if phase1 {
                        return Err(SolverError::SingularBasis);
                    }
                    return Ok(LoopEnd::Unbounded);
                }
            };

            // Pivot: basis[r] leaves to a bound, jq becomes basic.
            let t = t_best;
            let enter_val = self.value_of(jq) + dir * t;
            for i in 0..m {
                if i != r {
                    self.xb[i] -= dir * t * w[i];
                }
            }
            self.xb[r] = enter_val;

            let leaving = self.basis[r];
            self.stat[leaving] = if to_lower { VStat::AtLower } else { VStat::AtUpper };
            self.stat[jq] = VStat::Basic;
            self.basis[r] = jq;

            // Rank-one update of the explicit inverse.
            let pivot = w[r];
            let inv_pivot = 1.0 / pivot;
            for k in 0..m {
                self.binv[r * m + k] *= inv_pivot;
            }
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = w[i];
                if f != 0.0 {
                    for k in 0..m {
                        self.binv[i * m + k] -= f * self.binv[r * m + k];
                    }
                }
            }

            self.stats.iterations += 1;
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                y = self.row_prices();
            } else {
                // Price update from the refreshed pivot row: y' = y + d_q * r'.
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, rk) in y.iter_mut().zip(row) {
                    *yk += dq * rk;
                }
            }

            // Cycling guard: switch to Bland's rule after `rows` stalled pivots.
            let obj = self.current_objective();
            if prev_obj - obj < 1e-12 {
                stall += 1;
                if stall >= stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
                if bland && prev_obj - obj > 1e-10 {
                    bland = false;
                }
            }
            prev_obj = obj;
        }
    }

    fn current_objective(&self) -> f64 {
        let mut z = 0.0;
        for i in 0..self.m {
            z += self.cost[self.basis[i]] * self.xb[i];
        }
        for j in 0..self.cols.len() {
            if self.stat[j] != VStat::Basic && self.cost[j] != 0.0 {
                z += self.cost[j] * self.value_of(j);
            }
        }
        z
    }

    /// Pivots zero-valued basic artificials out of the basis where possible;
    /// redundant rows keep their artificial pinned at zero.
    fn expel_artificials(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        for r in 0..m {
            if !self.artificial[self.basis[r]] {
                continue;
            }
            let mut replacement = None;
            for j in 0..self.cols.len() {
                if self.artificial[j] || self.stat[j] == VStat::Basic {
                    continue;
                }
                let mut wr = 0.0;
                for &(i, a) in &self.cols[j] {
                    wr += self.binv[r * m + i] * a;
                }
                if wr.abs() > 1e-7 {
                    replacement = Some((j, wr));
                    break;
                }
            }
            let Some((jq, _)) = replacement else { continue };

            let mut w = vec![0.0; m];
            for &(i, a) in &self.cols[jq] {
                for k in 0..m {
                    w[k] += self.binv[k * m + i] * a;
                }
            }
            let leaving = self.basis[r];
            // Zero-length pivot: the primal point is unchanged, so the
            // entering column keeps the value it had while nonbasic.
            let enter_val = self.value_of(jq);
            self.stat[leaving] = VStat::AtLower;
            self.stat[jq] = VStat::Basic;
            self.basis[r] = jq;
            self.xb[r] = enter_val;
            let inv_pivot = 1.0 / w[r];
            for k in 0..m {
                self.binv[r * m + k] *= inv_pivot;
            }
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = w[i];
                if f != 0.0 {
                    for k in 0..m {
                        self.binv[i * m + k] -= f * self.binv[r * m + k];
                    }
                }
            }
            self.pivots_since_refactor += 1;
        }
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting and recomputes the basic values from scratch.
    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        self.stats.refactorizations += 1;
        self.pivots_since_refactor = 0;

        let mut aug = vec![0.0; m * 2 * m];
        for (r, &j) in self.basis.iter().enumerate() {
            let _ = r;
            for &(i, a) in &self.cols[j] {
                aug[i * 2 * m + r] = a;
            }
        }
        for i in 0..m {
            aug[i * 2 * m + m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = aug[k * 2 * m + k].abs();
            for i in (k + 1)..m {
                let v = aug[i * 2 * m + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val <= self.cfg.zero_pivot {
                return Err(SolverError::SingularBasis);
            }
            if piv_row != k {
                for c in 0..2 * m {
                    aug.swap(k * 2 * m + c, piv_row * 2 * m + c);
                }
            }
            let inv = 1.0 / aug[k * 2 * m + k];
            for c in 0..2 * m {
                aug[k * 2 * m + c] *= inv;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * 2 * m + k];
                if f != 0.0 {
                    for c in 0..2 * m {
                        aug[i * 2 * m + c] -= f * aug[k * 2 * m + c];
                    }
                }
            }
        }
        // B^-1 = P applied inverse: columns of aug right half are in row order;
        // but rows were swapped in place, so the right half is already B^-1
        // with basis column order preserved.
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = aug[i * 2 * m + m + k];
            }
        }

        // Recompute basic values: x_B = B^-1 (b - A_N x_N).
        let mut r = self.b.clone();
        for j in 0..self.cols.len() {
            if self.stat[j] == VStat::Basic {
                continue;
            }
            let v = match self.stat[j] {
                VStat::AtLower => self.lower[j],
                VStat::AtUpper => self.upper[j],
                _ => 0.0,
            };
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * v;
                }
            }
        }
        for i in 0..m {
            let mut v = 0.0;
            for k in 0..m {
                v += self.binv[i * m + k] * r[k];
            }
            self.xb[i] = v;
        }
        Ok(())
    }
}

fn better_ratio(ratio: f64, piv: f64, t_best: f64, leave: &Option<(usize, bool, f64)>) -> bool {
    if ratio < t_best - 1e-10 {
        return true;
    }
    if ratio <= t_best + 1e-10 {
        // Near-tie: prefer the larger pivot element for stability.
        if let Some((_, _, best_piv)) = leave {
            return piv > *best_piv;
        }
        return true;
    }
    false
}

/// Trivial solve for row-free problems: every variable goes to its cheapest
/// bound.
fn solve_boxed(lp: &LinearProgram, sgn: f64, lo: &[f64], up: &[f64]) -> SolveResult {
    let n = lp.num_cols();
    let mut primal = vec![0.0; n];
    for j in 0..n {
        let c = sgn * lp.objective_coef(j);
        let v = if c > 0.0 {
            lo[j]
        } else if c < 0.0 {
            up[j]
        } else if lo[j].is_finite() {
            lo[j]
        } else if up[j].is_finite() {
            up[j]
        } else {
            0.0
        };
        if !v.is_finite() {
            return SolveResult::non_optimal(Status::Unbounded, SolveStats::default());
        }
        primal[j] = v;
    }
    let objective = (0..n).map(|j| lp.objective_coef(j) * primal[j]).sum();
    SolveResult {
        status: Status::Optimal,
        objective,
        primal,
        duals: Vec::new(),
        stats: SolveStats::default(),
    }
}
