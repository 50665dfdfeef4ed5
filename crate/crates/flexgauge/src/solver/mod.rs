//! Self-contained LP and MIP solving.
//!
//! The LP path is a bounded-variable two-phase revised simplex with Dantzig
//! pricing and Bland's rule as an anti-cycling fallback. The MIP path is an
//! LP-based branch-and-bound restricted to binary variables. Both are
//! deterministic: identical inputs produce identical pivot sequences and
//! therefore identical results.

mod branch_bound;
mod simplex;

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// Solver status. Primal and dual values are populated only for `Optimal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NodeLimit,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("inconsistent problem dimensions: {0}")]
    Dimensions(String),
    #[error("binary flag on column {0} whose bounds are not contained in [0, 1]")]
    BinaryBounds(usize),
    #[error("integrality flags present; use solve_mip")]
    HasIntegers,
    #[error("singular basis encountered during refactorization")]
    SingularBasis,
    #[error("duals unavailable: {0}")]
    MissingDuals(String),
    #[error("non-finite coefficient in problem data: {0}")]
    NonFinite(String),
}

/// Every numeric threshold used by the LP/MIP machinery lives here.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Primal feasibility tolerance.
    pub feas: f64,
    /// Optimality tolerance; also the absolute branch-and-bound gap.
    pub opt: f64,
    /// Distance from an integer at which a binary is considered integral.
    pub integrality: f64,
    /// Pivot elements smaller than this are treated as zero.
    pub zero_pivot: f64,
    /// Reduced-cost threshold for entering-variable eligibility.
    pub dual_tol: f64,
    /// Simplex iteration limit is `iter_limit_factor * (rows + cols)`.
    pub iter_limit_factor: usize,
    /// Branch-and-bound node budget.
    pub node_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feas: 1e-7,
            opt: 1e-6,
            integrality: 1e-6,
            zero_pivot: 1e-10,
            dual_tol: 1e-9,
            iter_limit_factor: 50,
            node_limit: 1_000_000,
        }
    }
}

/// A linear (or binary-mixed-integer) program in row form.
///
/// Rows are stored sparsely. Variable bounds may be infinite; binary columns
/// must have bounds contained in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    objective: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    row_senses: Vec<RowSense>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    binary: Vec<bool>,
    col_names: Vec<String>,
    row_names: Vec<String>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            objective: Vec::new(),
            rows: Vec::new(),
            row_senses: Vec::new(),
            rhs: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            binary: Vec::new(),
            col_names: Vec::new(),
            row_names: Vec::new(),
        }
    }

    /// Adds a column and returns its index.
    pub fn add_col(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> usize {
        let j = self.objective.len();
        self.objective.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.binary.push(false);
        self.col_names.push(name.into());
        j
    }

    /// Adds a binary column (bounds `[0, 1]`) and returns its index.
    pub fn add_binary_col(&mut self, name: impl Into<String>, obj: f64) -> usize {
        let j = self.add_col(name, 0.0, 1.0, obj);
        self.binary[j] = true;
        j
    }

    /// Adds a row and returns its index. Entries on the same column are summed.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: RowSense,
        rhs: f64,
        entries: Vec<(usize, f64)>,
    ) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        let mut sorted = entries;
        sorted.sort_by_key(|e| e.0);
        for (col, val) in sorted {
            if val == 0.0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == col => last.1 += val,
                _ => merged.push((col, val)),
            }
        }
        self.rows.push(merged);
        self.row_senses.push(sense);
        self.rhs.push(rhs);
        self.row_names.push(name.into());
        self.rows.len() - 1
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, col: usize, obj: f64) {
        self.objective[col] = obj;
    }

    pub fn objective_coef(&self, col: usize) -> f64 {
        self.objective[col]
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    pub fn bounds(&self, col: usize) -> (f64, f64) {
        (self.lower[col], self.upper[col])
    }

    pub(crate) fn lower_slice(&self) -> &[f64] {
        &self.lower
    }

    pub(crate) fn upper_slice(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_binary(&self, col: usize) -> bool {
        self.binary[col]
    }

    /// Drops the integrality flag on a column (used to relax a MIP).
    pub fn clear_binary(&mut self, col: usize) {
        self.binary[col] = false;
    }

    pub fn has_binaries(&self) -> bool {
        self.binary.iter().any(|&b| b)
    }

    pub fn row_names(&self) -> &[String] {
        &self.row_names
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub(crate) fn row_entries(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub(crate) fn row_sense(&self, i: usize) -> RowSense {
        self.row_senses[i]
    }

    pub(crate) fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_cols();
        for (i, row) in self.rows.iter().enumerate() {
            for &(col, val) in row {
                if col >= n {
                    return Err(SolverError::Dimensions(format!(
                        "row {} references column {} of {}",
                        self.row_names[i], col, n
                    )));
                }
                if !val.is_finite() {
                    return Err(SolverError::NonFinite(format!(
                        "row {} column {}",
                        self.row_names[i], self.col_names[col]
                    )));
                }
            }
            if !self.rhs[i].is_finite() {
                return Err(SolverError::NonFinite(format!("rhs of {}", self.row_names[i])));
            }
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(SolverError::NonFinite(format!("objective of {}", self.col_names[j])));
            }
            if self.lower[j] > self.upper[j] {
                return Err(SolverError::Dimensions(format!(
                    "column {} has lower bound above upper bound",
                    self.col_names[j]
                )));
            }
            if self.binary[j] && (self.lower[j] < -1e-12 || self.upper[j] > 1.0 + 1e-12) {
                return Err(SolverError::BinaryBounds(j));
            }
        }
        Ok(())
    }

    /// Writes the problem in the CPLEX LP text format for cross-checking
    /// against external solvers.
    pub fn write_lp(&self, w: &mut impl Write) -> std::io::Result<()> {
        match self.sense {
            Sense::Minimize => writeln!(w, "Minimize")?,
            Sense::Maximize => writeln!(w, "Maximize")?,
        }
        write!(w, " obj:")?;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(w, " {} {}", term(c), self.col_names[j])?;
            }
        }
        writeln!(w, "\nSubject To")?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, " {}:", self.row_names[i])?;
            if row.is_empty() {
                write!(w, " 0 x0")?;
            }
            for &(col, val) in row {
                write!(w, " {} {}", term(val), self.col_names[col])?;
            }
            let op = match self.row_senses[i] {
                RowSense::Le => "<=",
                RowSense::Eq => "=",
                RowSense::Ge => ">=",
            };
            writeln!(w, " {} {}", op, self.rhs[i])?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_cols() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = &self.col_names[j];
            match (l.is_finite(), u.is_finite()) {
                (true, true) => writeln!(w, " {} <= {} <= {}", l, name, u)?,
                (true, false) => writeln!(w, " {} >= {}", name, l)?,
                (false, true) => writeln!(w, " -inf <= {} <= {}", name, u)?,
                (false, false) => writeln!(w, " {} free", name)?,
            }
        }
        if self.has_binaries() {
            writeln!(w, "Binaries")?;
            for j in 0..self.num_cols() {
                if self.binary[j] {
                    writeln!(w, " {}", self.col_names[j])?;
                }
            }
        }
        writeln!(w, "End")
    }
}

fn term(c: f64) -> String {
    if c < 0.0 {
        format!("- {}", -c)
    } else {
        format!("+ {}", c)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub phase1_iterations: usize,
    pub refactorizations: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub objective: f64,
    /// Structural column values; present iff `status == Optimal`.
    pub primal: Vec<f64>,
    /// Row duals as shadow prices (d objective / d rhs); LP solves only.
    pub duals: Vec<f64>,
    pub stats: SolveStats,
}

impl SolveResult {
    pub(crate) fn non_optimal(status: Status, stats: SolveStats) -> Self {
        SolveResult {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            duals: Vec::new(),
            stats,
        }
    }
}

/// Solves a pure LP. Rejects problems carrying integrality flags.
pub fn solve_lp(lp: &LinearProgram, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    if lp.has_binaries() {
        return Err(SolverError::HasIntegers);
    }
    lp.validate()?;
    simplex::solve(lp, cfg, None)
}

/// Solves a binary MIP by best-first branch-and-bound, branching on the
/// most-fractional binary. The result is optimal within `cfg.opt` absolute gap.
pub fn solve_mip(lp: &LinearProgram, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    solve_mip_seeded(lp, cfg, None)
}

/// `solve_mip` with a known feasible solution as the starting incumbent.
/// The seed must satisfy every constraint including integrality; it enables
/// pruning from the first node and may be returned if nothing beats it.
pub fn solve_mip_seeded(
    lp: &LinearProgram,
    cfg: &SolverConfig,
    incumbent: Option<(f64, Vec<f64>)>,
) -> Result<SolveResult, SolverError> {
    lp.validate()?;
    if !lp.has_binaries() {
        return simplex::solve(lp, cfg, None);
    }
    branch_bound::solve(lp, cfg, incumbent)
}

/// Maps row duals to their row names.
///
/// Duals follow the shadow-price convention: the derivative of the optimal
/// objective with respect to the row's right-hand side. For a minimization
/// problem this puts `<=` rows at nonpositive values and leaves `=` rows free.
pub fn extract_duals<'a>(
    result: &SolveResult,
    row_names: &'a [String],
) -> Result<BTreeMap<&'a str, f64>, SolverError> {
    if result.status != Status::Optimal {
        return Err(SolverError::MissingDuals(format!(
            "solve status is {:?}",
            result.status
        )));
    }
    if result.duals.len() != row_names.len() {
        return Err(SolverError::MissingDuals(format!(
            "{} duals for {} rows",
            result.duals.len(),
            row_names.len()
        )));
    }
    Ok(row_names
        .iter()
        .map(|n| n.as_str())
        .zip(result.duals.iter().copied())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn face_optimum() {
        // max x1 + x2 s.t. x1 + x2 <= 1, x >= 0
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x1 = lp.add_col("x1", 0.0, f64::INFINITY, 1.0);
        let x2 = lp.add_col("x2", 0.0, f64::INFINITY, 1.0);
        lp.add_row("cap", RowSense::Le, 1.0, vec![(x1, 1.0), (x2, 1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-9);
        assert!((r.primal[x1] + r.primal[x2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_pair() {
        // x <= -1 and x >= 0
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("cap", RowSense::Le, -1.0, vec![(x, 1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("floor", RowSense::Ge, 0.0, vec![(x, 1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Unbounded);
    }

    #[test]
    fn active_row_dual_is_shadow_price() {
        // max x s.t. x <= 3: dual of the binding row is +1.
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("cap", RowSense::Le, 3.0, vec![(x, 1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
        assert!((r.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slack_row_dual_is_zero() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("tight", RowSense::Le, 3.0, vec![(x, 1.0)]);
        lp.add_row("loose", RowSense::Le, 10.0, vec![(x, 1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!(r.duals[1].abs() < 1e-9);
    }

    #[test]
    fn equality_and_free_variable() {
        // min y s.t. y = x - 2, 0 <= x <= 1, y free: optimum y = -2.
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_col("x", 0.0, 1.0, 0.0);
        let y = lp.add_col("y", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row("link", RowSense::Eq, -2.0, vec![(y, 1.0), (x, -1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn mip_rejects_through_lp_entry() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_binary_col("z", 1.0);
        assert!(matches!(solve_lp(&lp, &cfg()), Err(SolverError::HasIntegers)));
    }

    #[test]
    fn tiny_binary_packing() {
        // max z1 + z2 s.t. z1 + z2 <= 1, binary -> 1
        let mut lp = LinearProgram::new(Sense::Maximize);
        let z1 = lp.add_binary_col("z1", 1.0);
        let z2 = lp.add_binary_col("z2", 1.0);
        lp.add_row("pick", RowSense::Le, 1.0, vec![(z1, 1.0), (z2, 1.0)]);
        let r = solve_mip(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_binaries_reduce_to_lp() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let z = lp.add_binary_col("z", 3.0);
        let x = lp.add_col("x", 0.0, 2.0, 1.0);
        lp.add_row("cap", RowSense::Le, 2.5, vec![(z, 1.0), (x, 1.0)]);
        lp.set_bounds(z, 1.0, 1.0);
        let r = solve_mip(&lp, &cfg()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 4.5).abs() < 1e-9);

        let mut as_lp = lp.clone();
        as_lp.binary[z] = false;
        let r2 = solve_lp(&as_lp, &cfg()).unwrap();
        assert!((r.objective - r2.objective).abs() < 1e-9);
    }

    #[test]
    fn extract_duals_by_name() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_col("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("cap", RowSense::Le, 3.0, vec![(x, 1.0)]);
        let r = solve_lp(&lp, &cfg()).unwrap();
        let duals = extract_duals(&r, lp.row_names()).unwrap();
        assert!((duals["cap"] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_dump_smoke() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_col("x", 0.0, 4.0, 2.0);
        let z = lp.add_binary_col("z", -1.0);
        lp.add_row("r0", RowSense::Ge, 1.0, vec![(x, 1.0), (z, 2.0)]);
        let mut buf = Vec::new();
        lp.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains("r0:"));
        assert!(text.contains("Binaries"));
    }
}
