//! The cutting-plane decomposition: master scale maximization, the dualized
//! and vertex-linearized feasibility subproblem, and cut extraction.
//!
//! The master maximizes `a . lambda` over `[0, 1]` boxes intersected with
//! the accumulated cuts. Feasibility of a proposed `lambda` is tested on the
//! dual of the slack-minimizing LP: the inner dual is linear in the dual
//! multipliers with the realization fixed, and the worst realization over
//! the scaled box is selected by binary direction variables (`z_up + z_dn =
//! 1` per uncertain dimension). The resulting bilinear products between
//! direction binaries and bounded multipliers are linearized exactly with
//! envelope rows, making the subproblem a MILP. A strictly positive optimum
//! is an infeasibility certificate; regrouping its objective by `lambda`
//! components yields a valid linear cut.
//!
//! Multiplier bounds come from the unit slack costs of the feasibility LP:
//! inequality-block duals live in `[-1, 0]`, equality-block duals in
//! `[-1, 1]`, and the equality-block multipliers that multiply realizations
//! are split as `mu = mu_n - mu_p` with both parts in `[-1, 0]` so each part
//! can be linearized against the direction binaries.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::compact::{self, CompactError, CompactForm};
use crate::model::{
    self, FlexIndices, ModelError, ScaleVector, SystemCase, UncertaintyModel, Violation,
};
use crate::solver::{
    self, LinearProgram, RowSense, Sense, SolveResult, SolveStats, SolverConfig, SolverError,
    Status,
};

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("case fails validation: {0}")]
    InvalidCase(String),
    #[error("infeasible at zero deviation: even the nominal point needs slack {eta}")]
    BaseInfeasible { eta: f64 },
    #[error("no convergence within {iterations} iterations")]
    IterationLimit { iterations: usize },
    #[error("master problem infeasible; a cut excludes the zero scale")]
    MasterInfeasible,
    #[error("scale component outside [0, 1]: {0}")]
    InvalidLambda(f64),
    #[error("cut evaluates to {got} at its generating scales, expected {expected}")]
    CutMismatch { expected: f64, got: f64 },
    #[error("subproblem ended with status {0:?}")]
    UnexpectedStatus(Status),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Compact(#[from] CompactError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct BendersOptions {
    /// Subproblem optima above this are treated as infeasibility certificates.
    pub feas_tol: f64,
    pub max_iterations: usize,
    /// Emit extra cuts from single-direction flips of the worst vertex.
    pub multi_cut: bool,
    pub solver: SolverConfig,
}

impl Default for BendersOptions {
    fn default() -> Self {
        BendersOptions {
            feas_tol: 1e-6,
            max_iterations: 200,
            multi_cut: false,
            solver: SolverConfig::default(),
        }
    }
}

/// One feasibility cut: `coef . lambda + constant <= 0`.
#[derive(Debug, Clone)]
pub struct CutRecord {
    pub coef_up_b: Vec<f64>,
    pub coef_dn_b: Vec<f64>,
    pub coef_up_t: Vec<f64>,
    pub coef_dn_t: Vec<f64>,
    pub constant: f64,
    /// Iteration that generated the cut.
    pub iteration: usize,
    /// Subproblem objective at the generating scales.
    pub eta: f64,
}

impl CutRecord {
    /// The cut's left-hand side at `lambda`; positive means violated.
    pub fn eval(&self, lambda: &ScaleVector) -> f64 {
        let dot = |c: &[f64], l: &[f64]| c.iter().zip(l).map(|(a, b)| a * b).sum::<f64>();
        dot(&self.coef_up_b, &lambda.lam_up_b)
            + dot(&self.coef_dn_b, &lambda.lam_dn_b)
            + dot(&self.coef_up_t, &lambda.lam_up_t)
            + dot(&self.coef_dn_t, &lambda.lam_dn_t)
            + self.constant
    }

    /// Coefficients in the canonical flat scale ordering.
    fn flat_coefs(&self) -> Vec<f64> {
        let nb = self.coef_up_b.len();
        let nt = self.coef_up_t.len();
        let mut flat = Vec::with_capacity(2 * nb + 2 * nt);
        for b in 0..nb {
            flat.push(self.coef_up_b[b]);
            flat.push(self.coef_dn_b[b]);
        }
        for t in 0..nt {
            flat.push(self.coef_up_t[t]);
            flat.push(self.coef_dn_t[t]);
        }
        flat
    }
}

/// The master: maximize `a . lambda` over the box cut down by the
/// accumulated feasibility cuts.
#[derive(Debug, Clone)]
pub struct MasterProblem {
    objective: Vec<f64>,
    n_buses: usize,
    n_t: usize,
    cuts: Vec<CutRecord>,
}

impl MasterProblem {
    pub fn new(objective: Vec<f64>, n_buses: usize, n_t: usize) -> Self {
        assert_eq!(objective.len(), 2 * n_buses + 2 * n_t);
        MasterProblem {
            objective,
            n_buses,
            n_t,
            cuts: Vec::new(),
        }
    }

    pub fn add_cut(&mut self, cut: CutRecord) {
        self.cuts.push(cut);
    }

    pub fn cuts(&self) -> &[CutRecord] {
        &self.cuts
    }

    pub fn into_cuts(self) -> Vec<CutRecord> {
        self.cuts
    }
}

/// Solves the master LP; returns the maximizing scales and the objective.
pub fn solve_master(
    mp: &MasterProblem,
    cfg: &SolverConfig,
) -> Result<(ScaleVector, f64), BendersError> {
    let dim = mp.objective.len();
    let mut lp = LinearProgram::new(Sense::Maximize);
    for (j, &a) in mp.objective.iter().enumerate() {
        lp.add_col(format!("lam{j}"), 0.0, 1.0, a);
    }
    for (k, cut) in mp.cuts.iter().enumerate() {
        let entries: Vec<(usize, f64)> = cut
            .flat_coefs()
            .into_iter()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        lp.add_row(format!("cut{k}"), RowSense::Le, -cut.constant, entries);
    }
    let result = solver::solve_lp(&lp, cfg)?;
    match result.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(BendersError::MasterInfeasible),
        other => return Err(BendersError::UnexpectedStatus(other)),
    }
    let mut flat = result.primal;
    flat.truncate(dim);
    // Clip solver roundoff so downstream consumers see honest scales.
    for v in &mut flat {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((
        ScaleVector::from_flat(&flat, mp.n_buses, mp.n_t),
        result.objective,
    ))
}

/// Index bookkeeping for one linearized bilinear product.
#[derive(Debug, Clone, Copy)]
struct AuxQuad {
    /// Uncertain dimension (bus or sub-interval index).
    dim: usize,
    /// Mapping-row coefficient tying this product to the realization.
    h: f64,
    col_np: usize,
    col_nm: usize,
    col_pp: usize,
    col_pm: usize,
}

/// Like `AuxQuad` for multipliers that are already nonpositive (no split).
#[derive(Debug, Clone, Copy)]
struct AuxPair {
    dim: usize,
    h: f64,
    col_p: usize,
    col_m: usize,
}

#[derive(Debug, Clone)]
struct RdfeaLayout {
    mu1: usize,
    mu2n: usize,
    mu2p: usize,
    mu3: usize,
    mu4n: usize,
    mu4p: usize,
    mu5: usize,
    mu6: usize,
    mu7: usize,
    z_up_b: usize,
    z_dn_b: usize,
    z_up_t: usize,
    z_dn_t: usize,
    u2: Vec<AuxQuad>,
    u3: Vec<AuxPair>,
    u4: Vec<AuxQuad>,
    n1: usize,
    n2: usize,
    n3: usize,
    n4: usize,
    n5: usize,
    n6: usize,
    n7: usize,
}

/// The dualized, vertex-linearized feasibility subproblem at fixed scales.
#[derive(Debug, Clone)]
pub struct RdfeaProblem {
    pub lp: LinearProgram,
    layout: RdfeaLayout,
    lambda: ScaleVector,
}

impl RdfeaProblem {
    pub fn lambda(&self) -> &ScaleVector {
        &self.lambda
    }

    pub fn n_binaries(&self) -> usize {
        (0..self.lp.num_cols())
            .filter(|&j| self.lp.is_binary(j))
            .count()
    }

    /// A copy of the subproblem with every direction binary pinned to the
    /// given vertex (`true` = upward deviation).
    pub fn with_fixed_directions(&self, up_b: &[bool], up_t: &[bool]) -> LinearProgram {
        let mut lp = self.lp.clone();
        let lay = &self.layout;
        for (b, &up) in up_b.iter().enumerate() {
            let (zu, zd) = if up { (1.0, 0.0) } else { (0.0, 1.0) };
            lp.set_bounds(lay.z_up_b + b, zu, zu);
            lp.set_bounds(lay.z_dn_b + b, zd, zd);
        }
        for (t, &up) in up_t.iter().enumerate() {
            let (zu, zd) = if up { (1.0, 0.0) } else { (0.0, 1.0) };
            lp.set_bounds(lay.z_up_t + t, zu, zu);
            lp.set_bounds(lay.z_dn_t + t, zd, zd);
        }
        lp
    }

    /// Worst deviation directions chosen by a solved subproblem.
    pub fn directions(&self, values: &[f64]) -> (Vec<bool>, Vec<bool>) {
        let lay = &self.layout;
        let nb = self.lambda.n_buses();
        let nt = self.lambda.n_sub_intervals();
        let up_b = (0..nb).map(|b| values[lay.z_up_b + b] > 0.5).collect();
        let up_t = (0..nt).map(|t| values[lay.z_up_t + t] > 0.5).collect();
        (up_b, up_t)
    }
}

/// Assembles the subproblem MILP for a fixed `lambda`.
pub fn build_rdfea(
    cf: &CompactForm,
    u: &UncertaintyModel,
    lambda: &ScaleVector,
) -> Result<RdfeaProblem, BendersError> {
    if lambda.n_buses() != cf.n_buses || lambda.n_sub_intervals() != cf.n_t {
        return Err(BendersError::Compact(CompactError::Dimension(format!(
            "scales are {}x{}, system is {}x{}",
            lambda.n_buses(),
            lambda.n_sub_intervals(),
            cf.n_buses,
            cf.n_t
        ))));
    }
    for v in lambda.to_flat() {
        if !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(BendersError::InvalidLambda(v));
        }
    }

    let n1 = cf.a1.nrows();
    let n2 = cf.a2.nrows();
    let n3 = cf.a3.nrows();
    let n4 = cf.a4.nrows();
    let n5 = cf.a5.nrows();
    let n6 = cf.a6.nrows();
    let n7 = cf.a7.nrows();
    let nb = cf.n_buses;
    let nt = cf.n_t;

    let mut lp = LinearProgram::new(Sense::Maximize);

    // Nominal-realization objective parts for the mapped blocks.
    let h2_dbar = cf.h2.apply(&u.d_bar);
    let h3_dbar = cf.h3.apply(&u.d_bar);
    let h4_ddbar = cf.h4.apply(&u.delta_d_bar);

    let mu1 = lp.num_cols();
    for i in 0..n1 {
        lp.add_col(format!("mu1_{i}"), -1.0, 0.0, cf.b1[i]);
    }
    let mu2n = lp.num_cols();
    for i in 0..n2 {
        lp.add_col(format!("mu2n_{i}"), -1.0, 0.0, h2_dbar[i]);
    }
    let mu2p = lp.num_cols();
    for i in 0..n2 {
        lp.add_col(format!("mu2p_{i}"), -1.0, 0.0, -h2_dbar[i]);
    }
    let mu3 = lp.num_cols();
    for i in 0..n3 {
        lp.add_col(format!("mu3_{i}"), -1.0, 0.0, cf.b3[i] + h3_dbar[i]);
    }
    let mu4n = lp.num_cols();
    for i in 0..n4 {
        lp.add_col(format!("mu4n_{i}"), -1.0, 0.0, h4_ddbar[i]);
    }
    let mu4p = lp.num_cols();
    for i in 0..n4 {
        lp.add_col(format!("mu4p_{i}"), -1.0, 0.0, -h4_ddbar[i]);
    }
    let mu5 = lp.num_cols();
    for i in 0..n5 {
        lp.add_col(format!("mu5_{i}"), -1.0, 1.0, cf.b5[i]);
    }
    let mu6 = lp.num_cols();
    for i in 0..n6 {
        lp.add_col(format!("mu6_{i}"), -1.0, 0.0, cf.b6[i]);
    }
    let mu7 = lp.num_cols();
    for i in 0..n7 {
        lp.add_col(format!("mu7_{i}"), -1.0, 0.0, cf.b7[i]);
    }

    let z_up_b = lp.num_cols();
    for b in 0..nb {
        lp.add_binary_col(format!("z_up_b{b}"), 0.0);
    }
    let z_dn_b = lp.num_cols();
    for b in 0..nb {
        lp.add_binary_col(format!("z_dn_b{b}"), 0.0);
    }
    let z_up_t = lp.num_cols();
    for t in 0..nt {
        lp.add_binary_col(format!("z_up_t{t}"), 0.0);
    }
    let z_dn_t = lp.num_cols();
    for t in 0..nt {
        lp.add_binary_col(format!("z_dn_t{t}"), 0.0);
    }

    // Products of direction binaries with multipliers, instantiated only for
    // nonzero mapping coefficients; absent products contribute nothing to
    // the objective or the cut.
    let h2_cols = cf.h2.transpose_entries();
    let h3_cols = cf.h3.transpose_entries();
    let h4_cols = cf.h4.transpose_entries();

    let mut u2 = Vec::new();
    for b in 0..nb {
        for &(i, h) in &h2_cols[b] {
            let lamu = lambda.lam_up_b[b] * u.d_hat[b] * h;
            let lamd = lambda.lam_dn_b[b] * u.d_hat[b] * h;
            let col_np = lp.add_col(format!("u2np_b{b}_{i}"), -1.0, 0.0, lamu);
            let col_nm = lp.add_col(format!("u2nm_b{b}_{i}"), -1.0, 0.0, -lamd);
            let col_pp = lp.add_col(format!("u2pp_b{b}_{i}"), -1.0, 0.0, -lamu);
            let col_pm = lp.add_col(format!("u2pm_b{b}_{i}"), -1.0, 0.0, lamd);
            u2.push(AuxQuad { dim: b, h, col_np, col_nm, col_pp, col_pm });
        }
    }
    let mut u3 = Vec::new();
    for b in 0..nb {
        for &(i, h) in &h3_cols[b] {
            let lamu = lambda.lam_up_b[b] * u.d_hat[b] * h;
            let lamd = lambda.lam_dn_b[b] * u.d_hat[b] * h;
            let col_p = lp.add_col(format!("u3p_b{b}_{i}"), -1.0, 0.0, lamu);
            let col_m = lp.add_col(format!("u3m_b{b}_{i}"), -1.0, 0.0, -lamd);
            u3.push(AuxPair { dim: b, h, col_p, col_m });
        }
    }
    let mut u4 = Vec::new();
    for t in 0..nt {
        for &(i, h) in &h4_cols[t] {
            let lamu = lambda.lam_up_t[t] * u.delta_d_hat[t] * h;
            let lamd = lambda.lam_dn_t[t] * u.delta_d_hat[t] * h;
            let col_np = lp.add_col(format!("u4np_t{t}_{i}"), -1.0, 0.0, lamu);
            let col_nm = lp.add_col(format!("u4nm_t{t}_{i}"), -1.0, 0.0, -lamd);
            let col_pp = lp.add_col(format!("u4pp_t{t}_{i}"), -1.0, 0.0, -lamu);
            let col_pm = lp.add_col(format!("u4pm_t{t}_{i}"), -1.0, 0.0, lamd);
            u4.push(AuxQuad { dim: t, h, col_np, col_nm, col_pp, col_pm });
        }
    }

    // Dual feasibility for the dispatch variables (x >= 0 in the primal).
    let a1_cols = cf.a1.transpose_entries();
    let a2_cols = cf.a2.transpose_entries();
    let a3_cols = cf.a3.transpose_entries();
    let a7_cols = cf.a7.transpose_entries();
    for j in 0..cf.nx() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(i, v) in &a1_cols[j] {
            row.push((mu1 + i, v));
        }
        for &(i, v) in &a2_cols[j] {
            row.push((mu2n + i, v));
            row.push((mu2p + i, -v));
        }
        for &(i, v) in &a3_cols[j] {
            row.push((mu3 + i, v));
        }
        for &(i, v) in &a7_cols[j] {
            row.push((mu7 + i, v));
        }
        lp.add_row(format!("dual_x_{}", cf.x_ids[j]), RowSense::Le, 0.0, row);
    }

    // Dual feasibility for the AGC variables (free in the primal).
    let a4_cols = cf.a4.transpose_entries();
    let a5_cols = cf.a5.transpose_entries();
    let a6_cols = cf.a6.transpose_entries();
    let a8_cols = cf.a8.transpose_entries();
    for j in 0..cf.ny() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(i, v) in &a4_cols[j] {
            row.push((mu4n + i, v));
            row.push((mu4p + i, -v));
        }
        for &(i, v) in &a5_cols[j] {
            row.push((mu5 + i, v));
        }
        for &(i, v) in &a6_cols[j] {
            row.push((mu6 + i, v));
        }
        for &(i, v) in &a8_cols[j] {
            row.push((mu7 + i, v));
        }
        lp.add_row(format!("dual_y_{}", cf.y_ids[j]), RowSense::Eq, 0.0, row);
    }

    // Envelope rows pinning each product variable u = z * v exactly:
    // u >= -z, u >= v, u <= 1 - z + v, with u in [-1, 0].
    let mut link = |lp: &mut LinearProgram, name: String, ucol: usize, vcol: usize, zcol: usize| {
        lp.add_row(
            format!("{name}_lo"),
            RowSense::Ge,
            0.0,
            vec![(ucol, 1.0), (zcol, 1.0)],
        );
        lp.add_row(
            format!("{name}_ge_v"),
            RowSense::Ge,
            0.0,
            vec![(ucol, 1.0), (vcol, -1.0)],
        );
        lp.add_row(
            format!("{name}_hi"),
            RowSense::Le,
            1.0,
            vec![(ucol, 1.0), (zcol, 1.0), (vcol, -1.0)],
        );
    };

    // Link rows for the balance-block products.
    {
        let mut idx = 0usize;
        for b in 0..nb {
            for &(i, _) in &h2_cols[b] {
                let q = u2[idx];
                link(&mut lp, format!("mc_u2np_b{b}_{i}"), q.col_np, mu2n + i, z_up_b + b);
                link(&mut lp, format!("mc_u2nm_b{b}_{i}"), q.col_nm, mu2n + i, z_dn_b + b);
                link(&mut lp, format!("mc_u2pp_b{b}_{i}"), q.col_pp, mu2p + i, z_up_b + b);
                link(&mut lp, format!("mc_u2pm_b{b}_{i}"), q.col_pm, mu2p + i, z_dn_b + b);
                idx += 1;
            }
        }
    }
    // Link rows for the line-block products.
    {
        let mut idx = 0usize;
        for b in 0..nb {
            for &(i, _) in &h3_cols[b] {
                let pr = u3[idx];
                link(&mut lp, format!("mc_u3p_b{b}_{i}"), pr.col_p, mu3 + i, z_up_b + b);
                link(&mut lp, format!("mc_u3m_b{b}_{i}"), pr.col_m, mu3 + i, z_dn_b + b);
                idx += 1;
            }
        }
    }
    // Link rows for the dynamics-block products.
    {
        let mut idx = 0usize;
        for t in 0..nt {
            for &(i, _) in &h4_cols[t] {
                let q = u4[idx];
                link(&mut lp, format!("mc_u4np_t{t}_{i}"), q.col_np, mu4n + i, z_up_t + t);
                link(&mut lp, format!("mc_u4nm_t{t}_{i}"), q.col_nm, mu4n + i, z_dn_t + t);
                link(&mut lp, format!("mc_u4pp_t{t}_{i}"), q.col_pp, mu4p + i, z_up_t + t);
                link(&mut lp, format!("mc_u4pm_t{t}_{i}"), q.col_pm, mu4p + i, z_dn_t + t);
                idx += 1;
            }
        }
    }

    // One direction per uncertain dimension.
    for b in 0..nb {
        lp.add_row(
            format!("dir_b{b}"),
            RowSense::Eq,
            1.0,
            vec![(z_up_b + b, 1.0), (z_dn_b + b, 1.0)],
        );
    }
    for t in 0..nt {
        lp.add_row(
            format!("dir_t{t}"),
            RowSense::Eq,
            1.0,
            vec![(z_up_t + t, 1.0), (z_dn_t + t, 1.0)],
        );
    }

    Ok(RdfeaProblem {
        lp,
        layout: RdfeaLayout {
            mu1,
            mu2n,
            mu2p,
            mu3,
            mu4n,
            mu4p,
            mu5,
            mu6,
            mu7,
            z_up_b,
            z_dn_b,
            z_up_t,
            z_dn_t,
            u2,
            u3,
            u4,
            n1,
            n2,
            n3,
            n4,
            n5,
            n6,
            n7,
        },
        lambda: lambda.clone(),
    })
}

/// A solved subproblem: the certificate value and the full variable vector.
#[derive(Debug, Clone)]
pub struct RdfeaSolution {
    pub eta: f64,
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

/// Solves the subproblem MILP. The optimum is never negative: the zero
/// multiplier vector is feasible for any direction choice, so the search is
/// seeded with it and certifies feasible scales without enumerating.
pub fn solve_rdfea(
    problem: &RdfeaProblem,
    cfg: &SolverConfig,
) -> Result<RdfeaSolution, BendersError> {
    let lay = &problem.layout;
    let mut zero = vec![0.0; problem.lp.num_cols()];
    for b in 0..problem.lambda.n_buses() {
        zero[lay.z_up_b + b] = 1.0;
    }
    for t in 0..problem.lambda.n_sub_intervals() {
        zero[lay.z_up_t + t] = 1.0;
    }
    let result = solver::solve_mip_seeded(&problem.lp, cfg, Some((0.0, zero)))?;
    if result.status != Status::Optimal {
        return Err(BendersError::UnexpectedStatus(result.status));
    }
    Ok(RdfeaSolution {
        eta: result.objective,
        values: result.primal,
        stats: result.stats,
    })
}

/// Builds the feasibility cut from a subproblem solution with positive
/// objective. The cut reproduces the subproblem objective at the generating
/// scales; that identity is checked before the cut is returned.
pub fn cut_from_duals(
    problem: &RdfeaProblem,
    solution: &RdfeaSolution,
    cf: &CompactForm,
    u: &UncertaintyModel,
    iteration: usize,
) -> Result<CutRecord, BendersError> {
    if solution.eta <= 0.0 {
        return Err(BendersError::CutMismatch {
            expected: solution.eta,
            got: 0.0,
        });
    }
    let lay = &problem.layout;
    let v = &solution.values;
    let nb = cf.n_buses;
    let nt = cf.n_t;

    let mut coef_up_b = vec![0.0; nb];
    let mut coef_dn_b = vec![0.0; nb];
    let mut coef_up_t = vec![0.0; nt];
    let mut coef_dn_t = vec![0.0; nt];

    for q in &lay.u2 {
        let b = q.dim;
        coef_up_b[b] += u.d_hat[b] * q.h * (v[q.col_np] - v[q.col_pp]);
        coef_dn_b[b] -= u.d_hat[b] * q.h * (v[q.col_nm] - v[q.col_pm]);
    }
    for p in &lay.u3 {
        let b = p.dim;
        coef_up_b[b] += u.d_hat[b] * p.h * v[p.col_p];
        coef_dn_b[b] -= u.d_hat[b] * p.h * v[p.col_m];
    }
    for q in &lay.u4 {
        let t = q.dim;
        coef_up_t[t] += u.delta_d_hat[t] * q.h * (v[q.col_np] - v[q.col_pp]);
        coef_dn_t[t] -= u.delta_d_hat[t] * q.h * (v[q.col_nm] - v[q.col_pm]);
    }

    let mut constant = 0.0;
    for i in 0..lay.n1 {
        constant += cf.b1[i] * v[lay.mu1 + i];
    }
    let h2_dbar = cf.h2.apply(&u.d_bar);
    for i in 0..lay.n2 {
        constant += h2_dbar[i] * (v[lay.mu2n + i] - v[lay.mu2p + i]);
    }
    let h3_dbar = cf.h3.apply(&u.d_bar);
    for i in 0..lay.n3 {
        constant += (cf.b3[i] + h3_dbar[i]) * v[lay.mu3 + i];
    }
    let h4_ddbar = cf.h4.apply(&u.delta_d_bar);
    for i in 0..lay.n4 {
        constant += h4_ddbar[i] * (v[lay.mu4n + i] - v[lay.mu4p + i]);
    }
    for i in 0..lay.n5 {
        constant += cf.b5[i] * v[lay.mu5 + i];
    }
    for i in 0..lay.n6 {
        constant += cf.b6[i] * v[lay.mu6 + i];
    }
    for i in 0..lay.n7 {
        constant += cf.b7[i] * v[lay.mu7 + i];
    }

    let cut = CutRecord {
        coef_up_b,
        coef_dn_b,
        coef_up_t,
        coef_dn_t,
        constant,
        iteration,
        eta: solution.eta,
    };
    let replay = cut.eval(&problem.lambda);
    if (replay - solution.eta).abs() > 1e-6 {
        return Err(BendersError::CutMismatch {
            expected: solution.eta,
            got: replay,
        });
    }
    Ok(cut)
}

/// One master/subproblem round, as recorded in the iteration trace.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub master_objective: f64,
    pub eta: f64,
    pub cut_constant: Option<f64>,
    pub wall: Duration,
}

/// The result of a full decomposition run.
#[derive(Debug, Clone)]
pub struct FlexReport {
    pub indices: FlexIndices,
    pub lambda_star: ScaleVector,
    pub iterations: usize,
    pub cuts: Vec<CutRecord>,
    pub trace: Vec<IterationRecord>,
}

fn join_violations(report: &[Violation]) -> String {
    report
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Runs the full decomposition: propose scales, certify or cut, repeat.
pub fn run_benders(case: &SystemCase, opts: &BendersOptions) -> Result<FlexReport, BendersError> {
    let report = model::validate_case(case);
    if !report.is_empty() {
        return Err(BendersError::InvalidCase(join_violations(&report)));
    }
    let cf = compact::assemble(case)?;
    let u = &case.uncertainty;

    // Zero-deviation certificate: if even the nominal point needs slack the
    // instance has no flexibility to measure.
    let base_lp = compact::fea_primal(&cf, &u.d_bar, &u.delta_d_bar)?;
    let base = solver::solve_lp(&base_lp, &opts.solver)?;
    if base.status != Status::Optimal {
        return Err(BendersError::UnexpectedStatus(base.status));
    }
    if base.objective > opts.feas_tol {
        return Err(BendersError::BaseInfeasible { eta: base.objective });
    }

    let mut master = MasterProblem::new(cf.a.clone(), cf.n_buses, cf.n_t);
    let mut trace: Vec<IterationRecord> = Vec::new();

    for iteration in 1..=opts.max_iterations {
        let started = Instant::now();
        let (lambda, master_objective) = solve_master(&master, &opts.solver)?;
        let problem = build_rdfea(&cf, u, &lambda)?;
        let solution = solve_rdfea(&problem, &opts.solver)?;

        if solution.eta <= opts.feas_tol {
            trace.push(IterationRecord {
                iteration,
                master_objective,
                eta: solution.eta,
                cut_constant: None,
                wall: started.elapsed(),
            });
            let indices = model::compute_indices(&lambda, u)?;
            return Ok(FlexReport {
                indices,
                lambda_star: lambda,
                iterations: iteration,
                cuts: master.into_cuts(),
                trace,
            });
        }

        let cut = cut_from_duals(&problem, &solution, &cf, u, iteration)?;
        trace.push(IterationRecord {
            iteration,
            master_objective,
            eta: solution.eta,
            cut_constant: Some(cut.constant),
            wall: started.elapsed(),
        });
        master.add_cut(cut);

        if opts.multi_cut {
            for extra in neighbor_cuts(&problem, &solution, &cf, u, iteration, opts)? {
                master.add_cut(extra);
            }
        }
    }

    Err(BendersError::IterationLimit {
        iterations: opts.max_iterations,
    })
}

/// Additional cuts from single-dimension flips of the worst vertex: each
/// flipped vertex fixes the binaries, the remaining LP prices it, and any
/// strictly positive value yields a (weaker but valid) cut.
fn neighbor_cuts(
    problem: &RdfeaProblem,
    solution: &RdfeaSolution,
    cf: &CompactForm,
    u: &UncertaintyModel,
    iteration: usize,
    opts: &BendersOptions,
) -> Result<Vec<CutRecord>, BendersError> {
    let (up_b, up_t) = problem.directions(&solution.values);
    let mut cuts = Vec::new();
    let dims = up_b.len() + up_t.len();
    for flip in 0..dims {
        let mut fb = up_b.clone();
        let mut ft = up_t.clone();
        if flip < fb.len() {
            fb[flip] = !fb[flip];
        } else {
            ft[flip - fb.len()] = !ft[flip - fb.len()];
        }
        let lp = problem.with_fixed_directions(&fb, &ft);
        let result = solver::solve_mip(&lp, &opts.solver)?;
        if result.status != Status::Optimal {
            continue;
        }
        if result.objective > opts.feas_tol {
            let fixed = RdfeaSolution {
                eta: result.objective,
                values: result.primal,
                stats: result.stats,
            };
            cuts.push(cut_from_duals(problem, &fixed, cf, u, iteration)?);
        }
    }
    Ok(cuts)
}
