//! Brute-force robust-feasibility verification for desk-scale cases.
//!
//! The inner "can the system serve this realization" question is answered by
//! a slack-minimizing LP; the outer "worst realization inside the scaled
//! box" question is answered by enumerating every box vertex, which is exact
//! because the inner value is convex in the realization. The enumeration is
//! exponential in buses + sub-intervals and refuses to run past 2^20
//! vertices: an oracle that samples is not an oracle.

use rayon::prelude::*;
use thiserror::Error;

use crate::compact::{self, CompactError, CompactForm};
use crate::model::{ScaleVector, SystemCase, UncertaintyModel};
use crate::solver::{self, SolverConfig, SolverError, Status};

/// Feasibility threshold shared with the decomposition loop.
pub const FEAS_TOL: f64 = 1e-6;
/// Bisection tolerance on the ray scale.
pub const BISECTION_TOL: f64 = 1e-6;
/// Enumeration guard: at most 2^20 vertices.
pub const MAX_ENUM_DIMS: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{dims} uncertain dimensions exceed the enumeration guard of {MAX_ENUM_DIMS}")]
    TooManyDimensions { dims: usize },
    #[error("base case is infeasible even with zero deviation (slack {eta})")]
    BaseInfeasible { eta: f64 },
    #[error("slack LP ended with status {0:?}")]
    UnexpectedStatus(Status),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Compact(#[from] CompactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// One box vertex: a deviation direction per bus and per sub-interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexAssignment {
    pub bus_directions: Vec<Direction>,
    pub sub_interval_directions: Vec<Direction>,
}

impl VertexAssignment {
    fn from_mask(mask: usize, n_buses: usize, n_t: usize) -> Self {
        let dir = |bit: usize| {
            if mask >> bit & 1 == 1 {
                Direction::Up
            } else {
                Direction::Down
            }
        };
        VertexAssignment {
            bus_directions: (0..n_buses).map(dir).collect(),
            sub_interval_directions: (0..n_t).map(|t| dir(n_buses + t)).collect(),
        }
    }

    /// The load and disturbance realization at this vertex of the box scaled
    /// by `lambda`.
    pub fn realization(&self, u: &UncertaintyModel, lambda: &ScaleVector) -> (Vec<f64>, Vec<f64>) {
        let d = (0..u.n_buses())
            .map(|b| match self.bus_directions[b] {
                Direction::Up => u.d_bar[b] + lambda.lam_up_b[b] * u.d_hat[b],
                Direction::Down => u.d_bar[b] - lambda.lam_dn_b[b] * u.d_hat[b],
            })
            .collect();
        let dd = (0..u.n_sub_intervals())
            .map(|t| match self.sub_interval_directions[t] {
                Direction::Up => u.delta_d_bar[t] + lambda.lam_up_t[t] * u.delta_d_hat[t],
                Direction::Down => u.delta_d_bar[t] - lambda.lam_dn_t[t] * u.delta_d_hat[t],
            })
            .collect();
        (d, dd)
    }
}

/// Minimum total slack needed to serve the fixed realization `(d, dd)`.
pub fn min_slack_lp(
    cf: &CompactForm,
    d: &[f64],
    dd: &[f64],
    cfg: &SolverConfig,
) -> Result<f64, OracleError> {
    let lp = compact::fea_primal(cf, d, dd)?;
    let result = solver::solve_lp(&lp, cfg)?;
    if result.status != Status::Optimal {
        return Err(OracleError::UnexpectedStatus(result.status));
    }
    Ok(result.objective)
}

/// Worst-case slack over every vertex of the box scaled by `lambda`, with
/// the vertex that attains it. Vertices are evaluated in parallel; ties go
/// to the lexicographically smallest assignment so the result is
/// deterministic.
pub fn worst_case_eta(
    cf: &CompactForm,
    u: &UncertaintyModel,
    lambda: &ScaleVector,
    cfg: &SolverConfig,
) -> Result<(f64, VertexAssignment), OracleError> {
    let nb = u.n_buses();
    let nt = u.n_sub_intervals();
    let dims = nb + nt;
    if dims > MAX_ENUM_DIMS {
        return Err(OracleError::TooManyDimensions { dims });
    }
    let n_vertices = 1usize << dims;
    let evaluated: Result<Vec<(f64, usize)>, OracleError> = (0..n_vertices)
        .into_par_iter()
        .map(|mask| {
            let vertex = VertexAssignment::from_mask(mask, nb, nt);
            let (d, dd) = vertex.realization(u, lambda);
            min_slack_lp(cf, &d, &dd, cfg).map(|eta| (eta, mask))
        })
        .collect();
    let best = evaluated?
        .into_iter()
        .reduce(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one vertex");
    Ok((best.0, VertexAssignment::from_mask(best.1, nb, nt)))
}

/// Largest scale `s` such that the box `s * weights` is robustly servable,
/// found by bisection to [`BISECTION_TOL`]. The product `a . (s * weights)`
/// lower-bounds the decomposition's total flexibility, which optimizes over
/// the whole scale box rather than a single ray.
pub fn reference_flexibility(
    case: &SystemCase,
    weights: &ScaleVector,
    cfg: &SolverConfig,
) -> Result<f64, OracleError> {
    let cf = compact::assemble(case)?;
    let u = &case.uncertainty;

    let scaled = |s: f64| ScaleVector {
        lam_up_b: weights.lam_up_b.iter().map(|w| s * w).collect(),
        lam_dn_b: weights.lam_dn_b.iter().map(|w| s * w).collect(),
        lam_up_t: weights.lam_up_t.iter().map(|w| s * w).collect(),
        lam_dn_t: weights.lam_dn_t.iter().map(|w| s * w).collect(),
    };

    let (eta0, _) = worst_case_eta(&cf, u, &scaled(0.0), cfg)?;
    if eta0 > FEAS_TOL {
        return Err(OracleError::BaseInfeasible { eta: eta0 });
    }
    let (eta1, _) = worst_case_eta(&cf, u, &scaled(1.0), cfg)?;
    if eta1 <= FEAS_TOL {
        return Ok(1.0);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let (eta, _) = worst_case_eta(&cf, u, &scaled(mid), cfg)?;
        if eta <= FEAS_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
