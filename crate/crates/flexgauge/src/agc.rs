//! Zero-order-hold discretization of the continuous AGC model.
//!
//! The continuous model is a single-area governor/turbine/frequency system.
//! Per generator `n`, with frequency deviation `w` taken positive when load
//! exceeds generation:
//!
//! ```text
//! d pm_n / dt = (gv_n - pm_n) / t_ch_n          (turbine)
//! d gv_n / dt = (w / droop_n - gv_n) / t_g_n    (governor)
//! d w / dt    = (dd - sum_n pm_n - damping * w) / inertia
//! ```
//!
//! States are ordered `[pm_0.., gv_0.., w]` with the disturbance `dd` as the
//! single input. Discretization holds the input constant over each
//! sub-interval: `A_d = exp(A dt)` and `B_d = A^-1 (A_d - I) B`, with an
//! integral-series fallback when `A` is singular. The prime-mover and
//! frequency rows of `(A_d, B_d)` become the transition coefficients; the
//! governor rows are replaced in the optimization by the per-step governor
//! law `gv[t+1] - gv[t] = k_gain * w[t+1]` with `k_gain = dt / droop`, which
//! is also the convention expected of user-supplied matrices.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::AgcDynamics;

#[derive(Debug, Error)]
pub enum AgcError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular continuous system: {0}")]
    Singular(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Continuous-time single-area AGC parameters.
#[derive(Debug, Clone)]
pub struct ContinuousAgcModel {
    /// Turbine time constants (s), one per generator.
    pub t_ch: Vec<f64>,
    /// Governor time constants (s), one per generator.
    pub t_g: Vec<f64>,
    /// Droop (Hz/MW), one per generator.
    pub droop: Vec<f64>,
    /// System inertia (MW.s/Hz).
    pub inertia: f64,
    /// Load damping (MW/Hz).
    pub damping: f64,
    /// Sub-interval length (s).
    pub dt: f64,
    pub n_sub_intervals: usize,
    pub freq_min: f64,
    pub freq_max: f64,
}

impl ContinuousAgcModel {
    pub fn n_gens(&self) -> usize {
        self.t_ch.len()
    }

    fn validate(&self) -> Result<(), AgcError> {
        let g = self.n_gens();
        if self.t_g.len() != g || self.droop.len() != g {
            return Err(AgcError::Dimension(format!(
                "t_ch/t_g/droop lengths {} / {} / {} disagree",
                g,
                self.t_g.len(),
                self.droop.len()
            )));
        }
        if g == 0 {
            return Err(AgcError::Dimension("no generators".into()));
        }
        for (name, vals) in [("t_ch", &self.t_ch), ("t_g", &self.t_g), ("droop", &self.droop)] {
            if vals.iter().any(|&v| v <= 0.0) {
                return Err(AgcError::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.inertia <= 0.0 {
            return Err(AgcError::InvalidParameter("inertia must be positive".into()));
        }
        if self.damping < 0.0 {
            return Err(AgcError::InvalidParameter("damping must be nonnegative".into()));
        }
        if self.dt <= 0.0 {
            return Err(AgcError::InvalidParameter("dt must be positive".into()));
        }
        if self.n_sub_intervals < 1 {
            return Err(AgcError::InvalidParameter("need at least one sub-interval".into()));
        }
        Ok(())
    }

    /// The continuous state matrix in `[pm.., gv.., w]` ordering.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let g = self.n_gens();
        let n = 2 * g + 1;
        let mut a = DMatrix::zeros(n, n);
        let w = 2 * g;
        for i in 0..g {
            a[(i, i)] = -1.0 / self.t_ch[i];
            a[(i, g + i)] = 1.0 / self.t_ch[i];
            a[(g + i, g + i)] = -1.0 / self.t_g[i];
            a[(g + i, w)] = 1.0 / (self.droop[i] * self.t_g[i]);
            a[(w, i)] = -1.0 / self.inertia;
        }
        a[(w, w)] = -self.damping / self.inertia;
        a
    }

    /// The continuous input column for the disturbance.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let g = self.n_gens();
        let n = 2 * g + 1;
        let mut b = DMatrix::zeros(n, 1);
        b[(2 * g, 0)] = 1.0 / self.inertia;
        b
    }
}

/// Computes `exp(m * t)` by scaling-and-squaring with a truncated Taylor
/// series core. Relative accuracy is around 1e-13 for well-conditioned
/// inputs.
pub fn matrix_exponential(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>, AgcError> {
    if m.nrows() != m.ncols() {
        return Err(AgcError::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let scaled_full = m * t;
    let norm = scaled_full.camax().max(0.0) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let x = &scaled_full / 2f64.powi(squarings as i32);

    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=60 {
        term = (&term * &x) / k as f64;
        result += &term;
        if term.camax() <= 1e-20 * result.camax().max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Discretizes `(a, b)` under a zero-order hold on the input: returns
/// `(exp(a dt), integral_0^dt exp(a s) ds * b)`.
pub fn zoh_pair(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), AgcError> {
    if a.nrows() != a.ncols() {
        return Err(AgcError::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if b.nrows() != a.nrows() {
        return Err(AgcError::Dimension(format!(
            "input matrix has {} rows for a {}-state system",
            b.nrows(),
            a.nrows()
        )));
    }
    let ad = matrix_exponential(a, dt)?;
    let rhs = (&ad - DMatrix::identity(a.nrows(), a.nrows())) * b;

    // Prefer the closed form A^-1 (A_d - I) B; validate by residual and fall
    // back to the integral series for singular A.
    if let Some(bd) = a.clone().lu().solve(&rhs) {
        let residual = (a * &bd - &rhs).camax();
        let scale = rhs.camax().max(1.0);
        if residual <= 1e-8 * scale {
            return Ok((ad, bd));
        }
    }
    let bd = integral_series(a, b, dt)?;
    Ok((ad, bd))
}

/// `integral_0^dt exp(a s) ds * b` as the series
/// `sum_k a^k b dt^(k+1) / (k+1)!`, truncated at 1e-14 relative term size.
fn integral_series(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>, AgcError> {
    let mut term = b * dt;
    let mut acc = term.clone();
    for k in 1..=200 {
        term = (a * &term) * (dt / (k + 1) as f64);
        acc += &term;
        if term.camax() <= 1e-14 * acc.camax().max(1.0) {
            return Ok(acc);
        }
    }
    Err(AgcError::Singular(
        "input-integral series did not converge; reduce dt".into(),
    ))
}

/// Discretizes the continuous model into the transition coefficients used by
/// the dispatch constraints.
pub fn zoh_discretize(cont: &ContinuousAgcModel) -> Result<AgcDynamics, AgcError> {
    cont.validate()?;
    let g = cont.n_gens();
    let w = 2 * g;
    let a = cont.state_matrix();
    let b = cont.input_matrix();
    let (ad, bd) = zoh_pair(&a, &b, cont.dt)?;

    let alpha = (0..g)
        .map(|n| (0..g).map(|i| ad[(n, i)]).collect())
        .collect();
    let beta = (0..g)
        .map(|n| (0..g).map(|i| ad[(n, g + i)]).collect())
        .collect();
    let gamma = (0..g).map(|n| ad[(n, w)]).collect();
    let zeta = (0..g).map(|n| bd[(n, 0)]).collect();
    let kappa = (0..g).map(|i| ad[(w, i)]).collect();
    let tau_coef = (0..g).map(|i| ad[(w, g + i)]).collect();

    Ok(AgcDynamics {
        n_sub_intervals: cont.n_sub_intervals,
        dt: cont.dt,
        alpha,
        beta,
        gamma,
        zeta,
        kappa,
        tau_coef,
        rho: ad[(w, w)],
        eta: bd[(w, 0)],
        k_gain: cont.droop.iter().map(|r| cont.dt / r).collect(),
        freq_min: cont.freq_min,
        freq_max: cont.freq_max,
        freq_min_t: None,
        freq_max_t: None,
    })
}

/// Validates user-supplied coefficient matrices and passes them through
/// unchanged. Returns plausibility warnings alongside; `|rho| > 2` is
/// flagged because a stable frequency state should not amplify that fast.
pub fn pass_through(raw: AgcDynamics) -> Result<(AgcDynamics, Vec<String>), AgcError> {
    let g = raw.n_gens();
    let square = |name: &str, m: &Vec<Vec<f64>>| -> Result<(), AgcError> {
        if m.len() != g || m.iter().any(|row| row.len() != g) {
            return Err(AgcError::Dimension(format!("{name} is not {g}x{g}")));
        }
        Ok(())
    };
    square("alpha", &raw.alpha)?;
    square("beta", &raw.beta)?;
    for (name, v) in [
        ("gamma", &raw.gamma),
        ("zeta", &raw.zeta),
        ("kappa", &raw.kappa),
        ("tau_coef", &raw.tau_coef),
    ] {
        if v.len() != g {
            return Err(AgcError::Dimension(format!(
                "{name} has {} entries for {g} generators",
                v.len()
            )));
        }
    }
    if raw.n_sub_intervals < 1 {
        return Err(AgcError::InvalidParameter("need at least one sub-interval".into()));
    }
    if raw.dt <= 0.0 {
        return Err(AgcError::InvalidParameter("dt must be positive".into()));
    }
    let mut warnings = Vec::new();
    if raw.rho.abs() > 2.0 {
        warnings.push(format!(
            "rho = {} is outside [-2, 2]; transition coefficients look implausible",
            raw.rho
        ));
    }
    Ok((raw, warnings))
}

/// Zero-slack trajectory of the discrete system: states at sub-intervals
/// `1..=dd.len()` when the governor follows its law exactly.
///
/// Returned vectors are indexed `[t][n]` for generator states and `[t]` for
/// frequency, with `t = 0` corresponding to sub-interval 1.
pub fn simulate_response(dynamics: &AgcDynamics, dd: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let g = dynamics.n_gens();
    let steps = dd.len();
    let mut pm_prev = vec![0.0; g];
    let mut gv_prev = vec![0.0; g];
    let mut w_prev = 0.0;
    let mut pm_out = Vec::with_capacity(steps);
    let mut gv_out = Vec::with_capacity(steps);
    let mut w_out = Vec::with_capacity(steps);
    for &u in dd {
        let mut pm = vec![0.0; g];
        for n in 0..g {
            let mut v = dynamics.gamma[n] * w_prev + dynamics.zeta[n] * u;
            for i in 0..g {
                v += dynamics.alpha[n][i] * pm_prev[i] + dynamics.beta[n][i] * gv_prev[i];
            }
            pm[n] = v;
        }
        let mut w = dynamics.rho * w_prev + dynamics.eta * u;
        for i in 0..g {
            w += dynamics.kappa[i] * pm_prev[i] + dynamics.tau_coef[i] * gv_prev[i];
        }
        let gv: Vec<f64> = (0..g)
            .map(|n| gv_prev[n] + dynamics.k_gain[n] * w)
            .collect();
        pm_out.push(pm.clone());
        gv_out.push(gv.clone());
        w_out.push(w);
        pm_prev = pm;
        gv_prev = gv;
        w_prev = w;
    }
    (pm_out, gv_out, w_out)
}
