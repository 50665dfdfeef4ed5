//! Domain types, case validation, and the flexibility indices.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A load bus with its nominal load and maximum deviation (both MW).
#[derive(Debug, Clone)]
pub struct Bus {
    pub id: String,
    pub d_bar: f64,
    pub d_hat: f64,
}

/// One breakpoint of a convex piecewise-linear generation cost. The segment
/// starting at `breakpoint` MW has marginal cost `slope` $/MW and extends to
/// the next breakpoint (the last segment is unbounded).
#[derive(Debug, Clone, Copy)]
pub struct CostSegment {
    pub breakpoint: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub id: String,
    pub bus_id: String,
    pub p_min: f64,
    pub p_max: f64,
    /// Maximum regulation-up award (MW).
    pub reg_up_cap: f64,
    /// Maximum regulation-down award (MW).
    pub reg_dn_cap: f64,
    /// Maximum spinning-reserve award (MW).
    pub sr_cap: f64,
    /// Ramp-up limit per AGC sub-interval (MW).
    pub rur: f64,
    /// Ramp-down limit per AGC sub-interval (MW).
    pub rdr: f64,
    /// Convex piecewise-linear cost; cost is zero at the first breakpoint.
    pub cost_segments: Vec<CostSegment>,
    /// Penalty cost ($/MW) on governor slack in the AGC constraints.
    pub cp: f64,
    /// Governor response gain: commanded output change per Hz of frequency
    /// deviation over one sub-interval.
    pub k_gain: f64,
}

impl Generator {
    /// Cost pieces as affine functions `slope * p + intercept`, one per
    /// segment, whose pointwise maximum is the cost for `p` at or above the
    /// first breakpoint.
    pub fn cost_pieces(&self) -> Vec<(f64, f64)> {
        let mut pieces = Vec::with_capacity(self.cost_segments.len());
        let mut accumulated = 0.0;
        for (s, seg) in self.cost_segments.iter().enumerate() {
            pieces.push((seg.slope, accumulated - seg.slope * seg.breakpoint));
            if s + 1 < self.cost_segments.len() {
                accumulated += seg.slope * (self.cost_segments[s + 1].breakpoint - seg.breakpoint);
            }
        }
        pieces
    }

    /// Evaluates the piecewise-linear cost at `p`.
    pub fn cost_at(&self, p: f64) -> f64 {
        self.cost_pieces()
            .into_iter()
            .map(|(a, b)| a * p + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Line {
    pub id: String,
    /// Thermal capacity (MW), enforced in both flow directions.
    pub capacity: f64,
    /// Sensitivity of this line's flow to net injection at each bus, in bus
    /// order.
    pub shift_factors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReserveRequirements {
    pub sr_min: f64,
    pub reg_min_up: f64,
    pub reg_min_dn: f64,
}

/// Discrete-time AGC coefficients.
///
/// With generator prime-mover changes `dpm`, governor changes `dgv`, and the
/// frequency deviation `dw` (positive when load exceeds generation), the
/// transition from sub-interval `t` to `t+1` under disturbance `dd_t` is
///
/// ```text
/// dpm[n, t+1] = sum_i(alpha[n][i] dpm[i, t] + beta[n][i] dgv[i, t])
///               + gamma[n] dw[t] + zeta[n] dd_t
/// dw[t+1]     = sum_i(kappa[i] dpm[i, t] + tau_coef[i] dgv[i, t])
///               + rho dw[t] + eta dd_t
/// ```
///
/// while the governor law couples `dgv[n, t+1] - dgv[n, t]` to
/// `k_gain[n] * dw[t+1]` through penalized slack.
#[derive(Debug, Clone)]
pub struct AgcDynamics {
    pub n_sub_intervals: usize,
    /// Sub-interval length (s).
    pub dt: f64,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub zeta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub tau_coef: Vec<f64>,
    pub rho: f64,
    pub eta: f64,
    /// Governor gains, mirroring `Generator::k_gain` in generator order.
    pub k_gain: Vec<f64>,
    /// Frequency-deviation bounds (Hz), applied at every sub-interval.
    pub freq_min: f64,
    pub freq_max: f64,
    /// Optional per-sub-interval overrides of the frequency bounds.
    pub freq_min_t: Option<Vec<f64>>,
    pub freq_max_t: Option<Vec<f64>>,
}

impl AgcDynamics {
    pub fn n_gens(&self) -> usize {
        self.k_gain.len()
    }

    pub fn freq_bounds(&self, t: usize) -> (f64, f64) {
        let lo = self
            .freq_min_t
            .as_ref()
            .map(|v| v[t])
            .unwrap_or(self.freq_min);
        let hi = self
            .freq_max_t
            .as_ref()
            .map(|v| v[t])
            .unwrap_or(self.freq_max);
        (lo, hi)
    }
}

/// Nominal values and maximum deviations for both uncertainty layers: per-bus
/// loads and per-sub-interval system disturbances.
#[derive(Debug, Clone)]
pub struct UncertaintyModel {
    pub d_bar: Vec<f64>,
    pub d_hat: Vec<f64>,
    pub delta_d_bar: Vec<f64>,
    pub delta_d_hat: Vec<f64>,
}

impl UncertaintyModel {
    pub fn from_buses(buses: &[Bus], delta_d_bar: Vec<f64>, delta_d_hat: Vec<f64>) -> Self {
        UncertaintyModel {
            d_bar: buses.iter().map(|b| b.d_bar).collect(),
            d_hat: buses.iter().map(|b| b.d_hat).collect(),
            delta_d_bar,
            delta_d_hat,
        }
    }

    pub fn n_buses(&self) -> usize {
        self.d_bar.len()
    }

    pub fn n_sub_intervals(&self) -> usize {
        self.delta_d_bar.len()
    }
}

/// Deviation scales, one pair per bus and per sub-interval, each in `[0, 1]`.
///
/// The canonical flat ordering is `(up, dn)` pairs by bus index followed by
/// `(up, dn)` pairs by sub-interval index; cut coefficients and the objective
/// vector use the same ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVector {
    pub lam_up_b: Vec<f64>,
    pub lam_dn_b: Vec<f64>,
    pub lam_up_t: Vec<f64>,
    pub lam_dn_t: Vec<f64>,
}

impl ScaleVector {
    pub fn zeros(n_buses: usize, n_sub_intervals: usize) -> Self {
        ScaleVector {
            lam_up_b: vec![0.0; n_buses],
            lam_dn_b: vec![0.0; n_buses],
            lam_up_t: vec![0.0; n_sub_intervals],
            lam_dn_t: vec![0.0; n_sub_intervals],
        }
    }

    pub fn ones(n_buses: usize, n_sub_intervals: usize) -> Self {
        ScaleVector {
            lam_up_b: vec![1.0; n_buses],
            lam_dn_b: vec![1.0; n_buses],
            lam_up_t: vec![1.0; n_sub_intervals],
            lam_dn_t: vec![1.0; n_sub_intervals],
        }
    }

    pub fn uniform(n_buses: usize, n_sub_intervals: usize, s: f64) -> Self {
        ScaleVector {
            lam_up_b: vec![s; n_buses],
            lam_dn_b: vec![s; n_buses],
            lam_up_t: vec![s; n_sub_intervals],
            lam_dn_t: vec![s; n_sub_intervals],
        }
    }

    pub fn n_buses(&self) -> usize {
        self.lam_up_b.len()
    }

    pub fn n_sub_intervals(&self) -> usize {
        self.lam_up_t.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.n_buses() + 2 * self.n_sub_intervals()
    }

    /// Flattens into the canonical ordering.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.dim());
        for b in 0..self.n_buses() {
            flat.push(self.lam_up_b[b]);
            flat.push(self.lam_dn_b[b]);
        }
        for t in 0..self.n_sub_intervals() {
            flat.push(self.lam_up_t[t]);
            flat.push(self.lam_dn_t[t]);
        }
        flat
    }

    pub fn from_flat(flat: &[f64], n_buses: usize, n_sub_intervals: usize) -> Self {
        assert_eq!(flat.len(), 2 * n_buses + 2 * n_sub_intervals);
        let mut v = ScaleVector::zeros(n_buses, n_sub_intervals);
        for b in 0..n_buses {
            v.lam_up_b[b] = flat[2 * b];
            v.lam_dn_b[b] = flat[2 * b + 1];
        }
        for t in 0..n_sub_intervals {
            v.lam_up_t[t] = flat[2 * n_buses + 2 * t];
            v.lam_dn_t[t] = flat[2 * n_buses + 2 * t + 1];
        }
        v
    }

    /// Human-readable component names in the canonical ordering.
    pub fn component_names(buses: &[Bus], n_sub_intervals: usize) -> Vec<String> {
        let mut names = Vec::new();
        for b in buses {
            names.push(format!("up_{}", b.id));
            names.push(format!("dn_{}", b.id));
        }
        for t in 0..n_sub_intervals {
            names.push(format!("up_t{}", t));
            names.push(format!("dn_t{}", t));
        }
        names
    }
}

#[derive(Debug, Clone)]
pub struct SystemCase {
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    pub reserve_requirements: ReserveRequirements,
    pub agc: AgcDynamics,
    pub uncertainty: UncertaintyModel,
    /// Operational-cost budget ($) covering generation cost plus governor
    /// slack penalties.
    pub budget: f64,
}

impl SystemCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_gens(&self) -> usize {
        self.generators.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_sub_intervals(&self) -> usize {
        self.agc.n_sub_intervals
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }
}

/// A single validation finding: which object, what is wrong.
#[derive(Debug, Clone)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn violation(subject: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        subject: subject.into(),
        message: message.into(),
    }
}

/// Checks every structural invariant of a case. An empty report means the
/// case is well formed; violations are data, not errors.
pub fn validate_case(case: &SystemCase) -> Vec<Violation> {
    let mut out = Vec::new();
    let nb = case.n_buses();
    let ng = case.n_gens();
    let nt = case.agc.n_sub_intervals;

    for bus in &case.buses {
        if bus.d_bar < 0.0 {
            out.push(violation(format!("bus {}", bus.id), "nominal load is negative"));
        }
        if bus.d_hat < 0.0 {
            out.push(violation(format!("bus {}", bus.id), "load deviation is negative"));
        }
    }
    for (i, bus) in case.buses.iter().enumerate() {
        if case.buses[..i].iter().any(|other| other.id == bus.id) {
            out.push(violation(format!("bus {}", bus.id), "duplicate bus id"));
        }
    }

    for gen in &case.generators {
        let subject = format!("generator {}", gen.id);
        if gen.p_min > gen.p_max {
            out.push(violation(&subject, "p_min exceeds p_max"));
        }
        for (name, v) in [
            ("reg_up_cap", gen.reg_up_cap),
            ("reg_dn_cap", gen.reg_dn_cap),
            ("sr_cap", gen.sr_cap),
            ("rur", gen.rur),
            ("rdr", gen.rdr),
            ("cp", gen.cp),
        ] {
            if v < 0.0 {
                out.push(violation(&subject, format!("{name} is negative")));
            }
        }
        if case.bus_index(&gen.bus_id).is_none() {
            out.push(violation(&subject, format!("references unknown bus {}", gen.bus_id)));
        }
        if gen.cost_segments.is_empty() {
            out.push(violation(&subject, "cost has no segments"));
        }
        for pair in gen.cost_segments.windows(2) {
            if pair[1].breakpoint <= pair[0].breakpoint {
                out.push(violation(&subject, "cost breakpoints not strictly increasing"));
            }
            if pair[1].slope < pair[0].slope {
                out.push(violation(&subject, "cost slopes decrease (cost not convex)"));
            }
        }
    }
    for (i, gen) in case.generators.iter().enumerate() {
        if case.generators[..i].iter().any(|other| other.id == gen.id) {
            out.push(violation(format!("generator {}", gen.id), "duplicate generator id"));
        }
    }

    for line in &case.lines {
        let subject = format!("line {}", line.id);
        if line.capacity <= 0.0 {
            out.push(violation(&subject, "capacity must be positive"));
        }
        if line.shift_factors.len() != nb {
            out.push(violation(
                &subject,
                format!("{} shift factors for {} buses", line.shift_factors.len(), nb),
            ));
        }
    }

    let rr = &case.reserve_requirements;
    for (name, v) in [
        ("sr_min", rr.sr_min),
        ("reg_min_up", rr.reg_min_up),
        ("reg_min_dn", rr.reg_min_dn),
    ] {
        if v < 0.0 {
            out.push(violation("reserve requirements", format!("{name} is negative")));
        }
    }

    let agc = &case.agc;
    if agc.n_sub_intervals < 1 {
        out.push(violation("agc", "needs at least one sub-interval"));
    }
    if agc.dt <= 0.0 {
        out.push(violation("agc", "dt must be positive"));
    }
    if !(agc.freq_min <= 0.0 && 0.0 <= agc.freq_max) {
        out.push(violation("agc", "frequency bounds must bracket zero"));
    }
    let square = |m: &Vec<Vec<f64>>| m.len() == ng && m.iter().all(|row| row.len() == ng);
    if !square(&agc.alpha) {
        out.push(violation("agc", format!("alpha is not {ng}x{ng}")));
    }
    if !square(&agc.beta) {
        out.push(violation("agc", format!("beta is not {ng}x{ng}")));
    }
    for (name, v) in [
        ("gamma", &agc.gamma),
        ("zeta", &agc.zeta),
        ("kappa", &agc.kappa),
        ("tau_coef", &agc.tau_coef),
        ("k_gain", &agc.k_gain),
    ] {
        if v.len() != ng {
            out.push(violation("agc", format!("{name} has {} entries for {ng} generators", v.len())));
        }
    }
    for (name, v) in [("freq_min_t", &agc.freq_min_t), ("freq_max_t", &agc.freq_max_t)] {
        if let Some(v) = v {
            if v.len() != nt {
                out.push(violation("agc", format!("{name} has {} entries for {nt} sub-intervals", v.len())));
            }
        }
    }

    let u = &case.uncertainty;
    if u.d_bar.len() != nb || u.d_hat.len() != nb {
        out.push(violation("uncertainty", "bus vectors do not match the bus count"));
    } else {
        for (b, bus) in case.buses.iter().enumerate() {
            if u.d_bar[b] != bus.d_bar || u.d_hat[b] != bus.d_hat {
                out.push(violation("uncertainty", format!("bus data for {} disagrees with bus table", bus.id)));
            }
        }
    }
    if u.delta_d_bar.len() != nt || u.delta_d_hat.len() != nt {
        out.push(violation("uncertainty", "disturbance vectors do not match the sub-interval count"));
    }
    for (t, &v) in u.delta_d_hat.iter().enumerate() {
        if v < 0.0 {
            out.push(violation("uncertainty", format!("disturbance deviation at t{t} is negative")));
        }
    }

    if case.budget < 0.0 {
        out.push(violation("budget", "must be nonnegative"));
    }

    out
}

/// The seven flexibility indices (all MW).
///
/// `tf = edf + agcf`, `edf = edupf + eddnf`, and `agcf = agcupf + agcdnf`
/// hold exactly because the aggregates are formed from the components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexIndices {
    pub tf: f64,
    pub edf: f64,
    pub agcf: f64,
    pub edupf: f64,
    pub eddnf: f64,
    pub agcupf: f64,
    pub agcdnf: f64,
}

/// Computes the seven indices at a given scale vector.
pub fn compute_indices(lambda: &ScaleVector, u: &UncertaintyModel) -> Result<FlexIndices, ModelError> {
    if lambda.n_buses() != u.n_buses() || lambda.n_sub_intervals() != u.n_sub_intervals() {
        return Err(ModelError::DimensionMismatch(format!(
            "scales are {}x{} but uncertainty is {}x{}",
            lambda.n_buses(),
            lambda.n_sub_intervals(),
            u.n_buses(),
            u.n_sub_intervals()
        )));
    }
    let dot = |w: &[f64], l: &[f64]| w.iter().zip(l).map(|(a, b)| a * b).sum::<f64>();
    let edupf = dot(&u.d_hat, &lambda.lam_up_b);
    let eddnf = dot(&u.d_hat, &lambda.lam_dn_b);
    let agcupf = dot(&u.delta_d_hat, &lambda.lam_up_t);
    let agcdnf = dot(&u.delta_d_hat, &lambda.lam_dn_t);
    let edf = edupf + eddnf;
    let agcf = agcupf + agcdnf;
    Ok(FlexIndices {
        tf: edf + agcf,
        edf,
        agcf,
        edupf,
        eddnf,
        agcupf,
        agcdnf,
    })
}

/// Objective coefficients `a` in the canonical scale ordering, so that
/// `a . lambda_flat` equals the total flexibility.
pub fn objective_coefficients(u: &UncertaintyModel) -> Vec<f64> {
    let mut a = Vec::with_capacity(2 * u.n_buses() + 2 * u.n_sub_intervals());
    for &dh in &u.d_hat {
        a.push(dh);
        a.push(dh);
    }
    for &ddh in &u.delta_d_hat {
        a.push(ddh);
        a.push(ddh);
    }
    a
}
