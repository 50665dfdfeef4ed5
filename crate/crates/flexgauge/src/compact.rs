//! Block-matrix assembly of the dispatch + AGC constraint system.
//!
//! Variables are split into the dispatch vector `x` and the AGC vector `y`:
//!
//! ```text
//! x = (p, reg_up, reg_dn, sr, cost_aux)           per generator
//! y = (dpm, dgv, dw, slack_up, slack_dn)          per generator/sub-interval
//! ```
//!
//! `cost_aux` are epigraph variables for the piecewise-linear generation
//! cost; they carry the budget row. The constraint blocks are
//!
//! ```text
//! A1 x <= b1              generation/reserve caps, system reserve
//!                         requirements (>= stored negated), cost epigraph
//! A2 x  = H2 d            system power balance
//! A3 x <= H3 d + b3       line limits, both directions (b3 = capacities)
//! A4 y  = H4 dd           prime-mover and frequency transitions
//! A5 y  = b5              governor law with its signed slack pair
//! A6 y <= b6              ramp limits, frequency bounds, slack sign rows
//! A7 x + A8 y <= b7       budget and regulation coupling
//! ```
//!
//! Sub-intervals are numbered `1..=T` for states; the disturbance driving
//! the transition into state `t` is `dd[t-1]`. States at time 0 are fixed to
//! zero and eliminated. Every row and column is tagged with a label so dual
//! values and cuts can be traced back to named constraints.
//!
//! Row counts per block, with `B` buses, `G` generators, `L` lines, `T`
//! sub-intervals, and `S` total cost segments:
//! `A1: 5G + 3 + S`, `A2: 1`, `A3: 2L`, `A4: T(G+1)`, `A5: TG`,
//! `A6: 4TG + 2T`, `A7/A8: 2TG + 1`.

use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::model::{self, SystemCase};
use crate::solver::{LinearProgram, RowSense, Sense};

#[derive(Debug, Error)]
pub enum CompactError {
    #[error("case fails validation: {0}")]
    InvalidCase(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Row-sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMat {
    pub fn new(ncols: usize) -> Self {
        SparseMat { ncols, rows: Vec::new() }
    }

    pub fn push_row(&mut self, mut entries: Vec<(usize, f64)>) -> usize {
        entries.sort_by_key(|e| e.0);
        entries.retain(|e| e.1 != 0.0);
        debug_assert!(entries.iter().all(|e| e.0 < self.ncols));
        self.rows.push(entries);
        self.rows.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Dense matrix-vector product `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Column-major view: for each column, its `(row, value)` entries.
    pub fn transpose_entries(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.ncols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a));
            }
        }
        cols
    }
}

/// Dispatch-stage variable labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XVar {
    P(usize),
    RegUp(usize),
    RegDn(usize),
    Sr(usize),
    /// Epigraph variable carrying generator cost into the budget row.
    CostAux(usize),
}

impl fmt::Display for XVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XVar::P(g) => write!(f, "p({g})"),
            XVar::RegUp(g) => write!(f, "reg_up({g})"),
            XVar::RegDn(g) => write!(f, "reg_dn({g})"),
            XVar::Sr(g) => write!(f, "sr({g})"),
            XVar::CostAux(g) => write!(f, "cost({g})"),
        }
    }
}

/// AGC-stage variable labels; `t` is the state time in `1..=T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YVar {
    PrimeMover { gen: usize, t: usize },
    Governor { gen: usize, t: usize },
    Freq { t: usize },
    SlackUp { gen: usize, t: usize },
    SlackDn { gen: usize, t: usize },
}

impl fmt::Display for YVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YVar::PrimeMover { gen, t } => write!(f, "dpm({gen},{t})"),
            YVar::Governor { gen, t } => write!(f, "dgv({gen},{t})"),
            YVar::Freq { t } => write!(f, "dw({t})"),
            YVar::SlackUp { gen, t } => write!(f, "df_up({gen},{t})"),
            YVar::SlackDn { gen, t } => write!(f, "df_dn({gen},{t})"),
        }
    }
}

/// Constraint labels across all blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    GenUpper(usize),
    GenLower(usize),
    RegUpCap(usize),
    RegDnCap(usize),
    SrCap(usize),
    SrReq,
    RegUpReq,
    RegDnReq,
    CostEpigraph { gen: usize, seg: usize },
    Balance,
    LineUpper(usize),
    LineLower(usize),
    PrimeMoverDyn { gen: usize, t: usize },
    FreqDyn { t: usize },
    GovernorLaw { gen: usize, t: usize },
    RampUp { gen: usize, t: usize },
    RampDn { gen: usize, t: usize },
    FreqUpper { t: usize },
    FreqLower { t: usize },
    SlackUpSign { gen: usize, t: usize },
    SlackDnSign { gen: usize, t: usize },
    Budget,
    RegCoupUpper { gen: usize, t: usize },
    RegCoupLower { gen: usize, t: usize },
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use RowLabel::*;
        match self {
            GenUpper(g) => write!(f, "gen_upper({g})"),
            GenLower(g) => write!(f, "gen_lower({g})"),
            RegUpCap(g) => write!(f, "reg_up_cap({g})"),
            RegDnCap(g) => write!(f, "reg_dn_cap({g})"),
            SrCap(g) => write!(f, "sr_cap({g})"),
            SrReq => write!(f, "sr_req"),
            RegUpReq => write!(f, "reg_up_req"),
            RegDnReq => write!(f, "reg_dn_req"),
            CostEpigraph { gen, seg } => write!(f, "cost_epi({gen},{seg})"),
            Balance => write!(f, "balance"),
            LineUpper(l) => write!(f, "line_upper({l})"),
            LineLower(l) => write!(f, "line_lower({l})"),
            PrimeMoverDyn { gen, t } => write!(f, "pm_dyn({gen},{t})"),
            FreqDyn { t } => write!(f, "freq_dyn({t})"),
            GovernorLaw { gen, t } => write!(f, "governor({gen},{t})"),
            RampUp { gen, t } => write!(f, "ramp_up({gen},{t})"),
            RampDn { gen, t } => write!(f, "ramp_dn({gen},{t})"),
            FreqUpper { t } => write!(f, "freq_upper({t})"),
            FreqLower { t } => write!(f, "freq_lower({t})"),
            SlackUpSign { gen, t } => write!(f, "slack_up_sign({gen},{t})"),
            SlackDnSign { gen, t } => write!(f, "slack_dn_sign({gen},{t})"),
            Budget => write!(f, "budget"),
            RegCoupUpper { gen, t } => write!(f, "reg_coup_upper({gen},{t})"),
            RegCoupLower { gen, t } => write!(f, "reg_coup_lower({gen},{t})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompactForm {
    pub n_buses: usize,
    pub n_gens: usize,
    pub n_lines: usize,
    pub n_t: usize,
    /// Bus index of each generator.
    pub bus_of_gen: Vec<usize>,

    pub a1: SparseMat,
    pub b1: Vec<f64>,
    pub a2: SparseMat,
    pub h2: SparseMat,
    pub a3: SparseMat,
    pub h3: SparseMat,
    /// Constant part of the line-limit rows (the capacities); the rhs of
    /// block 3 is `H3 d + b3`.
    pub b3: Vec<f64>,
    pub a4: SparseMat,
    pub h4: SparseMat,
    pub a5: SparseMat,
    pub b5: Vec<f64>,
    pub a6: SparseMat,
    pub b6: Vec<f64>,
    pub a7: SparseMat,
    pub a8: SparseMat,
    pub b7: Vec<f64>,

    /// Objective coefficients over the flat scale vector.
    pub a: Vec<f64>,

    pub x_ids: Vec<XVar>,
    pub y_ids: Vec<YVar>,
    pub rows1: Vec<RowLabel>,
    pub rows2: Vec<RowLabel>,
    pub rows3: Vec<RowLabel>,
    pub rows4: Vec<RowLabel>,
    pub rows5: Vec<RowLabel>,
    pub rows6: Vec<RowLabel>,
    pub rows7: Vec<RowLabel>,
}

impl CompactForm {
    pub fn nx(&self) -> usize {
        5 * self.n_gens
    }

    pub fn ny(&self) -> usize {
        4 * self.n_t * self.n_gens + self.n_t
    }

    pub fn x_p(&self, g: usize) -> usize {
        g
    }
    pub fn x_reg_up(&self, g: usize) -> usize {
        self.n_gens + g
    }
    pub fn x_reg_dn(&self, g: usize) -> usize {
        2 * self.n_gens + g
    }
    pub fn x_sr(&self, g: usize) -> usize {
        3 * self.n_gens + g
    }
    pub fn x_cost(&self, g: usize) -> usize {
        4 * self.n_gens + g
    }

    /// `t` is a state time in `1..=n_t`.
    pub fn y_pm(&self, g: usize, t: usize) -> usize {
        (t - 1) * self.n_gens + g
    }
    pub fn y_gv(&self, g: usize, t: usize) -> usize {
        self.n_t * self.n_gens + (t - 1) * self.n_gens + g
    }
    pub fn y_w(&self, t: usize) -> usize {
        2 * self.n_t * self.n_gens + (t - 1)
    }
    pub fn y_slack_up(&self, g: usize, t: usize) -> usize {
        2 * self.n_t * self.n_gens + self.n_t + (t - 1) * self.n_gens + g
    }
    pub fn y_slack_dn(&self, g: usize, t: usize) -> usize {
        3 * self.n_t * self.n_gens + self.n_t + (t - 1) * self.n_gens + g
    }

    /// Writes every block as `(block, row label, column label, coefficient)`
    /// lines for diffing.
    pub fn dump_blocks(&self, w: &mut impl Write) -> std::io::Result<()> {
        let x_name = |j: usize| self.x_ids[j].to_string();
        let y_name = |j: usize| self.y_ids[j].to_string();
        let d_name = |j: usize| format!("d({j})");
        let dd_name = |j: usize| format!("dd({j})");

        let blocks: [(&str, &SparseMat, &Vec<RowLabel>, &dyn Fn(usize) -> String); 9] = [
            ("A1", &self.a1, &self.rows1, &x_name),
            ("A2", &self.a2, &self.rows2, &x_name),
            ("H2", &self.h2, &self.rows2, &d_name),
            ("A3", &self.a3, &self.rows3, &x_name),
            ("H3", &self.h3, &self.rows3, &d_name),
            ("A4", &self.a4, &self.rows4, &y_name),
            ("H4", &self.h4, &self.rows4, &dd_name),
            ("A5", &self.a5, &self.rows5, &y_name),
            ("A6", &self.a6, &self.rows6, &y_name),
        ];
        for (name, mat, labels, col_name) in blocks {
            for i in 0..mat.nrows() {
                for &(j, v) in mat.row(i) {
                    writeln!(w, "{name} {} {} {v}", labels[i], col_name(j))?;
                }
            }
        }
        for i in 0..self.a7.nrows() {
            for &(j, v) in self.a7.row(i) {
                writeln!(w, "A7 {} {} {v}", self.rows7[i], x_name(j))?;
            }
            for &(j, v) in self.a8.row(i) {
                writeln!(w, "A8 {} {} {v}", self.rows7[i], y_name(j))?;
            }
        }
        for (name, vals, labels) in [
            ("b1", &self.b1, &self.rows1),
            ("b3", &self.b3, &self.rows3),
            ("b5", &self.b5, &self.rows5),
            ("b6", &self.b6, &self.rows6),
            ("b7", &self.b7, &self.rows7),
        ] {
            for (i, v) in vals.iter().enumerate() {
                writeln!(w, "{name} {} rhs {v}", labels[i])?;
            }
        }
        Ok(())
    }
}

/// Assembles the full block system from a validated case.
pub fn assemble(case: &SystemCase) -> Result<CompactForm, CompactError> {
    let report = model::validate_case(case);
    if !report.is_empty() {
        return Err(CompactError::InvalidCase(report[0].to_string()));
    }

    let nb = case.n_buses();
    let ng = case.n_gens();
    let nl = case.n_lines();
    let nt = case.n_sub_intervals();
    let nx = 5 * ng;
    let ny = 4 * nt * ng + nt;

    let bus_of_gen: Vec<usize> = case
        .generators
        .iter()
        .map(|g| case.bus_index(&g.bus_id).expect("validated"))
        .collect();

    let mut cf = CompactForm {
        n_buses: nb,
        n_gens: ng,
        n_lines: nl,
        n_t: nt,
        bus_of_gen,
        a1: SparseMat::new(nx),
        b1: Vec::new(),
        a2: SparseMat::new(nx),
        h2: SparseMat::new(nb),
        a3: SparseMat::new(nx),
        h3: SparseMat::new(nb),
        b3: Vec::new(),
        a4: SparseMat::new(ny),
        h4: SparseMat::new(nt),
        a5: SparseMat::new(ny),
        b5: Vec::new(),
        a6: SparseMat::new(ny),
        b6: Vec::new(),
        a7: SparseMat::new(nx),
        a8: SparseMat::new(ny),
        b7: Vec::new(),
        a: model::objective_coefficients(&case.uncertainty),
        x_ids: Vec::new(),
        y_ids: Vec::new(),
        rows1: Vec::new(),
        rows2: Vec::new(),
        rows3: Vec::new(),
        rows4: Vec::new(),
        rows5: Vec::new(),
        rows6: Vec::new(),
        rows7: Vec::new(),
    };

    for g in 0..ng {
        cf.x_ids.push(XVar::P(g));
    }
    for g in 0..ng {
        cf.x_ids.push(XVar::RegUp(g));
    }
    for g in 0..ng {
        cf.x_ids.push(XVar::RegDn(g));
    }
    for g in 0..ng {
        cf.x_ids.push(XVar::Sr(g));
    }
    for g in 0..ng {
        cf.x_ids.push(XVar::CostAux(g));
    }
    for t in 1..=nt {
        for g in 0..ng {
            cf.y_ids.push(YVar::PrimeMover { gen: g, t });
        }
    }
    for t in 1..=nt {
        for g in 0..ng {
            cf.y_ids.push(YVar::Governor { gen: g, t });
        }
    }
    for t in 1..=nt {
        cf.y_ids.push(YVar::Freq { t });
    }
    for t in 1..=nt {
        for g in 0..ng {
            cf.y_ids.push(YVar::SlackUp { gen: g, t });
        }
    }
    for t in 1..=nt {
        for g in 0..ng {
            cf.y_ids.push(YVar::SlackDn { gen: g, t });
        }
    }

    // Block 1: dispatch-only inequalities.
    for (g, gen) in case.generators.iter().enumerate() {
        cf.a1.push_row(vec![
            (cf.x_p(g), 1.0),
            (cf.x_reg_up(g), 1.0),
            (cf.x_sr(g), 1.0),
        ]);
        cf.b1.push(gen.p_max);
        cf.rows1.push(RowLabel::GenUpper(g));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        cf.a1.push_row(vec![(cf.x_p(g), -1.0), (cf.x_reg_dn(g), 1.0)]);
        cf.b1.push(-gen.p_min);
        cf.rows1.push(RowLabel::GenLower(g));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        cf.a1.push_row(vec![(cf.x_reg_up(g), 1.0)]);
        cf.b1.push(gen.reg_up_cap);
        cf.rows1.push(RowLabel::RegUpCap(g));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        cf.a1.push_row(vec![(cf.x_reg_dn(g), 1.0)]);
        cf.b1.push(gen.reg_dn_cap);
        cf.rows1.push(RowLabel::RegDnCap(g));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        cf.a1.push_row(vec![(cf.x_sr(g), 1.0)]);
        cf.b1.push(gen.sr_cap);
        cf.rows1.push(RowLabel::SrCap(g));
    }
    // System requirements are >= rows, stored negated to keep the block <=.
    let rr = &case.reserve_requirements;
    cf.a1
        .push_row((0..ng).map(|g| (cf.x_sr(g), -1.0)).collect());
    cf.b1.push(-rr.sr_min);
    cf.rows1.push(RowLabel::SrReq);
    cf.a1
        .push_row((0..ng).map(|g| (cf.x_reg_up(g), -1.0)).collect());
    cf.b1.push(-rr.reg_min_up);
    cf.rows1.push(RowLabel::RegUpReq);
    cf.a1
        .push_row((0..ng).map(|g| (cf.x_reg_dn(g), -1.0)).collect());
    cf.b1.push(-rr.reg_min_dn);
    cf.rows1.push(RowLabel::RegDnReq);
    for (g, gen) in case.generators.iter().enumerate() {
        for (s, (slope, intercept)) in gen.cost_pieces().into_iter().enumerate() {
            cf.a1
                .push_row(vec![(cf.x_p(g), slope), (cf.x_cost(g), -1.0)]);
            cf.b1.push(-intercept);
            cf.rows1.push(RowLabel::CostEpigraph { gen: g, seg: s });
        }
    }

    // Block 2: one system-wide balance equality.
    cf.a2.push_row((0..ng).map(|g| (cf.x_p(g), 1.0)).collect());
    cf.h2.push_row((0..nb).map(|b| (b, 1.0)).collect());
    cf.rows2.push(RowLabel::Balance);

    // Block 3: line limits in both directions.
    for (l, line) in case.lines.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let gen_terms: Vec<(usize, f64)> = (0..ng)
                .map(|g| (g, sign * line.shift_factors[cf.bus_of_gen[g]]))
                .collect();
            let bus_terms: Vec<(usize, f64)> = (0..nb)
                .map(|b| (b, sign * line.shift_factors[b]))
                .collect();
            cf.a3.push_row(gen_terms);
            cf.h3.push_row(bus_terms);
            cf.b3.push(line.capacity);
            cf.rows3.push(if sign > 0.0 {
                RowLabel::LineUpper(l)
            } else {
                RowLabel::LineLower(l)
            });
        }
    }

    // Block 4: state transitions; states at time 0 are zero and eliminated.
    let agc = &case.agc;
    for t in 1..=nt {
        for n in 0..ng {
            let mut row = vec![(cf.y_pm(n, t), 1.0)];
            if t > 1 {
                for i in 0..ng {
                    row.push((cf.y_pm(i, t - 1), -agc.alpha[n][i]));
                    row.push((cf.y_gv(i, t - 1), -agc.beta[n][i]));
                }
                row.push((cf.y_w(t - 1), -agc.gamma[n]));
            }
            cf.a4.push_row(row);
            cf.h4.push_row(vec![(t - 1, agc.zeta[n])]);
            cf.rows4.push(RowLabel::PrimeMoverDyn { gen: n, t });
        }
        let mut row = vec![(cf.y_w(t), 1.0)];
        if t > 1 {
            for i in 0..ng {
                row.push((cf.y_pm(i, t - 1), -agc.kappa[i]));
                row.push((cf.y_gv(i, t - 1), -agc.tau_coef[i]));
            }
            row.push((cf.y_w(t - 1), -agc.rho));
        }
        cf.a4.push_row(row);
        cf.h4.push_row(vec![(t - 1, agc.eta)]);
        cf.rows4.push(RowLabel::FreqDyn { t });
    }

    // Block 5: governor law with signed slack.
    for t in 1..=nt {
        for n in 0..ng {
            let mut row = vec![
                (cf.y_gv(n, t), 1.0),
                (cf.y_w(t), -agc.k_gain[n]),
                (cf.y_slack_up(n, t), 1.0),
                (cf.y_slack_dn(n, t), -1.0),
            ];
            if t > 1 {
                row.push((cf.y_gv(n, t - 1), -1.0));
            }
            cf.a5.push_row(row);
            cf.b5.push(0.0);
            cf.rows5.push(RowLabel::GovernorLaw { gen: n, t });
        }
    }

    // Block 6: ramping, frequency bounds, slack sign rows.
    for t in 1..=nt {
        for (n, gen) in case.generators.iter().enumerate() {
            let mut row = vec![(cf.y_pm(n, t), 1.0)];
            if t > 1 {
                row.push((cf.y_pm(n, t - 1), -1.0));
            }
            cf.a6.push_row(row);
            cf.b6.push(gen.rur);
            cf.rows6.push(RowLabel::RampUp { gen: n, t });
        }
    }
    for t in 1..=nt {
        for (n, gen) in case.generators.iter().enumerate() {
            let mut row = vec![(cf.y_pm(n, t), -1.0)];
            if t > 1 {
                row.push((cf.y_pm(n, t - 1), 1.0));
            }
            cf.a6.push_row(row);
            cf.b6.push(gen.rdr);
            cf.rows6.push(RowLabel::RampDn { gen: n, t });
        }
    }
    for t in 1..=nt {
        let (_, hi) = agc.freq_bounds(t - 1);
        cf.a6.push_row(vec![(cf.y_w(t), 1.0)]);
        cf.b6.push(hi);
        cf.rows6.push(RowLabel::FreqUpper { t });
    }
    for t in 1..=nt {
        let (lo, _) = agc.freq_bounds(t - 1);
        cf.a6.push_row(vec![(cf.y_w(t), -1.0)]);
        cf.b6.push(-lo);
        cf.rows6.push(RowLabel::FreqLower { t });
    }
    for t in 1..=nt {
        for n in 0..ng {
            cf.a6.push_row(vec![(cf.y_slack_up(n, t), -1.0)]);
            cf.b6.push(0.0);
            cf.rows6.push(RowLabel::SlackUpSign { gen: n, t });
        }
    }
    for t in 1..=nt {
        for n in 0..ng {
            cf.a6.push_row(vec![(cf.y_slack_dn(n, t), -1.0)]);
            cf.b6.push(0.0);
            cf.rows6.push(RowLabel::SlackDnSign { gen: n, t });
        }
    }

    // Block 7: budget and regulation coupling.
    cf.a7
        .push_row((0..ng).map(|g| (cf.x_cost(g), 1.0)).collect());
    let mut budget_y = Vec::with_capacity(2 * nt * ng);
    for t in 1..=nt {
        for (n, gen) in case.generators.iter().enumerate() {
            budget_y.push((cf.y_slack_up(n, t), gen.cp));
            budget_y.push((cf.y_slack_dn(n, t), gen.cp));
        }
    }
    cf.a8.push_row(budget_y);
    cf.b7.push(case.budget);
    cf.rows7.push(RowLabel::Budget);
    for t in 1..=nt {
        for n in 0..ng {
            cf.a7.push_row(vec![(cf.x_reg_up(n), -1.0)]);
            cf.a8.push_row(vec![(cf.y_gv(n, t), 1.0)]);
            cf.b7.push(0.0);
            cf.rows7.push(RowLabel::RegCoupUpper { gen: n, t });
        }
    }
    for t in 1..=nt {
        for n in 0..ng {
            cf.a7.push_row(vec![(cf.x_reg_dn(n), -1.0)]);
            cf.a8.push_row(vec![(cf.y_gv(n, t), -1.0)]);
            cf.b7.push(0.0);
            cf.rows7.push(RowLabel::RegCoupLower { gen: n, t });
        }
    }

    // Assembly guard: every row mapped, every column labeled.
    let checks = [
        (cf.a1.nrows(), cf.rows1.len(), cf.b1.len()),
        (cf.a2.nrows(), cf.rows2.len(), cf.rows2.len()),
        (cf.a3.nrows(), cf.rows3.len(), cf.b3.len()),
        (cf.a4.nrows(), cf.rows4.len(), cf.rows4.len()),
        (cf.a5.nrows(), cf.rows5.len(), cf.b5.len()),
        (cf.a6.nrows(), cf.rows6.len(), cf.b6.len()),
        (cf.a7.nrows(), cf.rows7.len(), cf.b7.len()),
    ];
    for (rows, labels, rhs) in checks {
        if rows != labels || rows != rhs {
            return Err(CompactError::Dimension(format!(
                "block has {rows} rows, {labels} labels, {rhs} rhs entries"
            )));
        }
    }
    if cf.x_ids.len() != nx || cf.y_ids.len() != ny {
        return Err(CompactError::Dimension("variable labeling incomplete".into()));
    }
    if cf.a8.nrows() != cf.a7.nrows() || cf.h2.nrows() != cf.a2.nrows()
        || cf.h3.nrows() != cf.a3.nrows() || cf.h4.nrows() != cf.a4.nrows()
    {
        return Err(CompactError::Dimension("paired blocks disagree on row count".into()));
    }

    Ok(cf)
}

/// Worst violation per block at a candidate point and realization; all zeros
/// iff the point is feasible for that realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockViolations {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub a7: f64,
}

impl BlockViolations {
    pub fn max(&self) -> f64 {
        [self.a1, self.a2, self.a3, self.a4, self.a5, self.a6, self.a7]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn evaluate_feasibility(
    cf: &CompactForm,
    x: &[f64],
    y: &[f64],
    d: &[f64],
    dd: &[f64],
) -> Result<BlockViolations, CompactError> {
    if x.len() != cf.nx() || y.len() != cf.ny() || d.len() != cf.n_buses || dd.len() != cf.n_t {
        return Err(CompactError::Dimension(format!(
            "got x:{} y:{} d:{} dd:{}, expected x:{} y:{} d:{} dd:{}",
            x.len(),
            y.len(),
            d.len(),
            dd.len(),
            cf.nx(),
            cf.ny(),
            cf.n_buses,
            cf.n_t
        )));
    }
    let le_violation = |lhs: &[f64], rhs: &[f64]| -> f64 {
        lhs.iter()
            .zip(rhs)
            .map(|(l, r)| (l - r).max(0.0))
            .fold(0.0, f64::max)
    };
    let eq_violation = |lhs: &[f64], rhs: &[f64]| -> f64 {
        lhs.iter()
            .zip(rhs)
            .map(|(l, r)| (l - r).abs())
            .fold(0.0, f64::max)
    };

    let a1x = cf.a1.apply(x);
    let a2x = cf.a2.apply(x);
    let h2d = cf.h2.apply(d);
    let a3x = cf.a3.apply(x);
    let mut h3d = cf.h3.apply(d);
    for (v, b) in h3d.iter_mut().zip(&cf.b3) {
        *v += b;
    }
    let a4y = cf.a4.apply(y);
    let h4dd = cf.h4.apply(dd);
    let a5y = cf.a5.apply(y);
    let a6y = cf.a6.apply(y);
    let mut a78 = cf.a7.apply(x);
    for (v, w) in a78.iter_mut().zip(cf.a8.apply(y)) {
        *v += w;
    }

    Ok(BlockViolations {
        a1: le_violation(&a1x, &cf.b1),
        a2: eq_violation(&a2x, &h2d),
        a3: le_violation(&a3x, &h3d),
        a4: eq_violation(&a4y, &h4dd),
        a5: eq_violation(&a5y, &cf.b5),
        a6: le_violation(&a6y, &cf.b6),
        a7: le_violation(&a78, &cf.b7),
    })
}

/// Builds the slack-penalized feasibility LP at a fixed realization:
/// minimize the total slack needed to satisfy every block. Zero optimum
/// means the realization is servable.
pub fn fea_primal(cf: &CompactForm, d: &[f64], dd: &[f64]) -> Result<LinearProgram, CompactError> {
    if d.len() != cf.n_buses || dd.len() != cf.n_t {
        return Err(CompactError::Dimension(format!(
            "realization is d:{} dd:{}, expected d:{} dd:{}",
            d.len(),
            dd.len(),
            cf.n_buses,
            cf.n_t
        )));
    }
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x0 = 0;
    for j in 0..cf.nx() {
        lp.add_col(format!("x_{}", cf.x_ids[j]), 0.0, f64::INFINITY, 0.0);
    }
    let y0 = cf.nx();
    for j in 0..cf.ny() {
        lp.add_col(
            format!("y_{}", cf.y_ids[j]),
            f64::NEG_INFINITY,
            f64::INFINITY,
            0.0,
        );
    }
    let slack = |lp: &mut LinearProgram, name: String| lp.add_col(name, 0.0, f64::INFINITY, 1.0);

    let h2d = cf.h2.apply(d);
    let h4dd = cf.h4.apply(dd);

    for i in 0..cf.a1.nrows() {
        let s = slack(&mut lp, format!("s1({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a1.row(i).iter().map(|&(j, v)| (x0 + j, v)).collect();
        row.push((s, -1.0));
        lp.add_row(format!("fea1_{}", cf.rows1[i]), RowSense::Le, cf.b1[i], row);
    }
    for i in 0..cf.a2.nrows() {
        let sp = slack(&mut lp, format!("s2p({i})"));
        let sm = slack(&mut lp, format!("s2m({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a2.row(i).iter().map(|&(j, v)| (x0 + j, v)).collect();
        row.push((sp, 1.0));
        row.push((sm, -1.0));
        lp.add_row(format!("fea2_{}", cf.rows2[i]), RowSense::Eq, h2d[i], row);
    }
    for i in 0..cf.a3.nrows() {
        let s = slack(&mut lp, format!("s3({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a3.row(i).iter().map(|&(j, v)| (x0 + j, v)).collect();
        row.push((s, -1.0));
        let rhs = cf.h3.row(i).iter().map(|&(b, v)| v * d[b]).sum::<f64>() + cf.b3[i];
        lp.add_row(format!("fea3_{}", cf.rows3[i]), RowSense::Le, rhs, row);
    }
    for i in 0..cf.a4.nrows() {
        let sp = slack(&mut lp, format!("s4p({i})"));
        let sm = slack(&mut lp, format!("s4m({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a4.row(i).iter().map(|&(j, v)| (y0 + j, v)).collect();
        row.push((sp, 1.0));
        row.push((sm, -1.0));
        lp.add_row(format!("fea4_{}", cf.rows4[i]), RowSense::Eq, h4dd[i], row);
    }
    for i in 0..cf.a5.nrows() {
        let sp = slack(&mut lp, format!("s5p({i})"));
        let sm = slack(&mut lp, format!("s5m({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a5.row(i).iter().map(|&(j, v)| (y0 + j, v)).collect();
        row.push((sp, 1.0));
        row.push((sm, -1.0));
        lp.add_row(format!("fea5_{}", cf.rows5[i]), RowSense::Eq, cf.b5[i], row);
    }
    for i in 0..cf.a6.nrows() {
        let s = slack(&mut lp, format!("s6({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a6.row(i).iter().map(|&(j, v)| (y0 + j, v)).collect();
        row.push((s, -1.0));
        lp.add_row(format!("fea6_{}", cf.rows6[i]), RowSense::Le, cf.b6[i], row);
    }
    for i in 0..cf.a7.nrows() {
        let s = slack(&mut lp, format!("s7({i})"));
        let mut row: Vec<(usize, f64)> =
            cf.a7.row(i).iter().map(|&(j, v)| (x0 + j, v)).collect();
        for &(j, v) in cf.a8.row(i) {
            row.push((y0 + j, v));
        }
        row.push((s, -1.0));
        lp.add_row(format!("fea7_{}", cf.rows7[i]), RowSense::Le, cf.b7[i], row);
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        AgcDynamics, Bus, CostSegment, Generator, Line, ReserveRequirements, SystemCase,
        UncertaintyModel,
    };

    fn tiny_case() -> SystemCase {
        let buses = vec![Bus { id: "b1".into(), d_bar: 50.0, d_hat: 5.0 }];
        let generators = vec![Generator {
            id: "g1".into(),
            bus_id: "b1".into(),
            p_min: 0.0,
            p_max: 100.0,
            reg_up_cap: 10.0,
            reg_dn_cap: 10.0,
            sr_cap: 10.0,
            rur: 5.0,
            rdr: 5.0,
            cost_segments: vec![CostSegment { breakpoint: 0.0, slope: 10.0 }],
            cp: 5.0,
            k_gain: 1.0,
        }];
        let agc = AgcDynamics {
            n_sub_intervals: 1,
            dt: 4.0,
            alpha: vec![vec![0.5]],
            beta: vec![vec![0.3]],
            gamma: vec![0.1],
            zeta: vec![0.05],
            kappa: vec![-0.1],
            tau_coef: vec![-0.05],
            rho: 0.7,
            eta: 0.2,
            k_gain: vec![1.0],
            freq_min: -0.5,
            freq_max: 0.5,
            freq_min_t: None,
            freq_max_t: None,
        };
        let uncertainty = UncertaintyModel::from_buses(&buses, vec![0.0], vec![1.0]);
        SystemCase {
            buses,
            generators,
            lines: vec![],
            reserve_requirements: ReserveRequirements { sr_min: 0.0, reg_min_up: 0.0, reg_min_dn: 0.0 },
            agc,
            uncertainty,
            budget: 1000.0,
        }
    }

    fn three_bus_two_line_case() -> SystemCase {
        let buses = vec![
            Bus { id: "b1".into(), d_bar: 40.0, d_hat: 4.0 },
            Bus { id: "b2".into(), d_bar: 30.0, d_hat: 3.0 },
            Bus { id: "b3".into(), d_bar: 30.0, d_hat: 3.0 },
        ];
        let mut case = tiny_case();
        case.generators[0].p_max = 200.0;
        case.lines = vec![
            Line { id: "l1".into(), capacity: 50.0, shift_factors: vec![0.4, -0.3, 0.1] },
            Line { id: "l2".into(), capacity: 60.0, shift_factors: vec![0.2, 0.5, -0.4] },
        ];
        case.uncertainty = UncertaintyModel::from_buses(&buses, vec![0.0], vec![1.0]);
        case.buses = buses;
        case
    }

    #[test]
    fn single_bus_balance_row() {
        let cf = assemble(&tiny_case()).unwrap();
        assert_eq!(cf.a2.nrows(), 1);
        // x = (p, reg_up, reg_dn, sr, cost): only p carries a coefficient.
        assert_eq!(cf.a2.row(0), &[(0, 1.0)]);
        assert_eq!(cf.h2.row(0), &[(0, 1.0)]);
    }

    #[test]
    fn two_lines_four_rows() {
        let cf = assemble(&three_bus_two_line_case()).unwrap();
        assert_eq!(cf.a3.nrows(), 4);
        assert_eq!(cf.rows3[0], RowLabel::LineUpper(0));
        assert_eq!(cf.rows3[1], RowLabel::LineLower(0));
        assert_eq!(cf.b3, vec![50.0, 50.0, 60.0, 60.0]);
    }

    #[test]
    fn row_count_formulas() {
        for case in [tiny_case(), three_bus_two_line_case()] {
            let cf = assemble(&case).unwrap();
            let (g, l, t) = (cf.n_gens, cf.n_lines, cf.n_t);
            let segs: usize = case.generators.iter().map(|x| x.cost_segments.len()).sum();
            assert_eq!(cf.a1.nrows(), 5 * g + 3 + segs);
            assert_eq!(cf.a2.nrows(), 1);
            assert_eq!(cf.a3.nrows(), 2 * l);
            assert_eq!(cf.a4.nrows(), t * (g + 1));
            assert_eq!(cf.a5.nrows(), t * g);
            assert_eq!(cf.a6.nrows(), 4 * t * g + 2 * t);
            assert_eq!(cf.a7.nrows(), 2 * t * g + 1);
        }
    }

    #[test]
    fn hand_built_dispatch_satisfies_block_one() {
        // Two generators; direct substitution into the cap and requirement
        // rows by hand gives a feasible point.
        let mut case = tiny_case();
        case.generators.push(Generator {
            id: "g2".into(),
            bus_id: "b1".into(),
            p_min: 5.0,
            p_max: 80.0,
            reg_up_cap: 8.0,
            reg_dn_cap: 8.0,
            sr_cap: 12.0,
            rur: 5.0,
            rdr: 5.0,
            cost_segments: vec![CostSegment { breakpoint: 0.0, slope: 20.0 }],
            cp: 5.0,
            k_gain: 1.0,
        });
        case.agc.alpha = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        case.agc.beta = vec![vec![0.3, 0.0], vec![0.0, 0.3]];
        case.agc.gamma = vec![0.1, 0.1];
        case.agc.zeta = vec![0.05, 0.05];
        case.agc.kappa = vec![-0.1, -0.1];
        case.agc.tau_coef = vec![-0.05, -0.05];
        case.agc.k_gain = vec![1.0, 1.0];
        case.reserve_requirements = ReserveRequirements { sr_min: 5.0, reg_min_up: 4.0, reg_min_dn: 4.0 };
        let cf = assemble(&case).unwrap();

        // p=(40,20), reg_up=(5,2), reg_dn=(3,2), sr=(4,6), cost=(400,400):
        // 40+5+4=49<=100, 20+2+6=28<=80, 40-3=37>=0, 20-2=18>=5, caps hold,
        // sums 10>=5, 7>=4, 5>=4, epigraph 10*40=400, 20*20=400.
        let x = vec![40.0, 20.0, 5.0, 2.0, 3.0, 2.0, 4.0, 6.0, 400.0, 400.0];
        let a1x = cf.a1.apply(&x);
        for (i, (lhs, rhs)) in a1x.iter().zip(&cf.b1).enumerate() {
            assert!(lhs <= rhs, "row {} ({}) violated: {} > {}", i, cf.rows1[i], lhs, rhs);
        }
    }

    #[test]
    fn simulated_trajectory_satisfies_dynamics_rows() {
        let case = three_bus_two_line_case();
        let mut case = case;
        case.agc.n_sub_intervals = 4;
        case.uncertainty.delta_d_bar = vec![0.0; 4];
        case.uncertainty.delta_d_hat = vec![1.0; 4];
        let cf = assemble(&case).unwrap();
        let dd = vec![0.7, -0.4, 1.2, 0.1];
        let (pm, gv, w) = crate::agc::simulate_response(&case.agc, &dd);

        let mut y = vec![0.0; cf.ny()];
        for t in 1..=4usize {
            for n in 0..cf.n_gens {
                y[cf.y_pm(n, t)] = pm[t - 1][n];
                y[cf.y_gv(n, t)] = gv[t - 1][n];
            }
            y[cf.y_w(t)] = w[t - 1];
        }
        let x = vec![0.0; cf.nx()];
        let d = case.uncertainty.d_bar.clone();
        let v = evaluate_feasibility(&cf, &x, &y, &d, &dd).unwrap();
        assert!(v.a4 <= 1e-9, "dynamics residual {}", v.a4);
        assert!(v.a5 <= 1e-9, "governor residual {}", v.a5);
    }

    #[test]
    fn assemble_is_deterministic() {
        let case = three_bus_two_line_case();
        let mut dump_a = Vec::new();
        let mut dump_b = Vec::new();
        assemble(&case).unwrap().dump_blocks(&mut dump_a).unwrap();
        assemble(&case).unwrap().dump_blocks(&mut dump_b).unwrap();
        assert_eq!(dump_a, dump_b);
        assert!(!dump_a.is_empty());
    }

    #[test]
    fn rejects_invalid_case() {
        let mut case = tiny_case();
        case.generators[0].p_min = 500.0;
        assert!(matches!(assemble(&case), Err(CompactError::InvalidCase(_))));
    }

    #[test]
    fn feasibility_evaluation_examples() {
        let case = tiny_case();
        let cf = assemble(&case).unwrap();
        let d = vec![50.0];
        let dd = vec![0.0];
        // Feasible point: p serves the load exactly, zero AGC activity,
        // cost variable at its epigraph value.
        let x = vec![50.0, 0.0, 0.0, 0.0, 500.0];
        let y = vec![0.0; cf.ny()];
        let v = evaluate_feasibility(&cf, &x, &y, &d, &dd).unwrap();
        assert_eq!(v.max(), 0.0);

        // Exceed p_max by one MW.
        let x_over = vec![101.0, 0.0, 0.0, 0.0, 1010.0];
        let v = evaluate_feasibility(&cf, &x_over, &y, &vec![101.0], &dd).unwrap();
        assert!((v.a1 - 1.0).abs() < 1e-12);

        // Perturb the load with x fixed: the balance row picks up epsilon.
        let eps = 0.25;
        let v = evaluate_feasibility(&cf, &x, &y, &vec![50.0 + eps], &dd).unwrap();
        assert!((v.a2 - eps).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cf = assemble(&tiny_case()).unwrap();
        let bad = evaluate_feasibility(&cf, &[0.0], &[0.0], &[0.0], &[0.0]);
        assert!(matches!(bad, Err(CompactError::Dimension(_))));
    }
}
