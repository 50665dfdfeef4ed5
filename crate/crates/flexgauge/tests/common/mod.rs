//! Shared fixtures and independent reference constructions for the
//! integration suites: desk-scale cases sized for exhaustive verification,
//! plus test-side LP builders (explicit duals) kept deliberately separate
//! from the library's own subproblem assembly.

#![allow(dead_code)]

use flexgauge::agc::{zoh_discretize, ContinuousAgcModel};
use flexgauge::compact::CompactForm;
use flexgauge::model::{
    AgcDynamics, Bus, CostSegment, Generator, Line, ReserveRequirements, SystemCase,
    UncertaintyModel,
};
use flexgauge::solver::{LinearProgram, RowSense, Sense};

pub struct GenSpec {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub reg_up: f64,
    pub reg_dn: f64,
    pub sr: f64,
    pub ramp: f64,
    pub slope: f64,
    pub cp: f64,
}

pub struct CaseSpec {
    pub loads: Vec<(f64, f64)>,
    pub gens: Vec<GenSpec>,
    pub lines: Vec<(f64, Vec<f64>)>,
    pub n_t: usize,
    pub disturbance: f64,
    pub budget: f64,
    pub freq_band: f64,
    pub sr_min: f64,
    pub reg_min: f64,
}

/// Builds a case with textbook continuous AGC parameters discretized at
/// dt = 4 s.
pub fn build_case(spec: CaseSpec) -> SystemCase {
    let n_gens = spec.gens.len();
    let cont = ContinuousAgcModel {
        t_ch: (0..n_gens).map(|i| 1.0 + 0.2 * i as f64).collect(),
        t_g: (0..n_gens).map(|i| 0.25 + 0.05 * i as f64).collect(),
        droop: (0..n_gens).map(|i| 0.05 + 0.01 * i as f64).collect(),
        inertia: 8.0,
        damping: 0.8,
        dt: 4.0,
        n_sub_intervals: spec.n_t,
        freq_min: -spec.freq_band,
        freq_max: spec.freq_band,
    };
    let agc = zoh_discretize(&cont).expect("discretization");

    let buses: Vec<Bus> = spec
        .loads
        .iter()
        .enumerate()
        .map(|(i, &(d_bar, d_hat))| Bus {
            id: format!("b{}", i + 1),
            d_bar,
            d_hat,
        })
        .collect();
    let generators: Vec<Generator> = spec
        .gens
        .iter()
        .enumerate()
        .map(|(i, g)| Generator {
            id: format!("g{}", i + 1),
            bus_id: format!("b{}", g.bus + 1),
            p_min: g.p_min,
            p_max: g.p_max,
            reg_up_cap: g.reg_up,
            reg_dn_cap: g.reg_dn,
            sr_cap: g.sr,
            rur: g.ramp,
            rdr: g.ramp,
            cost_segments: vec![CostSegment {
                breakpoint: 0.0,
                slope: g.slope,
            }],
            cp: g.cp,
            k_gain: agc.k_gain[i],
        })
        .collect();
    let lines: Vec<Line> = spec
        .lines
        .iter()
        .enumerate()
        .map(|(i, (cap, sf))| Line {
            id: format!("l{}", i + 1),
            capacity: *cap,
            shift_factors: sf.clone(),
        })
        .collect();
    let uncertainty = UncertaintyModel::from_buses(
        &buses,
        vec![0.0; spec.n_t],
        vec![spec.disturbance; spec.n_t],
    );
    SystemCase {
        buses,
        generators,
        lines,
        reserve_requirements: ReserveRequirements {
            sr_min: spec.sr_min,
            reg_min_up: spec.reg_min,
            reg_min_dn: spec.reg_min,
        },
        agc,
        uncertainty,
        budget: spec.budget,
    }
}

/// 2 buses, 2 generators, 1 line, T = 2. Moderately tight budget and line:
/// upward deviations are contested.
pub fn desk_budget_line() -> SystemCase {
    build_case(CaseSpec {
        loads: vec![(100.0, 15.0), (80.0, 12.0)],
        gens: vec![
            GenSpec { bus: 0, p_min: 0.0, p_max: 220.0, reg_up: 20.0, reg_dn: 20.0, sr: 30.0, ramp: 8.0, slope: 20.0, cp: 20.0 },
            GenSpec { bus: 1, p_min: 0.0, p_max: 120.0, reg_up: 15.0, reg_dn: 15.0, sr: 20.0, ramp: 6.0, slope: 35.0, cp: 25.0 },
        ],
        lines: vec![(60.0, vec![0.5, -0.5])],
        n_t: 2,
        disturbance: 2.0,
        budget: 4400.0,
        freq_band: 0.08,
        sr_min: 10.0,
        reg_min: 5.0,
    })
}

/// 2 buses, 2 generators, 1 line, T = 5. Tight frequency band makes the
/// disturbance scales fight for governor slack money.
pub fn desk_freq_bound() -> SystemCase {
    build_case(CaseSpec {
        loads: vec![(90.0, 12.0), (70.0, 10.0)],
        gens: vec![
            GenSpec { bus: 0, p_min: 0.0, p_max: 240.0, reg_up: 18.0, reg_dn: 18.0, sr: 25.0, ramp: 7.0, slope: 18.0, cp: 15.0 },
            GenSpec { bus: 1, p_min: 0.0, p_max: 130.0, reg_up: 12.0, reg_dn: 12.0, sr: 18.0, ramp: 5.0, slope: 30.0, cp: 18.0 },
        ],
        lines: vec![(70.0, vec![0.45, -0.55])],
        n_t: 5,
        disturbance: 1.5,
        budget: 3600.0,
        freq_band: 0.05,
        sr_min: 8.0,
        reg_min: 4.0,
    })
}

/// 3 buses, 2 generators, 2 lines, T = 2. The mesh makes line limits bind
/// asymmetrically across buses.
pub fn desk_meshed() -> SystemCase {
    build_case(CaseSpec {
        loads: vec![(60.0, 9.0), (50.0, 8.0), (40.0, 6.0)],
        gens: vec![
            GenSpec { bus: 0, p_min: 0.0, p_max: 160.0, reg_up: 15.0, reg_dn: 15.0, sr: 20.0, ramp: 6.0, slope: 22.0, cp: 12.0 },
            GenSpec { bus: 2, p_min: 0.0, p_max: 110.0, reg_up: 10.0, reg_dn: 10.0, sr: 15.0, ramp: 5.0, slope: 38.0, cp: 16.0 },
        ],
        lines: vec![
            (45.0, vec![0.4, -0.3, 0.1]),
            (55.0, vec![0.2, 0.5, -0.4]),
        ],
        n_t: 2,
        disturbance: 1.8,
        budget: 4200.0,
        freq_band: 0.07,
        sr_min: 6.0,
        reg_min: 3.0,
    })
}

/// 2 buses, 3 generators, 1 line, T = 5. Ramp-starved: the third unit is
/// cheap but cannot move.
pub fn desk_ramp_tight() -> SystemCase {
    build_case(CaseSpec {
        loads: vec![(110.0, 14.0), (60.0, 9.0)],
        gens: vec![
            GenSpec { bus: 0, p_min: 0.0, p_max: 140.0, reg_up: 10.0, reg_dn: 10.0, sr: 15.0, ramp: 1.2, slope: 21.0, cp: 14.0 },
            GenSpec { bus: 1, p_min: 0.0, p_max: 90.0, reg_up: 8.0, reg_dn: 8.0, sr: 12.0, ramp: 1.0, slope: 33.0, cp: 20.0 },
            GenSpec { bus: 0, p_min: 0.0, p_max: 70.0, reg_up: 6.0, reg_dn: 6.0, sr: 10.0, ramp: 0.8, slope: 26.0, cp: 10.0 },
        ],
        lines: vec![(65.0, vec![0.5, -0.5])],
        n_t: 5,
        disturbance: 1.2,
        budget: 4800.0,
        freq_band: 0.06,
        sr_min: 8.0,
        reg_min: 4.0,
    })
}

/// 4 buses, 3 generators, 3 lines, T = 2. The largest desk case.
pub fn desk_four_bus() -> SystemCase {
    build_case(CaseSpec {
        loads: vec![(70.0, 10.0), (55.0, 8.0), (45.0, 7.0), (35.0, 5.0)],
        gens: vec![
            GenSpec { bus: 0, p_min: 0.0, p_max: 150.0, reg_up: 14.0, reg_dn: 14.0, sr: 18.0, ramp: 6.0, slope: 19.0, cp: 13.0 },
            GenSpec { bus: 2, p_min: 0.0, p_max: 100.0, reg_up: 10.0, reg_dn: 10.0, sr: 14.0, ramp: 5.0, slope: 31.0, cp: 17.0 },
            GenSpec { bus: 3, p_min: 0.0, p_max: 80.0, reg_up: 8.0, reg_dn: 8.0, sr: 10.0, ramp: 4.0, slope: 42.0, cp: 21.0 },
        ],
        lines: vec![
            (50.0, vec![0.42, -0.26, 0.12, -0.08]),
            (40.0, vec![0.18, 0.44, -0.38, 0.06]),
            (45.0, vec![-0.12, 0.08, 0.3, -0.42]),
        ],
        n_t: 2,
        disturbance: 1.6,
        budget: 5200.0,
        freq_band: 0.07,
        sr_min: 7.0,
        reg_min: 3.0,
    })
}

/// 2 buses, 2 generators, 1 line, T = 10. Generous limits: the full box is
/// absorbable, exercising the long horizon cheaply.
pub fn desk_long_horizon() -> SystemCase {
    build_case(CaseSpec {
        loads: vec![(80.0, 10.0), (60.0, 8.0)],
        gens: vec![
            GenSpec { bus: 0, p_min: 0.0, p_max: 260.0, reg_up: 30.0, reg_dn: 30.0, sr: 30.0, ramp: 12.0, slope: 17.0, cp: 8.0 },
            GenSpec { bus: 1, p_min: 0.0, p_max: 160.0, reg_up: 25.0, reg_dn: 25.0, sr: 25.0, ramp: 10.0, slope: 24.0, cp: 9.0 },
        ],
        lines: vec![(120.0, vec![0.5, -0.5])],
        n_t: 10,
        disturbance: 1.0,
        budget: 12000.0,
        freq_band: 0.6,
        sr_min: 5.0,
        reg_min: 3.0,
    })
}

/// All six desk cases with names, smallest first.
pub fn desk_cases() -> Vec<(&'static str, SystemCase)> {
    vec![
        ("budget_line_t2", desk_budget_line()),
        ("meshed_t2", desk_meshed()),
        ("four_bus_t2", desk_four_bus()),
        ("freq_bound_t5", desk_freq_bound()),
        ("ramp_tight_t5", desk_ramp_tight()),
        ("long_horizon_t10", desk_long_horizon()),
    ]
}

/// Explicit dual of the slack-minimizing feasibility LP at a fixed
/// realization, built directly from the blocks: maximize
/// `b1'm1 + (H2 d)'m2 + (H3 d + b3)'m3 + (H4 dd)'m4 + b5'm5 + b6'm6 + b7'm7`
/// subject to the transposed-block rows and the unit multiplier boxes. This
/// is an independent reference for strong-duality checks; it never touches
/// the library's subproblem builder.
pub fn explicit_fea_dual(cf: &CompactForm, d: &[f64], dd: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let h2d = cf.h2.apply(d);
    let h3d = cf.h3.apply(d);
    let h4dd = cf.h4.apply(dd);

    let m1 = lp.num_cols();
    for i in 0..cf.a1.nrows() {
        lp.add_col(format!("m1_{i}"), -1.0, 0.0, cf.b1[i]);
    }
    let m2 = lp.num_cols();
    for i in 0..cf.a2.nrows() {
        lp.add_col(format!("m2_{i}"), -1.0, 1.0, h2d[i]);
    }
    let m3 = lp.num_cols();
    for i in 0..cf.a3.nrows() {
        lp.add_col(format!("m3_{i}"), -1.0, 0.0, h3d[i] + cf.b3[i]);
    }
    let m4 = lp.num_cols();
    for i in 0..cf.a4.nrows() {
        lp.add_col(format!("m4_{i}"), -1.0, 1.0, h4dd[i]);
    }
    let m5 = lp.num_cols();
    for i in 0..cf.a5.nrows() {
        lp.add_col(format!("m5_{i}"), -1.0, 1.0, cf.b5[i]);
    }
    let m6 = lp.num_cols();
    for i in 0..cf.a6.nrows() {
        lp.add_col(format!("m6_{i}"), -1.0, 0.0, cf.b6[i]);
    }
    let m7 = lp.num_cols();
    for i in 0..cf.a7.nrows() {
        lp.add_col(format!("m7_{i}"), -1.0, 0.0, cf.b7[i]);
    }

    let a1c = cf.a1.transpose_entries();
    let a2c = cf.a2.transpose_entries();
    let a3c = cf.a3.transpose_entries();
    let a7c = cf.a7.transpose_entries();
    for j in 0..cf.nx() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(i, v) in &a1c[j] {
            row.push((m1 + i, v));
        }
        for &(i, v) in &a2c[j] {
            row.push((m2 + i, v));
        }
        for &(i, v) in &a3c[j] {
            row.push((m3 + i, v));
        }
        for &(i, v) in &a7c[j] {
            row.push((m7 + i, v));
        }
        lp.add_row(format!("dx{j}"), RowSense::Le, 0.0, row);
    }
    let a4c = cf.a4.transpose_entries();
    let a5c = cf.a5.transpose_entries();
    let a6c = cf.a6.transpose_entries();
    let a8c = cf.a8.transpose_entries();
    for j in 0..cf.ny() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(i, v) in &a4c[j] {
            row.push((m4 + i, v));
        }
        for &(i, v) in &a5c[j] {
            row.push((m5 + i, v));
        }
        for &(i, v) in &a6c[j] {
            row.push((m6 + i, v));
        }
        for &(i, v) in &a8c[j] {
            row.push((m7 + i, v));
        }
        lp.add_row(format!("dy{j}"), RowSense::Eq, 0.0, row);
    }
    lp
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{what}: {a} vs {b} differs by {} (tol {tol})",
        (a - b).abs()
    );
}
