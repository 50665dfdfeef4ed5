//! End-to-end decomposition behavior on desk cases: convergence, oracle
//! acceptance of the returned scales, cut bookkeeping, and the documented
//! error paths.

mod common;

use flexgauge::benders::{self, BendersError, BendersOptions};
use flexgauge::compact::assemble;
use flexgauge::model::{compute_indices, ScaleVector};
use flexgauge::oracle;
use flexgauge::solver::SolverConfig;

#[test]
fn unconstrained_case_takes_the_whole_box() {
    // Huge budget and limits, one bus, one cycle: nothing binds, so the
    // first master solution is already feasible.
    let mut case = common::build_case(common::CaseSpec {
        loads: vec![(50.0, 5.0)],
        gens: vec![common::GenSpec {
            bus: 0,
            p_min: 0.0,
            p_max: 500.0,
            reg_up: 50.0,
            reg_dn: 50.0,
            sr: 50.0,
            ramp: 100.0,
            slope: 10.0,
            cp: 1.0,
        }],
        lines: vec![],
        n_t: 1,
        disturbance: 1.0,
        budget: 1e6,
        freq_band: 10.0,
        sr_min: 0.0,
        reg_min: 0.0,
    });
    case.uncertainty.delta_d_hat = vec![1.0];
    let report = benders::run_benders(&case, &BendersOptions::default()).unwrap();
    assert_eq!(report.iterations, 1);
    assert!(report.cuts.is_empty());
    common::assert_close(report.indices.tf, 2.0 * 5.0 + 2.0 * 1.0, 1e-9, "box total");
    assert_eq!(report.lambda_star, ScaleVector::ones(1, 1));
}

#[test]
fn budget_below_nominal_cost_is_base_infeasible() {
    let mut case = common::desk_budget_line();
    case.budget = 100.0; // nominal dispatch alone costs thousands
    match benders::run_benders(&case, &BendersOptions::default()) {
        Err(BendersError::BaseInfeasible { eta }) => assert!(eta > 0.0),
        other => panic!("expected BaseInfeasible, got {other:?}"),
    }
}

#[test]
fn converged_scales_are_oracle_accepted() {
    let opts = BendersOptions::default();
    let cfg = SolverConfig::default();
    for (name, case) in [
        ("budget_line", common::desk_budget_line()),
        ("meshed", common::desk_meshed()),
    ] {
        let cf = assemble(&case).unwrap();
        let report = benders::run_benders(&case, &opts).unwrap();
        let (eta, _) =
            oracle::worst_case_eta(&cf, &case.uncertainty, &report.lambda_star, &cfg).unwrap();
        assert!(
            eta <= oracle::FEAS_TOL,
            "{name}: oracle rejects the converged scales (eta {eta})"
        );

        // Index fields must agree with a recomputation at the same scales.
        let recomputed = compute_indices(&report.lambda_star, &case.uncertainty).unwrap();
        common::assert_close(report.indices.tf, recomputed.tf, 1e-12, name);

        // Master objective can only shrink as cuts accumulate.
        for pair in report.trace.windows(2) {
            assert!(
                pair[1].master_objective <= pair[0].master_objective + 1e-9,
                "{name}: master objective rose between iterations"
            );
        }

        // Every stored cut is violated by nothing the oracle accepts on the
        // uniform ray (weak check; the acceptance suite grids it).
        for cut in &report.cuts {
            assert!(cut.eta > opts.feas_tol);
        }
    }
}

#[test]
fn weak_duality_sandwich_on_vertices() {
    // Any single-vertex slack value is a lower bound on the worst case.
    let case = common::desk_budget_line();
    let cf = assemble(&case).unwrap();
    let cfg = SolverConfig::default();
    let lambda = ScaleVector::uniform(cf.n_buses, cf.n_t, 1.0);
    let problem = benders::build_rdfea(&cf, &case.uncertainty, &lambda).unwrap();
    let solution = benders::solve_rdfea(&problem, &cfg).unwrap();
    for mask in 0..(1usize << 4) {
        let up_b: Vec<bool> = (0..2).map(|b| mask >> b & 1 == 1).collect();
        let up_t: Vec<bool> = (0..2).map(|t| mask >> (2 + t) & 1 == 1).collect();
        let vertex = oracle::VertexAssignment {
            bus_directions: up_b
                .iter()
                .map(|&u| if u { oracle::Direction::Up } else { oracle::Direction::Down })
                .collect(),
            sub_interval_directions: up_t
                .iter()
                .map(|&u| if u { oracle::Direction::Up } else { oracle::Direction::Down })
                .collect(),
        };
        let (d, dd) = vertex.realization(&case.uncertainty, &lambda);
        let inner = oracle::min_slack_lp(&cf, &d, &dd, &cfg).unwrap();
        assert!(
            inner <= solution.eta + 1e-7,
            "vertex {mask}: inner {inner} exceeds subproblem optimum {}",
            solution.eta
        );
    }
}

#[test]
fn resource_scaling_cannot_reduce_flexibility() {
    let base = common::desk_budget_line();
    let mut relaxed = base.clone();
    relaxed.budget *= 4.0;
    for gen in &mut relaxed.generators {
        gen.rur *= 4.0;
        gen.rdr *= 4.0;
        gen.reg_up_cap *= 4.0;
        gen.reg_dn_cap *= 4.0;
        gen.sr_cap *= 4.0;
        gen.p_max *= 4.0;
    }
    for line in &mut relaxed.lines {
        line.capacity *= 4.0;
    }
    relaxed.agc.freq_min *= 4.0;
    relaxed.agc.freq_max *= 4.0;

    let opts = BendersOptions::default();
    let tf_base = benders::run_benders(&base, &opts).unwrap().indices.tf;
    let tf_relaxed = benders::run_benders(&relaxed, &opts).unwrap().indices.tf;
    assert!(
        tf_relaxed >= tf_base - 1e-6,
        "relaxing resources shrank flexibility: {tf_base} -> {tf_relaxed}"
    );
}

#[test]
fn master_solutions_respect_cut_algebra() {
    // Feed the master hand-made cuts and check the documented optima.
    let cfg = SolverConfig::default();
    // One bus (a = (10, 10)), no sub-intervals.
    let mut mp = benders::MasterProblem::new(vec![10.0, 10.0], 1, 0);
    let (lambda, obj) = benders::solve_master(&mp, &cfg).unwrap();
    assert_eq!(lambda, ScaleVector::ones(1, 0));
    common::assert_close(obj, 20.0, 1e-9, "no cuts");

    // lam_up <= 0.5
    mp.add_cut(benders::CutRecord {
        coef_up_b: vec![1.0],
        coef_dn_b: vec![0.0],
        coef_up_t: vec![],
        coef_dn_t: vec![],
        constant: -0.5,
        iteration: 1,
        eta: 1.0,
    });
    let (_, obj) = benders::solve_master(&mp, &cfg).unwrap();
    common::assert_close(obj, 15.0, 1e-9, "single cut");

    // lam_up + lam_dn <= 1 via two half-cuts.
    let mut mp = benders::MasterProblem::new(vec![10.0, 10.0], 1, 0);
    mp.add_cut(benders::CutRecord {
        coef_up_b: vec![1.0],
        coef_dn_b: vec![1.0],
        coef_up_t: vec![],
        coef_dn_t: vec![],
        constant: -1.0,
        iteration: 1,
        eta: 1.0,
    });
    let (_, obj) = benders::solve_master(&mp, &cfg).unwrap();
    common::assert_close(obj, 10.0, 1e-9, "coupling cut");
}

#[test]
fn iteration_limit_reported() {
    let case = common::desk_budget_line();
    let opts = BendersOptions {
        max_iterations: 1,
        ..BendersOptions::default()
    };
    match benders::run_benders(&case, &opts) {
        Err(BendersError::IterationLimit { iterations: 1 }) => {}
        Ok(r) if r.iterations <= 1 => {} // converged immediately; fine
        other => panic!("expected iteration limit, got {other:?}"),
    }
}

#[test]
fn multi_cut_converges_to_the_same_objective() {
    let case = common::desk_budget_line();
    let single = benders::run_benders(&case, &BendersOptions::default()).unwrap();
    let multi = benders::run_benders(
        &case,
        &BendersOptions {
            multi_cut: true,
            ..BendersOptions::default()
        },
    )
    .unwrap();
    common::assert_close(single.indices.tf, multi.indices.tf, 1e-5, "tf");
    assert!(multi.iterations <= single.iterations);
}
