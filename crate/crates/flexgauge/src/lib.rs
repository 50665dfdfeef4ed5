//! flexgauge measures how much load uncertainty a power system can absorb
//! when a five-minute economic dispatch is coupled with second-scale
//! automatic generation control.
//!
//! The assessment maximizes the width of per-bus load ranges and per-cycle
//! disturbance ranges subject to dispatch, reserve, network, budget, and AGC
//! dynamic constraints. The maximization is solved by a cutting-plane loop:
//! a small master LP proposes range scales, a dualized mixed-integer
//! subproblem searches for a load realization the system cannot serve, and
//! each failure is converted into a linear cut on the scales. Seven indices
//! summarize the result: total flexibility and its dispatch/AGC and
//! up/down decompositions.
//!
//! Modules:
//! - [`model`]: domain types, validation, and the flexibility indices.
//! - [`agc`]: zero-order-hold discretization of the governor/turbine/frequency
//!   dynamics into the coefficient matrices the constraints use.
//! - [`compact`]: block-matrix assembly of all constraints.
//! - [`solver`]: self-contained LP (revised simplex) and binary MIP solvers.
//! - [`benders`]: the master/subproblem loop and cut generation.
//! - [`oracle`]: brute-force vertex enumeration used to cross-check the
//!   decomposition on small cases.
//! - [`casefile`]: the TOML case-file schema and loader.
//! - [`sweep`]: budget/ramp/line scaling experiments.
//! - [`report`]: CSV and plot-series emission.

pub mod agc;
pub mod benders;
pub mod casefile;
pub mod compact;
pub mod model;
pub mod oracle;
pub mod report;
pub mod solver;
pub mod sweep;
