//! LP-based branch-and-bound over binary variables.
//!
//! Best-first node selection on the relaxation bound, branching on the
//! most-fractional binary (ties broken toward the lowest column index).
//! Execution is sequential, so results are reproducible run to run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{simplex, LinearProgram, Sense, SolveResult, SolveStats, SolverConfig, Status};

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
}

struct HeapEntry {
    key: f64,
    id: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Highest key first; FIFO among equal keys.
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub(super) fn solve(
    lp: &LinearProgram,
    cfg: &SolverConfig,
    seed: Option<(f64, Vec<f64>)>,
) -> Result<SolveResult, super::SolverError> {
    let maximize = lp.sense == Sense::Maximize;
    let binaries: Vec<usize> = (0..lp.num_cols()).filter(|&j| lp.is_binary(j)).collect();

    let root_lower: Vec<f64> = (0..lp.num_cols()).map(|j| lp.bounds(j).0).collect();
    let root_upper: Vec<f64> = (0..lp.num_cols()).map(|j| lp.bounds(j).1).collect();

    let mut stats = SolveStats::default();
    let mut nodes: Vec<Node> = Vec::new();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

    let root = simplex::solve(lp, cfg, Some((&root_lower, &root_upper)))?;
    stats.nodes = 1;
    stats.iterations = root.stats.iterations;
    match root.status {
        Status::Optimal => {}
        other => return Ok(SolveResult::non_optimal(other, stats)),
    }

    let mut incumbent: Option<SolveResult> = None;
    let mut incumbent_obj = if maximize {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    if let Some((obj, primal)) = seed {
        incumbent_obj = obj;
        incumbent = Some(SolveResult {
            status: Status::Optimal,
            objective: obj,
            primal,
            duals: Vec::new(),
            stats: SolveStats::default(),
        });
    }

    match fractional_binary(&root, &binaries, cfg) {
        None => {
            let mut done = root;
            done.stats = stats;
            done.duals = Vec::new();
            return Ok(done);
        }
        Some(col) => {
            let parent = Node {
                lower: root_lower,
                upper: root_upper,
                bound: root.objective,
            };
            enqueue_children(&parent, col, maximize, &mut nodes, &mut heap);
        }
    }

    while let Some(entry) = heap.pop() {
        if stats.nodes >= cfg.node_limit {
            return Ok(SolveResult::non_optimal(Status::NodeLimit, stats));
        }
        let node = &nodes[entry.id as usize];
        if !improves(node.bound, incumbent_obj, maximize, cfg.opt) {
            continue;
        }
        let relax = simplex::solve(lp, cfg, Some((&node.lower, &node.upper)))?;
        stats.nodes += 1;
        stats.iterations += relax.stats.iterations;
        match relax.status {
            Status::Infeasible => continue,
            Status::Optimal => {}
            other => return Ok(SolveResult::non_optimal(other, stats)),
        }
        if !improves(relax.objective, incumbent_obj, maximize, cfg.opt) {
            continue;
        }
        match fractional_binary(&relax, &binaries, cfg) {
            None => {
                incumbent_obj = relax.objective;
                incumbent = Some(relax);
            }
            Some(col) => {
                let parent = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: relax.objective,
                };
                enqueue_children(&parent, col, maximize, &mut nodes, &mut heap);
            }
        }
    }

    match incumbent {
        Some(mut best) => {
            best.stats = stats;
            best.duals = Vec::new();
            Ok(best)
        }
        None => Ok(SolveResult::non_optimal(Status::Infeasible, stats)),
    }
}

fn enqueue_children(
    parent: &Node,
    col: usize,
    maximize: bool,
    nodes: &mut Vec<Node>,
    heap: &mut BinaryHeap<HeapEntry>,
) {
    for fix_to_one in [false, true] {
        let mut child = Node {
            lower: parent.lower.clone(),
            upper: parent.upper.clone(),
            bound: parent.bound,
        };
        if fix_to_one {
            child.lower[col] = 1.0;
        } else {
            child.upper[col] = 0.0;
        }
        let id = nodes.len() as u64;
        let key = if maximize { child.bound } else { -child.bound };
        nodes.push(child);
        heap.push(HeapEntry { key, id });
    }
}

fn improves(candidate: f64, incumbent: f64, maximize: bool, gap: f64) -> bool {
    if maximize {
        candidate > incumbent + gap
    } else {
        candidate < incumbent - gap
    }
}

/// Most-fractional binary, ties to the lowest index; `None` when integral.
fn fractional_binary(
    relax: &SolveResult,
    binaries: &[usize],
    cfg: &SolverConfig,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in binaries {
        let v = relax.primal[j];
        let frac = (v - v.round()).abs();
        if frac <= cfg.integrality {
            continue;
        }
        let score = (v - 0.5).abs();
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some((j, score)),
        }
    }
    best.map(|(j, _)| j)
}
