//! Exhaustive grid reference for small instances.
//!
//! Scans a full Cartesian grid over every decision variable and evaluates
//! each point through the exact same [`crate::rate::evaluate`] path the
//! optimizer reports with, so the two never disagree about what a given
//! allocation achieves. Time shares live on a simplex lattice (all index
//! vectors summing to at most the resolution), reflection coefficients on
//! a linear grid, and uplink powers on zero plus a geometric ladder under
//! each device's cap. Refining a grid doubles its resolution while
//! keeping every old point, so the best found objective can only rise.
//!
//! The scan is exponential in the device count and exists to bound the
//! optimality gap of the heuristic search, not to replace it; it refuses
//! instances beyond three devices or a hundred million evaluations.

use crate::allocator::{
    strictly_better, uplink_power_caps, ProblemSpec, Solution, SolveStatus, SolverTrace,
};
use crate::error::Error;
use crate::exec::{map_indexed, ExecMode};
use crate::phy::build_channels;
use crate::rate::{evaluate, Allocation, RateReport};

/// Largest instance the exhaustive scan accepts.
pub const MAX_ORACLE_DEVICES: usize = 3;
/// Hard ceiling on grid points evaluated in one scan.
pub const MAX_EVALUATIONS: u128 = 100_000_000;
/// The uplink power ladder spans this many decades below each cap.
const Q_GRID_SPAN_DECADES: f64 = 4.0;

/// Grid resolution per variable family: points per time-share axis,
/// per reflection coefficient and per uplink power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_tau: usize,
    pub n_alpha: usize,
    pub n_q: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_tau < 2 || self.n_alpha < 2 || self.n_q < 2 {
            return Err(Error::InvalidConfig {
                field: "grid",
                message: format!(
                    "each axis needs at least two points, got tau {} alpha {} q {}",
                    self.n_tau, self.n_alpha, self.n_q
                ),
            });
        }
        Ok(())
    }

    /// Doubled resolution containing every point of `self`: n points
    /// become 2n - 1 by inserting a midpoint between each neighbor pair.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            n_tau: 2 * self.n_tau - 1,
            n_alpha: 2 * self.n_alpha - 1,
            n_q: 2 * self.n_q - 1,
        }
    }
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

/// Number of evaluate calls a scan would make: simplex lattice points for
/// 2K time shares times the per-device alpha and q grids. Saturates at
/// `u128::MAX` on overflow.
pub fn evaluation_count(devices: usize, grid: &GridSpec) -> u128 {
    let m = (grid.n_tau - 1) as u128;
    let dims = 2 * devices as u128;
    let tau_points = match binomial(m + dims, dims) {
        Some(v) => v,
        None => return u128::MAX,
    };
    let per_device = (grid.n_alpha as u128).checked_pow(devices as u32).and_then(|a| {
        (grid.n_q as u128).checked_pow(devices as u32).and_then(|q| a.checked_mul(q))
    });
    per_device.and_then(|c| c.checked_mul(tau_points)).unwrap_or(u128::MAX)
}

fn alpha_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn q_axis(n: usize, cap: f64) -> Vec<f64> {
    // negated so a NaN cap degrades to the passive-only axis
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(cap > 0.0) {
        return vec![0.0];
    }
    let mut pts = Vec::with_capacity(n);
    pts.push(0.0);
    for j in 1..n {
        let t = j as f64 / (n - 1) as f64;
        pts.push(cap * 10f64.powf(-Q_GRID_SPAN_DECADES * (1.0 - t)));
    }
    pts
}

/// All 2K-dimensional lattice vectors with component sum at most m,
/// scaled to time shares in [0, 1].
fn tau_lattice(dims: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; dims];
    fn rec(out: &mut Vec<Vec<f64>>, current: &mut Vec<usize>, dim: usize, left: usize, m: usize) {
        if dim == current.len() {
            out.push(current.iter().map(|&i| i as f64 / m as f64).collect());
            return;
        }
        for i in 0..=left {
            current[dim] = i;
            rec(out, current, dim + 1, left - i, m);
        }
    }
    rec(&mut out, &mut current, 0, m, m);
    out
}

struct ScanBest {
    feasible: Option<(f64, Allocation, RateReport)>,
    infeasible: Option<(f64, Allocation, RateReport)>,
}

/// Exhaustive scan with the default execution mode.
pub fn grid_search(spec: &ProblemSpec, grid: &GridSpec) -> Result<Solution, Error> {
    grid_search_with(spec, grid, ExecMode::default())
}

/// Exhaustive scan of the full decision grid. Returns the best feasible
/// point as a solution, or an infeasible solution carrying the violation
/// set of the highest-objective point when nothing on the grid passes.
pub fn grid_search_with(
    spec: &ProblemSpec,
    grid: &GridSpec,
    exec: ExecMode,
) -> Result<Solution, Error> {
    spec.validate()?;
    grid.validate()?;
    let devices = spec.cfg.device_count();
    if devices > MAX_ORACLE_DEVICES {
        return Err(Error::TooManyDevices { got: devices, max: MAX_ORACLE_DEVICES });
    }
    let count = evaluation_count(devices, grid);
    if count > MAX_EVALUATIONS {
        return Err(Error::GridTooLarge { evaluations: count, limit: MAX_EVALUATIONS });
    }

    let ch = build_channels(&spec.cfg)?;
    let caps = uplink_power_caps(&spec.cfg, &ch, spec.p_max);
    let alphas = alpha_axis(grid.n_alpha);
    let q_axes: Vec<Vec<f64>> = caps.iter().map(|&c| q_axis(grid.n_q, c)).collect();
    let lattice = tau_lattice(2 * devices, grid.n_tau - 1);

    // one task per (alpha, q) combination, each scanning the tau lattice
    let mut combos: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut alpha_idx = vec![0usize; devices];
    loop {
        let alpha: Vec<f64> = alpha_idx.iter().map(|&i| alphas[i]).collect();
        let mut q_idx = vec![0usize; devices];
        loop {
            let q: Vec<f64> = q_idx.iter().zip(&q_axes).map(|(&i, axis)| axis[i]).collect();
            combos.push((alpha.clone(), q));
            if !advance(&mut q_idx, |k| q_axes[k].len()) {
                break;
            }
        }
        if !advance(&mut alpha_idx, |_| alphas.len()) {
            break;
        }
    }

    let scans = map_indexed(exec, &combos, |(alpha, q)| {
        let mut best = ScanBest { feasible: None, infeasible: None };
        for tau in &lattice {
            let alloc = Allocation {
                tau_bc: tau[..devices].to_vec(),
                tau_ac: tau[devices..].to_vec(),
                alpha: alpha.clone(),
                q_w: q.clone(),
                p_src_w: spec.p_max,
            };
            let report = evaluate(&spec.cfg, &ch, &alloc, &spec.weights, spec.g_min);
            let slot =
                if report.feasibility.feasible { &mut best.feasible } else { &mut best.infeasible };
            let replace = match slot {
                None => true,
                Some((obj, cur, _)) => strictly_better(report.weighted_sum, &alloc, *obj, cur),
            };
            if replace {
                *slot = Some((report.weighted_sum, alloc, report));
            }
        }
        best
    });

    let mut feasible: Option<(f64, Allocation, RateReport)> = None;
    let mut infeasible: Option<(f64, Allocation, RateReport)> = None;
    for scan in scans {
        for (slot, found) in
            [(&mut feasible, scan.feasible), (&mut infeasible, scan.infeasible)]
        {
            if let Some((obj, alloc, report)) = found {
                let replace = match slot {
                    None => true,
                    Some((cur_obj, cur, _)) => strictly_better(obj, &alloc, *cur_obj, cur),
                };
                if replace {
                    *slot = Some((obj, alloc, report));
                }
            }
        }
    }

    let trace = SolverTrace {
        starts: combos.len(),
        outer_iterations: 0,
        inner_lp_count: 0,
        objective_path: Vec::new(),
    };
    match (feasible, infeasible) {
        (Some((obj, alloc, report)), _) => Ok(Solution {
            alloc,
            objective: obj,
            report,
            status: SolveStatus::OptimalCandidate,
            conflicts: Vec::new(),
            trace,
        }),
        (None, Some((_, alloc, report))) => {
            let conflicts = report.feasibility.violations.clone();
            Ok(Solution {
                alloc,
                objective: 0.0,
                report,
                status: SolveStatus::Infeasible,
                conflicts,
                trace,
            })
        }
        // n_tau >= 2 guarantees at least the all-zero lattice point
        (None, None) => unreachable!("grid always contains the idle allocation"),
    }
}

fn advance(idx: &mut [usize], len: impl Fn(usize) -> usize) -> bool {
    for (k, slot) in idx.iter_mut().enumerate() {
        *slot += 1;
        if *slot < len(k) {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Relative shortfall of a candidate solution against the grid reference:
/// `(reference - candidate) / max(reference, 1e-12)`. Negative when the
/// candidate beats the grid. Undefined unless both are feasible.
pub fn gap(candidate: &Solution, reference: &Solution) -> Result<f64, Error> {
    if !candidate.is_feasible() || !reference.is_feasible() {
        return Err(Error::GapUndefined(format!(
            "candidate {}, reference {}",
            candidate.status, reference.status
        )));
    }
    Ok((reference.objective - candidate.objective) / reference.objective.max(1e-12))
}

// ==================== tests ====================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::optimize;
    use crate::phy::{NetworkConfig, Position};

    fn k1_spec() -> ProblemSpec {
        let mut cfg = NetworkConfig::reference();
        cfg.device_pos = vec![Position::new(0.8, 0.0)];
        ProblemSpec::uniform(cfg, 0.0, 1.0)
    }

    #[test]
    fn refined_doubles_every_axis() {
        let g = GridSpec { n_tau: 9, n_alpha: 9, n_q: 9 };
        assert_eq!(g.refined(), GridSpec { n_tau: 17, n_alpha: 17, n_q: 17 });
    }

    #[test]
    fn evaluation_count_matches_hand_count() {
        // one device, m = 2: lattice vectors over 2 dims summing to <= 2
        // are (0,0),(0,1),(0,2),(1,0),(1,1),(2,0) = 6 = C(4,2)
        let g = GridSpec { n_tau: 3, n_alpha: 2, n_q: 2 };
        assert_eq!(evaluation_count(1, &g), 6 * 2 * 2);
        let lattice = tau_lattice(2, 2);
        assert_eq!(lattice.len(), 6);
    }

    #[test]
    fn oversized_requests_are_refused() {
        let mut cfg = NetworkConfig::reference();
        cfg.device_pos = vec![
            Position::new(0.8, 0.0),
            Position::new(0.0, 1.0),
            Position::new(1.0, 1.0),
            Position::new(2.0, 0.0),
        ];
        let spec = ProblemSpec::uniform(cfg, 0.0, 1.0);
        let g = GridSpec { n_tau: 3, n_alpha: 3, n_q: 3 };
        assert!(matches!(
            grid_search(&spec, &g),
            Err(Error::TooManyDevices { got: 4, max: 3 })
        ));

        let spec = ProblemSpec::uniform(NetworkConfig::reference(), 0.0, 1.0);
        let g = GridSpec { n_tau: 200, n_alpha: 50, n_q: 50 };
        assert!(matches!(grid_search(&spec, &g), Err(Error::GridTooLarge { .. })));

        let g = GridSpec { n_tau: 1, n_alpha: 3, n_q: 3 };
        assert!(grid_search(&spec, &g).is_err());
    }

    #[test]
    fn refinement_never_lowers_the_best_objective() {
        let spec = k1_spec();
        let coarse = GridSpec { n_tau: 3, n_alpha: 3, n_q: 3 };
        let a = grid_search(&spec, &coarse).unwrap();
        let b = grid_search(&spec, &coarse.refined()).unwrap();
        assert!(b.objective >= a.objective, "refined {} < coarse {}", b.objective, a.objective);
    }

    #[test]
    fn winner_report_matches_a_fresh_evaluation() {
        let spec = k1_spec();
        let g = GridSpec { n_tau: 5, n_alpha: 5, n_q: 5 };
        let sol = grid_search(&spec, &g).unwrap();
        let ch = build_channels(&spec.cfg).unwrap();
        let fresh = evaluate(&spec.cfg, &ch, &sol.alloc, &spec.weights, spec.g_min);
        assert_eq!(sol.report, fresh);
    }

    #[test]
    fn parallel_and_sequential_scans_agree() {
        let spec = k1_spec();
        let g = GridSpec { n_tau: 4, n_alpha: 4, n_q: 4 };
        let a = grid_search_with(&spec, &g, ExecMode::Parallel).unwrap();
        let b = grid_search_with(&spec, &g, ExecMode::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn optimizer_stays_close_to_the_grid_reference() {
        let spec = k1_spec();
        let reference = grid_search(&spec, &GridSpec { n_tau: 9, n_alpha: 9, n_q: 9 }).unwrap();
        let sol = optimize(&spec).unwrap();
        let g = gap(&sol, &reference).unwrap();
        assert!(g <= 0.02, "optimality gap {g} above 2%");
    }

    #[test]
    fn infeasible_grid_reports_the_blocking_constraints() {
        let mut spec = k1_spec();
        spec.g_min = 1e9;
        let g = GridSpec { n_tau: 3, n_alpha: 3, n_q: 3 };
        let sol = grid_search(&spec, &g).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(!sol.conflicts.is_empty());
    }

    #[test]
    fn gap_arithmetic() {
        let spec = k1_spec();
        let g = GridSpec { n_tau: 3, n_alpha: 3, n_q: 3 };
        let a = grid_search(&spec, &g).unwrap();
        assert_eq!(gap(&a, &a).unwrap(), 0.0);
        let mut worse = a.clone();
        worse.objective = a.objective * 0.98;
        let rel = gap(&worse, &a).unwrap();
        assert!((rel - 0.02).abs() < 1e-12);
        let mut better = a.clone();
        better.objective = a.objective * 1.01;
        assert!(gap(&better, &a).unwrap() < 0.0);

        let mut infeasible = a.clone();
        infeasible.status = SolveStatus::Infeasible;
        assert!(matches!(gap(&infeasible, &a), Err(Error::GapUndefined(_))));
    }
}
