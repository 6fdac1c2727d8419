//! Weighted sum-rate maximization over time shares, reflection
//! coefficients and uplink powers.
//!
//! For fixed reflection coefficients and uplink powers the problem is a
//! linear program in the time shares: the objective and every constraint
//! (gain floor, per-device energy causality, per-device minimum rate,
//! unit time budget) are affine in tau. The solver exploits this with
//! block-coordinate ascent: an exact dense-simplex solve in tau alternates
//! with 1-D grid-zoom refinement of each alpha_k and q_k. Multiple
//! deterministic start points guard against local maxima, and the winning
//! vertex is polished with a secondary program that prefers the least
//! backscatter time among allocations of equal objective, which drives the
//! achieved gain down onto its floor whenever the floor is active.
//!
//! Everything is deterministic: no randomness, order-stable merges, and a
//! totally ordered candidate comparison, so results are bitwise
//! reproducible with or without parallel execution.

use std::fmt;

use crate::error::Error;
use crate::exec::{map_indexed, ExecMode};
use crate::lp::{solve as lp_solve, DenseLp, LpOutcome};
use crate::phy::{build_channels, ChannelSet, NetworkConfig};
use crate::rate::{
    self, active_rate, backscatter_rate, evaluate, legacy_rate_baseline, legacy_rate_mutualism,
    legacy_rate_noma, Allocation, ConstraintId, Feasibility, RateReport,
};

// ==================== solver parameters ====================

/// Hard cap on coordinate-ascent sweeps per start.
pub const MAX_OUTER_ITERATIONS: usize = 200;
/// A sweep that improves the objective by less than this relative amount
/// ends the ascent.
pub const REL_IMPROVEMENT_TOL: f64 = 1e-6;
/// Smallest meaningful time share. The derived uplink power cap is the
/// full-block harvest divided by this, keeping the search box finite.
pub const EPS_TIME_SHARE: f64 = 1e-3;

/// Safety factor applied to the minimum-rate lower bounds handed to the
/// linear program, so returned shares clear the rate floor with margin.
const C3_BOUND_SAFETY: f64 = 2.0;
/// Relative slack on the objective floor in the tie-break program.
const TIE_BREAK_REL_TOL: f64 = 1e-9;
/// Grid refinement: points per round and number of zoom rounds.
const ZOOM_POINTS: usize = 9;
const ZOOM_ROUNDS: usize = 3;
/// First-round uplink power grid spans this many decades below the cap.
const Q_GRID_DECADES: f64 = 5.0;
const Q_GRID_POINTS: usize = 10;

// ==================== problem and solution types ====================

/// One operating point of the network: scenario, objective weights, gain
/// floor and source power cap. The source transmits at `p_max` in every
/// slot; only the device-side variables are optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub cfg: NetworkConfig,
    pub weights: Vec<f64>,
    /// Minimum source rate gain, bit/s.
    pub g_min: f64,
    /// Source transmit power, W.
    pub p_max: f64,
}

impl ProblemSpec {
    /// Unit-weight problem.
    pub fn uniform(cfg: NetworkConfig, g_min: f64, p_max: f64) -> Self {
        let devices = cfg.device_count();
        ProblemSpec { cfg, weights: vec![1.0; devices], g_min, p_max }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.cfg.validate()?;
        if self.weights.len() != self.cfg.device_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} devices",
                self.weights.len(),
                self.cfg.device_count()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig {
                field: "weights",
                message: "weights must be finite and nonnegative".into(),
            });
        }
        // negated so a NaN sum also fails the guard
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidConfig {
                field: "weights",
                message: "at least one weight must be positive".into(),
            });
        }
        if !(self.g_min >= 0.0 && self.g_min.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "g_min",
                message: format!("must be nonnegative, got {}", self.g_min),
            });
        }
        if !(self.p_max >= 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "p_max",
                message: format!("must be nonnegative, got {}", self.p_max),
            });
        }
        Ok(())
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Best point found by the heuristic search; feasible by construction.
    OptimalCandidate,
    /// No start point yielded a feasible inner program.
    Infeasible,
    /// Feasible optimum of the backscatter-only restriction.
    BaselineRestricted,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::OptimalCandidate => write!(f, "optimal-candidate"),
            SolveStatus::Infeasible => write!(f, "infeasible"),
            SolveStatus::BaselineRestricted => write!(f, "baseline-restricted"),
        }
    }
}

/// Search diagnostics for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    /// Start points attempted.
    pub starts: usize,
    /// Coordinate-ascent sweeps of the winning start.
    pub outer_iterations: usize,
    /// Inner linear programs solved across all starts.
    pub inner_lp_count: usize,
    /// Objective after each sweep of the winning start. Never decreasing;
    /// the ascent only accepts strict improvements.
    pub objective_path: Vec<f64>,
}

impl SolverTrace {
    fn empty() -> Self {
        SolverTrace { starts: 0, outer_iterations: 0, inner_lp_count: 0, objective_path: Vec::new() }
    }
}

/// Result of one optimization: the allocation, its full report and search
/// diagnostics. When `status` is not `Infeasible` the report is feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub alloc: Allocation,
    /// Weighted device sum rate of `alloc`, bit/s.
    pub objective: f64,
    pub report: RateReport,
    pub status: SolveStatus,
    /// Unsatisfiable constraint set, populated only when infeasible.
    pub conflicts: Vec<ConstraintId>,
    pub trace: SolverTrace,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        !matches!(self.status, SolveStatus::Infeasible)
    }

    /// Key-value serialization of the solve outcome. Lists are comma
    /// separated, one device per entry.
    pub fn to_kv_block(&self, spec: &ProblemSpec) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        out.push_str(&format!("status = {}\n", self.status));
        out.push_str(&format!("objective_bps = {}\n", self.objective));
        out.push_str(&format!("p_src_w = {}\n", self.alloc.p_src_w));
        out.push_str(&format!("g_min_bps = {}\n", spec.g_min));
        out.push_str(&format!("weights = {}\n", join(&spec.weights)));
        out.push_str(&format!("tau_bc = {}\n", join(&self.alloc.tau_bc)));
        out.push_str(&format!("tau_ac = {}\n", join(&self.alloc.tau_ac)));
        out.push_str(&format!("alpha = {}\n", join(&self.alloc.alpha)));
        out.push_str(&format!("q_w = {}\n", join(&self.alloc.q_w)));
        out.push_str(&format!("slack = {}\n", self.alloc.slack()));
        out.push_str(&format!("rate_source_bps = {}\n", self.report.rate_source));
        out.push_str(&format!("rate_gain_bps = {}\n", self.report.rate_gain));
        if !self.conflicts.is_empty() {
            let c: Vec<String> = self.conflicts.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("conflicts = {}\n", c.join(";")));
        }
        out.push_str(&format!("outer_iterations = {}\n", self.trace.outer_iterations));
        out.push_str(&format!("inner_lp_count = {}\n", self.trace.inner_lp_count));
        out.push_str(&format!("starts = {}\n", self.trace.starts));
        out
    }
}

// ==================== shared helpers ====================

/// Per-unit-time rates at fixed reflection coefficients and uplink powers.
struct PhaseRates {
    /// Device backscatter rate per unit time.
    r_bc: Vec<f64>,
    /// Device active rate per unit time.
    r_ac: Vec<f64>,
    /// Source rate gain per unit backscatter time, >= 0.
    gain_bc: Vec<f64>,
    /// Source rate gain per unit active time, <= 0.
    gain_ac: Vec<f64>,
}

fn phase_rates(cfg: &NetworkConfig, ch: &ChannelSet, p: f64, alpha: &[f64], q: &[f64]) -> PhaseRates {
    let b = cfg.bandwidth_hz;
    let devices = ch.device_count();
    let r0 = legacy_rate_baseline(p, ch, b);
    let mut r_bc = Vec::with_capacity(devices);
    let mut r_ac = Vec::with_capacity(devices);
    let mut gain_bc = Vec::with_capacity(devices);
    let mut gain_ac = Vec::with_capacity(devices);
    for k in 0..devices {
        r_bc.push(backscatter_rate(p, k, alpha[k], cfg.spreading_factor, cfg.bc_combining_gain, ch, b));
        r_ac.push(active_rate(k, q[k], ch, b));
        gain_bc.push(legacy_rate_mutualism(p, k, alpha[k], ch, b) - r0);
        gain_ac.push(legacy_rate_noma(p, k, q[k], ch, b) - r0);
    }
    PhaseRates { r_bc, r_ac, gain_bc, gain_ac }
}

/// Per-device uplink power caps: the configured hard cap when present,
/// otherwise the full-block harvestable power spread over the smallest
/// meaningful time share.
pub fn uplink_power_caps(cfg: &NetworkConfig, ch: &ChannelSet, p_max: f64) -> Vec<f64> {
    match cfg.device_power_cap_w {
        Some(cap) => vec![cap; ch.device_count()],
        None => ch
            .g_sd
            .iter()
            .map(|g| cfg.eh_efficiency * p_max * g / EPS_TIME_SHARE)
            .collect(),
    }
}

/// Upper bound on the achievable source rate gain at power `p`: the whole
/// block backscattered by the single most helpful device at full
/// reflection. Ignores energy and per-device rate floors, so it bounds
/// every feasible gain from above.
pub fn max_rate_gain_bound(cfg: &NetworkConfig, p: f64) -> Result<f64, Error> {
    let ch = build_channels(cfg)?;
    let b = cfg.bandwidth_hz;
    let r0 = legacy_rate_baseline(p, &ch, b);
    let mut best = 0.0f64;
    for k in 0..ch.device_count() {
        best = best.max(legacy_rate_mutualism(p, k, 1.0, &ch, b) - r0);
    }
    Ok(best)
}

/// Strict total order over candidate allocations: higher objective first,
/// then less total backscatter time, then lexicographic comparison of the
/// raw variables. Distinct allocations never compare equal, which makes
/// parallel and sequential merges agree bitwise.
pub(crate) fn strictly_better(obj_a: f64, a: &Allocation, obj_b: f64, b: &Allocation) -> bool {
    use std::cmp::Ordering;
    match obj_a.total_cmp(&obj_b) {
        Ordering::Greater => return true,
        Ordering::Less => return false,
        Ordering::Equal => {}
    }
    let sum_bc = |x: &Allocation| x.tau_bc.iter().sum::<f64>();
    match sum_bc(a).total_cmp(&sum_bc(b)) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    let lex = |x: &Allocation| {
        x.tau_bc
            .iter()
            .chain(&x.tau_ac)
            .chain(&x.alpha)
            .chain(&x.q_w)
            .copied()
            .collect::<Vec<f64>>()
    };
    for (va, vb) in lex(a).iter().zip(lex(b).iter()) {
        match va.total_cmp(vb) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

// ==================== inner linear program ====================

struct TimeLp {
    lp: DenseLp,
    row_ids: Vec<ConstraintId>,
}

/// Builds the time-share program for fixed alpha and q. Variables are
/// `[tau_bc[0..K], tau_ac[0..K]]`. Rows: unit time budget, gain floor,
/// per-device energy causality, per-device minimum-rate lower bounds, and
/// in the backscatter-only restriction a zero pin on every tau_ac.
/// Returns the unavoidable conflict directly when a device cannot reach a
/// positive rate at this (alpha, q).
fn build_time_lp(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    rates: &PhaseRates,
    alpha: &[f64],
    q: &[f64],
    baseline: bool,
) -> Result<TimeLp, Vec<ConstraintId>> {
    let devices = ch.device_count();
    let nvars = 2 * devices;
    let eta = spec.cfg.eh_efficiency;
    let p = spec.p_max;

    let mut objective = vec![0.0; nvars];
    for k in 0..devices {
        objective[k] = spec.weights[k] * rates.r_bc[k];
        objective[devices + k] = spec.weights[k] * rates.r_ac[k];
    }

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut row_ids = Vec::new();

    rows.push(vec![1.0; nvars]);
    rhs.push(1.0);
    row_ids.push(ConstraintId::TimeBudget);

    let mut gain_row = vec![0.0; nvars];
    for k in 0..devices {
        gain_row[k] = -rates.gain_bc[k];
        gain_row[devices + k] = -rates.gain_ac[k];
    }
    rows.push(gain_row);
    rhs.push(-spec.g_min);
    row_ids.push(ConstraintId::GainFloor);

    for k in 0..devices {
        let harvest = eta * p * ch.g_sd[k];
        let mut row = vec![0.0; nvars];
        row[k] = spec.cfg.circuit_power_bc_w + harvest * alpha[k];
        row[devices + k] = q[k] + spec.cfg.circuit_power_ac_w + harvest;
        rows.push(row);
        rhs.push(harvest);
        row_ids.push(ConstraintId::EnergyCausality(k));
    }

    for k in 0..devices {
        let best_rate = if baseline { rates.r_bc[k] } else { rates.r_bc[k].max(rates.r_ac[k]) };
        // negated so a NaN rate also counts as a dead device
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(best_rate > 0.0) {
            return Err(vec![ConstraintId::DeviceRateFloor(k)]);
        }
        let var = if baseline || rates.r_bc[k] >= rates.r_ac[k] { k } else { devices + k };
        let bound = C3_BOUND_SAFETY * rate::EPS_RATE / best_rate;
        let mut row = vec![0.0; nvars];
        row[var] = -1.0;
        rows.push(row);
        rhs.push(-bound);
        row_ids.push(ConstraintId::DeviceRateFloor(k));
    }

    if baseline {
        for k in 0..devices {
            let mut row = vec![0.0; nvars];
            row[devices + k] = 1.0;
            rows.push(row);
            rhs.push(0.0);
            row_ids.push(ConstraintId::TauAcBox(k));
        }
    }

    Ok(TimeLp { lp: DenseLp { objective, rows, rhs }, row_ids })
}

struct TauSolve {
    tau_bc: Vec<f64>,
    tau_ac: Vec<f64>,
    objective: f64,
}

fn split_tau(x: &[f64], devices: usize) -> (Vec<f64>, Vec<f64>) {
    (x[..devices].to_vec(), x[devices..].to_vec())
}

/// Exact solve of the time-share program. `Err` carries the conflicting
/// constraint set when the program is empty.
fn solve_tau(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    rates: &PhaseRates,
    alpha: &[f64],
    q: &[f64],
    baseline: bool,
    lp_count: &mut usize,
) -> Result<TauSolve, Vec<ConstraintId>> {
    let built = build_time_lp(spec, ch, rates, alpha, q, baseline)?;
    *lp_count += 1;
    match lp_solve(&built.lp) {
        LpOutcome::Optimal { x, objective } => {
            let (tau_bc, tau_ac) = split_tau(&x, ch.device_count());
            Ok(TauSolve { tau_bc, tau_ac, objective })
        }
        LpOutcome::Infeasible { violated_rows } => {
            let mut ids: Vec<ConstraintId> =
                violated_rows.iter().map(|&i| built.row_ids[i]).collect();
            ids.sort_unstable();
            ids.dedup();
            Err(ids)
        }
        // the unit time budget bounds every variable
        LpOutcome::Unbounded => unreachable!("time-share program has a bounded feasible set"),
    }
}

/// Re-solves at the winning (alpha, q) and then minimizes total
/// backscatter time subject to keeping the objective within a relative
/// tolerance of its optimum. Among near-equal vertices this prefers the
/// one with the least backscatter time, which pins the achieved gain to
/// its floor whenever the floor is the active reason for backscattering.
#[allow(clippy::too_many_arguments)]
fn tie_break_tau(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    rates: &PhaseRates,
    alpha: &[f64],
    q: &[f64],
    baseline: bool,
    z_star: f64,
    lp_count: &mut usize,
) -> Option<TauSolve> {
    let built = build_time_lp(spec, ch, rates, alpha, q, baseline).ok()?;
    let devices = ch.device_count();
    let nvars = 2 * devices;
    let mut lp = built.lp;
    let floor = z_star - TIE_BREAK_REL_TOL * z_star.abs().max(1.0);
    let objective_row: Vec<f64> = lp.objective.iter().map(|c| -c).collect();
    lp.rows.push(objective_row);
    lp.rhs.push(-floor);
    let mut tie_objective = vec![0.0; nvars];
    for item in tie_objective.iter_mut().take(devices) {
        *item = -1.0;
    }
    let primary = std::mem::replace(&mut lp.objective, tie_objective);
    *lp_count += 1;
    match lp_solve(&lp) {
        LpOutcome::Optimal { x, .. } => {
            let objective: f64 = primary.iter().zip(&x).map(|(c, v)| c * v).sum();
            let (tau_bc, tau_ac) = split_tau(&x, devices);
            Some(TauSolve { tau_bc, tau_ac, objective })
        }
        _ => None,
    }
}

/// Outcome of the exact time-share solve at fixed (alpha, q).
#[derive(Debug, Clone, PartialEq)]
pub enum TimeShareOutcome {
    Feasible { tau_bc: Vec<f64>, tau_ac: Vec<f64>, objective: f64 },
    Infeasible { conflicts: Vec<ConstraintId> },
}

/// Public wrapper: exact time shares for fixed (alpha, q), tie-broken
/// toward minimal backscatter time.
pub fn solve_time_shares(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    alpha: &[f64],
    q: &[f64],
) -> Result<TimeShareOutcome, Error> {
    spec.validate()?;
    let devices = ch.device_count();
    if alpha.len() != devices || q.len() != devices {
        return Err(Error::DimensionMismatch(format!(
            "alpha/q lengths {}/{} for {} devices",
            alpha.len(),
            q.len(),
            devices
        )));
    }
    let rates = phase_rates(&spec.cfg, ch, spec.p_max, alpha, q);
    let mut lp_count = 0;
    match solve_tau(spec, ch, &rates, alpha, q, false, &mut lp_count) {
        Ok(sol) => {
            let polished =
                tie_break_tau(spec, ch, &rates, alpha, q, false, sol.objective, &mut lp_count)
                    .unwrap_or(sol);
            Ok(TimeShareOutcome::Feasible {
                tau_bc: polished.tau_bc,
                tau_ac: polished.tau_ac,
                objective: polished.objective,
            })
        }
        Err(conflicts) => Ok(TimeShareOutcome::Infeasible { conflicts }),
    }
}

// ==================== coordinate ascent ====================

struct Candidate {
    alpha: Vec<f64>,
    q: Vec<f64>,
    tau: TauSolve,
    iterations: usize,
    path: Vec<f64>,
}

/// Values probed in the first refinement round for one coordinate.
fn first_round_grid(is_q: bool, lo: f64, hi: f64) -> Vec<f64> {
    if !is_q {
        return (0..ZOOM_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (ZOOM_POINTS - 1) as f64)
            .collect();
    }
    // uplink power: zero plus a geometric ladder up to the cap
    let mut pts = vec![0.0];
    if hi > 0.0 {
        for j in 1..=Q_GRID_POINTS {
            let t = j as f64 / Q_GRID_POINTS as f64;
            pts.push(hi * 10f64.powf(-Q_GRID_DECADES * (1.0 - t)));
        }
    }
    pts
}

/// Grid-zoom line search over one coordinate. Returns the best probed
/// point strictly improving on `(cur_x, cur_obj)`, if any.
fn refine_coordinate<F>(
    mut probe: F,
    is_q: bool,
    lo: f64,
    hi: f64,
    cur_x: f64,
    cur_obj: f64,
) -> Option<(f64, TauSolve)>
where
    F: FnMut(f64) -> Option<TauSolve>,
{
    let mut best: Option<(f64, TauSolve)> = None;
    let mut grid = first_round_grid(is_q, lo, hi);
    for _round in 0..=ZOOM_ROUNDS {
        let mut round_best: Option<(usize, f64)> = None;
        for (i, &x) in grid.iter().enumerate() {
            if (x - cur_x).abs() <= 1e-15 * cur_x.abs().max(1.0) {
                continue;
            }
            if let Some(sol) = probe(x) {
                let obj = sol.objective;
                let improves_round = round_best.is_none_or(|(_, b)| obj > b);
                if improves_round {
                    round_best = Some((i, obj));
                }
                let improves_best = best.as_ref().is_none_or(|(_, b)| obj > b.objective);
                if improves_best {
                    best = Some((x, sol));
                }
            }
        }
        let Some((idx, _)) = round_best else { break };
        let left = if idx == 0 { grid[0] } else { grid[idx - 1] };
        let right = if idx + 1 == grid.len() { grid[idx] } else { grid[idx + 1] };
        if right - left <= 1e-12 {
            break;
        }
        grid = (0..ZOOM_POINTS)
            .map(|i| left + (right - left) * i as f64 / (ZOOM_POINTS - 1) as f64)
            .collect();
    }
    match best {
        Some((x, sol)) if sol.objective > cur_obj => Some((x, sol)),
        _ => None,
    }
}

/// Block-coordinate ascent from one start point. The objective never
/// decreases: coordinate updates are accepted only on strict improvement.
/// `Err` carries the conflict set of the initial program when the start
/// is infeasible.
fn coordinate_ascent(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    caps: &[f64],
    start_alpha: &[f64],
    start_q: &[f64],
    baseline: bool,
    lp_count: &mut usize,
) -> Result<Candidate, Vec<ConstraintId>> {
    let devices = ch.device_count();
    let mut alpha: Vec<f64> = start_alpha.iter().map(|a| a.clamp(0.0, 1.0)).collect();
    let mut q: Vec<f64> = start_q
        .iter()
        .zip(caps)
        .map(|(v, cap)| v.clamp(0.0, cap.max(0.0)))
        .collect();
    if baseline {
        q.iter_mut().for_each(|v| *v = 0.0);
    }

    let rates = phase_rates(&spec.cfg, ch, spec.p_max, &alpha, &q);
    let mut cur = solve_tau(spec, ch, &rates, &alpha, &q, baseline, lp_count)?;
    let mut path = vec![cur.objective];
    let mut iterations = 0;

    for _ in 0..MAX_OUTER_ITERATIONS {
        iterations += 1;
        let sweep_start = cur.objective;
        for k in 0..devices {
            let outcome = refine_coordinate(
                |x| {
                    let mut trial = alpha.clone();
                    trial[k] = x;
                    let r = phase_rates(&spec.cfg, ch, spec.p_max, &trial, &q);
                    solve_tau(spec, ch, &r, &trial, &q, baseline, lp_count).ok()
                },
                false,
                0.0,
                1.0,
                alpha[k],
                cur.objective,
            );
            if let Some((x, sol)) = outcome {
                alpha[k] = x;
                cur = sol;
            }
            if baseline {
                continue;
            }
            let outcome = refine_coordinate(
                |x| {
                    let mut trial = q.clone();
                    trial[k] = x;
                    let r = phase_rates(&spec.cfg, ch, spec.p_max, &alpha, &trial);
                    solve_tau(spec, ch, &r, &alpha, &trial, baseline, lp_count).ok()
                },
                true,
                0.0,
                caps[k],
                q[k],
                cur.objective,
            );
            if let Some((x, sol)) = outcome {
                q[k] = x;
                cur = sol;
            }
        }
        path.push(cur.objective);
        if cur.objective - sweep_start <= REL_IMPROVEMENT_TOL * sweep_start.abs().max(1e-12) {
            break;
        }
    }

    Ok(Candidate { alpha, q, tau: cur, iterations, path })
}

// ==================== multi-start search ====================

const ALPHA_STARTS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const Q_START_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

/// Deterministic start grid. Up to two devices: the full Cartesian
/// product of per-device (alpha, q) pairs. Beyond that the product is
/// pruned to uniform starts plus one-device-at-a-time variations around a
/// central point.
fn start_grid(devices: usize, caps: &[f64], baseline: bool) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut pairs = Vec::new();
    for &a in &ALPHA_STARTS {
        if baseline {
            pairs.push((a, 0.0));
        } else {
            for &f in &Q_START_FRACTIONS {
                pairs.push((a, f));
            }
        }
    }
    let to_start = |choice: &dyn Fn(usize) -> (f64, f64)| {
        let mut alpha = Vec::with_capacity(devices);
        let mut q = Vec::with_capacity(devices);
        for (k, cap) in caps.iter().enumerate() {
            let (a, f) = choice(k);
            alpha.push(a);
            q.push(f * cap);
        }
        (alpha, q)
    };
    let mut starts = Vec::new();
    if devices <= 2 {
        let mut idx = vec![0usize; devices];
        loop {
            starts.push(to_start(&|k| pairs[idx[k]]));
            let mut carry = true;
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < pairs.len() {
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
    } else {
        for &p in &pairs {
            starts.push(to_start(&|_| p));
        }
        let center = (0.5, 0.25);
        for k in 0..devices {
            for &p in &pairs {
                starts.push(to_start(&|j| if j == k { p } else { center }));
            }
        }
    }
    starts
}

struct SearchOutcome {
    best: Option<Candidate>,
    conflicts: Vec<ConstraintId>,
    lp_count: usize,
    starts: usize,
}

fn multi_start_search(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    caps: &[f64],
    starts: &[(Vec<f64>, Vec<f64>)],
    baseline: bool,
    exec: ExecMode,
) -> SearchOutcome {
    let results = map_indexed(exec, starts, |(alpha, q)| {
        let mut lp_count = 0;
        let r = coordinate_ascent(spec, ch, caps, alpha, q, baseline, &mut lp_count);
        (r, lp_count)
    });
    let mut best: Option<Candidate> = None;
    let mut conflicts: Vec<ConstraintId> = Vec::new();
    let mut lp_count = 0;
    for (r, c) in results {
        lp_count += c;
        match r {
            Ok(cand) => {
                let replace = match &best {
                    None => true,
                    Some(cur) => {
                        let a = alloc_of(spec, &cand);
                        let b = alloc_of(spec, cur);
                        strictly_better(cand.tau.objective, &a, cur.tau.objective, &b)
                    }
                };
                if replace {
                    best = Some(cand);
                }
            }
            Err(ids) => conflicts.extend(ids),
        }
    }
    conflicts.sort_unstable();
    conflicts.dedup();
    SearchOutcome { best, conflicts, lp_count, starts: starts.len() }
}

fn alloc_of(spec: &ProblemSpec, cand: &Candidate) -> Allocation {
    Allocation {
        tau_bc: cand.tau.tau_bc.clone(),
        tau_ac: cand.tau.tau_ac.clone(),
        alpha: cand.alpha.clone(),
        q_w: cand.q.clone(),
        p_src_w: spec.p_max,
    }
}

// ==================== public entry points ====================

fn finish_candidate(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    winner: Candidate,
    baseline: bool,
    status: SolveStatus,
    mut trace: SolverTrace,
) -> Solution {
    for w in winner.path.windows(2) {
        assert!(w[1] >= w[0], "coordinate ascent must be monotone");
    }
    trace.outer_iterations = winner.iterations;
    trace.objective_path = winner.path.clone();

    let rates = phase_rates(&spec.cfg, ch, spec.p_max, &winner.alpha, &winner.q);
    let mut lp_count = trace.inner_lp_count;
    let polished = tie_break_tau(
        spec,
        ch,
        &rates,
        &winner.alpha,
        &winner.q,
        baseline,
        winner.tau.objective,
        &mut lp_count,
    );
    trace.inner_lp_count = lp_count;

    let build = |tau: &TauSolve| Allocation {
        tau_bc: tau.tau_bc.clone(),
        tau_ac: tau.tau_ac.clone(),
        alpha: winner.alpha.clone(),
        q_w: winner.q.clone(),
        p_src_w: spec.p_max,
    };
    let candidates = [polished.as_ref(), Some(&winner.tau)];
    for tau in candidates.into_iter().flatten() {
        let alloc = build(tau);
        let report = evaluate(&spec.cfg, ch, &alloc, &spec.weights, spec.g_min);
        if report.feasibility.feasible {
            return Solution {
                objective: report.weighted_sum,
                alloc,
                report,
                status,
                conflicts: Vec::new(),
                trace,
            };
        }
    }
    // Neither vertex survived re-evaluation; treat the point as infeasible.
    infeasible_solution(spec, ch, vec![], trace)
}

fn infeasible_solution(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    conflicts: Vec<ConstraintId>,
    trace: SolverTrace,
) -> Solution {
    let alloc = Allocation::idle(ch.device_count(), spec.p_max);
    let report = evaluate(&spec.cfg, ch, &alloc, &spec.weights, spec.g_min);
    Solution {
        objective: 0.0,
        alloc,
        report,
        status: SolveStatus::Infeasible,
        conflicts,
        trace,
    }
}

/// Re-evaluates a known allocation under `spec` and wraps it as a solution
/// candidate if it is feasible there. The objective is computed by the
/// same pure evaluation as every other path, so carrying a solution to a
/// compatible spec preserves its objective bitwise.
pub(crate) fn carry_allocation(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    alloc: &Allocation,
    status: SolveStatus,
) -> Option<Solution> {
    let report = evaluate(&spec.cfg, ch, alloc, &spec.weights, spec.g_min);
    if !report.feasibility.feasible {
        return None;
    }
    Some(Solution {
        objective: report.weighted_sum,
        alloc: alloc.clone(),
        report,
        status,
        conflicts: Vec::new(),
        trace: SolverTrace::empty(),
    })
}

/// Single warm start: coordinate ascent from the given (alpha, q).
pub(crate) fn optimize_warm(
    spec: &ProblemSpec,
    ch: &ChannelSet,
    alpha: &[f64],
    q: &[f64],
    baseline: bool,
) -> Option<Solution> {
    let caps = uplink_power_caps(&spec.cfg, ch, spec.p_max);
    let mut lp_count = 0;
    let cand = coordinate_ascent(spec, ch, caps.as_slice(), alpha, q, baseline, &mut lp_count).ok()?;
    let status =
        if baseline { SolveStatus::BaselineRestricted } else { SolveStatus::OptimalCandidate };
    let trace = SolverTrace {
        starts: 1,
        outer_iterations: 0,
        inner_lp_count: lp_count,
        objective_path: Vec::new(),
    };
    let sol = finish_candidate(spec, ch, cand, baseline, status, trace);
    sol.is_feasible().then_some(sol)
}

fn solve_restricted(spec: &ProblemSpec, ch: &ChannelSet, exec: ExecMode) -> Solution {
    let caps = uplink_power_caps(&spec.cfg, ch, spec.p_max);
    let starts = start_grid(ch.device_count(), &caps, true);
    let outcome = multi_start_search(spec, ch, &caps, &starts, true, exec);
    let trace = SolverTrace {
        starts: outcome.starts,
        outer_iterations: 0,
        inner_lp_count: outcome.lp_count,
        objective_path: Vec::new(),
    };
    match outcome.best {
        Some(winner) => {
            finish_candidate(spec, ch, winner, true, SolveStatus::BaselineRestricted, trace)
        }
        None => infeasible_solution(spec, ch, outcome.conflicts, trace),
    }
}

/// Maximizes the weighted device sum rate over time shares, reflection
/// coefficients and uplink powers, subject to the gain floor, per-device
/// energy causality, per-device minimum rates and the unit time budget.
///
/// Multi-start block-coordinate ascent; the backscatter-only optimum is
/// always among the candidates, so the result never falls below
/// [`optimize_sr_baseline`] on the same spec.
pub fn optimize(spec: &ProblemSpec) -> Result<Solution, Error> {
    optimize_with(spec, ExecMode::default())
}

/// [`optimize`] with an explicit execution mode.
pub fn optimize_with(spec: &ProblemSpec, exec: ExecMode) -> Result<Solution, Error> {
    spec.validate()?;
    let ch = build_channels(&spec.cfg)?;
    let caps = uplink_power_caps(&spec.cfg, &ch, spec.p_max);

    let restricted = solve_restricted(spec, &ch, exec);
    let mut starts = start_grid(ch.device_count(), &caps, false);
    if restricted.is_feasible() {
        starts.push((restricted.alloc.alpha.clone(), vec![0.0; ch.device_count()]));
    }

    let outcome = multi_start_search(spec, &ch, &caps, &starts, false, exec);
    let trace = SolverTrace {
        starts: outcome.starts + restricted.trace.starts,
        outer_iterations: 0,
        inner_lp_count: outcome.lp_count + restricted.trace.inner_lp_count,
        objective_path: Vec::new(),
    };

    let mut best = match outcome.best {
        Some(winner) => {
            finish_candidate(spec, &ch, winner, false, SolveStatus::OptimalCandidate, trace)
        }
        None => infeasible_solution(spec, &ch, outcome.conflicts, trace),
    };

    // The restricted optimum is feasible for the full problem; keeping it
    // in the final merge guarantees optimize never trails the baseline.
    if restricted.is_feasible() {
        let carried =
            carry_allocation(spec, &ch, &restricted.alloc, SolveStatus::OptimalCandidate);
        if let Some(c) = carried {
            if !best.is_feasible()
                || strictly_better(c.objective, &c.alloc, best.objective, &best.alloc)
            {
                let mut c = c;
                c.trace = best.trace.clone();
                best = c;
            }
        }
    }
    Ok(best)
}

/// Traditional-network restriction: devices only backscatter. Active time
/// and uplink powers are pinned to zero; time shares and reflection
/// coefficients are optimized as usual.
pub fn optimize_sr_baseline(spec: &ProblemSpec) -> Result<Solution, Error> {
    optimize_sr_baseline_with(spec, ExecMode::default())
}

/// [`optimize_sr_baseline`] with an explicit execution mode.
pub fn optimize_sr_baseline_with(spec: &ProblemSpec, exec: ExecMode) -> Result<Solution, Error> {
    spec.validate()?;
    let ch = build_channels(&spec.cfg)?;
    Ok(solve_restricted(spec, &ch, exec))
}

/// Feasibility verdict for an explicit allocation under `spec`, derived
/// through the same evaluation as everything else.
pub fn check_feasible(spec: &ProblemSpec, alloc: &Allocation) -> Result<Feasibility, Error> {
    spec.validate()?;
    let ch = build_channels(&spec.cfg)?;
    if alloc.device_count() != ch.device_count()
        || alloc.tau_ac.len() != ch.device_count()
        || alloc.alpha.len() != ch.device_count()
        || alloc.q_w.len() != ch.device_count()
    {
        return Err(Error::DimensionMismatch(format!(
            "allocation sized for {} devices, scenario has {}",
            alloc.device_count(),
            ch.device_count()
        )));
    }
    Ok(evaluate(&spec.cfg, &ch, alloc, &spec.weights, spec.g_min).feasibility)
}

// ==================== tests ====================
