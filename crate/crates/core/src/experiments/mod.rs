//! Sweep experiments over operating points.
//!
//! A sweep runs the optimizer across one axis (source power cap or gain
//! floor), one curve per value of the other parameter, in one or both
//! operating modes, and renders the outcome as a CSV table with a
//! deterministic metadata header. Neighboring points on a gain-floor
//! curve are chained: each point also considers its right neighbor's
//! allocation, both carried verbatim and as a warm start. A feasible
//! allocation at a higher floor stays feasible when the floor drops and
//! keeps its objective bitwise, so reported curves are monotone in the
//! floor by construction rather than by luck. Power curves reuse their
//! left neighbor as a warm start only; the carried source power would not
//! match the new operating point.
//!
//! Output contains no timestamps or machine identifiers: two runs of the
//! same sweep produce byte-identical files.

pub mod config;

use std::fmt;
use std::str::FromStr;

use crate::allocator::{
    carry_allocation, optimize_sr_baseline_with, optimize_warm, optimize_with, strictly_better,
    max_rate_gain_bound, ProblemSpec, Solution, SolveStatus,
};
use crate::error::Error;
use crate::exec::{map_indexed, ExecMode};
use crate::phy::{build_channels, NetworkConfig};
use crate::rate::{self, evaluate};

/// Fraction of the theoretical gain bound used as the top of auto-scaled
/// gain-floor ranges, leaving headroom so the last point stays feasible.
pub const GAIN_RANGE_MARGIN: f64 = 0.9;

// ==================== axes and modes ====================

/// Which parameter the sweep walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    PMax,
    GMin,
}

impl Axis {
    fn fixed_name(self) -> &'static str {
        match self {
            Axis::PMax => "g_min",
            Axis::GMin => "p_max",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::PMax => write!(f, "p_max"),
            Axis::GMin => write!(f, "g_min"),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "p_max" => Ok(Axis::PMax),
            "g_min" => Ok(Axis::GMin),
            other => Err(Error::InvalidConfig {
                field: "axis",
                message: format!("'{other}' is not 'p_max' or 'g_min'"),
            }),
        }
    }
}

/// Operating mode of a sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full hybrid operation: backscatter, active uplink and harvesting.
    HapcSr,
    /// Backscatter-only devices, the traditional symbiotic restriction.
    SrBaseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::HapcSr => write!(f, "hapc_sr"),
            Mode::SrBaseline => write!(f, "sr_baseline"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "hapc_sr" => Ok(Mode::HapcSr),
            "sr_baseline" => Ok(Mode::SrBaseline),
            other => Err(Error::InvalidConfig {
                field: "mode",
                message: format!("'{other}' is not 'hapc_sr' or 'sr_baseline'"),
            }),
        }
    }
}

// ==================== sweep specification ====================

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub cfg: NetworkConfig,
    pub weights: Vec<f64>,
    pub axis: Axis,
    /// Axis values, ascending.
    pub values: Vec<f64>,
    /// Values of the non-axis parameter; one curve per entry.
    pub fixed: Vec<f64>,
    pub modes: Vec<Mode>,
    /// Preset name or "custom"; echoed in the output header.
    pub label: String,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), Error> {
        self.cfg.validate()?;
        if self.weights.len() != self.cfg.device_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} devices",
                self.weights.len(),
                self.cfg.device_count()
            )));
        }
        for (name, list) in [("values", &self.values), ("fixed", &self.fixed)] {
            if list.is_empty() {
                return Err(Error::InvalidConfig {
                    field: "sweep",
                    message: format!("{name} must be nonempty"),
                });
            }
            if list.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidConfig {
                    field: "sweep",
                    message: format!("{name} must be finite and nonnegative"),
                });
            }
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig {
                field: "sweep",
                message: "axis values must be strictly ascending".into(),
            });
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidConfig {
                field: "sweep",
                message: "at least one mode required".into(),
            });
        }
        Ok(())
    }

    fn point(&self, fixed: f64, value: f64) -> (f64, f64) {
        // returns (p_max, g_min)
        match self.axis {
            Axis::PMax => (value, fixed),
            Axis::GMin => (fixed, value),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let mut v: Vec<f64> =
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    v[0] = a;
    v[n - 1] = b;
    v
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(a.log10(), b.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect();
    v[0] = a;
    v[n - 1] = b;
    v
}

/// Named sweep presets.
///
/// * `fig4a`: both modes across source power 0.01 to 10 W, no gain floor.
/// * `fig4b`: both modes across gain floors from zero to 90% of the bound
///   at 1 W, source power fixed at 1 W.
/// * `fig4c`: hybrid mode across source power, one curve per gain floor at
///   25/50/75% of the auto-scaled top floor.
pub fn preset_sweep(name: &str, cfg: &NetworkConfig) -> Result<SweepSpec, Error> {
    let weights = vec![1.0; cfg.device_count()];
    let power_axis = || logspace(0.01, 10.0, 10);
    let spec = match name {
        "fig4a" => SweepSpec {
            cfg: cfg.clone(),
            weights,
            axis: Axis::PMax,
            values: power_axis(),
            fixed: vec![0.0],
            modes: vec![Mode::HapcSr, Mode::SrBaseline],
            label: "fig4a".into(),
        },
        "fig4b" => {
            let top = GAIN_RANGE_MARGIN * max_rate_gain_bound(cfg, 1.0)?;
            SweepSpec {
                cfg: cfg.clone(),
                weights,
                axis: Axis::GMin,
                values: linspace(0.0, top, 8),
                fixed: vec![1.0],
                modes: vec![Mode::HapcSr, Mode::SrBaseline],
                label: "fig4b".into(),
            }
        }
        "fig4c" => {
            let top = GAIN_RANGE_MARGIN * max_rate_gain_bound(cfg, 10.0)?;
            SweepSpec {
                cfg: cfg.clone(),
                weights,
                axis: Axis::PMax,
                values: power_axis(),
                fixed: vec![0.25 * top, 0.5 * top, 0.75 * top],
                modes: vec![Mode::HapcSr],
                label: "fig4c".into(),
            }
        }
        other => {
            return Err(Error::InvalidConfig {
                field: "preset",
                message: format!("'{other}' is not fig4a, fig4b or fig4c"),
            })
        }
    };
    Ok(spec)
}

// ==================== running ====================

/// One solved sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fixed: f64,
    pub axis_value: f64,
    pub mode: Mode,
    pub p_max: f64,
    pub g_min: f64,
    pub solution: Solution,
}

/// A finished sweep: the solved rows plus the rendered CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub csv: String,
}

/// Solves a single operating point in the requested mode.
pub fn run_point(
    cfg: &NetworkConfig,
    weights: &[f64],
    p_max: f64,
    g_min: f64,
    mode: Mode,
    exec: ExecMode,
) -> Result<Solution, Error> {
    let spec = ProblemSpec {
        cfg: cfg.clone(),
        weights: weights.to_vec(),
        g_min,
        p_max,
    };
    match mode {
        Mode::HapcSr => optimize_with(&spec, exec),
        Mode::SrBaseline => optimize_sr_baseline_with(&spec, exec),
    }
}

/// Runs a sweep: every (curve, axis value, mode) point is optimized, then
/// gain-floor curves are chained right-to-left and power curves left-to-
/// right so neighboring optima inform each other. Row order in the output
/// is curves outermost, axis values ascending, modes innermost.
pub fn run_sweep(spec: &SweepSpec, exec: ExecMode) -> Result<SweepResult, Error> {
    spec.validate()?;
    build_channels(&spec.cfg)?;

    let mut tasks: Vec<(usize, usize, usize)> = Vec::new();
    for f in 0..spec.fixed.len() {
        for v in 0..spec.values.len() {
            for m in 0..spec.modes.len() {
                tasks.push((f, v, m));
            }
        }
    }

    let solved = map_indexed(exec, &tasks, |&(f, v, m)| {
        let (p_max, g_min) = spec.point(spec.fixed[f], spec.values[v]);
        run_point(&spec.cfg, &spec.weights, p_max, g_min, spec.modes[m], exec)
    });
    let mut solutions = Vec::with_capacity(solved.len());
    for s in solved {
        solutions.push(s?);
    }

    chain_neighbors(spec, &tasks, &mut solutions)?;

    let mut rows = Vec::with_capacity(tasks.len());
    for (i, &(f, v, m)) in tasks.iter().enumerate() {
        let (p_max, g_min) = spec.point(spec.fixed[f], spec.values[v]);
        rows.push(SweepRow {
            fixed: spec.fixed[f],
            axis_value: spec.values[v],
            mode: spec.modes[m],
            p_max,
            g_min,
            solution: solutions[i].clone(),
        });
    }

    let csv = render_csv(spec, &rows);
    Ok(SweepResult { spec: spec.clone(), rows, csv })
}

/// Second pass: walk each curve and offer every point its neighbor's
/// solution. Gain-floor curves walk downward, where the neighbor's
/// allocation stays feasible verbatim; power curves walk upward and only
/// reuse the neighbor's (alpha, q) as a warm start.
fn chain_neighbors(
    spec: &SweepSpec,
    tasks: &[(usize, usize, usize)],
    solutions: &mut [Solution],
) -> Result<(), Error> {
    let ch = build_channels(&spec.cfg)?;
    let index = |f: usize, v: usize, m: usize| {
        tasks
            .iter()
            .position(|t| *t == (f, v, m))
            .expect("task list covers the full grid")
    };
    for f in 0..spec.fixed.len() {
        for m in 0..spec.modes.len() {
            let mode = spec.modes[m];
            let baseline = mode == Mode::SrBaseline;
            let status = if baseline {
                SolveStatus::BaselineRestricted
            } else {
                SolveStatus::OptimalCandidate
            };
            let order: Vec<usize> = match spec.axis {
                Axis::GMin => (0..spec.values.len()).rev().collect(),
                Axis::PMax => (0..spec.values.len()).collect(),
            };
            let mut prev: Option<usize> = None;
            for &v in &order {
                let here = index(f, v, m);
                if let Some(p) = prev {
                    let (p_max, g_min) = spec.point(spec.fixed[f], spec.values[v]);
                    let point_spec = ProblemSpec {
                        cfg: spec.cfg.clone(),
                        weights: spec.weights.clone(),
                        g_min,
                        p_max,
                    };
                    let neighbor = solutions[p].clone();
                    if neighbor.is_feasible() {
                        let mut candidates: Vec<Solution> = Vec::new();
                        if spec.axis == Axis::GMin {
                            // relaxing the floor keeps the allocation feasible
                            // and its objective bitwise identical
                            if let Some(c) =
                                carry_allocation(&point_spec, &ch, &neighbor.alloc, status)
                            {
                                candidates.push(c);
                            }
                        }
                        if let Some(c) = optimize_warm(
                            &point_spec,
                            &ch,
                            &neighbor.alloc.alpha,
                            &neighbor.alloc.q_w,
                            baseline,
                        ) {
                            candidates.push(c);
                        }
                        for cand in candidates {
                            let cur = &solutions[here];
                            let take = !cur.is_feasible()
                                || strictly_better(
                                    cand.objective,
                                    &cand.alloc,
                                    cur.objective,
                                    &cur.alloc,
                                );
                            if take {
                                let trace = cur.trace.clone();
                                let mut cand = cand;
                                cand.trace = trace;
                                solutions[here] = cand;
                            }
                        }
                    }
                }
                prev = Some(here);
            }
        }
    }
    Ok(())
}

// ==================== rendering and audit ====================

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn render_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let cfg = &spec.cfg;
    let mut out = String::new();
    out.push_str(&format!("# sweep {}\n", spec.label));
    out.push_str(&format!("# axis = {}\n", spec.axis));
    out.push_str(&format!("# axis_values = {}\n", join(&spec.values)));
    out.push_str(&format!("# fixed_parameter = {}\n", spec.axis.fixed_name()));
    out.push_str(&format!("# fixed_values = {}\n", join(&spec.fixed)));
    let modes: Vec<String> = spec.modes.iter().map(|m| m.to_string()).collect();
    out.push_str(&format!("# modes = {}\n", modes.join(",")));
    out.push_str(&format!("# weights = {}\n", join(&spec.weights)));
    out.push_str(&format!("# devices = {}\n", cfg.device_count()));
    out.push_str(&format!("# bandwidth_hz = {}\n", cfg.bandwidth_hz));
    out.push_str(&format!("# noise_psd_dbm_hz = {}\n", cfg.noise_psd_dbm_hz));
    out.push_str(&format!("# eh_efficiency = {}\n", cfg.eh_efficiency));
    out.push_str(&format!("# circuit_power_bc_w = {}\n", cfg.circuit_power_bc_w));
    out.push_str(&format!("# circuit_power_ac_w = {}\n", cfg.circuit_power_ac_w));
    out.push_str(&format!("# device_power_cap_w = {}\n", match cfg.device_power_cap_w {
        Some(c) => format!("{c}"),
        None => "none".to_string(),
    }));
    out.push_str(&format!("# calibration spreading_factor = {}\n", cfg.spreading_factor));
    out.push_str(&format!("# calibration path_loss_ref_gain = {}\n", cfg.path_loss_ref_gain));
    out.push_str(&format!("# calibration path_loss_exponent = {}\n", cfg.path_loss_exponent));
    out.push_str(&format!("# calibration min_distance_m = {}\n", cfg.min_distance_m));
    out.push_str(&format!("# calibration bc_combining_gain = {}\n", cfg.bc_combining_gain));
    out.push_str(&format!("axis,mode,status,{}\n", rate::csv_header(cfg.device_count())));
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    out
}

fn format_row(row: &SweepRow) -> String {
    format!(
        "{},{},{},{}",
        row.axis_value,
        row.mode,
        row.solution.status,
        rate::csv_row(&row.solution.report, row.p_max, row.g_min)
    )
}

/// Re-derives every data row of a finished sweep from scratch: rebuilds
/// the channels, re-evaluates each stored allocation and re-renders the
/// row, then byte-compares against the CSV. Returns the number of rows
/// checked.
pub fn audit(result: &SweepResult) -> Result<usize, String> {
    let ch = build_channels(&result.spec.cfg).map_err(|e| e.to_string())?;
    let data_lines: Vec<&str> = result
        .csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect();
    let expected_header =
        format!("axis,mode,status,{}", rate::csv_header(result.spec.cfg.device_count()));
    if data_lines.first().copied() != Some(expected_header.as_str()) {
        return Err("header line does not match the scenario".to_string());
    }
    if data_lines.len() != result.rows.len() + 1 {
        return Err(format!(
            "{} data lines for {} rows",
            data_lines.len().saturating_sub(1),
            result.rows.len()
        ));
    }
    for (i, (row, line)) in result.rows.iter().zip(&data_lines[1..]).enumerate() {
        let fresh = evaluate(
            &result.spec.cfg,
            &ch,
            &row.solution.alloc,
            &result.spec.weights,
            row.g_min,
        );
        if row.solution.is_feasible() && !fresh.feasibility.feasible {
            return Err(format!(
                "row {i}: stored solution claims feasibility but re-evaluation disagrees"
            ));
        }
        let mut rebuilt = row.clone();
        rebuilt.solution.report = fresh;
        let expected = format_row(&rebuilt);
        if expected != *line {
            return Err(format!(
                "row {i} drifted\n stored: {line}\n fresh:  {expected}"
            ));
        }
    }
    Ok(result.rows.len())
}

// ==================== tests ====================
