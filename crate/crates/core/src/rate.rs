//! Per-phase achievable rates, the per-device energy ledger and feasibility
//! evaluation of candidate allocations.
//!
//! A unit scheduling block (1 s) is divided into per-device backscatter
//! slots `tau_bc[k]`, per-device active-uplink slots `tau_ac[k]` and idle
//! slack. Rates follow the Shannon forms implied by the decoding order in
//! each phase:
//!
//! - backscatter slot: the receiver decodes the source first, treating the
//!   reflected path as constructive multipath, then the device symbol after
//!   removing the source signal;
//! - active slot: the receiver decodes the source first, treating the
//!   device uplink as interference, then the device after cancellation.
//!
//! The device backscatter symbol spans N source symbols, which divides its
//! rate by N. Whether despreading also collects an N-fold SNR gain inside
//! the logarithm is a modelling convention; both are supported via
//! `NetworkConfig::bc_combining_gain`.
//!
//! All block-level quantities use the 1 s block, so power in W and energy
//! in J coincide numerically.

use std::fmt;

use crate::phy::{harvested_power, ChannelSet, NetworkConfig};

// ==================== tolerances and envelope ====================

/// C3 floor: a served device must clear this rate, bit/s.
pub const EPS_RATE: f64 = 1e-9;
/// Slop accepted on the unit time budget.
pub const EPS_TIME: f64 = 1e-9;
/// Slop accepted on box constraints (tau >= 0, alpha in [0,1], q >= 0).
pub const EPS_BOX: f64 = 1e-9;
/// Slop accepted on energy causality, joules.
pub const EPS_ENERGY_J: f64 = 1e-12;
/// Relative slop accepted on the rate-gain floor, scaled by (1 + g_min).
pub const EPS_GAIN: f64 = 1e-9;

/// Ambient-IoT target rate envelope, bit/s. Boundaries are inclusive.
pub const ENVELOPE_LO_BPS: f64 = 100.0;
pub const ENVELOPE_HI_BPS: f64 = 5000.0;

/// True when `rate_bps` lies inside the ambient-IoT envelope, boundary
/// values included.
pub fn in_envelope(rate_bps: f64) -> bool {
    (ENVELOPE_LO_BPS..=ENVELOPE_HI_BPS).contains(&rate_bps)
}

// ==================== allocation ====================

/// One candidate resource allocation over the unit block. Plain data:
/// nothing is validated on construction, `evaluate` reports violations
/// instead of rejecting.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Backscatter time share per device.
    pub tau_bc: Vec<f64>,
    /// Active-uplink time share per device.
    pub tau_ac: Vec<f64>,
    /// Reflection coefficient per device, nominal range [0, 1].
    pub alpha: Vec<f64>,
    /// Active transmit power per device, W.
    pub q_w: Vec<f64>,
    /// Ambient-source transmit power, W, fixed at its cap for the block.
    pub p_src_w: f64,
}

impl Allocation {
    /// All-idle allocation: the whole block is harvesting slack.
    pub fn idle(devices: usize, p_src_w: f64) -> Self {
        Allocation {
            tau_bc: vec![0.0; devices],
            tau_ac: vec![0.0; devices],
            alpha: vec![0.0; devices],
            q_w: vec![0.0; devices],
            p_src_w,
        }
    }

    pub fn device_count(&self) -> usize {
        self.tau_bc.len()
    }

    /// Total scheduled time over the unit block.
    pub fn total_time(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.tau_bc.len() {
            s += self.tau_bc[k] + self.tau_ac[k];
        }
        s
    }

    /// Idle remainder of the block, clamped at zero so that downstream
    /// energy terms stay meaningful even for over-committed candidates
    /// (which are flagged through the time-budget check instead).
    pub fn slack(&self) -> f64 {
        (1.0 - self.total_time()).max(0.0)
    }
}

// ==================== rate operations ====================

/// Legacy source rate with every device idle:
/// `B log2(1 + p g_sr / sigma^2)`.
pub fn legacy_rate_baseline(p_w: f64, ch: &ChannelSet, b_hz: f64) -> f64 {
    b_hz * (1.0 + p_w * ch.g_sr / ch.noise_w).log2()
}

/// Legacy source rate while device k backscatters: the reflected path adds
/// constructively, `B log2(1 + (p g_sr + alpha p g_sd g_dr) / sigma^2)`.
/// Never below the baseline.
pub fn legacy_rate_mutualism(p_w: f64, k: usize, alpha_k: f64, ch: &ChannelSet, b_hz: f64) -> f64 {
    let direct = p_w * ch.g_sr;
    let reflected = alpha_k * p_w * ch.g_sd[k] * ch.g_dr[k];
    b_hz * (1.0 + (direct + reflected) / ch.noise_w).log2()
}

/// Device k backscatter rate. One device symbol spans `n` source symbols,
/// so the prefactor is `B / n`; with `combining_gain` the receiver also
/// collects an n-fold SNR gain inside the logarithm.
pub fn backscatter_rate(
    p_w: f64,
    k: usize,
    alpha_k: f64,
    n: u32,
    combining_gain: bool,
    ch: &ChannelSet,
    b_hz: f64,
) -> f64 {
    let n = f64::from(n);
    let snr = alpha_k * p_w * ch.g_sd[k] * ch.g_dr[k] / ch.noise_w;
    let inside = if combining_gain { n * snr } else { snr };
    b_hz / n * (1.0 + inside).log2()
}

/// Legacy source rate while device k transmits actively: the uplink is
/// decoded later, so it degrades the source as interference,
/// `B log2(1 + p g_sr / (sigma^2 + q g_dr))`. Never above the baseline.
pub fn legacy_rate_noma(p_w: f64, k: usize, q_k_w: f64, ch: &ChannelSet, b_hz: f64) -> f64 {
    b_hz * (1.0 + p_w * ch.g_sr / (ch.noise_w + q_k_w * ch.g_dr[k])).log2()
}

/// Device k active-uplink rate after the source signal is cancelled:
/// `B log2(1 + q g_dr / sigma^2)`.
pub fn active_rate(k: usize, q_k_w: f64, ch: &ChannelSet, b_hz: f64) -> f64 {
    b_hz * (1.0 + q_k_w * ch.g_dr[k] / ch.noise_w).log2()
}

// ==================== energy ledger ====================

/// Per-device harvested and consumed energy over the unit block, J.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub harvested_j: Vec<f64>,
    pub consumed_j: Vec<f64>,
    /// `harvested_j - consumed_j`, the exact difference.
    pub slack_j: Vec<f64>,
}

/// Accounts energy per device over the block. A device harvests the
/// `1 - alpha` fraction during its own backscatter slot, harvests fully
/// from the legacy signal while other devices hold the block or the block
/// idles, and harvests nothing during its own active slot. Consumption is
/// circuit power per mode plus the active transmit power.
pub fn energy_ledger(cfg: &NetworkConfig, ch: &ChannelSet, alloc: &Allocation) -> EnergyLedger {
    let devices = alloc.device_count();
    let p = alloc.p_src_w;
    let slack = alloc.slack();
    let total = alloc.total_time();
    let mut harvested_j = Vec::with_capacity(devices);
    let mut consumed_j = Vec::with_capacity(devices);
    let mut slack_j = Vec::with_capacity(devices);
    for k in 0..devices {
        let own = alloc.tau_bc[k] + alloc.tau_ac[k];
        let other_slots = total - own;
        let h = harvested_power(p, ch.g_sd[k], cfg.eh_efficiency, 1.0 - alloc.alpha[k])
            * alloc.tau_bc[k]
            + harvested_power(p, ch.g_sd[k], cfg.eh_efficiency, 1.0) * (other_slots + slack);
        let c = cfg.circuit_power_bc_w * alloc.tau_bc[k]
            + (alloc.q_w[k] + cfg.circuit_power_ac_w) * alloc.tau_ac[k];
        harvested_j.push(h);
        consumed_j.push(c);
        slack_j.push(h - c);
    }
    EnergyLedger { harvested_j, consumed_j, slack_j }
}

// ==================== feasibility ====================

/// Identifies one violated constraint in a feasibility verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintId {
    /// Source rate gain below its floor.
    GainFloor,
    /// Device consumed more than it harvested.
    EnergyCausality(usize),
    /// Device served below the minimum positive rate.
    DeviceRateFloor(usize),
    /// Scheduled time exceeds the unit block.
    TimeBudget,
    TauBcBox(usize),
    TauAcBox(usize),
    AlphaBox(usize),
    PowerBox(usize),
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::GainFloor => write!(f, "gain_floor"),
            ConstraintId::EnergyCausality(k) => write!(f, "energy_causality[{k}]"),
            ConstraintId::DeviceRateFloor(k) => write!(f, "device_rate_floor[{k}]"),
            ConstraintId::TimeBudget => write!(f, "time_budget"),
            ConstraintId::TauBcBox(k) => write!(f, "tau_bc_box[{k}]"),
            ConstraintId::TauAcBox(k) => write!(f, "tau_ac_box[{k}]"),
            ConstraintId::AlphaBox(k) => write!(f, "alpha_box[{k}]"),
            ConstraintId::PowerBox(k) => write!(f, "q_box[{k}]"),
        }
    }
}

/// Verdict plus the list of violated constraints, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<ConstraintId>,
}

// ==================== evaluation ====================

/// Everything measurable about one allocation on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Block-level device rate, bit/s: `tau_bc r_bc + tau_ac r_ac`.
    pub rate_device: Vec<f64>,
    /// Block-level source rate across all phases, bit/s.
    pub rate_source: f64,
    /// Source rate had every device stayed idle all block, bit/s.
    pub rate_source_baseline: f64,
    /// `rate_source - rate_source_baseline`, the exact difference.
    pub rate_gain: f64,
    /// Objective value `sum_k weights[k] * rate_device[k]`.
    pub weighted_sum: f64,
    pub ledger: EnergyLedger,
    pub feasibility: Feasibility,
    /// Per device: block rate inside the ambient-IoT envelope.
    pub in_aiot_envelope: Vec<bool>,
}

/// Evaluates one allocation: per-phase rates, energy ledger, feasibility
/// verdict. Pure; never rejects an allocation, only reports on it.
pub fn evaluate(
    cfg: &NetworkConfig,
    ch: &ChannelSet,
    alloc: &Allocation,
    weights: &[f64],
    g_min: f64,
) -> RateReport {
    let devices = alloc.device_count();
    assert_eq!(weights.len(), devices, "one weight per device");
    assert_eq!(ch.device_count(), devices, "channel set must match allocation");
    let b = cfg.bandwidth_hz;
    let p = alloc.p_src_w;

    let r0 = legacy_rate_baseline(p, ch, b);
    let mut rate_device = Vec::with_capacity(devices);
    for k in 0..devices {
        let r_bc = backscatter_rate(
            p,
            k,
            alloc.alpha[k],
            cfg.spreading_factor,
            cfg.bc_combining_gain,
            ch,
            b,
        );
        let r_ac = active_rate(k, alloc.q_w[k], ch, b);
        rate_device.push(alloc.tau_bc[k] * r_bc + alloc.tau_ac[k] * r_ac);
    }
    let mut rate_source = 0.0;
    for k in 0..devices {
        rate_source += alloc.tau_bc[k] * legacy_rate_mutualism(p, k, alloc.alpha[k], ch, b);
    }
    for k in 0..devices {
        rate_source += alloc.tau_ac[k] * legacy_rate_noma(p, k, alloc.q_w[k], ch, b);
    }
    rate_source += alloc.slack() * r0;
    let rate_gain = rate_source - r0;

    let mut weighted_sum = 0.0;
    for k in 0..devices {
        weighted_sum += weights[k] * rate_device[k];
    }

    let ledger = energy_ledger(cfg, ch, alloc);

    let mut violations = Vec::new();
    if rate_gain < g_min - EPS_GAIN * (1.0 + g_min) {
        violations.push(ConstraintId::GainFloor);
    }
    for k in 0..devices {
        if ledger.consumed_j[k] > ledger.harvested_j[k] + EPS_ENERGY_J {
            violations.push(ConstraintId::EnergyCausality(k));
        }
    }
    for (k, r) in rate_device.iter().enumerate() {
        if *r < EPS_RATE {
            violations.push(ConstraintId::DeviceRateFloor(k));
        }
    }
    if alloc.total_time() > 1.0 + EPS_TIME {
        violations.push(ConstraintId::TimeBudget);
    }
    for k in 0..devices {
        if alloc.tau_bc[k] < -EPS_BOX {
            violations.push(ConstraintId::TauBcBox(k));
        }
        if alloc.tau_ac[k] < -EPS_BOX {
            violations.push(ConstraintId::TauAcBox(k));
        }
        if alloc.alpha[k] < -EPS_BOX || alloc.alpha[k] > 1.0 + EPS_BOX {
            violations.push(ConstraintId::AlphaBox(k));
        }
        if alloc.q_w[k] < -EPS_BOX {
            violations.push(ConstraintId::PowerBox(k));
        }
    }

    let in_aiot_envelope = rate_device.iter().map(|&r| in_envelope(r)).collect();

    RateReport {
        rate_device,
        rate_source,
        rate_source_baseline: r0,
        rate_gain,
        weighted_sum,
        ledger,
        feasibility: Feasibility { feasible: violations.is_empty(), violations },
        in_aiot_envelope,
    }
}

// ==================== csv contract ====================

/// Fixed column order for one report row. Per-device columns are numbered
/// from 1. Dialect: comma separated, `.` decimal point, LF line endings,
/// floats printed with shortest round-trip formatting.
pub fn csv_header(devices: usize) -> String {
    let mut cols = vec![
        "p_max".to_string(),
        "g_min".to_string(),
        "weighted_sum".to_string(),
        "rate_source".to_string(),
        "rate_gain".to_string(),
    ];
    for k in 1..=devices {
        cols.push(format!("rate_d{k}"));
        cols.push(format!("harvested_j{k}"));
        cols.push(format!("consumed_j{k}"));
    }
    cols.push("feasible".to_string());
    cols.push("violations".to_string());
    for k in 1..=devices {
        cols.push(format!("envelope_d{k}"));
    }
    cols.join(",")
}

/// One CSV row matching [`csv_header`].
pub fn csv_row(report: &RateReport, p_max: f64, g_min: f64) -> String {
    let mut cols = vec![
        format!("{p_max}"),
        format!("{g_min}"),
        format!("{}", report.weighted_sum),
        format!("{}", report.rate_source),
        format!("{}", report.rate_gain),
    ];
    for k in 0..report.rate_device.len() {
        cols.push(format!("{}", report.rate_device[k]));
        cols.push(format!("{}", report.ledger.harvested_j[k]));
        cols.push(format!("{}", report.ledger.consumed_j[k]));
    }
    cols.push(format!("{}", report.feasibility.feasible));
    let viol: Vec<String> = report.feasibility.violations.iter().map(|v| v.to_string()).collect();
    cols.push(viol.join(";"));
    for flag in &report.in_aiot_envelope {
        cols.push(format!("{flag}"));
    }
    cols.join(",")
}

// ==================== tests ====================
