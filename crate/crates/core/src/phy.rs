//! Deterministic channel and energy-harvesting primitives.
//!
//! Geometry lives in a 2-D plane. Every link follows a log-distance
//! path-loss law `L(d) = L0 * max(d, d_min)^-kappa` with no fading, so
//! channel gains are pure functions of the scenario and every downstream
//! result is reproducible. `L0`, `kappa`, `d_min` and the spreading factor
//! are calibration knobs, not measured quantities; they are echoed in every
//! report header so plots are never read without them.

use crate::error::Error;

// ==================== scenario types ====================

/// A point in the scenario plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }
}

/// Full scenario description: geometry, RF parameters and device hardware
/// parameters. This is the single source of truth for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub source_pos: Position,
    pub receiver_pos: Position,
    /// One entry per ambient IoT device, K >= 1.
    pub device_pos: Vec<Position>,
    /// Shared channel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Receiver noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// RF-to-DC energy conversion efficiency, in (0, 1].
    pub eh_efficiency: f64,
    /// Circuit power drawn while backscattering, W.
    pub circuit_power_bc_w: f64,
    /// Circuit power drawn while transmitting actively, W.
    pub circuit_power_ac_w: f64,
    /// Backscatter spreading factor N: one device symbol spans N source
    /// symbols. Calibration default, surfaced in report headers.
    pub spreading_factor: u32,
    /// Path gain at the reference distance of 1 m.
    pub path_loss_ref_gain: f64,
    /// Path-loss exponent.
    pub path_loss_exponent: f64,
    /// Distances below this clamp to it. Zero disables clamping, in which
    /// case coincident endpoints are rejected by `build_channels`.
    pub min_distance_m: f64,
    /// Optional hard cap on device active transmit power, W. When absent
    /// the allocator derives a finite cap from the harvestable power.
    pub device_power_cap_w: Option<f64>,
    /// Whether the receiver despreads coherently over the N-symbol block,
    /// putting an N-fold gain inside the backscatter-rate logarithm.
    pub bc_combining_gain: bool,
}

impl NetworkConfig {
    /// Reference two-device scenario used by the shipped experiments:
    /// source at the origin, receiver 100 m away, devices within a meter
    /// of the source.
    pub fn reference() -> Self {
        NetworkConfig {
            source_pos: Position::new(0.0, 0.0),
            receiver_pos: Position::new(100.0, 1.0),
            device_pos: vec![Position::new(0.8, 0.0), Position::new(0.0, 1.0)],
            bandwidth_hz: 10_000.0,
            noise_psd_dbm_hz: -90.0,
            eh_efficiency: 0.8,
            circuit_power_bc_w: 1e-5,
            circuit_power_ac_w: 1e-3,
            spreading_factor: 128,
            path_loss_ref_gain: 1e-3,
            path_loss_exponent: 2.7,
            min_distance_m: 1.0,
            device_power_cap_w: None,
            bc_combining_gain: false,
        }
    }

    pub fn device_count(&self) -> usize {
        self.device_pos.len()
    }

    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<(), Error> {
        fn finite(v: f64) -> bool {
            v.is_finite()
        }
        let bad = |field: &'static str, message: String| Err(Error::InvalidConfig { field, message });

        for (name, p) in [("source_pos", self.source_pos), ("receiver_pos", self.receiver_pos)] {
            if !finite(p.x) || !finite(p.y) {
                return bad("position", format!("{name} must have finite coordinates"));
            }
        }
        if self.device_pos.is_empty() {
            return bad("device_pos", "at least one device is required".into());
        }
        for (k, p) in self.device_pos.iter().enumerate() {
            if !finite(p.x) || !finite(p.y) {
                return bad("device_pos", format!("device {k} must have finite coordinates"));
            }
        }
        if !(self.bandwidth_hz > 0.0 && finite(self.bandwidth_hz)) {
            return bad("bandwidth_hz", format!("must be positive, got {}", self.bandwidth_hz));
        }
        if !finite(self.noise_psd_dbm_hz) {
            return bad("noise_psd_dbm_hz", "must be finite".into());
        }
        if !(self.eh_efficiency > 0.0 && self.eh_efficiency <= 1.0) {
            return bad("eh_efficiency", format!("must be in (0, 1], got {}", self.eh_efficiency));
        }
        if !(self.circuit_power_bc_w > 0.0 && finite(self.circuit_power_bc_w)) {
            return bad("circuit_power_bc_w", format!("must be positive, got {}", self.circuit_power_bc_w));
        }
        if !(self.circuit_power_ac_w > 0.0 && finite(self.circuit_power_ac_w)) {
            return bad("circuit_power_ac_w", format!("must be positive, got {}", self.circuit_power_ac_w));
        }
        if self.spreading_factor < 1 {
            return bad("spreading_factor", "must be at least 1".into());
        }
        if !(self.path_loss_ref_gain > 0.0 && finite(self.path_loss_ref_gain)) {
            return bad("path_loss_ref_gain", format!("must be positive, got {}", self.path_loss_ref_gain));
        }
        if !(self.path_loss_exponent >= 0.0 && finite(self.path_loss_exponent)) {
            return bad("path_loss_exponent", format!("must be nonnegative, got {}", self.path_loss_exponent));
        }
        if !(self.min_distance_m >= 0.0 && finite(self.min_distance_m)) {
            return bad("min_distance_m", format!("must be nonnegative, got {}", self.min_distance_m));
        }
        if let Some(cap) = self.device_power_cap_w {
            if !(cap > 0.0 && finite(cap)) {
                return bad("device_power_cap_w", format!("must be positive when set, got {cap}"));
            }
        }
        Ok(())
    }
}

/// Channel gains and noise power derived from a scenario. Linear power
/// gains, not dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Source to receiver.
    pub g_sr: f64,
    /// Source to device k.
    pub g_sd: Vec<f64>,
    /// Device k to receiver.
    pub g_dr: Vec<f64>,
    /// Noise power over the full bandwidth, W.
    pub noise_w: f64,
}

impl ChannelSet {
    pub fn device_count(&self) -> usize {
        self.g_sd.len()
    }
}

// ==================== operations ====================

/// Euclidean distance between two points, meters.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Log-distance path gain `l0 * max(d, d_min)^-kappa`, linear scale.
/// Monotone nonincreasing in `d`; the clamp keeps near-field distances
/// from producing gains above `l0`.
pub fn path_gain(d_m: f64, l0: f64, kappa: f64, d_min_m: f64) -> f64 {
    l0 * d_m.max(d_min_m).powf(-kappa)
}

/// Noise power in W over bandwidth `b_hz` for a noise density given in
/// dBm/Hz: `10^((psd + 10 log10 B - 30) / 10)`.
pub fn noise_power(psd_dbm_hz: f64, b_hz: f64) -> f64 {
    10f64.powf((psd_dbm_hz + 10.0 * b_hz.log10() - 30.0) / 10.0)
}

/// Harvested DC power at a device: `eta * share * p_tx * gain`.
/// `harvest_share` is the fraction of incident power left to the
/// harvester (1 while idle, `1 - alpha` while backscattering).
pub fn harvested_power(p_tx_w: f64, gain: f64, eta: f64, harvest_share: f64) -> f64 {
    eta * harvest_share * p_tx_w * gain
}

/// Derives every link gain and the noise power from a scenario.
/// Deterministic: equal configs produce bitwise-equal channel sets.
pub fn build_channels(cfg: &NetworkConfig) -> Result<ChannelSet, Error> {
    cfg.validate()?;
    let l0 = cfg.path_loss_ref_gain;
    let kappa = cfg.path_loss_exponent;
    let d_min = cfg.min_distance_m;

    let gain_for = |a: Position, b: Position, link: &str| -> Result<f64, Error> {
        let d = distance(a, b);
        if d.max(d_min) == 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "{link} distance is zero and distance clamping is disabled"
            )));
        }
        Ok(path_gain(d, l0, kappa, d_min))
    };

    let g_sr = gain_for(cfg.source_pos, cfg.receiver_pos, "source-receiver")?;
    let mut g_sd = Vec::with_capacity(cfg.device_count());
    let mut g_dr = Vec::with_capacity(cfg.device_count());
    for (k, &dev) in cfg.device_pos.iter().enumerate() {
        g_sd.push(gain_for(cfg.source_pos, dev, &format!("source-device{k}"))?);
        g_dr.push(gain_for(dev, cfg.receiver_pos, &format!("device{k}-receiver"))?);
    }

    Ok(ChannelSet {
        g_sr,
        g_sd,
        g_dr,
        noise_w: noise_power(cfg.noise_psd_dbm_hz, cfg.bandwidth_hz),
    })
}

// ==================== tests ====================
