//! Flat key-value scenario files.
//!
//! One `key = value` pair per line, `#` starts a comment, unknown keys are
//! rejected with their line number, and any key left out falls back to the
//! built-in reference scenario with the substitution recorded, so a run
//! can always say which numbers came from the file and which did not.

use std::fmt;
use std::io;
use std::path::Path;

use crate::error::Error;
use crate::phy::{NetworkConfig, Position};

/// Every key a scenario file may set, in canonical order.
pub const KEYS: [&str; 14] = [
    "source_pos",
    "receiver_pos",
    "device_pos",
    "bandwidth_hz",
    "noise_psd_dbm_hz",
    "eh_efficiency",
    "circuit_power_bc_w",
    "circuit_power_ac_w",
    "spreading_factor",
    "path_loss_ref_gain",
    "path_loss_exponent",
    "min_distance_m",
    "device_power_cap_w",
    "bc_combining_gain",
];

#[derive(Debug)]
pub enum ConfigError {
    Io { path: String, source: io::Error },
    Parse { line: usize, message: String },
    UnknownKey { line: usize, key: String },
    Range { key: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "cannot read {path}: {source}"),
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::UnknownKey { line, key } => {
                write!(f, "line {line}: unknown key '{key}'")
            }
            ConfigError::Range { key, message } => write!(f, "key '{key}': {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// What a load actually used: keys missing from the file and therefore
/// taken from the reference scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub defaulted_keys: Vec<&'static str>,
}

/// Reads and parses a scenario file.
pub fn load_config(path: &Path) -> Result<(NetworkConfig, LoadReport), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Parses scenario text. Missing keys default to the reference scenario
/// and are listed in the report; unknown or duplicate keys are errors.
pub fn parse_config(text: &str) -> Result<(NetworkConfig, LoadReport), ConfigError> {
    let mut cfg = NetworkConfig::reference();
    let mut seen: Vec<(&'static str, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let canonical = match KEYS.iter().find(|k| **k == key) {
            Some(k) => *k,
            None => return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() }),
        };
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == canonical) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key '{key}', first set on line {first}"),
            });
        }
        seen.push((canonical, line_no));
        apply(&mut cfg, canonical, value, line_no)?;
    }

    cfg.validate().map_err(|e| match e {
        Error::InvalidConfig { field, message } => {
            ConfigError::Range { key: field.to_string(), message }
        }
        other => ConfigError::Range { key: "scenario".to_string(), message: other.to_string() },
    })?;

    let defaulted_keys = KEYS
        .iter()
        .filter(|k| !seen.iter().any(|(s, _)| s == *k))
        .copied()
        .collect();
    Ok((cfg, LoadReport { defaulted_keys }))
}

fn apply(
    cfg: &mut NetworkConfig,
    key: &'static str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    match key {
        "source_pos" => cfg.source_pos = parse_position(value, line)?,
        "receiver_pos" => cfg.receiver_pos = parse_position(value, line)?,
        "device_pos" => {
            let mut devices = Vec::new();
            for part in value.split(';') {
                devices.push(parse_position(part, line)?);
            }
            cfg.device_pos = devices;
        }
        "bandwidth_hz" => cfg.bandwidth_hz = parse_f64(value, line)?,
        "noise_psd_dbm_hz" => cfg.noise_psd_dbm_hz = parse_f64(value, line)?,
        "eh_efficiency" => cfg.eh_efficiency = parse_f64(value, line)?,
        "circuit_power_bc_w" => cfg.circuit_power_bc_w = parse_f64(value, line)?,
        "circuit_power_ac_w" => cfg.circuit_power_ac_w = parse_f64(value, line)?,
        "spreading_factor" => {
            cfg.spreading_factor = value.parse().map_err(|_| ConfigError::Parse {
                line,
                message: format!("'{value}' is not a positive integer"),
            })?;
        }
        "path_loss_ref_gain" => cfg.path_loss_ref_gain = parse_f64(value, line)?,
        "path_loss_exponent" => cfg.path_loss_exponent = parse_f64(value, line)?,
        "min_distance_m" => cfg.min_distance_m = parse_f64(value, line)?,
        "device_power_cap_w" => {
            cfg.device_power_cap_w =
                if value == "none" { None } else { Some(parse_f64(value, line)?) };
        }
        "bc_combining_gain" => {
            cfg.bc_combining_gain = match value {
                "true" => true,
                "false" => false,
                other => {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("'{other}' is not 'true' or 'false'"),
                    })
                }
            };
        }
        _ => unreachable!("key list and dispatch are maintained together"),
    }
    Ok(())
}

fn parse_f64(value: &str, line: usize) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse {
        line,
        message: format!("'{value}' is not a number"),
    })
}

fn parse_position(value: &str, line: usize) -> Result<Position, ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(ConfigError::Parse {
            line,
            message: format!("position needs exactly 'x,y', got '{}'", value.trim()),
        });
    }
    Ok(Position::new(parse_f64(parts[0], line)?, parse_f64(parts[1], line)?))
}

// ==================== tests ====================

#[cfg(test)]
mod tests {
    use super::*;

    const SHIPPED: &str = include_str!("../../scenarios/default.conf");

    #[test]
    fn shipped_scenario_round_trips_to_the_reference() {
        let (cfg, report) = parse_config(SHIPPED).unwrap();
        assert_eq!(cfg, NetworkConfig::reference());
        assert!(report.defaulted_keys.is_empty(), "shipped file must set every key");
    }

    #[test]
    fn empty_text_defaults_every_key()  {
        let (cfg, report) = parse_config("").unwrap();
        assert_eq!(cfg, NetworkConfig::reference());
        assert_eq!(report.defaulted_keys.len(), KEYS.len());
    }

    #[test]
    fn partial_file_reports_only_missing_keys() {
        let (cfg, report) = parse_config("bandwidth_hz = 20000\n").unwrap();
        assert_eq!(cfg.bandwidth_hz, 20000.0);
        assert!(!report.defaulted_keys.contains(&"bandwidth_hz"));
        assert!(report.defaulted_keys.contains(&"eh_efficiency"));
        assert_eq!(report.defaulted_keys.len(), KEYS.len() - 1);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\n# full line comment\n  bandwidth_hz = 20000  # trailing comment\n\n";
        let (cfg, _) = parse_config(text).unwrap();
        assert_eq!(cfg.bandwidth_hz, 20000.0);
    }

    #[test]
    fn scientific_notation_parses() {
        let (cfg, _) = parse_config("circuit_power_bc_w = 1e-5").unwrap();
        assert_eq!(cfg.circuit_power_bc_w, 1e-5);
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let err = parse_config("bandwidth_hz = 1000\nbandwdith_hz = 2000\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "bandwdith_hz");
            }
            other => panic!("expected UnknownKey, got {other}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_config("bandwidth_hz = 1\nbandwidth_hz = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_config("bandwidth_hz 10000\n").is_err());
        assert!(parse_config("source_pos = 1,2,3\n").is_err());
        assert!(parse_config("bandwidth_hz = fast\n").is_err());
        assert!(parse_config("bc_combining_gain = yes\n").is_err());
        assert!(parse_config("spreading_factor = 1.5\n").is_err());
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        let err = parse_config("bandwidth_hz = -5\n").unwrap_err();
        match err {
            ConfigError::Range { key, .. } => assert_eq!(key, "bandwidth_hz"),
            other => panic!("expected Range, got {other}"),
        }
    }

    #[test]
    fn device_list_and_cap_parse() {
        let text = "device_pos = 1,2 ; 3,4 ; 5,6\ndevice_power_cap_w = 0.25\n";
        let (cfg, _) = parse_config(text).unwrap();
        assert_eq!(cfg.device_pos.len(), 3);
        assert_eq!(cfg.device_pos[2], Position::new(5.0, 6.0));
        assert_eq!(cfg.device_power_cap_w, Some(0.25));

        let (cfg, _) = parse_config("device_power_cap_w = none\n").unwrap();
        assert_eq!(cfg.device_power_cap_w, None);
    }
}
