//! Command line front end: evaluate, optimize, sweep, cross-check.
//!
//! Exit codes: 0 on success, 1 when a solve finishes but nothing is
//! feasible, 2 for configuration or usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hapc_sr::allocator::{optimize_sr_baseline_with, optimize_with, ProblemSpec};
use hapc_sr::exec::ExecMode;
use hapc_sr::experiments::{self, config, Axis, Mode, SweepSpec};
use hapc_sr::oracle::{self, GridSpec};
use hapc_sr::phy::{build_channels, NetworkConfig};
use hapc_sr::rate::{evaluate, Allocation, RateReport};

#[derive(Parser)]
#[command(
    name = "hapc-sr",
    version,
    about = "Link model and resource allocator for hybrid active-passive symbiotic radio"
)]
struct Cli {
    /// Scenario file; omitted keys fall back to the built-in reference
    /// scenario and are reported on stderr.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Reserved for future randomized scenario generation; everything the
    /// tool computes today is deterministic and ignores it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run batch work sequentially even in builds with parallel support.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one explicit allocation and print its full report.
    Rates {
        /// Backscatter time share per device, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        tau_bc: Vec<f64>,
        /// Active-transmission time share per device.
        #[arg(long, value_delimiter = ',', required = true)]
        tau_ac: Vec<f64>,
        /// Reflection coefficient per device, in [0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        /// Active uplink power per device, W.
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<f64>,
        /// Source transmit power, W.
        #[arg(long, default_value_t = 1.0)]
        p_src: f64,
        /// Source rate-gain floor, bit/s.
        #[arg(long, default_value_t = 0.0)]
        g_min: f64,
        /// Device weights; defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Optimize one operating point and print the solution.
    Optimize {
        /// Source transmit power, W.
        #[arg(long, default_value_t = 1.0)]
        p_max: f64,
        /// Source rate-gain floor, bit/s.
        #[arg(long, default_value_t = 0.0)]
        g_min: f64,
        /// Device weights; defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Operating mode: hapc_sr or sr_baseline.
        #[arg(long, default_value = "hapc_sr")]
        mode: String,
    },
    /// Sweep an axis and write a CSV table.
    Sweep {
        /// Named sweep: fig4a, fig4b or fig4c.
        #[arg(long, conflicts_with_all = ["axis", "values", "fixed"])]
        preset: Option<String>,
        /// Swept parameter: p_max or g_min.
        #[arg(long)]
        axis: Option<String>,
        /// Axis values, ascending, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Values of the other parameter, one curve each.
        #[arg(long, value_delimiter = ',')]
        fixed: Option<Vec<f64>>,
        /// Modes to run; defaults to both.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<String>>,
        /// Device weights; defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-derive every row from scratch and byte-compare.
        #[arg(long)]
        audit: bool,
    },
    /// Exhaustive grid reference and its gap to the optimizer.
    Oracle {
        /// Source transmit power, W.
        #[arg(long, default_value_t = 1.0)]
        p_max: f64,
        /// Source rate-gain floor, bit/s.
        #[arg(long, default_value_t = 0.0)]
        g_min: f64,
        /// Points per time-share axis.
        #[arg(long, default_value_t = 9)]
        n_tau: usize,
        /// Points per reflection coefficient.
        #[arg(long, default_value_t = 9)]
        n_alpha: usize,
        /// Points per uplink power.
        #[arg(long, default_value_t = 9)]
        n_q: usize,
        /// Device weights; defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let exec = if cli.sequential { ExecMode::Sequential } else { ExecMode::default() };
    let cfg = match &cli.config {
        Some(path) => {
            let (cfg, report) = config::load_config(path).map_err(|e| e.to_string())?;
            if !report.defaulted_keys.is_empty() {
                eprintln!(
                    "note: keys defaulted from the reference scenario: {}",
                    report.defaulted_keys.join(", ")
                );
            }
            cfg
        }
        None => NetworkConfig::reference(),
    };
    // deterministic tool; the seed is accepted for interface stability
    let _ = cli.seed;

    match cli.command {
        Command::Rates { tau_bc, tau_ac, alpha, q, p_src, g_min, weights } => {
            let weights = resolve_weights(weights, &cfg)?;
            let alloc = Allocation { tau_bc, tau_ac, alpha, q_w: q, p_src_w: p_src };
            if alloc.device_count() != cfg.device_count()
                || alloc.tau_ac.len() != cfg.device_count()
                || alloc.alpha.len() != cfg.device_count()
                || alloc.q_w.len() != cfg.device_count()
            {
                return Err(format!(
                    "allocation lists must all have {} entries",
                    cfg.device_count()
                ));
            }
            let ch = build_channels(&cfg).map_err(|e| e.to_string())?;
            let report = evaluate(&cfg, &ch, &alloc, &weights, g_min);
            print!("{}", render_report(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize { p_max, g_min, weights, mode } => {
            let weights = resolve_weights(weights, &cfg)?;
            let mode: Mode = mode.parse().map_err(|e: hapc_sr::Error| e.to_string())?;
            let spec = ProblemSpec { cfg, weights, g_min, p_max };
            let sol = match mode {
                Mode::HapcSr => optimize_with(&spec, exec),
                Mode::SrBaseline => optimize_sr_baseline_with(&spec, exec),
            }
            .map_err(|e| e.to_string())?;
            print!("{}", sol.to_kv_block(&spec));
            if sol.is_feasible() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Sweep { preset, axis, values, fixed, modes, weights, out, audit } => {
            let spec = build_sweep_spec(cfg, preset, axis, values, fixed, modes, weights)?;
            let result = experiments::run_sweep(&spec, exec).map_err(|e| e.to_string())?;
            if audit {
                let rows = experiments::audit(&result)?;
                eprintln!("audit ok: {rows} rows re-derived and byte-identical");
            }
            match out {
                Some(path) => std::fs::write(&path, &result.csv)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
                None => print!("{}", result.csv),
            }
            let any_feasible = result.rows.iter().any(|r| r.solution.is_feasible());
            if any_feasible {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Oracle { p_max, g_min, n_tau, n_alpha, n_q, weights } => {
            let weights = resolve_weights(weights, &cfg)?;
            let spec = ProblemSpec { cfg, weights, g_min, p_max };
            let grid = GridSpec { n_tau, n_alpha, n_q };
            let reference =
                oracle::grid_search_with(&spec, &grid, exec).map_err(|e| e.to_string())?;
            let sol = optimize_with(&spec, exec).map_err(|e| e.to_string())?;
            println!("== grid reference ==");
            print!("{}", reference.to_kv_block(&spec));
            println!("== optimizer ==");
            print!("{}", sol.to_kv_block(&spec));
            match oracle::gap(&sol, &reference) {
                Ok(g) => {
                    println!("gap = {g}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("gap = undefined ({e})");
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

fn resolve_weights(weights: Option<Vec<f64>>, cfg: &NetworkConfig) -> Result<Vec<f64>, String> {
    let w = weights.unwrap_or_else(|| vec![1.0; cfg.device_count()]);
    if w.len() != cfg.device_count() {
        return Err(format!("{} weights for {} devices", w.len(), cfg.device_count()));
    }
    Ok(w)
}

#[allow(clippy::too_many_arguments)]
fn build_sweep_spec(
    cfg: NetworkConfig,
    preset: Option<String>,
    axis: Option<String>,
    values: Option<Vec<f64>>,
    fixed: Option<Vec<f64>>,
    modes: Option<Vec<String>>,
    weights: Option<Vec<f64>>,
) -> Result<SweepSpec, String> {
    let mut spec = match (preset, axis, values, fixed) {
        (Some(name), None, None, None) => {
            experiments::preset_sweep(&name, &cfg).map_err(|e| e.to_string())?
        }
        (None, Some(axis), Some(values), Some(fixed)) => {
            let axis: Axis = axis.parse().map_err(|e: hapc_sr::Error| e.to_string())?;
            let weights = resolve_weights(weights.clone(), &cfg)?;
            SweepSpec {
                cfg,
                weights,
                axis,
                values,
                fixed,
                modes: vec![Mode::HapcSr, Mode::SrBaseline],
                label: "custom".into(),
            }
        }
        _ => {
            return Err(
                "pass either --preset, or all of --axis, --values and --fixed".to_string()
            )
        }
    };
    if let Some(modes) = modes {
        let mut parsed = Vec::new();
        for m in modes {
            parsed.push(m.parse::<Mode>().map_err(|e| e.to_string())?);
        }
        spec.modes = parsed;
    }
    if let Some(w) = weights {
        if w.len() != spec.cfg.device_count() {
            return Err(format!("{} weights for {} devices", w.len(), spec.cfg.device_count()));
        }
        spec.weights = w;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn render_report(report: &RateReport) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
    let bools =
        |v: &[bool]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
    let mut out = String::new();
    out.push_str(&format!("feasible = {}\n", report.feasibility.feasible));
    if !report.feasibility.violations.is_empty() {
        let v: Vec<String> =
            report.feasibility.violations.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("violations = {}\n", v.join(";")));
    }
    out.push_str(&format!("weighted_sum_bps = {}\n", report.weighted_sum));
    out.push_str(&format!("rate_source_bps = {}\n", report.rate_source));
    out.push_str(&format!("rate_source_baseline_bps = {}\n", report.rate_source_baseline));
    out.push_str(&format!("rate_gain_bps = {}\n", report.rate_gain));
    out.push_str(&format!("rate_device_bps = {}\n", join(&report.rate_device)));
    out.push_str(&format!("harvested_j = {}\n", join(&report.ledger.harvested_j)));
    out.push_str(&format!("consumed_j = {}\n", join(&report.ledger.consumed_j)));
    out.push_str(&format!("slack_j = {}\n", join(&report.ledger.slack_j)));
    out.push_str(&format!("in_aiot_envelope = {}\n", bools(&report.in_aiot_envelope)));
    out
}
