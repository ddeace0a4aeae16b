//! Detuning sweeps over the driven Jaynes–Cummings system.
//!
//! A scan solves the steady state at every grid point δ/g, escalating the
//! Fock truncation (+5, at most three times) until the population of the top
//! two levels drops below the adequacy threshold, then evaluates the full
//! correlation report. Grid points are independent and run in parallel on
//! the current rayon pool; output is deterministic regardless of worker
//! count.
//!
//! Tables serialize to CSV with a `#` metadata preamble (config echo, code
//! version, timestamp, solve diagnostics) and the column layout
//! `delta_over_g, m1.., g2.., c2.., r21.., M2..` at 12 significant digits.
//! Undefined values (degenerate intensity, flagged ratios) are written as
//! NaN; measures follow the detector convention and print 0. The timestamp
//! honors `SOURCE_DATE_EPOCH` so that archived spectra can be reproduced
//! byte for byte.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Deserialize;

use crate::hilbert::SpaceConfig;
use crate::jc::{interaction_hamiltonian, JCParams};
use crate::lindblad::{build_liouvillian, steady_state};
use crate::moments::{
    correlation_report, normally_ordered_moments, CorrelationReport, MeasureRequest, MomentVector,
};
use crate::{Error, Result};

/// Truncation-tail threshold that triggers a re-solve with more Fock levels.
pub const TAIL_TOL: f64 = 1e-8;
/// Fock levels added per escalation step.
const ESCALATION_STEP: usize = 5;
/// Maximum number of escalation steps before a row is marked failed.
const MAX_ESCALATIONS: usize = 3;
/// Relative prominence floor of [`find_peaks`].
const PEAK_PROMINENCE: f64 = 0.05;

/// Uniform detuning grid in units of g.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }

    /// Parses the CLI form `min:max:count`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Argument(format!(
                "grid must be min:max:count, got {text:?}"
            )));
        }
        let min = parts[0]
            .parse()
            .map_err(|e| Error::Argument(format!("bad grid min: {e}")))?;
        let max = parts[1]
            .parse()
            .map_err(|e| Error::Argument(format!("bad grid max: {e}")))?;
        let count = parts[2]
            .parse()
            .map_err(|e| Error::Argument(format!("bad grid count: {e}")))?;
        Ok(Self { min, max, count })
    }
}

fn default_outputs() -> Vec<String> {
    ["moments", "glauber", "differential", "ratios", "measures"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_grid() -> GridSpec {
    GridSpec { min: -1.5, max: 1.5, count: 301 }
}

/// Full description of a detuning scan. Rates enter as the dimensionless
/// ratios used throughout the presets and are converted to a [`JCParams`]
/// with g = 1 exactly once.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub kappa_over_g: f64,
    pub gamma_over_g: f64,
    pub drive_over_kappa: f64,
    #[serde(default = "default_grid")]
    pub delta_over_g: GridSpec,
    pub n_photon_max: usize,
    pub k_max: usize,
    #[serde(default)]
    pub measure_orders: Vec<MeasureRequest>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<String>,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_over_g.count < 2 {
            return Err(Error::Argument("grid needs at least 2 points".into()));
        }
        if self.k_max < 2 || self.k_max >= self.n_photon_max {
            return Err(Error::Argument(format!(
                "need 2 <= k_max < n_photon_max, got k_max={}, n_photon_max={}",
                self.k_max, self.n_photon_max
            )));
        }
        if self.k_max > 9 {
            return Err(Error::Argument("k_max > 9 is not supported by the column naming".into()));
        }
        for req in &self.measure_orders {
            if !(2 <= req.n && req.n < req.n_tr && req.n_tr <= self.k_max) {
                return Err(Error::Argument(format!(
                    "measure order n={}, n_tr={} incompatible with k_max={}",
                    req.n, req.n_tr, self.k_max
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for req in &self.measure_orders {
            if !seen.insert(req.n) {
                return Err(Error::Argument(format!("duplicate measure order n={}", req.n)));
            }
        }
        let known = default_outputs();
        for group in &self.outputs {
            if !known.contains(group) {
                return Err(Error::Argument(format!("unknown output group {group:?}")));
            }
        }
        self.params_at(0.0).validate()
    }

    /// JC parameters (g = 1) at one detuning.
    pub fn params_at(&self, delta_over_g: f64) -> JCParams {
        JCParams {
            g: 1.0,
            kappa: self.kappa_over_g,
            gamma: self.gamma_over_g,
            drive: self.drive_over_kappa * self.kappa_over_g,
            delta: delta_over_g,
        }
    }

    /// Parses a TOML config file mirroring the field names of this struct.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScanConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The exact parameter sets of the three reference figures.
///
/// * `fig1c` — very strong coupling, weak drive: 2κ/g = γ/g = 0.01, 𝓔/κ = 0.1.
/// * `fig2`  — 2κ/g = γ/g = 𝓔/κ = 0.1, measures 𝓜₂ (N_tr = 4), 𝓜₃ and 𝓜₄
///   (N_tr = 5).
/// * `fig3`  — strong drive 𝓔/κ = 1 at 2κ/g = γ/g = 0.1, measures 𝓜₂
///   (N_tr = 4) and 𝓜₃ (N_tr = 5).
pub fn figure_preset(name: &str) -> Result<ScanConfig> {
    let base = ScanConfig {
        kappa_over_g: 0.05,
        gamma_over_g: 0.1,
        drive_over_kappa: 0.1,
        delta_over_g: default_grid(),
        n_photon_max: 12,
        k_max: 5,
        measure_orders: vec![],
        outputs: default_outputs(),
    };
    let cfg = match name {
        "fig1c" => ScanConfig {
            kappa_over_g: 0.005,
            gamma_over_g: 0.01,
            ..base
        },
        "fig2" => ScanConfig {
            measure_orders: vec![
                MeasureRequest { n: 2, n_tr: 4 },
                MeasureRequest { n: 3, n_tr: 5 },
                MeasureRequest { n: 4, n_tr: 5 },
            ],
            ..base
        },
        "fig3" => ScanConfig {
            drive_over_kappa: 1.0,
            n_photon_max: 20,
            measure_orders: vec![
                MeasureRequest { n: 2, n_tr: 4 },
                MeasureRequest { n: 3, n_tr: 5 },
            ],
            ..base
        },
        other => {
            return Err(Error::Argument(format!(
                "unknown preset {other:?} (expected fig1c, fig2 or fig3)"
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Successfully solved quantities of one grid point.
#[derive(Debug, Clone)]
pub struct RowData {
    pub moments: MomentVector,
    pub report: CorrelationReport,
    pub residual: f64,
    pub truncation_tail: f64,
    pub n_photon_max_used: usize,
}

/// One grid point; `data` is `None` for failed rows.
#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub delta_over_g: f64,
    pub data: Option<RowData>,
    pub failure: Option<String>,
}

/// Scan result: rows sorted by δ plus the config they were produced from.
#[derive(Debug, Clone)]
pub struct SpectrumTable {
    pub config: ScanConfig,
    pub rows: Vec<SpectrumRow>,
}

/// Runs the scan on the current rayon pool. Failed rows are reported inside
/// the table rather than aborting the sweep.
pub fn run_scan(config: &ScanConfig) -> Result<SpectrumTable> {
    config.validate()?;
    let rows: Vec<SpectrumRow> = config
        .delta_over_g
        .points()
        .into_par_iter()
        .map(|delta| solve_row(config, delta))
        .collect();
    Ok(SpectrumTable { config: config.clone(), rows })
}

fn solve_row(config: &ScanConfig, delta_over_g: f64) -> SpectrumRow {
    let params = config.params_at(delta_over_g);
    let mut n_photon_max = config.n_photon_max;
    let mut last_tail = f64::NAN;
    for _ in 0..=MAX_ESCALATIONS {
        let outcome = SpaceConfig::new(n_photon_max)
            .and_then(|space| {
                let h = interaction_hamiltonian(&params, &space)?;
                let l = build_liouvillian(&h, &params, &space)?;
                steady_state(&l)
            })
            .and_then(|solved| {
                if solved.truncation_tail >= TAIL_TOL {
                    return Ok(None);
                }
                let moments = normally_ordered_moments(&solved.rho, config.k_max)?;
                let report = correlation_report(&moments, &config.measure_orders)?;
                Ok(Some(RowData {
                    moments,
                    report,
                    residual: solved.residual,
                    truncation_tail: solved.truncation_tail,
                    n_photon_max_used: n_photon_max,
                }))
            });
        match outcome {
            Ok(Some(data)) => {
                return SpectrumRow { delta_over_g, data: Some(data), failure: None }
            }
            Ok(None) => {
                last_tail = f64::NAN;
                n_photon_max += ESCALATION_STEP;
            }
            Err(err) => {
                return SpectrumRow {
                    delta_over_g,
                    data: None,
                    failure: Some(err.to_string()),
                }
            }
        }
    }
    SpectrumRow {
        delta_over_g,
        data: None,
        failure: Some(format!(
            "truncation escalation exhausted at n_photon_max = {n_photon_max} \
             (last tail {last_tail:.3e})"
        )),
    }
}

impl SpectrumTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.data.is_none())
    }

    /// Ordered names of the value columns for this config.
    pub fn column_names(&self) -> Vec<String> {
        let k_max = self.config.k_max;
        let mut names = Vec::new();
        for group in &self.config.outputs {
            match group.as_str() {
                "moments" => names.extend((1..=k_max).map(|k| format!("m{k}"))),
                "glauber" => names.extend((2..=k_max).map(|n| format!("g{n}"))),
                "differential" => names.extend((2..=k_max).map(|n| format!("c{n}"))),
                "ratios" => names.extend((2..=k_max).map(|k| format!("r{}{}", k, k - 1))),
                "measures" => {
                    names.extend(self.config.measure_orders.iter().map(|m| format!("M{}", m.n)))
                }
                _ => {}
            }
        }
        names
    }

    fn row_value(row: &SpectrumRow, name: &str, measures: &[MeasureRequest]) -> f64 {
        let Some(data) = &row.data else { return f64::NAN };
        let k_max = data.moments.k_max();
        let parse_index = |prefix: &str| -> Option<usize> {
            name.strip_prefix(prefix).and_then(|t| t.parse::<usize>().ok())
        };
        if let Some(k) = parse_index("m") {
            if (1..=k_max).contains(&k) {
                return data.moments.get(k);
            }
        } else if let Some(n) = parse_index("g") {
            if (2..=k_max).contains(&n) {
                return data.report.glauber[n - 2].unwrap_or(f64::NAN);
            }
        } else if let Some(n) = parse_index("c") {
            if (2..=k_max).contains(&n) {
                return data.report.differential[n - 2];
            }
        } else if let Some(code) = parse_index("r") {
            let k = code / 10;
            if (2..=k_max).contains(&k) && code % 10 == k - 1 {
                let ratio = data.report.ratios[k - 2];
                return if ratio.valid { ratio.value } else { f64::NAN };
            }
        } else if let Some(n) = parse_index("M") {
            if measures.iter().any(|m| m.n == n) {
                return data
                    .report
                    .measures
                    .iter()
                    .find(|m| m.n == n)
                    .map(|m| m.value)
                    .unwrap_or(f64::NAN);
            }
        }
        f64::NAN
    }

    /// One named column as (δ/g, value) pairs; undefined entries are NaN.
    pub fn column(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        if !self.column_names().iter().any(|n| n == name) {
            return Err(Error::Argument(format!("unknown column {name:?}")));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| {
                (row.delta_over_g, Self::row_value(row, name, &self.config.measure_orders))
            })
            .collect())
    }

    /// Writes the CSV form: `#` metadata preamble, exact column header,
    /// one row per δ at 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cfg = &self.config;
        writeln!(out, "# multiphoton-scan v{}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# timestamp = {}", csv_timestamp())?;
        writeln!(out, "# kappa_over_g = {}", cfg.kappa_over_g)?;
        writeln!(out, "# gamma_over_g = {}", cfg.gamma_over_g)?;
        writeln!(out, "# drive_over_kappa = {}", cfg.drive_over_kappa)?;
        writeln!(
            out,
            "# delta_over_g = {}:{}:{}",
            cfg.delta_over_g.min, cfg.delta_over_g.max, cfg.delta_over_g.count
        )?;
        writeln!(out, "# n_photon_max = {}", cfg.n_photon_max)?;
        writeln!(out, "# k_max = {}", cfg.k_max)?;
        let orders: Vec<String> = cfg
            .measure_orders
            .iter()
            .map(|m| format!("M{}:n_tr={}", m.n, m.n_tr))
            .collect();
        writeln!(out, "# measure_orders = {}", orders.join(" "))?;
        writeln!(out, "# outputs = {}", cfg.outputs.join(","))?;
        let max_residual = self
            .rows
            .iter()
            .filter_map(|r| r.data.as_ref().map(|d| d.residual))
            .fold(0.0, f64::max);
        let max_tail = self
            .rows
            .iter()
            .filter_map(|r| r.data.as_ref().map(|d| d.truncation_tail))
            .fold(0.0, f64::max);
        let escalated = self
            .rows
            .iter()
            .filter(|r| {
                r.data
                    .as_ref()
                    .is_some_and(|d| d.n_photon_max_used > cfg.n_photon_max)
            })
            .count();
        let failed = self.rows.iter().filter(|r| r.data.is_none()).count();
        writeln!(out, "# max_residual = {max_residual:.3e}")?;
        writeln!(out, "# max_truncation_tail = {max_tail:.3e}")?;
        writeln!(out, "# escalated_rows = {escalated}")?;
        writeln!(out, "# failed_rows = {failed}")?;
        for row in &self.rows {
            if let Some(reason) = &row.failure {
                writeln!(out, "# failed delta_over_g = {}: {}", row.delta_over_g, reason)?;
            }
        }

        let names = self.column_names();
        writeln!(out, "delta_over_g,{}", names.join(","))?;
        for row in &self.rows {
            write!(out, "{:.11e}", row.delta_over_g)?;
            for name in &names {
                write!(out, ",{:.11e}", Self::row_value(row, name, &cfg.measure_orders))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Unix timestamp string; honors the `SOURCE_DATE_EPOCH` reproducible-build
/// convention so repeated runs can be byte-identical.
pub fn csv_timestamp() -> String {
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        return epoch;
    }
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    now.to_string()
}

/// Strict local maxima of a column above the 5% relative prominence floor,
/// as (δ/g, value) pairs. NaN entries never qualify.
pub fn find_peaks(table: &SpectrumTable, column: &str) -> Result<Vec<(f64, f64)>> {
    if table.rows.len() < 5 {
        return Err(Error::Argument("peak finding needs at least 5 grid points".into()));
    }
    let values = table.column(column)?;
    let max = values
        .iter()
        .map(|&(_, v)| v)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Ok(vec![]);
    }
    let floor = PEAK_PROMINENCE * max;
    let mut peaks = Vec::new();
    for i in 1..values.len() - 1 {
        let (delta, v) = values[i];
        if v.is_finite() && v > values[i - 1].1 && v > values[i + 1].1 && v > floor {
            peaks.push((delta, v));
        }
    }
    Ok(peaks)
}
