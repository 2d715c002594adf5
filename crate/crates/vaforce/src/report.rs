//! Run reports, written as TOML next to the CSV artifacts they summarize.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use vaforce_core::metrics::GeersErrors;

/// Geers errors of one identified channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelError {
    pub method: String,
    /// `force` or `displacement`.
    pub quantity: String,
    pub channel: String,
    pub mag: f64,
    pub phase: f64,
    pub comp: f64,
}

impl ChannelError {
    pub fn new(method: &str, quantity: &str, channel: &str, e: GeersErrors) -> Self {
        Self {
            method: method.into(),
            quantity: quantity.into(),
            channel: channel.into(),
            mag: e.mag,
            phase: e.phase,
            comp: e.comp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub method: String,
    pub dt: f64,
    pub wall_time_s: f64,
    /// Wall time over simulated signal duration.
    pub real_time_factor: f64,
}

/// Settings every report repeats so a run can be reproduced from it alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub noise_algorithm: String,
    pub tau: f64,
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub steps: usize,
    pub n_reduced: usize,
    /// Absent when only the filter ran.
    pub alpha: Option<f64>,
    pub alpha_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub meta: RunMeta,
    /// Set when the reference forces are identically zero, so Geers errors
    /// are undefined.
    pub trivial: bool,
    pub notices: Vec<String>,
    pub geers: Vec<ChannelError>,
    pub timings: Vec<Timing>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn timing(&self, method: &str) -> Option<&Timing> {
        self.timings.iter().find(|t| t.method == method)
    }

    /// Mean comprehensive error over the force channels of `method`.
    pub fn mean_force_comp(&self, method: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .geers
            .iter()
            .filter(|e| e.method == method && e.quantity == "force")
            .map(|e| e.comp)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub repeats: usize,
    pub mean_mag: f64,
    pub mean_phase: f64,
    pub mean_comp: f64,
    pub stderr_comp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub meta: RunMeta,
    pub rows: Vec<SweepRow>,
    /// Averaged ε_comp never drops by more than two combined standard
    /// errors from one τ to the next.
    pub non_decreasing: bool,
    pub max_mean_comp: f64,
    pub notices: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub dt: f64,
    pub mean_mag: f64,
    pub mean_phase: f64,
    pub mean_comp: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub meta: RunMeta,
    pub rows: Vec<ComparisonRow>,
    /// Filter error non-increasing as its step shrinks.
    pub akf_monotone: Option<bool>,
    /// Proposed error at most the filter's best.
    pub proposed_at_least_as_accurate: Option<bool>,
    /// Proposed wall time below the filter's at its smallest step.
    pub proposed_faster: Option<bool>,
    pub notices: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl ComparisonReport {
    /// True unless a trend check ran and failed.
    pub fn trends_hold(&self) -> bool {
        [self.akf_monotone, self.proposed_at_least_as_accurate, self.proposed_faster]
            .iter()
            .all(|c| c.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenRow {
    pub mode: usize,
    pub full: f64,
    pub reduced: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_dof: usize,
    pub n_reduced: usize,
    pub checked_modes: usize,
    pub max_rel_error: f64,
    pub rows: Vec<EigenRow>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LCurveRow {
    pub alpha: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
    pub curvature: f64,
    pub mean_comp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LCurveReport {
    pub meta: RunMeta,
    pub alpha: f64,
    pub degenerate: bool,
    /// Grid value with the smallest force error against the reference.
    pub best_alpha: f64,
    pub rows: Vec<LCurveRow>,
    pub artifacts: Vec<PathBuf>,
}

pub fn write_report(path: &Path, report: &impl Serialize) -> Result<()> {
    let text = toml::to_string_pretty(report).context("serializing report")?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
