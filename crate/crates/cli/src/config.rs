use std::path::Path;

use anyhow::Context;
use line_resonance::line_model::section_params;
use line_resonance::sweeps::LoadGrid;
use line_resonance::timesim::SourceWaveform;
use line_resonance::{LineParams, LoadSpec, SectionParams};
use serde::Deserialize;

use crate::UsageError;

/// Load values for the root locus: an explicit list or a log-spaced range.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Range(LoadGrid),
}

impl GridSpec {
    pub fn points(&self) -> line_resonance::Result<Vec<f64>> {
        match self {
            GridSpec::Points(p) => Ok(p.clone()),
            GridSpec::Range(g) => g.points(),
        }
    }
}

/// Line description plus the options of every subcommand. Keys a command
/// does not use are accepted and ignored; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub r_per_km: f64,
    pub l_per_km: f64,
    pub c_per_km: f64,
    pub g_per_km: f64,
    pub length_km: f64,
    pub n_sections: usize,
    #[serde(default)]
    pub load: Option<LoadSpec>,

    /// Modes for `sweep`.
    #[serde(default)]
    pub modes: Option<Vec<usize>>,
    /// Load conductance for `sweep`, S.
    #[serde(default)]
    pub g_load: Option<f64>,
    /// Load node for `locus`.
    #[serde(default)]
    pub z: Option<usize>,
    #[serde(default)]
    pub g_grid: Option<GridSpec>,
    /// Mode for `sensitivity`.
    #[serde(default)]
    pub mode_k: Option<usize>,

    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub source: Option<SourceWaveform>,
    /// Write every `stride`-th trajectory sample.
    #[serde(default)]
    pub stride: Option<usize>,
    /// State label whose spectrum `simulate` analyzes, e.g. `v_30`.
    #[serde(default)]
    pub probe: Option<String>,
}

pub const DEFAULT_SWEEP_LOAD: f64 = 0.01;
pub const DEFAULT_DT: f64 = 2e-5;
pub const DEFAULT_T_END: f64 = 0.4;

impl RunConfig {
    /// The 100 km reference line with 60 sections and no load.
    pub fn reference() -> Self {
        let p = LineParams::reference_110kv(60);
        RunConfig {
            r_per_km: p.r_per_km,
            l_per_km: p.l_per_km,
            c_per_km: p.c_per_km,
            g_per_km: p.g_per_km,
            length_km: p.length_km,
            n_sections: p.n_sections,
            load: None,
            modes: None,
            g_load: None,
            z: None,
            g_grid: None,
            mode_k: None,
            dt: None,
            t_end: None,
            source: None,
            stride: None,
            probe: None,
        }
    }

    pub fn load_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        cfg.sections()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn line(&self) -> LineParams {
        LineParams {
            r_per_km: self.r_per_km,
            l_per_km: self.l_per_km,
            c_per_km: self.c_per_km,
            g_per_km: self.g_per_km,
            length_km: self.length_km,
            n_sections: self.n_sections,
        }
    }

    /// Per-section values, with the load (if any) checked against `n`.
    pub fn sections(&self) -> line_resonance::Result<SectionParams> {
        let sec = section_params(&self.line())?;
        if let Some(load) = &self.load {
            load.validate(sec.n)?;
        }
        Ok(sec)
    }
}
