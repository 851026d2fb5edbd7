//! Experiment configuration: a JSON document with defaults for every field.

use std::path::{Path, PathBuf};

use lmg_core::dynamics::{Method, PropagationConfig};
use lmg_core::spin::InitialStateKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnits {
    /// Multiples of the slowest time scale `τ_s`.
    #[default]
    TauS,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapScanSettings {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_points: usize,
    pub refine_passes: usize,
}

impl Default for GapScanSettings {
    fn default() -> Self {
        Self {
            lambda_min: 0.5,
            lambda_max: 3.5,
            grid_points: 201,
            refine_passes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            lambda_min: 0.25,
            lambda_max: 4.0,
            points: 151,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSettings {
    pub method: Method,
    /// Integration step as a fraction of `τ_s`.
    pub step_ratio: f64,
    /// Ramp sampling interval as a fraction of `τ_s`.
    pub sample_ratio: f64,
    pub norm_tolerance: f64,
    pub plateau_samples: usize,
    pub plateau_fast_path: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            method: Method::Chebyshev,
            step_ratio: 0.01,
            sample_ratio: 0.1,
            norm_tolerance: 1e-8,
            plateau_samples: 2000,
            plateau_fast_path: true,
        }
    }
}

impl PropagationSettings {
    pub fn resolve(&self, tau_s: f64) -> PropagationConfig {
        PropagationConfig {
            method: self.method,
            step: self.step_ratio * tau_s,
            norm_tolerance: self.norm_tolerance,
            sample_stride: self.sample_ratio * tau_s,
            store_snapshots: false,
            plateau_samples: self.plateau_samples,
            plateau_fast_path: self.plateau_fast_path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub particles: u32,
    pub mu: f64,
    pub initial_state: InitialStateKind,
    pub lambda0: f64,
    pub lambda1: f64,
    pub t_r: f64,
    pub t_r_units: TimeUnits,
    /// Extra relaxation times (same units as `t_r`) used for the ⟨J_x⟩ band.
    pub band_t_r: Vec<f64>,
    pub tau_q_ratios: Vec<f64>,
    /// Fixed `τ_s`; when absent it is taken from the gap scan.
    pub tau_s: Option<f64>,
    pub gap_scan: GapScanSettings,
    pub spectrum: SpectrumSettings,
    pub propagation: PropagationSettings,
    /// Doublet degeneracy threshold relative to the spectral range.
    pub degeneracy_tolerance: f64,
    pub output_dir: PathBuf,
    /// Worker threads for sweeps; 0 uses all cores.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            particles: 500,
            mu: 0.5,
            initial_state: InitialStateKind::SpinCoherent,
            lambda0: 3.5,
            lambda1: 0.5,
            t_r: 9e4,
            t_r_units: TimeUnits::TauS,
            band_t_r: Vec::new(),
            tau_q_ratios: vec![0.4, 1.0, 10.0, 100.0, 1000.0, 7200.0],
            tau_s: None,
            gap_scan: GapScanSettings::default(),
            spectrum: SpectrumSettings::default(),
            propagation: PropagationSettings::default(),
            degeneracy_tolerance: lmg_core::equilibrium::DEFAULT_RELATIVE_TOLERANCE,
            output_dir: PathBuf::from("results"),
            workers: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, ignoring `output_dir` and `workers`.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            workers: 0,
            ..self.clone()
        };
        let compact = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(compact.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.particles < 2 {
            return Err(CliError::Config(format!(
                "particles must be at least 2, got {}",
                self.particles
            )));
        }
        if !(-1.0..=1.0).contains(&self.mu) {
            return Err(CliError::Config(format!("mu must lie in [-1, 1], got {}", self.mu)));
        }
        positive("lambda0", self.lambda0)?;
        positive("lambda1", self.lambda1)?;
        for &t in std::iter::once(&self.t_r).chain(&self.band_t_r) {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!("t_r must be non-negative, got {t}")));
            }
        }
        for &r in &self.tau_q_ratios {
            positive("tau_q ratio", r)?;
        }
        if let Some(t) = self.tau_s {
            positive("tau_s", t)?;
        }
        let g = &self.gap_scan;
        positive("gap_scan.lambda_min", g.lambda_min)?;
        if !(g.lambda_max > g.lambda_min) || g.grid_points < 2 {
            return Err(CliError::Config(
                "gap_scan needs lambda_max > lambda_min and at least 2 grid points".into(),
            ));
        }
        let s = &self.spectrum;
        positive("spectrum.lambda_min", s.lambda_min)?;
        if !(s.lambda_max >= s.lambda_min) || s.points == 0 {
            return Err(CliError::Config(
                "spectrum needs lambda_max >= lambda_min and at least 1 point".into(),
            ));
        }
        let p = &self.propagation;
        positive("propagation.step_ratio", p.step_ratio)?;
        positive("propagation.sample_ratio", p.sample_ratio)?;
        if !(p.norm_tolerance >= 0.0) {
            return Err(CliError::Config(format!(
                "propagation.norm_tolerance must be non-negative, got {}",
                p.norm_tolerance
            )));
        }
        if !(self.degeneracy_tolerance >= 0.0) || !self.degeneracy_tolerance.is_finite() {
            return Err(CliError::Config(format!(
                "degeneracy_tolerance must be non-negative, got {}",
                self.degeneracy_tolerance
            )));
        }
        Ok(())
    }

    /// `t` in absolute time units.
    pub fn absolute_time(&self, t: f64, tau_s: f64) -> f64 {
        match self.t_r_units {
            TimeUnits::TauS => t * tau_s,
            TimeUnits::Absolute => t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let cfg = ExperimentConfig {
            mu: 0.1 + 0.2,
            tau_s: Some(0.011_137_451_230_000_1),
            band_t_r: vec![1.0 / 3.0, 2e-310],
            ..Default::default()
        };
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.mu.to_bits(), cfg.mu.to_bits());
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"particles": 20, "gap_scan": {"grid_points": 11}}"#)
            .unwrap();
        assert_eq!(cfg.particles, 20);
        assert_eq!(cfg.gap_scan.grid_points, 11);
        assert_eq!(cfg.gap_scan.lambda_max, 3.5);
        assert_eq!(cfg.lambda0, 3.5);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"particle": 20}"#).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            ExperimentConfig { mu: 1.5, ..Default::default() },
            ExperimentConfig { lambda1: 0.0, ..Default::default() },
            ExperimentConfig { particles: 1, ..Default::default() },
            ExperimentConfig { tau_q_ratios: vec![-1.0], ..Default::default() },
            ExperimentConfig { degeneracy_tolerance: -1e-8, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        }
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { particles: 100, ..Default::default() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig { output_dir: "elsewhere".into(), workers: 3, ..Default::default() };
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn relaxation_time_units() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.absolute_time(10.0, 0.5), 5.0);
        let abs = ExperimentConfig { t_r_units: TimeUnits::Absolute, ..Default::default() };
        assert_eq!(abs.absolute_time(10.0, 0.5), 10.0);
    }
}
