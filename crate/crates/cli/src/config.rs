//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 42
//! output = "out"
//!
//! [field]
//! kind = "kraichnan"   # or "br"
//! d = 2
//! alpha = 4.0
//! zmax = 4
//!
//! [dynamics]
//! amplitude = 1.0
//! kappa = 0.0
//! dt = 1e-3
//! t_end = 1.0
//! ```

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use transportlab::flow::Scheme;
use transportlab::mixing::{Coupling, Observable, ScalarInit};
use transportlab::spectral::TransportScheme;
use transportlab::ModelSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub field: ModelSpec,
    pub dynamics: Dynamics,
    #[serde(default)]
    pub ensemble: Ensemble,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub kappa: f64,
    /// Linear growth coefficient of the Eulerian equation.
    #[serde(default)]
    pub c: f64,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    /// Lagrangian integrator.
    #[serde(default)]
    pub scheme: Scheme,
    /// Eulerian transport step.
    #[serde(default)]
    pub spde_scheme: TransportScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    /// Samples per realization (moment curves, fields-check points).
    #[serde(default = "default_particles")]
    pub particles: u64,
    #[serde(default = "default_realizations")]
    pub realizations: u64,
    /// Viscous streams averaged per transport path.
    #[serde(default = "default_inner")]
    pub inner_samples: u64,
}

impl Default for Ensemble {
    fn default() -> Self {
        Ensemble {
            particles: default_particles(),
            realizations: default_realizations(),
            inner_samples: default_inner(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_z_cut")]
    pub z_cut: usize,
    #[serde(default = "default_s_values")]
    pub s_values: Vec<f64>,
    /// Output cadence in time units; defaults to `t_end / 20`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_every: Option<f64>,
    #[serde(default = "default_qr_every")]
    pub qr_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<Observable>,
    /// Fixed `[t0, t1]` fit window; otherwise the window is auto-selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default = "one")]
    pub fit_t_min: f64,
    #[serde(default = "default_noise_factor")]
    pub noise_factor: f64,
    /// Quadrature nodes per dimension for the mixing pairings.
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    /// Eulerian grid size.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    /// Start of the sweep fit window; defaults to `t_end / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_from: Option<f64>,
    #[serde(default = "ScalarInit::standard_2d")]
    pub initial: ScalarInit,
    /// Sample count for fields-check and conditions.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            p_grid: default_p_grid(),
            z_cut: default_z_cut(),
            s_values: default_s_values(),
            t_every: None,
            qr_every: default_qr_every(),
            x: None,
            y: None,
            coupling: Coupling::default(),
            observable: None,
            fit_window: None,
            fit_t_min: 1.0,
            noise_factor: default_noise_factor(),
            quadrature: default_quadrature(),
            grid: default_grid(),
            amplitudes: default_amplitudes(),
            fit_from: None,
            initial: ScalarInit::standard_2d(),
            samples: default_samples(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_particles() -> u64 {
    256
}
fn default_realizations() -> u64 {
    64
}
fn default_inner() -> u64 {
    4
}
fn default_p_grid() -> Vec<f64> {
    vec![-0.5, -0.25, -0.1, 0.1, 0.25, 0.5]
}
fn default_z_cut() -> usize {
    8
}
fn default_s_values() -> Vec<f64> {
    vec![1.0]
}
fn default_qr_every() -> u64 {
    10
}
fn default_noise_factor() -> f64 {
    3.0
}
fn default_quadrature() -> usize {
    64
}
fn default_grid() -> usize {
    64
}
fn default_amplitudes() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 4.0]
}
fn default_samples() -> usize {
    1000
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed.is_none() {
            return Err(invalid("seed", "missing; every run needs an explicit seed"));
        }
        let dt = self.dynamics.dt.ok_or_else(|| invalid("dynamics.dt", "missing"))?;
        let t_end = self
            .dynamics
            .t_end
            .ok_or_else(|| invalid("dynamics.t_end", "missing"))?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dynamics.dt", format!("must be > 0, got {dt}")));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(invalid("dynamics.t_end", format!("must be > 0, got {t_end}")));
        }
        if !self.dynamics.amplitude.is_finite() {
            return Err(invalid("dynamics.amplitude", "must be finite"));
        }
        if !(self.dynamics.kappa >= 0.0) {
            return Err(invalid("dynamics.kappa", "must be ≥ 0"));
        }
        if let Some(te) = self.diagnostics.t_every {
            if !(te > 0.0) {
                return Err(invalid("diagnostics.t_every", "must be > 0"));
            }
        }
        let d = &self.diagnostics;
        for (name, empty) in [
            ("diagnostics.p_grid", d.p_grid.is_empty()),
            ("diagnostics.s_values", d.s_values.is_empty()),
            ("diagnostics.amplitudes", d.amplitudes.is_empty()),
        ] {
            if empty {
                return Err(invalid(name, "must be nonempty"));
            }
        }
        for (name, v) in [
            ("ensemble.particles", self.ensemble.particles),
            ("ensemble.realizations", self.ensemble.realizations),
            ("ensemble.inner_samples", self.ensemble.inner_samples),
            ("diagnostics.qr_every", d.qr_every),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be ≥ 1"));
            }
        }
        if d.samples == 0 {
            return Err(invalid("diagnostics.samples", "must be ≥ 1"));
        }
        if let Some([a, b]) = d.fit_window {
            if !(a < b) {
                return Err(invalid("diagnostics.fit_window", "needs t0 < t1"));
            }
        }
        self.field
            .build()
            .map_err(|e| invalid("field", e))?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn dt(&self) -> f64 {
        self.dynamics.dt.expect("validated")
    }

    pub fn t_end(&self) -> f64 {
        self.dynamics.t_end.expect("validated")
    }

    /// Output times `0, Δ, 2Δ, …, T` with `Δ = t_every` snapped to the step grid.
    pub fn t_grid(&self) -> Vec<f64> {
        let dt = self.dt();
        let t_end = self.t_end();
        let every = self.diagnostics.t_every.unwrap_or(t_end / 20.0);
        let k = ((every / dt).round() as u64).max(1);
        let n_total = (t_end / dt).round() as u64;
        let mut out: Vec<f64> = (0..=n_total / k).map(|i| (i * k) as f64 * dt).collect();
        if n_total % k != 0 {
            out.push(n_total as f64 * dt);
        }
        out
    }

    /// Output cadence in steps.
    pub fn steps_every(&self) -> u64 {
        let every = self.diagnostics.t_every.unwrap_or(self.t_end() / 20.0);
        ((every / self.dt()).round() as u64).max(1)
    }

    pub fn require_point(&self, name: &str, v: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>, CliError> {
        let field = format!("diagnostics.{name}");
        let p = v.clone().ok_or_else(|| invalid(&field, "required by this subcommand"))?;
        if p.len() != d {
            return Err(invalid(&field, format!("needs {d} coordinates, got {}", p.len())));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
[field]
kind = "br"
[dynamics]
dt = 0.01
t_end = 1.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.seed(), 7);
        assert_eq!(c.dynamics.amplitude, 1.0);
        assert_eq!(c.ensemble.realizations, 64);
        assert_eq!(c.t_grid().len(), 21);
        assert_eq!(c.steps_every(), 5);
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = BASE.replace("seed = 7", "");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("t_end = 1.0", "t_end = 1.0\nkapa = 0.1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("kapa"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        for (from, to, field) in [
            ("dt = 0.01", "dt = 0.0", "dynamics.dt"),
            ("t_end = 1.0", "t_end = -1.0", "dynamics.t_end"),
            ("dt = 0.01\n", "", "dynamics.dt"),
        ] {
            let err = ExperimentConfig::from_toml(&BASE.replace(from, to)).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
        }
        let text = format!("{BASE}[diagnostics]\np_grid = []\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("p_grid"));
        let text = BASE.replace("kind = \"br\"", "kind = \"kraichnan\"\nd = 2\nalpha = 2.0\nzmax = 2");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn ragged_grid_keeps_final_time() {
        let text = format!("{BASE}[diagnostics]\nt_every = 0.3\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let g = c.t_grid();
        assert_eq!(g.len(), 5);
        assert!((g[3] - 0.9).abs() < 1e-12 && (g[4] - 1.0).abs() < 1e-12);
    }
}
