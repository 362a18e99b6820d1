//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wind_esn_core::baselines::ArimaOrder;
use wind_esn_core::esn::{Activation, EsnSpec};
use wind_esn_core::lorenz::Method;
use wind_esn_core::spatial::knots::{DEFAULT_GRID_STEP, DEFAULT_MIN_SEPARATION, DEFAULT_SPEED_THRESHOLD};
use wind_esn_core::tuning::EsnGrid;

use crate::error::{usage, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: Paths,
    pub split: Split,
    pub harmonics: Harmonics,
    pub knots: Knots,
    pub covariance: Covariance,
    pub esn: EsnSection,
    pub ensemble: Ensemble,
    pub cv: Cv,
    pub calibration: Calibration,
    pub baselines: Baselines,
    pub lorenz: Lorenz,
    pub power: Power,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw wind speed field.
    pub data: PathBuf,
    /// Directory receiving every intermediate artifact.
    pub work_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data.wsf"),
            work_dir: PathBuf::from("run"),
        }
    }
}

/// Training covers `[data start, train_end)`, validation
/// `[train_end, validation_end)` (cross-validation and calibration) and the
/// test window `[validation_end, test_end)`, by default up to the data end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Split {
    pub train_end: usize,
    pub validation_end: usize,
    pub test_end: Option<usize>,
}

impl Default for Split {
    fn default() -> Self {
        Self {
            train_end: 1000,
            validation_end: 1500,
            test_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Harmonics {
    /// Periods in hours.
    pub periods: Vec<f64>,
}

impl Default for Harmonics {
    fn default() -> Self {
        Self {
            periods: vec![8760.0, 4380.0, 24.0, 12.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knots {
    pub grid_step: f64,
    pub speed_threshold: f64,
    pub min_separation: f64,
}

impl Default for Knots {
    fn default() -> Self {
        Self {
            grid_step: DEFAULT_GRID_STEP,
            speed_threshold: DEFAULT_SPEED_THRESHOLD,
            min_separation: DEFAULT_MIN_SEPARATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Covariance {
    /// Spacing of the regular grid of mixture-component centers (degrees).
    pub center_step: f64,
    pub radius: f64,
    pub bandwidth: f64,
    pub restarts: usize,
    pub max_evals: usize,
    pub max_locations: usize,
}

impl Default for Covariance {
    fn default() -> Self {
        Self {
            center_step: 3.0,
            radius: 3.0,
            bandwidth: 3.0,
            restarts: 3,
            max_evals: 1500,
            max_locations: 150,
        }
    }
}

/// Reservoir hyperparameters; the seed comes from the base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnSection {
    pub reservoir_size: usize,
    pub lags: usize,
    pub leak_rate: f64,
    pub spectral_scale: f64,
    pub recurrent_scale: f64,
    pub input_scale: f64,
    pub recurrent_density: f64,
    pub input_density: f64,
    pub ridge: f64,
    pub washout: usize,
    pub activation: String,
}

impl Default for EsnSection {
    fn default() -> Self {
        Self::from_spec(&EsnSpec::default())
    }
}

impl EsnSection {
    pub fn from_spec(s: &EsnSpec) -> Self {
        Self {
            reservoir_size: s.reservoir_size,
            lags: s.lags,
            leak_rate: s.leak_rate,
            spectral_scale: s.spectral_scale,
            recurrent_scale: s.recurrent_scale,
            input_scale: s.input_scale,
            recurrent_density: s.recurrent_density,
            input_density: s.input_density,
            ridge: s.ridge,
            washout: s.washout,
            activation: s.activation.name().to_string(),
        }
    }

    pub fn to_spec(&self, seed: u64) -> Result<EsnSpec> {
        let Some(activation) = Activation::from_name(&self.activation) else {
            usage!("unknown activation '{}' (tanh, relu, identity)", self.activation);
        };
        let spec = EsnSpec {
            reservoir_size: self.reservoir_size,
            lags: self.lags,
            leak_rate: self.leak_rate,
            spectral_scale: self.spectral_scale,
            recurrent_scale: self.recurrent_scale,
            input_scale: self.input_scale,
            recurrent_density: self.recurrent_density,
            input_density: self.input_density,
            ridge: self.ridge,
            washout: self.washout,
            seed,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ensemble {
    pub members: usize,
    pub horizons: usize,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self { members: 100, horizons: 3 }
    }
}

/// Search grid; `preset = "large"` uses the full published grid and
/// ignores the lists, `"custom"` uses the lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cv {
    pub preset: String,
    pub members: usize,
    pub budget: Option<usize>,
    pub reservoir_size: Vec<usize>,
    pub lags: Vec<usize>,
    pub leak_rate: Vec<f64>,
    pub spectral_scale: Vec<f64>,
    pub ridge: Vec<f64>,
    pub recurrent_scale: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub recurrent_density: Vec<f64>,
    pub input_density: Vec<f64>,
}

impl Default for Cv {
    fn default() -> Self {
        let g = EsnGrid::large();
        Self {
            preset: "large".into(),
            members: 10,
            budget: None,
            reservoir_size: g.reservoir_size,
            lags: g.lags,
            leak_rate: g.leak_rate,
            spectral_scale: g.spectral_scale,
            ridge: g.ridge,
            recurrent_scale: g.recurrent_scale,
            input_scale: g.input_scale,
            recurrent_density: g.recurrent_density,
            input_density: g.input_density,
        }
    }
}

impl Cv {
    pub fn grid(&self) -> Result<EsnGrid> {
        match self.preset.as_str() {
            "large" => Ok(EsnGrid::large()),
            "custom" => Ok(EsnGrid {
                reservoir_size: self.reservoir_size.clone(),
                lags: self.lags.clone(),
                leak_rate: self.leak_rate.clone(),
                spectral_scale: self.spectral_scale.clone(),
                ridge: self.ridge.clone(),
                recurrent_scale: self.recurrent_scale.clone(),
                input_scale: self.input_scale.clone(),
                recurrent_density: self.recurrent_density.clone(),
                input_density: self.input_density.clone(),
            }),
            other => usage!("unknown cv preset '{other}' (large, custom)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    /// Nominal central-interval coverages.
    pub coverages: Vec<f64>,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            coverages: vec![0.95, 0.8, 0.6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Baselines {
    /// `[p, d, q]` triples; empty means p, q ∈ 0..=3, d ∈ {0, 1}.
    pub arima_orders: Vec<[usize; 3]>,
    pub var_max_order: usize,
    pub eof_count: usize,
}

impl Default for Baselines {
    fn default() -> Self {
        Self {
            arima_orders: Vec::new(),
            var_max_order: 3,
            eof_count: 10,
        }
    }
}

impl Baselines {
    pub fn orders(&self) -> Vec<ArimaOrder> {
        if self.arima_orders.is_empty() {
            ArimaOrder::default_grid()
        } else {
            self.arima_orders.iter().map(|o| ArimaOrder::new(o[0], o[1], o[2])).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lorenz {
    pub etas: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<String>,
    pub members: usize,
    pub cv_members: usize,
}

impl Default for Lorenz {
    fn default() -> Self {
        Self {
            etas: (1..=7).map(|k| (k as f64 * 0.2 * 10.0).round() / 10.0).collect(),
            replicates: 50,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            members: 20,
            cv_members: 5,
        }
    }
}

impl Lorenz {
    pub fn methods(&self) -> Result<Vec<Method>> {
        self.methods
            .iter()
            .map(|m| Method::from_name(m).ok_or_else(|| CliError::Usage(format!("unknown method '{m}' (esn, var, arima, persistence)"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Power {
    /// Turbine-site registry.
    pub sites: PathBuf,
    /// Hours per time step.
    pub step_hours: f64,
}

impl Default for Power {
    fn default() -> Self {
        Self {
            sites: PathBuf::from("sites.toml"),
            step_hours: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Load a file, or the defaults when `path` is `None`. Relative paths in
    /// the file are resolved against the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|m| CliError::format(path, m))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.data, &mut cfg.paths.work_dir, &mut cfg.power.sites] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Apply `section.key=value` overrides; values are parsed as TOML and
    /// fall back to strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).expect("configuration serialises");
        for o in overrides {
            let Some((key, raw)) = o.split_once('=') else {
                usage!("override '{o}' is not of the form section.key=value");
            };
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let mut node = &mut doc;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| CliError::Usage(format!("'{key}' does not name a configuration key")))?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            }
        }
        let cfg: Self = doc.try_into().map_err(|e: toml::de::Error| CliError::Usage(format!("invalid override: {}", e.message())))?;
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let s = &self.split;
        if s.train_end >= s.validation_end {
            return Err(format!(
                "split.train_end ({}) must be before split.validation_end ({})",
                s.train_end, s.validation_end
            ));
        }
        if let Some(end) = s.test_end {
            if end <= s.validation_end {
                return Err(format!("split.test_end ({end}) must be after split.validation_end ({})", s.validation_end));
            }
        }
        self.esn.to_spec(self.seed).map_err(|e| e.to_string())?;
        if self.cv.preset == "custom" {
            let grid = self.cv.grid().map_err(|e| e.to_string())?;
            let base = self.esn.to_spec(self.seed).map_err(|e| e.to_string())?;
            for p in grid.points(&base) {
                p.validate().map_err(|e| format!("cv grid point out of bounds: {e}"))?;
            }
        }
        if self.ensemble.members == 0 || self.ensemble.horizons == 0 {
            return Err("ensemble.members and ensemble.horizons must be at least 1".into());
        }
        if self.calibration.coverages.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err("calibration coverages must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn work(&self, name: &str) -> PathBuf {
        self.paths.work_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_key_order_independent() {
        let text = r#"
            seed = 9
            [split]
            validation_end = 40
            train_end = 20
            [harmonics]
            periods = [24.0, 12.0]
            [esn]
            ridge = 0.5
            reservoir_size = 50
        "#;
        let a = ExperimentConfig::parse(text).unwrap();
        let b = ExperimentConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, 9);
        assert_eq!(a.esn.reservoir_size, 50);
        let va: toml::Value = toml::from_str(&a.to_toml()).unwrap();
        let vb: toml::Value = toml::from_str(&b.to_toml()).unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn overrides() {
        let c = ExperimentConfig::default()
            .with_overrides(&["esn.reservoir_size=300".into(), "paths.data=x.csv".into(), "cv.budget=5".into()])
            .unwrap();
        assert_eq!(c.esn.reservoir_size, 300);
        assert_eq!(c.paths.data, PathBuf::from("x.csv"));
        assert_eq!(c.cv.budget, Some(5));
        assert!(ExperimentConfig::default().with_overrides(&["esn.nope=1".into()]).is_err());
        assert!(ExperimentConfig::default().with_overrides(&["split.train_end=5000".into()]).is_err());
    }

    #[test]
    fn invalid_files() {
        assert!(ExperimentConfig::parse("[split]\ntrain_end = 10\nvalidation_end = 5").is_err());
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("[esn]\nleak_rate = 1.5").is_err());
        assert!(ExperimentConfig::parse("[cv]\npreset = \"custom\"\nleak_rate = [2.0]").is_err());
    }
}
