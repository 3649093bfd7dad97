use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{BathFamily, CellParams};
use crate::bath::{FitOptions, OhmicBath};
use crate::dynamics::{Bounds, ControlPulse};
use crate::error::{Error, Result};
use crate::optimizer::{GateKind, GuessPolicy, KrotovConfig};

fn default_fit_terms() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    Lorentzian {
        alpha: f64,
        gamma: f64,
        omega_big: f64,
    },
    Ohmic {
        alpha_o: f64,
        omega_c: f64,
        #[serde(default = "default_fit_terms")]
        fit_terms: usize,
        /// Kernel window for the fit; defaults to `t_f + 5/ω_c`.
        #[serde(default)]
        fit_horizon: Option<f64>,
        /// Previously fitted terms; skips the fit when set.
        #[serde(default)]
        terms_file: Option<PathBuf>,
    },
}

impl BathConfig {
    pub fn family(&self) -> BathFamily {
        match self {
            BathConfig::Lorentzian { .. } => BathFamily::Lorentzian,
            BathConfig::Ohmic { .. } => BathFamily::Ohmic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsPreset {
    Small,
    Large,
}

/// Either `"small"`, `"large"` or `{ "lower": .., "upper": .. }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundsSpec {
    Preset(BoundsPreset),
    Explicit { lower: f64, upper: f64 },
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec::Preset(BoundsPreset::Small)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub seed: u64,
    pub threshold: f64,
    pub samples: usize,
    pub random_starts: usize,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        Self {
            seed: o.seed,
            threshold: o.threshold,
            samples: 2000,
            random_starts: o.random_starts,
            max_iterations: o.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_trajectory: bool,
    pub verbose: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            emit_trajectory: false,
            verbose: false,
        }
    }
}

/// Explicit value lists; each one replaces the matching scalar of the base config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub alpha: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub omega_big: Option<Vec<f64>>,
    pub alpha_o: Option<Vec<f64>>,
    pub omega_c: Option<Vec<f64>>,
    pub t_f: Option<Vec<f64>>,
}

fn default_omega0() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bath: BathConfig,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    pub target: GateKind,
    pub t_f: f64,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub krotov: KrotovConfig,
    #[serde(default)]
    pub guess: GuessPolicy,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// CSV with an `epsilon` column; replaces the closed-system guess.
    #[serde(default)]
    pub pulse_file: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {value}")))
    }
}

fn non_negative(field: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {value}")))
    }
}

fn finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {value}")))
    }
}

fn check_axis(field: &str, values: &Option<Vec<f64>>, check: fn(&str, f64) -> Result<()>) -> Result<()> {
    if let Some(values) = values {
        if values.is_empty() {
            return Err(Error::config(field, "axis must list at least one value"));
        }
        for v in values {
            check(field, *v)?;
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn bounds(&self) -> Result<Bounds> {
        match self.bounds {
            BoundsSpec::Preset(BoundsPreset::Small) => Ok(Bounds::small_range()),
            BoundsSpec::Preset(BoundsPreset::Large) => Ok(Bounds::large_range()),
            BoundsSpec::Explicit { lower, upper } => Bounds::new(lower, upper)
                .map_err(|_| Error::config("bounds", format!("need lower < upper, got [{lower}, {upper}]"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.bath {
            BathConfig::Lorentzian {
                alpha,
                gamma,
                omega_big,
            } => {
                non_negative("bath.alpha", *alpha)?;
                positive("bath.gamma", *gamma)?;
                finite("bath.omega_big", *omega_big)?;
            }
            BathConfig::Ohmic {
                alpha_o,
                omega_c,
                fit_terms,
                fit_horizon,
                ..
            } => {
                non_negative("bath.alpha_o", *alpha_o)?;
                positive("bath.omega_c", *omega_c)?;
                if *fit_terms == 0 {
                    return Err(Error::config("bath.fit_terms", "must be >= 1"));
                }
                if let Some(h) = fit_horizon {
                    positive("bath.fit_horizon", *h)?;
                }
            }
        }
        positive("omega0", self.omega0)?;
        positive("t_f", self.t_f)?;
        positive("dt", self.dt)?;
        ControlPulse::step_count(self.t_f, self.dt)
            .map_err(|_| Error::config("dt", format!("t_f = {} is not a whole number of steps of {}", self.t_f, self.dt)))?;
        self.bounds()?;
        self.krotov.validate()?;
        positive("fit.threshold", self.fit.threshold)?;
        if self.fit.samples < 8 {
            return Err(Error::config("fit.samples", "must be >= 8"));
        }
        if let Some(axes) = &self.sweep {
            self.validate_axes(axes)?;
        }
        Ok(())
    }

    fn validate_axes(&self, axes: &SweepAxes) -> Result<()> {
        let lorentzian = matches!(self.bath, BathConfig::Lorentzian { .. });
        let misplaced = if lorentzian {
            [("sweep.alpha_o", &axes.alpha_o), ("sweep.omega_c", &axes.omega_c)]
        } else {
            [("sweep.alpha", &axes.alpha), ("sweep.gamma", &axes.gamma)]
        };
        for (field, axis) in misplaced {
            if axis.is_some() {
                return Err(Error::config(field, "axis does not apply to this bath kind"));
            }
        }
        if !lorentzian && axes.omega_big.is_some() {
            return Err(Error::config("sweep.omega_big", "axis does not apply to this bath kind"));
        }
        check_axis("sweep.alpha", &axes.alpha, non_negative)?;
        check_axis("sweep.gamma", &axes.gamma, positive)?;
        check_axis("sweep.omega_big", &axes.omega_big, finite)?;
        check_axis("sweep.alpha_o", &axes.alpha_o, non_negative)?;
        check_axis("sweep.omega_c", &axes.omega_c, positive)?;
        check_axis("sweep.t_f", &axes.t_f, positive)?;
        if let Some(times) = &axes.t_f {
            for t in times {
                ControlPulse::step_count(*t, self.dt)
                    .map_err(|_| Error::config("sweep.t_f", format!("t_f = {t} is not a whole number of steps of {}", self.dt)))?;
            }
        }
        Ok(())
    }

    pub fn cell_params(&self) -> CellParams {
        let (coupling, width, center) = match &self.bath {
            BathConfig::Lorentzian {
                alpha,
                gamma,
                omega_big,
            } => (*alpha, *gamma, Some(*omega_big)),
            BathConfig::Ohmic { alpha_o, omega_c, .. } => (*alpha_o, *omega_c, None),
        };
        CellParams {
            family: self.bath.family(),
            coupling,
            width,
            center,
            t_f: self.t_f,
        }
    }

    /// Expands the sweep axes into single-run configs, ordered by grid index.
    ///
    /// Axis nesting, outermost first: center, t_f, coupling, width.
    pub fn expand_grid(&self) -> Vec<ExperimentConfig> {
        let axes = self.sweep.clone().unwrap_or_default();
        let base = self.cell_params();
        let centers: Vec<Option<f64>> = match (&self.bath, &axes.omega_big) {
            (BathConfig::Lorentzian { .. }, Some(list)) => list.iter().map(|v| Some(*v)).collect(),
            _ => vec![base.center],
        };
        let times = axes.t_f.clone().unwrap_or(vec![self.t_f]);
        let (couplings, widths) = match self.bath {
            BathConfig::Lorentzian { .. } => (axes.alpha.clone(), axes.gamma.clone()),
            BathConfig::Ohmic { .. } => (axes.alpha_o.clone(), axes.omega_c.clone()),
        };
        let couplings = couplings.unwrap_or(vec![base.coupling]);
        let widths = widths.unwrap_or(vec![base.width]);

        let mut out = Vec::with_capacity(centers.len() * times.len() * couplings.len() * widths.len());
        for center in &centers {
            for t_f in &times {
                for coupling in &couplings {
                    for width in &widths {
                        let mut cell = self.clone();
                        cell.sweep = None;
                        cell.t_f = *t_f;
                        cell.bath = match &self.bath {
                            BathConfig::Lorentzian { .. } => BathConfig::Lorentzian {
                                alpha: *coupling,
                                gamma: *width,
                                omega_big: center.unwrap_or_default(),
                            },
                            BathConfig::Ohmic {
                                fit_terms,
                                fit_horizon,
                                terms_file,
                                ..
                            } => BathConfig::Ohmic {
                                alpha_o: *coupling,
                                omega_c: *width,
                                fit_terms: *fit_terms,
                                fit_horizon: *fit_horizon,
                                terms_file: terms_file.clone(),
                            },
                        };
                        out.push(cell);
                    }
                }
            }
        }
        out
    }

    /// Fit settings for an Ohmic kernel.
    pub fn fit_options(&self, bath: &OhmicBath) -> FitOptions {
        FitOptions {
            threshold: self.fit.threshold,
            random_starts: self.fit.random_starts,
            seed: self.fit.seed,
            max_iterations: self.fit.max_iterations,
            ..bath.fit_options()
        }
    }
}
