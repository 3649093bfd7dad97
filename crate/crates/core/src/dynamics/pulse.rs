use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box limits on the control `ε(t)`, in units of `ω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || !(lower < upper) {
            return Err(Error::InvalidInput(format!(
                "bounds require lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `|ε| ≤ ω₀`, i.e. `0 ≤ ω₀(t) ≤ 2ω₀`.
    pub fn small_range() -> Self {
        Self { lower: -1.0, upper: 1.0 }
    }

    /// `|ε| ≤ 20 ω₀`.
    pub fn large_range() -> Self {
        Self { lower: -20.0, upper: 20.0 }
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::small_range()
    }
}

/// Piecewise-constant control sampled on a uniform grid.
///
/// Sample `k` holds on `[k dt, (k+1) dt)`; the pulse spans `len() * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub bounds: Bounds,
}

impl ControlPulse {
    pub fn new(dt: f64, samples: Vec<f64>, bounds: Bounds) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("pulse needs at least one sample".into()));
        }
        if let Some((k, v)) = samples.iter().enumerate().find(|(_, v)| !bounds.contains(**v)) {
            return Err(Error::InvalidInput(format!(
                "sample {k} = {v} lies outside [{}, {}]",
                bounds.lower, bounds.upper
            )));
        }
        Ok(Self { dt, samples, bounds })
    }

    /// Number of grid steps for a window `t_f` at step `dt`; `t_f/dt` must be integral.
    pub fn step_count(t_f: f64, dt: f64) -> Result<usize> {
        if !(t_f > 0.0 && dt > 0.0) {
            return Err(Error::InvalidInput(format!("t_f = {t_f} and dt = {dt} must be positive")));
        }
        let ratio = t_f / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::InvalidInput(format!("t_f = {t_f} is not a multiple of dt = {dt}")));
        }
        Ok(steps as usize)
    }

    pub fn constant(t_f: f64, dt: f64, value: f64, bounds: Bounds) -> Result<Self> {
        let steps = Self::step_count(t_f, dt)?;
        Self::new(dt, vec![value; steps], bounds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Grid time `t_k = k dt`, for `k` in `0..=len()`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Qubit frequency `ω₀ + ε(t_k)` held on step `k`.
    pub fn omega(&self, k: usize, omega0: f64) -> f64 {
        omega0 + self.samples[k]
    }

    pub fn within_bounds(&self) -> bool {
        self.samples.iter().all(|v| self.bounds.contains(*v))
    }
}
