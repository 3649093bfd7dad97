//! Zero-temperature bath models and their multi-exponential kernels.
//!
//! The qubit couples to its environment only through the bath correlation
//! function `c(τ)`. The dynamics consume that kernel as a finite sum
//! `c(τ) = Σ_j p_j exp(q_j τ)`; each term drives one memory function.
//! A Lorentzian spectral density produces exactly one term, the Ohmic
//! family has to be fitted.

mod fit;

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{best_fit, fit_multi_exponential, FitOptions};

/// Lorentzian spectral density centred at `omega_big` with width `gamma`.
///
/// Its correlation function is `α(γ/2) exp(-γτ - iΩτ)` for `τ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianBath {
    pub alpha: f64,
    pub gamma: f64,
    pub omega_big: f64,
}

impl LorentzianBath {
    pub fn new(alpha: f64, gamma: f64, omega_big: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be > 0, got {gamma}")));
        }
        if !omega_big.is_finite() {
            return Err(Error::InvalidInput("omega_big must be finite".into()));
        }
        Ok(Self {
            alpha,
            gamma,
            omega_big,
        })
    }

    /// Closed-form correlation function, evaluated directly.
    pub fn correlation(&self, tau: f64) -> C64 {
        let rate = C64::new(-self.gamma * tau.abs(), -self.omega_big * tau);
        self.alpha * self.gamma / 2.0 * rate.exp()
    }
}

/// Ohmic spectral density `2 α_o ω exp(-ω/ω_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhmicBath {
    pub alpha_o: f64,
    pub omega_c: f64,
}

impl OhmicBath {
    pub fn new(alpha_o: f64, omega_c: f64) -> Result<Self> {
        if !(alpha_o >= 0.0 && alpha_o.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha_o must be >= 0, got {alpha_o}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::InvalidInput(format!("omega_c must be > 0, got {omega_c}")));
        }
        Ok(Self { alpha_o, omega_c })
    }

    /// Fit horizon that covers a control window `t_f` plus five kernel decay times.
    pub fn default_fit_horizon(&self, t_f: f64) -> f64 {
        t_f + 5.0 / self.omega_c
    }

    /// Uniformly sampled kernel on `[0, horizon]`, ready for fitting.
    pub fn kernel_samples(&self, horizon: f64, count: usize) -> Vec<(f64, C64)> {
        let step = horizon / (count.max(2) - 1) as f64;
        (0..count.max(2))
            .map(|i| {
                let tau = i as f64 * step;
                (tau, ohmic_correlation(tau, self))
            })
            .collect()
    }

    /// Fit options seeded with rates log-spaced around the cutoff.
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            rate_min: Some(self.omega_c / 10.0),
            rate_max: Some(self.omega_c * 10.0),
            ..FitOptions::default()
        }
    }
}

/// Ohmic correlation function `2 α_o ω_c² (1 + i ω_c τ)^-2`.
pub fn ohmic_correlation(tau: f64, bath: &OhmicBath) -> C64 {
    let denom = C64::new(1.0, bath.omega_c * tau);
    2.0 * bath.alpha_o * bath.omega_c * bath.omega_c / (denom * denom)
}

/// One kernel term `p exp(q τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub amplitude: C64,
    pub rate: C64,
}

impl ExpTerm {
    pub fn new(amplitude: C64, rate: C64) -> Self {
        Self { amplitude, rate }
    }

    pub fn evaluate(&self, tau: f64) -> C64 {
        self.amplitude * (self.rate * tau).exp()
    }
}

/// Ordered list of kernel terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpTermList {
    terms: Vec<ExpTerm>,
}

impl ExpTermList {
    /// Builds a list, rejecting any term whose rate does not decay.
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self> {
        for (j, term) in terms.iter().enumerate() {
            if !(term.rate.re < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "term {j}: rate real part must be < 0, got {}",
                    term.rate.re
                )));
            }
            if !(term.amplitude.re.is_finite()
                && term.amplitude.im.is_finite()
                && term.rate.im.is_finite())
            {
                return Err(Error::InvalidInput(format!("term {j}: non-finite coefficient")));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ_j p_j exp(q_j τ)`.
    pub fn evaluate(&self, tau: f64) -> C64 {
        evaluate_terms(self, tau)
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm::new(t.amplitude * factor, t.rate))
                .collect(),
        }
    }

    /// True when every amplitude vanishes.
    pub fn is_uncoupled(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == C64::new(0.0, 0.0))
    }
}

/// Single-term kernel matching the Lorentzian correlation function.
pub fn lorentzian_terms(bath: &LorentzianBath) -> ExpTermList {
    ExpTermList {
        terms: vec![ExpTerm::new(
            C64::new(bath.alpha * bath.gamma / 2.0, 0.0),
            C64::new(-bath.gamma, -bath.omega_big),
        )],
    }
}

pub fn evaluate_terms(terms: &ExpTermList, tau: f64) -> C64 {
    terms.terms.iter().map(|t| t.evaluate(tau)).sum()
}

/// Quality record for a fitted kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub term_count: usize,
    pub fit_horizon: f64,
    pub relative_l2_residual: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TermRecord {
    p_re: f64,
    p_im: f64,
    q_re: f64,
    q_im: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TermCache {
    terms: Vec<TermRecord>,
    #[serde(flatten)]
    report: FitReport,
}

/// Serializes a fitted kernel with its report to the JSON cache layout.
pub fn terms_to_json(terms: &ExpTermList, report: &FitReport) -> Result<String> {
    let cache = TermCache {
        terms: terms
            .terms
            .iter()
            .map(|t| TermRecord {
                p_re: t.amplitude.re,
                p_im: t.amplitude.im,
                q_re: t.rate.re,
                q_im: t.rate.im,
            })
            .collect(),
        report: *report,
    };
    Ok(serde_json::to_string_pretty(&cache)?)
}

pub fn terms_from_json(text: &str) -> Result<(ExpTermList, FitReport)> {
    let cache: TermCache = serde_json::from_str(text)?;
    let terms = cache
        .terms
        .iter()
        .map(|r| ExpTerm::new(C64::new(r.p_re, r.p_im), C64::new(r.q_re, r.q_im)))
        .collect();
    Ok((ExpTermList::new(terms)?, cache.report))
}

pub fn load_terms(path: &Path) -> Result<(ExpTermList, FitReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    terms_from_json(&text)
}
