//! Nonlinear least-squares fit of a sampled kernel to `Σ_j p_j exp(q_j τ)`.
//!
//! The amplitudes enter linearly, so they are projected out: for a given
//! set of rates the optimal `p` solves a linear least-squares problem, and
//! Levenberg–Marquardt runs only over the rates (variable projection).
//! Each rate is parameterized as `q = -exp(u) + i b`, which keeps every
//! term decaying for any real `(u, b)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExpTerm, ExpTermList, FitReport};
use crate::error::{Error, Result};

/// Knobs for [`fit_multi_exponential`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Maximum accepted relative L2 residual.
    pub threshold: f64,
    /// Smallest decay rate used for the deterministic starts (defaults to `1/T`).
    pub rate_min: Option<f64>,
    /// Largest decay rate used for the deterministic starts (defaults to `100/T`).
    pub rate_max: Option<f64>,
    /// Seeded random restarts tried when the deterministic starts miss the threshold.
    pub random_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            rate_min: None,
            rate_max: None,
            random_starts: 24,
            seed: 0,
            max_iterations: 300,
        }
    }
}

const U_MIN: f64 = -25.0;
const U_MAX: f64 = 12.0;

struct Problem<'a> {
    times: &'a [f64],
    values: DVector<C64>,
    norm: f64,
    k: usize,
}

struct Evaluation {
    residual: DVector<f64>,
    amplitudes: Vec<C64>,
    cost: f64,
}

impl<'a> Problem<'a> {
    fn rates(&self, z: &[f64]) -> Vec<C64> {
        (0..self.k)
            .map(|j| C64::new(-z[2 * j].clamp(U_MIN, U_MAX).exp(), z[2 * j + 1]))
            .collect()
    }

    fn evaluate(&self, z: &[f64]) -> Option<Evaluation> {
        let rates = self.rates(z);
        let n = self.times.len();
        let basis = DMatrix::from_fn(n, self.k, |i, j| (rates[j] * self.times[i]).exp());
        let qr = basis.clone().qr();
        let r = qr.r();
        let scale = (0..self.k).map(|j| r[(j, j)].norm()).fold(0.0, f64::max);
        if !(scale > 0.0) || (0..self.k).any(|j| r[(j, j)].norm() <= 1e-13 * scale) {
            return None;
        }
        let rhs = qr.q().adjoint() * &self.values;
        let amplitudes = r.solve_upper_triangular(&rhs)?;
        let misfit = &basis * &amplitudes - &self.values;
        let mut residual = DVector::zeros(2 * n);
        for i in 0..n {
            residual[i] = misfit[i].re;
            residual[n + i] = misfit[i].im;
        }
        let cost = residual.norm_squared();
        if !cost.is_finite() {
            return None;
        }
        Some(Evaluation {
            residual,
            amplitudes: amplitudes.iter().copied().collect(),
            cost,
        })
    }

    /// Levenberg–Marquardt from `z0`; returns the final parameters and evaluation.
    fn solve(&self, z0: Vec<f64>, max_iterations: usize) -> Option<(Vec<f64>, Evaluation)> {
        let m = 2 * self.k;
        let mut z = z0;
        let mut current = self.evaluate(&z)?;
        let mut damping = 1e-3;
        for _ in 0..max_iterations {
            // Central-difference Jacobian of the projected residual.
            let rows = current.residual.len();
            let mut jac = DMatrix::<f64>::zeros(rows, m);
            for p in 0..m {
                let h = 1e-6 * z[p].abs().max(1.0);
                let mut plus = z.clone();
                plus[p] += h;
                let mut minus = z.clone();
                minus[p] -= h;
                let (Some(ep), Some(em)) = (self.evaluate(&plus), self.evaluate(&minus)) else {
                    return Some((z, current));
                };
                let column = (&ep.residual - &em.residual) / (2.0 * h);
                jac.set_column(p, &column);
            }
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &current.residual;

            let mut improved = false;
            for _ in 0..30 {
                let mut lhs = jtj.clone();
                for d in 0..m {
                    lhs[(d, d)] += damping * jtj[(d, d)].max(1e-12);
                }
                let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                    damping *= 4.0;
                    continue;
                };
                let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                match self.evaluate(&trial) {
                    Some(eval) if eval.cost < current.cost => {
                        let gain = (current.cost - eval.cost) / current.cost.max(f64::MIN_POSITIVE);
                        z = trial;
                        current = eval;
                        damping = (damping / 3.0).max(1e-12);
                        improved = gain > 1e-13;
                        break;
                    }
                    _ => damping *= 4.0,
                }
            }
            if !improved {
                break;
            }
        }
        Some((z, current))
    }
}

fn check_samples(samples: &[(f64, C64)], term_count: usize) -> Result<f64> {
    if term_count < 1 {
        return Err(Error::InvalidInput("term count K must be >= 1".into()));
    }
    if samples.len() < 2 * term_count + 1 {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot determine {} terms",
            samples.len(),
            term_count
        )));
    }
    let t0 = samples[0].0;
    let step = samples[1].0 - t0;
    if !(t0 >= 0.0) || !(step > 0.0) {
        return Err(Error::InvalidInput("sample times must start at >= 0 and increase".into()));
    }
    let horizon = samples[samples.len() - 1].0;
    for (i, (t, v)) in samples.iter().enumerate() {
        if (t - (t0 + i as f64 * step)).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::InvalidInput(format!("sample {i} is off the uniform grid")));
        }
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} is not finite")));
        }
    }
    Ok(horizon)
}

/// Fits `term_count` decaying complex exponentials to uniformly sampled kernel values.
///
/// Deterministic starts place the rates log-spaced in `[rate_min, rate_max]`
/// with oscillation phase `0` and `-π/2`; seeded random starts follow only if
/// those miss the threshold. Returns `FitFailed` when no start gets the
/// relative residual under `options.threshold`.
pub fn fit_multi_exponential(
    samples: &[(f64, C64)],
    term_count: usize,
    options: &FitOptions,
) -> Result<(ExpTermList, FitReport)> {
    let (terms, report) = best_fit(samples, term_count, options)?;
    if report.relative_l2_residual > options.threshold {
        return Err(Error::FitFailed {
            residual: report.relative_l2_residual,
            threshold: options.threshold,
            term_count,
        });
    }
    Ok((terms, report))
}

/// Same search as [`fit_multi_exponential`], but hands back the best fit even
/// when it misses the threshold. The threshold still ends the random restarts early.
pub fn best_fit(
    samples: &[(f64, C64)],
    term_count: usize,
    options: &FitOptions,
) -> Result<(ExpTermList, FitReport)> {
    let horizon = check_samples(samples, term_count)?;
    let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let values = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let norm = values.norm();
    let report = |residual: f64| FitReport {
        term_count,
        fit_horizon: horizon,
        relative_l2_residual: residual,
        sample_count: samples.len(),
    };
    if norm == 0.0 {
        // A vanishing kernel is represented exactly by zero amplitudes.
        let terms = (0..term_count)
            .map(|j| ExpTerm::new(C64::new(0.0, 0.0), C64::new(-(j as f64 + 1.0) / horizon, 0.0)))
            .collect();
        return Ok((ExpTermList::new(terms)?, report(0.0)));
    }

    let problem = Problem {
        times: &times,
        values,
        norm,
        k: term_count,
    };
    let rate_min = options.rate_min.unwrap_or(1.0 / horizon);
    let rate_max = options.rate_max.unwrap_or(100.0 / horizon).max(rate_min);

    let log_spaced = |j: usize| -> f64 {
        if term_count == 1 {
            (rate_min * rate_max).sqrt()
        } else {
            let frac = j as f64 / (term_count - 1) as f64;
            rate_min * (rate_max / rate_min).powf(frac)
        }
    };
    let mut starts: Vec<Vec<f64>> = [0.0, -std::f64::consts::FRAC_PI_2]
        .iter()
        .map(|phase: &f64| {
            (0..term_count)
                .flat_map(|j| {
                    let r = log_spaced(j);
                    [r.ln(), r * phase.sin()]
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let random: Vec<Vec<f64>> = (0..options.random_starts)
        .map(|_| {
            (0..term_count)
                .flat_map(|_| {
                    let u = rng.gen_range(rate_min.ln() - 1.0..rate_max.ln() + 1.0);
                    let b = rng.gen_range(-1.0..1.0) * u.exp();
                    [u, b]
                })
                .collect()
        })
        .collect();
    let deterministic = starts.len();
    starts.extend(random);

    let mut best: Option<(f64, Vec<f64>, Vec<C64>)> = None;
    for (index, z0) in starts.into_iter().enumerate() {
        if index >= deterministic {
            if let Some((residual, _, _)) = &best {
                if *residual <= options.threshold {
                    break;
                }
            }
        }
        if let Some((z, eval)) = problem.solve(z0, options.max_iterations) {
            let residual = eval.cost.sqrt() / problem.norm;
            if best.as_ref().map_or(true, |b| residual < b.0) {
                best = Some((residual, z, eval.amplitudes));
            }
        }
    }

    let Some((residual, z, amplitudes)) = best else {
        return Err(Error::FitFailed {
            residual: f64::INFINITY,
            threshold: options.threshold,
            term_count,
        });
    };
    let rates = problem.rates(&z);
    let terms = amplitudes
        .into_iter()
        .zip(rates)
        .map(|(p, q)| ExpTerm::new(p, q))
        .collect();
    Ok((ExpTermList::new(terms)?, report(residual)))
}
