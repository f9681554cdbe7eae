//! Limited-memory BFGS with a backtracking (Armijo) line search.
//!
//! Every accepted step satisfies the sufficient-decrease condition, so the
//! objective sequence recorded in the trace is strictly decreasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept.
    pub history: usize,
    pub max_iterations: usize,
    /// Stop once the Euclidean gradient norm falls to this value.
    pub grad_tolerance: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor per backtracking trial.
    pub backtrack: f64,
    pub max_line_search_steps: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 10,
            max_iterations: 500,
            grad_tolerance: 1e-5,
            armijo: 1e-4,
            backtrack: 0.5,
            max_line_search_steps: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Step length accepted by the line search (0 for the initial point).
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    GradientTolerance,
    MaxIterations,
    /// No step along the search direction decreased the objective; the
    /// current point is returned as-is.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub status: ConvergenceStatus,
}

/// Minimizes `f`, which returns `(value, gradient)` at a point.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, config: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            detail: format!("objective {fx} at the starting point"),
        });
    }
    let mut trace = vec![IterationRecord {
        iteration: 0,
        objective: fx,
        grad_norm: norm2(&g),
        step_size: 0.0,
    }];
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(config.history);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(config.history);

    for iteration in 1..=config.max_iterations {
        let gnorm = norm2(&g);
        if gnorm <= config.grad_tolerance {
            return Ok(finish(x, fx, g, trace, ConvergenceStatus::GradientTolerance));
        }

        let mut direction = two_loop(&g, &s_hist, &y_hist);
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        // Without curvature information, take a unit-length first step.
        let mut step = if s_hist.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };

        let mut accepted = None;
        let mut saw_finite = false;
        for _ in 0..config.max_line_search_steps {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial)?;
            let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
            saw_finite |= finite;
            if finite && ft <= fx + config.armijo * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= config.backtrack;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            if !saw_finite {
                return Err(Error::NonFinite {
                    iteration,
                    detail: "every line-search trial produced a non-finite objective".to_owned(),
                });
            }
            return Ok(finish(x, fx, g, trace, ConvergenceStatus::LineSearchStalled));
        };
        if f_new >= fx {
            // Armijo held only up to rounding; no progress is possible.
            return Ok(finish(x, fx, g, trace, ConvergenceStatus::LineSearchStalled));
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm2(&s) * norm2(&y) {
            if s_hist.len() == config.history {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(IterationRecord {
            iteration,
            objective: fx,
            grad_norm: norm2(&g),
            step_size: step,
        });
    }

    let status = if norm2(&g) <= config.grad_tolerance {
        ConvergenceStatus::GradientTolerance
    } else {
        ConvergenceStatus::MaxIterations
    };
    Ok(finish(x, fx, g, trace, status))
}

fn finish(
    x: Vec<f64>,
    objective: f64,
    gradient: Vec<f64>,
    trace: Vec<IterationRecord>,
    status: ConvergenceStatus,
) -> Minimum {
    Minimum {
        x,
        objective,
        gradient,
        trace,
        status,
    }
}

/// Two-loop recursion: returns `-H·g` for the implicit inverse Hessian `H`.
fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q = g.to_vec();
    let m = s_hist.len();
    let mut alphas = vec![0.0; m];
    for i in (0..m).rev() {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        alphas[i] = rho * dot(&s_hist[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
            *qj -= alphas[i] * yj;
        }
    }
    if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
        let gamma = dot(s, y) / dot(y, y);
        for qj in &mut q {
            *qj *= gamma;
        }
    }
    for i in 0..m {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        let beta = rho * dot(&y_hist[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
            *qj += (alphas[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn minimizes_rosenbrock() {
        let cfg = LbfgsConfig {
            max_iterations: 1000,
            grad_tolerance: 1e-8,
            ..Default::default()
        };
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert_eq!(m.status, ConvergenceStatus::GradientTolerance);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trace_is_monotone() {
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &LbfgsConfig::default()).unwrap();
        for w in m.trace.windows(2) {
            assert!(w[1].objective < w[0].objective);
        }
    }

    #[test]
    fn quadratic_converges_exactly() {
        let quad = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let f = 0.5 * (x[0] * x[0] + 10.0 * x[1] * x[1]) - x[0];
            Ok((f, vec![x[0] - 1.0, 10.0 * x[1]]))
        };
        let m = minimize(quad, vec![5.0, 5.0], &LbfgsConfig { grad_tolerance: 1e-10, ..Default::default() }).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-9 && m.x[1].abs() < 1e-9);
    }

    #[test]
    fn non_finite_start_aborts() {
        let bad = |_: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((f64::NAN, vec![0.0])) };
        assert!(matches!(
            minimize(bad, vec![0.0], &LbfgsConfig::default()),
            Err(Error::NonFinite { iteration: 0, .. })
        ));
    }

    #[test]
    fn max_iterations_is_respected() {
        let cfg = LbfgsConfig { max_iterations: 3, grad_tolerance: 0.0, ..Default::default() };
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert!(m.trace.len() <= 4);
        assert_ne!(m.status, ConvergenceStatus::GradientTolerance);
    }
}
