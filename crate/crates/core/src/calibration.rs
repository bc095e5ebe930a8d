//! Sigmoid calibration of SVM decision values.
//!
//! A decision value `f` is mapped to `P(member | f) = 1/(1 + exp(A·f + B))`.
//! `A` and `B` maximize the likelihood of held-out labels, with the 0/1
//! targets smoothed to `(N₊+1)/(N₊+2)` and `1/(N₋+2)` so that perfectly
//! separated scores still give a finite fit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-10;
/// Ridge added to the Hessian diagonal.
const SIGMA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidCalibration {
    pub a: f64,
    pub b: f64,
}

impl SigmoidCalibration {
    pub fn new(a: f64, b: f64) -> Self {
        SigmoidCalibration { a, b }
    }

    /// `1/(1 + exp(A·f + B))`, evaluated without overflow.
    pub fn probability(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Decision value where the probability crosses one half, `−B/A`.
    pub fn flip_point(&self) -> Option<f64> {
        (self.a != 0.0).then(|| -self.b / self.a)
    }
}

/// Free-function form of [`SigmoidCalibration::probability`].
pub fn apply_sigmoid(cal: &SigmoidCalibration, f: f64) -> f64 {
    cal.probability(f)
}

/// Result of a sigmoid fit with its convergence diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmoidFit {
    pub calibration: SigmoidCalibration,
    pub iterations: usize,
    /// Gradient of the negative log-likelihood at the solution, `(∂A, ∂B)`.
    pub gradient: [f64; 2],
    pub negative_log_likelihood: f64,
}

/// Smoothed targets for the given labels.
pub fn smoothed_targets(y: &[i8]) -> Vec<f64> {
    let pos = y.iter().filter(|&&l| l > 0).count() as f64;
    let neg = y.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    y.iter().map(|&l| if l > 0 { hi } else { lo }).collect()
}

/// Negative log-likelihood of the smoothed targets under `cal`.
pub fn negative_log_likelihood(scores: &[f64], targets: &[f64], cal: &SigmoidCalibration) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let z = cal.a * f + cal.b;
            // t·z + ln(1 + e^(−z)), rearranged to keep exp() bounded
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Analytic gradient `(∂/∂A, ∂/∂B)` of [`negative_log_likelihood`].
pub fn nll_gradient(scores: &[f64], targets: &[f64], cal: &SigmoidCalibration) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&f, &t) in scores.iter().zip(targets) {
        let d = t - cal.probability(f);
        g[0] += f * d;
        g[1] += d;
    }
    g
}

fn validate(scores: &[f64], y: &[i8]) -> Result<()> {
    if scores.len() != y.len() {
        return Err(Error::Calibration(format!("{} scores but {} labels", scores.len(), y.len())));
    }
    if !y.iter().any(|&l| l > 0) || !y.iter().any(|&l| l < 0) {
        return Err(Error::Calibration("need at least one positive and one negative example".into()));
    }
    if y.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::Calibration("labels must be ±1".into()));
    }
    if scores.iter().any(|f| !f.is_finite()) {
        return Err(Error::Calibration("non-finite decision value".into()));
    }
    Ok(())
}

/// Fits `(A, B)` by damped Newton iterations from
/// `A = 0, B = ln((N₋+1)/(N₊+1))`.
pub fn fit_sigmoid(scores: &[f64], y: &[i8]) -> Result<SigmoidCalibration> {
    fit_sigmoid_report(scores, y).map(|fit| fit.calibration)
}

pub fn fit_sigmoid_report(scores: &[f64], y: &[i8]) -> Result<SigmoidFit> {
    validate(scores, y)?;
    let targets = smoothed_targets(y);
    let pos = y.iter().filter(|&&l| l > 0).count() as f64;
    let neg = y.len() as f64 - pos;

    let mut cal = SigmoidCalibration::new(0.0, ((neg + 1.0) / (pos + 1.0)).ln());
    let mut fval = negative_log_likelihood(scores, &targets, &cal);
    let mut grad = nll_gradient(scores, &targets, &cal);
    let mut iterations = 0;

    while iterations < MAX_ITER && grad_norm(grad) >= GRAD_TOL {
        iterations += 1;
        let (mut h11, mut h22, mut h21) = (SIGMA, SIGMA, 0.0);
        for &f in scores {
            let p = cal.probability(f);
            let d = p * (1.0 - p);
            h11 += f * f * d;
            h22 += d;
            h21 += f * d;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * grad[0] - h21 * grad[1]) / det;
        let db = -(-h21 * grad[0] + h11 * grad[1]) / det;
        let slope = grad[0] * da + grad[1] * db;

        let mut step = 1.0;
        let mut accepted = false;
        while step >= MIN_STEP {
            let trial = SigmoidCalibration::new(cal.a + step * da, cal.b + step * db);
            let tval = negative_log_likelihood(scores, &targets, &trial);
            let tgrad = nll_gradient(scores, &targets, &trial);
            let armijo = tval < fval + 1e-4 * step * slope;
            // near the optimum the objective stops resolving decreases; a
            // step that does not increase it and shrinks the gradient is taken
            let flat = tval <= fval + 1e-12 * fval.abs().max(1.0) && grad_norm(tgrad) < grad_norm(grad);
            if armijo || flat {
                cal = trial;
                fval = tval;
                grad = tgrad;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if !(cal.a.is_finite() && cal.b.is_finite()) {
        return Err(Error::Calibration("fit diverged".into()));
    }
    Ok(SigmoidFit {
        calibration: cal,
        iterations,
        gradient: grad,
        negative_log_likelihood: fval,
    })
}

fn grad_norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_asymptote() {
        let cal = SigmoidCalibration::new(-1.0, 0.0);
        assert_eq!(apply_sigmoid(&cal, 0.0), 0.5);
        assert!(apply_sigmoid(&cal, 50.0) > 1.0 - 1e-15);
        assert_eq!(apply_sigmoid(&cal, 1e308), 1.0);
        assert!(apply_sigmoid(&cal, -1e308) >= 0.0);
        assert_eq!(apply_sigmoid(&SigmoidCalibration::new(-2.0, 1.0), 0.5), 0.5);
    }

    #[test]
    fn flip_point_is_half() {
        let cal = SigmoidCalibration::new(-3.7, 1.2);
        let f = cal.flip_point().unwrap();
        assert!((cal.probability(f) - 0.5).abs() < 1e-15);
        assert_eq!(SigmoidCalibration::new(0.0, 1.0).flip_point(), None);
    }

    #[test]
    fn one_example_per_class_is_finite() {
        let fit = fit_sigmoid_report(&[1.0, -1.0], &[1, -1]).unwrap();
        assert!(fit.calibration.a.is_finite() && fit.calibration.b.is_finite());
        assert!(fit.calibration.a < 0.0);
        // t₊ = 2/3, t₋ = 1/3 are reproduced exactly at the optimum
        assert!((fit.calibration.probability(1.0) - 2.0 / 3.0).abs() < 1e-9);
        assert!((fit.calibration.probability(-1.0) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn separated_scores_monotone() {
        let scores = [-3.0, -2.0, -1.5, -0.5, 0.7, 1.1, 2.0, 4.0];
        let y = [-1, -1, -1, -1, 1, 1, 1, 1];
        let cal = fit_sigmoid(&scores, &y).unwrap();
        assert!(cal.a < 0.0);
        let p: Vec<f64> = scores.iter().map(|&f| cal.probability(f)).collect();
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn input_errors() {
        assert!(fit_sigmoid(&[1.0, 2.0], &[1, 1]).is_err());
        assert!(fit_sigmoid(&[1.0, f64::NAN], &[1, -1]).is_err());
        assert!(fit_sigmoid(&[1.0], &[1, -1]).is_err());
        assert!(fit_sigmoid(&[], &[]).is_err());
    }
}
