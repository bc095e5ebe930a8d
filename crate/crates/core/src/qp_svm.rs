//! Soft-margin linear SVM via its dual quadratic program.
//!
//! The dual is
//!
//! ```text
//! maximize   W(α) = Σ αᵢ − ½ Σᵢ Σⱼ yᵢ yⱼ αᵢ αⱼ (xᵢ·xⱼ)
//! subject to Σ yᵢ αᵢ = 0,   0 ≤ αᵢ ≤ C
//! ```
//!
//! and is solved by repeatedly optimizing the maximal violating pair of
//! multipliers in closed form. The equality constraint means no single
//! multiplier can move alone. The decision rule is then
//! `f(x) = w·x + b` with `w = Σ αᵢ yᵢ xᵢ`.

use crate::vectorizer::SparseVector;
use crate::{Error, Result};

/// Curvature floor for the pair subproblem when `xᵢ = xⱼ`.
const TAU: f64 = 1e-12;

/// Labeled vectors plus the regularization constant `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    vectors: Vec<SparseVector>,
    y: Vec<i8>,
    c: f64,
}

impl TrainingSet {
    pub fn new(vectors: Vec<SparseVector>, y: Vec<i8>, c: f64) -> Result<Self> {
        if vectors.len() != y.len() {
            return Err(Error::InvalidTrainingSet(format!(
                "{} vectors but {} labels",
                vectors.len(),
                y.len()
            )));
        }
        if vectors.len() < 2 {
            return Err(Error::InvalidTrainingSet("need at least two examples".into()));
        }
        if let Some(bad) = y.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::InvalidTrainingSet(format!("label {bad} is not ±1")));
        }
        if !y.contains(&1) || !y.contains(&-1) {
            return Err(Error::InvalidTrainingSet("need at least one example of each class".into()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidTrainingSet(format!("C must be positive, got {c}")));
        }
        let dim = vectors[0].dim();
        if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: v.dim(),
            });
        }
        Ok(TrainingSet { vectors, y, c })
    }

    /// Builds from dense rows; convenient for small hand-made problems.
    pub fn from_dense(rows: &[Vec<f64>], y: &[i8], c: f64) -> Result<Self> {
        Self::new(rows.iter().map(|r| SparseVector::from_dense(r)).collect(), y.to_vec(), c)
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[i8] {
        &self.y
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    /// Same examples, different `C`.
    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.vectors.clone(), self.y.clone(), c)
    }

    fn weight_vector(&self, alpha: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for ((x, &y), &a) in self.vectors.iter().zip(&self.y).zip(alpha) {
            if a != 0.0 {
                x.axpy_into(a * y as f64, &mut w);
            }
        }
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    /// Stop once the maximal violating pair violates optimality by less than
    /// this.
    pub tol: f64,
    /// Pair updates allowed; `None` means `max(100_000, 100·n)`.
    pub max_iter: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tol: 1e-3,
            max_iter: None,
        }
    }
}

impl SolverParams {
    pub fn with_tol(tol: f64) -> Self {
        SolverParams { tol, max_iter: None }
    }

    fn iteration_budget(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| 100_000.max(100 * n))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// `W(α)`.
    pub dual_objective: f64,
    /// `½‖w‖² + C Σ ξᵢ` at the reconstructed hyperplane.
    pub primal_objective: f64,
    pub slacks: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl DualSolution {
    pub fn duality_gap(&self) -> f64 {
        self.primal_objective - self.dual_objective
    }

    /// Indices with `αᵢ > 0`.
    pub fn support_vectors(&self) -> impl Iterator<Item = usize> + '_ {
        self.alpha.iter().enumerate().filter(|(_, &a)| a > 0.0).map(|(i, _)| i)
    }
}

/// A linear decision rule `f(x) = w·x + b` and its geometric margin
/// `1/‖w‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane {
    pub w: SparseVector,
    pub b: f64,
    pub margin: f64,
}

impl Hyperplane {
    pub fn new(w: SparseVector, b: f64) -> Result<Self> {
        let norm = w.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateModel);
        }
        Ok(Hyperplane { w, b, margin: 1.0 / norm })
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn decision_value(&self, x: &SparseVector) -> Result<f64> {
        Ok(self.w.dot(x)? + self.b)
    }
}

/// Free-function form of [`Hyperplane::decision_value`].
pub fn decision_value(h: &Hyperplane, x: &SparseVector) -> Result<f64> {
    h.decision_value(x)
}

/// Feature-major copy of the training vectors, so that the change in every
/// `w·xₖ` after a pair update costs only the posting lists of the two
/// updated examples' features.
struct Postings {
    lists: Vec<Vec<(u32, f64)>>,
}

impl Postings {
    fn new(ts: &TrainingSet) -> Self {
        let mut lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); ts.dim()];
        for (k, x) in ts.vectors.iter().enumerate() {
            for &(f, v) in x.entries() {
                lists[f as usize].push((k as u32, v));
            }
        }
        Postings { lists }
    }
}

/// Is example `t` allowed to move "up" (`yₜαₜ` increase) / "down"?
#[inline]
fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

#[inline]
fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Maximizes the dual with maximal-violating-pair working sets.
///
/// `α` stays feasible throughout, so hitting the iteration budget still
/// yields a usable (if suboptimal) solution with `converged = false`.
pub fn solve_dual(ts: &TrainingSet, params: &SolverParams) -> DualSolution {
    let n = ts.len();
    let c = ts.c;
    let y: Vec<f64> = ts.y.iter().map(|&l| l as f64).collect();
    let qd: Vec<f64> = ts.vectors.iter().map(SparseVector::norm_squared).collect();
    let postings = Postings::new(ts);
    let budget = params.iteration_budget(n);

    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα: Gₖ = yₖ (w·xₖ) − 1
    let mut grad = vec![-1.0; n];
    let mut delta_dot = vec![0.0; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut refreshed = false;

    loop {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], c) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t], c) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tol {
            // accumulated rounding in the incremental gradient could hide a
            // violation; confirm against a fresh gradient once
            if refreshed {
                converged = true;
                break;
            }
            recompute_gradient(ts, &alpha, &mut grad);
            refreshed = true;
            continue;
        }
        refreshed = false;
        if iterations >= budget {
            break;
        }
        iterations += 1;

        let kij = ts.vectors[i].dot(&ts.vectors[j]).expect("training vectors share a dimension");
        let quad = {
            let q = qd[i] + qd[j] - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai.clamp(0.0, c);
        alpha[j] = aj.clamp(0.0, c);

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for (x, d) in [(&ts.vectors[i], di), (&ts.vectors[j], dj)] {
            if d == 0.0 {
                continue;
            }
            for &(f, xf) in x.entries() {
                let dw = d * xf;
                for &(k, v) in &postings.lists[f as usize] {
                    let k = k as usize;
                    if delta_dot[k] == 0.0 {
                        touched.push(k as u32);
                    }
                    delta_dot[k] += dw * v;
                }
            }
        }
        for &k in &touched {
            let k = k as usize;
            grad[k] += y[k] * delta_dot[k];
            delta_dot[k] = 0.0;
        }
        touched.clear();
    }

    let w = ts.weight_vector(&alpha);
    let wx: Vec<f64> = ts.vectors.iter().map(|x| x.dot_dense(&w)).collect();
    let w_sq: f64 = w.iter().map(|v| v * v).sum();
    let b = intercept(&alpha, &ts.y, &wx, c);
    let slacks: Vec<f64> = wx
        .iter()
        .zip(&y)
        .map(|(f, yi)| (1.0 - yi * (f + b)).max(0.0))
        .collect();
    let dual_objective = alpha.iter().sum::<f64>() - 0.5 * w_sq;
    let primal_objective = 0.5 * w_sq + c * slacks.iter().sum::<f64>();
    DualSolution {
        alpha,
        dual_objective,
        primal_objective,
        slacks,
        iterations,
        converged,
    }
}

fn recompute_gradient(ts: &TrainingSet, alpha: &[f64], grad: &mut [f64]) {
    let w = ts.weight_vector(alpha);
    for (k, x) in ts.vectors.iter().enumerate() {
        grad[k] = ts.y[k] as f64 * x.dot_dense(&w) - 1.0;
    }
}

/// Threshold `b` given `wx[i] = w·xᵢ`.
///
/// Averages `yᵢ − w·xᵢ` over unbounded support vectors. With none, takes the
/// midpoint of the interval of `b` values satisfying every example's KKT
/// condition: `α = 0` examples need `yᵢ f(xᵢ) ≥ 1`, bounded ones
/// `yᵢ f(xᵢ) ≤ 1`.
fn intercept(alpha: &[f64], y: &[i8], wx: &[f64], c: f64) -> f64 {
    let eps = 1e-12 * c;
    let (mut sum, mut count) = (0.0, 0usize);
    for ((&a, &yi), &f) in alpha.iter().zip(y).zip(wx) {
        if a > eps && a < c - eps {
            sum += yi as f64 - f;
            count += 1;
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&a, &yi), &f) in alpha.iter().zip(y).zip(wx) {
        let edge = yi as f64 - f;
        // yᵢ(f + b) ≥ 1 bounds b from below for y = +1, from above for y = −1
        let at_zero = a <= eps;
        if at_zero == (yi > 0) {
            lower = lower.max(edge);
        } else {
            upper = upper.min(edge);
        }
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => (lower + upper) / 2.0,
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Reconstructs `w = Σ αᵢ yᵢ xᵢ` and `b` from a dual solution.
pub fn extract_hyperplane(ts: &TrainingSet, sol: &DualSolution) -> Result<Hyperplane> {
    if sol.alpha.len() != ts.len() {
        return Err(Error::InvalidTrainingSet(format!(
            "{} multipliers for {} examples",
            sol.alpha.len(),
            ts.len()
        )));
    }
    let w = ts.weight_vector(&sol.alpha);
    let wx: Vec<f64> = ts.vectors.iter().map(|x| x.dot_dense(&w)).collect();
    let b = intercept(&sol.alpha, &ts.y, &wx, ts.c);
    Hyperplane::new(SparseVector::from_dense(&w), b)
}

/// `ξᵢ = max(0, 1 − yᵢ f(xᵢ))`.
pub fn compute_slacks(ts: &TrainingSet, h: &Hyperplane) -> Result<Vec<f64>> {
    ts.vectors
        .iter()
        .zip(&ts.y)
        .map(|(x, &y)| Ok((1.0 - y as f64 * h.decision_value(x)?).max(0.0)))
        .collect()
}

/// Solves the dual and extracts the hyperplane in one step.
pub fn train(ts: &TrainingSet, params: &SolverParams) -> Result<(DualSolution, Hyperplane)> {
    let sol = solve_dual(ts, params);
    let h = extract_hyperplane(ts, &sol)?;
    Ok((sol, h))
}
