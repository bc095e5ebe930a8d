//! Reference computations for tests. Everything here is dense, slow and
//! written independently of the production code paths it checks.

use std::collections::{HashMap, HashSet};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Q_ij = y_i y_j x_i·x_j`.
pub fn signed_gram(x: &[Vec<f64>], y: &[i8]) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| (0..x.len()).map(|j| f64::from(y[i] * y[j]) * dot(&x[i], &x[j])).collect())
        .collect()
}

/// `W(α) = Σα − ½ αᵀQα`.
pub fn dual_objective(q: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let quad: f64 = (0..alpha.len())
        .map(|i| alpha[i] * (0..alpha.len()).map(|j| q[i][j] * alpha[j]).sum::<f64>())
        .sum();
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ α ≤ C, Σ y_i α_i = 0}`.
///
/// The projection is `α_i = clip(v_i − λ y_i, 0, C)` for the `λ` zeroing
/// `Σ y_i α_i`, which is monotone in `λ` and found by bisection.
pub fn project_box_hyperplane(v: &[f64], y: &[i8], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> { v.iter().zip(y).map(|(&vi, &yi)| (vi - lambda * f64::from(yi)).clamp(0.0, c)).collect() };
    let residual = |lambda: f64| -> f64 { at(lambda).iter().zip(y).map(|(a, &yi)| a * f64::from(yi)).sum() };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    while hi - lo > 1e-15 * span {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizes the soft-margin dual by accelerated projected gradient ascent.
pub fn projected_gradient_dual(x: &[Vec<f64>], y: &[i8], c: f64, iterations: usize) -> Vec<f64> {
    let n = x.len();
    let q = signed_gram(x, y);
    // trace bounds the largest eigenvalue of a PSD matrix
    let lipschitz = (0..n).map(|i| q[i][i]).sum::<f64>().max(1e-12);
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).collect() };

    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let g = grad(&z);
        let v: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + step * gi).collect();
        let next = project_box_hyperplane(&v, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        z = next.iter().zip(&alpha).map(|(a, p)| a + momentum * (a - p)).collect();
        // restart when the objective drops
        if dual_objective(&q, &next) < dual_objective(&q, &alpha) {
            z = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        alpha = next;
    }
    alpha
}

/// Best feasible dual objective over a grid of `α` with `steps + 1` levels
/// per coordinate. Only practical for two or three examples.
pub fn grid_dual_maximum(x: &[Vec<f64>], y: &[i8], c: f64, steps: usize) -> f64 {
    let n = x.len();
    let q = signed_gram(x, y);
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let alpha: Vec<f64> = idx.iter().map(|&k| c * k as f64 / steps as f64).collect();
        let balance: f64 = alpha.iter().zip(y).map(|(a, &yi)| a * f64::from(yi)).sum();
        if balance.abs() < 1e-9 {
            best = best.max(dual_objective(&q, &alpha));
        }
        let mut d = 0;
        loop {
            if d == n {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Half the distance between two points: the widest margin separating them.
pub fn two_point_margin(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / 2.0
}

/// KKT conditions at tolerance `tol` for decision values `f`:
/// `α = 0 ⇒ y f ≥ 1 − tol`, `0 < α < C ⇒ |y f − 1| ≤ tol`,
/// `α = C ⇒ y f ≤ 1 + tol`. Returns the indices that violate them.
pub fn kkt_violations(alpha: &[f64], y: &[i8], f: &[f64], c: f64, tol: f64) -> Vec<usize> {
    let eps = 1e-9 * c;
    (0..alpha.len())
        .filter(|&i| {
            let m = f64::from(y[i]) * f[i];
            if alpha[i] <= eps {
                m < 1.0 - tol
            } else if alpha[i] >= c - eps {
                m > 1.0 + tol
            } else {
                (m - 1.0).abs() > tol
            }
        })
        .collect()
}

/// Document frequencies by direct counting.
pub fn brute_force_df(documents: &[Vec<String>]) -> HashMap<String, u32> {
    let mut df = HashMap::new();
    for doc in documents {
        let unique: HashSet<&String> = doc.iter().collect();
        for t in unique {
            *df.entry(t.clone()).or_insert(0) += 1;
        }
    }
    df
}

/// Central-difference gradient.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|i| {
            let mut up = at.to_vec();
            let mut down = at.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Small deterministic generator (SplitMix64) so the oracles need no
/// dependencies.
#[derive(Clone, Debug)]
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
