use corpusmap::calibration::{fit_sigmoid_report, negative_log_likelihood, nll_gradient, smoothed_targets};
use corpusmap::SigmoidCalibration;
use corpusmap_testkit::{central_difference, SplitMix};
use proptest::prelude::*;

/// Scores uniform on [−3, 3] with labels drawn from `1/(1+exp(a·f + b))`.
fn sample(n: usize, a: f64, b: f64, seed: u64) -> (Vec<f64>, Vec<i8>) {
    let mut rng = SplitMix::new(seed);
    (0..n)
        .map(|_| {
            let f = rng.range(-3.0, 3.0);
            let p = 1.0 / (1.0 + (a * f + b).exp());
            (f, if rng.unit() < p { 1 } else { -1 })
        })
        .unzip()
}

#[test]
fn recovers_generating_sigmoid() {
    for seed in 0..5 {
        let (scores, y) = sample(10_000, -2.0, 0.0, seed);
        let fit = fit_sigmoid_report(&scores, &y).unwrap();
        let cal = fit.calibration;
        assert!((cal.a + 2.0).abs() <= 0.1, "seed {seed}: A = {}", cal.a);
        assert!(cal.b.abs() <= 0.1, "seed {seed}: B = {}", cal.b);
        assert!(fit.gradient[0].hypot(fit.gradient[1]) <= 1e-8, "seed {seed}: {:?}", fit.gradient);
    }
}

proptest! {
    #[test]
    fn analytic_gradient_matches_finite_difference(
        seed in any::<u64>(),
        a in -4.0f64..4.0,
        b in -2.0f64..2.0,
    ) {
        let (scores, y) = sample(200, -1.5, 0.3, seed);
        prop_assume!(y.contains(&1) && y.contains(&-1));
        let t = smoothed_targets(&y);
        let cal = SigmoidCalibration::new(a, b);
        let g = nll_gradient(&scores, &t, &cal);
        let fd = central_difference(|v| negative_log_likelihood(&scores, &t, &SigmoidCalibration::new(v[0], v[1])), &[a, b], 1e-5);
        for k in 0..2 {
            let scale = g[k].abs().max(1.0);
            prop_assert!((g[k] - fd[k]).abs() <= 1e-5 * scale, "component {k}: {} vs {}", g[k], fd[k]);
        }
    }

    #[test]
    fn fitted_map_is_monotone(seed in any::<u64>()) {
        let (scores, y) = sample(300, -1.0, 0.5, seed);
        prop_assume!(y.contains(&1) && y.contains(&-1));
        let cal = fit_sigmoid_report(&scores, &y).unwrap().calibration;
        prop_assert!(cal.a < 0.0);
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let p: Vec<f64> = sorted.iter().map(|&f| cal.probability(f)).collect();
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
