//! Fit a sigmoid mapping raw decision values to probabilities.

use corpusmap::calibration::fit_sigmoid_report;
use rand::{Rng, SeedableRng};

fn main() -> corpusmap::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let (scores, labels): (Vec<f64>, Vec<i8>) = (0..5000)
        .map(|_| {
            let f: f64 = rng.gen_range(-3.0..3.0);
            let p = 1.0 / (1.0 + (-2.0 * f).exp());
            (f, if rng.gen::<f64>() < p { 1 } else { -1 })
        })
        .unzip();
    let fit = fit_sigmoid_report(&scores, &labels)?;
    println!("A = {:.4}, B = {:.4} after {} Newton steps", fit.calibration.a, fit.calibration.b, fit.iterations);
    for f in [-1.0, 0.0, 0.5, 2.0] {
        println!("p(f = {f}) = {:.4}", fit.calibration.probability(f));
    }
    Ok(())
}
