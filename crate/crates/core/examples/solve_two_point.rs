//! Solve the dual of the smallest separable problem and read off the hyperplane.

use corpusmap::qp_svm::train;
use corpusmap::{SolverParams, TrainingSet};

fn main() -> corpusmap::Result<()> {
    let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
    let ts = TrainingSet::from_dense(&x, &[1, -1], 1.0)?;
    let (sol, h) = train(&ts, &SolverParams::default())?;
    println!("alpha = {:?}", sol.alpha);
    println!("w = ({}, {}), b = {}, margin = {}", h.w.get(0), h.w.get(1), h.b, h.margin);
    println!("dual {} primal {} gap {:e}, {} iterations", sol.dual_objective, sol.primal_objective, sol.duality_gap(), sol.iterations);
    Ok(())
}
