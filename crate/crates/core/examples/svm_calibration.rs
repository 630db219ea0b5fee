//! RBF and linear SVMs with Platt-calibrated probabilities on two noisy
//! Gaussian blobs.

use rand::Rng as _;
use rand_distr::StandardNormal;

use codefusion::learn::{
    average_precision, train_calibrated_linear, train_calibrated_rbf, LinearSvmConfig, RbfSvmConfig,
};
use codefusion::util::rng_from_seed;

fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = rng_from_seed(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let pos = rng.random_bool(0.3);
        let shift = if pos { 1.2 } else { -0.4 };
        x.push(
            (0..3)
                .map(|_| shift + rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        y.push(pos);
    }
    (x, y)
}

fn main() -> codefusion::Result<()> {
    let (x, y) = blobs(200, 1);
    let (xt, yt) = blobs(200, 2);

    let rbf = train_calibrated_rbf(&x, &y, &RbfSvmConfig::default(), 7)?;
    let m = &rbf.model;
    println!(
        "RBF: {} support vectors, gamma {:.3}, {} SMO iterations, dual objective {:.3}",
        m.support_vectors.len(),
        m.gamma,
        m.iterations,
        m.objective
    );
    let probs: Vec<f64> = xt
        .iter()
        .map(|r| m.predict_prob(r).expect("calibrated"))
        .collect();
    println!(
        "  test AP {:.3}, first probabilities {:.2?}",
        average_precision(&probs, &yt).unwrap(),
        &probs[..5]
    );

    let lin = train_calibrated_linear(&x, &y, &LinearSvmConfig::default(), 7)?;
    let scores: Vec<f64> = xt.iter().map(|r| lin.model.decision(r)).collect();
    println!(
        "linear: weights {:.3?}, bias {:.3}, Platt (a, b) = ({:.3}, {:.3})",
        lin.model.weights, lin.model.bias, lin.platt.a, lin.platt.b
    );
    println!("  test AP {:.3}", average_precision(&scores, &yt).unwrap());
    Ok(())
}
