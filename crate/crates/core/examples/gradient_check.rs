//! Compares backpropagated gradients of a small dense net with central
//! finite differences.

use ndarray::Array2;
use oris::nnet::DenseNet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> oris::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    for trial in 0..5 {
        let net = DenseNet::new(&[4, 8, 8, 2], trial)?;
        let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-2.0..2.0));
        let g = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-1.0..1.0));
        let objective = |n: &DenseNet| (n.forward_batch(&x).unwrap() * &g).sum();
        let grads = net.backward(&net.forward_trace(x.clone())?, &g)?;

        let mut worst: f64 = 0.0;
        for (li, layer) in grads.layers.iter().enumerate() {
            for ((r, c), &analytic) in layer.weights.indexed_iter() {
                let (mut plus, mut minus) = (net.clone(), net.clone());
                plus.layers_mut()[li].weights[[r, c]] += h;
                minus.layers_mut()[li].weights[[r, c]] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                worst = worst.max((analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8));
            }
        }
        println!("net {trial}: {} parameters, max relative error {worst:.2e}", net.parameter_count());
    }
    Ok(())
}
