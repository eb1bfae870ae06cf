//! Seeded weight initializers. Dense and convolution kernels draw from
//! the uniform Glorot range; biases start at zero.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, -bound, bound)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data constructed together")
}

/// `n x n` identity with elementwise uniform `±noise` added.
pub fn identity_plus_noise(rng: &mut ChaCha8Rng, n: usize, noise: f64) -> Tensor {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
    }
    for v in &mut data {
        *v += rng.random_range(-noise..=noise);
    }
    Tensor::new(vec![n, n], data).expect("square shape")
}
