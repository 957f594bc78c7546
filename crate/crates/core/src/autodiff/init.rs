use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;

/// `(fan_in, fan_out)` of a weight tensor: `[out, in]` for dense maps,
/// `[a, b, k…]` for convolution kernels with the receptive field folded in.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [out, inp] => (*inp, *out),
        [a, b, rest @ ..] => {
            let rf: usize = rest.iter().product();
            (b * rf, a * rf)
        }
        [] => (1, 1),
    }
}

/// Xavier/Glorot uniform initialization on `±√(6/(fan_in+fan_out))`.
pub fn xavier_init(shape: &[usize], seed: u64) -> Tensor {
    let (fan_in, fan_out) = fans(shape);
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-bound..=bound))
}
