//! Synthetic inputs shared by the benchmarks.

use expose_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` rows of `d` values drawn uniformly from `[-1, 1)`.
pub fn uniform_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::new(features, d, None, format!("uniform {n}x{d}"), format!("uniform[-1,1) seed {seed}"))
        .expect("valid synthetic dataset")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_range() {
        let data = uniform_dataset(10, 3, 1);
        assert_eq!((data.n(), data.dim()), (10, 3));
        assert!(data.features().iter().all(|v| (-1.0..1.0).contains(v)));
        assert_eq!(uniform_dataset(10, 3, 1).features(), data.features());
    }
}
