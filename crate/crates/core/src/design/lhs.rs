use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DesignKind, DesignMatrix};
use crate::error::{Error, Result};

/// Plain Latin hypercube on `[-1, 1]^m`: each dimension is cut into `n`
/// equal strata, every stratum receives exactly one point, uniformly placed
/// inside it, and strata are paired across dimensions by independent random
/// permutations.
pub fn lhs_sample(dim: usize, n: usize, seed: u64) -> Result<DesignMatrix> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidInput("LHS needs n >= 1 and m >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dim]; n];
    let width = 2.0 / n as f64;
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        strata.shuffle(&mut rng);
        for (row, &j) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            row[d] = (-1.0 + width * (j as f64 + u)).min(1.0);
        }
    }
    Ok(DesignMatrix { kind: DesignKind::Lhs, dim, points, weights: None, level: None, seed: Some(seed) })
}
