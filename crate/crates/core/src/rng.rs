//! Keyed random streams.
//!
//! Every stream is a ChaCha8 generator seeded from the user seed with the
//! replicate (or sample) index selecting an independent ChaCha stream, so
//! results depend only on `(seed, stream)` and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Gaussian increments `ΔB ~ N(0, dt I_n)` for one replicate.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64, dt: f64) -> Self {
        NoiseStream {
            rng: keyed_rng(seed, stream),
            sqrt_dt: dt.sqrt(),
        }
    }

    /// Fills `out` with one step's worth of independent increments.
    #[inline]
    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *v = z * self.sqrt_dt;
        }
    }
}

pub fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from the `n`-simplex (symmetric Dirichlet(1)).
pub fn dirichlet_uniform<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}
