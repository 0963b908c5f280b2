//! Deterministic random inputs for verification drivers.
//!
//! Every driver that consumes randomness derives its generator from a user
//! seed and a trial index through [`trial_rng`]. The generator is the
//! counter-based ChaCha8 stream cipher: seed selects the key, trial selects
//! the stream, so trial j is reproducible in isolation and trials can run
//! in any order (or in parallel) without changing the data each one sees.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lattice::{LatticeBox, LatticeFunction};

/// Name of the generator scheme, echoed in reports.
pub const GENERATOR_NAME: &str = "chacha8[key=seed, stream=trial]";

/// The generator for one (seed, trial) cell.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One draw from the standard complex Gaussian, E|z|^2 = 1.
pub fn standard_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2.0f64.sqrt()
}

/// A lattice function with independent standard complex Gaussian values, in
/// enumeration order.
pub fn random_lattice_function<R: Rng>(domain: LatticeBox, rng: &mut R) -> LatticeFunction {
    let values = (0..domain.len()).map(|_| standard_complex(rng)).collect();
    LatticeFunction::from_values(domain, values).expect("value count matches box size")
}
