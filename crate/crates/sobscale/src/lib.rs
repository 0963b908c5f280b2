//! Weighted spectral norms on truncated integer lattices.
//!
//! The crate builds, from the bottom up: functions on lattice boxes and
//! their discrete Fourier transforms; a family of slowly and regularly
//! varying weight generators with grid-based index estimation; weighted
//! norms and duality pairings; interpolation spaces with a function
//! parameter; and dense pseudodifference operators with symbol estimates,
//! mapping-norm scans, Fredholm surrogates on truncations, and an
//! operator-adapted scale.
//!
//! Everything is deterministic: enumeration orders are fixed, reductions use
//! a fixed pairwise tree, and randomized verification drivers take explicit
//! seeds.

pub mod error;
pub mod numeric;

pub mod lattice;
pub mod interp;
pub mod linalg;
pub mod pdo;
pub mod rng;
pub mod ro;
pub mod spaces;
pub mod torus;

pub use error::{Error, Result};

#[cfg(test)]
mod nalgebra_probe {
    use nalgebra::{Complex, DMatrix};

    #[test]
    fn complex_svd_and_hermitian_eigen_are_available() {
        let m = DMatrix::<Complex<f64>>::from_row_slice(
            2,
            2,
            &[
                Complex::new(2.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(0.0, -1.0),
                Complex::new(3.0, 0.0),
            ],
        );
        let svd = m.clone().svd(true, true);
        assert_eq!(svd.singular_values.len(), 2);
        let eig = nalgebra::SymmetricEigen::new(m);
        assert_eq!(eig.eigenvalues.len(), 2);
    }
}
