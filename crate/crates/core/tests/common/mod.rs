//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use pencil_transit::models::{gamma_rotated, Poly};
use pencil_transit::{CMat, Model, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)
}

/// A 4×4 pencil with diagonal Γ of mixed signature, rotated by `exp(x·iΓH)` for a
/// random Hermitian `H`. The pair crossing at `xc` has opposite flux signs
/// when `opposite` is set and equal signs otherwise; the other two branches
/// stay beyond ±6.
pub fn random_pencil(seed: u64, opposite: bool) -> (Model, f64) {
    random_pencil_coupled(seed, opposite, 1.0)
}

/// [`random_pencil`] with the perturbation `B` scaled by `coupling`.
pub fn random_pencil_coupled(seed: u64, opposite: bool, coupling: f64) -> (Model, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xc: f64 = rng.random_range(-0.3..0.3);
    let e: f64 = rng.random_range(-0.5..0.5);
    let a: f64 = rng.random_range(0.5..1.5);
    let b: f64 = rng.random_range(0.5..1.5);
    // β_j = s_j d_j for Γ = diag(s_j)
    let (s2, d2) = if opposite {
        (-1.0, Poly::real(&[-e - b * xc, b]))
    } else {
        (1.0, Poly::real(&[e + b * xc, -b]))
    };
    let d = vec![
        Poly::real(&[e - a * xc, a]),
        d2,
        Poly::real(&[8.0, 0.0, 0.5]),
        Poly::real(&[8.0, 0.3]),
    ];
    let s3 = if opposite { 1.0 } else { -1.0 };
    let gamma = CMat::from_diagonal(&nalgebra::DVector::from_vec(
        [1.0, s2, s3, -s3].iter().map(|&s| C64::new(s, 0.0)).collect(),
    ));
    let h = random_hermitian(&mut rng, 4, 0.6);
    let b0 = random_hermitian(&mut rng, 4, 0.5 * coupling);
    let b1 = random_hermitian(&mut rng, 4, 0.1 * coupling);
    (gamma_rotated(d, gamma, h, b0, b1, (-1.0, 1.0)).unwrap(), xc)
}
