#![allow(dead_code)]

use hybrid_teleport::fock::{CMatrix, DensityOperator, KetVector, ModeSpace};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Normalized ket with complex Gaussian amplitudes.
pub fn random_ket(rng: &mut impl Rng, space: ModeSpace) -> KetVector {
    let n = space.total_dim();
    let mut amps = nalgebra::DVector::from_fn(n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let norm = amps.norm();
    amps /= cz(norm);
    KetVector::new(space, amps).unwrap()
}

/// Mixed state `G G† / tr` with a random complex `G`.
pub fn random_density(rng: &mut impl Rng, space: ModeSpace) -> DensityOperator {
    let n = space.total_dim();
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let m: CMatrix = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(space, m / cz(tr)).unwrap()
}

/// Qubit state `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩` on one mode of dimension `dim`.
pub fn qubit_density(theta: f64, phi: f64, dim: usize) -> DensityOperator {
    let c = (theta / 2.0).cos();
    let s = Complex64::from_polar((theta / 2.0).sin(), phi);
    KetVector::from_terms(ModeSpace::single(dim).unwrap(), &[(vec![0], cz(c)), (vec![1], s)])
        .unwrap()
        .to_density()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
