//! Fixed quadrature grids: Bloch-sphere averaging and polar grids in the
//! complex plane.

use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

/// Gauss–Legendre nodes and weights mapped onto `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 2, "Gauss-Legendre needs at least 2 nodes");
    let rule = GaussLegendre::new(n).expect("n >= 2");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Node of the uniform Bloch-sphere measure `sinθ/4π dθ dφ`.
#[derive(Clone, Copy, Debug)]
pub struct BlochNode {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

/// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`; weights sum to 1.
#[derive(Clone, Debug)]
pub struct BlochQuadrature {
    nodes: Vec<BlochNode>,
}

impl BlochQuadrature {
    pub const STANDARD_NODES: usize = 16;

    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (u, w) in gauss_legendre(n_theta, -1.0, 1.0) {
            let theta = u.acos();
            for k in 0..n_phi {
                nodes.push(BlochNode {
                    theta,
                    phi: 2.0 * PI * k as f64 / n_phi as f64,
                    weight: 0.5 * w / n_phi as f64,
                });
            }
        }
        Self { nodes }
    }

    pub fn standard() -> Self {
        Self::new(Self::STANDARD_NODES, Self::STANDARD_NODES)
    }

    pub fn doubled() -> Self {
        Self::new(2 * Self::STANDARD_NODES, 2 * Self::STANDARD_NODES)
    }

    pub fn nodes(&self) -> &[BlochNode] {
        &self.nodes
    }

    pub fn average(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n.theta, n.phi)).sum()
    }
}

/// Polar Gauss–Legendre grid over the disc `|ξ| ≤ radius`; weights include
/// the `ρ dρ dϕ` Jacobian.
#[derive(Clone, Debug)]
pub struct PolarGrid {
    nodes: Vec<(Complex64, f64)>,
    radii: Vec<f64>,
    n_angular: usize,
}

impl PolarGrid {
    pub fn new(radius: f64, n_radial: usize, n_angular: usize) -> Self {
        let radial = gauss_legendre(n_radial, 0.0, radius);
        let angular = gauss_legendre(n_angular, 0.0, 2.0 * PI);
        let mut nodes = Vec::with_capacity(n_radial * n_angular);
        for &(r, wr) in &radial {
            for &(a, wa) in &angular {
                nodes.push((Complex64::from_polar(r, a), r * wr * wa));
            }
        }
        Self {
            nodes,
            radii: radial.iter().map(|&(r, _)| r).collect(),
            n_angular,
        }
    }

    /// Radial nodes with their angular nodes; ring `i` is
    /// `nodes()[i * n_angular..(i + 1) * n_angular]`.
    pub fn rings(&self) -> impl Iterator<Item = (f64, &[(Complex64, f64)])> {
        self.radii
            .iter()
            .copied()
            .zip(self.nodes.chunks(self.n_angular.max(1)))
    }

    pub fn nodes(&self) -> &[(Complex64, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Complex64 {
        self.nodes.iter().map(|&(z, w)| f(z) * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bloch_weights_sum_to_one() {
        let q = BlochQuadrature::standard();
        assert_eq!(q.nodes().len(), 256);
        assert!((q.average(|_, _| 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bloch_moments() {
        // E[sin²(θ/2)] = 1/2, E[sin⁴(θ/2)] = 1/3, E[cos φ] = 0
        let q = BlochQuadrature::standard();
        assert!((q.average(|t, _| (t / 2.0).sin().powi(2)) - 0.5).abs() < 1e-14);
        assert!((q.average(|t, _| (t / 2.0).sin().powi(4)) - 1.0 / 3.0).abs() < 1e-14);
        assert!(q.average(|_, p| p.cos()).abs() < 1e-14);
    }

    #[test]
    fn polar_gaussian_integral() {
        // ∫ exp(−|ξ|²) d²ξ = π
        let g = PolarGrid::new(8.0, 64, 64);
        let v = g.integrate(|z| Complex64::new((-z.norm_sqr()).exp(), 0.0));
        assert!((v.re - PI).abs() < 1e-10);
    }
}
