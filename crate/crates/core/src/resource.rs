//! Two-mode squeezed vacuum resource states, photon-loss channels and
//! characteristic functions.
//!
//! Characteristic functions use the convention `χ(ξ) = tr{D(ξ)ρ}` with
//! `D(ξ) = exp(ξa† − ξ*a)`.

use std::f64::consts::LN_10;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fock::{
    displacement_matrix, CMatrix, CVector, DensityOperator, KetVector, ModeSpace, OperatorMatrix,
};

/// Retained-probability target used when choosing the truncation dimension.
pub const DEFAULT_TRUNCATION_MASS: f64 = 0.95;
/// Smallest truncation used for protocol resources: every mode must be able
/// to hold one photon.
pub const MIN_RESOURCE_DIM: usize = 2;

/// Squeezing parameter `r` from its dB value `10·log10(e^{2r})`.
pub fn squeezing_from_db(r_db: f64) -> f64 {
    r_db * LN_10 / 20.0
}

pub fn squeezing_to_db(r: f64) -> f64 {
    20.0 * r / LN_10
}

/// Channel transmissivity from loss in dB.
pub fn transmissivity_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmissivity_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// Parameters of a TMSV state distributed over two lossy channels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TmsvParams {
    squeezing: f64,
    t1: f64,
    t2: f64,
    dim: usize,
}

impl TmsvParams {
    /// `dim` is chosen from the default retained mass, but never below
    /// [`MIN_RESOURCE_DIM`].
    pub fn new(squeezing: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(squeezing >= 0.0 && squeezing.is_finite()) {
            return invalid(format!("squeezing must be finite and >= 0, got {squeezing}"));
        }
        for t in [t1, t2] {
            if !(t > 0.0 && t <= 1.0) {
                return invalid(format!("transmissivity must be in (0, 1], got {t}"));
            }
        }
        let lambda = squeezing.tanh();
        let dim = choose_truncation_dim(lambda, DEFAULT_TRUNCATION_MASS)?.max(MIN_RESOURCE_DIM);
        Ok(Self {
            squeezing,
            t1,
            t2,
            dim,
        })
    }

    /// Symmetric channels from squeezing and loss in dB.
    pub fn from_db(r_db: f64, loss_db: f64) -> Result<Self> {
        Self::from_db_asymmetric(r_db, loss_db, loss_db)
    }

    pub fn from_db_asymmetric(r_db: f64, loss1_db: f64, loss2_db: f64) -> Result<Self> {
        if r_db < 0.0 || loss1_db < 0.0 || loss2_db < 0.0 {
            return invalid("dB values must be >= 0");
        }
        Self::new(
            squeezing_from_db(r_db),
            transmissivity_from_db(loss1_db),
            transmissivity_from_db(loss2_db),
        )
    }

    pub fn from_lambda(lambda: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return invalid(format!("lambda must be in [0, 1), got {lambda}"));
        }
        Self::new(lambda.atanh(), t1, t2)
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("truncation dimension must be >= 1");
        }
        self.dim = dim;
        Ok(self)
    }

    /// Re-chooses the truncation for a different retained mass.
    pub fn with_mass(self, mass: f64) -> Result<Self> {
        let dim = choose_truncation_dim(self.lambda(), mass)?.max(MIN_RESOURCE_DIM);
        self.with_dim(dim)
    }

    pub fn squeezing(&self) -> f64 {
        self.squeezing
    }

    pub fn squeezing_db(&self) -> f64 {
        squeezing_to_db(self.squeezing)
    }

    pub fn lambda(&self) -> f64 {
        self.squeezing.tanh()
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Truncated TMSV ket `√(1−λ²) Σ_{n<dim} λⁿ |nn⟩`.
pub fn tmsv_ket(lambda: f64, dim: usize) -> Result<KetVector> {
    if !(0.0..1.0).contains(&lambda) {
        return invalid(format!("lambda must be in [0, 1), got {lambda}"));
    }
    let space = ModeSpace::new(vec![dim, dim])?;
    let norm = (1.0 - lambda * lambda).sqrt();
    let mut amps = CVector::zeros(dim * dim);
    let mut pow = 1.0;
    for n in 0..dim {
        amps[n * dim + n] = Complex64::new(norm * pow, 0.0);
        pow *= lambda;
    }
    KetVector::new(space, amps)
}

/// Smallest `d` with `1 − λ^{2d} > mass`.
pub fn choose_truncation_dim(lambda: f64, mass: f64) -> Result<usize> {
    if !(mass > 0.0 && mass < 1.0) {
        return invalid(format!("mass must be in (0, 1), got {mass}"));
    }
    if !(0.0..1.0).contains(&lambda) {
        return invalid(format!("lambda must be in [0, 1), got {lambda}"));
    }
    let l2 = lambda * lambda;
    let mut tail = l2;
    let mut d = 1;
    while 1.0 - tail <= mass {
        tail *= l2;
        d += 1;
    }
    Ok(d)
}

/// Photon-loss Kraus family `Ĝ^(l)`, `l = 0..dim−1`, for transmissivity `t`.
pub fn loss_channel(t: f64, dim: usize) -> Result<Vec<OperatorMatrix>> {
    if !(t > 0.0 && t <= 1.0) {
        return invalid(format!("channel transmissivity must be in (0, 1], got {t}"));
    }
    loss_kraus(t, dim)
}

/// Loss Kraus family for any `t ∈ [0, 1]`; identically-zero operators are
/// dropped.
///
/// `⟨n−l|Ĝ^(l)|n⟩ = √C(n,l) · t^{(n−l)/2} · (1−t)^{l/2}`.
pub(crate) fn loss_kraus(t: f64, dim: usize) -> Result<Vec<OperatorMatrix>> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("transmissivity must be in [0, 1], got {t}"));
    }
    let mut ops = Vec::with_capacity(dim);
    for l in 0..dim {
        let mut m = CMatrix::zeros(dim, dim);
        let mut any = false;
        for n in l..dim {
            let amp = binomial(n, l).sqrt() * powi0(t.sqrt(), n - l) * powi0((1.0 - t).sqrt(), l);
            if amp != 0.0 {
                m[(n - l, n)] = Complex64::new(amp, 0.0);
                any = true;
            }
        }
        if any {
            ops.push(OperatorMatrix::single_mode(dim, dim, m)?);
        }
    }
    Ok(ops)
}

/// `x^k` with `0^0 = 1`.
fn powi0(x: f64, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Truncated TMSV sent through both loss channels, renormalized to unit trace.
///
/// `trace_mass` holds the retained probability `1 − λ^{2·dim}` of the
/// truncation.
pub fn lossy_tmsv(params: &TmsvParams) -> Result<DensityOperator> {
    let d = params.dim;
    let lambda = params.lambda();
    let ket = tmsv_ket(lambda, d)?;
    let mass = ket.norm_sqr();
    // Each pair of loss outcomes (l1, l2) maps the TMSV to a sparse vector
    // supported on |n−l1, n−l2⟩; ρ is the sum of their outer products.
    let g1 = loss_amplitudes(params.t1, d);
    let g2 = loss_amplitudes(params.t2, d);
    let mut pow = vec![1.0; d];
    for n in 1..d {
        pow[n] = pow[n - 1] * lambda;
    }
    let norm2 = (1.0 - lambda * lambda) / mass;
    let mut m = CMatrix::zeros(d * d, d * d);
    let mut support: Vec<(usize, f64)> = Vec::with_capacity(d);
    for l1 in 0..d {
        for l2 in 0..d {
            support.clear();
            for n in l1.max(l2)..d {
                let a = pow[n] * g1[l1][n] * g2[l2][n];
                if a != 0.0 {
                    support.push(((n - l1) * d + (n - l2), a));
                }
            }
            for &(j, aj) in &support {
                for &(i, ai) in &support {
                    m[(i, j)].re += norm2 * ai * aj;
                }
            }
        }
    }
    let space = ModeSpace::new(vec![d, d])?;
    Ok(DensityOperator::from_parts(space, m, mass))
}

/// `g[l][n] = ⟨n−l|Ĝ^(l)|n⟩`.
fn loss_amplitudes(t: f64, dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|l| {
            (0..dim)
                .map(|n| {
                    if n < l {
                        0.0
                    } else {
                        binomial(n, l).sqrt() * powi0(t.sqrt(), n - l) * powi0((1.0 - t).sqrt(), l)
                    }
                })
                .collect()
        })
        .collect()
}

/// Evaluator of a one- or two-mode characteristic function.
pub trait CharFn: Send + Sync {
    fn num_modes(&self) -> usize;

    /// `χ(ξ_1, …)`; `xi.len()` must equal [`CharFn::num_modes`].
    fn eval(&self, xi: &[Complex64]) -> Result<Complex64>;

    /// True when `χ(ξ_1 e^{iα}, ξ_2 e^{−iα}) = χ(ξ_1, ξ_2)` for every α, i.e.
    /// the two-mode state commutes with `n_1 − n_2`.
    fn counter_rotation_invariant(&self) -> bool {
        false
    }
}

fn check_arity(expected: usize, xi: &[Complex64]) -> Result<()> {
    if xi.len() != expected {
        return invalid(format!(
            "characteristic function takes {expected} arguments, got {}",
            xi.len()
        ));
    }
    Ok(())
}

/// Zero-mean two-mode Gaussian characteristic function
/// `exp{−½[a₁|ξ₁|² + a₂|ξ₂|² − b(ξ₁ξ₂ + ξ₁*ξ₂*)]}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianCharFn {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
}

impl GaussianCharFn {
    pub fn eval2(&self, xi1: Complex64, xi2: Complex64) -> Complex64 {
        let cross = 2.0 * (xi1 * xi2).re;
        let q = self.a1 * xi1.norm_sqr() + self.a2 * xi2.norm_sqr() - self.b * cross;
        Complex64::new((-0.5 * q).exp(), 0.0)
    }
}

impl CharFn for GaussianCharFn {
    fn num_modes(&self) -> usize {
        2
    }

    fn eval(&self, xi: &[Complex64]) -> Result<Complex64> {
        check_arity(2, xi)?;
        Ok(self.eval2(xi[0], xi[1]))
    }

    fn counter_rotation_invariant(&self) -> bool {
        true
    }
}

/// Closed-form characteristic function of the ideal (untruncated) TMSV.
pub fn tmsv_charfn(params: &TmsvParams) -> GaussianCharFn {
    let l = params.lambda();
    let denom = 1.0 - l * l;
    let a = (1.0 + l * l) / denom;
    GaussianCharFn {
        a1: a,
        a2: a,
        b: 2.0 * l / denom,
    }
}

/// Closed-form characteristic function after the two loss channels.
pub fn lossy_tmsv_charfn(params: &TmsvParams) -> GaussianCharFn {
    let ideal = tmsv_charfn(params);
    let (t1, t2) = (params.t1, params.t2);
    GaussianCharFn {
        a1: (1.0 - t1) + t1 * ideal.a1,
        a2: (1.0 - t2) + t2 * ideal.a2,
        b: (t1 * t2).sqrt() * ideal.b,
    }
}

/// Characteristic function of a one- or two-mode density operator via
/// `tr{D(ξ₁)⊗D(ξ₂) ρ}` with exact displacement matrix elements.
#[derive(Clone, Debug)]
pub struct DensityCharFn {
    dims: Vec<usize>,
    invariant: bool,
    /// Nonzero `ρ[row, col]` with the per-mode Fock levels of row and column.
    entries: Vec<([usize; 2], [usize; 2], Complex64)>,
}

/// Builds the trace-formula evaluator; the state is used as given (not
/// renormalized), so `χ(0) = tr ρ`.
pub fn charfn_from_density(rho: &DensityOperator) -> Result<DensityCharFn> {
    let dims = rho.space().dims().to_vec();
    if dims.is_empty() || dims.len() > 2 {
        return invalid(format!(
            "characteristic functions are supported for 1 or 2 modes, got {}",
            dims.len()
        ));
    }
    let split = |idx: usize| -> [usize; 2] {
        if dims.len() == 1 {
            [idx, 0]
        } else {
            [idx / dims[1], idx % dims[1]]
        }
    };
    let m = rho.elements();
    let mut entries = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v.norm() > 0.0 {
                entries.push((split(r), split(c), v));
            }
        }
    }
    let invariant = dims.len() == 2
        && entries
            .iter()
            .all(|(r, c, _)| r[0] as i64 - c[0] as i64 == r[1] as i64 - c[1] as i64);
    Ok(DensityCharFn {
        dims,
        invariant,
        entries,
    })
}

impl CharFn for DensityCharFn {
    fn num_modes(&self) -> usize {
        self.dims.len()
    }

    fn eval(&self, xi: &[Complex64]) -> Result<Complex64> {
        check_arity(self.dims.len(), xi)?;
        let d0 = displacement_matrix(xi[0], self.dims[0]);
        let d1 = if self.dims.len() == 2 {
            Some(displacement_matrix(xi[1], self.dims[1]))
        } else {
            None
        };
        // tr{Dρ} = Σ ρ[row, col] D[col, row]
        let mut acc = Complex64::new(0.0, 0.0);
        for (row, col, v) in &self.entries {
            let mut d = d0[(col[0], row[0])];
            if let Some(d1) = &d1 {
                d *= d1[(col[1], row[1])];
            }
            acc += v * d;
        }
        Ok(acc)
    }

    fn counter_rotation_invariant(&self) -> bool {
        self.invariant
    }
}

/// Closed-form characteristic function of the pure qubit
/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitCharFn {
    pub theta: f64,
    pub phi: f64,
}

pub fn qubit_charfn(theta: f64, phi: f64) -> QubitCharFn {
    QubitCharFn { theta, phi }
}

impl QubitCharFn {
    pub fn eval1(&self, xi: Complex64) -> Complex64 {
        let c = (self.theta / 2.0).cos();
        let s = (self.theta / 2.0).sin();
        let x = xi.norm_sqr();
        let e = Complex64::from_polar(1.0, self.phi);
        let bracket = c * c + s * s * (1.0 - x) + c * s * (xi * e.conj() - xi.conj() * e);
        bracket * (-0.5 * x).exp()
    }
}

impl CharFn for QubitCharFn {
    fn num_modes(&self) -> usize {
        1
    }

    fn eval(&self, xi: &[Complex64]) -> Result<Complex64> {
        check_arity(1, xi)?;
        Ok(self.eval1(xi[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_kraus, partial_trace, MaxAbs};

    fn cz(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn db_conversions() {
        assert!((transmissivity_from_db(10.0) - 0.1).abs() < 1e-15);
        assert!((transmissivity_to_db(transmissivity_from_db(4.7)) - 4.7).abs() < 1e-12);
        assert!((squeezing_to_db(squeezing_from_db(7.0)) - 7.0).abs() < 1e-12);
        // 10·log10(e^{2r})
        let r = 0.8;
        assert!((squeezing_to_db(r) - 10.0 * (2.0 * r).exp().log10()).abs() < 1e-12);
    }

    #[test]
    fn tmsv_ket_examples() {
        let vac = tmsv_ket(0.0, 3).unwrap();
        assert_eq!(vac.amplitude(&[0, 0]).unwrap(), cz(1.0, 0.0));
        let k = tmsv_ket(0.5, 2).unwrap();
        let a0 = 0.75f64.sqrt();
        assert!((k.amplitude(&[0, 0]).unwrap().re - a0).abs() < 1e-15);
        assert!((k.amplitude(&[1, 1]).unwrap().re - 0.5 * a0).abs() < 1e-15);
        assert_eq!(k.amplitude(&[0, 1]).unwrap(), cz(0.0, 0.0));
        for &(l, d) in &[(0.3, 4), (0.7, 9), (0.9, 15)] {
            let n2 = tmsv_ket(l, d).unwrap().norm_sqr();
            assert!((n2 - (1.0 - f64::powi(l, 2 * d as i32))).abs() < 1e-14);
        }
    }

    /// Retained mass by explicit summation of the photon-number distribution.
    fn smallest_dim_by_summation(lambda: f64, mass: f64) -> usize {
        let mut acc = 0.0;
        let mut d = 0;
        loop {
            acc += (1.0 - lambda * lambda) * lambda.powi(2 * d as i32);
            d += 1;
            if acc > mass {
                return d;
            }
        }
    }

    #[test]
    fn truncation_dimension() {
        assert_eq!(choose_truncation_dim(0.0, 0.95).unwrap(), 1);
        assert_eq!(choose_truncation_dim(0.6665, 0.95).unwrap(), 4);
        assert_eq!(choose_truncation_dim(0.9, 0.95).unwrap(), 15);
        for &l in &[0.1, 0.4, 0.6665, 0.8, 0.9, 0.95] {
            for &m in &[0.5, 0.95, 0.999] {
                assert_eq!(
                    choose_truncation_dim(l, m).unwrap(),
                    smallest_dim_by_summation(l, m),
                    "lambda={l} mass={m}"
                );
            }
        }
        assert!(choose_truncation_dim(0.5, 1.0).is_err());
    }

    #[test]
    fn params_choose_dims() {
        let p = TmsvParams::from_db(7.0, 0.0).unwrap();
        assert_eq!(p.dim(), 4);
        // tiny squeezing still keeps a one-photon level
        assert_eq!(TmsvParams::from_db(0.5, 0.0).unwrap().dim(), MIN_RESOURCE_DIM);
        assert!(TmsvParams::new(0.5, 0.0, 1.0).is_err());
        assert!(TmsvParams::from_db(-1.0, 0.0).is_err());
    }

    #[test]
    fn loss_channel_examples() {
        let ops = loss_channel(1.0, 4).unwrap();
        assert_eq!(ops.len(), 1);
        assert!((ops[0].elements() - CMatrix::identity(4, 4)).max_abs() < 1e-15);

        let one = DensityOperator::basis(ModeSpace::single(2).unwrap(), &[1]).unwrap();
        let out = apply_kraus(&one, &loss_channel(0.6, 2).unwrap(), 0).unwrap();
        assert!((out.element(&[0], &[0]).unwrap().re - 0.4).abs() < 1e-15);
        assert!((out.element(&[1], &[1]).unwrap().re - 0.6).abs() < 1e-15);

        let two = DensityOperator::basis(ModeSpace::single(3).unwrap(), &[2]).unwrap();
        let out = apply_kraus(&two, &loss_channel(0.5, 3).unwrap(), 0).unwrap();
        let probs: Vec<f64> = (0..3).map(|n| out.element(&[n], &[n]).unwrap().re).collect();
        for (p, e) in probs.iter().zip([0.25, 0.5, 0.25]) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!(loss_channel(0.0, 3).is_err());
    }

    #[test]
    fn loss_channel_completeness() {
        for &t in &[0.05, 0.3, 0.77, 1.0] {
            let ops = loss_channel(t, 12).unwrap();
            let mut sum = CMatrix::zeros(12, 12);
            for k in &ops {
                sum += k.elements().adjoint() * k.elements();
            }
            assert!((sum - CMatrix::identity(12, 12)).max_abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn lossy_tmsv_examples() {
        let p = TmsvParams::from_lambda(0.0, 0.3, 0.7).unwrap();
        let rho = lossy_tmsv(&p).unwrap();
        assert!((rho.element(&[0, 0], &[0, 0]).unwrap().re - 1.0).abs() < 1e-15);

        let p = TmsvParams::from_lambda(0.6, 1.0, 1.0).unwrap();
        let rho = lossy_tmsv(&p).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        let pure = tmsv_ket(0.6, p.dim()).unwrap().to_density().normalized().unwrap();
        assert!((rho.elements() - pure.elements()).max_abs() < 1e-12);
        assert!((rho.trace_mass() - (1.0 - 0.6f64.powi(2 * p.dim() as i32))).abs() < 1e-14);

        let p = TmsvParams::from_lambda(0.5, 0.5, 0.5)
            .unwrap()
            .with_dim(30)
            .unwrap();
        let rho = lossy_tmsv(&p).unwrap();
        let expect = 0.5 * 0.25 / 0.75;
        assert!((rho.mean_photon_number(0).unwrap() - expect).abs() < 1e-10);
        assert!((rho.mean_photon_number(1).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn lossy_tmsv_matches_kraus_route() {
        for &(lambda, t1, t2, dim) in &[(0.5, 0.3, 0.8, 6), (0.8, 0.1, 0.1, 9), (0.2, 1.0, 0.5, 3)] {
            let p = TmsvParams::from_lambda(lambda, t1, t2)
                .unwrap()
                .with_dim(dim)
                .unwrap();
            let ket = tmsv_ket(lambda, dim).unwrap();
            let rho = ket.to_density().normalized().unwrap();
            let rho = apply_kraus(&rho, &loss_channel(t1, dim).unwrap(), 0).unwrap();
            let rho = apply_kraus(&rho, &loss_channel(t2, dim).unwrap(), 1).unwrap();
            let fast = lossy_tmsv(&p).unwrap();
            assert!((fast.elements() - rho.elements()).max_abs() < 1e-14);
            assert!((fast.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lossy_marginals_are_thermal() {
        for &(lambda, t, dim) in &[(0.4, 0.3, 24), (0.6, 0.8, 34), (0.8, 0.5, 44)] {
            let p = TmsvParams::from_lambda(lambda, t, t)
                .unwrap()
                .with_dim(dim)
                .unwrap();
            let rho = lossy_tmsv(&p).unwrap();
            let nbar = t * lambda * lambda / (1.0 - lambda * lambda);
            let dist = rho.photon_distribution(1).unwrap();
            for (k, pk) in dist.iter().enumerate().take(12) {
                let thermal = nbar.powi(k as i32) / (1.0 + nbar).powi(k as i32 + 1);
                assert!((pk - thermal).abs() < 1e-8, "lambda={lambda} k={k}");
            }
            assert!(rho.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn gaussian_charfn_examples() {
        let p = TmsvParams::from_lambda(0.6, 1.0, 1.0).unwrap();
        let ideal = tmsv_charfn(&p);
        let lossy = lossy_tmsv_charfn(&p);
        assert_eq!(ideal.eval2(cz(0.0, 0.0), cz(0.0, 0.0)), cz(1.0, 0.0));
        for &(a, b) in &[(cz(0.3, 0.1), cz(-0.2, 0.5)), (cz(1.0, -1.0), cz(0.4, 0.4))] {
            assert!((ideal.eval2(a, b) - lossy.eval2(a, b)).norm() < 1e-15);
        }
        let vac = lossy_tmsv_charfn(&TmsvParams::from_lambda(0.0, 0.7, 0.7).unwrap());
        let (a, b) = (cz(0.8, 0.3), cz(-0.4, 1.1));
        let expect = (-(a.norm_sqr() + b.norm_sqr()) / 2.0).exp();
        assert!((vac.eval2(a, b).re - expect).abs() < 1e-15);
    }

    #[test]
    fn vacuum_density_charfn() {
        let vac = DensityOperator::basis(ModeSpace::single(6).unwrap(), &[0]).unwrap();
        let chi = charfn_from_density(&vac).unwrap();
        for &xi in &[cz(0.0, 0.0), cz(1.0, 0.5), cz(-2.0, 2.0), cz(0.0, -3.0)] {
            let expect = (-xi.norm_sqr() / 2.0).exp();
            assert!((chi.eval(&[xi]).unwrap() - expect).norm() < 1e-12);
        }
        assert!(chi.eval(&[cz(0.0, 0.0), cz(0.0, 0.0)]).is_err());
    }

    #[test]
    fn qubit_charfn_matches_density_route() {
        let space = ModeSpace::single(2).unwrap();
        for &(theta, phi) in &[(0.0, 0.0), (0.7, 1.3), (std::f64::consts::PI, 0.2), (2.1, 4.0)] {
            let c = (theta / 2.0f64).cos();
            let s = (theta / 2.0f64).sin();
            let ket = KetVector::from_terms(
                space.clone(),
                &[(vec![0], cz(c, 0.0)), (vec![1], Complex64::from_polar(s, phi))],
            )
            .unwrap();
            let numeric = charfn_from_density(&ket.to_density()).unwrap();
            let closed = qubit_charfn(theta, phi);
            for &xi in &[cz(0.0, 0.0), cz(0.5, -0.3), cz(-1.2, 0.9), cz(2.0, 1.0)] {
                let a = numeric.eval(&[xi]).unwrap();
                let b = closed.eval1(xi);
                assert!((a - b).norm() < 1e-12, "theta={theta} xi={xi}");
            }
        }
        let one = qubit_charfn(std::f64::consts::PI, 0.0);
        let xi = cz(0.6, 0.8);
        assert!((one.eval1(xi).re - (1.0 - 1.0) * (-0.5f64).exp()).abs() < 1e-15);
        let vac = qubit_charfn(0.0, 1.0);
        assert!((vac.eval1(cz(1.0, 1.0)).re - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tensor_and_partial_trace_consistent_for_tmsv_marginal() {
        let k = tmsv_ket(0.5, 12).unwrap();
        let rho = k.to_density();
        let red = partial_trace(&rho, &[1]).unwrap();
        for n in 0..12 {
            let expect = 0.75 * 0.25f64.powi(n as i32);
            assert!((red.element(&[n], &[n]).unwrap().re - expect).abs() < 1e-15);
        }
    }
}
