//! Heralded non-Gaussian operations on resource modes: qubit-subspace
//! truncation, quantum scissors (QS) and photon catalysis (PC).
//!
//! Every operation returns its success probability together with the
//! renormalized output state.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_kraus, CMatrix, DensityOperator, OperatorMatrix, NULL_PROB};
use crate::quadrature::PolarGrid;
use crate::resource::{lossy_tmsv_charfn, CharFn, GaussianCharFn, TmsvParams};

/// Quantum-scissors settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QsParams {
    ts: f64,
    eta: f64,
    series_cutoff: Option<usize>,
}

impl QsParams {
    /// `ts ∈ (0, 1/2)`, `eta ∈ [0, 1]`.
    pub fn new(ts: f64, eta: f64) -> Result<Self> {
        if !(ts > 0.0 && ts < 0.5) {
            return invalid(format!("QS transmissivity must be in (0, 0.5), got {ts}"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return invalid(format!("detector efficiency must be in [0, 1], got {eta}"));
        }
        Ok(Self {
            ts,
            eta,
            series_cutoff: None,
        })
    }

    pub fn ideal(ts: f64) -> Result<Self> {
        Self::new(ts, 1.0)
    }

    /// Largest `n + n′` kept in the detector-count sum; defaults to the
    /// acted mode's dimension plus 2.
    pub fn with_series_cutoff(mut self, cutoff: usize) -> Self {
        self.series_cutoff = Some(cutoff);
        self
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn series_cutoff(&self, dim: usize) -> usize {
        self.series_cutoff.unwrap_or(dim + 2)
    }
}

/// Photon-catalysis settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcParams {
    tc: f64,
}

impl PcParams {
    /// `tc ∈ (0, 1/4)`.
    pub fn new(tc: f64) -> Result<Self> {
        if !(tc > 0.0 && tc < 0.25) {
            return invalid(format!("PC transmissivity must be in (0, 0.25), got {tc}"));
        }
        Ok(Self { tc })
    }

    pub fn tc(&self) -> f64 {
        self.tc
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn heralded(
    rho: &DensityOperator,
    kraus: &[OperatorMatrix],
    mode: usize,
    operation: &'static str,
) -> Result<(f64, DensityOperator)> {
    let out = apply_kraus(rho, kraus, mode)?;
    let p = out.trace() / rho.trace();
    if !(p >= NULL_PROB) {
        return Err(Error::NullOutcome {
            operation,
            prob: p.max(0.0),
        });
    }
    Ok((p, out.normalized()?))
}

/// `M̂_trun = (|0⟩⟨0| + |1⟩⟨1|)/√2`, reducing the mode to two levels.
pub fn truncation_operator(dim: usize) -> Result<OperatorMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    OperatorMatrix::from_fn(dim, 2, |i, j| if i == j { c(s) } else { c(0.0) })
}

/// Truncates `mode` to span{|0⟩, |1⟩}; returns `P_trun` and the renormalized
/// state.
pub fn truncate_qubit_subspace(rho: &DensityOperator, mode: usize) -> Result<(f64, DensityOperator)> {
    rho.space().check_modes(&[mode])?;
    let op = truncation_operator(rho.space().dim(mode))?;
    heralded(rho, &[op], mode, "truncation")
}

/// Ideal QS operator `√T_s|0⟩⟨0| + √(1−T_s)|1⟩⟨1|` (output dimension 2).
pub fn qs_operator(ts: f64, dim: usize) -> Result<OperatorMatrix> {
    OperatorMatrix::from_fn(dim, 2, |i, j| match (i, j) {
        (0, 0) => c(ts.sqrt()),
        (1, 1) => c((1.0 - ts).sqrt()),
        _ => c(0.0),
    })
}

pub fn qs_ideal(rho: &DensityOperator, ts: f64, mode: usize) -> Result<(f64, DensityOperator)> {
    QsParams::ideal(ts)?;
    rho.space().check_modes(&[mode])?;
    let op = qs_operator(ts, rho.space().dim(mode))?;
    heralded(rho, &[op], mode, "quantum scissors")
}

/// Diagonal PC operator `⟨n|R̂|n⟩ = √T_c((T_c−1)n/T_c + 1)√T_c^n`.
pub fn pc_operator(tc: f64, dim: usize) -> Result<OperatorMatrix> {
    let diag: Vec<f64> = (0..dim).map(|n| pc_amplitude(tc, n)).collect();
    OperatorMatrix::diagonal(&diag)
}

fn pc_amplitude(tc: f64, n: usize) -> f64 {
    let n = n as f64;
    tc.sqrt() * ((tc - 1.0) * n / tc + 1.0) * tc.powf(n / 2.0)
}

pub fn pc_ideal(rho: &DensityOperator, tc: f64, mode: usize) -> Result<(f64, DensityOperator)> {
    PcParams::new(tc)?;
    rho.space().check_modes(&[mode])?;
    let op = pc_operator(tc, rho.space().dim(mode))?;
    heralded(rho, &[op], mode, "photon catalysis")
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `M̂_{n,n′}` for `n` photons at the heralding detector and `n′` at the
/// other one.
pub fn qs_count_operator(ts: f64, n: usize, np: usize, dim: usize) -> Result<OperatorMatrix> {
    if n == 0 {
        return invalid("heralding detector must see at least one photon");
    }
    let m = n + np;
    let sign = if np.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pre = sign * 2f64.powf(-((m - 1) as f64) / 2.0);
    let a0 =
        pre * (n as f64 - np as f64) * (factorial(m - 1) / (factorial(n) * factorial(np))).sqrt() * ts.sqrt();
    let a1 = pre * (factorial(m) / (factorial(n) * factorial(np))).sqrt() * (1.0 - ts).sqrt();
    let mut el = CMatrix::zeros(2, dim);
    if m - 1 < dim {
        el[(0, m - 1)] = c(a0);
    }
    if m < dim {
        el[(1, m)] = c(a1);
    }
    OperatorMatrix::single_mode(dim, 2, el)
}

/// QS with detectors of efficiency `η`: photon-number-resolving detection of
/// exactly one count at one detector and none at the other.
pub fn qs_inefficient(
    rho: &DensityOperator,
    params: QsParams,
    mode: usize,
) -> Result<(f64, DensityOperator)> {
    rho.space().check_modes(&[mode])?;
    let dim = rho.space().dim(mode);
    let cutoff = params.series_cutoff(dim);
    if cutoff < dim {
        return invalid(format!("series cutoff {cutoff} below mode dimension {dim}"));
    }
    let eta = params.eta;
    let mut kraus = Vec::new();
    for total in 1..=cutoff.min(dim) {
        for n in 1..=total {
            let np = total - n;
            let w = n as f64 * eta * powi0(1.0 - eta, total - 1);
            if w == 0.0 {
                continue;
            }
            let op = qs_count_operator(params.ts, n, np, dim)?;
            if op.elements().iter().all(|z| *z == c(0.0)) {
                continue;
            }
            let el = op.elements().scale(w.sqrt());
            kraus.push(OperatorMatrix::single_mode(dim, 2, el)?);
        }
    }
    if kraus.is_empty() {
        return Err(Error::NullOutcome {
            operation: "inefficient quantum scissors",
            prob: 0.0,
        });
    }
    heralded(rho, &kraus, mode, "inefficient quantum scissors")
}

fn powi0(x: f64, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

/// Ideal QS on both modes 0 and 1; probability is the product of the two.
pub fn qs_symmetric(rho: &DensityOperator, ts: f64) -> Result<(f64, DensityOperator)> {
    qs_two_modes(rho, QsParams::ideal(ts)?, QsParams::ideal(ts)?)
}

/// QS on modes 0 and 1 with per-mode settings.
pub fn qs_two_modes(
    rho: &DensityOperator,
    first: QsParams,
    second: QsParams,
) -> Result<(f64, DensityOperator)> {
    let (p1, s1) = qs_inefficient(rho, first, 0)?;
    let (p2, s2) = qs_inefficient(&s1, second, 1)?;
    Ok((p1 * p2, s2))
}

/// PC on both modes 0 and 1; probability is the product of the two.
pub fn pc_symmetric(rho: &DensityOperator, tc: f64) -> Result<(f64, DensityOperator)> {
    pc_two_modes(rho, tc, tc)
}

pub fn pc_two_modes(rho: &DensityOperator, tc1: f64, tc2: f64) -> Result<(f64, DensityOperator)> {
    let (p1, s1) = pc_ideal(rho, tc1, 0)?;
    let (p2, s2) = pc_ideal(&s1, tc2, 1)?;
    Ok((p1 * p2, s2))
}

/// Characteristic function of the lossy TMSV after PC on both modes,
/// evaluated by quadrature over the Gaussian input characteristic function.
///
/// The result is unnormalized: its value at the origin is the PC success
/// probability.
#[derive(Clone, Debug)]
pub struct PcCharFn {
    input: GaussianCharFn,
    tc: [f64; 2],
    radius: f64,
    start_nodes: usize,
    max_nodes: usize,
    rel_tol: f64,
}

pub fn pc_charfn(params: &TmsvParams, pc: PcParams) -> PcCharFn {
    PcCharFn {
        input: lossy_tmsv_charfn(params),
        tc: [pc.tc, pc.tc],
        radius: 6.0,
        start_nodes: 16,
        max_nodes: 64,
        rel_tol: 1e-4,
    }
}

impl PcCharFn {
    pub fn with_nodes(mut self, start: usize, max: usize) -> Self {
        self.start_nodes = start;
        self.max_nodes = max;
        self
    }

    fn integrate(&self, xi1: Complex64, xi2: Complex64, nodes: usize) -> Complex64 {
        let grid = PolarGrid::new(self.radius, nodes, nodes);
        let pts = grid.nodes();
        let g = &self.input;
        // χ'(γ1, γ2) = e1(γ1)·e2(γ2)·exp(b·Re(γ1γ2))
        let k1: Vec<Complex64> = pts
            .iter()
            .map(|&(z, w)| w * (-0.5 * g.a1 * z.norm_sqr()).exp() * pc_kernel(xi1, z, self.tc[0]))
            .collect();
        let k2: Vec<Complex64> = pts
            .iter()
            .map(|&(z, w)| w * (-0.5 * g.a2 * z.norm_sqr()).exp() * pc_kernel(xi2, z, self.tc[1]))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &(z1, _)) in pts.iter().enumerate() {
            let mut inner = Complex64::new(0.0, 0.0);
            for (j, &(z2, _)) in pts.iter().enumerate() {
                inner += k2[j] * (g.b * (z1 * z2).re).exp();
            }
            acc += k1[i] * inner;
        }
        acc / (std::f64::consts::PI * std::f64::consts::PI)
    }

    /// Doubles the node count per axis until successive estimates agree to
    /// the relative tolerance.
    pub fn eval2(&self, xi1: Complex64, xi2: Complex64) -> Result<Complex64> {
        let mut n = self.start_nodes;
        let mut prev = self.integrate(xi1, xi2, n);
        let scale_ref = if xi1 == Complex64::new(0.0, 0.0) && xi2 == Complex64::new(0.0, 0.0) {
            prev.norm()
        } else {
            self.integrate(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), n)
                .norm()
        };
        while n * 2 <= self.max_nodes {
            n *= 2;
            let next = self.integrate(xi1, xi2, n);
            let scale = next.norm().max(scale_ref);
            if (next - prev).norm() <= self.rel_tol * scale {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Quadrature {
            what: "photon-catalysis characteristic function",
            coarse: prev.re,
            fine: prev.re,
        })
    }
}

impl CharFn for PcCharFn {
    fn num_modes(&self) -> usize {
        2
    }

    fn eval(&self, xi: &[Complex64]) -> Result<Complex64> {
        if xi.len() != 2 {
            return invalid(format!(
                "characteristic function takes 2 arguments, got {}",
                xi.len()
            ));
        }
        self.eval2(xi[0], xi[1])
    }

    fn counter_rotation_invariant(&self) -> bool {
        true
    }
}

/// `tr{D(ξ) R̂ D(−γ) R̂}` for the single-mode PC operator `R̂`.
///
/// Uses `tr{D(ξ) xⁿ D(−γ) yⁿ} = exp(Φ)/(1−xy)` and generates the `n`-linear
/// factors of `R̂` by `x∂_x`, `y∂_y`.
pub fn pc_kernel(xi: Complex64, gamma: Complex64, tc: f64) -> Complex64 {
    let t = tc.sqrt();
    let cc = (tc - 1.0) / tc;
    let (x, y) = (t, t);
    let u = 1.0 - x * y;
    let p = (gamma.conj() - x * xi.conj()) * (xi - x * gamma);
    let dp = -xi.norm_sqr() - gamma.norm_sqr() + 2.0 * x * xi.conj() * gamma;
    let cross = xi.conj() * gamma;
    let phi = y * p / u - 0.5 * (gamma.norm_sqr() + xi.norm_sqr()) + x * cross;
    let g = phi.exp() / u;
    let lx = y / u + y * dp / u + y * y * p / (u * u) + cross;
    let ly = x / u + p / (u * u);
    let lxy = 1.0 / (u * u) + dp / (u * u) + 2.0 * y * p / (u * u * u);
    t * t * g * (1.0 + cc * x * lx + cc * y * ly + cc * cc * x * y * (lx * ly + lxy))
}
