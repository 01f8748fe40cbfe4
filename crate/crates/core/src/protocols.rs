//! End-to-end teleportation pipelines, Bloch-sphere averaging, free-parameter
//! optimization and classical limits.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fock::{
    apply_kraus, tensor_product, CMatrix, CVector, DensityOperator, KetVector, ModeSpace, NULL_PROB,
};
use crate::hbsm::{
    detector_loss_map, four_state_projection, two_state_hbsm, two_state_hbsm_inefficient, BellState,
    BsmOutcomes,
};
use crate::nongauss::{pc_symmetric, qs_two_modes, truncate_qubit_subspace, PcParams, QsParams};
use crate::quadrature::{BlochQuadrature, PolarGrid};
use crate::resource::{charfn_from_density, lossy_tmsv, lossy_tmsv_charfn, CharFn, TmsvParams};

/// Pure input qubit `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitSpec {
    theta: f64,
    phi: f64,
}

impl QubitSpec {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return invalid(format!("theta must be in [0, pi], got {theta}"));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return invalid(format!("phi must be in [0, 2pi), got {phi}"));
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `(cos(θ/2), e^{iφ} sin(θ/2))`.
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (
            Complex64::new((self.theta / 2.0).cos(), 0.0),
            Complex64::from_polar((self.theta / 2.0).sin(), self.phi),
        )
    }

    pub fn ket(&self) -> KetVector {
        let (a, b) = self.amplitudes();
        KetVector::new(
            ModeSpace::single(2).expect("dim 2"),
            CVector::from_vec(vec![a, b]),
        )
        .expect("normalized qubit")
    }

    pub fn density(&self) -> DensityOperator {
        self.ket().to_density()
    }
}

fn probe_weights(theta: f64, phi: f64) -> [f64; 4] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let a = 2.0 * c * s * phi.cos();
    let b = 2.0 * c * s * phi.sin();
    [c * c - 0.5 * (a + b), s * s - 0.5 * (a + b), a, b]
}

fn probe_states() -> [DensityOperator; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mk = |a: Complex64, b: Complex64| {
        KetVector::new(
            ModeSpace::single(2).expect("dim 2"),
            CVector::from_vec(vec![a, b]),
        )
        .expect("normalized probe")
        .to_density()
    };
    [
        mk(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        mk(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        mk(Complex64::new(r, 0.0), Complex64::new(r, 0.0)),
        mk(Complex64::new(r, 0.0), Complex64::new(0.0, r)),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    CvBsm,
    HbsmTwoState,
    HbsmFourState,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::CvBsm => "cv-bsm",
            Protocol::HbsmTwoState => "hbsm-two-state",
            Protocol::HbsmFourState => "hbsm-four-state",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distillation {
    None,
    Qs { ts: f64 },
    Pc { tc: f64 },
}

impl Distillation {
    pub fn name(&self) -> &'static str {
        match self {
            Distillation::None => "none",
            Distillation::Qs { .. } => "qs",
            Distillation::Pc { .. } => "pc",
        }
    }
}

/// Normalization of the Bloch-averaged fidelity of conditional protocols.
///
/// Both agree for deterministic protocols. For a vacuum resource the
/// two-state H-BSM gives 1/2 per point and 2/3 as a ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormConvention {
    /// `E[Σ_k P_k F_k] / E[P_BSM]`.
    Ratio,
    /// `E[Σ_k P_k F_k / P_BSM]`: the fidelity of each successful run,
    /// averaged over inputs.
    #[default]
    PerPoint,
}

/// Full description of one protocol evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub distillation: Distillation,
    pub tmsv: TmsvParams,
    /// Displacement gain (CV-BSM only).
    pub g: f64,
    /// Detector efficiency (two-state H-BSM and its QS detectors).
    pub eta: f64,
}

impl ProtocolConfig {
    pub fn new(protocol: Protocol, tmsv: TmsvParams) -> Self {
        Self {
            protocol,
            distillation: Distillation::None,
            tmsv,
            g: 1.0,
            eta: 1.0,
        }
    }

    pub fn with_distillation(mut self, distillation: Distillation) -> Self {
        self.distillation = distillation;
        self
    }

    pub fn with_gain(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return invalid(format!("gain must be finite and >= 0, got {}", self.g));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return invalid(format!("detector efficiency must be in (0, 1], got {}", self.eta));
        }
        match self.distillation {
            Distillation::None => {}
            Distillation::Qs { ts } => {
                QsParams::new(ts, self.eta)?;
            }
            Distillation::Pc { tc } => {
                PcParams::new(tc)?;
            }
        }
        if self.eta < 1.0 {
            let ok = self.protocol == Protocol::HbsmTwoState
                && !matches!(self.distillation, Distillation::Pc { .. });
            if !ok {
                return invalid(
                    "detector efficiency below 1 is modeled only for the two-state H-BSM, optionally with QS",
                );
            }
        }
        Ok(())
    }
}

/// Probability and fidelity of one Bell outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeResult {
    pub bell: BellState,
    pub prob: f64,
    /// `None` for a null outcome.
    pub fidelity: Option<f64>,
}

/// Result for a single input qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    pub outcomes: Vec<OutcomeResult>,
    pub p_bsm: f64,
    pub p_operation: f64,
    pub p_total: f64,
    /// `Σ_k P_k F_k`.
    pub weighted_fidelity: f64,
    /// Retained probability of the truncated resource.
    pub truncation_mass: f64,
    pub resource_dim: usize,
}

impl ProtocolResult {
    /// Fidelity conditioned on success, `Σ_k P_k F_k / P_BSM`.
    pub fn fidelity(&self) -> Option<f64> {
        (self.p_bsm > NULL_PROB).then(|| self.weighted_fidelity / self.p_bsm)
    }
}

/// Bloch-averaged figures of merit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragedResult {
    pub f_bar_ratio: f64,
    pub f_bar_per_point: f64,
    pub p_total_avg: f64,
    pub p_bsm_avg: f64,
    pub p_operation: f64,
    /// Largest disagreement with the refined quadrature (0 when unchecked).
    pub quadrature_error: f64,
    pub truncation_mass: f64,
    pub resource_dim: usize,
}

impl AveragedResult {
    /// Average fidelity in the default (per-point) convention.
    pub fn f_bar(&self) -> f64 {
        self.f_bar_per_point
    }

    pub fn f_bar_with(&self, conv: NormConvention) -> f64 {
        match conv {
            NormConvention::Ratio => self.f_bar_ratio,
            NormConvention::PerPoint => self.f_bar_per_point,
        }
    }
}

/// Resource after distillation and (if needed) truncation, ready for the
/// Bell measurement.
struct PreparedResource {
    rho: DensityOperator,
    p_operation: f64,
    truncation_mass: f64,
}

fn prepare_hbsm_resource(cfg: &ProtocolConfig, base: &DensityOperator) -> Result<PreparedResource> {
    let (p_dist, rho) = match cfg.distillation {
        Distillation::None => (1.0, base.clone()),
        Distillation::Qs { ts } => {
            let q = QsParams::new(ts, cfg.eta)?;
            qs_two_modes(base, q, q)?
        }
        Distillation::Pc { tc } => pc_symmetric(base, tc)?,
    };
    // the truncation is a physical (QS-like) step with its own success
    // probability, so it runs even when the mode already has two levels
    let (p_trun, rho) =
        if cfg.protocol == Protocol::HbsmFourState && !matches!(cfg.distillation, Distillation::Qs { .. }) {
            truncate_qubit_subspace(&rho, 0)?
        } else {
            (1.0, rho)
        };
    Ok(PreparedResource {
        rho,
        p_operation: p_dist * p_trun,
        truncation_mass: base.trace_mass(),
    })
}

fn measure(cfg: &ProtocolConfig, joint: &DensityOperator) -> Result<BsmOutcomes> {
    match cfg.protocol {
        Protocol::HbsmTwoState if cfg.eta < 1.0 => two_state_hbsm_inefficient(joint, cfg.eta),
        Protocol::HbsmTwoState => two_state_hbsm(joint),
        Protocol::HbsmFourState => four_state_projection(joint),
        Protocol::CvBsm => invalid("CV-BSM has no Bell measurement"),
    }
}

/// Unnormalized conditional states on 2′, one per outcome.
fn conditionals(
    cfg: &ProtocolConfig,
    input: &DensityOperator,
    resource: &DensityOperator,
) -> Result<Vec<(BellState, CMatrix)>> {
    let joint = tensor_product(input, resource)?;
    let out = measure(cfg, &joint)?;
    Ok(out
        .outcomes()
        .iter()
        .map(|(b, c)| (*b, c.unnormalized().elements().clone()))
        .collect())
}

/// `⟨in|σ C σ†|in⟩` for the outcome's correction σ.
fn corrected_overlap(bell: BellState, cond: &CMatrix, amps: (Complex64, Complex64)) -> f64 {
    let d = cond.nrows();
    let sigma = bell.correction().matrix(d);
    let mut ket = CVector::zeros(d);
    ket[0] = amps.0;
    ket[1] = amps.1;
    let v = sigma.adjoint() * ket;
    (v.adjoint() * cond * v)[(0, 0)].re
}

fn assemble(
    amps: (Complex64, Complex64),
    conds: &[(BellState, CMatrix)],
    prepared: &PreparedResource,
    resource_dim: usize,
) -> ProtocolResult {
    let mut outcomes = Vec::with_capacity(conds.len());
    let mut p_bsm = 0.0;
    let mut weighted = 0.0;
    for (bell, c) in conds {
        let prob = c.trace().re.max(0.0);
        let pf = corrected_overlap(*bell, c, amps).max(0.0);
        p_bsm += prob;
        weighted += pf;
        outcomes.push(OutcomeResult {
            bell: *bell,
            prob,
            fidelity: (prob >= NULL_PROB).then(|| (pf / prob).min(1.0)),
        });
    }
    ProtocolResult {
        outcomes,
        p_bsm,
        p_operation: prepared.p_operation,
        p_total: prepared.p_operation * p_bsm,
        weighted_fidelity: weighted,
        truncation_mass: prepared.truncation_mass,
        resource_dim,
    }
}

/// Runs the H-BSM pipeline for one input qubit.
pub fn hbsm_teleport(q: QubitSpec, cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    if cfg.protocol == Protocol::CvBsm {
        return invalid("hbsm_teleport needs an H-BSM protocol");
    }
    cfg.validate()?;
    let base = lossy_tmsv(&cfg.tmsv)?;
    let prepared = prepare_hbsm_resource(cfg, &base)?;
    let conds = conditionals(cfg, &q.density(), &prepared.rho)?;
    Ok(assemble(q.amplitudes(), &conds, &prepared, cfg.tmsv.dim()))
}

/// H-BSM pipeline evaluated once per probe state; any input qubit's
/// conditionals are a real linear combination of the probe results.
pub struct HbsmProbeMap {
    prepared: PreparedResource,
    probes: [Vec<(BellState, CMatrix)>; 4],
    resource_dim: usize,
}

impl HbsmProbeMap {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let base = lossy_tmsv(&cfg.tmsv)?;
        Self::from_resource(cfg, &base)
    }

    /// Reuses an already built lossy TMSV (it must match `cfg.tmsv`).
    pub fn from_resource(cfg: &ProtocolConfig, base: &DensityOperator) -> Result<Self> {
        if cfg.protocol == Protocol::CvBsm {
            return invalid("probe map needs an H-BSM protocol");
        }
        cfg.validate()?;
        let prepared = prepare_hbsm_resource(cfg, base)?;
        let states = probe_states();
        let mut probes: [Vec<(BellState, CMatrix)>; 4] = Default::default();
        for (slot, s) in probes.iter_mut().zip(states.iter()) {
            *slot = conditionals(cfg, s, &prepared.rho)?;
        }
        Ok(Self {
            prepared,
            probes,
            resource_dim: cfg.tmsv.dim(),
        })
    }

    pub fn evaluate(&self, theta: f64, phi: f64) -> ProtocolResult {
        let w = probe_weights(theta, phi);
        let conds: Vec<(BellState, CMatrix)> = (0..self.probes[0].len())
            .map(|k| {
                let bell = self.probes[0][k].0;
                let mut m = self.probes[0][k].1.scale(w[0]);
                for p in 1..4 {
                    m += self.probes[p][k].1.scale(w[p]);
                }
                (bell, m)
            })
            .collect();
        let amps = (
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        );
        assemble(amps, &conds, &self.prepared, self.resource_dim)
    }

    pub fn p_operation(&self) -> f64 {
        self.prepared.p_operation
    }

    fn average_on(&self, quad: &BlochQuadrature) -> [f64; 4] {
        let mut acc = [0.0; 4];
        for n in quad.nodes() {
            let r = self.evaluate(n.theta, n.phi);
            acc[0] += n.weight * r.weighted_fidelity;
            acc[1] += n.weight * r.p_bsm;
            acc[2] += n.weight * r.p_total;
            acc[3] += n.weight * r.fidelity().unwrap_or(0.0);
        }
        acc
    }

    /// Per-point average, doubling the polar nodes until two successive
    /// grids agree within [`PER_POINT_CHECK_TOL`], then checked once against
    /// a doubled azimuthal grid. Returns the value and the last difference.
    fn per_point_refined(&self) -> Result<(f64, f64)> {
        let n_phi = 2 * BlochQuadrature::STANDARD_NODES;
        let mut n_theta = n_phi;
        let mut prev = self.average_on(&BlochQuadrature::new(n_theta, n_phi))[3];
        loop {
            n_theta *= 2;
            let next = self.average_on(&BlochQuadrature::new(n_theta, n_phi))[3];
            let diff = (next - prev).abs();
            if diff <= PER_POINT_CHECK_TOL {
                let wide = self.average_on(&BlochQuadrature::new(n_theta, 2 * n_phi))[3];
                if (wide - next).abs() > PER_POINT_CHECK_TOL {
                    return Err(Error::Quadrature {
                        what: "per-point normalized Bloch average (azimuth)",
                        coarse: next,
                        fine: wide,
                    });
                }
                return Ok((next, diff.max((wide - next).abs())));
            }
            if n_theta >= MAX_POLAR_NODES {
                return Err(Error::Quadrature {
                    what: "per-point normalized Bloch average",
                    coarse: prev,
                    fine: next,
                });
            }
            prev = next;
        }
    }

    /// Bloch average on the standard grid, optionally verified against the
    /// doubled grid at 1e−8.
    pub fn average(&self, check: bool) -> Result<AveragedResult> {
        let coarse = self.average_on(&BlochQuadrature::standard());
        let mut err = 0.0;
        let mut pp = coarse[3];
        if check {
            let fine = self.average_on(&BlochQuadrature::doubled());
            for (a, b) in coarse.iter().zip(&fine).take(3) {
                if (a - b).abs() > BLOCH_CHECK_TOL {
                    return Err(Error::Quadrature {
                        what: "Bloch-sphere average",
                        coarse: *a,
                        fine: *b,
                    });
                }
                err = f64::max(err, (a - b).abs());
            }
            // the per-point ratio is not a trigonometric polynomial and is
            // steep near the pole when P_BSM(θ) nearly vanishes there; it is
            // smooth and periodic in φ, so only the polar grid is refined
            let (value, diff) = self.per_point_refined()?;
            err = f64::max(err, diff);
            pp = value;
        }
        let [wf, pb, pt, _] = coarse;
        if pb < NULL_PROB {
            return Err(Error::NullOutcome {
                operation: "Bell measurement",
                prob: pb.max(0.0),
            });
        }
        Ok(AveragedResult {
            f_bar_ratio: (wf / pb).clamp(0.0, 1.0),
            f_bar_per_point: pp.clamp(0.0, 1.0),
            p_total_avg: pt.clamp(0.0, 1.0),
            p_bsm_avg: pb.clamp(0.0, 1.0),
            p_operation: self.prepared.p_operation,
            quadrature_error: err,
            truncation_mass: self.prepared.truncation_mass,
            resource_dim: self.resource_dim,
        })
    }
}

/// Agreement required between the standard and doubled Bloch grids.
pub const BLOCH_CHECK_TOL: f64 = 1e-8;
/// Agreement required between the standard and doubled phase-space grids.
pub const CV_CHECK_TOL: f64 = 1e-6;
/// Agreement required between the 32- and 64-node Bloch grids for the
/// per-point normalized average.
pub const PER_POINT_CHECK_TOL: f64 = 1e-6;
/// Largest polar node count tried for the per-point average.
pub const MAX_POLAR_NODES: usize = 1024;
const CV_RADIUS: f64 = 8.0;
const CV_NODES: usize = 64;

/// Bloch-averaged fidelity and success probability (checked quadrature).
pub fn average_fidelity(cfg: &ProtocolConfig) -> Result<AveragedResult> {
    match cfg.protocol {
        Protocol::CvBsm => average_fidelity_cvbsm(cfg),
        _ => HbsmProbeMap::new(cfg)?.average(true),
    }
}

/// Phase-space moments of the CV-BSM fidelity for fixed gain and resource.
///
/// The input characteristic function is `e^{−|ξ|²/2} Σ_j c_j f_j(ξ)` with
/// `f = (1, 1−|ξ|², ξ, −ξ*)` and `c = (c², s², cs e^{−iφ}, cs e^{iφ})`, so
/// the fidelity is the quadratic form `Σ_{jk} c_j c_k M_{jk}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvMoments {
    m: [[Complex64; 4]; 4],
}

fn basis_values(xi: Complex64) -> [Complex64; 4] {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0 - xi.norm_sqr(), 0.0),
        xi,
        -xi.conj(),
    ]
}

fn input_coefficients(theta: f64, phi: f64) -> [Complex64; 4] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    [
        Complex64::new(c * c, 0.0),
        Complex64::new(s * s, 0.0),
        Complex64::from_polar(c * s, -phi),
        Complex64::from_polar(c * s, phi),
    ]
}

impl CvMoments {
    pub fn compute(g: f64, resource: &dyn CharFn, grid: &PolarGrid) -> Result<Self> {
        if resource.num_modes() != 2 {
            return invalid("CV-BSM resource must be a two-mode characteristic function");
        }
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        let mut add = |xi: Complex64, w: f64, chi: Complex64| {
            let env = (-(1.0 + g * g) * xi.norm_sqr() / 2.0).exp();
            let common = chi * env * w / PI;
            if common == Complex64::new(0.0, 0.0) {
                return;
            }
            let fa = basis_values(xi);
            let fb = basis_values(-g * xi);
            for j in 0..4 {
                let cj = common * fa[j];
                for k in 0..4 {
                    m[j][k] += cj * fb[k];
                }
            }
        };
        if resource.counter_rotation_invariant() {
            // χ(−ξ, −gξ*) only depends on |ξ|: one evaluation per ring
            for (r, ring) in grid.rings() {
                let chi = resource.eval(&[Complex64::new(-r, 0.0), Complex64::new(-g * r, 0.0)])?;
                for &(xi, w) in ring {
                    add(xi, w, chi);
                }
            }
        } else {
            for &(xi, w) in grid.nodes() {
                add(xi, w, resource.eval(&[-xi, -g * xi.conj()])?);
            }
        }
        Ok(Self { m })
    }

    pub fn fidelity(&self, theta: f64, phi: f64) -> f64 {
        let c = input_coefficients(theta, phi);
        let mut f = Complex64::new(0.0, 0.0);
        for j in 0..4 {
            for k in 0..4 {
                f += c[j] * c[k] * self.m[j][k];
            }
        }
        f.re.clamp(0.0, 1.0 + 1e-6)
    }

    pub fn average(&self, quad: &BlochQuadrature) -> f64 {
        quad.average(|t, p| self.fidelity(t, p))
    }
}

/// CV-BSM fidelity for one input qubit by direct phase-space quadrature.
pub fn cvbsm_fidelity(q: QubitSpec, g: f64, chi_resource: &dyn CharFn) -> Result<f64> {
    if !(g >= 0.0 && g.is_finite()) {
        return invalid(format!("gain must be finite and >= 0, got {g}"));
    }
    if chi_resource.num_modes() != 2 {
        return invalid("CV-BSM resource must be a two-mode characteristic function");
    }
    let input = crate::resource::qubit_charfn(q.theta, q.phi);
    let run = |n: usize| -> Result<f64> {
        let grid = PolarGrid::new(CV_RADIUS, n, n);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(xi, w) in grid.nodes() {
            let res = chi_resource.eval(&[-xi, -g * xi.conj()])?;
            acc += input.eval1(xi) * input.eval1(-g * xi) * res * w;
        }
        Ok(acc.re / PI)
    };
    let coarse = run(CV_NODES)?;
    let fine = run(2 * CV_NODES)?;
    if (coarse - fine).abs() > CV_CHECK_TOL {
        return Err(Error::Quadrature {
            what: "CV-BSM fidelity",
            coarse,
            fine,
        });
    }
    Ok(coarse.clamp(0.0, 1.0 + 1e-6))
}

/// Resource characteristic function and heralding probability for CV-BSM.
pub struct CvResource {
    chi: Box<dyn CharFn>,
    p_operation: f64,
    truncation_mass: f64,
    resource_dim: usize,
}

impl CvResource {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let base = match cfg.distillation {
            Distillation::None => None,
            _ => Some(lossy_tmsv(&cfg.tmsv)?),
        };
        Self::build(cfg, base.as_ref())
    }

    fn build(cfg: &ProtocolConfig, base: Option<&DensityOperator>) -> Result<Self> {
        if cfg.protocol != Protocol::CvBsm {
            return invalid("CV resource needs the CV-BSM protocol");
        }
        cfg.validate()?;
        let dim = cfg.tmsv.dim();
        let owned;
        let base = match (cfg.distillation, base) {
            (Distillation::None, _) => None,
            (_, Some(b)) => Some(b),
            (_, None) => {
                owned = lossy_tmsv(&cfg.tmsv)?;
                Some(&owned)
            }
        };
        match (cfg.distillation, base) {
            (Distillation::Qs { ts }, Some(b)) => {
                let q = QsParams::ideal(ts)?;
                let (p, st) = qs_two_modes(b, q, q)?;
                Ok(Self {
                    chi: Box::new(charfn_from_density(&st)?),
                    p_operation: p,
                    truncation_mass: b.trace_mass(),
                    resource_dim: dim,
                })
            }
            (Distillation::Pc { tc }, Some(b)) => {
                let (p, st) = pc_symmetric(b, tc)?;
                Ok(Self {
                    chi: Box::new(charfn_from_density(&st)?),
                    p_operation: p,
                    truncation_mass: b.trace_mass(),
                    resource_dim: dim,
                })
            }
            _ => Ok(Self {
                chi: Box::new(lossy_tmsv_charfn(&cfg.tmsv)),
                p_operation: 1.0,
                truncation_mass: 1.0,
                resource_dim: 0,
            }),
        }
    }

    pub fn charfn(&self) -> &dyn CharFn {
        self.chi.as_ref()
    }

    pub fn p_operation(&self) -> f64 {
        self.p_operation
    }

    /// Bloch-averaged fidelity at gain `g`; with `check`, the phase-space
    /// quadrature is repeated on the doubled grid.
    pub fn average(&self, g: f64, check: bool) -> Result<AveragedResult> {
        let quad = BlochQuadrature::standard();
        let coarse = CvMoments::compute(g, self.charfn(), &PolarGrid::new(CV_RADIUS, CV_NODES, CV_NODES))?;
        let f = coarse.average(&quad);
        let mut err = 0.0;
        if check {
            let fine = CvMoments::compute(
                g,
                self.charfn(),
                &PolarGrid::new(CV_RADIUS, 2 * CV_NODES, 2 * CV_NODES),
            )?;
            let ff = fine.average(&quad);
            err = (f - ff).abs();
            if err > CV_CHECK_TOL {
                return Err(Error::Quadrature {
                    what: "CV-BSM average fidelity",
                    coarse: f,
                    fine: ff,
                });
            }
            let fb = coarse.average(&BlochQuadrature::doubled());
            if (f - fb).abs() > BLOCH_CHECK_TOL {
                return Err(Error::Quadrature {
                    what: "Bloch-sphere average",
                    coarse: f,
                    fine: fb,
                });
            }
            err = err.max((f - fb).abs());
        }
        let f = f.clamp(0.0, 1.0);
        Ok(AveragedResult {
            f_bar_ratio: f,
            f_bar_per_point: f,
            p_total_avg: self.p_operation,
            p_bsm_avg: 1.0,
            p_operation: self.p_operation,
            quadrature_error: err,
            truncation_mass: self.truncation_mass,
            resource_dim: self.resource_dim,
        })
    }
}

/// Bloch-averaged CV-BSM fidelity at the configured gain.
pub fn average_fidelity_cvbsm(cfg: &ProtocolConfig) -> Result<AveragedResult> {
    CvResource::new(cfg)?.average(cfg.g, true)
}

/// Number of grid points of the coarse optimizer scan.
pub const SCAN_POINTS: usize = 25;
/// Absolute argument tolerance of the golden-section refinement.
pub const ARG_TOL: f64 = 1e-3;

/// Axis on which [`optimize_parameter_on`] scans and refines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchScale {
    Linear,
    /// Uniform in `ln x`; the refinement stops at relative width 1e−3,
    /// which is tighter than the absolute tolerance for `x < 1`.
    Log,
}

/// Bounded scalar maximization: a 25-point scan followed by golden-section
/// refinement around the best grid point.
pub fn optimize_parameter<E>(
    objective: impl FnMut(f64) -> std::result::Result<f64, E>,
    lo: f64,
    hi: f64,
) -> std::result::Result<(f64, f64), E> {
    optimize_parameter_on(objective, lo, hi, SearchScale::Linear)
}

pub fn optimize_parameter_on<E>(
    mut objective: impl FnMut(f64) -> std::result::Result<f64, E>,
    lo: f64,
    hi: f64,
    scale: SearchScale,
) -> std::result::Result<(f64, f64), E> {
    assert!(lo < hi, "empty bracket");
    let (to_u, from_u): (fn(f64) -> f64, fn(f64) -> f64) = match scale {
        SearchScale::Linear => (|x| x, |u| u),
        SearchScale::Log => {
            assert!(lo > 0.0, "log search needs a positive bracket");
            (f64::ln, f64::exp)
        }
    };
    let mut f = |u: f64| objective(from_u(u));
    let (ulo, uhi) = (to_u(lo), to_u(hi));
    let step = (uhi - ulo) / (SCAN_POINTS - 1) as f64;
    let us: Vec<f64> = (0..SCAN_POINTS).map(|i| ulo + step * i as f64).collect();
    let mut best = (us[0], f64::NEG_INFINITY);
    let mut best_i = 0;
    for (i, &u) in us.iter().enumerate() {
        let v = f(u)?;
        if v > best.1 {
            best = (u, v);
            best_i = i;
        }
    }
    let mut a = us[best_i.saturating_sub(1)];
    let mut b = us[(best_i + 1).min(SCAN_POINTS - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > ARG_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    for (u, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (u, v);
        }
    }
    Ok((from_u(best.0), best.1))
}

pub const GAIN_BOUNDS: (f64, f64) = (0.0, 1.5);
/// The optimal `T_s` is close to `λT` for weak squeezing or heavy loss, so
/// the lower end reaches well below 0.01.
pub const TS_BOUNDS: (f64, f64) = (1e-4, 0.49);
pub const TC_BOUNDS: (f64, f64) = (0.01, 0.24);

/// Outcome of the free-parameter optimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizedResult {
    /// Configuration with the optimal parameters filled in.
    pub config: ProtocolConfig,
    pub result: AveragedResult,
}

fn with_distill_param(d: Distillation, x: f64) -> Distillation {
    match d {
        Distillation::None => Distillation::None,
        Distillation::Qs { .. } => Distillation::Qs { ts: x },
        Distillation::Pc { .. } => Distillation::Pc { tc: x },
    }
}

fn distill_bounds(d: Distillation) -> Option<(f64, f64, SearchScale)> {
    match d {
        Distillation::None => None,
        Distillation::Qs { .. } => Some((TS_BOUNDS.0, TS_BOUNDS.1, SearchScale::Log)),
        Distillation::Pc { .. } => Some((TC_BOUNDS.0, TC_BOUNDS.1, SearchScale::Linear)),
    }
}

/// Maximizes `f̄` over the free parameters of `cfg`, one at a time: the gain
/// for CV-BSM, then `T_s` or `T_c` when distilling, then the gain again.
/// The final point is re-evaluated with the checked quadrature.
pub fn optimize_config(cfg: &ProtocolConfig, conv: NormConvention) -> Result<OptimizedResult> {
    cfg.validate()?;
    let mut best = *cfg;
    match cfg.protocol {
        Protocol::CvBsm => {
            let plain = ProtocolConfig {
                distillation: Distillation::None,
                ..*cfg
            };
            let res = CvResource::new(&plain)?;
            let (g0, _) = optimize_parameter(
                |g| res.average(g, false).map(|r| r.f_bar()),
                GAIN_BOUNDS.0,
                GAIN_BOUNDS.1,
            )?;
            best.g = g0;
            if let Some((lo, hi, scale)) = distill_bounds(cfg.distillation) {
                let base = lossy_tmsv(&cfg.tmsv)?;
                let (x, _) = optimize_parameter_on(
                    |x| {
                        let c = ProtocolConfig {
                            distillation: with_distill_param(cfg.distillation, x),
                            g: g0,
                            ..*cfg
                        };
                        CvResource::build(&c, Some(&base))?
                            .average(g0, false)
                            .map(|r| r.f_bar())
                    },
                    lo,
                    hi,
                    scale,
                )?;
                best.distillation = with_distill_param(cfg.distillation, x);
                let res = CvResource::build(&best, Some(&base))?;
                let (g1, _) = optimize_parameter(
                    |g| res.average(g, false).map(|r| r.f_bar()),
                    GAIN_BOUNDS.0,
                    GAIN_BOUNDS.1,
                )?;
                best.g = g1;
            }
        }
        _ => {
            if let Some((lo, hi, scale)) = distill_bounds(cfg.distillation) {
                let base = lossy_tmsv(&cfg.tmsv)?;
                let (x, _) = optimize_parameter_on(
                    |x| {
                        let c = ProtocolConfig {
                            distillation: with_distill_param(cfg.distillation, x),
                            ..*cfg
                        };
                        HbsmProbeMap::from_resource(&c, &base)?
                            .average(false)
                            .map(|r| r.f_bar_with(conv))
                    },
                    lo,
                    hi,
                    scale,
                )?;
                best.distillation = with_distill_param(cfg.distillation, x);
            }
        }
    }
    Ok(OptimizedResult {
        config: best,
        result: average_fidelity(&best)?,
    })
}

/// Measure-and-prepare limit `(3+η)/6`.
pub fn classical_limit(eta: f64) -> f64 {
    (3.0 + eta) / 6.0
}

/// Classical limit by Bloch quadrature of `cos²(θ/2)P_0 + sin²(θ/2)P_1`, with
/// `P_0`, `P_1` read off the qubit after the detector-efficiency channel.
pub fn classical_limit_bruteforce(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("detector efficiency must be in [0, 1], got {eta}"));
    }
    let kraus = detector_loss_map(eta, 2)?;
    let quad = BlochQuadrature::standard();
    let mut acc = 0.0;
    for n in quad.nodes() {
        let q = QubitSpec::new(n.theta, n.phi)?;
        let after = apply_kraus(&q.density(), &kraus, 0)?;
        let p0 = after.elements()[(0, 0)].re;
        let p1 = after.elements()[(1, 1)].re;
        let c2 = (n.theta / 2.0).cos().powi(2);
        acc += n.weight * (c2 * p0 + (1.0 - c2) * p1);
    }
    Ok(acc)
}
