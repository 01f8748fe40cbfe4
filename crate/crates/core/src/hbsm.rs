//! Hybrid Bell-state measurements on the input qubit (mode 0) and the
//! coupled resource mode (mode 1).

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fock::{
    apply_kraus, project, CMatrix, Conditional, DensityOperator, KetVector, ModeSpace, OperatorMatrix,
};
use crate::resource::loss_kraus;

/// The four Bell states on (in, 1′).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    /// Bell ket on two modes of the given dimensions, using levels 0 and 1.
    pub fn ket(self, dim_a: usize, dim_b: usize) -> Result<KetVector> {
        if dim_a < 2 || dim_b < 2 {
            return invalid("Bell states need at least two levels per mode");
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (first, second, sign) = match self {
            BellState::PhiPlus => ([0, 0], [1, 1], 1.0),
            BellState::PhiMinus => ([0, 0], [1, 1], -1.0),
            BellState::PsiPlus => ([0, 1], [1, 0], 1.0),
            BellState::PsiMinus => ([0, 1], [1, 0], -1.0),
        };
        KetVector::from_terms(
            ModeSpace::new(vec![dim_a, dim_b])?,
            &[
                (first.to_vec(), Complex64::new(s, 0.0)),
                (second.to_vec(), Complex64::new(sign * s, 0.0)),
            ],
        )
    }

    pub fn correction(self) -> Correction {
        match self {
            BellState::PhiPlus => Correction::I,
            BellState::PhiMinus => Correction::Z,
            BellState::PsiPlus => Correction::X,
            BellState::PsiMinus => Correction::ZX,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Correction applied to the output mode after a Bell outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correction {
    I,
    Z,
    X,
    ZX,
}

impl Correction {
    /// Matrix on a `dim`-level mode; it acts on span{|0⟩, |1⟩} and
    /// annihilates higher levels.
    pub fn matrix(self, dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim, dim);
        let one = Complex64::new(1.0, 0.0);
        match self {
            Correction::I => {
                m[(0, 0)] = one;
                m[(1, 1)] = one;
            }
            Correction::Z => {
                m[(0, 0)] = one;
                m[(1, 1)] = -one;
            }
            Correction::X => {
                m[(0, 1)] = one;
                m[(1, 0)] = one;
            }
            Correction::ZX => {
                m[(0, 1)] = one;
                m[(1, 0)] = -one;
            }
        }
        m
    }

    pub fn operator(self, dim: usize) -> Result<OperatorMatrix> {
        OperatorMatrix::single_mode(dim, dim, self.matrix(dim))
    }
}

/// Result of a Bell measurement: one conditional per detected outcome.
#[derive(Clone, Debug)]
pub struct BsmOutcomes {
    outcomes: Vec<(BellState, Conditional)>,
}

impl BsmOutcomes {
    pub fn outcomes(&self) -> &[(BellState, Conditional)] {
        &self.outcomes
    }

    pub fn get(&self, bell: BellState) -> Option<&Conditional> {
        self.outcomes.iter().find(|(b, _)| *b == bell).map(|(_, c)| c)
    }

    pub fn prob(&self, bell: BellState) -> f64 {
        self.get(bell).map_or(0.0, Conditional::prob)
    }

    /// Sum of the detected outcome probabilities.
    pub fn p_bsm(&self) -> f64 {
        self.outcomes.iter().map(|(_, c)| c.prob()).sum()
    }
}

fn check_joint(joint: &DensityOperator) -> Result<()> {
    if joint.space().num_modes() < 3 {
        return invalid("Bell measurement needs the two measured modes plus at least one more");
    }
    Ok(())
}

fn measure(joint: &DensityOperator, states: &[BellState]) -> Result<BsmOutcomes> {
    check_joint(joint)?;
    let dims = joint.space().dims();
    let mut outcomes = Vec::with_capacity(states.len());
    for &b in states {
        let bra = b.ket(dims[0], dims[1])?;
        outcomes.push((b, project(joint, &bra, &[0, 1])?));
    }
    Ok(BsmOutcomes { outcomes })
}

/// Two-outcome analyzer: only Ψ± are resolved.
pub fn two_state_hbsm(joint: &DensityOperator) -> Result<BsmOutcomes> {
    measure(joint, &[BellState::PsiPlus, BellState::PsiMinus])
}

/// Idealized complete Bell measurement; mode 1 must already have two levels.
pub fn four_state_projection(joint: &DensityOperator) -> Result<BsmOutcomes> {
    check_joint(joint)?;
    let dims = joint.space().dims();
    if dims[0] != 2 || dims[1] != 2 {
        return invalid(format!(
            "four-state projection needs two-level measured modes, got {}x{}",
            dims[0], dims[1]
        ));
    }
    measure(joint, &BellState::ALL)
}

/// Kraus family of a detector with efficiency `eta` modeled as a preceding
/// beam-splitter of transmissivity `eta`.
pub fn detector_loss_map(eta: f64, dim: usize) -> Result<Vec<OperatorMatrix>> {
    loss_kraus(eta, dim)
}

/// Two-outcome analyzer with detectors of efficiency `eta`: efficiency loss
/// on both measured modes followed by the ideal analyzer.
pub fn two_state_hbsm_inefficient(joint: &DensityOperator, eta: f64) -> Result<BsmOutcomes> {
    if !(eta > 0.0 && eta <= 1.0) {
        return invalid(format!("detector efficiency must be in (0, 1], got {eta}"));
    }
    check_joint(joint)?;
    let dims = joint.space().dims().to_vec();
    let lossy = apply_kraus(joint, &detector_loss_map(eta, dims[0])?, 0)?;
    let lossy = apply_kraus(&lossy, &detector_loss_map(eta, dims[1])?, 1)?;
    two_state_hbsm(&lossy)
}

/// Photon-count distribution behind a 50:50 beam-splitter on modes (0, 1) of
/// a two-mode state, by expanding each outcome ket in the input Fock basis.
///
/// Returns `((n1, n2), prob)` for every pair with `n1 + n2` below the
/// combined photon capacity.
pub fn beam_splitter_count_distribution(rho: &DensityOperator) -> Result<Vec<((usize, usize), f64)>> {
    let dims = rho.space().dims();
    if dims.len() != 2 {
        return invalid("count distribution needs a two-mode state");
    }
    let (d0, d1) = (dims[0], dims[1]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let fact = |n: usize| (1..=n).fold(1.0, |a, k| a * k as f64);
    let mut out = Vec::new();
    for total in 0..=(d0 + d1 - 2) {
        for n1 in 0..=total {
            let n2 = total - n1;
            // (s a† + s b†)^{n1} (−s a† + s b†)^{n2} |0⟩ / √(n1! n2!)
            let mut poly = vec![vec![0.0; total + 1]; total + 1];
            poly[0][0] = 1.0;
            let mut deg = 0;
            for (ca, cb, times) in [(s, s, n1), (-s, s, n2)] {
                for _ in 0..times {
                    let mut next = vec![vec![0.0; total + 1]; total + 1];
                    for i in 0..=deg {
                        for j in 0..=(deg - i) {
                            let v = poly[i][j];
                            if v != 0.0 {
                                next[i + 1][j] += ca * v;
                                next[i][j + 1] += cb * v;
                            }
                        }
                    }
                    poly = next;
                    deg += 1;
                }
            }
            let norm = (fact(n1) * fact(n2)).sqrt();
            let mut amps = Vec::new();
            for i in 0..=total {
                let j = total - i;
                let v = poly[i][j];
                if v != 0.0 && i < d0 && j < d1 {
                    amps.push((i * d1 + j, v * (fact(i) * fact(j)).sqrt() / norm));
                }
            }
            let m = rho.elements();
            let mut p = Complex64::new(0.0, 0.0);
            for &(r, ar) in &amps {
                for &(c, ac) in &amps {
                    p += ar * ac * m[(r, c)];
                }
            }
            out.push(((n1, n2), p.re));
        }
    }
    Ok(out)
}

/// Default largest array order accepted by [`ArraySpec::new`].
pub const DEFAULT_MAX_ARRAY_ORDER: usize = 3;

/// Beam-splitter array of order `N` with `2^N` modes and its ancilla state.
#[derive(Clone, Debug)]
pub struct ArraySpec {
    n: usize,
    matrix: DMatrix<f64>,
    ancilla: KetVector,
}

impl ArraySpec {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_max_order(n, DEFAULT_MAX_ARRAY_ORDER)
    }

    pub fn with_max_order(n: usize, max_order: usize) -> Result<Self> {
        if n < 2 {
            return invalid(format!("array order must be >= 2, got {n}"));
        }
        if n > max_order {
            return invalid(format!("array order {n} exceeds the limit {max_order}"));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let s1 = DMatrix::from_row_slice(2, 2, &[s, s, -s, s]);
        let mut matrix = s1.clone();
        for _ in 1..n {
            matrix = s1.kronecker(&matrix);
        }
        let n_anc = (1usize << n) - 2;
        let space = ModeSpace::new(vec![2; n_anc])?;
        let mut amps = crate::fock::CVector::zeros(1usize << n_anc);
        for pattern in 0..(1usize << (n - 1)) {
            // pattern bit j−1 set: block ξ^(j) fully occupied
            let mut levels = vec![0usize; n_anc];
            let mut offset = 0;
            for j in 1..n {
                let len = 1usize << j;
                if pattern >> (j - 1) & 1 == 1 {
                    levels[offset..offset + len].fill(1);
                }
                offset += len;
            }
            let idx = space.index_of(&levels)?;
            amps[idx] = Complex64::new(2f64.powf(-((n - 1) as f64) / 2.0), 0.0);
        }
        let ancilla = KetVector::new(space, amps)?;
        Ok(Self { n, matrix, ancilla })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn num_modes(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn ancilla(&self) -> &KetVector {
        &self.ancilla
    }

    /// `‖S Sᵀ − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let m = self.num_modes();
        (&self.matrix * self.matrix.transpose() - DMatrix::<f64>::identity(m, m)).amax()
    }

    /// Unnormalized projected ket `|ζ⟩` on modes (1, 2) for a detector
    /// pattern, as amplitudes over |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn projected_ket(&self, counts: &[usize]) -> Result<[f64; 4]> {
        let m = self.num_modes();
        if counts.len() != m {
            return invalid(format!("expected {m} detector counts, got {}", counts.len()));
        }
        // Multilinear expansion: only occupations ≤ 1 can overlap the
        // two-level inputs and the ancilla, so higher powers are dropped.
        let mut poly = vec![0.0; 1 << m];
        poly[0] = 1.0;
        for (i, &ni) in counts.iter().enumerate() {
            for _ in 0..ni {
                let mut next = vec![0.0; 1 << m];
                for (mask, &v) in poly.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        if mask >> j & 1 == 0 {
                            next[mask | 1 << j] += v * self.matrix[(i, j)];
                        }
                    }
                }
                poly = next;
            }
            let f: f64 = (1..=ni).map(|k| k as f64).product();
            let scale = f.sqrt().recip();
            poly.iter_mut().for_each(|v| *v *= scale);
        }
        let anc = self.ancilla.amplitudes();
        let n_anc = m - 2;
        let mut zeta = [0.0; 4];
        for (mask, &v) in poly.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let x1 = mask & 1;
            let x2 = mask >> 1 & 1;
            // ancilla index: mode 3 is the slowest digit
            let mut idx = 0;
            for k in 0..n_anc {
                idx = idx * 2 + (mask >> (k + 2) & 1);
            }
            let a = anc[idx].re;
            if a != 0.0 {
                zeta[x1 * 2 + x2] += a * v;
            }
        }
        Ok(zeta)
    }
}

/// Group probabilities of the array analyzer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ArrayReport {
    pub p00: f64,
    pub p11: f64,
    pub p_phi_plus: f64,
    pub p_phi_minus: f64,
    pub p_psi_plus: f64,
    pub p_psi_minus: f64,
    /// Detector patterns with nonzero projected ket.
    pub num_patterns: usize,
    /// Largest weight of a projected ket outside its assigned Bell state.
    pub max_leak: f64,
}

impl ArrayReport {
    pub fn p_bsm(&self) -> f64 {
        self.p_phi_plus + self.p_phi_minus + self.p_psi_plus + self.p_psi_minus
    }

    pub fn total(&self) -> f64 {
        self.p00 + self.p11 + self.p_bsm()
    }

    pub fn max_abs_diff(&self, other: &ArrayReport) -> f64 {
        [
            self.p00 - other.p00,
            self.p11 - other.p11,
            self.p_phi_plus - other.p_phi_plus,
            self.p_phi_minus - other.p_phi_minus,
            self.p_psi_plus - other.p_psi_plus,
            self.p_psi_minus - other.p_psi_minus,
        ]
        .iter()
        .fold(0.0, |a, d| a.max(d.abs()))
    }
}

fn two_qubit_check(rho12: &DensityOperator) -> Result<()> {
    if rho12.space().dims() != [2, 2] {
        return invalid(format!(
            "array analyzer needs two two-level modes, got {:?}",
            rho12.space().dims()
        ));
    }
    Ok(())
}

fn expectation(rho12: &DensityOperator, v: &[f64; 4]) -> f64 {
    let m = rho12.elements();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..4 {
        for c in 0..4 {
            acc += v[r] * v[c] * m[(r, c)];
        }
    }
    acc.re
}

fn compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(rem: usize, idx: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == cur.len() {
            cur[idx] = rem;
            out.push(cur.clone());
            return;
        }
        for k in (0..=rem).rev() {
            cur[idx] = k;
            rec(rem - k, idx + 1, cur, out);
        }
    }
    let mut cur = vec![0; parts];
    rec(total, 0, &mut cur, out);
}

/// Enumerates every detector pattern of the array and classifies its
/// projected state.
pub fn array_analyzer(spec: &ArraySpec, rho12: &DensityOperator) -> Result<ArrayReport> {
    two_qubit_check(rho12)?;
    let m = spec.num_modes();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi_p = [s, 0.0, 0.0, s];
    let phi_m = [s, 0.0, 0.0, -s];
    let psi_p = [0.0, s, s, 0.0];
    let psi_m = [0.0, s, -s, 0.0];
    let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut report = ArrayReport::default();
    for n_sum in 0..=m {
        let mut patterns = Vec::new();
        compositions(n_sum, m, &mut patterns);
        for counts in patterns {
            let zeta = spec.projected_ket(&counts)?;
            let norm2: f64 = zeta.iter().map(|v| v * v).sum();
            if norm2 < 1e-24 {
                continue;
            }
            report.num_patterns += 1;
            let p = expectation(rho12, &zeta);
            if n_sum == 0 || n_sum == m {
                let target = if n_sum == 0 { 0 } else { 3 };
                report.max_leak = report.max_leak.max(1.0 - zeta[target].powi(2) / norm2);
                if n_sum == 0 {
                    report.p00 += p;
                } else {
                    report.p11 += p;
                }
                continue;
            }
            let (plus, minus) = if n_sum % 2 == 0 {
                (&phi_p, &phi_m)
            } else {
                (&psi_p, &psi_m)
            };
            let op = dot(&zeta, plus);
            let om = dot(&zeta, minus);
            let is_plus = op * op >= om * om;
            let kept = if is_plus { op * op } else { om * om };
            report.max_leak = report.max_leak.max(1.0 - kept / norm2);
            match (n_sum % 2 == 0, is_plus) {
                (true, true) => report.p_phi_plus += p,
                (true, false) => report.p_phi_minus += p,
                (false, true) => report.p_psi_plus += p,
                (false, false) => report.p_psi_minus += p,
            }
        }
    }
    Ok(report)
}

/// Closed-form group probabilities of the order-`n` array analyzer.
pub fn array_closed_form(n: usize, rho12: &DensityOperator) -> Result<ArrayReport> {
    two_qubit_check(rho12)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let w = 2f64.powi(n as i32 - 1);
    let p = |v: [f64; 4]| expectation(rho12, &v);
    Ok(ArrayReport {
        p00: p([1.0, 0.0, 0.0, 0.0]) / w,
        p11: p([0.0, 0.0, 0.0, 1.0]) / w,
        p_phi_plus: (1.0 - 1.0 / w) * p([s, 0.0, 0.0, s]),
        p_phi_minus: (1.0 - 1.0 / w) * p([s, 0.0, 0.0, -s]),
        p_psi_plus: p([0.0, s, s, 0.0]),
        p_psi_minus: p([0.0, s, -s, 0.0]),
        num_patterns: 0,
        max_leak: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{tensor_product, MaxAbs};
    use crate::resource::tmsv_ket;

    fn cz(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn qubit(theta: f64, phi: f64) -> DensityOperator {
        KetVector::from_terms(
            ModeSpace::single(2).unwrap(),
            &[
                (vec![0], cz((theta / 2.0).cos())),
                (vec![1], Complex64::from_polar((theta / 2.0).sin(), phi)),
            ],
        )
        .unwrap()
        .to_density()
    }

    fn with_spectator(rho: &DensityOperator) -> DensityOperator {
        tensor_product(
            rho,
            &DensityOperator::basis(ModeSpace::single(1).unwrap(), &[0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bell_kets_are_orthonormal() {
        for a in BellState::ALL {
            for b in BellState::ALL {
                let ka = a.ket(3, 4).unwrap();
                let kb = b.ket(3, 4).unwrap();
                let ov = ka.amplitudes().dotc(kb.amplitudes());
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ov - cz(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_minus_is_detected_with_certainty() {
        let joint = with_spectator(&BellState::PsiMinus.ket(2, 2).unwrap().to_density());
        let out = two_state_hbsm(&joint).unwrap();
        assert!((out.prob(BellState::PsiMinus) - 1.0).abs() < 1e-15);
        assert!(out.prob(BellState::PsiPlus).abs() < 1e-15);
        assert!(out.get(BellState::PsiPlus).unwrap().is_null());
        assert!(out.get(BellState::PhiPlus).is_none());
    }

    #[test]
    fn qubit_with_vacuum_resource() {
        let vac = DensityOperator::basis(ModeSpace::new(vec![3, 3]).unwrap(), &[0, 0]).unwrap();
        for &theta in &[0.3, 1.2, 2.9] {
            let joint = tensor_product(&qubit(theta, 0.4), &vac).unwrap();
            let out = two_state_hbsm(&joint).unwrap();
            let e = (theta / 2.0f64).sin().powi(2) / 2.0;
            assert!((out.prob(BellState::PsiPlus) - e).abs() < 1e-14);
            assert!((out.prob(BellState::PsiMinus) - e).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_formula_matches_detector_enumeration() {
        let lambda: f64 = 0.6;
        let d = 6;
        let tm = tmsv_ket(lambda, d).unwrap().to_density().normalized().unwrap();
        let joint = tensor_product(&qubit(1.1, 2.0), &tm).unwrap();
        let out = two_state_hbsm(&joint).unwrap();
        let marg = crate::fock::partial_trace(&joint, &[0, 1]).unwrap();
        let dist = beam_splitter_count_distribution(&marg).unwrap();
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let single: f64 = dist.iter().filter(|((a, b), _)| a + b == 1).map(|(_, p)| p).sum();
        assert!((single - out.p_bsm()).abs() < 1e-10);
        let p10 = dist.iter().find(|(k, _)| *k == (1, 0)).unwrap().1;
        assert!((p10 - out.prob(BellState::PsiPlus)).abs() < 1e-10);
    }

    #[test]
    fn four_state_examples() {
        let joint = with_spectator(&BellState::PhiPlus.ket(2, 2).unwrap().to_density());
        let out = four_state_projection(&joint).unwrap();
        assert!((out.prob(BellState::PhiPlus) - 1.0).abs() < 1e-15);

        let (a, b) = (0.6, 0.8);
        let q = KetVector::from_terms(
            ModeSpace::single(2).unwrap(),
            &[(vec![0], cz(a)), (vec![1], cz(b))],
        )
        .unwrap()
        .to_density();
        let res = DensityOperator::basis(ModeSpace::new(vec![2, 2]).unwrap(), &[0, 0]).unwrap();
        let out = four_state_projection(&tensor_product(&q, &res).unwrap()).unwrap();
        assert!((out.prob(BellState::PhiPlus) - a * a / 2.0).abs() < 1e-15);
        assert!((out.prob(BellState::PhiMinus) - a * a / 2.0).abs() < 1e-15);
        assert!((out.prob(BellState::PsiPlus) - b * b / 2.0).abs() < 1e-15);
        assert!((out.p_bsm() - 1.0).abs() < 1e-12);

        // truncated pure TMSV: Φ+ leaves α|0⟩ + λβ|1⟩ on 2′
        let lambda = 0.4;
        let tm = tmsv_ket(lambda, 2).unwrap().to_density().normalized().unwrap();
        let out = four_state_projection(&tensor_product(&q, &tm).unwrap()).unwrap();
        let st = out.get(BellState::PhiPlus).unwrap().state().unwrap();
        let n = a * a + lambda * lambda * b * b;
        assert!((st.element(&[0], &[0]).unwrap().re - a * a / n).abs() < 1e-12);
        assert!((st.element(&[0], &[1]).unwrap().re - a * lambda * b / n).abs() < 1e-12);

        let bad =
            with_spectator(&DensityOperator::basis(ModeSpace::new(vec![2, 3]).unwrap(), &[0, 0]).unwrap());
        assert!(four_state_projection(&bad).is_err());
    }

    #[test]
    fn correction_recovers_input_with_bell_resource() {
        let (a, b) = (Complex64::new(0.6, 0.0), Complex64::from_polar(0.8, 0.7));
        let q = KetVector::from_terms(ModeSpace::single(2).unwrap(), &[(vec![0], a), (vec![1], b)]).unwrap();
        let res = BellState::PhiPlus.ket(2, 2).unwrap().to_density();
        let out = four_state_projection(&tensor_product(&q.to_density(), &res).unwrap()).unwrap();
        for (bell, cond) in out.outcomes() {
            assert!((cond.prob() - 0.25).abs() < 1e-12);
            let s = cond.state().unwrap();
            let c = bell.correction().matrix(2);
            let fixed = &c * s.elements() * c.adjoint();
            let v = q.amplitudes();
            let f = (v.adjoint() * &fixed * v)[(0, 0)].re;
            assert!((f - 1.0).abs() < 1e-12, "{bell}");
        }
    }

    #[test]
    fn detector_loss_examples() {
        let ops = detector_loss_map(1.0, 3).unwrap();
        assert_eq!(ops.len(), 1);
        assert!((ops[0].elements() - CMatrix::identity(3, 3)).max_abs() < 1e-15);
        let one = DensityOperator::basis(ModeSpace::single(2).unwrap(), &[1]).unwrap();
        let out = apply_kraus(&one, &detector_loss_map(0.0, 2).unwrap(), 0).unwrap();
        assert!((out.element(&[0], &[0]).unwrap().re - 1.0).abs() < 1e-15);
        let out = apply_kraus(&one, &detector_loss_map(0.5, 2).unwrap(), 0).unwrap();
        assert!((out.element(&[1], &[1]).unwrap().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inefficient_two_state_examples() {
        let tm = tmsv_ket(0.5, 4).unwrap().to_density().normalized().unwrap();
        let joint = tensor_product(&qubit(1.0, 0.3), &tm).unwrap();
        let ideal = two_state_hbsm(&joint).unwrap();
        let eff1 = two_state_hbsm_inefficient(&joint, 1.0).unwrap();
        for ((b1, c1), (b2, c2)) in ideal.outcomes().iter().zip(eff1.outcomes()) {
            assert_eq!(b1, b2);
            assert!((c1.prob() - c2.prob()).abs() < 1e-12);
            assert!((c1.unnormalized().elements() - c2.unnormalized().elements()).max_abs() < 1e-12);
        }

        let vac = DensityOperator::basis(ModeSpace::new(vec![3, 3]).unwrap(), &[0, 0]).unwrap();
        let single = tensor_product(&qubit(std::f64::consts::PI, 0.0), &vac).unwrap();
        for &eta in &[1.0, 0.7, 0.2] {
            let p = two_state_hbsm_inefficient(&single, eta).unwrap().p_bsm();
            assert!((p - eta).abs() < 1e-12);
        }

        let mut last = f64::INFINITY;
        for &eta in &[1.0, 0.8, 0.6, 0.4, 0.2] {
            let p = two_state_hbsm_inefficient(&joint, eta).unwrap().p_bsm();
            assert!(p <= last + 1e-15);
            last = p;
        }
        assert!(two_state_hbsm_inefficient(&joint, 0.0).is_err());
    }

    #[test]
    fn array_matrix_and_ancilla() {
        for n in 2..=3 {
            let spec = ArraySpec::new(n).unwrap();
            assert!(spec.orthogonality_error() <= 1e-12);
            assert_eq!(spec.ancilla().space().num_modes(), (1 << n) - 2);
            assert!((spec.ancilla().norm_sqr() - 1.0).abs() < 1e-14);
        }
        assert!(ArraySpec::new(4).is_err());
        assert!(ArraySpec::with_max_order(4, 4).is_ok());
        assert!(ArraySpec::new(1).is_err());
    }

    #[test]
    fn array_examples() {
        let spec = ArraySpec::new(2).unwrap();
        let vac = DensityOperator::basis(ModeSpace::new(vec![2, 2]).unwrap(), &[0, 0]).unwrap();
        let rep = array_analyzer(&spec, &vac).unwrap();
        assert!((rep.p_bsm() - 0.5).abs() < 1e-12);
        // P_id = 0 for Ψ±, but P_id = 1 for Φ± (they live on |00⟩, |11⟩)
        for b in BellState::ALL {
            let st = b.ket(2, 2).unwrap().to_density();
            for n in 2..=3 {
                let rep = array_analyzer(&ArraySpec::new(n).unwrap(), &st).unwrap();
                let expect = match b {
                    BellState::PsiPlus | BellState::PsiMinus => 1.0,
                    _ => 1.0 - 2f64.powi(1 - n as i32),
                };
                assert!((rep.p_bsm() - expect).abs() < 1e-12, "{b} N={n}");
                assert!(rep.max_leak < 1e-12);
            }
        }
        let gap = |n| 1.0 - array_analyzer(&ArraySpec::new(n).unwrap(), &vac).unwrap().p_bsm();
        assert!((gap(3) - gap(2) / 2.0).abs() < 1e-12);
    }
}
