//! Dense linear algebra over tensor products of truncated Fock modes.
//!
//! Composite indices are row-major over the mode list: mode 0 is the slowest
//! digit and the last mode the fastest, so `|n0 n1⟩` lives at
//! `n0 * dims[1] + n1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest entry modulus of a complex matrix or vector.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>> MaxAbs
    for nalgebra::Matrix<Complex64, R, C, S>
{
    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Default cap on the total dimension of any composite space.
pub const DEFAULT_DIM_CAP: usize = 4096;
/// Probabilities below this are treated as null outcomes.
pub const NULL_PROB: f64 = 1e-14;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ordered list of per-mode truncation dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeSpace {
    dims: Vec<usize>,
}

impl ModeSpace {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.contains(&0) {
            return invalid(format!("mode dimensions must be >= 1, got {dims:?}"));
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &ModeSpace) -> ModeSpace {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        ModeSpace { dims }
    }

    /// Same space with one mode's dimension replaced.
    pub fn with_dim(&self, mode: usize, dim: usize) -> ModeSpace {
        let mut dims = self.dims.clone();
        dims[mode] = dim;
        ModeSpace { dims }
    }

    /// Sub-space formed by `modes`, in the given order.
    pub fn select(&self, modes: &[usize]) -> ModeSpace {
        ModeSpace {
            dims: modes.iter().map(|&m| self.dims[m]).collect(),
        }
    }

    /// Modes not in `modes`, ascending.
    pub fn complement(&self, modes: &[usize]) -> Vec<usize> {
        (0..self.num_modes()).filter(|m| !modes.contains(m)).collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Flat index of a basis state given one Fock level per mode.
    pub fn index_of(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return invalid(format!(
                "expected {} levels, got {}",
                self.dims.len(),
                levels.len()
            ));
        }
        let strides = self.strides();
        let mut idx = 0;
        for (k, (&l, &d)) in levels.iter().zip(&self.dims).enumerate() {
            if l >= d {
                return invalid(format!("level {l} out of range for mode {k} (dim {d})"));
            }
            idx += l * strides[k];
        }
        Ok(idx)
    }

    /// For every basis state of the selected modes (row-major in selection
    /// order), its offset in the full flat index.
    pub fn offsets(&self, modes: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &m in modes {
            let mut next = Vec::with_capacity(out.len() * self.dims[m]);
            for &o in &out {
                for l in 0..self.dims[m] {
                    next.push(o + l * strides[m]);
                }
            }
            out = next;
        }
        out
    }

    pub(crate) fn check_modes(&self, modes: &[usize]) -> Result<()> {
        for (i, &m) in modes.iter().enumerate() {
            if m >= self.num_modes() {
                return invalid(format!(
                    "mode index {m} out of range for {} modes",
                    self.num_modes()
                ));
            }
            if modes[..i].contains(&m) {
                return invalid(format!("duplicate mode index {m}"));
            }
        }
        Ok(())
    }
}

/// Dense density operator on a [`ModeSpace`].
///
/// `trace_mass` records the trace the operator had when it was first built,
/// before any renormalization (for example the retained probability of a
/// truncated state).
#[derive(Clone, Debug)]
pub struct DensityOperator {
    space: ModeSpace,
    elements: CMatrix,
    trace_mass: f64,
}

impl DensityOperator {
    /// Validating constructor: shape, Hermiticity and `0 < tr ≤ 1`.
    pub fn new(space: ModeSpace, elements: CMatrix) -> Result<Self> {
        let n = space.total_dim();
        if elements.nrows() != n || elements.ncols() != n {
            return invalid(format!(
                "matrix is {}x{}, space needs {n}x{n}",
                elements.nrows(),
                elements.ncols()
            ));
        }
        let herm = hermiticity_error(&elements);
        if herm > HERMITIAN_TOL {
            return invalid(format!("matrix is not Hermitian (max deviation {herm:e})"));
        }
        let tr = elements.trace().re;
        if !(tr > 0.0 && tr <= 1.0 + TRACE_TOL) {
            return invalid(format!("trace {tr} outside (0, 1]"));
        }
        Ok(Self {
            space,
            elements,
            trace_mass: tr,
        })
    }

    /// Unchecked constructor for results of trace non-increasing maps.
    pub(crate) fn from_parts(space: ModeSpace, elements: CMatrix, trace_mass: f64) -> Self {
        debug_assert_eq!(elements.nrows(), space.total_dim());
        Self {
            space,
            elements,
            trace_mass,
        }
    }

    pub fn from_ket(ket: &KetVector) -> Self {
        let elements = &ket.amplitudes * ket.amplitudes.adjoint();
        let tr = ket.norm_sqr();
        Self::from_parts(ket.space.clone(), elements, tr)
    }

    /// Projector onto a single Fock basis state.
    pub fn basis(space: ModeSpace, levels: &[usize]) -> Result<Self> {
        Ok(Self::from_ket(&KetVector::basis(space, levels)?))
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn trace_mass(&self) -> f64 {
        self.trace_mass
    }

    pub fn with_trace_mass(mut self, mass: f64) -> Self {
        self.trace_mass = mass;
        self
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    /// Element `⟨row|ρ|col⟩` addressed by Fock levels.
    pub fn element(&self, row: &[usize], col: &[usize]) -> Result<Complex64> {
        let r = self.space.index_of(row)?;
        let c = self.space.index_of(col)?;
        Ok(self.elements[(r, c)])
    }

    /// Unit-trace copy; `trace_mass` is kept.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr < NULL_PROB {
            return Err(Error::NullOutcome {
                operation: "normalize",
                prob: tr,
            });
        }
        Ok(Self::from_parts(
            self.space.clone(),
            self.elements.unscale(tr),
            self.trace_mass,
        ))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(
            self.space.clone(),
            self.elements.scale(factor),
            self.trace_mass * factor,
        )
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.elements)
    }

    /// Smallest eigenvalue (eigen-decomposition, meant for checks only).
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.elements + self.elements.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        let tr = self.trace();
        (&self.elements * &self.elements).trace().re / (tr * tr)
    }

    /// Photon-number distribution of one mode (diagonal of its reduced state).
    pub fn photon_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        let reduced = partial_trace(self, &[mode])?;
        Ok((0..reduced.space.dim(0))
            .map(|n| reduced.elements[(n, n)].re)
            .collect())
    }

    pub fn mean_photon_number(&self, mode: usize) -> Result<f64> {
        let dist = self.photon_distribution(mode)?;
        let tr: f64 = dist.iter().sum();
        Ok(dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>() / tr)
    }
}

fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows() - 1) {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Pure state vector on a [`ModeSpace`]; may be sub-normalized.
#[derive(Clone, Debug)]
pub struct KetVector {
    space: ModeSpace,
    amplitudes: CVector,
}

impl KetVector {
    pub fn new(space: ModeSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return invalid(format!(
                "ket has {} amplitudes, space needs {}",
                amplitudes.len(),
                space.total_dim()
            ));
        }
        let n2 = amplitudes.norm_squared();
        if !(n2 > 0.0 && n2 <= 1.0 + TRACE_TOL) {
            return invalid(format!("ket norm^2 {n2} outside (0, 1]"));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn basis(space: ModeSpace, levels: &[usize]) -> Result<Self> {
        Self::from_terms(space, &[(levels.to_vec(), ONE)])
    }

    /// Superposition `Σ c |levels⟩`.
    pub fn from_terms(space: ModeSpace, terms: &[(Vec<usize>, Complex64)]) -> Result<Self> {
        let mut amps = CVector::zeros(space.total_dim());
        for (levels, c) in terms {
            amps[space.index_of(levels)?] += *c;
        }
        Self::new(space, amps)
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn amplitude(&self, levels: &[usize]) -> Result<Complex64> {
        Ok(self.amplitudes[self.space.index_of(levels)?])
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_ket(self)
    }
}

/// Linear map between mode spaces (possibly rectangular).
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    in_space: ModeSpace,
    out_space: ModeSpace,
    elements: CMatrix,
}

impl OperatorMatrix {
    pub fn new(in_space: ModeSpace, out_space: ModeSpace, elements: CMatrix) -> Result<Self> {
        if elements.nrows() != out_space.total_dim() || elements.ncols() != in_space.total_dim() {
            return invalid(format!(
                "operator is {}x{}, spaces need {}x{}",
                elements.nrows(),
                elements.ncols(),
                out_space.total_dim(),
                in_space.total_dim()
            ));
        }
        Ok(Self {
            in_space,
            out_space,
            elements,
        })
    }

    /// Single-mode operator from `dim_in` to `dim_out` levels.
    pub fn single_mode(dim_in: usize, dim_out: usize, elements: CMatrix) -> Result<Self> {
        Self::new(ModeSpace::single(dim_in)?, ModeSpace::single(dim_out)?, elements)
    }

    pub fn from_fn(dim_in: usize, dim_out: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::single_mode(dim_in, dim_out, CMatrix::from_fn(dim_out, dim_in, f))
    }

    /// Diagonal single-mode operator.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(entries[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::single_mode(dim, dim, CMatrix::identity(dim, dim))
    }

    pub fn annihilation(dim: usize) -> Result<Self> {
        Self::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                Complex64::new((j as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn creation(dim: usize) -> Result<Self> {
        Ok(Self::annihilation(dim)?.adjoint())
    }

    pub fn in_space(&self) -> &ModeSpace {
        &self.in_space
    }

    pub fn out_space(&self) -> &ModeSpace {
        &self.out_space
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn adjoint(&self) -> Self {
        Self {
            in_space: self.out_space.clone(),
            out_space: self.in_space.clone(),
            elements: self.elements.adjoint(),
        }
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &OperatorMatrix) -> Result<Self> {
        if other.out_space != self.in_space {
            return invalid("operator spaces do not chain");
        }
        Self::new(
            other.in_space.clone(),
            self.out_space.clone(),
            &self.elements * &other.elements,
        )
    }

    pub fn apply(&self, ket: &KetVector) -> Result<CVector> {
        if ket.space != self.in_space {
            return invalid("ket space does not match operator input space");
        }
        Ok(&self.elements * &ket.amplitudes)
    }

    /// `max |U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.elements.adjoint() * &self.elements;
        let n = prod.nrows();
        (&prod - CMatrix::identity(n, n)).max_abs()
    }
}

/// `a ⊗ b` under the default capacity cap.
pub fn tensor_product(a: &DensityOperator, b: &DensityOperator) -> Result<DensityOperator> {
    tensor_product_capped(a, b, DEFAULT_DIM_CAP)
}

pub fn tensor_product_capped(
    a: &DensityOperator,
    b: &DensityOperator,
    cap: usize,
) -> Result<DensityOperator> {
    let requested = a.space.total_dim() * b.space.total_dim();
    if requested > cap {
        return Err(Error::Capacity { requested, cap });
    }
    Ok(DensityOperator::from_parts(
        a.space.concat(&b.space),
        a.elements.kronecker(&b.elements),
        a.trace_mass * b.trace_mass,
    ))
}

/// Reduced state on `keep` (result modes in the order given).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return invalid("partial_trace needs at least one kept mode");
    }
    rho.space.check_modes(keep)?;
    let traced = rho.space.complement(keep);
    let keep_off = rho.space.offsets(keep);
    let tr_off = rho.space.offsets(&traced);
    let n = keep_off.len();
    let m = &rho.elements;
    let reduced = CMatrix::from_fn(n, n, |i, j| {
        tr_off
            .iter()
            .map(|&t| m[(keep_off[i] + t, keep_off[j] + t)])
            .sum()
    });
    Ok(DensityOperator::from_parts(
        rho.space.select(keep),
        reduced,
        rho.trace_mass,
    ))
}

struct EmbeddedOp {
    pre: usize,
    post: usize,
    dim_in: usize,
    dim_out: usize,
    nonzeros: Vec<(usize, usize, Complex64)>,
}

impl EmbeddedOp {
    fn new(space: &ModeSpace, op: &CMatrix, mode: usize) -> Self {
        let pre = space.dims()[..mode].iter().product();
        let post = space.dims()[mode + 1..].iter().product();
        let mut nonzeros = Vec::new();
        for j in 0..op.ncols() {
            for i in 0..op.nrows() {
                let k = op[(i, j)];
                if k != ZERO {
                    nonzeros.push((i, j, k));
                }
            }
        }
        Self {
            pre,
            post,
            dim_in: op.ncols(),
            dim_out: op.nrows(),
            nonzeros,
        }
    }

    fn index_pairs(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let (post, din, dout) = (self.post, self.dim_in, self.dim_out);
        (0..self.pre).flat_map(move |p| {
            self.nonzeros.iter().flat_map(move |&(mo, mi, k)| {
                (0..post).map(move |q| ((p * dout + mo) * post + q, (p * din + mi) * post + q, k))
            })
        })
    }

    /// `K_e · ρ · K_e†` for the embedded operator `K_e`.
    fn sandwich(&self, rho: &CMatrix) -> CMatrix {
        let n_in = rho.nrows();
        let n_out = self.pre * self.dim_out * self.post;
        // ρ K_e†: column j_out accumulates conj(k) ρ[:, j_in].
        let mut right = CMatrix::zeros(n_in, n_out);
        for (o, i, k) in self.index_pairs() {
            right.column_mut(o).axpy(k.conj(), &rho.column(i), ONE);
        }
        // K_e (ρ K_e†) computed through the transpose to stay column-major.
        let right_t = right.transpose();
        let mut out_t = CMatrix::zeros(n_out, n_out);
        for (o, i, k) in self.index_pairs() {
            out_t.column_mut(o).axpy(k, &right_t.column(i), ONE);
        }
        out_t.transpose()
    }
}

/// `Σ_l K_l ρ K_l†` with every `K_l` acting on `mode`.
///
/// All operators must share input and output dimension; the output dimension
/// becomes the mode's new truncation.
pub fn apply_kraus(rho: &DensityOperator, kraus: &[OperatorMatrix], mode: usize) -> Result<DensityOperator> {
    if kraus.is_empty() {
        return invalid("empty Kraus list");
    }
    rho.space.check_modes(&[mode])?;
    let dim_in = rho.space.dim(mode);
    let dim_out = kraus[0].out_space.total_dim();
    for k in kraus {
        if k.in_space.num_modes() != 1 || k.out_space.num_modes() != 1 {
            return invalid("Kraus operators must be single-mode");
        }
        if k.in_space.dim(0) != dim_in || k.out_space.dim(0) != dim_out {
            return invalid(format!(
                "Kraus operator {}x{} does not act on mode {mode} of dim {dim_in}",
                k.out_space.dim(0),
                k.in_space.dim(0)
            ));
        }
    }
    let out_space = rho.space.with_dim(mode, dim_out);
    let n = out_space.total_dim();
    let mut acc = CMatrix::zeros(n, n);
    for k in kraus {
        acc += EmbeddedOp::new(&rho.space, &k.elements, mode).sandwich(&rho.elements);
    }
    let herm = (&acc + acc.adjoint()).scale(0.5);
    Ok(DensityOperator::from_parts(out_space, herm, rho.trace_mass))
}

/// `K ρ K†` for a single operator on `mode`.
pub fn apply_operator(rho: &DensityOperator, op: &OperatorMatrix, mode: usize) -> Result<DensityOperator> {
    apply_kraus(rho, std::slice::from_ref(op), mode)
}

/// Result of projecting some modes onto a ket.
#[derive(Clone, Debug)]
pub struct Conditional {
    prob: f64,
    unnormalized: DensityOperator,
}

impl Conditional {
    pub(crate) fn from_unnormalized(unnormalized: DensityOperator) -> Self {
        Self {
            prob: unnormalized.trace().max(0.0),
            unnormalized,
        }
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    pub fn is_null(&self) -> bool {
        self.prob < NULL_PROB
    }

    /// Conditional state renormalized to unit trace; `None` for a null outcome.
    pub fn state(&self) -> Option<DensityOperator> {
        if self.is_null() {
            None
        } else {
            Some(self.unnormalized.scaled(1.0 / self.prob))
        }
    }

    /// Sub-normalized conditional with trace equal to `prob`.
    pub fn unnormalized(&self) -> &DensityOperator {
        &self.unnormalized
    }
}

/// Projects `modes` of `rho` onto `bra` (given as its ket).
///
/// Returns `tr{(|b⟩⟨b| ⊗ I)ρ}` and the state left on the remaining modes.
pub fn project(rho: &DensityOperator, bra: &KetVector, modes: &[usize]) -> Result<Conditional> {
    rho.space.check_modes(modes)?;
    if bra.space != rho.space.select(modes) {
        return invalid(format!(
            "bra space {:?} does not match modes {modes:?} of {:?}",
            bra.space.dims(),
            rho.space.dims()
        ));
    }
    let rest = rho.space.complement(modes);
    if rest.is_empty() {
        return invalid("projection must leave at least one mode");
    }
    let sel_off = rho.space.offsets(modes);
    let rest_off = rho.space.offsets(&rest);
    let support: Vec<(usize, Complex64)> = bra
        .amplitudes
        .iter()
        .zip(&sel_off)
        .filter(|(a, _)| **a != ZERO)
        .map(|(a, &o)| (o, *a))
        .collect();
    let n = rest_off.len();
    let m = &rho.elements;
    let mut out = CMatrix::zeros(n, n);
    for (oa, a) in &support {
        for (ob, b) in &support {
            let w = a.conj() * b;
            for c in 0..n {
                let col = ob + rest_off[c];
                for r in 0..n {
                    out[(r, c)] += w * m[(oa + rest_off[r], col)];
                }
            }
        }
    }
    let herm = (&out + out.adjoint()).scale(0.5);
    Ok(Conditional::from_unnormalized(DensityOperator::from_parts(
        rho.space.select(&rest),
        herm,
        rho.trace_mass,
    )))
}

/// Displacement operator `exp(ξa† − ξ*a)` built in `pad` levels by matrix
/// exponential and cropped to `dim` levels.
pub fn displacement_operator(xi: Complex64, dim: usize, pad: usize) -> Result<OperatorMatrix> {
    if dim == 0 || pad < dim {
        return invalid(format!("need 1 <= dim <= pad, got dim={dim}, pad={pad}"));
    }
    if pad > DEFAULT_DIM_CAP {
        return Err(Error::Capacity {
            requested: pad,
            cap: DEFAULT_DIM_CAP,
        });
    }
    let a = OperatorMatrix::annihilation(pad)?.elements;
    let generator = a.adjoint() * xi - a * xi.conj();
    let full = generator.exp();
    OperatorMatrix::single_mode(dim, dim, full.view((0, 0), (dim, dim)).into_owned())
}

/// Exact matrix elements `⟨m|D(ξ)|n⟩` for `m, n < dim`, from the
/// associated-Laguerre closed form (no truncation error).
pub fn displacement_matrix(xi: Complex64, dim: usize) -> CMatrix {
    let x = xi.norm_sqr();
    if x == 0.0 {
        return CMatrix::identity(dim, dim);
    }
    let ln_abs = 0.5 * x.ln();
    let arg = xi.arg();
    let mut ln_fact = vec![0.0f64; dim + 1];
    for k in 1..=dim {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let mut out = CMatrix::zeros(dim, dim);
    // For each offset k = m - n ≥ 0 run the Laguerre recurrence in n.
    for k in 0..dim {
        let kf = k as f64;
        let mut l_prev = 0.0;
        let mut l_cur = 1.0;
        for n in 0..dim - k {
            if n > 0 {
                let nf = (n - 1) as f64;
                let l_next = ((2.0 * nf + 1.0 + kf - x) * l_cur - (nf + kf) * l_prev) / (nf + 1.0);
                l_prev = l_cur;
                l_cur = l_next;
            }
            let m = n + k;
            let ln_mag = 0.5 * (ln_fact[n] - ln_fact[m]) + kf * ln_abs - 0.5 * x;
            let mag = ln_mag.exp() * l_cur;
            // ⟨m|D|n⟩ = mag·e^{ikθ};  ⟨n|D|m⟩ = mag·(−1)^k e^{−ikθ}.
            let phase = Complex64::from_polar(1.0, kf * arg);
            out[(m, n)] = phase * mag;
            if k > 0 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                out[(n, m)] = phase.conj() * (sign * mag);
            }
        }
    }
    out
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(psi: &KetVector, rho: &DensityOperator) -> Result<f64> {
    if psi.space != rho.space {
        return invalid("state and density operator live on different spaces");
    }
    let v = &psi.amplitudes;
    Ok((v.adjoint() * &rho.elements * v)[(0, 0)].re)
}
