//! Dense complex Hermitian algebra used throughout the crate.
//!
//! All operators are stored as dense `DMatrix<Complex64>`; the largest joint
//! space exercised by the protocols is 16x16 and nothing here is tuned for
//! more than a few dozen dimensions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Max-abs entrywise tolerance for `H == H†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace / positivity tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;
/// Default eigenvalue floor for matrix logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermiticity_error(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// A complex square matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMatrix,
}

impl HermitianOperator {
    /// Validates squareness and hermiticity, then stores the exactly
    /// symmetrized matrix `(M + M†)/2`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::Validation(format!(
                "operator must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let err = hermiticity_error(&entries);
        if !err.is_finite() || err > HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "operator is not Hermitian (max |M - M†| = {err:.3e})"
            )));
        }
        Ok(Self::symmetrized(entries))
    }

    /// Builds from a matrix known to be Hermitian up to rounding; the
    /// anti-Hermitian part is discarded.
    pub fn symmetrized(entries: CMatrix) -> Self {
        let sym = (&entries + entries.adjoint()) * c64(0.5, 0.0);
        Self { entries: sym }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = CVector::from_iterator(diag.len(), diag.iter().map(|&x| c64(x, 0.0)));
        Self {
            entries: CMatrix::from_diagonal(&v),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
        }
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn projector(v: &CVector) -> Self {
        Self {
            entries: v * v.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Re Tr(self · other)`; the trace of a product of Hermitian matrices is real.
    pub fn inner(&self, other: &HermitianOperator) -> f64 {
        trace_product(&self.entries, &other.entries)
    }

    /// `Tr(H ρ)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        self.inner(rho.operator())
    }

    pub fn kron(&self, other: &HermitianOperator) -> Self {
        Self {
            entries: kron(&self.entries, &other.entries),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            entries: &self.entries * c64(s, 0.0),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Self {
        Self {
            entries: &self.entries + &other.entries,
        }
    }

    pub fn sub(&self, other: &HermitianOperator) -> Self {
        Self {
            entries: &self.entries - &other.entries,
        }
    }

    /// `U H U†`.
    pub fn conjugated_by(&self, u: &CMatrix) -> Self {
        Self::symmetrized(u * &self.entries * u.adjoint())
    }

    pub fn eig(&self) -> Eigen {
        eig_unchecked(&self.entries)
    }

    /// Largest absolute eigenvalue.
    pub fn op_norm(&self) -> f64 {
        let e = self.eig();
        e.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `Some(c)` when the operator equals `c·I` within `tol`.
    pub fn as_scalar_multiple_of_identity(&self, tol: f64) -> Option<f64> {
        let d = self.dim();
        let c = self.trace() / d as f64;
        let diff = &self.entries - CMatrix::identity(d, d) * c64(c, 0.0);
        (max_abs(&diff) <= tol).then_some(c)
    }
}

/// `Re Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

/// Spectral decomposition `H = V diag(values) V†`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

/// Eigendecomposition of a Hermitian matrix. Fails on non-square or
/// non-Hermitian input.
pub fn herm_eig(h: &CMatrix) -> Result<Eigen> {
    Ok(HermitianOperator::new(h.clone())?.eig())
}

fn eig_unchecked(m: &CMatrix) -> Eigen {
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Eigen { values, vectors }
}

/// Unit-trace positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    operator: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(operator: HermitianOperator) -> Result<Self> {
        let tr = operator.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!("density matrix trace is {tr}, expected 1")));
        }
        let lmin = operator.eig().min();
        if lmin < -STATE_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {lmin:.3e}"
            )));
        }
        Ok(Self { operator })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Clips negative eigenvalues and renormalizes. Used to repair iterates
    /// that left the cone by rounding.
    pub fn from_operator_clipped(op: &HermitianOperator) -> Result<Self> {
        let e = op.eig();
        let m = e.map(|x| x.max(0.0));
        let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::Validation("operator has no positive part to normalize".into()));
        }
        Ok(Self {
            operator: HermitianOperator::symmetrized(m / c64(tr, 0.0)),
        })
    }

    pub fn pure(v: &CVector) -> Result<Self> {
        let n = v.norm();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!("state vector has norm {n}")));
        }
        Ok(Self {
            operator: HermitianOperator::projector(v),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            operator: HermitianOperator::identity(dim).scaled(1.0 / dim as f64),
        }
    }

    /// Convex mixture `Σ p_i ρ_i`; weights must be a probability vector.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Validation("empty mixture".into()))?;
        let d = first.1.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (p, rho) in parts {
            if rho.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: rho.dim(),
                });
            }
            acc += rho.matrix() * c64(*p, 0.0);
        }
        Self::from_matrix(acc)
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    pub fn matrix(&self) -> &CMatrix {
        self.operator.matrix()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.operator.eig().values
    }

    /// Von Neumann entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        shannon_bits(self.eigenvalues().iter().copied())
    }

    pub fn conjugated_by(&self, u: &CMatrix) -> Self {
        Self {
            operator: self.operator.conjugated_by(u),
        }
    }
}

pub(crate) fn shannon_bits(p: impl Iterator<Item = f64>) -> f64 {
    p.filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

/// Complete set of orthogonal projectors defining the key-generating measurement.
#[derive(Debug, Clone)]
pub struct KeyMap {
    projectors: Vec<HermitianOperator>,
}

impl KeyMap {
    pub fn new(projectors: Vec<HermitianOperator>) -> Result<Self> {
        let first = projectors
            .first()
            .ok_or_else(|| Error::Validation("key map needs at least one projector".into()))?;
        let d = first.dim();
        let mut sum = CMatrix::zeros(d, d);
        for (i, p) in projectors.iter().enumerate() {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
            let m = p.matrix();
            if max_abs(&(m * m - m)) > STATE_TOL {
                return Err(Error::Validation(format!("projector {i} is not idempotent")));
            }
            for (j, q) in projectors.iter().enumerate().skip(i + 1) {
                if max_abs(&(m * q.matrix())) > STATE_TOL {
                    return Err(Error::Validation(format!("projectors {i} and {j} are not orthogonal")));
                }
            }
            sum += m;
        }
        if max_abs(&(sum - CMatrix::identity(d, d))) > STATE_TOL {
            return Err(Error::Validation("projectors do not sum to identity".into()));
        }
        Ok(Self { projectors })
    }

    /// Rank-one projectors onto an orthonormal basis given as vectors.
    pub fn from_basis(vectors: &[CVector]) -> Result<Self> {
        Self::new(vectors.iter().map(HermitianOperator::projector).collect())
    }

    pub fn computational(dim: usize) -> Self {
        let projectors = (0..dim)
            .map(|k| {
                let mut diag = vec![0.0; dim];
                diag[k] = 1.0;
                HermitianOperator::from_real_diagonal(&diag)
            })
            .collect();
        Self { projectors }
    }

    /// Lifts each projector `P` to `P ⊗ I_other` (key map acting on the first subsystem).
    pub fn extend_to_first_of(&self, other_dim: usize) -> Self {
        let id = HermitianOperator::identity(other_dim);
        Self {
            projectors: self.projectors.iter().map(|p| p.kron(&id)).collect(),
        }
    }

    pub fn projectors(&self) -> &[HermitianOperator] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn conjugated_by(&self, u: &CMatrix) -> Self {
        Self {
            projectors: self.projectors.iter().map(|p| p.conjugated_by(u)).collect(),
        }
    }

    pub(crate) fn pinch_matrix(&self, m: &CMatrix) -> CMatrix {
        let d = m.nrows();
        let mut out = CMatrix::zeros(d, d);
        for p in &self.projectors {
            let pm = p.matrix();
            out += pm * m * pm;
        }
        out
    }
}

/// Natural-log matrix logarithm with eigenvalues clipped below at `floor`.
pub fn matrix_log_clipped(rho: &DensityMatrix, floor: f64) -> HermitianOperator {
    let e = rho.operator().eig();
    HermitianOperator::symmetrized(e.map(|x| x.max(floor).ln()))
}

/// Key-map dephasing `Σ_j Z_j ρ Z_j`.
pub fn pinch(rho: &DensityMatrix, keymap: &KeyMap) -> Result<DensityMatrix> {
    if rho.dim() != keymap.dim() {
        return Err(Error::DimensionMismatch {
            expected: keymap.dim(),
            found: rho.dim(),
        });
    }
    Ok(DensityMatrix {
        operator: HermitianOperator::symmetrized(keymap.pinch_matrix(rho.matrix())),
    })
}

/// Tolerance on the second eigenvalue below which a state is treated as pure.
const RANK_ONE_TOL: f64 = 1e-10;

fn dominant_vector(e: &Eigen) -> Option<CVector> {
    let n = e.values.len();
    if n >= 2 && e.values[n - 2].abs() > RANK_ONE_TOL {
        return None;
    }
    Some(e.vectors.column(n - 1).into_owned())
}

/// Uhlmann fidelity in squared form, `(Tr √(√ρ σ √ρ))²`, so `F(ρ,ρ) = 1`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let er = rho.operator().eig();
    let es = sigma.operator().eig();
    if let (Some(u), Some(v)) = (dominant_vector(&er), dominant_vector(&es)) {
        return Ok(u.dotc(&v).norm_sqr().clamp(0.0, 1.0));
    }
    let sqrt_rho = er.map(|x| x.max(0.0).sqrt());
    let inner = HermitianOperator::symmetrized(&sqrt_rho * sigma.matrix() * &sqrt_rho);
    let root: f64 = inner.eig().values.iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// `h(x) = −x log₂(x/(d−1)) − (1−x) log₂(1−x)`, continuously extended at the
/// endpoints. Inputs outside `[0, 1]` are clamped.
pub fn entropy_h_d(x: f64, d: usize) -> f64 {
    debug_assert!(d >= 2);
    let x = x.clamp(0.0, 1.0);
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * (x / (d as f64 - 1.0)).log2();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).log2();
    }
    h
}

/// Binary entropy.
pub fn h2(x: f64) -> f64 {
    entropy_h_d(x, 2)
}

/// Pauli matrices and related single-qubit constants.
pub mod pauli {
    use super::*;

    pub fn identity() -> HermitianOperator {
        HermitianOperator::identity(2)
    }

    pub fn x() -> HermitianOperator {
        HermitianOperator::symmetrized(CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
        ))
    }

    pub fn y() -> HermitianOperator {
        HermitianOperator::symmetrized(CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
        ))
    }

    pub fn z() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn ket0() -> CVector {
        CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)])
    }

    pub fn ket1() -> CVector {
        CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)])
    }

    pub fn ket_plus() -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![c64(s, 0.0), c64(s, 0.0)])
    }

    pub fn ket_minus() -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![c64(s, 0.0), c64(-s, 0.0)])
    }
}

/// `Σ_k |k⟩|k⟩ / √d`.
pub fn maximally_entangled(d: usize) -> CVector {
    let mut v = CVector::zeros(d * d);
    let s = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        v[k * d + k] = c64(s, 0.0);
    }
    v
}
