//! Small dense complex linear algebra: matrices of dimension 2 to 4, pure
//! states, density matrices, and the gate/state fidelity metrics built on them.

use std::f64::consts::PI;
use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{
    allocator::Allocator, DMatrix, DVector, DefaultAllocator, Dim, DimDiff, DimSub, OMatrix, U1,
};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for the unitarity flag on constructed/propagated matrices.
pub const UNITARY_TOL: f64 = 1e-12;
/// Relative tolerance on anti-Hermitian parts accepted by [`hermitian_exponential`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Square complex matrix of dimension 2, 3 or 4 (qubit, qutrit, two-qubit/Pauli space).
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(CMatrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("matrix is not square"));
        }
        check_dim(m.nrows())?;
        Ok(CMatrix(m))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        check_dim(dim)?;
        Ok(CMatrix(DMatrix::from_fn(dim, dim, f)))
    }

    pub fn identity(dim: usize) -> Self {
        assert!((2..=4).contains(&dim), "dimension {dim} not supported");
        CMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!((2..=4).contains(&dim), "dimension {dim} not supported");
        CMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(diag: &[C64]) -> Result<Self> {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn determinant(&self) -> C64 {
        self.0.clone().determinant()
    }

    pub fn scale(&self, z: C64) -> Self {
        CMatrix(&self.0 * z)
    }

    /// Leading `k`x`k` block.
    pub fn leading_block(&self, k: usize) -> Result<Self> {
        if k > self.dim() {
            return Err(Error::invalid("block larger than matrix"));
        }
        Self::from_matrix(self.0.view((0, 0), (k, k)).into_owned())
    }

    /// Element-wise max-norm distance.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = CMatrix(self.0.adjoint() * &self.0);
        prod.max_abs_diff(&CMatrix::identity(self.dim()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() < tol
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim() {
            return Err(Error::invalid(
                "dimension mismatch in matrix-vector product",
            ));
        }
        Ok(StateVector(&self.0 * &v.0))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=4).contains(&dim) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dimension {dim} not in {{2, 3, 4}}"
        )))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

/// Pure state over the ordered basis (|0⟩, |1⟩, |e⟩) or a qubit subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        Ok(StateVector(DVector::from_vec(amplitudes)))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index out of range");
        let mut v = DVector::zeros(dim);
        v[k] = ONE;
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < 1e-12
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0.dotc(&other.0)
    }

    pub fn scale(&self, z: C64) -> Self {
        StateVector(&self.0 * z)
    }

    /// Embeds a qubit state into the qutrit with zero |e⟩ amplitude.
    pub fn embed_qutrit(&self) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::invalid("only qubit states can be embedded"));
        }
        Ok(StateVector(DVector::from_vec(vec![
            self.0[0], self.0[1], ZERO,
        ])))
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }
}

impl Index<usize> for StateVector {
    type Output = C64;

    fn index(&self, k: usize) -> &C64 {
        &self.0[k]
    }
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity (1e-12), trace (1e-10) and spectrum (≥ −1e-9).
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, 1e-12, 1e-10, 1e-9)
    }

    pub(crate) fn with_tolerance(m: CMatrix, herm: f64, trace: f64, eig: f64) -> Result<Self> {
        if !m.is_hermitian(herm) {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > trace || tr.im.abs() > trace {
            return Err(Error::invalid(format!("density matrix trace {tr} != 1")));
        }
        let min_eig = hermitian_eigenvalues(&m)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -eig {
            return Err(Error::invalid(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(DensityMatrix(m))
    }

    pub fn pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        DensityMatrix(CMatrix(v * v.adjoint()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(CMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Embeds a qubit density matrix into the qutrit with zero |e⟩ occupancy.
    pub fn embed_qutrit(&self) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::invalid(
                "only qubit density matrices can be embedded",
            ));
        }
        let m = CMatrix::from_fn(3, |i, j| if i < 2 && j < 2 { self.0[(i, j)] } else { ZERO })?;
        Ok(DensityMatrix(m))
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::invalid("dimension mismatch in unitary conjugation"));
        }
        Ok(DensityMatrix(&(u * &self.0) * &u.adjoint()))
    }
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m.matrix() + m.matrix().adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().collect()
}

/// Eigendecomposition-based `exp(−i H s)` for any static or dynamic dimension.
pub(crate) fn herm_exp<D>(h: OMatrix<C64, D, D>, s: f64) -> OMatrix<C64, D, D>
where
    D: Dim + DimSub<U1>,
    DefaultAllocator: Allocator<D, D> + Allocator<DimDiff<D, U1>> + Allocator<D>,
{
    let eig = h.symmetric_eigen();
    let mut v = eig.eigenvectors;
    let vt = v.adjoint();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda * s);
        v.column_mut(k).iter_mut().for_each(|x| *x *= phase);
    }
    v * vt
}

/// `exp(−i H s)` for Hermitian `H`.
///
/// Hermiticity is checked relative to the largest entry of `H` so that
/// generators in rad/s and dimensionless ones share the same criterion.
pub fn hermitian_exponential(h: &CMatrix, s: f64) -> Result<CMatrix> {
    let scale = h.max_abs().max(1.0);
    if h.hermiticity_defect() > HERMITIAN_TOL * scale {
        return Err(Error::invalid("generator is not Hermitian"));
    }
    if !s.is_finite() {
        return Err(Error::invalid("non-finite evolution time"));
    }
    let herm = (h.matrix() + h.matrix().adjoint()) * C64::new(0.5, 0.0);
    Ok(CMatrix(herm_exp(herm, s)))
}

/// `(|Tr(U†V)|² + 2) / 6` for single-qubit unitaries.
pub fn average_gate_fidelity(u: &CMatrix, v: &CMatrix) -> Result<f64> {
    for m in [u, v] {
        if m.dim() != 2 {
            return Err(Error::invalid("average gate fidelity needs 2x2 gates"));
        }
        if !m.is_unitary(1e-10) {
            return Err(Error::invalid("average gate fidelity needs unitary gates"));
        }
    }
    let overlap = (&u.adjoint() * v).trace().norm_sqr();
    Ok(((overlap + 2.0) / 6.0).min(1.0))
}

/// Average gate fidelity of a possibly non-unitary qubit block `m` (the
/// computational-subspace projection of a leaky propagator) against target `u`:
/// `(Tr(M M†) + |Tr(U† M)|²) / 6`. Reduces to [`average_gate_fidelity`] for unitary `m`.
pub fn projected_gate_fidelity(m: &CMatrix, u: &CMatrix) -> Result<f64> {
    if m.dim() != 2 || u.dim() != 2 {
        return Err(Error::invalid("projected gate fidelity needs 2x2 blocks"));
    }
    let norm = (m * &m.adjoint()).trace().re;
    let overlap = (&u.adjoint() * m).trace().norm_sqr();
    Ok(((norm + overlap) / 6.0).clamp(0.0, 1.0))
}

/// Returns `e^{iλ} U` with `λ` maximising `Re Tr(V† e^{iλ} U)`; `λ = 0` when the overlap vanishes.
pub fn global_phase_align(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    if u.dim() != v.dim() {
        return Err(Error::invalid("dimension mismatch in phase alignment"));
    }
    let tau = (&v.adjoint() * u).trace();
    if tau.norm() < 1e-14 {
        return Ok(u.clone());
    }
    Ok(u.scale(tau.conj() / tau.norm()))
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn state_fidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::invalid("dimension mismatch in state fidelity"));
    }
    let v = psi.amplitudes();
    let val = v.dotc(&(rho.matrix().matrix() * v));
    Ok(val.re.clamp(0.0, 1.0))
}

/// Maps an angle onto `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Single-qubit Paulis and a few fixed gates.
pub mod pauli {
    use super::{CMatrix, C64, I, ONE, ZERO};

    pub fn id() -> CMatrix {
        CMatrix::identity(2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, &[ZERO, ONE, ONE, ZERO]).unwrap()
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, &[ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, &[ONE, ZERO, ZERO, -ONE]).unwrap()
    }

    pub fn hadamard() -> CMatrix {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        CMatrix::from_row_slice(2, &[h, h, h, -h]).unwrap()
    }

    /// Ordered operator basis (I, X, Y, Z).
    pub fn basis() -> [CMatrix; 4] {
        [id(), x(), y(), z()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_of_zero_is_identity() {
        let u = hermitian_exponential(&CMatrix::zeros(3), 12.3).unwrap();
        assert!(u.max_abs_diff(&CMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn exponential_of_pauli_x_at_pi() {
        let u = hermitian_exponential(&pauli::x(), PI).unwrap();
        let minus_id = CMatrix::identity(2).scale(-ONE);
        assert!(u.max_abs_diff(&minus_id) < 1e-12);
    }

    #[test]
    fn exponential_of_diagonal() {
        let h = CMatrix::diagonal(&[ONE, C64::new(2.0, 0.0), C64::new(3.0, 0.0)]).unwrap();
        let u = hermitian_exponential(&h, 0.7).unwrap();
        let expected = CMatrix::diagonal(&[
            C64::from_polar(1.0, -0.7),
            C64::from_polar(1.0, -1.4),
            C64::from_polar(1.0, -2.1),
        ])
        .unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn exponential_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, &[ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!(matches!(
            hermitian_exponential(&m, 1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gate_fidelity_examples() {
        let x = pauli::x();
        assert_abs_diff_eq!(average_gate_fidelity(&x, &x).unwrap(), 1.0, epsilon = 1e-14);
        let phased = x.scale(C64::from_polar(1.0, PI / 7.0));
        assert_abs_diff_eq!(
            average_gate_fidelity(&x, &phased).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            average_gate_fidelity(&pauli::id(), &x).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gate_fidelity_rejects_non_unitary() {
        let m = CMatrix::from_row_slice(2, &[ONE, ONE, ZERO, ONE]).unwrap();
        assert!(average_gate_fidelity(&m, &pauli::x()).is_err());
    }

    #[test]
    fn projected_fidelity_matches_unitary_case() {
        let h = pauli::hadamard();
        let f1 = projected_gate_fidelity(&h, &pauli::x()).unwrap();
        let f2 = average_gate_fidelity(&h, &pauli::x()).unwrap();
        assert_abs_diff_eq!(f1, f2, epsilon = 1e-14);
    }

    #[test]
    fn phase_alignment_examples() {
        let z = pauli::z();
        let aligned = global_phase_align(&z.scale(-ONE), &z).unwrap();
        assert!(aligned.max_abs_diff(&z) < 1e-15);

        let x = pauli::x();
        let aligned = global_phase_align(&x.scale(I), &x).unwrap();
        assert!(aligned.max_abs_diff(&x) < 1e-15);

        let h = pauli::hadamard();
        assert!(global_phase_align(&h, &h).unwrap().max_abs_diff(&h) < 1e-15);
    }

    #[test]
    fn phase_alignment_tie_break_keeps_input() {
        // Tr(Z† X) = 0
        let x = pauli::x();
        assert_eq!(global_phase_align(&x, &pauli::z()).unwrap(), x);
    }

    #[test]
    fn phase_alignment_dimension_mismatch() {
        assert!(global_phase_align(&CMatrix::identity(2), &CMatrix::identity(3)).is_err());
    }

    #[test]
    fn state_fidelity_examples() {
        let zero = StateVector::basis(2, 0);
        let one = StateVector::basis(2, 1);
        let rho = DensityMatrix::pure(&zero);
        assert_abs_diff_eq!(state_fidelity(&rho, &zero).unwrap(), 1.0);
        assert_abs_diff_eq!(state_fidelity(&rho, &one).unwrap(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(3);
        let e = StateVector::basis(3, 2);
        assert_abs_diff_eq!(
            state_fidelity(&mixed, &e).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(state_fidelity(&mixed, &zero).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = CMatrix::identity(2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = CMatrix::diagonal(&[C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]).unwrap();
        assert!(DensityMatrix::new(negative).is_err());
        assert!(DensityMatrix::new(DensityMatrix::maximally_mixed(4).matrix().clone()).is_ok());
    }

    #[test]
    fn dimension_guard() {
        assert!(CMatrix::from_row_slice(5, &[ZERO; 25]).is_err());
        assert!(CMatrix::from_row_slice(2, &[ZERO; 3]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(0.3), 0.3);
    }
}
