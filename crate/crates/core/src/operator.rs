//! Dense operator newtypes with checked structural invariants.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Col, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Tolerance on ‖M − M†‖_max for [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on ‖U†U − 1‖_max for [`UnitaryOperator`].
pub const UNITARY_TOL: f64 = 1e-8;
/// Trace and Hermiticity tolerance for [`DensityOperator`].
pub const DENSITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted in a [`DensityOperator`].
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Norm tolerance for [`StateVector`].
pub const NORM_TOL: f64 = 1e-8;

pub(crate) fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `m` by (m + m†)/2.
pub(crate) fn symmetrize(m: &mut Mat<c64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = c64::new(m[(j, j)].re, 0.0);
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub(crate) fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Re tr(a·b) without forming the product.
pub(crate) fn trace_of_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let n = a.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigenvalue solve failed: {e:?}")))
}

fn check_square(m: MatRef<'_, c64>, context: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::invalid("dim", "operators must be at least 1x1"));
    }
    Ok(())
}

/// Dense Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(Mat<c64>);

impl HermitianOperator {
    /// Wraps `m` after verifying Hermiticity to [`HERMITIAN_TOL`].
    pub fn try_new(m: Mat<c64>) -> Result<Self> {
        check_square(m.as_ref(), "HermitianOperator")?;
        let defect = hermiticity_defect(m.as_ref());
        if defect > HERMITIAN_TOL {
            return Err(Error::invalid(
                "matrix",
                format!("not Hermitian: ‖M − M†‖_max = {defect:.3e}"),
            ));
        }
        Ok(HermitianOperator(m))
    }

    /// Symmetrizes `m` to (m + m†)/2 and wraps it.
    pub fn symmetrized(mut m: Mat<c64>) -> Result<Self> {
        check_square(m.as_ref(), "HermitianOperator")?;
        symmetrize(&mut m);
        Ok(HermitianOperator(m))
    }

    pub fn from_real_symmetric(m: &Mat<f64>) -> Result<Self> {
        Self::symmetrized(Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0)))
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        HermitianOperator(Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(values[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    pub(crate) fn from_mat_unchecked(m: Mat<c64>) -> Self {
        HermitianOperator(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[(i, j)]
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.0[(i, j)].im == 0.0))
    }

    /// Real part as a dense real matrix.
    pub fn real_part(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.0[(i, j)].re)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(self.0.as_ref())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HermitianOperator(Mat::from_fn(self.dim(), self.dim(), |i, j| self.0[(i, j)] * factor))
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &HermitianOperator, factor: f64) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "HermitianOperator::add_scaled",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(HermitianOperator(Mat::from_fn(self.dim(), self.dim(), |i, j| {
            self.0[(i, j)] + other.0[(i, j)] * factor
        })))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(self.0.as_ref())
    }

    /// Lowest eigenvalue and a normalized eigenvector for it.
    pub fn ground_state(&self) -> Result<(f64, StateVector)> {
        let evd = self
            .0
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("Hermitian eigensolve failed: {e:?}")))?;
        let energy = evd.S().column_vector()[0].re;
        let v = evd.U().col(0).to_owned();
        Ok((energy, StateVector::normalized(v)?))
    }

    /// Re ⟨ψ|H|ψ⟩.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        let hv = &self.0 * psi.as_col();
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..self.dim() {
            acc += psi.as_col()[i].conj() * hv[i];
        }
        acc.re
    }
}

/// Dense unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator(Mat<c64>);

impl UnitaryOperator {
    /// Wraps `m` after verifying ‖U†U − 1‖_max ≤ [`UNITARY_TOL`].
    pub fn try_new(m: Mat<c64>) -> Result<Self> {
        check_square(m.as_ref(), "UnitaryOperator")?;
        let u = UnitaryOperator(m);
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::invalid(
                "matrix",
                format!("not unitary: ‖U†U − 1‖_max = {defect:.3e}"),
            ));
        }
        Ok(u)
    }

    pub(crate) fn from_mat_unchecked(m: Mat<c64>) -> Self {
        UnitaryOperator(m)
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryOperator(Mat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        UnitaryOperator(self.0.adjoint().to_owned())
    }

    /// ‖U†U − 1‖_max.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let mut g = Mat::<c64>::zeros(n, n);
        matmul(
            g.as_mut(),
            Accum::Replace,
            self.0.adjoint(),
            self.0.as_ref(),
            c64::new(1.0, 0.0),
            Par::Seq,
        );
        for i in 0..n {
            g[(i, i)] -= c64::new(1.0, 0.0);
        }
        g.norm_max()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "UnitaryOperator::apply",
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(StateVector(&self.0 * psi.as_col()))
    }
}

/// Unit-trace, Hermitian, positive-semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(Mat<c64>);

impl DensityOperator {
    /// Wraps `m` after checking trace, Hermiticity and positivity.
    pub fn try_new(m: Mat<c64>) -> Result<Self> {
        check_square(m.as_ref(), "DensityOperator")?;
        let rho = DensityOperator(m);
        rho.validate("DensityOperator::try_new")?;
        Ok(rho)
    }

    pub(crate) fn from_mat_unchecked(m: Mat<c64>) -> Self {
        DensityOperator(m)
    }

    /// Diagonal state with the given populations (must be non-negative and sum to 1).
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        if populations.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("populations", "must be non-negative"));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > DENSITY_TOL {
            return Err(Error::invalid("populations", format!("must sum to 1, got {total}")));
        }
        let n = populations.len();
        Ok(DensityOperator(Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(populations[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })))
    }

    /// |ψ⟩⟨ψ|.
    pub fn pure(psi: &StateVector) -> Self {
        let v = psi.as_col();
        let n = v.nrows();
        DensityOperator(Mat::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> c64 {
        trace(self.0.as_ref())
    }

    /// Real diagonal (Fock populations).
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// Population of the highest retained basis state.
    pub fn top_population(&self) -> f64 {
        self.0[(self.dim() - 1, self.dim() - 1)].re
    }

    /// tr(ρ²).
    pub fn purity(&self) -> f64 {
        trace_of_product(self.0.as_ref(), self.0.as_ref()).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(self.0.as_ref())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// ‖ρ − σ‖_max.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(self.0.as_ref())
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        (&self.0 - &other.0).norm_max()
    }

    /// Checks the density-operator invariants, naming `operation` on failure.
    pub fn validate(&self, operation: &'static str) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::Channel {
                operation,
                reason: format!("trace {tr} deviates from 1"),
            });
        }
        let defect = hermiticity_defect(self.0.as_ref());
        if defect > DENSITY_TOL {
            return Err(Error::Channel {
                operation,
                reason: format!("Hermiticity defect {defect:.3e}"),
            });
        }
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::Channel {
                operation,
                reason: format!("negative eigenvalue {min:.3e}"),
            });
        }
        Ok(())
    }
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Col<c64>);

impl StateVector {
    /// Wraps `amplitudes` after verifying ‖ψ‖ = 1 to [`NORM_TOL`].
    pub fn try_new(amplitudes: Col<c64>) -> Result<Self> {
        let norm = amplitudes.norm_l2();
        if amplitudes.nrows() == 0 || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(
                "amplitudes",
                format!("state must have unit norm, got {norm}"),
            ));
        }
        Ok(StateVector(amplitudes))
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: Col<c64>) -> Result<Self> {
        let norm = amplitudes.norm_l2();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("amplitudes", "cannot normalize a zero vector"));
        }
        Ok(StateVector(Col::from_fn(amplitudes.nrows(), |i| amplitudes[i] / norm)))
    }

    pub(crate) fn from_col_unchecked(c: Col<c64>) -> Self {
        StateVector(c)
    }

    /// Fock state |j⟩ in dimension `dim`.
    pub fn basis(dim: usize, j: usize) -> Result<Self> {
        if j >= dim {
            return Err(Error::invalid("j", format!("{j} outside basis of size {dim}")));
        }
        Ok(StateVector(Col::from_fn(dim, |i| {
            if i == j {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_col(&self) -> &Col<c64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm_l2()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> c64 {
        (0..self.dim()).map(|i| self.0[i].conj() * other.0[i]).sum()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}
