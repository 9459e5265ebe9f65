//! Time evolution under dΨ/dτ = −2πi H(τ) Ψ.
//!
//! Integration is a fixed-step fifth-order Runge–Kutta scheme (Dormand–Prince
//! weights) applied in the interaction picture of a static diagonal part D of
//! the Hamiltonian: with Ψ = e^(−2πiDθ) Z inside each step, Z obeys
//! dZ/dθ = −2πi e^(2πiDθ) V(τ) e^(−2πiDθ) Z where V = H − D. The diagonal
//! phases are exact, so the step size is set by the coupling V alone rather
//! than by the largest Fock energy in the truncated basis.

use std::f64::consts::PI;

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Col, Mat, MatMut, MatRef, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{symmetrize, DensityOperator, HermitianOperator, StateVector, UnitaryOperator, UNITARY_TOL};
use crate::thermo::CutoffPolicy;

/// Default integration step in oscillator periods.
pub const DEFAULT_DTAU: f64 = 1e-3;
/// Norm drift that aborts [`evolve_state`].
pub const NORM_DRIFT_LIMIT: f64 = 1e-5;

/// A Hamiltonian H(τ) = D + V(τ) with a static real diagonal D.
pub trait HamiltonianSource {
    fn dim(&self) -> usize;

    /// Static diagonal D, propagated exactly.
    fn diagonal(&self) -> &[f64];

    /// Writes `alpha · V(tau) · x` into `out`.
    fn apply_remainder(&self, tau: f64, x: MatRef<'_, c64>, out: MatMut<'_, c64>, alpha: c64);

    /// The full matrix H(τ).
    fn hamiltonian(&self, tau: f64) -> HermitianOperator;
}

/// A time-independent Hamiltonian, split into its diagonal and the rest.
#[derive(Clone, Debug)]
pub struct ConstantHamiltonian {
    full: HermitianOperator,
    diag: Vec<f64>,
    rest: Mat<c64>,
}

impl ConstantHamiltonian {
    pub fn new(h: &HermitianOperator) -> Self {
        let n = h.dim();
        let diag = (0..n).map(|i| h.get(i, i).re).collect();
        let rest = Mat::from_fn(n, n, |i, j| if i == j { c64::new(0.0, 0.0) } else { h.get(i, j) });
        ConstantHamiltonian {
            full: h.clone(),
            diag,
            rest,
        }
    }
}

impl HamiltonianSource for ConstantHamiltonian {
    fn dim(&self) -> usize {
        self.full.dim()
    }

    fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn apply_remainder(&self, _tau: f64, x: MatRef<'_, c64>, out: MatMut<'_, c64>, alpha: c64) {
        matmul(out, Accum::Replace, self.rest.as_ref(), x, alpha, Par::Seq);
    }

    fn hamiltonian(&self, _tau: f64) -> HermitianOperator {
        self.full.clone()
    }
}

/// How the piston advance stroke is propagated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvanceModel {
    /// Û†ρÛ with Û the retraction propagator.
    #[default]
    ReversedRetraction,
    /// A separately integrated forward ramp from retracted to advanced.
    Integrated,
}

/// Numerical settings shared by every simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub dtau: f64,
    pub cutoff_policy: CutoffPolicy,
    pub advance: AdvanceModel,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dtau: DEFAULT_DTAU,
            cutoff_policy: CutoffPolicy::default(),
            advance: AdvanceModel::default(),
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::invalid("dtau", format!("must be positive, got {}", self.dtau)));
        }
        self.cutoff_policy.validate()
    }
}

// Dormand–Prince fifth-order tableau (the sixth stage completes the
// fifth-order solution; the seventh, FSAL stage only serves error estimation).
const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

/// Splits [a, b] into steps of `dtau` with a shorter final step if needed.
fn step_sizes(span: (f64, f64), dtau: f64) -> Result<Vec<f64>> {
    let (a, b) = span;
    if !a.is_finite() || !b.is_finite() || b < a {
        return Err(Error::invalid("tau_span", format!("need finite a ≤ b, got ({a}, {b})")));
    }
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::invalid("dtau", format!("must be positive, got {dtau}")));
    }
    let len = b - a;
    if len == 0.0 {
        return Ok(Vec::new());
    }
    let full = (len / dtau * (1.0 + 1e-12)).floor() as usize;
    let mut steps = vec![dtau; full];
    let rest = len - full as f64 * dtau;
    if rest > 1e-12 * dtau {
        steps.push(rest);
    }
    Ok(steps)
}

struct Stepper<'a, S: HamiltonianSource + ?Sized> {
    source: &'a S,
    cols: usize,
    stages: Vec<Mat<c64>>,
    work: Mat<c64>,
    tmp: Mat<c64>,
}

impl<'a, S: HamiltonianSource + ?Sized> Stepper<'a, S> {
    fn new(source: &'a S, cols: usize) -> Self {
        let n = source.dim();
        Stepper {
            source,
            cols,
            stages: (0..6).map(|_| Mat::zeros(n, cols)).collect(),
            work: Mat::zeros(n, cols),
            tmp: Mat::zeros(n, cols),
        }
    }

    /// Phase vector e^(−2πi d θ).
    fn phases(&self, theta: f64) -> Vec<c64> {
        self.source
            .diagonal()
            .iter()
            .map(|&d| c64::from_polar(1.0, -2.0 * PI * d * theta))
            .collect()
    }

    /// Advances `z` (interaction-picture state at θ = 0) from `tau` by `h`.
    fn step(&mut self, tau: f64, h: f64, z: &mut Mat<c64>) {
        let n = self.source.dim();
        let minus_2pi_i = c64::new(0.0, -2.0 * PI);
        for s in 0..6 {
            // work = z + h Σ a_sm k_m
            self.work.copy_from(&*z);
            for m in 0..s {
                let coef = A[s][m] * h;
                if coef != 0.0 {
                    let k = &self.stages[m];
                    for j in 0..self.cols {
                        for i in 0..n {
                            self.work[(i, j)] += k[(i, j)] * coef;
                        }
                    }
                }
            }
            let theta = C[s] * h;
            let ph = self.phases(theta);
            for j in 0..self.cols {
                for i in 0..n {
                    self.work[(i, j)] *= ph[i];
                }
            }
            self.source
                .apply_remainder(tau + theta, self.work.as_ref(), self.tmp.as_mut(), minus_2pi_i);
            let k = &mut self.stages[s];
            for j in 0..self.cols {
                for i in 0..n {
                    k[(i, j)] = self.tmp[(i, j)] * ph[i].conj();
                }
            }
        }
        for (s, &b) in B.iter().enumerate() {
            let coef = b * h;
            if coef != 0.0 {
                let k = &self.stages[s];
                for j in 0..self.cols {
                    for i in 0..n {
                        z[(i, j)] += k[(i, j)] * coef;
                    }
                }
            }
        }
        let ph = self.phases(h);
        for j in 0..self.cols {
            for i in 0..n {
                z[(i, j)] *= ph[i];
            }
        }
    }
}

/// Integrates dX/dτ = −2πi H(τ) X over `span` starting from `init`.
pub fn integrate<S: HamiltonianSource + ?Sized>(
    source: &S,
    span: (f64, f64),
    dtau: f64,
    init: Mat<c64>,
) -> Result<Mat<c64>> {
    if init.nrows() != source.dim() {
        return Err(Error::DimensionMismatch {
            context: "integrate",
            expected: source.dim(),
            found: init.nrows(),
        });
    }
    let steps = step_sizes(span, dtau)?;
    let mut stepper = Stepper::new(source, init.ncols());
    let mut x = init;
    let mut tau = span.0;
    for (i, &h) in steps.iter().enumerate() {
        stepper.step(tau, h, &mut x);
        tau = span.0 + (i + 1) as f64 * dtau;
    }
    Ok(x)
}

/// Evolves `psi0` across `tau_span`.
///
/// The state is never renormalized; a norm drift beyond [`NORM_DRIFT_LIMIT`]
/// is reported as [`Error::StepSize`].
pub fn evolve_state<S: HamiltonianSource + ?Sized>(
    psi0: &StateVector,
    source: &S,
    tau_span: (f64, f64),
    dtau: f64,
) -> Result<StateVector> {
    let n = psi0.dim();
    let init = Mat::from_fn(n, 1, |i, _| psi0.as_col()[i]);
    let out = integrate(source, tau_span, dtau, init)?;
    let col = Col::from_fn(n, |i| out[(i, 0)]);
    let drift = (col.norm_l2() - 1.0).abs();
    if !(drift <= NORM_DRIFT_LIMIT) {
        return Err(Error::StepSize {
            quantity: "norm",
            drift,
            limit: NORM_DRIFT_LIMIT,
            dtau,
        });
    }
    Ok(StateVector::from_col_unchecked(col))
}

/// Time-evolution operator Û(b, a) with Û(a, a) = 1.
///
/// The integrated matrix must be unitary within [`UNITARY_TOL`]; the
/// returned operator is its polar factor, so conjugating a density operator
/// with it preserves the trace to rounding.
pub fn propagator<S: HamiltonianSource + ?Sized>(
    source: &S,
    tau_span: (f64, f64),
    dtau: f64,
) -> Result<UnitaryOperator> {
    let n = source.dim();
    let u = UnitaryOperator::from_mat_unchecked(integrate(source, tau_span, dtau, Mat::identity(n, n))?);
    let drift = u.unitarity_defect();
    if !(drift <= UNITARY_TOL) {
        return Err(Error::StepSize {
            quantity: "unitarity",
            drift,
            limit: UNITARY_TOL,
            dtau,
        });
    }
    nearest_unitary(u.as_mat())
}

/// Polar factor W·V† of M = W·Σ·V†, the unitary closest to M in every
/// unitarily invariant norm.
pub fn nearest_unitary(m: MatRef<'_, c64>) -> Result<UnitaryOperator> {
    let svd = m
        .svd()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    let mut w = Mat::<c64>::zeros(m.nrows(), m.ncols());
    matmul(
        w.as_mut(),
        Accum::Replace,
        svd.U(),
        svd.V().adjoint(),
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    Ok(UnitaryOperator::from_mat_unchecked(w))
}

/// Eigendecomposition H = V Λ V† of a Hermitian operator, stored in real
/// arithmetic when H is real symmetric.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    values: Vec<f64>,
    vectors: SpectrumVectors,
}

#[derive(Clone, Debug)]
enum SpectrumVectors {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl HermitianSpectrum {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        if h.is_real() {
            Self::from_real_symmetric(&h.real_part())
        } else {
            let evd = h
                .as_mat()
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("Hermitian eigensolve failed: {e:?}")))?;
            Ok(HermitianSpectrum {
                values: evd.S().column_vector().iter().map(|z| z.re).collect(),
                vectors: SpectrumVectors::Complex(evd.U().to_owned()),
            })
        }
    }

    /// Decomposes a real symmetric matrix (lower triangle is used).
    pub fn from_real_symmetric(m: &Mat<f64>) -> Result<Self> {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("symmetric eigensolve failed: {e:?}")))?;
        Ok(HermitianSpectrum {
            values: evd.S().column_vector().iter().copied().collect(),
            vectors: SpectrumVectors::Real(evd.U().to_owned()),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// exp(−2πi·duration·H).
    pub fn exp_unitary(&self, duration: f64) -> Result<UnitaryOperator> {
        if !duration.is_finite() {
            return Err(Error::invalid("duration", "must be finite"));
        }
        let n = self.dim();
        let phases: Vec<c64> = self
            .values
            .iter()
            .map(|&l| c64::from_polar(1.0, -2.0 * PI * duration * l))
            .collect();
        let par = faer::get_global_parallelism();
        let u = match &self.vectors {
            SpectrumVectors::Real(v) => {
                let vc = Mat::from_fn(n, n, |i, j| v[(i, j)] * phases[j].re);
                let vs = Mat::from_fn(n, n, |i, j| v[(i, j)] * phases[j].im);
                let mut re = Mat::<f64>::zeros(n, n);
                let mut im = Mat::<f64>::zeros(n, n);
                matmul(re.as_mut(), Accum::Replace, vc.as_ref(), v.transpose(), 1.0, par);
                matmul(im.as_mut(), Accum::Replace, vs.as_ref(), v.transpose(), 1.0, par);
                Mat::from_fn(n, n, |i, j| c64::new(re[(i, j)], im[(i, j)]))
            }
            SpectrumVectors::Complex(v) => {
                let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * phases[j]);
                let mut u = Mat::<c64>::zeros(n, n);
                matmul(
                    u.as_mut(),
                    Accum::Replace,
                    scaled.as_ref(),
                    v.adjoint(),
                    c64::new(1.0, 0.0),
                    par,
                );
                u
            }
        };
        let u = UnitaryOperator::from_mat_unchecked(u);
        let defect = sampled_unitarity_defect(&u);
        if !(defect <= 1e-10) {
            return Err(Error::Numerical(format!(
                "spectral exponential lost unitarity: defect {defect:.3e}"
            )));
        }
        Ok(u)
    }
}

/// ‖U†U − 1‖_max, restricted to a strided subset of columns for large U.
fn sampled_unitarity_defect(u: &UnitaryOperator) -> f64 {
    let n = u.dim();
    if n <= 512 {
        return u.unitarity_defect();
    }
    let m = u.as_mat();
    let stride = n / 64;
    let cols: Vec<usize> = (0..n).step_by(stride).collect();
    let mut worst = 0.0f64;
    for &a in &cols {
        for &b in &cols {
            let mut acc = c64::new(0.0, 0.0);
            for i in 0..n {
                acc += m[(i, a)].conj() * m[(i, b)];
            }
            if a == b {
                acc -= c64::new(1.0, 0.0);
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// exp(−2πi·duration·h) by spectral decomposition.
pub fn hermitian_expm(h: &HermitianOperator, duration: f64) -> Result<UnitaryOperator> {
    HermitianSpectrum::new(h)?.exp_unitary(duration)
}

/// U ρ U†, re-symmetrized.
pub fn conjugate_density(rho: &DensityOperator, u: &UnitaryOperator) -> Result<DensityOperator> {
    if rho.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            context: "conjugate_density",
            expected: u.dim(),
            found: rho.dim(),
        });
    }
    Ok(DensityOperator::from_mat_unchecked(conjugate(
        rho.as_mat(),
        u.as_mat(),
        false,
    )))
}

/// U ρ U† (or U† ρ U when `adjoint_first`), symmetrized.
pub(crate) fn conjugate(rho: MatRef<'_, c64>, u: MatRef<'_, c64>, adjoint_first: bool) -> Mat<c64> {
    let n = rho.nrows();
    let one = c64::new(1.0, 0.0);
    let mut tmp = Mat::<c64>::zeros(n, n);
    let mut out = Mat::<c64>::zeros(n, n);
    if adjoint_first {
        matmul(tmp.as_mut(), Accum::Replace, u.adjoint(), rho, one, Par::Seq);
        matmul(out.as_mut(), Accum::Replace, tmp.as_ref(), u, one, Par::Seq);
    } else {
        matmul(tmp.as_mut(), Accum::Replace, u, rho, one, Par::Seq);
        matmul(out.as_mut(), Accum::Replace, tmp.as_ref(), u.adjoint(), one, Par::Seq);
    }
    symmetrize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_partition() {
        assert!(step_sizes((0.0, 0.0), 0.1).unwrap().is_empty());
        let s = step_sizes((0.0, 1.0), 0.1).unwrap();
        assert_eq!(s.len(), 10);
        let s = step_sizes((0.0, 0.25), 0.1).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s[2] - 0.05).abs() < 1e-15);
        let s = step_sizes((0.0, 1e-3), 1e-2).unwrap();
        assert_eq!(s, vec![1e-3]);
        assert!(step_sizes((1.0, 0.0), 0.1).is_err());
        assert!(step_sizes((0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn zero_duration_expm_is_identity() {
        let h = HermitianOperator::from_diagonal(&[0.3, 1.7, -2.0]);
        let u = hermitian_expm(&h, 0.0).unwrap();
        assert!((u.as_mat() - Mat::<c64>::identity(3, 3)).norm_max() < 1e-15);
    }

    #[test]
    fn diagonal_phases() {
        let h = HermitianOperator::from_diagonal(&[0.5, 1.5]);
        let u = hermitian_expm(&h, 1.0).unwrap();
        for i in 0..2 {
            assert!((u.as_mat()[(i, i)] - c64::new(-1.0, 0.0)).norm() < 1e-14);
        }
        assert!(u.as_mat()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn conjugate_rejects_mismatch() {
        let rho = DensityOperator::from_populations(&[1.0, 0.0]).unwrap();
        assert!(conjugate_density(&rho, &UnitaryOperator::identity(3)).is_err());
    }
}
