//! Thermal states, composite-system algebra, the collision-model bath
//! channel, number-basis measurement and the interaction-energy map.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatMut, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::conjugate;
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::model::{EngineModel, EngineParams};
use crate::operator::{symmetrize, trace_of_product, DensityOperator, HermitianOperator, UnitaryOperator};

/// Bath levels whose thermal population is below this weight are dropped
/// from the collision channel.
pub const KRAUS_POPULATION_FLOOR: f64 = 1e-18;

/// Thermal frequency ω_T = k_B T/ħΩ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    omega_t: f64,
}

impl ThermalSpec {
    pub fn new(omega_t: f64) -> Result<Self> {
        if omega_t > 0.0 && omega_t.is_finite() {
            Ok(ThermalSpec { omega_t })
        } else {
            Err(Error::invalid(
                "omega_t",
                format!("must be positive and finite, got {omega_t}"),
            ))
        }
    }

    pub fn omega_t(&self) -> f64 {
        self.omega_t
    }
}

/// Thresholds on the population of the highest retained Fock state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPolicy {
    pub warn: f64,
    /// `None` disables the hard failure.
    pub fail: Option<f64>,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        CutoffPolicy {
            warn: 1e-10,
            fail: Some(1e-4),
        }
    }
}

/// Outcome of checking a state against a [`CutoffPolicy`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CutoffStatus {
    Clean,
    Warning { population: f64 },
    Exceeded { population: f64 },
}

impl CutoffPolicy {
    /// Warn-only policy for reduced-cutoff runs.
    pub fn warn_only() -> Self {
        CutoffPolicy {
            fail: None,
            ..CutoffPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warn >= 0.0) {
            return Err(Error::invalid("cutoff_policy.warn", "must be non-negative"));
        }
        if let Some(f) = self.fail {
            if !(f >= self.warn) {
                return Err(Error::invalid(
                    "cutoff_policy.fail",
                    "must be at least the warning level",
                ));
            }
        }
        Ok(())
    }

    pub fn classify(&self, population: f64) -> CutoffStatus {
        match self.fail {
            Some(f) if population > f => CutoffStatus::Exceeded { population },
            _ if population > self.warn => CutoffStatus::Warning { population },
            _ => CutoffStatus::Clean,
        }
    }

    /// Fails on [`CutoffStatus::Exceeded`], logs a warning otherwise.
    pub fn enforce(&self, population: f64, cycle: Option<usize>, what: &str) -> Result<CutoffStatus> {
        let status = self.classify(population);
        match status {
            CutoffStatus::Exceeded { population } => Err(Error::CutoffExceeded {
                population,
                limit: self.fail.unwrap_or(f64::INFINITY),
                cycle,
            }),
            CutoffStatus::Warning { population } => {
                log::warn!("{what}: top Fock population {population:.3e} exceeds {:.1e}", self.warn);
                Ok(status)
            }
            CutoffStatus::Clean => Ok(status),
        }
    }
}

/// Normalized Boltzmann populations e^(−j/ω_T)/Z, j = 0..N−1.
pub fn thermal_populations(space: &FockSpace, spec: &ThermalSpec) -> Vec<f64> {
    let weights: Vec<f64> = (0..space.dim()).map(|j| (-(j as f64) / spec.omega_t()).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Thermal state of the bare oscillator together with its cutoff status
/// under `policy`; never fails on leakage.
pub fn thermal_state_with_status(
    space: &FockSpace,
    spec: &ThermalSpec,
    policy: &CutoffPolicy,
) -> (DensityOperator, CutoffStatus) {
    let p = thermal_populations(space, spec);
    let status = policy.classify(p[p.len() - 1]);
    let rho = DensityOperator::from_populations(&p).expect("Boltzmann populations are a distribution");
    (rho, status)
}

/// Thermal state e^(−H0/ω_T)/Z; logs a warning when the top Fock state
/// holds more than 1e−10 of the population.
pub fn thermal_state(space: &FockSpace, spec: &ThermalSpec) -> DensityOperator {
    let (rho, status) = thermal_state_with_status(space, spec, &CutoffPolicy::warn_only());
    if let CutoffStatus::Warning { population } = status {
        log::warn!(
            "thermal state ω_T = {} at N = {}: top population {population:.3e}",
            spec.omega_t(),
            space.dim()
        );
    }
    rho
}

/// Kronecker product a ⊗ b, first factor's index slow.
pub fn tensor_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// ρ_fluid ⊗ ρ_bath.
pub fn tensor_density(fluid: &DensityOperator, bath: &DensityOperator) -> DensityOperator {
    DensityOperator::from_mat_unchecked(tensor_product(fluid.as_mat(), bath.as_mat()))
}

/// tr_b ρ with the composite index ordered (fluid, bath).
pub fn partial_trace_bath(rho_composite: &DensityOperator, fluid_dim: usize) -> Result<DensityOperator> {
    let total = rho_composite.dim();
    if fluid_dim == 0 || total % fluid_dim != 0 {
        return Err(Error::invalid(
            "fluid_dim",
            format!("{fluid_dim} does not divide the composite dimension {total}"),
        ));
    }
    let nb = total / fluid_dim;
    let m = rho_composite.as_mat();
    let mut out = Mat::from_fn(fluid_dim, fluid_dim, |j, jp| {
        (0..nb).fold(c64::new(0.0, 0.0), |acc, k| acc + m[(j * nb + k, jp * nb + k)])
    });
    symmetrize(&mut out);
    Ok(DensityOperator::from_mat_unchecked(out))
}

/// tr_b[B(ρ ⊗ ρ_b)B†], evaluated literally on the composite space.
pub fn bath_collision(
    rho: &DensityOperator,
    bath: &DensityOperator,
    b_unitary: &UnitaryOperator,
    fluid_dim: usize,
) -> Result<DensityOperator> {
    if rho.dim() != fluid_dim {
        return Err(Error::DimensionMismatch {
            context: "bath_collision fluid state",
            expected: fluid_dim,
            found: rho.dim(),
        });
    }
    if fluid_dim * bath.dim() != b_unitary.dim() {
        return Err(Error::DimensionMismatch {
            context: "bath_collision unitary",
            expected: fluid_dim * bath.dim(),
            found: b_unitary.dim(),
        });
    }
    let joint = tensor_product(rho.as_mat(), bath.as_mat());
    let evolved = DensityOperator::from_mat_unchecked(conjugate(joint.as_ref(), b_unitary.as_mat(), false));
    let out = partial_trace_bath(&evolved, fluid_dim)?;
    out.validate("bath collision")?;
    Ok(out)
}

/// The collision map ρ ↦ tr_b[B(ρ ⊗ ρ_b)B†] for a diagonal bath state,
/// stored as Kraus blocks K_{k,k'} = √p_k' ⟨k|B|k'⟩.
///
/// For every retained bath level k' the blocks are stacked into an N²×N
/// matrix C_k' (row k·N + j), so that one application costs two GEMMs of
/// size N²×N×N per level instead of conjugating an N²×N² matrix.
#[derive(Clone, Debug)]
pub struct CollisionChannel {
    fluid_dim: usize,
    bath_dim: usize,
    /// Column-major N²×N blocks, one per retained bath level.
    blocks: Vec<Vec<c64>>,
    retained_weight: f64,
}

impl CollisionChannel {
    pub fn new(b_unitary: &UnitaryOperator, bath_populations: &[f64], fluid_dim: usize) -> Result<Self> {
        let nb = bath_populations.len();
        if fluid_dim == 0 || fluid_dim * nb != b_unitary.dim() {
            return Err(Error::DimensionMismatch {
                context: "collision channel",
                expected: fluid_dim * nb,
                found: b_unitary.dim(),
            });
        }
        if bath_populations.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("bath_populations", "must be non-negative"));
        }
        let n = fluid_dim;
        let b = b_unitary.as_mat();
        let mut blocks = Vec::new();
        let mut retained_weight = 0.0;
        for (kp, &p) in bath_populations.iter().enumerate() {
            if p < KRAUS_POPULATION_FLOOR {
                continue;
            }
            retained_weight += p;
            let s = p.sqrt();
            let mut block = vec![c64::new(0.0, 0.0); n * nb * n];
            for jp in 0..n {
                for k in 0..nb {
                    for j in 0..n {
                        block[k * n + j + jp * n * nb] = b[(j * nb + k, jp * nb + kp)] * s;
                    }
                }
            }
            blocks.push(block);
        }
        Ok(CollisionChannel {
            fluid_dim,
            bath_dim: nb,
            blocks,
            retained_weight,
        })
    }

    /// Builds the channel for bath state `bath`, which must be diagonal.
    pub fn from_bath_state(b_unitary: &UnitaryOperator, bath: &DensityOperator, fluid_dim: usize) -> Result<Self> {
        let m = bath.as_mat();
        let off = (0..bath.dim())
            .flat_map(|i| (0..bath.dim()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm())
            .fold(0.0, f64::max);
        if off > 0.0 {
            return Err(Error::invalid(
                "bath",
                "collision channel requires a diagonal bath state",
            ));
        }
        Self::new(b_unitary, &bath.populations(), fluid_dim)
    }

    pub fn fluid_dim(&self) -> usize {
        self.fluid_dim
    }

    pub fn retained_levels(&self) -> usize {
        self.blocks.len()
    }

    /// Total bath population carried by the retained levels.
    pub fn retained_weight(&self) -> f64 {
        self.retained_weight
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let n = self.fluid_dim;
        let nb = self.bath_dim;
        if rho.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "collision channel",
                expected: n,
                found: rho.dim(),
            });
        }
        let one = c64::new(1.0, 0.0);
        let par = faer::get_global_parallelism();
        let mut out = Mat::<c64>::zeros(n, n);
        let mut t = vec![c64::new(0.0, 0.0); n * nb * n];
        for block in &self.blocks {
            let c = MatRef::from_column_major_slice(block, n * nb, n);
            matmul(
                MatMut::from_column_major_slice_mut(&mut t, n * nb, n),
                Accum::Replace,
                c,
                rho.as_mat(),
                one,
                par,
            );
            // Σ_k T_k K_k† as one product of N×N² reinterpretations.
            let x = MatRef::from_column_major_slice(&t, n, n * nb);
            let y = MatRef::from_column_major_slice(block, n, n * nb);
            matmul(out.as_mut(), Accum::Add, x, y.adjoint(), one, par);
        }
        symmetrize(&mut out);
        let out = DensityOperator::from_mat_unchecked(out);
        out.validate("bath collision")?;
        Ok(out)
    }
}

/// Number-basis dephasing: keeps only diag(ρ).
pub fn measure(rho: &DensityOperator) -> DensityOperator {
    let n = rho.dim();
    DensityOperator::from_mat_unchecked(Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(rho.get(i, i).re, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// Re tr(ρH).
pub fn expected_energy(rho: &DensityOperator, h: &HermitianOperator) -> Result<f64> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            context: "expected_energy",
            expected: h.dim(),
            found: rho.dim(),
        });
    }
    let e = trace_of_product(rho.as_mat(), h.as_mat());
    if e.im.abs() >= 1e-10 {
        return Err(Error::Numerical(format!(
            "energy expectation has imaginary part {:.3e}",
            e.im
        )));
    }
    Ok(e.re)
}

/// tr(Φ(y)·ρ_thermal(ω_T)) on the grid, rows indexed by ω_T and columns by y.
pub fn interaction_energy_map(params: &EngineParams, omega_grid: &[f64], y_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    if omega_grid.is_empty() {
        return Err(Error::invalid("omega_grid", "must not be empty"));
    }
    if y_grid.is_empty() {
        return Err(Error::invalid("y_grid", "must not be empty"));
    }
    if let Some(y) = y_grid.iter().find(|y| !y.is_finite()) {
        return Err(Error::invalid("y_grid", format!("non-finite position {y}")));
    }
    let specs = omega_grid
        .iter()
        .map(|&w| ThermalSpec::new(w))
        .collect::<Result<Vec<_>>>()?;
    let model = EngineModel::new(params)?;
    let space = model.space();
    let g = model.piston_coupling();
    specs
        .par_iter()
        .map(|spec| {
            let rho = thermal_state(&space, spec);
            let base = expected_energy(&rho, g)?;
            Ok(y_grid.iter().map(|&y| params.piston_prefactor(y) * base).collect())
        })
        .collect()
}

/// Thermal state at the fluid cutoff of `params`, cutoff-checked by `policy`.
pub(crate) fn checked_thermal(
    params: &EngineParams,
    omega_t: f64,
    policy: &CutoffPolicy,
    what: &str,
) -> Result<DensityOperator> {
    let space = params.space()?;
    let (rho, status) = thermal_state_with_status(&space, &ThermalSpec::new(omega_t)?, policy);
    match status {
        CutoffStatus::Exceeded { population } => Err(Error::CutoffExceeded {
            population,
            limit: policy.fail.unwrap_or(f64::INFINITY),
            cycle: None,
        }),
        CutoffStatus::Warning { population } => {
            log::warn!(
                "{what}: top Fock population {population:.3e} exceeds {:.1e}",
                policy.warn
            );
            Ok(rho)
        }
        CutoffStatus::Clean => Ok(rho),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock;

    #[test]
    fn boltzmann_ratio() {
        let space = FockSpace::new(51).unwrap();
        let p = thermal_populations(&space, &ThermalSpec::new(5.0).unwrap());
        assert!((p[1] / p[0] - (-0.2f64).exp()).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cold_limit_is_ground_state() {
        let space = FockSpace::new(10).unwrap();
        let rho = thermal_state(&space, &ThermalSpec::new(0.01).unwrap());
        assert!((rho.get(0, 0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn policy_classification() {
        let p = CutoffPolicy::default();
        assert_eq!(p.classify(1e-12), CutoffStatus::Clean);
        assert!(matches!(p.classify(1e-6), CutoffStatus::Warning { .. }));
        assert!(matches!(p.classify(1e-3), CutoffStatus::Exceeded { .. }));
        assert!(matches!(
            CutoffPolicy::warn_only().classify(0.5),
            CutoffStatus::Warning { .. }
        ));
        assert!(p.enforce(1e-3, Some(7), "test").is_err());
        assert!(ThermalSpec::new(0.0).is_err());
        assert!(ThermalSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn kron_diagonal() {
        let a = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                c64::new(1.0 + i as f64, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let b = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new(10.0 * (1 + i) as f64, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let k = tensor_product(a.as_ref(), b.as_ref());
        let diag: Vec<f64> = (0..6).map(|i| k[(i, i)].re).collect();
        assert_eq!(diag, vec![10.0, 20.0, 30.0, 20.0, 40.0, 60.0]);
    }

    #[test]
    fn bell_marginal() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = [h, 0.0, 0.0, h];
        let m = Mat::from_fn(4, 4, |i, j| c64::new(v[i] * v[j], 0.0));
        let rho = DensityOperator::try_new(m).unwrap();
        let r = partial_trace_bath(&rho, 2).unwrap();
        assert!((r.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((r.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(r.get(0, 1).norm() < 1e-15);
        assert!(partial_trace_bath(&rho, 3).is_err());
    }

    #[test]
    fn measurement_erases_coherence() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = Mat::from_fn(2, 2, |_, _| c64::new(h * h, 0.0));
        let rho = DensityOperator::try_new(m).unwrap();
        let d = measure(&rho);
        assert!((d.get(0, 0).re - 0.5).abs() < 1e-15);
        assert_eq!(d.get(0, 1), c64::new(0.0, 0.0));
    }

    #[test]
    fn ground_energy() {
        let space = FockSpace::new(5).unwrap();
        let rho = DensityOperator::from_populations(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((expected_energy(&rho, &fock::bare_hamiltonian(&space)).unwrap() - 0.5).abs() < 1e-15);
    }
}
