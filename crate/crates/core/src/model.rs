//! Engine Hamiltonians: the piston-coupled working fluid and the composite
//! fluid–bath system used during bath contact.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::dynamics::HamiltonianSource;
use crate::error::{Error, Result};
use crate::fock::{self, FockSpace};
use crate::operator::HermitianOperator;

/// Constant-speed piston ramp y(τ) = y_init + τ(y_final − y_init)/τ_p.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PistonTrajectory {
    pub y_init: f64,
    pub y_final: f64,
    pub tau_p: f64,
}

impl PistonTrajectory {
    pub fn new(y_init: f64, y_final: f64, tau_p: f64) -> Result<Self> {
        if !(tau_p > 0.0) || !tau_p.is_finite() {
            return Err(Error::invalid("tau_p", format!("must be positive, got {tau_p}")));
        }
        if !y_init.is_finite() || !y_final.is_finite() {
            return Err(Error::invalid("y", "piston endpoints must be finite"));
        }
        Ok(PistonTrajectory { y_init, y_final, tau_p })
    }

    /// Piston position at time `tau` ∈ [0, τ_p].
    pub fn position(&self, tau: f64) -> Result<f64> {
        if !(0.0..=self.tau_p).contains(&tau) {
            return Err(Error::invalid(
                "tau",
                format!("{tau} outside the ramp [0, {}]", self.tau_p),
            ));
        }
        Ok(self.position_unchecked(tau))
    }

    pub(crate) fn position_unchecked(&self, tau: f64) -> f64 {
        self.y_init + tau * (self.y_final - self.y_init) / self.tau_p
    }

    pub fn reversed(&self) -> Self {
        PistonTrajectory {
            y_init: self.y_final,
            y_final: self.y_init,
            tau_p: self.tau_p,
        }
    }
}

/// Free-function form of [`PistonTrajectory::position`].
pub fn piston_position(traj: &PistonTrajectory, tau: f64) -> Result<f64> {
    traj.position(tau)
}

/// Physical and protocol parameters of the engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    /// Piston interaction amplitude Φ0 (ħΩ); negative is attractive.
    pub phi0: f64,
    /// Piston interaction width σ.
    pub sigma: f64,
    pub y_advanced: f64,
    pub y_retracted: f64,
    /// Bath-coupling offset of the fluid coordinate (x0).
    pub x0: f64,
    /// Bath-coupling offset of the bath coordinate (z0).
    pub z0: f64,
    /// Bath-coupling width λ.
    pub lambda: f64,
    /// Bath-coupling amplitude Y0.
    pub y_amp: f64,
    pub omega_hot: f64,
    pub omega_cold: f64,
    /// Piston stroke duration in oscillator periods.
    pub tau_p: f64,
    /// Bath contact time.
    pub tau_b: f64,
    /// Fock cutoff N for fluid and bath oscillators.
    pub cutoff: usize,
}

impl EngineParams {
    /// Standard configuration for a given width and stroke time: Φ0 = −5,
    /// piston between 0 and 10σ, x0 = z0 = λ = Y0 = 1, ω_hot = 5,
    /// ω_cold = 0.1, τ_b = τ_p, N = 51.
    pub fn new(sigma: f64, tau_p: f64) -> Self {
        EngineParams {
            phi0: -5.0,
            sigma,
            y_advanced: 0.0,
            y_retracted: 10.0 * sigma,
            x0: 1.0,
            z0: 1.0,
            lambda: 1.0,
            y_amp: 1.0,
            omega_hot: 5.0,
            omega_cold: 0.1,
            tau_p,
            tau_b: tau_p,
            cutoff: 51,
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        }
        fn finite(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite, got {v}")))
            }
        }
        positive("sigma", self.sigma)?;
        positive("lambda", self.lambda)?;
        positive("tau_p", self.tau_p)?;
        positive("tau_b", self.tau_b)?;
        positive("omega_hot", self.omega_hot)?;
        positive("omega_cold", self.omega_cold)?;
        finite("phi0", self.phi0)?;
        finite("y_advanced", self.y_advanced)?;
        finite("y_retracted", self.y_retracted)?;
        finite("x0", self.x0)?;
        finite("z0", self.z0)?;
        finite("y_amp", self.y_amp)?;
        FockSpace::new(self.cutoff).map(|_| ())
    }

    pub fn space(&self) -> Result<FockSpace> {
        FockSpace::new(self.cutoff)
    }

    pub fn retraction(&self) -> Result<PistonTrajectory> {
        PistonTrajectory::new(self.y_advanced, self.y_retracted, self.tau_p)
    }

    pub fn advance(&self) -> Result<PistonTrajectory> {
        PistonTrajectory::new(self.y_retracted, self.y_advanced, self.tau_p)
    }

    /// Φ0·exp(−y²/(2σ²)).
    pub fn piston_prefactor(&self, y: f64) -> f64 {
        self.phi0 * (-y * y / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Φ0·exp(−y²/(2σ²))·G for a cached centre-0, width-σ coupling matrix G.
pub fn piston_interaction(params: &EngineParams, coupling_matrix: &HermitianOperator, y: f64) -> HermitianOperator {
    coupling_matrix.scaled(params.piston_prefactor(y))
}

/// H0 + Φ(x̂, y).
pub fn engine_hamiltonian(params: &EngineParams, y: f64) -> Result<HermitianOperator> {
    Ok(EngineModel::new(params)?.hamiltonian(y))
}

/// [H0 + Φ(y)] ⊗ 1 + 1 ⊗ H0 + Y0·Y_x ⊗ Y_z, fluid index slow.
pub fn composite_bath_hamiltonian(params: &EngineParams, y: f64) -> Result<HermitianOperator> {
    EngineModel::new(params)?.composite_bath_hamiltonian(y)
}

/// Single-oscillator matrices for one parameter set, computed once.
#[derive(Clone, Debug)]
pub struct EngineModel {
    params: EngineParams,
    space: FockSpace,
    bare: Vec<f64>,
    /// ⟨j|exp(−x̂²/2σ²)|k⟩
    piston_coupling: HermitianOperator,
    /// ⟨j|exp(−(x̂ − x0)²/2λ²)|k⟩
    bath_coupling_fluid: HermitianOperator,
    /// ⟨j|exp(−(ẑ − z0)²/2λ²)|k⟩
    bath_coupling_bath: HermitianOperator,
}

impl EngineModel {
    pub fn new(params: &EngineParams) -> Result<Self> {
        params.validate()?;
        let space = params.space()?;
        let rule = space.default_quadrature();
        let piston_coupling = fock::gaussian_coupling_matrix(&space, params.sigma, 0.0, &rule)?;
        let bath_coupling_fluid = fock::gaussian_coupling_matrix(&space, params.lambda, params.x0, &rule)?;
        let bath_coupling_bath = if params.z0 == params.x0 {
            bath_coupling_fluid.clone()
        } else {
            fock::gaussian_coupling_matrix(&space, params.lambda, params.z0, &rule)?
        };
        Ok(EngineModel {
            params: params.clone(),
            space,
            bare: fock::bare_energies(&space),
            piston_coupling,
            bath_coupling_fluid,
            bath_coupling_bath,
        })
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn bare_hamiltonian(&self) -> HermitianOperator {
        HermitianOperator::from_diagonal(&self.bare)
    }

    pub fn piston_coupling(&self) -> &HermitianOperator {
        &self.piston_coupling
    }

    pub fn interaction(&self, y: f64) -> HermitianOperator {
        piston_interaction(&self.params, &self.piston_coupling, y)
    }

    pub fn hamiltonian(&self, y: f64) -> HermitianOperator {
        let mut m = self.interaction(y).into_mat();
        for (j, e) in self.bare.iter().enumerate() {
            m[(j, j)] += c64::new(*e, 0.0);
        }
        HermitianOperator::from_mat_unchecked(m)
    }

    /// Real symmetric composite Hamiltonian (all constituents are real).
    pub fn composite_bath_real(&self, y: f64) -> Mat<f64> {
        let n = self.space.dim();
        let fluid = self.hamiltonian(y).real_part();
        let yf = self.bath_coupling_fluid.real_part();
        let yb = self.bath_coupling_bath.real_part();
        let amp = self.params.y_amp;
        Mat::from_fn(n * n, n * n, |r, c| {
            let (j, k) = (r / n, r % n);
            let (jp, kp) = (c / n, c % n);
            let mut v = amp * yf[(j, jp)] * yb[(k, kp)];
            if k == kp {
                v += fluid[(j, jp)];
            }
            if j == jp && k == kp {
                v += self.bare[k];
            }
            v
        })
    }

    pub fn composite_bath_hamiltonian(&self, y: f64) -> Result<HermitianOperator> {
        HermitianOperator::from_real_symmetric(&self.composite_bath_real(y))
    }

    /// Time-dependent Hamiltonian of a piston ramp.
    pub fn ramp(&self, trajectory: PistonTrajectory) -> PistonRamp {
        PistonRamp {
            sigma: self.params.sigma,
            phi0: self.params.phi0,
            bare: self.bare.clone(),
            coupling: self.piston_coupling.as_mat().to_owned(),
            trajectory,
        }
    }
}

/// H(τ) = diag(j + 1/2) + Φ0·exp(−y(τ)²/2σ²)·G along a [`PistonTrajectory`],
/// with τ measured from the start of the ramp.
#[derive(Clone, Debug)]
pub struct PistonRamp {
    sigma: f64,
    phi0: f64,
    bare: Vec<f64>,
    coupling: Mat<c64>,
    trajectory: PistonTrajectory,
}

impl PistonRamp {
    pub fn trajectory(&self) -> &PistonTrajectory {
        &self.trajectory
    }

    fn prefactor(&self, tau: f64) -> f64 {
        let y = self.trajectory.position_unchecked(tau);
        self.phi0 * (-y * y / (2.0 * self.sigma * self.sigma)).exp()
    }
}

impl HamiltonianSource for PistonRamp {
    fn dim(&self) -> usize {
        self.bare.len()
    }

    fn diagonal(&self) -> &[f64] {
        &self.bare
    }

    fn apply_remainder(&self, tau: f64, x: MatRef<'_, c64>, out: MatMut<'_, c64>, alpha: c64) {
        let s = self.prefactor(tau);
        matmul(out, Accum::Replace, self.coupling.as_ref(), x, alpha * s, Par::Seq);
    }

    fn hamiltonian(&self, tau: f64) -> HermitianOperator {
        let s = self.prefactor(tau);
        let n = self.dim();
        HermitianOperator::from_mat_unchecked(Mat::from_fn(n, n, |i, j| {
            let mut v = self.coupling[(i, j)] * s;
            if i == j {
                v += c64::new(self.bare[i], 0.0);
            }
            v
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_endpoints_and_midpoint() {
        let t = PistonTrajectory::new(0.0, 5.0, 10.0).unwrap();
        assert_eq!(piston_position(&t, 0.0).unwrap(), 0.0);
        assert_eq!(piston_position(&t, 10.0).unwrap(), 5.0);
        assert_eq!(piston_position(&t, 5.0).unwrap(), 2.5);
        assert!(t.position(-0.1).is_err());
        assert!(t.position(10.1).is_err());
        assert!(PistonTrajectory::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn defaults() {
        let p = EngineParams::new(0.5, 10.0);
        assert_eq!(p.phi0, -5.0);
        assert_eq!(p.y_retracted, 5.0);
        assert_eq!(p.tau_b, 10.0);
        assert_eq!(p.cutoff, 51);
        p.validate().unwrap();
    }

    #[test]
    fn validation_names_field() {
        let mut p = EngineParams::new(0.5, 10.0);
        p.sigma = -1.0;
        match p.validate() {
            Err(Error::InvalidArgument { name, .. }) => assert_eq!(name, "sigma"),
            other => panic!("unexpected {other:?}"),
        }
        let mut p = EngineParams::new(0.5, 10.0);
        p.tau_b = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn prefactor_at_one_sigma() {
        let p = EngineParams::new(0.5, 10.0);
        // −5·e^(−1/2)
        assert!((p.piston_prefactor(0.5) - (-3.032_653_298_563_167)).abs() < 1e-12);
        assert_eq!(p.piston_prefactor(0.0), -5.0);
        assert!(p.piston_prefactor(50.0).abs() < 1e-300);
    }
}
