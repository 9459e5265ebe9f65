//! Shared fixtures for the kernel benchmarks.

use qpiston_core::dynamics::hermitian_expm;
use qpiston_core::engine::initial_state;
use qpiston_core::model::EngineModel;
use qpiston_core::thermo::{thermal_state, CollisionChannel};
use qpiston_core::{DensityOperator, EngineParams, ThermalSpec};

/// Standard parameters (σ = 1/2) at a reduced cutoff and stroke time.
pub fn params(cutoff: usize, tau_p: f64) -> EngineParams {
    EngineParams::new(0.5, tau_p).with_cutoff(cutoff)
}

/// Hot collision channel and a cold thermal fluid state at the given cutoff.
pub fn channel_fixture(cutoff: usize) -> (CollisionChannel, DensityOperator) {
    let p = params(cutoff, 1.0);
    let model = EngineModel::new(&p).expect("valid parameters");
    let b = hermitian_expm(
        &model
            .composite_bath_hamiltonian(p.y_advanced)
            .expect("composite Hamiltonian"),
        p.tau_b,
    )
    .expect("bath unitary");
    let bath = thermal_state(&model.space(), &ThermalSpec::new(p.omega_hot).expect("positive ω"));
    let channel = CollisionChannel::from_bath_state(&b, &bath, cutoff).expect("diagonal bath");
    (channel, initial_state(&p).expect("initial state"))
}
