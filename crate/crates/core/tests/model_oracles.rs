mod common;

use qpiston_core::fock::{self, gaussian_coupling_matrix};
use qpiston_core::model::{
    composite_bath_hamiltonian, engine_hamiltonian, piston_interaction, piston_position, EngineModel,
};
use qpiston_core::{EngineParams, FockSpace, PistonTrajectory};

#[test]
fn trajectory_endpoints_and_midpoint() {
    let t = PistonTrajectory::new(0.0, 5.0, 10.0).unwrap();
    assert_eq!(piston_position(&t, 0.0).unwrap(), 0.0);
    assert_eq!(piston_position(&t, 10.0).unwrap(), 5.0);
    assert_eq!(piston_position(&t, 5.0).unwrap(), 2.5);
    assert!(piston_position(&t, 10.5).is_err());
    assert!(piston_position(&t, -0.1).is_err());
    assert!(PistonTrajectory::new(0.0, 1.0, 0.0).is_err());
}

#[test]
fn interaction_scaling() {
    let p = EngineParams::new(0.5, 10.0);
    let model = EngineModel::new(&p).unwrap();
    let g = model.piston_coupling();
    let at0 = piston_interaction(&p, g, 0.0);
    let far = piston_interaction(&p, g, 100.0 * p.sigma);
    for j in 0..51 {
        for k in 0..51 {
            assert_eq!(at0.get(j, k), g.get(j, k) * -5.0);
            assert!(far.get(j, k).norm() < 1e-300);
        }
    }
    assert!((p.piston_prefactor(p.sigma) - (-5.0 * (-0.5f64).exp())).abs() < 1e-15);
    assert!((p.piston_prefactor(p.sigma) + 3.0327).abs() < 1e-4);
}

#[test]
fn engine_hamiltonian_limits() {
    let mut p = EngineParams::new(0.5, 10.0);
    let bare = fock::bare_hamiltonian(&p.space().unwrap());

    let retracted = engine_hamiltonian(&p, p.y_retracted).unwrap();
    assert!((retracted.ground_state().unwrap().0 - 0.5).abs() < 1e-6);

    let gone = engine_hamiltonian(&p, 100.0 * p.sigma).unwrap();
    assert!(common::max_diff(gone.as_mat(), bare.as_mat()) < 1e-12);

    p.phi0 = 0.0;
    let free = engine_hamiltonian(&p, 0.0).unwrap();
    assert_eq!(common::max_diff(free.as_mat(), bare.as_mat()), 0.0);

    let wide = EngineParams::new(2.0, 10.0);
    assert!(engine_hamiltonian(&wide, 0.0).unwrap().ground_state().unwrap().0 < -3.0);
}

fn brute_force_composite(p: &EngineParams, y: f64) -> Vec<Vec<f64>> {
    let space = FockSpace::new(p.cutoff).unwrap();
    let n = p.cutoff;
    let rule = space.default_quadrature();
    let g = gaussian_coupling_matrix(&space, p.sigma, 0.0, &rule).unwrap();
    let yx = gaussian_coupling_matrix(&space, p.lambda, p.x0, &rule).unwrap();
    let yz = gaussian_coupling_matrix(&space, p.lambda, p.z0, &rule).unwrap();
    let pre = p.phi0 * (-y * y / (2.0 * p.sigma * p.sigma)).exp();
    let mut h = vec![vec![0.0; n * n]; n * n];
    for j in 0..n {
        for k in 0..n {
            for jp in 0..n {
                for kp in 0..n {
                    let mut v = p.y_amp * yx.get(j, jp).re * yz.get(k, kp).re;
                    if k == kp {
                        v += pre * g.get(j, jp).re;
                        if j == jp {
                            v += j as f64 + 0.5;
                        }
                    }
                    if j == jp && k == kp {
                        v += k as f64 + 0.5;
                    }
                    h[j * n + k][jp * n + kp] = v;
                }
            }
        }
    }
    h
}

#[test]
fn composite_matches_index_loops() {
    let p = EngineParams::new(0.5, 10.0).with_cutoff(4);
    for y in [0.0, 0.3, p.y_retracted] {
        let h = composite_bath_hamiltonian(&p, y).unwrap();
        assert_eq!(h.dim(), 16);
        let oracle = brute_force_composite(&p, y);
        for r in 0..16 {
            for c in 0..16 {
                assert!((h.get(r, c).re - oracle[r][c]).abs() < 1e-14);
                assert_eq!(h.get(r, c).im, 0.0);
            }
        }
        let mine = h.eigenvalues().unwrap();
        let reference = common::jacobi_eigenvalues(h.as_mat());
        for (a, b) in mine.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn composite_dimension_at_default_cutoff() {
    let p = EngineParams::new(0.5, 10.0);
    let model = EngineModel::new(&p).unwrap();
    let m = model.composite_bath_real(0.0);
    assert_eq!((m.nrows(), m.ncols()), (2601, 2601));
}

#[test]
fn decoupled_composite_spectrum_is_pairwise_sums() {
    let mut p = EngineParams::new(0.5, 10.0).with_cutoff(6);
    p.y_amp = 0.0;
    let fluid = engine_hamiltonian(&p, 0.2).unwrap().eigenvalues().unwrap();
    let mut sums: Vec<f64> = fluid
        .iter()
        .flat_map(|a| (0..6).map(move |k| a + k as f64 + 0.5))
        .collect();
    sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let spectrum = composite_bath_hamiltonian(&p, 0.2).unwrap().eigenvalues().unwrap();
    for (a, b) in spectrum.iter().zip(&sums) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn swap_symmetry_without_piston() {
    let mut p = EngineParams::new(0.5, 10.0).with_cutoff(7);
    p.phi0 = 0.0;
    let h = composite_bath_hamiltonian(&p, 0.0).unwrap();
    let n = 7;
    for j in 0..n {
        for k in 0..n {
            for jp in 0..n {
                for kp in 0..n {
                    let a = h.get(j * n + k, jp * n + kp);
                    let b = h.get(k * n + j, kp * n + jp);
                    assert!((a - b).norm() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn params_validation_names_field() {
    let mut p = EngineParams::new(-1.0, 10.0);
    let err = p.validate().unwrap_err().to_string();
    assert!(err.contains("sigma"), "{err}");
    p.sigma = 0.5;
    p.tau_b = 0.0;
    assert!(p.validate().unwrap_err().to_string().contains("tau_b"));
    assert!(EngineParams::new(0.5, 10.0).with_cutoff(1).validate().is_err());
}
