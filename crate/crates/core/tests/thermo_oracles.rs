mod common;

use faer::Mat;
use proptest::prelude::*;
use qpiston_core::dynamics::hermitian_expm;
use qpiston_core::fock;
use qpiston_core::model::EngineModel;
use qpiston_core::thermo::{
    bath_collision, expected_energy, interaction_energy_map, measure, partial_trace_bath, tensor_density,
    tensor_product, thermal_populations, thermal_state, thermal_state_with_status, CollisionChannel,
};
use qpiston_core::{
    c64, CutoffPolicy, CutoffStatus, DensityOperator, EngineParams, FockSpace, HermitianOperator, ThermalSpec,
    UnitaryOperator,
};

fn spec(w: f64) -> ThermalSpec {
    ThermalSpec::new(w).unwrap()
}

#[test]
fn boltzmann_factor() {
    let p = thermal_populations(&FockSpace::new(51).unwrap(), &spec(5.0));
    assert!((p[1] / p[0] - 0.8187).abs() < 1e-4);
    assert!(p.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn zero_temperature_limit() {
    let rho = thermal_state(&FockSpace::new(51).unwrap(), &spec(0.01));
    assert_eq!(rho.get(0, 0).re, 1.0);
    assert!((1..51).all(|j| rho.get(j, j).re < 1e-43));
}

#[test]
fn top_population_against_geometric_series() {
    let r = (-1.0f64 / 5.0).exp();
    for n in [11usize, 51] {
        let oracle = r.powi(n as i32 - 1) * (1.0 - r) / (1.0 - r.powi(n as i32));
        let p = thermal_populations(&FockSpace::new(n).unwrap(), &spec(5.0));
        assert!((p[n - 1] - oracle).abs() < 1e-15 * oracle.max(1e-300) * 100.0);
    }
    let policy = CutoffPolicy::default();
    let (_, at51) = thermal_state_with_status(&FockSpace::new(51).unwrap(), &spec(5.0), &policy);
    let (_, at11) = thermal_state_with_status(&FockSpace::new(11).unwrap(), &spec(5.0), &policy);
    assert!(matches!(at51, CutoffStatus::Warning { population } if population < 1e-4));
    assert!(matches!(at11, CutoffStatus::Exceeded { .. }));
    let (_, cold) = thermal_state_with_status(&FockSpace::new(51).unwrap(), &spec(0.1), &policy);
    assert_eq!(cold, CutoffStatus::Clean);
}

#[test]
fn bose_einstein_energy() {
    let space = FockSpace::new(400).unwrap();
    let rho = thermal_state(&space, &spec(5.0));
    let e = expected_energy(&rho, &fock::bare_hamiltonian(&space)).unwrap();
    let oracle = 0.5 + 1.0 / ((0.2f64).exp() - 1.0);
    assert!((e - oracle).abs() < 1e-12);
    assert!((e - 5.0166).abs() < 1e-4);
    let ground = DensityOperator::from_populations(&[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(
        expected_energy(&ground, &fock::bare_hamiltonian(&FockSpace::new(3).unwrap())).unwrap(),
        0.5
    );
}

#[test]
fn tensor_identity_and_diagonals() {
    let id = tensor_product(Mat::<c64>::identity(3, 3).as_ref(), Mat::<c64>::identity(4, 4).as_ref());
    assert_eq!(
        common::max_diff(id.as_ref(), Mat::<c64>::identity(12, 12).as_ref()),
        0.0
    );
    let a = DensityOperator::from_populations(&[0.25, 0.75]).unwrap();
    let b = DensityOperator::from_populations(&[0.1, 0.2, 0.7]).unwrap();
    let ab = tensor_density(&a, &b);
    let (pa, pb) = ([0.25, 0.75], [0.1, 0.2, 0.7]);
    for i in 0..6 {
        assert_eq!(ab.get(i, i).re, pa[i / 3] * pb[i % 3]);
        for j in 0..6 {
            if i != j {
                assert_eq!(ab.get(i, j).norm(), 0.0);
            }
        }
    }
}

/// Σ_k ρ[(j,k),(j',k)] with plain nested loops.
fn index_sum_trace(m: &[Vec<c64>], nf: usize, nb: usize) -> Vec<Vec<c64>> {
    let mut out = vec![vec![c64::new(0.0, 0.0); nf]; nf];
    for j in 0..nf {
        for jp in 0..nf {
            for k in 0..nb {
                out[j][jp] += m[j * nb + k][jp * nb + k];
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kron_matches_four_index_loop((re, im) in common::entries(2), (re2, im2) in common::entries(2)) {
        let a = common::hermitian_from(2, &re, &im);
        let b = common::hermitian_from(2, &re2, &im2);
        let k = tensor_product(a.as_mat(), b.as_mat());
        for i in 0..2 { for j in 0..2 { for p in 0..2 { for q in 0..2 {
            prop_assert_eq!(k[(i * 2 + p, j * 2 + q)], a.get(i, j) * b.get(p, q));
        }}}}
    }

    #[test]
    fn marginal_of_product_is_factor((re, im) in common::entries(4), (re2, im2) in common::entries(3)) {
        let a = common::density_from(4, &re, &im);
        let b = common::density_from(3, &re2, &im2);
        let back = partial_trace_bath(&tensor_density(&a, &b), 4).unwrap();
        prop_assert!(common::max_diff(back.as_mat(), a.as_mat()) < 1e-12);
    }

    #[test]
    fn partial_trace_matches_index_sum((re, im) in common::entries(9), (ure, uim) in common::entries(9)) {
        let rho = common::density_from(9, &re, &im);
        let u = common::unitary_from(9, &ure, &uim);
        let mixed = qpiston_core::dynamics::conjugate_density(&rho, &u).unwrap();
        let nested: Vec<Vec<c64>> = (0..9).map(|i| (0..9).map(|j| mixed.get(i, j)).collect()).collect();
        let oracle = index_sum_trace(&nested, 3, 3);
        let got = partial_trace_bath(&mixed, 3).unwrap();
        prop_assert!((got.trace().re - 1.0).abs() < 1e-12);
        for j in 0..3 { for jp in 0..3 {
            prop_assert!((got.get(j, jp) - oracle[j][jp]).norm() < 1e-12);
        }}
    }

    #[test]
    fn measurement_is_a_pinching((re, im) in common::entries(6)) {
        let rho = common::density_from(6, &re, &im);
        let d = measure(&rho);
        prop_assert_eq!(&measure(&d), &d);
        prop_assert!(d.purity() <= rho.purity() + 1e-15);
        prop_assert!((d.trace().re - rho.trace().re).abs() < 1e-15);
        d.validate("measure").unwrap();
    }

    #[test]
    fn kraus_channel_matches_literal_collision(
        (re, im) in common::entries(5),
        (hre, him) in common::entries(25),
        omega in 0.1f64..5.0,
    ) {
        let rho = common::density_from(5, &re, &im);
        let bath = thermal_state(&FockSpace::new(5).unwrap(), &spec(omega));
        let b = hermitian_expm(&common::hermitian_from(25, &hre, &him), 0.8).unwrap();
        let literal = bath_collision(&rho, &bath, &b, 5).unwrap();
        let fast = CollisionChannel::from_bath_state(&b, &bath, 5).unwrap().apply(&rho).unwrap();
        prop_assert!(common::max_diff(literal.as_mat(), fast.as_mat()) < 1e-12);
        prop_assert!((fast.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(fast.min_eigenvalue().unwrap() >= -1e-8);
        prop_assert!(fast.hermiticity_defect() <= 1e-10);
    }
}

fn bath_unitary(p: &EngineParams, y: f64) -> UnitaryOperator {
    let model = EngineModel::new(p).unwrap();
    hermitian_expm(&model.composite_bath_hamiltonian(y).unwrap(), p.tau_b).unwrap()
}

#[test]
fn engine_channel_matches_literal_collision() {
    let p = EngineParams::new(0.5, 5.0).with_cutoff(8);
    let b = bath_unitary(&p, 0.0);
    let space = p.space().unwrap();
    let rho = thermal_state(&space, &spec(0.7));
    for omega in [0.1, 5.0] {
        let bath = thermal_state(&space, &spec(omega));
        let literal = bath_collision(&rho, &bath, &b, 8).unwrap();
        let channel = CollisionChannel::from_bath_state(&b, &bath, 8).unwrap();
        let fast = channel.apply(&rho).unwrap();
        assert!(common::max_diff(literal.as_mat(), fast.as_mat()) < 1e-12);
        assert!((channel.retained_weight() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn decoupled_collision_is_free_evolution() {
    let mut p = EngineParams::new(0.5, 5.0).with_cutoff(6);
    p.y_amp = 0.0;
    let b = bath_unitary(&p, 0.0);
    let space = p.space().unwrap();
    let h = common::hermitian_from(6, &[0.3; 36], &[0.2; 36]);
    let rho = DensityOperator::pure(&h.ground_state().unwrap().1);
    let out = bath_collision(&rho, &thermal_state(&space, &spec(2.0)), &b, 6).unwrap();
    let before = common::jacobi_eigenvalues(rho.as_mat());
    let after = common::jacobi_eigenvalues(out.as_mat());
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn heat_flows_from_hot_to_cold() {
    let p = EngineParams::new(0.5, 5.0).with_cutoff(21);
    let space = p.space().unwrap();
    let model = EngineModel::new(&p).unwrap();

    let h_a = model.hamiltonian(0.0);
    let b_a = bath_unitary(&p, 0.0);
    let cold = thermal_state(&space, &spec(0.1));
    let hot = thermal_state(&space, &spec(5.0));
    let heated = bath_collision(&cold, &hot, &b_a, 21).unwrap();
    assert!(expected_energy(&heated, &h_a).unwrap() > expected_energy(&cold, &h_a).unwrap());

    let h_r = model.hamiltonian(p.y_retracted);
    let b_r = bath_unitary(&p, p.y_retracted);
    let cooled = bath_collision(&hot, &cold, &b_r, 21).unwrap();
    assert!(expected_energy(&cooled, &h_r).unwrap() < expected_energy(&hot, &h_r).unwrap());
}

#[test]
fn interaction_map_shape_and_limits() {
    let p = EngineParams::new(0.5, 10.0);
    let omegas = [0.1, 0.5, 1.0, 2.0, 5.0];
    let ys: Vec<f64> = (0..=10).map(|i| i as f64 * p.sigma).collect();
    let map = interaction_energy_map(&p, &omegas, &ys).unwrap();
    assert_eq!(map.len(), omegas.len());
    for row in &map {
        assert_eq!(row.len(), ys.len());
        assert!(row[10].abs() < 1e-9);
        assert!(row.windows(2).all(|w| w[1].abs() <= w[0].abs()));
    }
    for c in 0..ys.len() {
        assert!(map.windows(2).all(|w| w[1][c].abs() <= w[0][c].abs()));
    }

    // one pixel directly
    let model = EngineModel::new(&p).unwrap();
    let rho = thermal_state(&model.space(), &spec(1.0));
    let direct = expected_energy(&rho, &model.interaction(0.0)).unwrap();
    assert!((map[2][0] - direct).abs() < 1e-13);

    let wide = EngineParams::new(2.0, 10.0);
    let cold = interaction_energy_map(&wide, &[1e-3], &[0.0]).unwrap()[0][0];
    assert!(cold > -5.0 && cold < -4.5, "{cold}");

    assert!(interaction_energy_map(&p, &[], &ys).is_err());
    assert!(interaction_energy_map(&p, &omegas, &[]).is_err());
    assert!(interaction_energy_map(&p, &[-1.0], &ys).is_err());
}

#[test]
fn dimension_errors() {
    let rho = DensityOperator::from_populations(&[0.5, 0.5]).unwrap();
    let h = HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0]);
    assert!(expected_energy(&rho, &h).is_err());
    assert!(bath_collision(&rho, &rho, &UnitaryOperator::identity(5), 2).is_err());
    assert!(partial_trace_bath(&rho, 0).is_err());
}
