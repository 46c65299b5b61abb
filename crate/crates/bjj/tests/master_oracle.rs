//! Oracle checks for the block master-equation integrator: a dense
//! brute-force Liouvillian with no block structure, self-convergence under
//! tolerance halving, and the least-squares decomposition of the lossless
//! state into its coherent-state components.

mod common;

use bjj::exact::{evolve_master, lossless_evolve, master_rhs, BlockDensity, IntegratorConfig};
use bjj::fock::coherent_state;
use bjj::params::ModelParams;
use common::{max_elem_dev, DenseLindblad};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const PI: f64 = std::f64::consts::PI;

#[test]
fn block_cascade_matches_dense_liouvillian() {
    // All three channels open, energies asymmetric, N0 <= 8.
    for n0 in [4usize, 8] {
        let p = ModelParams::new(0.2, -0.1, 1.4, 0.7, 0.05, 0.06, 0.025, 0.04).unwrap();
        let t = 0.9;
        let dense = DenseLindblad::new(n0, &p);
        let rho0 = dense.coherent_density(PI / 2.0, 0.0);
        let exact = dense.evolve_rk4(&rho0, t, 20_000);

        let block0 = BlockDensity::from_pure(&coherent_state(n0, PI / 2.0, 0.0).unwrap());
        let cfg = IntegratorConfig { rtol: 1e-10, ..IntegratorConfig::default() };
        let block = evolve_master(&block0, t, &p, &cfg).unwrap();
        let dev = max_elem_dev(&dense.embed(&block), &exact);
        assert!(dev < 1e-8, "N0 = {n0}: deviation {dev:.3e} from dense oracle");
    }
}

#[test]
fn master_rhs_matches_dense_rhs_through_one_euler_step() {
    // Cross-check the public derivative against the dense generator on a
    // state with populated lower sectors (after some real evolution).
    let n0 = 6;
    let p = ModelParams::new(0.0, 0.1, 1.1, 0.9, 0.1, 0.08, 0.03, 0.05).unwrap();
    let dense = DenseLindblad::new(n0, &p);
    let block0 = BlockDensity::from_pure(&coherent_state(n0, PI / 2.0, 0.0).unwrap());
    let evolved = evolve_master(&block0, 0.5, &p, &IntegratorConfig::default()).unwrap();

    let drift = master_rhs(&evolved, &p);
    let h = 1e-6;
    let dense_now = dense.embed(&evolved);
    let dense_next = dense.evolve_rk4(&dense_now, h, 4);
    let fd = (dense_next - &dense_now) / Complex64::new(h, 0.0);
    let dev = max_elem_dev(&dense.embed(&drift), &fd);
    assert!(dev < 1e-5, "derivative deviation {dev:.3e}");
}

#[test]
fn self_convergence_under_tolerance_halving() {
    let g = 1.0 / (150.0 * PI);
    let p = ModelParams::from_chis(1.0, -1.0, g, 0.6 * g, 0.2 * g).unwrap();
    let n0 = 30;
    let rho0 = BlockDensity::from_pure(&coherent_state(n0, PI / 2.0, 0.0).unwrap());
    let t = p.t_q(2);
    let loose = evolve_master(&rho0, t, &p, &IntegratorConfig { rtol: 1e-8, ..Default::default() }).unwrap();
    let tight = evolve_master(&rho0, t, &p, &IntegratorConfig { rtol: 1e-11, ..Default::default() }).unwrap();
    let mut dev: f64 = 0.0;
    for (a, b) in loose.blocks().iter().zip(tight.blocks()) {
        dev = dev.max(max_elem_dev(a.mat(), b.mat()));
    }
    // the loose run is already accurate at its own tolerance scale
    assert!(dev < 1e-7, "tolerance halving drift {dev:.3e}");
}

#[test]
fn truncation_threshold_does_not_disturb_populated_blocks() {
    let g = 1.0 / (200.0 * PI);
    let p = ModelParams::from_chis(1.0, -1.0, g, g, 0.0).unwrap();
    let n0 = 24;
    let rho0 = BlockDensity::from_pure(&coherent_state(n0, PI / 2.0, 0.0).unwrap());
    let t = p.t_q(2);
    let full = evolve_master(&rho0, t, &p, &IntegratorConfig::default()).unwrap();
    let truncated = evolve_master(
        &rho0,
        t,
        &p,
        &IntegratorConfig { truncate_threshold: Some(1e-14), ..Default::default() },
    )
    .unwrap();
    for (a, b) in full.blocks().iter().zip(truncated.blocks()) {
        if a.weight() > 1e-10 {
            let dev = max_elem_dev(a.mat(), b.mat());
            assert!(dev < 1e-10, "sector {}: truncation drift {dev:.3e}", a.n_total());
        }
    }
}

#[test]
fn lossless_three_component_superposition_decomposes() {
    // At t3 = T/6 the state is a superposition of three coherent states;
    // project onto the three numerically-located components by least squares
    // and check the squared overlaps account for the full norm.
    let p = ModelParams::from_chis(1.0, -1.0, 0.0, 0.0, 0.0).unwrap();
    let n0 = 100;
    let t3 = p.t_q(3);
    let psi = lossless_evolve(&coherent_state(n0, PI / 2.0, 0.0).unwrap(), t3, &p);
    let peaks = common::overlap_peaks(&psi, 3);
    assert_eq!(peaks.len(), 3);

    // spacing 2 pi / 3
    let mut phis: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    phis.sort_by(f64::total_cmp);
    for w in phis.windows(2) {
        assert!(
            ((w[1] - w[0]) - 2.0 * PI / 3.0).abs() < 1e-6,
            "component spacing {:.6} != 2 pi/3",
            w[1] - w[0]
        );
    }

    // least squares: overlaps of the near-orthogonal components
    let dim = n0 + 1;
    let mut basis = DMatrix::zeros(dim, 3);
    for (k, &(phi, _)) in peaks.iter().enumerate() {
        let cs = coherent_state(n0, PI / 2.0, phi).unwrap();
        basis.set_column(k, cs.amps());
    }
    let gram = basis.adjoint() * &basis;
    let rhs_v: DVector<Complex64> = basis.adjoint() * psi.amps();
    let coeffs = gram.lu().solve(&rhs_v).expect("gram is invertible");
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    assert!((total - 1.0).abs() < 1e-9, "component weights sum to {total}");
    for c in coeffs.iter() {
        assert!(
            (c.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-6,
            "|c| = {} != 1/sqrt(3)",
            c.norm()
        );
    }
}

#[test]
fn underflowing_step_size_is_reported() {
    // An absurd tolerance forces the controller below the representable
    // step; the integrator reports stiffness instead of spinning.
    let p = ModelParams::from_chis(1.0, -1.0, 0.3, 0.3, 0.0).unwrap();
    let rho0 = BlockDensity::from_pure(&coherent_state(16, PI / 2.0, 0.0).unwrap());
    let cfg = IntegratorConfig { rtol: 1e-13, atol: 1e-308, ..Default::default() };
    match evolve_master(&rho0, 2.0, &p, &cfg) {
        Err(bjj::Error::StepSizeUnderflow { .. }) | Err(bjj::Error::ToleranceNotAchievable(_)) => {}
        Ok(_) => {} // tolerable: the scheme may still make it through
        Err(e) => panic!("unexpected error {e}"),
    }
    // rtol below f64 resolution is rejected up front
    let cfg = IntegratorConfig { rtol: 1e-15, ..Default::default() };
    assert!(matches!(
        evolve_master(&rho0, 1.0, &p, &cfg),
        Err(bjj::Error::ToleranceNotAchievable(_))
    ));
}
