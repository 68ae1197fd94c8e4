use std::f64::consts::FRAC_PI_4;

use quditvar::circuit::AnsatzKind;
use quditvar::models::{BbhParams, ModelDescriptor};
use quditvar::vte::{run_vte, ParamInit, VteConfig, VteTrajectory};
use quditvar::EncodingKind;

fn swap_scenario(dt: f64, t_total: f64) -> VteTrajectory {
    let model = ModelDescriptor::Bbh(BbhParams::new(FRAC_PI_4, 2));
    let mut cfg = VteConfig::new(model, EncodingKind::Symmetry, AnsatzKind::TotalSpin, 8, t_total);
    cfg.dt = dt;
    cfg.initial_state = "fock:0,2".into();
    cfg.initial_params = ParamInit::Mirrored { seed: 7, width: 0.5 };
    cfg.references = vec![vec![0, 2], vec![2, 0], vec![1, 1]];
    cfg.track = vec!["S_tot_z".into()];
    run_vte(&cfg).unwrap()
}

#[test]
fn halving_the_step_barely_moves_the_final_fidelity() {
    let coarse = swap_scenario(0.02, 6.0);
    let fine = swap_scenario(0.01, 6.0);
    assert_eq!(coarse.times.len(), 301);
    assert_eq!(fine.times.len(), 601);
    let diff = (coarse.fidelity.last().unwrap() - fine.fidelity.last().unwrap()).abs();
    assert!(diff < 1e-3, "final fidelity moved by {diff}");
}

#[test]
fn whole_trajectory_follows_the_exact_state() {
    let traj = swap_scenario(0.01, 6.0);
    assert!(traj.min_fidelity() >= 0.95, "min fidelity {}", traj.min_fidelity());
    for p in &traj.exact_populations {
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "exact populations sum to {total}");
    }
}

#[test]
fn total_sz_is_constant() {
    let traj = swap_scenario(0.01, 2.0);
    let first = traj.observables[0][0];
    for row in &traj.observables {
        assert!((row[0] - first).abs() < 1e-8);
    }
}

#[test]
fn swap_scenario_is_deterministic() {
    let a = swap_scenario(0.02, 0.5);
    let b = swap_scenario(0.02, 0.5);
    assert_eq!(a.params, b.params);
    assert_eq!(a.populations, b.populations);
}
