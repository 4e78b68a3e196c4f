use dsmcf::discrete::{interpolate, Field, Grid};
use dsmcf::flow::{run, BcKind, FlowConfig, GraphState, Integrator};

fn bump(grid: Grid) -> GraphState {
    let f = Field::from_fn(grid, |x| 0.2 * (-x.iter().map(|c| c * c).sum::<f64>()).exp()).unwrap();
    GraphState::initial(f, BcKind::Slicing).unwrap()
}

fn center_at(state: &GraphState, cfg: &FlowConfig) -> f64 {
    let traj = run(state, cfg).unwrap();
    assert!(traj.failure.is_none());
    let last = traj.last();
    assert!((last.s - cfg.s_end).abs() < 1e-12);
    interpolate(&last.u, &vec![0.0; last.grid().dimension]).unwrap()
}

fn cfg(cfl: f64) -> FlowConfig {
    FlowConfig {
        integrator: Integrator::Rk2,
        cfl_safety: cfl,
        s_end: 0.05,
        snapshot_interval: Some(0.05),
        ..Default::default()
    }
}

#[test]
fn radial_and_cartesian_agree_at_the_center() {
    // the boundaries differ (circle vs square) but sit far from the origin for s <= 0.05
    let radial = center_at(&bump(Grid::radial(2, 3.0, 121).unwrap()), &cfg(0.5));
    let cart = center_at(&bump(Grid::cartesian(2, 3.0, 121).unwrap()), &cfg(0.5));
    let h = 6.0 / 120.0;
    assert!((radial - cart).abs() < 10.0 * h * h, "{radial} vs {cart}");
    assert!(radial > 0.2 && radial < 0.2 + 2.0 * 0.05 + 0.1);
}

#[test]
fn halving_the_cfl_changes_less_than_refining() {
    let coarse = Grid::radial(3, 3.0, 61).unwrap();
    let base = center_at(&bump(coarse), &cfg(0.8));
    let halved = center_at(&bump(coarse), &cfg(0.4));
    let refined = center_at(&bump(coarse.refined()), &cfg(0.8));
    let time_err = (base - halved).abs();
    let space_err = (base - refined).abs();
    assert!(time_err < space_err, "dt change {time_err:e}, h change {space_err:e}");
}

#[test]
fn integrators_agree_to_the_step_error() {
    let grid = Grid::radial(3, 3.0, 61).unwrap();
    let values: Vec<f64> = [Integrator::Euler, Integrator::Rk2, Integrator::Rk4]
        .into_iter()
        .map(|integrator| center_at(&bump(grid), &FlowConfig { integrator, ..cfg(0.5) }))
        .collect();
    let h = grid.spacing();
    for v in &values[1..] {
        assert!((v - values[0]).abs() < h * h, "{values:?}");
    }
}
