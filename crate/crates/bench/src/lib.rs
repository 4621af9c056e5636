//! Fixtures shared by the kernel benchmarks.

use faraday_core::evolution::compatible_bump_state;
use faraday_core::green::GREEN_CFL;
use faraday_core::{Bump, FieldState, Green, Grid, GridSpec, History, Maxwell, MetricField, TimeGrid};

/// Box `[0,1]^{n-1}` with `cells` per axis, CFL 0.4 nominal step.
pub fn system(n: usize, k: usize, cells: usize, metric: MetricField) -> Maxwell {
    let h = 1.0 / cells as f64;
    let grid = Grid::new(GridSpec::cube(n, cells, 1.0, 0.4 * h)).expect("grid");
    Maxwell::new(grid, metric, k).expect("system")
}

pub fn bump_state(sys: &Maxwell) -> FieldState {
    compatible_bump_state(sys, &Bump::centred(sys.grid()), 1, 0.0).expect("bump data")
}

/// Green operator for `n = 3, k = 2` over `[0, 0.8]` and a smooth pulse history.
pub fn green_with_pulse(cells: usize) -> (Green, History) {
    let h = 1.0 / cells as f64;
    let sys = system(3, 2, cells, MetricField::unit());
    let time = TimeGrid::covering(0.0, 0.8, GREEN_CFL * h).expect("time grid");
    let g = Green::new(sys, time, GREEN_CFL).expect("green");
    let bump = Bump { center: vec![0.5, 0.5], radius: 0.4, power: 6 };
    let w = g.pulse(&bump, 3, 0.4, 0.2).expect("pulse");
    (g, w)
}
