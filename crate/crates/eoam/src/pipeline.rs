//! Offline precompute: optimize the grid, then assemble diagrams and tables.

use std::fmt::Write as _;

use eoam_core::dmm::{build_lookup_tables, build_phase_diagram, LookupTable3D, PhaseDiagram};
use eoam_core::optimizer::{plan_point, GridEntry, GridPoint};
use eoam_core::vehicle::VehicleParams;
use rayon::prelude::*;

use crate::config::GridSpec;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone)]
pub struct Precomputed {
    pub grid: Vec<GridEntry>,
    pub table: LookupTable3D,
    pub diagrams: Vec<PhaseDiagram>,
    /// One line per grid point.
    pub solver_log: String,
    pub succeeded: usize,
}

/// Thread pool with `workers` threads, or one per core when zero.
pub fn pool(workers: usize) -> AppResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::Data(e.to_string()))
}

/// Grid entries in `mu`-major, speed-minor order regardless of `workers`.
pub fn optimize_grid(
    params: &VehicleParams,
    spec: &GridSpec,
    workers: usize,
) -> AppResult<Vec<GridEntry>> {
    let points: Vec<(f64, f64)> = spec
        .mus
        .iter()
        .flat_map(|&mu| spec.speeds.iter().map(move |&v| (v, mu)))
        .collect();
    let pool = pool(workers)?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|&(v, mu)| plan_point(v, mu, params, &spec.pipeline))
            .collect()
    }))
}

pub fn solver_log(grid: &[GridEntry]) -> String {
    let mut s =
        String::from("# mu speed_mps status iterations converged objective_m baseline_m t_f_s\n");
    for e in grid {
        let _ = match &e.point {
            GridPoint::Maneuver(o) => writeln!(
                s,
                "{} {} maneuver {} {} {} {} {}",
                e.mu,
                e.speed,
                o.iterations,
                o.converged,
                o.objective,
                o.baseline_objective,
                o.nodes.t_f()
            ),
            GridPoint::BrakingOnly(err) => writeln!(s, "{} {} braking_only ({err})", e.mu, e.speed),
            GridPoint::BelowDesignSpeed => writeln!(s, "{} {} below_design_speed", e.mu, e.speed),
        };
    }
    s
}

pub fn precompute(
    params: &VehicleParams,
    spec: &GridSpec,
    workers: usize,
) -> AppResult<Precomputed> {
    spec.validate()?;
    params.validate()?;
    let grid = optimize_grid(params, spec, workers)?;
    let succeeded = grid.iter().filter(|e| e.point.outcome().is_some()).count();
    let solver_log = solver_log(&grid);
    if succeeded == 0 {
        return Err(AppError::Data(format!(
            "no grid point produced a maneuver\n{solver_log}"
        )));
    }
    let mut mus = spec.mus.clone();
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    let diagrams = mus
        .iter()
        .map(|&mu| build_phase_diagram(&grid, mu, spec.wid_obj, params, spec.buffers))
        .collect::<Result<Vec<_>, _>>()?;
    let table = build_lookup_tables(&grid, spec.dx_step)?;
    Ok(Precomputed {
        grid,
        table,
        diagrams,
        solver_log,
        succeeded,
    })
}
