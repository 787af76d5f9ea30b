//! Scenario matrices run over a worker pool and merged in cell order.

use std::fmt::Write as _;

use eoam_core::scenario::{run_scenario, Planner};
use rayon::prelude::*;

use crate::config::{Cell, MatrixSpec};
use crate::error::AppResult;
use crate::output::{csv_writer, finish, RunSummary};
use crate::pipeline::pool;
use crate::tables::TableSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub result: Result<RunSummary, String>,
}

impl CellResult {
    pub fn outcome(&self) -> &str {
        self.result.as_ref().map_or("error", |r| r.outcome.as_str())
    }
}

pub fn run_cell(
    cell: &Cell,
    tables: &TableSet,
    spec: &MatrixSpec,
    manifest: &str,
) -> Result<RunSummary, String> {
    tables.check_mu(cell.config.mu).map_err(|e| e.to_string())?;
    let planner = Planner {
        table: &tables.table,
        diagrams: &tables.diagrams,
        params: &tables.vehicle,
        runtime: &spec.runtime,
    };
    run_scenario(&cell.config, &planner)
        .map(|r| RunSummary::new(&r, manifest))
        .map_err(|e| e.to_string())
}

pub fn sweep(
    spec: &MatrixSpec,
    tables: &TableSet,
    workers: usize,
    manifest: &str,
) -> AppResult<Vec<CellResult>> {
    let cells = spec.cells();
    let pool = pool(workers)?;
    let mut out: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| CellResult {
                cell: c.clone(),
                result: run_cell(c, tables, spec, manifest),
            })
            .collect()
    });
    out.sort_by_key(|r| r.cell.index);
    Ok(out)
}

pub fn grid_csv(results: &[CellResult], manifest: &str) -> AppResult<Vec<u8>> {
    let mut w = csv_writer(manifest);
    w.write_record([
        "cell",
        "speed_kmh",
        "mu",
        "oncoming",
        "outcome",
        "termination",
        "triggered",
        "braked_before_pnr",
        "returns_completed",
        "handback",
        "collision_t_s",
        "closing_speed_mps",
        "error",
    ])?;
    for r in results {
        let c = &r.cell;
        let mut row = vec![
            c.index.to_string(),
            c.speed_kmh.to_string(),
            c.mu.to_string(),
            c.oncoming.label(),
        ];
        match &r.result {
            Ok(s) => {
                let col = s.collision.as_ref();
                row.extend([
                    s.outcome.clone(),
                    s.termination.clone(),
                    s.triggered.to_string(),
                    s.braked_before_pnr.to_string(),
                    s.returns_completed.to_string(),
                    s.handback.to_string(),
                    col.map_or(String::new(), |c| c.t_s.to_string()),
                    col.map_or(String::new(), |c| c.closing_speed_mps.to_string()),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(["error".into(), String::new(), String::new(), String::new()]);
                row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ]);
            }
        }
        w.write_record(row)?;
    }
    finish(w)
}

/// Text grid: one block per oncoming column, speeds down, mu across.
pub fn color_table(spec: &MatrixSpec, results: &[CellResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Outcome by ego speed (rows) and surface mu (columns)");
    let _ = writeln!(
        s,
        "green = lane change with return, yellow = limit braking with frontal contact, \
         orange = lateral contact, red = oncoming frontal contact"
    );
    for onc in &spec.oncoming {
        let _ = writeln!(s, "\noncoming: {}", onc.label());
        let _ = write!(s, "{:>12}", "km/h \\ mu");
        for mu in &spec.mus {
            let _ = write!(s, " {:>8}", mu);
        }
        s.push('\n');
        for v in &spec.speeds_kmh {
            let _ = write!(s, "{v:>12}");
            for mu in &spec.mus {
                let cell = results.iter().find(|r| {
                    r.cell.oncoming == *onc && r.cell.mu == *mu && r.cell.speed_kmh == *v
                });
                let _ = write!(s, " {:>8}", cell.map_or("-", |c| c.outcome()));
            }
            s.push('\n');
        }
    }
    s
}
