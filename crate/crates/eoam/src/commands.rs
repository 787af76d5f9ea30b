//! Subcommand bodies. Each returns the process exit code.

use std::io::Write;
use std::path::Path;

use eoam_core::scenario::{run_scenario, Planner};

use crate::config::{load_grid, load_matrix, load_scenario, load_vehicle};
use crate::error::{AppError, AppResult};
use crate::exit;
use crate::manifest::{write_file, RunManifest};
use crate::output::{phase_csv, plot_csvs, timeseries_csv, RunSummary};
use crate::pipeline::precompute;
use crate::sweep::{color_table, grid_csv, sweep};
use crate::tables::{
    diagram_csv, write_diagrams, write_table, TableSet, DIAGRAM_FILE, GRID_FILE, TABLE_FILE,
    VEHICLE_FILE,
};
use crate::validate::run_checks;

/// Print to stdout, tolerating a reader that has gone away.
fn say(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn canonical<T: serde::Serialize>(value: &T) -> AppResult<String> {
    toml::to_string(value).map_err(|e| AppError::Data(e.to_string()))
}

pub fn cmd_precompute(vehicle: &Path, grid: &Path, out: &Path, workers: usize) -> AppResult<i32> {
    let (params, _) = load_vehicle(vehicle)?;
    let (spec, _) = load_grid(grid)?;
    let vtext = canonical(&params)?;
    let gtext = canonical(&spec)?;
    let manifest = RunManifest::new(
        "precompute",
        &[(vehicle, &vtext), (grid, &gtext)],
        None,
        out,
    );
    let prov = manifest.hash.clone();
    let pre = precompute(&params, &spec, workers)?;

    write_file(&out.join(VEHICLE_FILE), vtext.as_bytes())?;
    write_file(&out.join(GRID_FILE), gtext.as_bytes())?;
    write_file(
        &out.join(TABLE_FILE),
        write_table(&pre.table, &prov).as_bytes(),
    )?;
    write_file(
        &out.join(DIAGRAM_FILE),
        write_diagrams(&pre.diagrams, &prov).as_bytes(),
    )?;
    for d in &pre.diagrams {
        write_file(
            &out.join(format!("diagram_mu_{}.csv", d.mu)),
            &diagram_csv(d, &prov)?,
        )?;
    }
    write_file(
        &out.join("solver_log.txt"),
        format!("# manifest {prov}\n{}", pre.solver_log).as_bytes(),
    )?;
    manifest.write(out)?;
    say(&format!(
        "{} of {} grid points optimized; {} pages written to {}\n",
        pre.succeeded,
        pre.grid.len(),
        pre.diagrams.len(),
        out.display()
    ));
    Ok(exit::OK)
}

pub fn cmd_run(scenario: &Path, tables: &Path, out: &Path, dump_plots: bool) -> AppResult<i32> {
    let (file, _) = load_scenario(scenario)?;
    let ts = TableSet::load(tables)?;
    ts.check_mu(file.scenario.mu)?;
    let text = canonical(&file)?;
    let manifest = RunManifest::new("run", &[(scenario, &text)], Some(&ts.provenance), out);
    let planner = Planner {
        table: &ts.table,
        diagrams: &ts.diagrams,
        params: &ts.vehicle,
        runtime: &file.runtime,
    };
    let result = run_scenario(&file.scenario, &planner)?;
    let hash = &manifest.hash;
    write_file(&out.join("timeseries.csv"), &timeseries_csv(&result, hash)?)?;
    write_file(&out.join("phase_trace.csv"), &phase_csv(&result, hash)?)?;
    let summary = RunSummary::new(&result, hash);
    write_file(&out.join("outcome.toml"), summary.to_toml().as_bytes())?;
    if dump_plots {
        for (name, bytes) in plot_csvs(&result, hash)? {
            write_file(&out.join("plots").join(name), &bytes)?;
        }
    }
    manifest.write(out)?;
    say(&format!(
        "{} ({}) after {:.3} s, modes {:?}\n",
        summary.outcome, summary.termination, summary.final_time_s, summary.modes_visited
    ));
    Ok(exit::for_outcome(result.outcome))
}

pub fn cmd_sweep(matrix: &Path, tables: &Path, out: &Path, workers: usize) -> AppResult<i32> {
    let (spec, _) = load_matrix(matrix)?;
    let ts = TableSet::load(tables)?;
    let text = canonical(&spec)?;
    let manifest = RunManifest::new("sweep", &[(matrix, &text)], Some(&ts.provenance), out);
    let results = sweep(&spec, &ts, workers, &manifest.hash)?;
    write_file(&out.join("sweep.csv"), &grid_csv(&results, &manifest.hash)?)?;
    let table = color_table(&spec, &results);
    write_file(
        &out.join("outcomes.txt"),
        format!("# manifest {}\n{table}", manifest.hash).as_bytes(),
    )?;
    manifest.write(out)?;
    say(&table);
    for r in results.iter().filter(|r| r.result.is_err()) {
        eprintln!(
            "cell {}: {}",
            r.cell.index,
            r.result.as_ref().err().map_or("", |e| e.as_str())
        );
    }
    Ok(exit::OK)
}

pub fn cmd_validate(tables: &Path) -> AppResult<i32> {
    let ts = TableSet::load(tables)?;
    let mut report = format!("PASS checksums and provenance ({})\n", ts.provenance);
    let checks = run_checks(&ts);
    for c in &checks {
        if c.passed() {
            report += &format!("PASS {}\n", c.name);
        } else {
            report += &format!("FAIL {}: {}\n", c.name, c.failures.join("; "));
        }
    }
    say(&report);
    Ok(if checks.iter().all(|c| c.passed()) {
        exit::OK
    } else {
        exit::DATA
    })
}
