//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eoam::config::{load_matrix, load_scenario, GridSpec, MatrixSpec, ScenarioFile};
use eoam::output::{phase_csv, timeseries_csv};
use eoam::sweep::{grid_csv, sweep, CellResult};
use eoam::tables::TableSet;
use eoam_core::dmm::{
    build_lookup_tables, build_phase_diagram, stopping_distance, PhaseDiagram, Sector,
};
use eoam_core::math::G;
use eoam_core::optimizer::{audit, lane_change_duration, plan_point, GridEntry, OcpSpec};
use eoam_core::path::{arc_length_parameterize, quintic_lane_change};
use eoam_core::runtime::EoamMode;
use eoam_core::scenario::{run_scenario, run_scenario_with, Planner, RunOptions, ScenarioConfig};
use eoam_core::vehicle::{plant_step, ControlInput, VehicleParams, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion<'a> = Box<dyn Fn() -> Verdict + 'a>;

struct Fixture {
    params: VehicleParams,
    spec: GridSpec,
    grid: Vec<GridEntry>,
    solve_times: Vec<Duration>,
    tables: TableSet,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fixture() -> Fixture {
    let params = VehicleParams::default();
    let spec = GridSpec::default();
    let mut grid = Vec::new();
    let mut solve_times = Vec::new();
    for &mu in &spec.mus {
        for &v in &spec.speeds {
            let start = Instant::now();
            grid.push(plan_point(v, mu, &params, &spec.pipeline));
            solve_times.push(start.elapsed());
        }
    }
    let mut mus = spec.mus.clone();
    mus.sort_by(f64::total_cmp);
    let diagrams = mus
        .iter()
        .map(|&mu| build_phase_diagram(&grid, mu, spec.wid_obj, &params, spec.buffers).unwrap())
        .collect();
    let table = build_lookup_tables(&grid, spec.dx_step).unwrap();
    let tables = TableSet {
        dir: PathBuf::new(),
        provenance: "acceptance".into(),
        vehicle: params,
        grid: spec.clone(),
        table,
        diagrams,
    };
    Fixture {
        params,
        spec,
        grid,
        solve_times,
        tables,
    }
}

fn planner<'a>(fx: &'a Fixture, file: &'a ScenarioFile) -> Planner<'a> {
    Planner {
        table: &fx.tables.table,
        diagrams: &fx.tables.diagrams,
        params: &fx.params,
        runtime: &file.runtime,
    }
}

fn baseline() -> ScenarioFile {
    load_scenario(&configs().join("scenario_baseline.toml"))
        .unwrap()
        .0
}

fn matrix() -> MatrixSpec {
    load_matrix(&configs().join("matrix_table2.toml"))
        .unwrap()
        .0
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn quintic_boundaries() -> Verdict {
    let q = quintic_lane_change(20.0, 2.5, 3.5).map_err(|e| e.to_string())?;
    let (y0, yd0, ydd0, _) = q.lateral(0.0);
    let (y1, yd1, ydd1, _) = q.lateral(2.5);
    let (ym, _, _, _) = q.lateral(1.25);
    let worst = [y0, yd0, ydd0, y1 - 3.5, yd1, ydd1, ym - 1.75]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
    ensure(worst <= 1e-9, format!("boundary error {worst:e}"))?;
    Ok(format!("worst boundary error {worst:.1e}"))
}

fn arc_round_trip() -> Verdict {
    let v0 = 100.0 / 3.6;
    let t_f = lane_change_duration(3.5, 1.0, 0.5);
    let q = quintic_lane_change(v0, t_f, 3.5).map_err(|e| e.to_string())?;
    let arc = arc_length_parameterize(&q, 401).map_err(|e| e.to_string())?;
    let (_, x, y) = arc.reconstruct();
    let dev = (0..arc.len()).fold(0.0f64, |m, i| {
        m.max((x[i] - arc.x[i]).hypot(y[i] - arc.y[i]))
    });
    let n = 1_000_000;
    let mut oracle = 0.0;
    let mut prev = (0.0, 0.0);
    for i in 1..=n {
        let t = t_f * i as f64 / n as f64;
        let p = (v0 * t, q.lateral(t).0);
        oracle += (p.0 - prev.0).hypot(p.1 - prev.1);
        prev = p;
    }
    let len_err = (arc.total_length() - oracle).abs();
    ensure(dev < 1e-3, format!("position deviation {dev:e} m"))?;
    ensure(len_err < 1e-4, format!("length error {len_err:e} m"))?;
    Ok(format!(
        "max deviation {dev:.1e} m, length error {len_err:.1e} m"
    ))
}

fn inverse_residuals(fx: &Fixture) -> Verdict {
    let p = &fx.params;
    let (mut force, mut moment, mut nodes) = (0.0f64, 0.0f64, 0usize);
    for e in &fx.grid {
        let Some(inv) = &e.inverse else { continue };
        for i in 0..inv.len() {
            if inv.feasible[i] {
                let (f, m) = inv.residuals(i, p);
                force = force.max(f.abs());
                moment = moment.max(m.abs());
                nodes += 1;
            }
        }
    }
    ensure(nodes > 0, "no feasible nodes")?;
    ensure(
        force < 1e-6 * p.m * G,
        format!("force residual {force:e} N"),
    )?;
    ensure(moment < 1e-6, format!("moment residual {moment:e} N m"))?;
    Ok(format!(
        "{nodes} nodes, force {force:.1e} N, moment {moment:.1e} N m"
    ))
}

fn optimizer_audit(fx: &Fixture) -> Verdict {
    let cfg = &fx.spec.pipeline;
    let mut solved = 0;
    for e in &fx.grid {
        let (Some(o), Some(inv)) = (e.point.outcome(), &e.inverse) else {
            continue;
        };
        let spec = OcpSpec {
            n_nodes: cfg.n_nodes,
            substeps: cfg.substeps,
            max_iter: cfg.max_iter,
            min_speed_ratio: cfg.min_speed_ratio,
            ..OcpSpec::new(e.speed, e.mu, cfg.y_f, fx.params)
        };
        let a = audit(&o.nodes, inv, &spec);
        let at = format!("v={} mu={}", e.speed, e.mu);
        ensure(a.passes(1e-4), format!("{at}: audit {a:?}"))?;
        ensure(
            a.initial == 0.0,
            format!("{at}: initial state error {}", a.initial),
        )?;
        ensure(
            o.objective <= o.baseline_nodes.objective(),
            format!(
                "{at}: J {} above baseline {}",
                o.objective,
                o.baseline_nodes.objective()
            ),
        )?;
        solved += 1;
    }
    let worst = fx.solve_times.iter().max().copied().unwrap_or_default();
    let total: Duration = fx.solve_times.iter().sum();
    ensure(solved > 0, "no maneuver was optimized")?;
    ensure(
        worst < Duration::from_secs(10),
        format!("slowest point {worst:?}"),
    )?;
    ensure(
        total < Duration::from_secs(900),
        format!("grid took {total:?}"),
    )?;
    Ok(format!(
        "{solved}/{} points audited, slowest {:.2} s, grid {:.1} s",
        fx.grid.len(),
        worst.as_secs_f64(),
        total.as_secs_f64()
    ))
}

fn stopping(fx: &Fixture) -> Verdict {
    let p = &fx.params;
    for v in [5.0, 13.3, 27.8, 45.0] {
        for mu in [1.0, 0.7, 0.3, 0.1] {
            ensure(
                stopping_distance(2.0 * v, mu, p) == 4.0 * stopping_distance(v, mu, p),
                format!("not quadratic at v={v} mu={mu}"),
            )?;
        }
    }
    let v0 = 100.0 / 3.6;
    let mut s = VehicleState::straight(0.0, 0.0, v0);
    let input = ControlInput {
        f_t: p.limit_brake_force(1.0),
        delta: 0.0,
    };
    let dt = 1e-4;
    while s.v_x > 0.0 {
        s = plant_step(&s, &input, 1.0, p, dt);
    }
    let want = stopping_distance(v0, 1.0, p);
    let rel = (s.x - want).abs() / want;
    ensure(
        rel < 0.005,
        format!("simulated {:.3} m vs {want:.3} m", s.x),
    )?;
    Ok(format!(
        "simulated {:.2} m vs {want:.2} m ({:.3}%)",
        s.x,
        100.0 * rel
    ))
}

fn reference_sector(d: &PhaseDiagram, dist: f64, v: f64) -> Sector {
    if v <= 0.0 {
        return Sector::G;
    }
    let (stop, stop_b) = (d.stop_at(v), d.stop_buffered_at(v));
    let (clear, clear_b) = (d.clear_at(v), d.clear_buffered_at(v));
    if dist < clear && dist < stop {
        Sector::A
    } else if dist >= clear && dist < clear_b {
        if dist < stop_b {
            Sector::F
        } else {
            Sector::B
        }
    } else if dist < stop {
        Sector::C
    } else if dist < stop_b {
        Sector::D
    } else if dist / v < d.ttc_threshold {
        Sector::E
    } else {
        Sector::G
    }
}

fn phase_diagrams(fx: &Fixture) -> Verdict {
    let ds = &fx.tables.diagrams;
    for (mu, want) in [(1.0, 2.5), (0.7, 2.5), (0.3, 5.0), (0.1, 20.0)] {
        let d = ds
            .iter()
            .find(|d| d.mu == mu)
            .ok_or(format!("no diagram for mu={mu}"))?;
        ensure(
            d.ttc_threshold == want,
            format!("mu={mu}: ttc {}", d.ttc_threshold),
        )?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100_000 {
        let d = &ds[rng.random_range(0..ds.len())];
        let dist = rng.random_range(0.0..600.0);
        let v = rng.random_range(-5.0..50.0);
        let got = d.classify(dist, v);
        let want = reference_sector(d, dist, v);
        ensure(
            got == want,
            format!("mu={} d={dist} v={v}: {got:?} vs {want:?}", d.mu),
        )?;
    }
    for d in ds {
        for (i, &v) in d.speeds.iter().enumerate() {
            ensure(
                d.stop_buffered[i] >= d.stop[i] && d.clear_buffered[i] >= d.clear_subopt[i],
                format!("mu={} v={v}: buffered curve below plain", d.mu),
            )?;
        }
        let finite: Vec<f64> = d
            .clear_subopt
            .iter()
            .copied()
            .filter(|c| c.is_finite() && *c > 0.0)
            .collect();
        ensure(
            finite.windows(2).all(|w| w[1] > w[0]),
            format!("mu={}: clearing not increasing with speed", d.mu),
        )?;
    }
    let mut by_mu: Vec<&PhaseDiagram> = ds.iter().collect();
    by_mu.sort_by(|a, b| b.mu.total_cmp(&a.mu));
    for pair in by_mu.windows(2) {
        for &v in &fx.spec.speeds {
            let (hi, lo) = (pair[0].clear_at(v), pair[1].clear_at(v));
            if hi.is_finite() && lo.is_finite() {
                ensure(
                    lo > hi,
                    format!(
                        "v={v}: clearing at mu={} not above mu={}",
                        pair[1].mu, pair[0].mu
                    ),
                )?;
            }
        }
    }
    Ok("thresholds exact, 100000 samples partitioned, curves ordered".into())
}

fn closed_loop(fx: &Fixture) -> Verdict {
    let file = baseline();
    let r = run_scenario(&file.scenario, &planner(fx, &file)).map_err(|e| e.to_string())?;
    let lane = file.runtime.lane_change;
    let before_return: Vec<_> = r
        .ticks
        .iter()
        .take_while(|t| t.mode != EoamMode::Return)
        .collect();
    let reached = before_return.iter().any(|t| (t.y - lane).abs() < 0.2);
    let overshoot = before_return
        .iter()
        .map(|t| t.y - lane)
        .fold(0.0f64, f64::max);
    let mu = file.scenario.mu;
    let excess = r
        .ticks
        .iter()
        .map(|t| (t.a_x.hypot(t.a_y) - mu * G) / G)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(reached, "never settled within 0.2 m of the target lane")?;
    ensure(overshoot < 0.3, format!("overshoot {overshoot:.3} m"))?;
    ensure(excess <= 0.05, format!("ellipse excess {excess:.3} g"))?;
    Ok(format!(
        "overshoot {overshoot:.2} m, peak ellipse excess {excess:+.3} g"
    ))
}

fn scenario_table(fx: &Fixture) -> Verdict {
    let spec = matrix();
    let results = sweep(&spec, &fx.tables, 0, "acceptance").map_err(|e| e.to_string())?;
    let summary = |r: &CellResult| {
        r.result
            .as_ref()
            .map_err(|e| format!("cell {}: {e}", r.cell.index))
            .cloned()
    };
    for r in &results {
        let s = summary(r)?;
        let at = format!(
            "{} km/h mu={} oncoming={}",
            r.cell.speed_kmh,
            r.cell.mu,
            r.cell.oncoming.label()
        );
        let dry_or_wet = r.cell.mu >= 0.7;
        if r.cell.oncoming.gap().is_none() && dry_or_wet {
            ensure(s.outcome == "green", format!("{at}: {}", s.outcome))?;
        }
        if r.cell.oncoming.gap() == Some(300.0) && r.cell.mu == 1.0 && r.cell.speed_kmh >= 120.0 {
            ensure(
                s.outcome == "yellow" && s.modes_visited.contains(&3),
                format!("{at}: {} via {:?}", s.outcome, s.modes_visited),
            )?;
        }
        if s.outcome == "yellow" {
            ensure(
                s.braked_before_pnr,
                format!("{at}: yellow without braking before the PNR"),
            )?;
        }
        if s.outcome == "green" {
            ensure(
                s.returns_completed > 0 && s.handback,
                format!("{at}: green without return and handback"),
            )?;
        }
    }
    let count = |o: &str| results.iter().filter(|r| r.outcome() == o).count();
    Ok(format!(
        "{} cells: {} green, {} yellow, {} orange, {} red",
        results.len(),
        count("green"),
        count("yellow"),
        count("orange"),
        count("red")
    ))
}

fn point_of_no_return(fx: &Fixture) -> Verdict {
    let file = baseline();
    let pl = planner(fx, &file);
    let y_pnr = file.runtime.y_pnr();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut above, mut below) = (0, 0);
    for _ in 0..200 {
        let at = rng.random_range(0.0..8.0);
        let opts = RunOptions {
            inject_oncoming_at: Some(at),
            ..RunOptions::default()
        };
        let r = run_scenario_with(&file.scenario, &pl, opts).map_err(|e| e.to_string())?;
        let Some(k) = r.ticks.iter().position(|t| t.t >= at) else {
            continue;
        };
        let lateral = r.ticks[k].y.abs();
        let later = &r.ticks[k..];
        if lateral >= y_pnr {
            above += 1;
            ensure(
                later.iter().all(|t| t.mode != EoamMode::OncomingBrake),
                format!("detection at {at:.3} s with |y|={lateral:.3} m fell back to braking"),
            )?;
        } else {
            below += 1;
            ensure(
                later.iter().all(|t| t.mode != EoamMode::OncomingSteerBrake),
                format!("detection at {at:.3} s with |y|={lateral:.3} m kept steering"),
            )?;
        }
    }
    ensure(
        above > 0 && below > 0,
        format!("{above} above / {below} below the threshold"),
    )?;
    Ok(format!(
        "{above} detections past the threshold, {below} before"
    ))
}

fn baseline_cells() -> (MatrixSpec, Vec<ScenarioConfig>) {
    let spec = matrix();
    let cells = spec
        .cells()
        .into_iter()
        .filter(|c| c.oncoming.gap().is_none())
        .map(|c| c.config)
        .collect();
    (spec, cells)
}

fn parked_cars(fx: &Fixture) -> Verdict {
    let (spec, cells) = baseline_cells();
    let file = ScenarioFile {
        scenario: ScenarioConfig::default(),
        runtime: spec.runtime,
    };
    let pl = planner(fx, &file);
    for cfg in &cells {
        let mut on = cfg.clone();
        on.parked_cars_enabled = true;
        let mut off = cfg.clone();
        off.parked_cars_enabled = false;
        let a = run_scenario(&on, &pl).map_err(|e| e.to_string())?;
        let b = run_scenario(&off, &pl).map_err(|e| e.to_string())?;
        ensure(
            a.mode_trace() == b.mode_trace(),
            format!(
                "{} km/h mu={}: mode traces differ",
                cfg.ego_speed_kmh, cfg.mu
            ),
        )?;
    }
    Ok(format!("{} cells identical", cells.len()))
}

fn counterfactual(fx: &Fixture) -> Verdict {
    let (spec, cells) = baseline_cells();
    let file = ScenarioFile {
        scenario: ScenarioConfig::default(),
        runtime: spec.runtime,
    };
    let pl = planner(fx, &file);
    let mut triggered = 0;
    for cfg in &cells {
        let on = run_scenario(cfg, &pl).map_err(|e| e.to_string())?;
        if !on.triggered {
            continue;
        }
        triggered += 1;
        let off = run_scenario_with(
            cfg,
            &pl,
            RunOptions {
                eoam_disabled: true,
                ..RunOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure(
            off.collision.is_some(),
            format!(
                "{} km/h mu={}: no collision without the maneuver domain",
                cfg.ego_speed_kmh, cfg.mu
            ),
        )?;
    }
    ensure(triggered > 0, "no cell triggered")?;
    Ok(format!(
        "{triggered} triggered cells all collide when disabled"
    ))
}

fn real_time(fx: &Fixture) -> Verdict {
    let mut file = baseline();
    let ego = file.scenario.ego_speed_kmh;
    file.scenario.aro_init_speed_kmh = ego;
    file.scenario.aro_decel = 0.0;
    file.scenario.t_end = 40.0;
    file.scenario.dt = 1e-3;
    let start = Instant::now();
    let r = run_scenario(&file.scenario, &planner(fx, &file)).map_err(|e| e.to_string())?;
    let wall = start.elapsed();
    let last = r.ticks.last().map_or(0.0, |t| t.t);
    ensure(
        (last - 40.0).abs() < 1e-6,
        format!("run stopped at {last} s"),
    )?;
    let per_tick = wall.as_secs_f64() / r.ticks.len() as f64;
    ensure(
        per_tick < 1e-3,
        format!("mean tick {:.3} ms", per_tick * 1e3),
    )?;
    ensure(
        wall < Duration::from_secs(5),
        format!("40 s scenario took {wall:?}"),
    )?;
    Ok(format!(
        "40 s scenario in {:.3} s, mean tick {:.1} us",
        wall.as_secs_f64(),
        per_tick * 1e6
    ))
}

fn determinism(fx: &Fixture) -> Verdict {
    let file = baseline();
    let pl = planner(fx, &file);
    let once = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let r = run_scenario(&file.scenario, &pl).map_err(|e| e.to_string())?;
        Ok((
            timeseries_csv(&r, "m").map_err(|e| e.to_string())?,
            phase_csv(&r, "m").map_err(|e| e.to_string())?,
        ))
    };
    ensure(once()? == once()?, "run CSVs differ between repeats")?;
    let mut spec = matrix();
    spec.speeds_kmh = vec![120.0, 90.0];
    spec.mus = vec![1.0, 0.3];
    let csv = |workers| -> Result<Vec<u8>, String> {
        let r = sweep(&spec, &fx.tables, workers, "m").map_err(|e| e.to_string())?;
        grid_csv(&r, "m").map_err(|e| e.to_string())
    };
    ensure(csv(1)? == csv(3)?, "sweep CSV depends on worker count")?;
    Ok("run and sweep CSVs byte-identical".into())
}

fn main() -> ExitCode {
    let start = Instant::now();
    let fx = fixture();
    println!(
        "grid of {} points built in {:.1} s",
        fx.grid.len(),
        start.elapsed().as_secs_f64()
    );
    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        ("quintic boundary conditions", Box::new(quintic_boundaries)),
        ("arc-length round trip", Box::new(arc_round_trip)),
        (
            "inverse-dynamics residuals",
            Box::new(|| inverse_residuals(&fx)),
        ),
        ("optimizer audit", Box::new(|| optimizer_audit(&fx))),
        ("stopping distance", Box::new(|| stopping(&fx))),
        ("phase diagram", Box::new(|| phase_diagrams(&fx))),
        ("closed-loop tracking", Box::new(|| closed_loop(&fx))),
        ("scenario reproduction", Box::new(|| scenario_table(&fx))),
        ("point of no return", Box::new(|| point_of_no_return(&fx))),
        ("false-positive immunity", Box::new(|| parked_cars(&fx))),
        ("counterfactual necessity", Box::new(|| counterfactual(&fx))),
        ("real-time margin", Box::new(|| real_time(&fx))),
        ("determinism", Box::new(|| determinism(&fx))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
