//! CSV and summary writers. Every file opens with a `# manifest <hash>` line.

use std::io::Write as _;

use eoam_core::scenario::{ScenarioResult, TickRecord};
use serde::Serialize;

use crate::error::{AppError, AppResult};

pub fn csv_writer(manifest: &str) -> csv::Writer<Vec<u8>> {
    let mut buf = Vec::new();
    let _ = writeln!(buf, "# manifest {manifest}");
    csv::Writer::from_writer(buf)
}

pub fn finish(w: csv::Writer<Vec<u8>>) -> AppResult<Vec<u8>> {
    w.into_inner().map_err(|e| AppError::Data(e.to_string()))
}

fn num(v: f64) -> String {
    v.to_string()
}

const TICK_HEADER: [&str; 19] = [
    "t_s",
    "x_m",
    "y_m",
    "psi_rad",
    "v_x_mps",
    "v_y_mps",
    "psi_dot_radps",
    "mode",
    "fcw",
    "delta_rad",
    "f_t_n",
    "e_offset_m",
    "e_lookahead_m",
    "sector",
    "dx_m",
    "y_target_m",
    "ax_target_mps2",
    "a_x_mps2",
    "a_y_mps2",
];

fn tick_row(t: &TickRecord) -> [String; 19] {
    [
        num(t.t),
        num(t.x),
        num(t.y),
        num(t.psi),
        num(t.v_x),
        num(t.v_y),
        num(t.psi_dot),
        t.mode.code().to_string(),
        u8::from(t.fcw).to_string(),
        num(t.delta),
        num(t.f_t),
        num(t.e_offset),
        num(t.e_lookahead),
        t.sector.map_or(String::new(), |s| s.label().to_string()),
        num(t.dx),
        num(t.y_target),
        num(t.ax_target),
        num(t.a_x),
        num(t.a_y),
    ]
}

/// Full per-tick time series.
pub fn timeseries_csv(r: &ScenarioResult, manifest: &str) -> AppResult<Vec<u8>> {
    let mut w = csv_writer(manifest);
    w.write_record(TICK_HEADER)?;
    for t in &r.ticks {
        w.write_record(tick_row(t))?;
    }
    finish(w)
}

pub fn phase_csv(r: &ScenarioResult, manifest: &str) -> AppResult<Vec<u8>> {
    let mut w = csv_writer(manifest);
    w.write_record(["t_s", "rel_dist_m", "rel_speed_mps", "sector"])?;
    for p in &r.phase_trace {
        w.write_record([
            num(p.t),
            num(p.rel_dist),
            num(p.rel_speed),
            p.sector.label().to_string(),
        ])?;
    }
    finish(w)
}

/// Column subsets of the time series, one file per plot.
pub fn plot_csvs(r: &ScenarioResult, manifest: &str) -> AppResult<Vec<(&'static str, Vec<u8>)>> {
    type Pick = fn(&TickRecord) -> Vec<String>;
    let plots: [(&str, &[&str], Pick); 9] = [
        ("modes.csv", &["t_s", "mode"], |t| {
            vec![num(t.t), t.mode.code().to_string()]
        }),
        ("fcw.csv", &["t_s", "fcw"], |t| {
            vec![num(t.t), u8::from(t.fcw).to_string()]
        }),
        ("speed.csv", &["t_s", "v_x_mps"], |t| {
            vec![num(t.t), num(t.v_x)]
        }),
        (
            "acceleration.csv",
            &["t_s", "a_x_mps2", "ax_target_mps2"],
            |t| vec![num(t.t), num(t.a_x), num(t.ax_target)],
        ),
        ("lateral_position.csv", &["t_s", "y_m", "y_target_m"], |t| {
            vec![num(t.t), num(t.y), num(t.y_target)]
        }),
        (
            "lateral_errors.csv",
            &["t_s", "e_offset_m", "e_lookahead_m"],
            |t| vec![num(t.t), num(t.e_offset), num(t.e_lookahead)],
        ),
        ("dx.csv", &["t_s", "dx_m"], |t| vec![num(t.t), num(t.dx)]),
        ("steering.csv", &["t_s", "delta_rad", "f_t_n"], |t| {
            vec![num(t.t), num(t.delta), num(t.f_t)]
        }),
        (
            "friction_ellipse.csv",
            &["t_s", "a_x_mps2", "a_y_mps2"],
            |t| vec![num(t.t), num(t.a_x), num(t.a_y)],
        ),
    ];
    let mut out = Vec::new();
    for (name, header, pick) in plots {
        let mut w = csv_writer(manifest);
        w.write_record(header)?;
        for t in &r.ticks {
            w.write_record(pick(t))?;
        }
        out.push((name, finish(w)?));
    }
    out.push(("phase.csv", phase_csv(r, manifest)?));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionSummary {
    pub t_s: f64,
    pub object: usize,
    pub role: String,
    pub closing_speed_mps: f64,
    pub ego_face: String,
    pub depth_m: f64,
}

/// Outcome of one run in a form suitable for TOML.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub manifest: String,
    pub outcome: String,
    pub termination: String,
    pub triggered: bool,
    pub braking_commanded: bool,
    pub braked_before_pnr: bool,
    pub returns_completed: u32,
    pub handback: bool,
    pub final_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pnr_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brake_time_s: Option<f64>,
    pub modes_visited: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionSummary>,
}

impl RunSummary {
    pub fn new(r: &ScenarioResult, manifest: &str) -> Self {
        let mut modes_visited: Vec<u8> = Vec::new();
        for t in &r.ticks {
            if modes_visited.last() != Some(&t.mode.code()) {
                modes_visited.push(t.mode.code());
            }
        }
        Self {
            manifest: manifest.to_string(),
            outcome: r.outcome.name().to_string(),
            termination: r.termination.name().to_string(),
            triggered: r.triggered,
            braking_commanded: r.context.braking_commanded,
            braked_before_pnr: r.context.braked_before_pnr,
            returns_completed: r.context.returns_completed,
            handback: r.context.handback_pending,
            final_time_s: r.ticks.last().map_or(0.0, |t| t.t),
            pnr_time_s: r.pnr_time,
            brake_time_s: r.brake_time,
            modes_visited,
            collision: r.collision.map(|c| CollisionSummary {
                t_s: c.t,
                object: c.object,
                role: format!("{:?}", c.role),
                closing_speed_mps: c.closing_speed,
                ego_face: format!("{:?}", c.contact.ego_face),
                depth_m: c.contact.depth,
            }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
