//! Closed-loop scenario simulation: world objects, idealized sensing,
//! oriented-rectangle contact and outcome classification.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dmm::{select_diagram, LookupTable3D, PhaseDiagram, Sector};
use crate::error::{Error, Result};
use crate::math::{abs, atan2, cos, sin, wrap_angle, PI};
use crate::runtime::{
    ellipse_limited_accel, lateral_errors, longitudinal_command, path_targets, steering_control,
    update_mode, Detection, EoamContext, EoamMode, LaneClass, Pid, RuntimeConfig,
};
use crate::vehicle::{forces, plant_step, ControlInput, VehicleParams, VehicleState};

pub const KMH: f64 = 1.0 / 3.6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SensorConfig {
    pub range: f64,
    /// Half-angle of the field of view, rad.
    pub half_angle: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            range: 150.0,
            half_angle: 20.0 * PI / 180.0,
        }
    }
}

/// Length and width of a rectangular body, m.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dimensions {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub ego_speed_kmh: f64,
    pub mu: f64,
    pub lane_width: f64,
    /// Gap from the ego front bumper to the in-lane object's rear, m.
    pub aro_init_dist: f64,
    pub aro_init_speed_kmh: f64,
    /// Time the in-lane object starts its emergency stop, s.
    pub aro_brake_time: f64,
    /// Deceleration of that stop, m/s².
    pub aro_decel: f64,
    pub aro_size: Dimensions,
    pub oncoming_enabled: bool,
    /// Gap from the ego front bumper to the oncoming vehicle's front, m.
    pub oncoming_init_dist: f64,
    /// m/s
    pub oncoming_speed: f64,
    pub oncoming_size: Dimensions,
    pub parked_cars_enabled: bool,
    /// Distance of the parked cars' near side beyond the right lane marker, m.
    pub parked_offset: f64,
    pub parked_size: Dimensions,
    pub parked_count: usize,
    pub parked_spacing: f64,
    pub sensor: SensorConfig,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            ego_speed_kmh: 120.0,
            mu: 1.0,
            lane_width: 3.5,
            aro_init_dist: 120.0,
            aro_init_speed_kmh: 60.0,
            aro_brake_time: 1.0,
            aro_decel: 6.0,
            aro_size: Dimensions {
                length: 5.1,
                width: 2.0,
            },
            oncoming_enabled: false,
            oncoming_init_dist: 300.0,
            oncoming_speed: 20.0,
            oncoming_size: Dimensions {
                length: 4.8,
                width: 1.9,
            },
            parked_cars_enabled: false,
            parked_offset: 1.5,
            parked_size: Dimensions {
                length: 4.6,
                width: 1.8,
            },
            parked_count: 12,
            parked_spacing: 25.0,
            sensor: SensorConfig::default(),
            dt: 1e-3,
            t_end: 40.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be positive and finite",
                })
            }
        };
        pos("aro_init_dist", self.aro_init_dist)?;
        pos("lane_width", self.lane_width)?;
        pos("dt", self.dt)?;
        pos("t_end", self.t_end)?;
        pos("ego_speed_kmh", self.ego_speed_kmh)?;
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: "must lie in (0, 1]",
            });
        }
        if self.aro_decel < 0.0 || self.aro_init_speed_kmh < 0.0 || self.oncoming_speed < 0.0 {
            return Err(Error::InvalidParameter {
                name: "speed profile",
                reason: "speeds and deceleration must be non-negative",
            });
        }
        Ok(())
    }

    pub fn ego_speed(&self) -> f64 {
        self.ego_speed_kmh * KMH
    }
}

/// In-lane object speed: constant until the brake time, then a linear ramp
/// down to rest.
pub fn aro_speed_profile(t: f64, cfg: &ScenarioConfig) -> f64 {
    let v0 = cfg.aro_init_speed_kmh * KMH;
    if t <= cfg.aro_brake_time {
        v0
    } else {
        (v0 - cfg.aro_decel * (t - cfg.aro_brake_time)).max(0.0)
    }
}

/// Distance covered by the in-lane object since t = 0.
pub fn aro_travel(t: f64, cfg: &ScenarioConfig) -> f64 {
    let v0 = cfg.aro_init_speed_kmh * KMH;
    let tb = cfg.aro_brake_time;
    if t <= tb {
        return v0 * t;
    }
    let ramp = if cfg.aro_decel > 0.0 {
        v0 / cfg.aro_decel
    } else {
        f64::INFINITY
    };
    let tau = (t - tb).min(ramp);
    v0 * tb + v0 * tau - 0.5 * cfg.aro_decel * tau * tau
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Role {
    InLaneAro,
    OncomingAro,
    Parked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldObject {
    pub id: usize,
    pub role: Role,
    /// Center position, m.
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub size: Dimensions,
    pub speed: f64,
}

impl WorldObject {
    pub fn footprint(&self) -> Footprint {
        Footprint {
            cx: self.x,
            cy: self.y,
            heading: self.heading,
            half_length: self.size.length / 2.0,
            half_width: self.size.width / 2.0,
        }
    }
}

/// World with analytic object motion.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub objects: Vec<WorldObject>,
    aro_x0: f64,
    oncoming_x0: f64,
}

impl World {
    pub fn new(cfg: &ScenarioConfig, params: &VehicleParams) -> Self {
        let front = params.len_front;
        let mut objects = Vec::new();
        let aro_x0 = front + cfg.aro_init_dist + cfg.aro_size.length / 2.0;
        objects.push(WorldObject {
            id: 0,
            role: Role::InLaneAro,
            x: aro_x0,
            y: 0.0,
            heading: 0.0,
            size: cfg.aro_size,
            speed: aro_speed_profile(0.0, cfg),
        });
        let oncoming_x0 = front + cfg.oncoming_init_dist + cfg.oncoming_size.length / 2.0;
        if cfg.oncoming_enabled {
            objects.push(WorldObject {
                id: 1,
                role: Role::OncomingAro,
                x: oncoming_x0,
                y: cfg.lane_width,
                heading: PI,
                size: cfg.oncoming_size,
                speed: cfg.oncoming_speed,
            });
        }
        if cfg.parked_cars_enabled {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let y = -(cfg.lane_width / 2.0 + cfg.parked_offset + cfg.parked_size.width / 2.0);
            for i in 0..cfg.parked_count {
                let jitter: f64 = rng.random_range(-0.2..0.2) * cfg.parked_spacing;
                objects.push(WorldObject {
                    id: 10 + i,
                    role: Role::Parked,
                    x: 30.0 + i as f64 * cfg.parked_spacing + jitter,
                    y,
                    heading: 0.0,
                    size: cfg.parked_size,
                    speed: 0.0,
                });
            }
        }
        Self {
            objects,
            aro_x0,
            oncoming_x0,
        }
    }

    pub fn update(&mut self, t: f64, cfg: &ScenarioConfig) {
        for o in &mut self.objects {
            match o.role {
                Role::InLaneAro => {
                    o.x = self.aro_x0 + aro_travel(t, cfg);
                    o.speed = aro_speed_profile(t, cfg);
                }
                Role::OncomingAro => o.x = self.oncoming_x0 - cfg.oncoming_speed * t,
                Role::Parked => {}
            }
        }
    }
}

/// Lane index for a lateral position: 0 for the ego's starting lane, 1 for
/// the lane to its left, `None` outside both travel lanes.
pub fn lane_index(y: f64, lane_width: f64) -> Option<i32> {
    let k = libm::floor((y + lane_width / 2.0) / lane_width) as i32;
    (0..=1).contains(&k).then_some(k)
}

/// Objects inside range and field of view, measured from the front bumper.
pub fn sensor_scan(
    ego: &VehicleState,
    objects: &[WorldObject],
    sensor: &SensorConfig,
    lane_width: f64,
    params: &VehicleParams,
) -> Vec<Detection> {
    let (sp, cp) = (sin(ego.psi), cos(ego.psi));
    let sx = ego.x + params.len_front * cp;
    let sy = ego.y + params.len_front * sp;
    let (ego_vx, _) = ego.global_velocity();
    let ego_lane = lane_index(ego.y, lane_width);
    let mut out = Vec::new();
    for o in objects {
        let (dx, dy) = (o.x - sx, o.y - sy);
        if crate::math::hypot(dx, dy) > sensor.range {
            continue;
        }
        let bearing = wrap_angle(atan2(dy, dx) - ego.psi);
        if abs(bearing) > sensor.half_angle {
            continue;
        }
        let lane = match (lane_index(o.y, lane_width), ego_lane) {
            (Some(a), Some(b)) if a == b => LaneClass::EgoLane,
            (Some(_), _) => LaneClass::AdjacentLane,
            (None, _) => LaneClass::OutOfLane,
        };
        let near_face = o.x - o.size.length / 2.0;
        out.push(Detection {
            id: o.id,
            rel_dist: near_face - sx,
            rel_speed: ego_vx - o.speed * cos(o.heading),
            lane,
            oncoming: cos(o.heading - ego.psi) < 0.0,
        });
    }
    out
}

/// Oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub cx: f64,
    pub cy: f64,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Footprint {
    pub fn ego(state: &VehicleState, params: &VehicleParams) -> Self {
        let half = (params.len_front + params.len_rear) / 2.0;
        let off = params.len_front - half;
        Self {
            cx: state.x + off * cos(state.psi),
            cy: state.y + off * sin(state.psi),
            heading: state.psi,
            half_length: half,
            half_width: params.wid_ego / 2.0,
        }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = (sin(self.heading), cos(self.heading));
        [(c, s), (-s, c)]
    }

    fn project(&self, ax: (f64, f64)) -> (f64, f64) {
        let center = self.cx * ax.0 + self.cy * ax.1;
        let [u, v] = self.axes();
        let r = self.half_length * abs(u.0 * ax.0 + u.1 * ax.1)
            + self.half_width * abs(v.0 * ax.0 + v.1 * ax.1);
        (center - r, center + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Face {
    Front,
    Side,
    Rear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Unit normal of least penetration, pointing from the ego into the object.
    pub normal: (f64, f64),
    pub depth: f64,
    pub ego_face: Face,
}

/// Separating-axis test; touching rectangles count as contact.
pub fn collision_check(ego: &Footprint, other: &Footprint) -> Option<Contact> {
    let mut best: Option<((f64, f64), f64)> = None;
    for ax in ego.axes().into_iter().chain(other.axes()) {
        let (a0, a1) = ego.project(ax);
        let (b0, b1) = other.project(ax);
        let depth = a1.min(b1) - a0.max(b0);
        if depth < 0.0 {
            return None;
        }
        if best.is_none_or(|(_, d)| depth < d) {
            best = Some((ax, depth));
        }
    }
    let (mut n, depth) = best?;
    let rel = (other.cx - ego.cx, other.cy - ego.cy);
    if n.0 * rel.0 + n.1 * rel.1 < 0.0 {
        n = (-n.0, -n.1);
    }
    let along = n.0 * cos(ego.heading) + n.1 * sin(ego.heading);
    let ego_face = if along >= libm::sqrt(0.5) {
        Face::Front
    } else if along <= -libm::sqrt(0.5) {
        Face::Rear
    } else {
        Face::Side
    };
    Some(Contact {
        normal: n,
        depth,
        ego_face,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    Green,
    Yellow,
    Orange,
    Red,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Green => "green",
            Outcome::Yellow => "yellow",
            Outcome::Orange => "orange",
            Outcome::Red => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionInfo {
    pub t: f64,
    pub object: usize,
    pub role: Role,
    /// Closing speed along the contact normal, m/s.
    pub closing_speed: f64,
    pub contact: Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Collision,
    Handback,
    Standstill,
    TimeLimit,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Collision => "collision",
            Termination::Handback => "handback",
            Termination::Standstill => "standstill",
            Termination::TimeLimit => "time_limit",
        }
    }
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub psi_dot: f64,
    pub mode: EoamMode,
    pub fcw: bool,
    pub delta: f64,
    pub f_t: f64,
    pub e_offset: f64,
    pub e_lookahead: f64,
    pub sector: Option<Sector>,
    pub dx: f64,
    pub y_target: f64,
    pub ax_target: f64,
    /// Body longitudinal and lateral specific force, m/s².
    pub a_x: f64,
    pub a_y: f64,
}

/// Phase-diagram point while the in-lane object is in view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRecord {
    pub t: f64,
    pub rel_dist: f64,
    pub rel_speed: f64,
    pub sector: Sector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub outcome: Outcome,
    pub collision: Option<CollisionInfo>,
    pub termination: Termination,
    pub ticks: Vec<TickRecord>,
    pub phase_trace: Vec<PhaseRecord>,
    pub context: EoamContext,
    /// Whether any maneuver mode was entered.
    pub triggered: bool,
    /// First time the point of no return was crossed.
    pub pnr_time: Option<f64>,
    /// First time limit braking was commanded.
    pub brake_time: Option<f64>,
}

impl ScenarioResult {
    /// Mode at every tick.
    pub fn mode_trace(&self) -> Vec<EoamMode> {
        self.ticks.iter().map(|t| t.mode).collect()
    }
}

/// Switches used by tests and counterfactual runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Run the high-level system only, without the maneuver domain.
    pub eoam_disabled: bool,
    /// Report a synthetic oncoming vehicle from this time on.
    pub inject_oncoming_at: Option<f64>,
}

/// Everything a run needs besides the scenario.
#[derive(Debug, Clone, Copy)]
pub struct Planner<'a> {
    pub table: &'a LookupTable3D,
    pub diagrams: &'a [PhaseDiagram],
    pub params: &'a VehicleParams,
    pub runtime: &'a RuntimeConfig,
}

pub fn run_scenario(cfg: &ScenarioConfig, planner: &Planner<'_>) -> Result<ScenarioResult> {
    run_scenario_with(cfg, planner, RunOptions::default())
}

pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    planner: &Planner<'_>,
    opts: RunOptions,
) -> Result<ScenarioResult> {
    cfg.validate()?;
    let p = planner.params;
    let rc = planner.runtime;
    let table = planner.table;
    let lo = table.mus.first().copied().unwrap_or(f64::NAN);
    let hi = table.mus.last().copied().unwrap_or(f64::NAN);
    if !(cfg.mu >= lo - 1e-9 && cfg.mu <= hi + 1e-9) {
        return Err(Error::MissingPage { mu: cfg.mu });
    }
    let diagram =
        select_diagram(planner.diagrams, cfg.mu).ok_or(Error::MissingPage { mu: cfg.mu })?;

    let v_set = cfg.ego_speed();
    let mut world = World::new(cfg, p);
    let mut ego = VehicleState::straight(0.0, 0.0, v_set);
    let mut ctx = EoamContext::new(0.0, cfg.mu);
    let mut pid = Pid::default();
    let mut delta = 0.0;
    let mut f_t = 0.0;
    let mut ax_actual = 0.0;
    let mut ay_actual = 0.0;
    let mut ticks = Vec::new();
    let mut phase_trace = Vec::new();
    let mut collision = None;
    let mut triggered = false;
    let mut pnr_time = None;
    let mut brake_time = None;
    let mut termination = Termination::TimeLimit;
    let steps = libm::ceil(cfg.t_end / cfg.dt) as usize;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        world.update(t, cfg);

        let ego_fp = Footprint::ego(&ego, p);
        let hit = world
            .objects
            .iter()
            .find_map(|o| collision_check(&ego_fp, &o.footprint()).map(|c| (o, c)));
        if let Some((o, c)) = hit {
            let (evx, evy) = ego.global_velocity();
            let (ovx, ovy) = (o.speed * cos(o.heading), o.speed * sin(o.heading));
            collision = Some(CollisionInfo {
                t,
                object: o.id,
                role: o.role,
                closing_speed: (evx - ovx) * c.normal.0 + (evy - ovy) * c.normal.1,
                contact: c,
            });
            termination = Termination::Collision;
            break;
        }

        let mut detections = sensor_scan(&ego, &world.objects, &cfg.sensor, cfg.lane_width, p);
        if let Some(ti) = opts.inject_oncoming_at {
            if t >= ti {
                detections.push(Detection {
                    id: usize::MAX,
                    rel_dist: 140.0,
                    rel_speed: ego.v_x + cfg.oncoming_speed,
                    lane: LaneClass::AdjacentLane,
                    oncoming: true,
                });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.id == 0) {
            phase_trace.push(PhaseRecord {
                t,
                rel_dist: d.rel_dist,
                rel_speed: d.rel_speed,
                sector: diagram.classify(d.rel_dist, d.rel_speed),
            });
        }

        if ctx.mode.is_limit_braking() && ego.v_x < 0.05 {
            termination = Termination::Standstill;
            ticks.push(record(
                t,
                &ego,
                &ctx,
                delta,
                f_t,
                (0.0, 0.0),
                0.0,
                0.0,
                ax_actual,
                p,
                cfg.mu,
            ));
            break;
        }
        let prev_mode = ctx.mode;
        if !opts.eoam_disabled {
            let length = if ctx.mode.is_steering() {
                table
                    .interpolate(ctx.x_dot_0_at_trigger, 0.0, ctx.mu_est)
                    .length
            } else {
                0.0
            };
            update_mode(&mut ctx, &detections, &ego, diagram, rc, length);
        }
        if ctx.mode != EoamMode::Normal {
            triggered = true;
        }
        if ctx.pnr_crossed && pnr_time.is_none() {
            pnr_time = Some(t);
        }
        if ctx.mode.is_limit_braking() && brake_time.is_none() {
            brake_time = Some(t);
        }
        if ctx.handback_pending && prev_mode == EoamMode::Return {
            termination = Termination::Handback;
            ticks.push(record(
                t,
                &ego,
                &ctx,
                delta,
                f_t,
                (0.0, 0.0),
                0.0,
                0.0,
                ax_actual,
                p,
                cfg.mu,
            ));
            break;
        }
        if ctx.mode != prev_mode {
            // bumpless hand-over between the longitudinal loops
            let gains = if ctx.mode.is_steering() {
                &rc.accel_pid
            } else {
                &rc.speed_pid
            };
            pid.preload(f_t / p.m, gains);
        }

        let (target, _) = path_targets(&mut ctx, table, rc);
        let (d_cmd, clamped) = steering_control(&ego, &target, delta, cfg.dt, &rc.steering, p);
        if clamped {
            ctx.steer_clamps += 1;
        }
        delta = d_cmd;
        let ax_ref = ellipse_limited_accel(target.ax, ay_actual, cfg.mu);
        f_t = longitudinal_command(
            ctx.mode, &mut pid, rc, ax_ref, ax_actual, v_set, ego.v_x, cfg.dt, cfg.mu, p,
        );
        let errs = lateral_errors(&ego, &target, &rc.steering);
        let input = ControlInput { f_t, delta };
        ticks.push(record(
            t, &ego, &ctx, delta, f_t, errs, target.y, target.ax, ax_actual, p, cfg.mu,
        ));

        if k == steps {
            break;
        }
        ego = plant_step(&ego, &input, cfg.mu, p, cfg.dt);
        (ax_actual, ay_actual) = forces(&ego, &input, cfg.mu, p)
            .map(|f| (f.a_x, f.a_y))
            .unwrap_or((input.f_t / p.m, 0.0));
        ctx.advance(&ego, cfg.dt);
    }

    let mut res = ScenarioResult {
        outcome: Outcome::Green,
        collision,
        termination,
        ticks,
        phase_trace,
        context: ctx,
        triggered,
        pnr_time,
        brake_time,
    };
    res.outcome = classify_outcome(&res);
    Ok(res)
}

#[allow(clippy::too_many_arguments)]
fn record(
    t: f64,
    ego: &VehicleState,
    ctx: &EoamContext,
    delta: f64,
    f_t: f64,
    errs: (f64, f64),
    y_target: f64,
    ax_target: f64,
    ax_actual: f64,
    p: &VehicleParams,
    mu: f64,
) -> TickRecord {
    let a_y = forces(ego, &ControlInput { f_t, delta }, mu, p)
        .map(|f| f.a_y)
        .unwrap_or(0.0);
    TickRecord {
        t,
        x: ego.x,
        y: ego.y,
        psi: ego.psi,
        v_x: ego.v_x,
        v_y: ego.v_y,
        psi_dot: ego.psi_dot,
        mode: ctx.mode,
        fcw: ctx.fcw_active,
        delta,
        f_t,
        e_offset: errs.0,
        e_lookahead: errs.1,
        sector: ctx.sector,
        dx: ctx.dx,
        y_target,
        ax_target,
        a_x: ax_actual,
        a_y,
    }
}

/// Map a finished run to one outcome class.
pub fn classify_outcome(run: &ScenarioResult) -> Outcome {
    let ctx = &run.context;
    match &run.collision {
        Some(c) => match (c.role, c.contact.ego_face) {
            (Role::OncomingAro, Face::Front) => Outcome::Red,
            (Role::InLaneAro, Face::Front) if ctx.braked_before_pnr => Outcome::Yellow,
            _ => Outcome::Orange,
        },
        None => {
            if !run.triggered || ctx.returns_completed > 0 {
                Outcome::Green
            } else if ctx.braking_commanded {
                Outcome::Yellow
            } else {
                Outcome::Orange
            }
        }
    }
}
