//! Online maneuver logic: the six-mode state machine, lateral path tracking
//! and the longitudinal controllers.

use crate::dmm::{LookupTable3D, PhaseDiagram, Sector, TableSample};
use crate::math::{abs, sin, sqrt, G};
use crate::vehicle::{VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EoamMode {
    #[default]
    Normal = 0,
    UpdateBrake = 1,
    UpdateSteerBrake = 2,
    OncomingBrake = 3,
    OncomingSteerBrake = 4,
    Return = 5,
}

impl EoamMode {
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Modes that follow the maneuver tables.
    pub fn is_steering(self) -> bool {
        matches!(
            self,
            EoamMode::UpdateSteerBrake | EoamMode::OncomingSteerBrake | EoamMode::Return
        )
    }

    /// Modes that command limit braking.
    pub fn is_limit_braking(self) -> bool {
        matches!(self, EoamMode::UpdateBrake | EoamMode::OncomingBrake)
    }

    /// Single-step edges of the state machine.
    pub fn can_transition_to(self, next: EoamMode) -> bool {
        use EoamMode::*;
        self == next
            || matches!(
                (self, next),
                (Normal, UpdateBrake)
                    | (Normal, UpdateSteerBrake)
                    | (UpdateBrake, Normal)
                    | (UpdateBrake, UpdateSteerBrake)
                    | (UpdateBrake, OncomingBrake)
                    | (UpdateSteerBrake, OncomingBrake)
                    | (UpdateSteerBrake, OncomingSteerBrake)
                    | (UpdateSteerBrake, Return)
                    | (OncomingSteerBrake, Return)
                    | (Return, Normal)
            )
    }
}

/// Lane of a detected object relative to the ego's current lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LaneClass {
    EgoLane,
    AdjacentLane,
    OutOfLane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub id: usize,
    /// Gap along the lane axis from the ego front bumper, m.
    pub rel_dist: f64,
    /// Closing rate, positive when the gap shrinks, m/s.
    pub rel_speed: f64,
    pub lane: LaneClass,
    pub oncoming: bool,
}

impl Detection {
    pub fn is_in_lane_aro(&self) -> bool {
        self.lane == LaneClass::EgoLane && !self.oncoming
    }

    pub fn is_oncoming_threat(&self) -> bool {
        self.oncoming && self.lane != LaneClass::OutOfLane
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SteeringGains {
    /// rad/m
    pub k_off: f64,
    /// rad/m
    pub k_la: f64,
    /// Lookahead distance, m.
    pub l_la: f64,
    /// s
    pub k_yd: f64,
    /// Understeer feedforward, s²/m.
    pub k_us: f64,
    /// rad/s
    pub rate_limit: f64,
    /// Above this speed the offset gain falls off with `1/v²`, m/s.
    pub schedule_speed: f64,
}

impl Default for SteeringGains {
    fn default() -> Self {
        Self {
            k_off: 0.2,
            k_la: 0.15,
            l_la: 10.0,
            k_yd: 0.15,
            k_us: 0.0015,
            rate_limit: 0.8,
            schedule_speed: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RuntimeConfig {
    pub steering: SteeringGains,
    pub accel_pid: PidGains,
    pub speed_pid: PidGains,
    /// Lateral displacement of the lane change, m.
    pub lane_change: f64,
    /// Point of no return as a fraction of `lane_change`.
    pub pnr_ratio: f64,
    /// Duration of mode 2 before the return starts, s.
    pub maneuver_time: f64,
    /// Upper bound on the return maneuver, s.
    pub return_timeout: f64,
    /// Lateral tolerance for a completed return, m.
    pub return_tolerance: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            steering: SteeringGains::default(),
            accel_pid: PidGains {
                kp: 0.2,
                ki: 10.0,
                kd: 0.0,
            },
            speed_pid: PidGains {
                kp: 1.2,
                ki: 0.3,
                kd: 0.0,
            },
            lane_change: 3.5,
            pnr_ratio: 0.3,
            maneuver_time: 8.0,
            return_timeout: 8.0,
            return_tolerance: 0.2,
        }
    }
}

impl RuntimeConfig {
    pub fn y_pnr(&self) -> f64 {
        self.pnr_ratio * self.lane_change
    }
}

/// PID with integrator freeze while the output saturates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pid {
    pub integral: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn reset(&mut self) {
        *self = Pid::default();
    }

    /// Start the integrator so the first output equals `output` for zero error.
    pub fn preload(&mut self, output: f64, gains: &PidGains) {
        self.prev_error = None;
        self.integral = if gains.ki != 0.0 {
            output / gains.ki
        } else {
            0.0
        };
    }

    /// Returns the clamped output and whether it saturated.
    pub fn update(&mut self, error: f64, dt: f64, g: &PidGains, lo: f64, hi: f64) -> (f64, bool) {
        let deriv = match self.prev_error {
            Some(p) if dt > 0.0 => (error - p) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(error);
        let trial = self.integral + error * dt;
        let raw = g.kp * error + g.ki * trial + g.kd * deriv;
        if raw > hi {
            (hi, true)
        } else if raw < lo {
            (lo, true)
        } else {
            self.integral = trial;
            (raw, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EoamContext {
    pub mode: EoamMode,
    pub fcw_active: bool,
    /// Time in the current steering segment, s.
    pub maneuver_timer: f64,
    pub dx: f64,
    pub x_dot_0_at_trigger: f64,
    pub y_origin: f64,
    pub pnr_crossed: bool,
    pub mu_est: f64,
    pub handback_pending: bool,
    /// Ego x where `dx` was last reset.
    pub x_start: f64,
    /// Last phase input, held while the object is out of view.
    pub phase: Option<(f64, f64)>,
    pub sector: Option<Sector>,
    /// Limit braking was commanded at some point in this run.
    pub braking_commanded: bool,
    /// Limit braking was commanded before the point of no return.
    pub braked_before_pnr: bool,
    /// Number of completed returns.
    pub returns_completed: u32,
    pub steer_clamps: u64,
    pub table_clamps: u64,
}

impl EoamContext {
    pub fn new(y_origin: f64, mu_est: f64) -> Self {
        Self {
            y_origin,
            mu_est,
            ..Self::default()
        }
    }

    fn start_segment(&mut self, ego: &VehicleState) {
        self.dx = 0.0;
        self.x_start = ego.x;
        self.maneuver_timer = 0.0;
        self.x_dot_0_at_trigger = ego.v_x;
    }

    fn enter(&mut self, next: EoamMode, ego: &VehicleState) {
        debug_assert!(self.mode.can_transition_to(next));
        match next {
            EoamMode::UpdateSteerBrake => {
                self.start_segment(ego);
                self.pnr_crossed = false;
            }
            EoamMode::Return => self.start_segment(ego),
            EoamMode::Normal => {
                self.fcw_active = false;
                self.phase = None;
                self.sector = None;
            }
            EoamMode::UpdateBrake | EoamMode::OncomingBrake => {
                self.braking_commanded = true;
                if !self.pnr_crossed {
                    self.braked_before_pnr = true;
                }
            }
            EoamMode::OncomingSteerBrake => {}
        }
        self.mode = next;
    }

    /// Advance timers and the differential distance after a plant step.
    pub fn advance(&mut self, ego: &VehicleState, dt: f64) {
        if self.mode.is_steering() {
            self.maneuver_timer += dt;
            self.dx = ego.x - self.x_start;
        }
    }
}

/// One transition step of the state machine. `maneuver_length` is the
/// table length at the latched speed, used to detect a completed segment.
pub fn update_mode(
    ctx: &mut EoamContext,
    detections: &[Detection],
    ego: &VehicleState,
    diagram: &PhaseDiagram,
    cfg: &RuntimeConfig,
    maneuver_length: f64,
) -> EoamMode {
    use EoamMode::*;
    let aro = detections
        .iter()
        .filter(|d| d.is_in_lane_aro() && d.rel_dist >= 0.0)
        .min_by(|a, b| a.rel_dist.total_cmp(&b.rel_dist));
    let oncoming = detections
        .iter()
        .any(|d| d.is_oncoming_threat() && d.rel_speed > 0.0);
    match aro {
        Some(a) => ctx.phase = Some((a.rel_dist, a.rel_speed)),
        None if ctx.mode == Normal => ctx.phase = None,
        None => {}
    }
    let sector = ctx
        .phase
        .map(|(d, v)| diagram.classify(d, v))
        .unwrap_or(Sector::G);
    ctx.sector = ctx.phase.map(|_| sector);

    let lateral = abs(ego.y - ctx.y_origin);
    if ctx.mode == UpdateSteerBrake && lateral >= cfg.y_pnr() {
        ctx.pnr_crossed = true;
    }

    match ctx.mode {
        Normal => {
            if sector.is_steering() {
                ctx.handback_pending = false;
                ctx.enter(UpdateSteerBrake, ego);
            } else if sector.is_braking() {
                ctx.handback_pending = false;
                ctx.enter(UpdateBrake, ego);
            } else if sector == Sector::E {
                ctx.fcw_active = true;
            }
        }
        UpdateBrake => {
            if sector.is_steering() {
                ctx.enter(UpdateSteerBrake, ego);
            } else if sector == Sector::G {
                ctx.enter(Normal, ego);
            }
        }
        Return => {
            let settled = ctx.dx >= maneuver_length
                && lateral < cfg.return_tolerance
                && abs(ego.psi) < 0.02
                && abs(ego.psi_dot) < 0.05;
            if settled || ctx.maneuver_timer >= cfg.return_timeout {
                ctx.handback_pending = true;
                ctx.returns_completed += 1;
                ctx.enter(Normal, ego);
            }
        }
        OncomingSteerBrake => {
            if ctx.dx >= maneuver_length {
                ctx.enter(Return, ego);
            }
        }
        UpdateSteerBrake | OncomingBrake => {}
    }

    if oncoming {
        match ctx.mode {
            UpdateBrake => ctx.enter(OncomingBrake, ego),
            UpdateSteerBrake if !ctx.pnr_crossed => ctx.enter(OncomingBrake, ego),
            UpdateSteerBrake => ctx.enter(OncomingSteerBrake, ego),
            _ => {}
        }
    }
    if ctx.mode == UpdateSteerBrake && ctx.maneuver_timer >= cfg.maneuver_time {
        ctx.enter(Return, ego);
    }
    ctx.mode
}

/// Path targets for the active mode in global lateral coordinates. Past the
/// maneuver length the targets become straight lane keeping.
pub fn path_targets(
    ctx: &mut EoamContext,
    table: &LookupTable3D,
    cfg: &RuntimeConfig,
) -> (TableSample, f64) {
    let lane_keep = |y: f64| TableSample {
        y,
        ax: 0.0,
        theta: 0.0,
        kappa: 0.0,
    };
    if !ctx.mode.is_steering() {
        return (lane_keep(ctx.y_origin), 0.0);
    }
    let look = table.interpolate(ctx.x_dot_0_at_trigger, ctx.dx, ctx.mu_est);
    if look.clamped() {
        ctx.table_clamps += 1;
    }
    let v = look.values;
    let past = ctx.dx >= look.length;
    let target = match ctx.mode {
        EoamMode::Return => {
            let top = ctx.y_origin + cfg.lane_change;
            if past {
                lane_keep(ctx.y_origin)
            } else {
                TableSample {
                    y: top - v.y,
                    ax: v.ax,
                    theta: -v.theta,
                    kappa: -v.kappa,
                }
            }
        }
        _ => {
            if past {
                lane_keep(ctx.y_origin + cfg.lane_change)
            } else {
                TableSample {
                    y: ctx.y_origin + v.y,
                    ..v
                }
            }
        }
    };
    (target, look.length)
}

/// `(ego.y − y_target, e_offset + L_la·sin(ψ − θ_target))`.
pub fn lateral_errors(
    ego: &VehicleState,
    target: &TableSample,
    gains: &SteeringGains,
) -> (f64, f64) {
    let e_off = ego.y - target.y;
    (e_off, e_off + gains.l_la * sin(ego.psi - target.theta))
}

/// Feedforward, offset/lookahead feedback and yaw damping, clamped to the
/// steering range and rate limited against `prev_delta`.
pub fn steering_control(
    ego: &VehicleState,
    target: &TableSample,
    prev_delta: f64,
    dt: f64,
    gains: &SteeringGains,
    params: &VehicleParams,
) -> (f64, bool) {
    let (e_off, e_la) = lateral_errors(ego, target, gains);
    let vx = ego.v_x;
    let ff = params.wheelbase() * target.kappa + gains.k_us * target.kappa * vx * vx;
    let sched = if vx > gains.schedule_speed {
        (gains.schedule_speed / vx) * (gains.schedule_speed / vx)
    } else {
        1.0
    };
    let fb = -sched * gains.k_off * e_off - gains.k_la * e_la;
    let yd = -gains.k_yd * (ego.psi_dot - target.kappa * vx);
    let raw = ff + fb + yd;
    let mut clamped = false;
    let mut delta = raw;
    if delta > params.delta_max {
        delta = params.delta_max;
        clamped = true;
    } else if delta < params.delta_min {
        delta = params.delta_min;
        clamped = true;
    }
    let step = gains.rate_limit * dt;
    let limited = delta.clamp(prev_delta - step, prev_delta + step);
    (limited, clamped || limited != delta)
}

/// Tractive force tracking a longitudinal acceleration reference.
pub fn accel_control(
    pid: &mut Pid,
    gains: &PidGains,
    ax_target: f64,
    ax_actual: f64,
    dt: f64,
    mu: f64,
    params: &VehicleParams,
) -> f64 {
    let lo = params.max_brake_force(mu) / params.m;
    let hi = params.max_drive_force(mu) / params.m;
    let (u, _) = pid.update(ax_target - ax_actual, dt, gains, lo, hi);
    params.m * u
}

/// Tractive force holding a speed reference.
pub fn speed_control(
    pid: &mut Pid,
    gains: &PidGains,
    v_target: f64,
    v_actual: f64,
    dt: f64,
    mu: f64,
    params: &VehicleParams,
) -> f64 {
    let lo = params.max_brake_force(mu) / params.m;
    let hi = params.max_drive_force(mu) / params.m;
    let (u, _) = pid.update(v_target - v_actual, dt, gains, lo, hi);
    params.m * u
}

/// Clip a longitudinal acceleration reference to what the friction circle
/// leaves at lateral acceleration `a_y`.
pub fn ellipse_limited_accel(ax: f64, a_y: f64, mu: f64) -> f64 {
    let lim = mu * G;
    let cap = sqrt((lim * lim - a_y * a_y).max(0.0));
    ax.clamp(-cap, cap)
}

/// Longitudinal command for the current mode.
#[allow(clippy::too_many_arguments)]
pub fn longitudinal_command(
    mode: EoamMode,
    pid: &mut Pid,
    cfg: &RuntimeConfig,
    ax_target: f64,
    ax_actual: f64,
    v_target: f64,
    v_actual: f64,
    dt: f64,
    mu: f64,
    params: &VehicleParams,
) -> f64 {
    match mode {
        m if m.is_limit_braking() => params.limit_brake_force(mu),
        m if m.is_steering() => {
            accel_control(pid, &cfg.accel_pid, ax_target, ax_actual, dt, mu, params)
        }
        _ => speed_control(pid, &cfg.speed_pid, v_target, v_actual, dt, mu, params),
    }
}
