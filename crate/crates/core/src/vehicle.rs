//! Planar three-degree-of-freedom single-track vehicle with a saturating
//! linear tire.
//!
//! Body frame: `v_x` forward, `v_y` to the left, yaw positive counter-clockwise.
//! The same model is the closed-loop plant and the dynamics the offline
//! planner inverts and optimizes against.

use crate::error::{Error, Result};
use crate::math::{abs, atan, atan2, cos, signum, sin, G};

/// Below this longitudinal speed the slip-angle model is not evaluated.
pub const VX_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VehicleParams {
    /// kg
    pub m: f64,
    /// kg·m²
    pub i_z: f64,
    /// CG to front axle, m
    pub d_f: f64,
    /// CG to rear axle, m
    pub d_r: f64,
    pub wid_ego: f64,
    /// CG to front bumper, m
    pub len_front: f64,
    /// CG to rear bumper, m
    pub len_rear: f64,
    /// Per-axle cornering stiffness, N/rad.
    pub c_alpha_f: f64,
    pub c_alpha_r: f64,
    /// Slip angle at which the lateral force plateaus, rad.
    pub alpha_star: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub steering_ratio: f64,
    /// Peak engine tractive force on mu = 1, N.
    pub f_t_max_eng: f64,
    /// Peak braking force on mu = 1, N (negative).
    pub f_t_min_brk: f64,
    /// Fraction of mu·g reachable in straight braking without lockup.
    pub decel_eff: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let m = 1650.0;
        Self {
            m,
            i_z: 2900.0,
            d_f: 1.40,
            d_r: 1.65,
            wid_ego: 1.88,
            len_front: 2.0,
            len_rear: 2.9,
            c_alpha_f: 1.2e5,
            c_alpha_r: 1.2e5,
            alpha_star: 0.0873,
            delta_min: -0.5,
            delta_max: 0.5,
            steering_ratio: 16.0,
            f_t_max_eng: 6000.0,
            f_t_min_brk: -m * G,
            decel_eff: 0.9,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        fn pos(name: &'static str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be positive and finite",
                })
            }
        }
        pos("m", self.m)?;
        pos("i_z", self.i_z)?;
        pos("d_f", self.d_f)?;
        pos("d_r", self.d_r)?;
        pos("wid_ego", self.wid_ego)?;
        pos("len_front", self.len_front)?;
        pos("len_rear", self.len_rear)?;
        pos("c_alpha_f", self.c_alpha_f)?;
        pos("c_alpha_r", self.c_alpha_r)?;
        pos("alpha_star", self.alpha_star)?;
        pos("steering_ratio", self.steering_ratio)?;
        pos("f_t_max_eng", self.f_t_max_eng)?;
        if !(self.delta_min < 0.0 && self.delta_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_min/delta_max",
                reason: "bounds must bracket zero",
            });
        }
        if !(self.f_t_min_brk < 0.0) {
            return Err(Error::InvalidParameter {
                name: "f_t_min_brk",
                reason: "must be negative",
            });
        }
        if !(self.decel_eff > 0.0 && self.decel_eff <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "decel_eff",
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.d_f + self.d_r
    }

    /// Saturated lateral force magnitude of the front axle on surface `mu`.
    pub fn front_plateau(&self, mu: f64) -> f64 {
        mu * self.c_alpha_f * self.alpha_star
    }

    pub fn rear_plateau(&self, mu: f64) -> f64 {
        mu * self.c_alpha_r * self.alpha_star
    }

    /// Engine force limit scaled by surface friction.
    pub fn max_drive_force(&self, mu: f64) -> f64 {
        mu * self.f_t_max_eng
    }

    /// Braking force limit scaled by surface friction (negative).
    pub fn max_brake_force(&self, mu: f64) -> f64 {
        mu * self.f_t_min_brk
    }

    /// Longitudinal semi-axis of the friction ellipse in force units.
    pub fn ellipse_long_axis(&self, mu: f64) -> f64 {
        self.decel_eff * mu * abs(self.f_t_min_brk)
    }

    /// Force commanded during straight-line limit braking.
    pub fn limit_brake_force(&self, mu: f64) -> f64 {
        mu * self.f_t_min_brk * self.decel_eff
    }

    /// Linear-range understeer gradient, s²/m (rad per m/s² of lateral accel).
    pub fn understeer_gradient(&self) -> f64 {
        self.m / self.wheelbase() * (self.d_r / self.c_alpha_f - self.d_f / self.c_alpha_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub psi: f64,
    pub psi_dot: f64,
}

impl VehicleState {
    pub fn straight(x: f64, y: f64, v_x: f64) -> Self {
        Self {
            x,
            y,
            v_x,
            ..Self::default()
        }
    }

    /// Body sideslip angle.
    pub fn beta(&self) -> f64 {
        atan2(self.v_y, self.v_x)
    }

    /// Global-frame velocity components.
    pub fn global_velocity(&self) -> (f64, f64) {
        let (s, c) = (sin(self.psi), cos(self.psi));
        (self.v_x * c - self.v_y * s, self.v_x * s + self.v_y * c)
    }

    fn axpy(&self, k: f64, d: &StateDerivative) -> Self {
        Self {
            x: self.x + k * d.x,
            y: self.y + k * d.y,
            v_x: self.v_x + k * d.v_x,
            v_y: self.v_y + k * d.v_y,
            psi: self.psi + k * d.psi,
            psi_dot: self.psi_dot + k * d.psi_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Tractive force at the wheels, N; negative brakes.
    pub f_t: f64,
    /// Road-wheel steering angle, rad.
    pub delta: f64,
}

impl ControlInput {
    /// Clamp to steering bounds and to the mu-scaled force bounds.
    pub fn clamped(self, mu: f64, p: &VehicleParams) -> Self {
        Self {
            f_t: self.f_t.clamp(p.max_brake_force(mu), p.max_drive_force(mu)),
            delta: self.delta.clamp(p.delta_min, p.delta_max),
        }
    }
}

/// Time derivative of [`VehicleState`], same field order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub x: f64,
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub psi: f64,
    pub psi_dot: f64,
}

/// Axle forces and body accelerations behind a derivative evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    pub alpha_f: f64,
    pub alpha_r: f64,
    pub f_yf: f64,
    pub f_yr: f64,
    /// Body-frame longitudinal acceleration `v̇x − vy·ψ̇`.
    pub a_x: f64,
    /// Body-frame lateral acceleration `v̇y + vx·ψ̇`.
    pub a_y: f64,
}

/// Saturating linear lateral tire force.
///
/// Linear with slope `-mu*c_alpha` up to `alpha_star`, flat beyond it.
pub fn lateral_tire_force(c_alpha: f64, alpha: f64, mu: f64, alpha_star: f64) -> f64 {
    if abs(alpha) < alpha_star {
        -mu * c_alpha * alpha
    } else {
        -mu * c_alpha * alpha_star * signum(alpha)
    }
}

/// Front and rear slip angles from single-track kinematics.
pub fn slip_angles(state: &VehicleState, delta: f64, p: &VehicleParams) -> Result<(f64, f64)> {
    if !(state.v_x > VX_FLOOR) {
        return Err(Error::BelowSpeedFloor { vx: state.v_x });
    }
    let alpha_f = atan((state.v_y + p.d_f * state.psi_dot) / state.v_x) - delta;
    let alpha_r = atan((state.v_y - p.d_r * state.psi_dot) / state.v_x);
    Ok((alpha_f, alpha_r))
}

/// Forces and body accelerations for a state/input pair.
pub fn forces(
    state: &VehicleState,
    input: &ControlInput,
    mu: f64,
    p: &VehicleParams,
) -> Result<ForceBreakdown> {
    let (alpha_f, alpha_r) = slip_angles(state, input.delta, p)?;
    let f_yf = lateral_tire_force(p.c_alpha_f, alpha_f, mu, p.alpha_star);
    let f_yr = lateral_tire_force(p.c_alpha_r, alpha_r, mu, p.alpha_star);
    let (sd, cd) = (sin(input.delta), cos(input.delta));
    Ok(ForceBreakdown {
        alpha_f,
        alpha_r,
        f_yf,
        f_yr,
        a_x: (input.f_t - f_yf * sd) / p.m,
        a_y: (f_yr + f_yf * cd) / p.m,
    })
}

pub fn derivatives(
    state: &VehicleState,
    input: &ControlInput,
    mu: f64,
    p: &VehicleParams,
) -> Result<StateDerivative> {
    let fb = forces(state, input, mu, p)?;
    let (xd, yd) = state.global_velocity();
    let r = state.psi_dot;
    let psi_ddot = (p.d_f * fb.f_yf * cos(input.delta) - p.d_r * fb.f_yr) / p.i_z;
    Ok(StateDerivative {
        x: xd,
        y: yd,
        v_x: fb.a_x + state.v_y * r,
        v_y: fb.a_y - state.v_x * r,
        psi: r,
        psi_dot: psi_ddot,
    })
}

/// One classical fourth-order Runge–Kutta step with the input held.
pub fn step(
    state: &VehicleState,
    input: &ControlInput,
    mu: f64,
    p: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "must be positive",
        });
    }
    let k1 = derivatives(state, input, mu, p)?;
    let k2 = derivatives(&state.axpy(0.5 * dt, &k1), input, mu, p)?;
    let k3 = derivatives(&state.axpy(0.5 * dt, &k2), input, mu, p)?;
    let k4 = derivatives(&state.axpy(dt, &k3), input, mu, p)?;
    let comb = StateDerivative {
        x: k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x,
        y: k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y,
        v_x: k1.v_x + 2.0 * k2.v_x + 2.0 * k3.v_x + k4.v_x,
        v_y: k1.v_y + 2.0 * k2.v_y + 2.0 * k3.v_y + k4.v_y,
        psi: k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi,
        psi_dot: k1.psi_dot + 2.0 * k2.psi_dot + 2.0 * k3.psi_dot + k4.psi_dot,
    };
    Ok(state.axpy(dt / 6.0, &comb))
}

/// Plant step used by the simulator: below the speed floor the lateral
/// dynamics freeze and the vehicle rolls straight, never reversing.
pub fn plant_step(
    state: &VehicleState,
    input: &ControlInput,
    mu: f64,
    p: &VehicleParams,
    dt: f64,
) -> VehicleState {
    if state.v_x > VX_FLOOR + 0.05 {
        if let Ok(next) = step(state, input, mu, p, dt) {
            if next.v_x > VX_FLOOR {
                return next;
            }
        }
    }
    let a = input.f_t / p.m;
    let v_next = (state.v_x + a * dt).max(0.0);
    let v_mid = 0.5 * (state.v_x + v_next);
    VehicleState {
        x: state.x + v_mid * cos(state.psi) * dt,
        y: state.y + v_mid * sin(state.psi) * dt,
        v_x: v_next,
        v_y: 0.0,
        psi: state.psi,
        psi_dot: 0.0,
    }
}

/// `1 − (a_x² + a_y²)/(mu·g)²`; non-negative inside the friction circle.
pub fn friction_ellipse_margin(a_x: f64, a_y: f64, mu: f64) -> f64 {
    let lim = mu * G;
    1.0 - ((a_x / lim) * (a_x / lim) + (a_y / lim) * (a_y / lim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;

    fn p() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn tire_force_examples() {
        let p = p();
        assert_eq!(lateral_tire_force(p.c_alpha_f, 0.0, 1.0, p.alpha_star), 0.0);
        let f = lateral_tire_force(p.c_alpha_f, p.alpha_star, 1.0, p.alpha_star);
        assert!((f + p.c_alpha_f * p.alpha_star).abs() < 1e-9);
        let f = lateral_tire_force(p.c_alpha_f, 2.0 * p.alpha_star, 0.5, p.alpha_star);
        assert!((f + 0.5 * p.c_alpha_f * p.alpha_star).abs() < 1e-9);
    }

    #[test]
    fn slip_angle_examples() {
        let p = p();
        let s = VehicleState::straight(0.0, 0.0, 20.0);
        assert_eq!(slip_angles(&s, 0.0, &p).unwrap(), (0.0, 0.0));
        let (af, ar) = slip_angles(&s, 0.02, &p).unwrap();
        assert!((af + 0.02).abs() < 1e-15 && ar == 0.0);

        let s = VehicleState {
            v_x: 27.78,
            v_y: 0.5,
            psi_dot: 0.2,
            ..Default::default()
        };
        let p2 = VehicleParams {
            d_f: 1.4,
            d_r: 1.65,
            ..p
        };
        let (af, ar) = slip_angles(&s, 0.0, &p2).unwrap();
        // hand arithmetic: atan(0.78/27.78), atan(0.17/27.78)
        assert!((af - 0.028_070_1).abs() < 1e-6, "{af}");
        assert!((ar - 0.006_119_5).abs() < 1e-6, "{ar}");
    }

    #[test]
    fn slip_angles_reject_floor() {
        let s = VehicleState::straight(0.0, 0.0, 0.5);
        assert!(matches!(
            slip_angles(&s, 0.0, &p()),
            Err(Error::BelowSpeedFloor { .. })
        ));
    }

    #[test]
    fn straight_line_equilibrium() {
        let s = VehicleState::straight(0.0, 0.0, 25.0);
        let d = derivatives(&s, &ControlInput::default(), 1.0, &p()).unwrap();
        assert_eq!(d.x, 25.0);
        assert_eq!(
            (d.y, d.v_x, d.v_y, d.psi, d.psi_dot),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn braking_decel() {
        let p = p();
        let mu = 1.0;
        let s = VehicleState::straight(0.0, 0.0, 25.0);
        let u = ControlInput {
            f_t: -mu * p.m * G * p.decel_eff,
            delta: 0.0,
        };
        let d = derivatives(&s, &u, mu, &p).unwrap();
        assert!((d.v_x + mu * G * p.decel_eff).abs() < 1e-12);
    }

    #[test]
    fn steady_state_yaw_gain() {
        // Linear bicycle: r/δ = v / (L + K_us v²).
        let p = p();
        let v = 20.0;
        let delta = 0.005;
        let u = ControlInput { f_t: 0.0, delta };
        let mut s = VehicleState::straight(0.0, 0.0, v);
        for _ in 0..8000 {
            s = step(&s, &u, 1.0, &p, 1e-3).unwrap();
            s.v_x = v;
        }
        let expected = v * delta / (p.wheelbase() + p.understeer_gradient() * v * v);
        let rel = (s.psi_dot - expected).abs() / expected;
        assert!(rel < 5e-3, "r = {}, expected {expected}", s.psi_dot);
    }

    #[test]
    fn zero_input_straight_line() {
        let mut s = VehicleState::straight(0.0, 0.0, 20.0);
        for _ in 0..1000 {
            s = step(&s, &ControlInput::default(), 1.0, &p(), 1e-3).unwrap();
        }
        assert!((s.x - 20.0).abs() < 1e-9);
        assert_eq!(s.v_x, 20.0);
    }

    #[test]
    fn limit_braking_stop_distance() {
        let p = p();
        let mu = 1.0;
        let v0: f64 = 100.0 / 3.6;
        let u = ControlInput {
            f_t: p.limit_brake_force(mu),
            delta: 0.0,
        };
        let mut s = VehicleState::straight(0.0, 0.0, v0);
        while s.v_x > 0.0 {
            s = plant_step(&s, &u, mu, &p, 1e-3);
        }
        let oracle = v0 * v0 / (2.0 * mu * G * p.decel_eff);
        assert!((s.x - oracle).abs() / oracle < 5e-3);
    }

    #[test]
    fn rk4_error_falls_with_dt_to_the_fourth() {
        let p = p();
        let u = ControlInput {
            f_t: 0.0,
            delta: 0.04,
        };
        let end = |dt: f64| {
            let mut s = VehicleState::straight(0.0, 0.0, 20.0);
            for _ in 0..(2.0 / dt).round() as usize {
                s = step(&s, &u, 1.0, &p, dt).unwrap();
            }
            s
        };
        let truth = end(1.25e-3);
        let err = |dt: f64| {
            let s = end(dt);
            sqrt((s.x - truth.x).powi(2) + (s.y - truth.y).powi(2))
        };
        let ratio = err(0.04) / err(0.02);
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn halving_dt_converges() {
        let p = p();
        let u = ControlInput {
            f_t: 500.0,
            delta: 0.03,
        };
        let run = |dt: f64| {
            let mut s = VehicleState::straight(0.0, 0.0, 25.0);
            let n = (5.0 / dt).round() as usize;
            for _ in 0..n {
                s = step(&s, &u, 1.0, &p, dt).unwrap();
            }
            s
        };
        let a = run(2e-3);
        let b = run(1e-3);
        assert!(sqrt((a.x - b.x).powi(2) + (a.y - b.y).powi(2)) < 1e-6);
    }

    #[test]
    fn ellipse_margin_examples() {
        assert_eq!(friction_ellipse_margin(0.0, 0.0, 0.7), 1.0);
        assert!(friction_ellipse_margin(0.0, 0.7 * G, 0.7).abs() < 1e-12);
        assert!(friction_ellipse_margin(0.6 * G, 0.8 * G, 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_params_valid() {
        p().validate().unwrap();
        let bad = VehicleParams {
            decel_eff: 1.5,
            ..p()
        };
        assert!(bad.validate().is_err());
    }
}
