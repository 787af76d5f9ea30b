//! Quasi-steady inverse dynamics along an arc-length path: the steering,
//! slip angles and axle forces that make the single-track model follow the
//! path at a prescribed speed, and the longitudinal acceleration those
//! lateral demands leave available.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, atan, cos, sqrt, tan};
use crate::path::ArcPath;
use crate::vehicle::{VehicleParams, VX_FLOOR};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InverseSolution {
    pub s: Vec<f64>,
    pub vx: Vec<f64>,
    /// Required body lateral acceleration `K·v²`.
    pub a_y: Vec<f64>,
    /// Required yaw rate `K·v`.
    pub psi_dot: Vec<f64>,
    /// Required yaw acceleration `d(K·v)/ds · v`.
    pub psi_ddot: Vec<f64>,
    pub delta: Vec<f64>,
    pub alpha_f: Vec<f64>,
    pub alpha_r: Vec<f64>,
    pub f_yf: Vec<f64>,
    pub f_yr: Vec<f64>,
    pub feasible: Vec<bool>,
}

impl InverseSolution {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }

    pub fn infeasible_count(&self) -> usize {
        self.feasible.iter().filter(|&&f| !f).count()
    }

    /// Residuals of the exact lateral force and yaw moment balances at
    /// sample `i`: `(F_yr + F_yf cos δ − m a_y, d_f F_yf cos δ − d_r F_yr − I_z ψ̈)`.
    pub fn residuals(&self, i: usize, p: &VehicleParams) -> (f64, f64) {
        let cd = cos(self.delta[i]);
        (
            self.f_yr[i] + self.f_yf[i] * cd - p.m * self.a_y[i],
            p.d_f * self.f_yf[i] * cd - p.d_r * self.f_yr[i] - p.i_z * self.psi_ddot[i],
        )
    }
}

/// Inverse of the saturating tire law; `None` past the plateau.
fn slip_for_force(force: f64, c_alpha: f64, mu: f64, alpha_star: f64) -> Option<f64> {
    let plateau = mu * c_alpha * alpha_star;
    if abs(force) > plateau * (1.0 + 1e-12) {
        return None;
    }
    Some((-force / (mu * c_alpha)).clamp(-alpha_star, alpha_star))
}

/// Steering and axle forces along `arc` at speeds `vx_of_s`.
///
/// The lateral force and moment balances are linear in `F_yr` and
/// `F_yf·cos δ`; the first pass takes `cos δ = 1`, and the front force is then
/// refined by fixed-point iteration until the exact balances close.
pub fn solve_inverse(
    arc: &ArcPath,
    vx_of_s: &[f64],
    mu: f64,
    p: &VehicleParams,
) -> Result<InverseSolution> {
    let n = arc.len();
    if vx_of_s.len() != n {
        return Err(Error::InvalidParameter {
            name: "vx_of_s",
            reason: "length must match the path samples",
        });
    }
    if let Some(&v) = vx_of_s.iter().find(|&&v| !(v > VX_FLOOR)) {
        return Err(Error::BelowSpeedFloor { vx: v });
    }
    if n < 3 {
        return Err(Error::EmptyGrid);
    }

    let r: Vec<f64> = (0..n).map(|i| arc.kappa[i] * vx_of_s[i]).collect();
    let mut sol = InverseSolution {
        s: arc.s.clone(),
        vx: vx_of_s.to_vec(),
        a_y: (0..n)
            .map(|i| arc.kappa[i] * vx_of_s[i] * vx_of_s[i])
            .collect(),
        psi_dot: r.clone(),
        psi_ddot: vec![0.0; n],
        delta: vec![0.0; n],
        alpha_f: vec![0.0; n],
        alpha_r: vec![0.0; n],
        f_yf: vec![0.0; n],
        f_yr: vec![0.0; n],
        feasible: vec![true; n],
    };
    for i in 0..n {
        let drds = if i == 0 {
            (r[1] - r[0]) / (arc.s[1] - arc.s[0])
        } else if i == n - 1 {
            (r[n - 1] - r[n - 2]) / (arc.s[n - 1] - arc.s[n - 2])
        } else {
            (r[i + 1] - r[i - 1]) / (arc.s[i + 1] - arc.s[i - 1])
        };
        sol.psi_ddot[i] = drds * vx_of_s[i];
    }

    let l = p.wheelbase();
    for i in 0..n {
        let vx = vx_of_s[i];
        // exact linear solve for Q = F_yf cos δ and F_yr
        let q = (p.m * sol.a_y[i] * p.d_r + p.i_z * sol.psi_ddot[i]) / l;
        let f_yr = (p.m * sol.a_y[i] * p.d_f - p.i_z * sol.psi_ddot[i]) / l;
        sol.f_yr[i] = f_yr;
        let Some(alpha_r) = slip_for_force(f_yr, p.c_alpha_r, mu, p.alpha_star) else {
            sol.feasible[i] = false;
            continue;
        };
        sol.alpha_r[i] = alpha_r;
        let vy = vx * tan(alpha_r) + p.d_r * r[i];
        let kin = atan((vy + p.d_f * r[i]) / vx);

        let mut delta = 0.0;
        let mut ok = true;
        for _ in 0..60 {
            let f_yf = q / cos(delta);
            let Some(alpha_f) = slip_for_force(f_yf, p.c_alpha_f, mu, p.alpha_star) else {
                sol.f_yf[i] = f_yf;
                ok = false;
                break;
            };
            let next = kin - alpha_f;
            let done = abs(next - delta) < 1e-15;
            delta = next;
            sol.alpha_f[i] = alpha_f;
            sol.f_yf[i] = f_yf;
            if done {
                break;
            }
        }
        if !ok {
            sol.feasible[i] = false;
            continue;
        }
        // final force consistent with the converged angle
        sol.f_yf[i] = q / cos(delta);
        sol.delta[i] = delta;
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccelEnvelope {
    pub s: Vec<f64>,
    pub ax_min: Vec<f64>,
    pub ax_max: Vec<f64>,
    /// Lateral demand leaves no longitudinal capacity (or steering infeasible).
    pub empty: Vec<bool>,
}

/// Longitudinal force magnitude left by the friction ellipse when the rear
/// axle carries `f_yr`; `None` outside the ellipse.
pub fn ellipse_long_capacity(f_yr: f64, mu: f64, p: &VehicleParams) -> Option<f64> {
    let ratio = f_yr / p.rear_plateau(mu);
    let rem = 1.0 - ratio * ratio;
    if rem < -1e-12 {
        None
    } else {
        Some(p.ellipse_long_axis(mu) * sqrt(rem.max(0.0)))
    }
}

/// Tractive-acceleration bounds along the solved path.
pub fn accel_envelope(sol: &InverseSolution, mu: f64, p: &VehicleParams) -> AccelEnvelope {
    let n = sol.len();
    let mut env = AccelEnvelope {
        s: sol.s.clone(),
        ax_min: vec![0.0; n],
        ax_max: vec![0.0; n],
        empty: vec![false; n],
    };
    for i in 0..n {
        let cap = if sol.feasible[i] {
            ellipse_long_capacity(sol.f_yr[i], mu, p)
        } else {
            None
        };
        match cap {
            Some(cap) => {
                env.ax_max[i] = p.max_drive_force(mu).min(cap) / p.m;
                env.ax_min[i] = -abs(p.max_brake_force(mu)).min(cap) / p.m;
            }
            None => env.empty[i] = true,
        }
    }
    env
}

/// Front-wheel angle needed for a steady turn of curvature `kappa` at speed
/// `v` in the linear tire range (kinematic plus understeer term).
pub fn steady_state_steer(kappa: f64, v: f64, p: &VehicleParams) -> f64 {
    p.wheelbase() * kappa + p.understeer_gradient() * kappa * v * v
}
