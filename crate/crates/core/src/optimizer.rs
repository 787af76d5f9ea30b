//! Distance-minimizing longitudinal acceleration profile for a fixed
//! steering schedule, and the per-(speed, mu) trajectory pipeline built on it.
//!
//! The transcription uses `n_nodes` nodes in normalized time with a
//! piecewise-linear body-frame acceleration command between them. The final
//! time is a scaling variable, pinned for every control vector by solving
//! `y(t_f) = y_f` exactly, so the terminal condition holds at the last node
//! by construction. Node states come from an embedded fixed-step RK4 pass in
//! the global frame. Path constraints become per-node acceleration bounds
//! that depend on the trajectory; they are re-derived after every step and
//! the iterate is re-projected until it is a fixed point.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inverse::{solve_inverse, InverseSolution};
use crate::math::{abs, atan, atan2, cos, hypot, interp_clamped, sin, sqrt, G};
use crate::path::{
    arc_length_parameterize, quintic_lane_change, PlanarCurve, QuinticPath, DEFAULT_SAMPLES,
};
use crate::vehicle::{lateral_tire_force, VehicleParams, VX_FLOOR};

/// Lowest maneuver speed the offline pipeline optimizes for.
pub const MIN_DESIGN_SPEED: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    /// Speed at maneuver start, m/s.
    pub x_dot_0: f64,
    pub mu: f64,
    /// Lateral offset to reach, m.
    pub y_f: f64,
    pub params: VehicleParams,
    pub n_nodes: usize,
    /// RK4 steps per node interval.
    pub substeps: usize,
    pub max_iter: usize,
    /// Relative objective change treated as converged.
    pub tol: f64,
    /// The profile may not slow the vehicle below this fraction of `x_dot_0`.
    pub min_speed_ratio: f64,
}

impl OcpSpec {
    pub fn new(x_dot_0: f64, mu: f64, y_f: f64, params: VehicleParams) -> Self {
        Self {
            x_dot_0,
            mu,
            y_f,
            params,
            n_nodes: 61,
            substeps: 6,
            max_iter: 120,
            tol: 1e-7,
            min_speed_ratio: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.x_dot_0 >= MIN_DESIGN_SPEED) {
            return Err(Error::OutOfRange {
                value: self.x_dot_0,
                lo: MIN_DESIGN_SPEED,
                hi: f64::INFINITY,
            });
        }
        if !(self.y_f > 0.0) {
            return Err(Error::InvalidParameter {
                name: "y_f",
                reason: "must be positive",
            });
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: "must lie in (0, 1]",
            });
        }
        if self.n_nodes < 3 || self.substeps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_nodes",
                reason: "need at least 3 nodes and one substep",
            });
        }
        Ok(())
    }
}

/// Steering angle as a function of distance travelled along the path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SteeringSchedule {
    pub s: Vec<f64>,
    pub delta: Vec<f64>,
}

impl SteeringSchedule {
    pub fn from_inverse(sol: &InverseSolution) -> Self {
        Self {
            s: sol.s.clone(),
            delta: sol.delta.clone(),
        }
    }

    /// Held at the end values outside the schedule.
    pub fn at(&self, s: f64) -> f64 {
        interp_clamped(&self.s, &self.delta, s)
    }
}

/// Arc-length indexed maneuver trajectory handed to the lookup tables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FullTrajectory {
    /// Longitudinal distance from maneuver start, strictly increasing.
    pub dx: Vec<f64>,
    pub y_target: Vec<f64>,
    /// Body-frame longitudinal acceleration.
    pub ax_target: Vec<f64>,
    /// Direction of travel.
    pub theta_target: Vec<f64>,
    pub kappa_target: Vec<f64>,
    /// Speed obtained by integrating `ax_target` in time; reference only.
    pub vx_ref: Vec<f64>,
    /// Time stamps of the samples.
    pub t: Vec<f64>,
    pub x_dot_0: f64,
    pub mu: f64,
    pub t_f_achieved: f64,
}

impl FullTrajectory {
    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.dx.last().copied().unwrap_or(0.0)
    }
}

/// Geometric quintic driven at its constant design speed, sampled at `n`
/// uniform time steps.
pub fn constant_speed_trajectory(q: &QuinticPath, mu: f64, n: usize) -> FullTrajectory {
    let n = n.max(2);
    let mut tr = FullTrajectory {
        x_dot_0: q.v0,
        mu,
        t_f_achieved: q.t_f,
        ..FullTrajectory::default()
    };
    for i in 0..n {
        let t = q.t_f * i as f64 / (n - 1) as f64;
        let pt = q.point(t);
        tr.t.push(t);
        tr.dx.push(pt.x);
        tr.y_target.push(pt.y);
        tr.ax_target.push(0.0);
        tr.theta_target.push(pt.heading());
        tr.kappa_target.push(pt.curvature());
        tr.vx_ref.push(q.v0);
    }
    tr
}

/// Node values of a transcribed solution. States are global-frame
/// `[x, ẋ, y, ẏ, ψ, ψ̇]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OcpNodes {
    pub t: Vec<f64>,
    pub states: Vec<[f64; 6]>,
    /// Distance travelled, the steering schedule's index.
    pub s: Vec<f64>,
    pub a_x: Vec<f64>,
    /// Tractive force.
    pub u1: Vec<f64>,
    /// Road-wheel angle.
    pub u2: Vec<f64>,
}

impl OcpNodes {
    pub fn t_f(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    pub fn objective(&self) -> f64 {
        self.states.last().map(|s| s[0]).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpOutcome {
    pub trajectory: FullTrajectory,
    /// Same steering with zero longitudinal acceleration.
    pub baseline: FullTrajectory,
    pub nodes: OcpNodes,
    pub baseline_nodes: OcpNodes,
    pub objective: f64,
    pub baseline_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

type Aug = [f64; 7];

#[derive(Debug, Clone, Copy)]
struct Eval {
    d: Aug,
    delta: f64,
    u1: f64,
}

struct Transcription<'a> {
    spec: &'a OcpSpec,
    sched: &'a SteeringSchedule,
}

struct SimOut {
    nodes: OcpNodes,
    /// Dense samples `(t, aug state, a_x, eval)` when recorded.
    dense: Vec<(f64, Aug, f64, Eval)>,
}

impl<'a> Transcription<'a> {
    fn n(&self) -> usize {
        self.spec.n_nodes
    }

    /// Global-frame dynamics with the tractive force eliminated through the
    /// body longitudinal acceleration command.
    fn rhs(&self, x: &Aug, a_x: f64) -> Option<Eval> {
        let p = &self.spec.params;
        let mu = self.spec.mu;
        let (sp, cp) = (sin(x[4]), cos(x[4]));
        let vx = x[1] * cp + x[3] * sp;
        let vy = -x[1] * sp + x[3] * cp;
        if !(vx > VX_FLOOR) {
            return None;
        }
        let delta = self.sched.at(x[6]);
        let r = x[5];
        let alpha_f = atan((vy + p.d_f * r) / vx) - delta;
        let alpha_r = atan((vy - p.d_r * r) / vx);
        let f_f = lateral_tire_force(p.c_alpha_f, alpha_f, mu, p.alpha_star);
        let f_r = lateral_tire_force(p.c_alpha_r, alpha_r, mu, p.alpha_star);
        let u1 = p.m * a_x + f_f * sin(delta);
        let psd = x[4] + delta;
        let d = [
            x[1],
            (u1 * cp - f_r * sp - f_f * sin(psd)) / p.m,
            x[3],
            (f_r * cp + u1 * sp + f_f * cos(psd)) / p.m,
            x[5],
            (-p.d_r * f_r + p.d_f * f_f * cos(delta)) / p.i_z,
            hypot(x[1], x[3]),
        ];
        Some(Eval { d, delta, u1 })
    }

    fn initial(&self) -> Aug {
        [0.0, self.spec.x_dot_0, 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    fn simulate(&self, z: &[f64], t_f: f64, record: bool) -> Option<SimOut> {
        let n = self.n();
        let m = self.spec.substeps;
        let h = t_f / ((n - 1) * m) as f64;
        let mut x = self.initial();
        let mut nodes = OcpNodes::default();
        let mut dense = Vec::new();
        let push_node = |nodes: &mut OcpNodes, t: f64, x: &Aug, a: f64, e: &Eval| {
            nodes.t.push(t);
            nodes.states.push([x[0], x[1], x[2], x[3], x[4], x[5]]);
            nodes.s.push(x[6]);
            nodes.a_x.push(a);
            nodes.u1.push(e.u1);
            nodes.u2.push(e.delta);
        };
        for k in 0..n - 1 {
            for j in 0..m {
                let a_at = |c: f64| {
                    let w = (j as f64 + c) / m as f64;
                    z[k] + w * (z[k + 1] - z[k])
                };
                let t = h * (k * m + j) as f64;
                let a0 = a_at(0.0);
                let e1 = self.rhs(&x, a0)?;
                if j == 0 {
                    push_node(&mut nodes, t, &x, a0, &e1);
                }
                if record {
                    dense.push((t, x, a0, e1));
                }
                let k1 = e1.d;
                let k2 = self.rhs(&axpy(&x, 0.5 * h, &k1), a_at(0.5))?.d;
                let k3 = self.rhs(&axpy(&x, 0.5 * h, &k2), a_at(0.5))?.d;
                let k4 = self.rhs(&axpy(&x, h, &k3), a_at(1.0))?.d;
                for i in 0..7 {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let a_end = z[n - 1];
        let e = self.rhs(&x, a_end)?;
        push_node(&mut nodes, t_f, &x, a_end, &e);
        if record {
            dense.push((t_f, x, a_end, e));
        }
        Some(SimOut { nodes, dense })
    }

    fn terminal(&self, z: &[f64], t_f: f64) -> Option<(f64, f64)> {
        let out = self.simulate(z, t_f, false)?;
        let last = out.nodes.states.last()?;
        Some((last[0], last[2] - self.spec.y_f))
    }

    /// Final time at which the lateral target is met for control vector `z`.
    fn solve_tf(&self, z: &[f64], guess: f64) -> Option<f64> {
        let f = |t: f64| self.terminal(z, t).map(|v| v.1);
        let mut lo = guess;
        let mut flo = f(lo)?;
        let mut hi;
        let mut fhi;
        if flo < 0.0 {
            hi = lo;
            fhi = flo;
            let mut tries = 0;
            while fhi < 0.0 {
                lo = hi;
                flo = fhi;
                hi *= 1.08;
                fhi = f(hi)?;
                tries += 1;
                if tries > 40 {
                    return None;
                }
            }
        } else {
            hi = lo;
            fhi = flo;
            let mut tries = 0;
            while flo >= 0.0 {
                hi = lo;
                fhi = flo;
                lo /= 1.08;
                flo = f(lo)?;
                tries += 1;
                if tries > 40 {
                    return None;
                }
            }
        }
        // Illinois regula falsi
        let mut side = 0i8;
        for _ in 0..80 {
            let t = (lo * fhi - hi * flo) / (fhi - flo);
            let ft = f(t)?;
            if abs(ft) < 1e-12 || (hi - lo) < 1e-13 * hi {
                return Some(t);
            }
            if ft < 0.0 {
                lo = t;
                flo = ft;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                fhi = ft;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Per-node admissible acceleration interval given the node forces.
    fn bounds(&self, nodes: &OcpNodes) -> (Vec<f64>, Vec<f64>) {
        let p = &self.spec.params;
        let mu = self.spec.mu;
        let v_min = self.spec.min_speed_ratio * self.spec.x_dot_0;
        let n = nodes.t.len();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for k in 0..n {
            let st = &nodes.states[k];
            let (sp, cp) = (sin(st[4]), cos(st[4]));
            let vx = st[1] * cp + st[3] * sp;
            let vy = -st[1] * sp + st[3] * cp;
            let delta = nodes.u2[k];
            let alpha_f = atan((vy + p.d_f * st[5]) / vx) - delta;
            let alpha_r = atan((vy - p.d_r * st[5]) / vx);
            let f_f = lateral_tire_force(p.c_alpha_f, alpha_f, mu, p.alpha_star);
            let f_r = lateral_tire_force(p.c_alpha_r, alpha_r, mu, p.alpha_star);
            let ratio = f_r / p.rear_plateau(mu);
            let cap = p.ellipse_long_axis(mu) * sqrt((1.0 - ratio * ratio).max(0.0)) * (1.0 - 1e-7);
            let drag = f_f * sin(delta);
            let u_hi = cap.min(p.max_drive_force(mu) * (1.0 - 1e-7));
            let u_lo = (-cap).max(p.max_brake_force(mu) * (1.0 - 1e-7));
            hi[k] = (u_hi - drag) / p.m;
            lo[k] = (u_lo - drag) / p.m;
            let floor = -(vx - v_min) / 0.3;
            lo[k] = lo[k].max(floor.min(hi[k]));
            if lo[k] > hi[k] {
                let mid = 0.5 * (lo[k] + hi[k]);
                lo[k] = mid;
                hi[k] = mid;
            }
        }
        (lo, hi)
    }

    /// Simulate at the matching final time and re-project onto the bounds
    /// until the iterate is consistent with its own trajectory.
    fn settle(&self, mut z: Vec<f64>, guess: f64) -> Option<(Vec<f64>, f64, OcpNodes)> {
        let mut t_f = self.solve_tf(&z, guess)?;
        for _ in 0..20 {
            let nodes = self.simulate(&z, t_f, false)?.nodes;
            let (lo, hi) = self.bounds(&nodes);
            let mut moved = 0.0f64;
            for k in 0..z.len() {
                let c = z[k].clamp(lo[k], hi[k]);
                moved = moved.max(abs(c - z[k]));
                z[k] = c;
            }
            if moved < 1e-12 {
                return Some((z, t_f, nodes));
            }
            t_f = self.solve_tf(&z, t_f)?;
        }
        let nodes = self.simulate(&z, t_f, false)?.nodes;
        Some((z, t_f, nodes))
    }

    /// Gradient of the objective with the final time eliminated through the
    /// terminal condition.
    fn gradient(&self, z: &[f64], t_f: f64) -> Option<Vec<f64>> {
        let (x1, y_err) = self.terminal(z, t_f)?;
        let ht = 1e-7 * t_f;
        let (x1t, y_errt) = self.terminal(z, t_f + ht)?;
        let dfdt = (y_errt - y_err) / ht;
        let dx1dt = (x1t - x1) / ht;
        if !(abs(dfdt) > 1e-9) {
            return None;
        }
        let hz = 1e-5;
        let mut g = vec![0.0; z.len()];
        let mut zp = z.to_vec();
        for k in 0..z.len() {
            zp[k] = z[k] + hz;
            let (x1k, yk) = self.terminal(&zp, t_f)?;
            zp[k] = z[k];
            let dx1 = (x1k - x1) / hz;
            let dy = (yk - y_err) / hz;
            g[k] = dx1 - dx1dt * dy / dfdt;
        }
        Some(g)
    }

    fn optimize(&self, z0: Vec<f64>, t0: f64) -> (Vec<f64>, f64, OcpNodes, usize, bool) {
        let Some((mut z, mut t_f, mut nodes)) = self.settle(z0.clone(), t0) else {
            return (z0, t0, OcpNodes::default(), 0, false);
        };
        let mut j = nodes.objective();
        let mut step = 0.0;
        let mut converged = false;
        let mut iters = 0;
        let mut small = 0;
        for it in 0..self.spec.max_iter {
            iters = it + 1;
            let Some(g) = self.gradient(&z, t_f) else {
                break;
            };
            let (lo, hi) = self.bounds(&nodes);
            let gmax = g.iter().fold(0.0f64, |a, &b| a.max(abs(b)));
            if gmax == 0.0 {
                converged = true;
                break;
            }
            if step == 0.0 {
                step = 1.0 / gmax;
            }
            let mut accepted = false;
            for _ in 0..30 {
                let cand: Vec<f64> = (0..z.len())
                    .map(|k| (z[k] - step * g[k]).clamp(lo[k], hi[k]))
                    .collect();
                let pred: f64 = (0..z.len()).map(|k| g[k] * (z[k] - cand[k])).sum();
                if pred <= 0.0 {
                    step *= 0.5;
                    continue;
                }
                if let Some((cz, ct, cn)) = self.settle(cand, t_f) {
                    let cj = cn.objective();
                    if cj <= j - 1e-4 * pred {
                        let rel = (j - cj) / abs(j);
                        z = cz;
                        t_f = ct;
                        nodes = cn;
                        j = cj;
                        accepted = true;
                        step *= 2.0;
                        if rel < self.spec.tol {
                            small += 1;
                        } else {
                            small = 0;
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted || small >= 3 {
                converged = true;
                break;
            }
        }
        (z, t_f, nodes, iters, converged)
    }

    fn trajectory(&self, z: &[f64], t_f: f64) -> Option<(FullTrajectory, OcpNodes)> {
        let out = self.simulate(z, t_f, true)?;
        let mut tr = FullTrajectory {
            x_dot_0: self.spec.x_dot_0,
            mu: self.spec.mu,
            t_f_achieved: t_f,
            ..FullTrajectory::default()
        };
        let mut v_ref = self.spec.x_dot_0;
        let mut prev: Option<(f64, f64)> = None;
        for (t, x, a, e) in &out.dense {
            if let Some((tp, ap)) = prev {
                v_ref += 0.5 * (t - tp) * (a + ap);
            }
            prev = Some((*t, *a));
            let speed2 = x[1] * x[1] + x[3] * x[3];
            let kappa = (x[1] * e.d[3] - x[3] * e.d[1]) / (speed2 * sqrt(speed2));
            tr.t.push(*t);
            tr.dx.push(x[0]);
            tr.y_target.push(x[2]);
            tr.ax_target.push(*a);
            tr.theta_target.push(atan2(x[3], x[1]));
            tr.kappa_target.push(kappa);
            tr.vx_ref.push(v_ref);
        }
        Some((tr, out.nodes))
    }
}

fn axpy(x: &Aug, h: f64, d: &Aug) -> Aug {
    let mut o = *x;
    for i in 0..7 {
        o[i] += h * d[i];
    }
    o
}

/// Solve for the distance-minimizing acceleration profile.
///
/// Starts from the zero-acceleration profile, which is returned unchanged
/// when no improving step exists.
pub fn solve_ocp(spec: &OcpSpec, steering: &InverseSolution) -> Result<OcpOutcome> {
    spec.validate()?;
    if !steering.all_feasible() {
        return Err(Error::InfeasibleSteering {
            count: steering.infeasible_count(),
        });
    }
    let sched = SteeringSchedule::from_inverse(steering);
    let tr = Transcription {
        spec,
        sched: &sched,
    };
    let n = spec.n_nodes;

    let t_guess = crossing_time(spec, &sched).ok_or(Error::TargetNotReached { y_f: spec.y_f })?;
    let zero = vec![0.0; n];
    let t0 = tr
        .solve_tf(&zero, t_guess)
        .ok_or(Error::TargetNotReached { y_f: spec.y_f })?;
    let (baseline, baseline_nodes) = tr
        .trajectory(&zero, t0)
        .ok_or(Error::TargetNotReached { y_f: spec.y_f })?;
    let baseline_objective = baseline_nodes.objective();

    let (z, t_f, nodes, iterations, converged) = tr.optimize(zero.clone(), t0);
    let picked = if !nodes.t.is_empty() && nodes.objective() <= baseline_objective {
        tr.trajectory(&z, t_f)
    } else {
        None
    };
    let (trajectory, nodes) = match picked {
        Some(v) => v,
        None => {
            // the zero-acceleration profile must itself respect the bounds
            let (lo, hi) = tr.bounds(&baseline_nodes);
            if (0..n).any(|k| lo[k] > 1e-9 || hi[k] < -1e-9) {
                return Err(Error::InfeasibleProfile);
            }
            (baseline.clone(), baseline_nodes.clone())
        }
    };
    let objective = nodes.objective();
    Ok(OcpOutcome {
        trajectory,
        baseline,
        nodes,
        baseline_nodes,
        objective,
        baseline_objective,
        iterations,
        converged,
    })
}

/// First time the zero-acceleration open-loop response reaches `y_f`.
fn crossing_time(spec: &OcpSpec, sched: &SteeringSchedule) -> Option<f64> {
    let tr = Transcription { spec, sched };
    let h = 1e-3;
    let mut x = tr.initial();
    let horizon = 4.0 * sched.s.last().copied().unwrap_or(0.0) / spec.x_dot_0 + 1.0;
    let mut t = 0.0;
    while t < horizon {
        let k1 = tr.rhs(&x, 0.0)?.d;
        let k2 = tr.rhs(&axpy(&x, 0.5 * h, &k1), 0.0)?.d;
        let k3 = tr.rhs(&axpy(&x, 0.5 * h, &k2), 0.0)?.d;
        let k4 = tr.rhs(&axpy(&x, h, &k3), 0.0)?.d;
        let prev_y = x[2];
        for i in 0..7 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        if prev_y < spec.y_f && x[2] >= spec.y_f {
            return Some(t);
        }
    }
    None
}

/// Constraint audit of a returned profile, recomputed from the node states
/// with the body-frame vehicle model. All values are normalized; feasible
/// means every entry is at or below the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintAudit {
    /// Largest per-state mismatch between each node and an independent
    /// re-integration from the previous node.
    pub max_defect: f64,
    /// Front force over its plateau.
    pub front_force: f64,
    /// Steering bound violation.
    pub steer_bounds: f64,
    /// Friction ellipse value minus one.
    pub ellipse: f64,
    /// Engine limit excess.
    pub engine: f64,
    /// Braking limit excess.
    pub brake: f64,
    /// Largest initial-condition error.
    pub initial: f64,
    /// Terminal lateral error, m.
    pub terminal: f64,
}

impl ConstraintAudit {
    pub fn worst_path_constraint(&self) -> f64 {
        self.front_force
            .max(self.steer_bounds)
            .max(self.ellipse)
            .max(self.engine)
            .max(self.brake)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_defect <= tol
            && self.worst_path_constraint() <= tol
            && self.initial == 0.0
            && self.terminal <= tol
    }
}

/// Re-evaluate dynamics defects, path constraints and boundary conditions
/// on solver output.
pub fn audit(nodes: &OcpNodes, steering: &InverseSolution, spec: &OcpSpec) -> ConstraintAudit {
    use crate::vehicle::{derivatives, ControlInput, VehicleState};

    let p = &spec.params;
    let mu = spec.mu;
    let sched = SteeringSchedule::from_inverse(steering);
    let mut a = ConstraintAudit::default();
    let n = nodes.t.len();
    if n == 0 {
        a.max_defect = f64::INFINITY;
        return a;
    }
    let to_body = |st: &[f64; 6]| -> VehicleState {
        let (sp, cp) = (sin(st[4]), cos(st[4]));
        VehicleState {
            x: st[0],
            y: st[2],
            v_x: st[1] * cp + st[3] * sp,
            v_y: -st[1] * sp + st[3] * cp,
            psi: st[4],
            psi_dot: st[5],
        }
    };
    let s0 = &nodes.states[0];
    a.initial = [s0[0], s0[1] - spec.x_dot_0, s0[3], s0[4], s0[5], nodes.s[0]]
        .iter()
        .fold(0.0f64, |m, v| m.max(abs(*v)));
    a.terminal = abs(nodes.states[n - 1][2] - spec.y_f);

    for k in 0..n {
        let body = to_body(&nodes.states[k]);
        let delta = nodes.u2[k];
        let u1 = nodes.u1[k];
        let Ok((af, ar)) = crate::vehicle::slip_angles(&body, delta, p) else {
            a.max_defect = f64::INFINITY;
            return a;
        };
        let f_f = lateral_tire_force(p.c_alpha_f, af, mu, p.alpha_star);
        let f_r = lateral_tire_force(p.c_alpha_r, ar, mu, p.alpha_star);
        a.front_force = a
            .front_force
            .max((abs(f_f) - p.front_plateau(mu)) / p.front_plateau(mu));
        a.steer_bounds = a
            .steer_bounds
            .max((delta - p.delta_max) / p.delta_max)
            .max((p.delta_min - delta) / abs(p.delta_min));
        let fx = u1 / p.ellipse_long_axis(mu);
        let fy = f_r / p.rear_plateau(mu);
        a.ellipse = a.ellipse.max(fx * fx + fy * fy - 1.0);
        a.engine = a
            .engine
            .max((u1 - p.max_drive_force(mu)) / p.max_drive_force(mu));
        a.brake = a
            .brake
            .max((p.max_brake_force(mu) - u1) / abs(p.max_brake_force(mu)));
    }

    // independent re-integration, body frame, finer steps
    let scale = [
        nodes.states[n - 1][0].max(1.0),
        spec.x_dot_0,
        spec.y_f,
        spec.x_dot_0,
        0.1,
        1.0,
    ];
    let fine = 4 * spec.substeps.max(1);
    for k in 0..n - 1 {
        let h = (nodes.t[k + 1] - nodes.t[k]) / fine as f64;
        let mut st = to_body(&nodes.states[k]);
        let mut s = nodes.s[k];
        let (a0, a1) = (nodes.a_x[k], nodes.a_x[k + 1]);
        let force = |st: &VehicleState, s: f64, ax: f64| -> Option<([f64; 7], ())> {
            let delta = sched.at(s);
            let probe = ControlInput { f_t: 0.0, delta };
            let fb = crate::vehicle::forces(st, &probe, mu, p).ok()?;
            let input = ControlInput {
                f_t: p.m * ax + fb.f_yf * sin(delta),
                delta,
            };
            let d = derivatives(st, &input, mu, p).ok()?;
            Some((
                [
                    d.x,
                    d.y,
                    d.v_x,
                    d.v_y,
                    d.psi,
                    d.psi_dot,
                    hypot(st.v_x, st.v_y),
                ],
                (),
            ))
        };
        let add = |st: &VehicleState, s: f64, h: f64, d: &[f64; 7]| -> (VehicleState, f64) {
            (
                VehicleState {
                    x: st.x + h * d[0],
                    y: st.y + h * d[1],
                    v_x: st.v_x + h * d[2],
                    v_y: st.v_y + h * d[3],
                    psi: st.psi + h * d[4],
                    psi_dot: st.psi_dot + h * d[5],
                },
                s + h * d[6],
            )
        };
        let mut ok = true;
        for j in 0..fine {
            let ax = |c: f64| a0 + (a1 - a0) * (j as f64 + c) / fine as f64;
            let Some((k1, _)) = force(&st, s, ax(0.0)) else {
                ok = false;
                break;
            };
            let (s2, q2) = add(&st, s, 0.5 * h, &k1);
            let Some((k2, _)) = force(&s2, q2, ax(0.5)) else {
                ok = false;
                break;
            };
            let (s3, q3) = add(&st, s, 0.5 * h, &k2);
            let Some((k3, _)) = force(&s3, q3, ax(0.5)) else {
                ok = false;
                break;
            };
            let (s4, q4) = add(&st, s, h, &k3);
            let Some((k4, _)) = force(&s4, q4, ax(1.0)) else {
                ok = false;
                break;
            };
            let mut comb = [0.0; 7];
            for i in 0..7 {
                comb[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
            }
            let (ns, nq) = add(&st, s, h / 6.0, &comb);
            st = ns;
            s = nq;
        }
        if !ok {
            a.max_defect = f64::INFINITY;
            return a;
        }
        let (sp, cp) = (sin(st.psi), cos(st.psi));
        let global = [
            st.x,
            st.v_x * cp - st.v_y * sp,
            st.y,
            st.v_x * sp + st.v_y * cp,
            st.psi,
            st.psi_dot,
        ];
        let target = &nodes.states[k + 1];
        for i in 0..6 {
            a.max_defect = a.max_defect.max(abs(global[i] - target[i]) / scale[i]);
        }
    }
    a
}

/// Lane-change duration whose quintic peak lateral acceleration equals
/// `lat_fraction·mu·g`.
pub fn lane_change_duration(y_f: f64, mu: f64, lat_fraction: f64) -> f64 {
    sqrt(10.0 * y_f / (sqrt(3.0) * lat_fraction * mu * G))
}

/// Settings of the offline trajectory pipeline.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    pub y_f: f64,
    /// Peak lateral acceleration of the reference path as a fraction of `mu·g`.
    pub lat_fraction: f64,
    pub n_samples: usize,
    pub n_nodes: usize,
    pub substeps: usize,
    pub max_iter: usize,
    pub min_speed_ratio: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            y_f: 3.5,
            lat_fraction: 0.5,
            n_samples: DEFAULT_SAMPLES,
            n_nodes: 61,
            substeps: 6,
            max_iter: 120,
            min_speed_ratio: 0.5,
        }
    }
}

/// Result of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPoint {
    Maneuver(alloc::boxed::Box<OcpOutcome>),
    /// No steering maneuver; the decision logic falls back to braking.
    BrakingOnly(Error),
    /// Below the design speed floor; nothing optimized.
    BelowDesignSpeed,
}

impl GridPoint {
    pub fn outcome(&self) -> Option<&OcpOutcome> {
        match self {
            GridPoint::Maneuver(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub speed: f64,
    pub mu: f64,
    pub inverse: Option<InverseSolution>,
    pub point: GridPoint,
}

/// Full offline pipeline for one speed and surface: quintic path, arc-length
/// form, inverse dynamics at constant speed, acceleration optimization.
pub fn plan_point(speed: f64, mu: f64, params: &VehicleParams, cfg: &PipelineConfig) -> GridEntry {
    let mut entry = GridEntry {
        speed,
        mu,
        inverse: None,
        point: GridPoint::BelowDesignSpeed,
    };
    if speed < MIN_DESIGN_SPEED {
        return entry;
    }
    let t_f = lane_change_duration(cfg.y_f, mu, cfg.lat_fraction);
    let inv = quintic_lane_change(speed, t_f, cfg.y_f)
        .and_then(|q| arc_length_parameterize(&q, cfg.n_samples))
        .and_then(|arc| {
            let v = vec![speed; arc.len()];
            solve_inverse(&arc, &v, mu, params)
        });
    let inv = match inv {
        Ok(inv) => inv,
        Err(e) => {
            entry.point = GridPoint::BrakingOnly(e);
            return entry;
        }
    };
    let spec = OcpSpec {
        n_nodes: cfg.n_nodes,
        substeps: cfg.substeps,
        max_iter: cfg.max_iter,
        min_speed_ratio: cfg.min_speed_ratio,
        ..OcpSpec::new(speed, mu, cfg.y_f, *params)
    };
    entry.point = match solve_ocp(&spec, &inv) {
        Ok(o) => GridPoint::Maneuver(alloc::boxed::Box::new(o)),
        Err(e) => GridPoint::BrakingOnly(e),
    };
    entry.inverse = Some(inv);
    entry
}

/// Every (speed, mu) combination, speeds innermost. Failures are recorded
/// per point and never abort the grid.
pub fn generate_grid(
    speeds: &[f64],
    mus: &[f64],
    params: &VehicleParams,
    cfg: &PipelineConfig,
) -> Vec<GridEntry> {
    let mut out = Vec::with_capacity(speeds.len() * mus.len());
    for &mu in mus {
        for &v in speeds {
            out.push(plan_point(v, mu, params, cfg));
        }
    }
    out
}

/// Default speed axis: 12 to 46 m/s in 2 m/s steps.
pub fn default_speed_grid() -> Vec<f64> {
    (0..18).map(|i| 12.0 + 2.0 * i as f64).collect()
}

/// Surface pages of the tables.
pub const DEFAULT_MUS: [f64; 4] = [1.0, 0.7, 0.3, 0.1];
