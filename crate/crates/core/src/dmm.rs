//! Decision phase diagram over (relative distance, relative speed) and the
//! speed × differential-x × mu lookup tables.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, cos, interp_clamped, sin, G};
use crate::optimizer::{FullTrajectory, GridEntry};
use crate::vehicle::VehicleParams;

/// `x_dot_0² / (2·mu·g·decel_eff)`.
pub fn stopping_distance(x_dot_0: f64, mu: f64, params: &VehicleParams) -> f64 {
    x_dot_0 * x_dot_0 / (2.0 * mu * G * params.decel_eff)
}

/// Time to collision; infinite when the gap is not closing.
pub fn ttc(rel_dist: f64, rel_speed: f64) -> f64 {
    if rel_speed > 0.0 {
        rel_dist / rel_speed
    } else {
        f64::INFINITY
    }
}

/// Ego front-right corner position when it first clears the obstacle's
/// rear-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    pub x_clearance: f64,
    pub t_c: f64,
}

/// Lateral position the ego CG must reach at heading `psi` for its
/// front-right corner to sit level with the obstacle's left edge.
pub fn clearance_line(psi: f64, wid_obj: f64, params: &VehicleParams) -> f64 {
    wid_obj / 2.0 - (params.len_front * sin(psi) - params.wid_ego / 2.0 * cos(psi))
}

pub fn min_clearing_distance(
    traj: &FullTrajectory,
    wid_obj: f64,
    params: &VehicleParams,
) -> Result<Clearance> {
    if !(wid_obj > 0.0) {
        return Err(Error::InvalidParameter {
            name: "wid_obj",
            reason: "must be positive",
        });
    }
    let n = traj.len();
    let gap = |y: f64, th: f64| clearance_line(th, wid_obj, params) - y;
    let first = (0..n).find(|&i| gap(traj.y_target[i], traj.theta_target[i]) <= 0.0);
    let i = match first {
        Some(0) | None => return Err(Error::NoClearing),
        Some(i) => i,
    };
    let (x0, x1) = (traj.dx[i - 1], traj.dx[i]);
    let (y0, y1) = (traj.y_target[i - 1], traj.y_target[i]);
    let (th0, th1) = (traj.theta_target[i - 1], traj.theta_target[i]);
    let h = x1 - x0;
    let (m0, m1) = (crate::math::tan(th0) * h, crate::math::tan(th1) * h);
    // cubic Hermite in dx with heading slopes
    let at = |u: f64| {
        let u2 = u * u;
        let u3 = u2 * u;
        let y = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1;
        let th = th0 + u * (th1 - th0);
        (y, th)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (y, th) = at(mid);
        if gap(y, th) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, th) = at(hi);
    let x = x0 + hi * h;
    let t_c = traj.t[i - 1] + hi * (traj.t[i] - traj.t[i - 1]);
    Ok(Clearance {
        x_clearance: x + params.len_front * cos(th) + params.wid_ego / 2.0 * sin(th),
        t_c,
    })
}

/// Multiplicative margins applied to the stopping and clearing curves.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BufferPolicy {
    pub stop_factor: f64,
    pub clear_factor: f64,
}

impl Default for BufferPolicy {
    fn default() -> Self {
        Self {
            stop_factor: 1.05,
            clear_factor: 1.15,
        }
    }
}

impl BufferPolicy {
    pub const NONE: BufferPolicy = BufferPolicy {
        stop_factor: 1.0,
        clear_factor: 1.0,
    };
}

/// TTC line slope for a surface: 2.5 s down to mu = 0.7, 5 s down to 0.3,
/// 20 s below.
pub fn ttc_threshold(mu: f64) -> f64 {
    if mu >= 0.7 - 1e-9 {
        2.5
    } else if mu >= 0.3 - 1e-9 {
        5.0
    } else {
        20.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sector {
    /// Below both the clearing and the stopping curve.
    A,
    /// Steering with buffer.
    B,
    /// Braking, inside the stopping curve.
    C,
    /// Braking, inside the stopping buffer.
    D,
    /// Forward collision warning.
    E,
    /// Steering and braking.
    F,
    /// No action.
    G,
}

impl Sector {
    pub const ALL: [Sector; 7] = [
        Sector::A,
        Sector::B,
        Sector::C,
        Sector::D,
        Sector::E,
        Sector::F,
        Sector::G,
    ];

    /// 0 for G up to 4 for A.
    pub fn caution(self) -> u8 {
        match self {
            Sector::G => 0,
            Sector::E => 1,
            Sector::C | Sector::D => 2,
            Sector::B | Sector::F => 3,
            Sector::A => 4,
        }
    }

    pub fn is_steering(self) -> bool {
        matches!(self, Sector::B | Sector::F)
    }

    pub fn is_braking(self) -> bool {
        matches!(self, Sector::A | Sector::C | Sector::D)
    }

    pub fn label(self) -> char {
        match self {
            Sector::A => 'A',
            Sector::B => 'B',
            Sector::C => 'C',
            Sector::D => 'D',
            Sector::E => 'E',
            Sector::F => 'F',
            Sector::G => 'G',
        }
    }
}

/// Boundary curves for one surface, sampled on `speeds` (which starts at 0).
/// Speeds without a steering maneuver carry an infinite clearing distance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseDiagram {
    pub mu: f64,
    pub speeds: Vec<f64>,
    pub stop: Vec<f64>,
    pub stop_buffered: Vec<f64>,
    pub clear_subopt: Vec<f64>,
    pub clear_const: Vec<f64>,
    pub clear_buffered: Vec<f64>,
    pub ttc_threshold: f64,
    pub buffers: BufferPolicy,
}

/// Curve value at `v`: linear between samples, linear extension of the last
/// segment beyond the top speed.
fn curve_at(speeds: &[f64], ys: &[f64], v: f64) -> f64 {
    let n = speeds.len();
    if n >= 2 && v > speeds[n - 1] {
        let (v0, v1) = (speeds[n - 2], speeds[n - 1]);
        let (y0, y1) = (ys[n - 2], ys[n - 1]);
        if !y1.is_finite() {
            return y1;
        }
        return y1 + (v - v1) * (y1 - y0) / (v1 - v0);
    }
    interp_clamped(speeds, ys, v.max(0.0))
}

impl PhaseDiagram {
    pub fn stop_at(&self, v: f64) -> f64 {
        curve_at(&self.speeds, &self.stop, v)
    }

    pub fn stop_buffered_at(&self, v: f64) -> f64 {
        curve_at(&self.speeds, &self.stop_buffered, v)
    }

    pub fn clear_at(&self, v: f64) -> f64 {
        curve_at(&self.speeds, &self.clear_subopt, v)
    }

    pub fn clear_const_at(&self, v: f64) -> f64 {
        curve_at(&self.speeds, &self.clear_const, v)
    }

    pub fn clear_buffered_at(&self, v: f64) -> f64 {
        curve_at(&self.speeds, &self.clear_buffered, v)
    }

    pub fn classify(&self, rel_dist: f64, rel_speed: f64) -> Sector {
        classify_phase(self, rel_dist, rel_speed)
    }

    /// Same curves with a different buffer policy.
    pub fn with_buffers(&self, buffers: BufferPolicy) -> PhaseDiagram {
        let mut d = self.clone();
        d.buffers = buffers;
        d.stop_buffered = d.stop.iter().map(|s| s * buffers.stop_factor).collect();
        d.clear_buffered = d
            .clear_subopt
            .iter()
            .map(|c| c * buffers.clear_factor)
            .collect();
        d
    }
}

pub fn classify_phase(d: &PhaseDiagram, rel_dist: f64, rel_speed: f64) -> Sector {
    if !(rel_speed > 0.0) {
        return Sector::G;
    }
    let dist = rel_dist.max(0.0);
    let v = rel_speed;
    let stop = d.stop_at(v);
    let stop_b = d.stop_buffered_at(v);
    let clear = d.clear_at(v);
    let clear_b = d.clear_buffered_at(v);
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
    } else if ttc(dist, v) < d.ttc_threshold {
        Sector::E
    } else {
        Sector::G
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2)
        .all(|w| w[1] > w[0] || (w[0].is_infinite() && w[1].is_infinite()))
}

/// Assemble the diagram for one surface from its grid entries. Speeds below
/// the first optimized point interpolate linearly down to zero at rest.
pub fn build_phase_diagram(
    grid: &[GridEntry],
    mu: f64,
    wid_obj: f64,
    params: &VehicleParams,
    buffers: BufferPolicy,
) -> Result<PhaseDiagram> {
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    for e in grid.iter().filter(|e| abs(e.mu - mu) < 1e-12) {
        match e.point.outcome() {
            Some(o) => {
                let sub = min_clearing_distance(&o.trajectory, wid_obj, params)?;
                let cst = min_clearing_distance(&o.baseline, wid_obj, params)?;
                pts.push((e.speed, sub.x_clearance, cst.x_clearance));
            }
            None if e.speed >= crate::optimizer::MIN_DESIGN_SPEED => {
                pts.push((e.speed, f64::INFINITY, f64::INFINITY));
            }
            None => {}
        }
    }
    if pts.is_empty() {
        return Err(Error::EmptyGrid);
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut speeds = vec![0.0];
    let mut clear = vec![0.0];
    let mut clear_c = vec![0.0];
    for (v, c, cc) in pts {
        if v <= *speeds.last().unwrap_or(&0.0) {
            return Err(Error::NonMonotoneCurve("speed axis"));
        }
        speeds.push(v);
        clear.push(c);
        clear_c.push(cc);
    }
    if !strictly_increasing(&clear) {
        return Err(Error::NonMonotoneCurve("clear_subopt"));
    }
    if !strictly_increasing(&clear_c) {
        return Err(Error::NonMonotoneCurve("clear_const"));
    }
    let stop: Vec<f64> = speeds
        .iter()
        .map(|&v| stopping_distance(v, mu, params))
        .collect();
    let d = PhaseDiagram {
        mu,
        speeds,
        stop_buffered: Vec::new(),
        stop,
        clear_buffered: Vec::new(),
        clear_subopt: clear,
        clear_const: clear_c,
        ttc_threshold: ttc_threshold(mu),
        buffers,
    };
    Ok(d.with_buffers(buffers))
}

/// Diagram for the highest page not above `mu`, or the lowest page.
pub fn select_diagram(diagrams: &[PhaseDiagram], mu: f64) -> Option<&PhaseDiagram> {
    diagrams
        .iter()
        .filter(|d| d.mu <= mu + 1e-9)
        .max_by(|a, b| a.mu.total_cmp(&b.mu))
        .or_else(|| diagrams.iter().min_by(|a, b| a.mu.total_cmp(&b.mu)))
}

/// Target values read from the tables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TableSample {
    pub y: f64,
    pub ax: f64,
    pub theta: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lookup {
    pub values: TableSample,
    /// Maneuver length at the query speed and surface.
    pub length: f64,
    pub speed_clamped: bool,
    pub mu_clamped: bool,
}

impl Lookup {
    pub fn clamped(&self) -> bool {
        self.speed_clamped || self.mu_clamped
    }
}

/// Four value planes over (mu page, speed row, dx column), row-major in that
/// order, plus the maneuver length of each row.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LookupTable3D {
    pub speeds: Vec<f64>,
    pub dx: Vec<f64>,
    pub mus: Vec<f64>,
    pub y_target: Vec<f64>,
    pub ax_target: Vec<f64>,
    pub theta_target: Vec<f64>,
    pub kappa_target: Vec<f64>,
    /// `mus.len() × speeds.len()`.
    pub maneuver_length: Vec<f64>,
}

impl LookupTable3D {
    pub fn index(&self, page: usize, row: usize, col: usize) -> usize {
        (page * self.speeds.len() + row) * self.dx.len() + col
    }

    pub fn value_len(&self) -> usize {
        self.mus.len() * self.speeds.len() * self.dx.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, ax) in [("speed", &self.speeds), ("dx", &self.dx), ("mu", &self.mus)] {
            if ax.is_empty() || !ax.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::AxisMismatch(name));
            }
        }
        let n = self.value_len();
        if [
            &self.y_target,
            &self.ax_target,
            &self.theta_target,
            &self.kappa_target,
        ]
        .iter()
        .any(|p| p.len() != n)
            || self.maneuver_length.len() != self.mus.len() * self.speeds.len()
        {
            return Err(Error::AxisMismatch("plane size"));
        }
        Ok(())
    }

    pub fn sample(&self, page: usize, row: usize, col: usize) -> TableSample {
        let i = self.index(page, row, col);
        TableSample {
            y: self.y_target[i],
            ax: self.ax_target[i],
            theta: self.theta_target[i],
            kappa: self.kappa_target[i],
        }
    }

    pub fn interpolate(&self, speed: f64, dx: f64, mu: f64) -> Lookup {
        interpolate(self, speed, dx, mu)
    }
}

/// Bracketing indices and weight of `x` on `axis`, clamped to the hull.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64, bool) {
    let n = axis.len();
    if n == 1 {
        return (0, 0, 0.0, x != axis[0]);
    }
    if x <= axis[0] {
        return (0, 1, 0.0, x < axis[0]);
    }
    if x >= axis[n - 1] {
        return (n - 2, n - 1, 1.0, x > axis[n - 1]);
    }
    let i = crate::math::upper_index(axis, x);
    (i - 1, i, (x - axis[i - 1]) / (axis[i] - axis[i - 1]), false)
}

/// Bilinear in (speed, dx) on each page, linear across pages. Queries
/// outside the speed or mu hull are clamped and flagged; dx past the end
/// holds the terminal column.
pub fn interpolate(table: &LookupTable3D, speed: f64, dx: f64, mu: f64) -> Lookup {
    let (p0, p1, wp, mu_clamped) = bracket(&table.mus, mu);
    let (r0, r1, wr, speed_clamped) = bracket(&table.speeds, speed);
    let (c0, c1, wc, _) = bracket(&table.dx, dx);
    let blend = |plane: &[f64]| {
        let page = |p: usize| {
            let row = |r: usize| {
                let a = plane[table.index(p, r, c0)];
                let b = plane[table.index(p, r, c1)];
                if wc == 0.0 {
                    a
                } else if wc == 1.0 {
                    b
                } else {
                    a + wc * (b - a)
                }
            };
            lerp(row(r0), row(r1), wr)
        };
        lerp(page(p0), page(p1), wp)
    };
    let len = |p: usize, r: usize| table.maneuver_length[p * table.speeds.len() + r];
    let length = lerp(
        lerp(len(p0, r0), len(p0, r1), wr),
        lerp(len(p1, r0), len(p1, r1), wr),
        wp,
    );
    Lookup {
        values: TableSample {
            y: blend(&table.y_target),
            ax: blend(&table.ax_target),
            theta: blend(&table.theta_target),
            kappa: blend(&table.kappa_target),
        },
        length,
        speed_clamped,
        mu_clamped,
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else {
        a + w * (b - a)
    }
}

/// Resample every maneuver onto a shared uniform dx axis with spacing
/// close to `dx_step`. All pages must provide a maneuver at the same speeds.
pub fn build_lookup_tables(grid: &[GridEntry], dx_step: f64) -> Result<LookupTable3D> {
    if !(dx_step > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dx_step",
            reason: "must be positive",
        });
    }
    let mut mus: Vec<f64> = Vec::new();
    for e in grid {
        if !mus.contains(&e.mu) {
            mus.push(e.mu);
        }
    }
    mus.sort_by(f64::total_cmp);
    let rows_for = |mu: f64| -> Vec<(f64, &FullTrajectory)> {
        let mut r: Vec<(f64, &FullTrajectory)> = grid
            .iter()
            .filter(|e| e.mu == mu)
            .filter_map(|e| e.point.outcome().map(|o| (e.speed, &o.trajectory)))
            .collect();
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
        r
    };
    let pages: Vec<Vec<(f64, &FullTrajectory)>> = mus.iter().map(|&m| rows_for(m)).collect();
    let speeds: Vec<f64> = pages
        .first()
        .map(|p| p.iter().map(|r| r.0).collect())
        .unwrap_or_default();
    if speeds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for p in &pages {
        if p.len() != speeds.len() || p.iter().zip(&speeds).any(|(r, s)| r.0 != *s) {
            return Err(Error::AxisMismatch("speed rows differ between mu pages"));
        }
    }
    let max_len = pages
        .iter()
        .flat_map(|p| p.iter().map(|r| r.1.length()))
        .fold(0.0f64, f64::max);
    let cols = libm::ceil(max_len / dx_step) as usize + 1;
    let step = max_len / (cols - 1) as f64;
    let dx: Vec<f64> = (0..cols).map(|i| i as f64 * step).collect();
    let mut t = LookupTable3D {
        speeds,
        dx,
        mus,
        y_target: Vec::new(),
        ax_target: Vec::new(),
        theta_target: Vec::new(),
        kappa_target: Vec::new(),
        maneuver_length: Vec::new(),
    };
    for p in &pages {
        for (_, tr) in p {
            t.maneuver_length.push(tr.length());
            for &x in &t.dx {
                t.y_target.push(interp_clamped(&tr.dx, &tr.y_target, x));
                t.ax_target.push(interp_clamped(&tr.dx, &tr.ax_target, x));
                t.theta_target
                    .push(interp_clamped(&tr.dx, &tr.theta_target, x));
                t.kappa_target
                    .push(interp_clamped(&tr.dx, &tr.kappa_target, x));
            }
        }
    }
    t.validate()?;
    Ok(t)
}
