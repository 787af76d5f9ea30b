//! Quintic lane-change geometry and its arc-length re-parameterization.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{atan2, cos, sin, sqrt};

/// Position and first two time derivatives of a planar curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub xd: f64,
    pub yd: f64,
    pub xdd: f64,
    pub ydd: f64,
}

impl CurvePoint {
    pub fn speed(&self) -> f64 {
        sqrt(self.xd * self.xd + self.yd * self.yd)
    }

    pub fn heading(&self) -> f64 {
        atan2(self.yd, self.xd)
    }

    /// Signed curvature `(ẋÿ − ẏẍ)/(ẋ² + ẏ²)^{3/2}`.
    pub fn curvature(&self) -> f64 {
        let v2 = self.xd * self.xd + self.yd * self.yd;
        (self.xd * self.ydd - self.yd * self.xdd) / (v2 * sqrt(v2))
    }
}

/// A regular planar curve parameterized over a closed interval.
pub trait PlanarCurve {
    fn domain(&self) -> (f64, f64);
    fn point(&self, t: f64) -> CurvePoint;
}

/// Rest-to-rest quintic lateral profile driven at constant forward speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticPath {
    /// `y(t) = Σ coeffs[i]·tⁱ`.
    pub coeffs: [f64; 6],
    pub v0: f64,
    pub t_f: f64,
    pub y_f: f64,
}

/// Build the quintic with `y(0)=ẏ(0)=ÿ(0)=0`, `y(t_f)=y_f`, `ẏ(t_f)=ÿ(t_f)=0`.
pub fn quintic_lane_change(v0: f64, t_f: f64, y_f: f64) -> Result<QuinticPath> {
    if !(v0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "v0",
            reason: "must be positive",
        });
    }
    if !(t_f > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_f",
            reason: "must be positive",
        });
    }
    let t3 = t_f * t_f * t_f;
    let coeffs = [
        0.0,
        0.0,
        0.0,
        10.0 * y_f / t3,
        -15.0 * y_f / (t3 * t_f),
        6.0 * y_f / (t3 * t_f * t_f),
    ];
    Ok(QuinticPath {
        coeffs,
        v0,
        t_f,
        y_f,
    })
}

impl QuinticPath {
    /// `(y, ẏ, ÿ, y⃛)` at time `t` (unchecked).
    pub fn lateral(&self, t: f64) -> (f64, f64, f64, f64) {
        let c = &self.coeffs;
        let y = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let yd = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        let ydd = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        let yddd = 6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5]);
        (y, yd, ydd, yddd)
    }

    /// Closed-form peak lateral speed, `15·y_f/(8·t_f)`.
    pub fn peak_lateral_speed(&self) -> f64 {
        15.0 * self.y_f / (8.0 * self.t_f)
    }

    /// Closed-form peak lateral acceleration, `10·y_f/(√3·t_f²)`.
    pub fn peak_lateral_accel(&self) -> f64 {
        10.0 * self.y_f / (sqrt(3.0) * self.t_f * self.t_f)
    }
}

impl PlanarCurve for QuinticPath {
    fn domain(&self) -> (f64, f64) {
        (0.0, self.t_f)
    }

    fn point(&self, t: f64) -> CurvePoint {
        let (y, yd, ydd, _) = self.lateral(t);
        CurvePoint {
            x: self.v0 * t,
            y,
            xd: self.v0,
            yd,
            xdd: 0.0,
            ydd,
        }
    }
}

/// Curvature of the quintic at time `t` from exact polynomial derivatives.
pub fn curvature_at(path: &QuinticPath, t: f64) -> Result<f64> {
    if !(0.0..=path.t_f).contains(&t) {
        return Err(Error::OutOfRange {
            value: t,
            lo: 0.0,
            hi: path.t_f,
        });
    }
    Ok(path.point(t).curvature())
}

/// A path sampled uniformly in arc length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArcPath {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    pub kappa: Vec<f64>,
}

/// Sample count used by the offline pipeline.
pub const DEFAULT_SAMPLES: usize = 401;

/// Re-parameterize `curve` by arc length.
///
/// Arc length is accumulated with Simpson's rule on a uniform parameter grid
/// of `n_samples` nodes; the output is resampled uniformly in `s` by inverting
/// `s(t)` with Newton steps, and every sample is evaluated exactly on the
/// curve.
pub fn arc_length_parameterize<C: PlanarCurve>(curve: &C, n_samples: usize) -> Result<ArcPath> {
    if n_samples < 50 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: "need at least 50 samples",
        });
    }
    let (t0, t1) = curve.domain();
    let h = (t1 - t0) / (n_samples - 1) as f64;
    let ts: Vec<f64> = (0..n_samples).map(|i| t0 + h * i as f64).collect();
    let mut s_of_t = Vec::with_capacity(n_samples);
    s_of_t.push(0.0);
    for i in 1..n_samples {
        let prev = s_of_t[i - 1];
        s_of_t.push(prev + simpson_speed(curve, ts[i - 1], ts[i]));
    }
    let total = s_of_t[n_samples - 1];

    let mut out = ArcPath {
        s: Vec::with_capacity(n_samples),
        x: Vec::with_capacity(n_samples),
        y: Vec::with_capacity(n_samples),
        theta: Vec::with_capacity(n_samples),
        kappa: Vec::with_capacity(n_samples),
    };
    let ds = total / (n_samples - 1) as f64;
    let mut seg = 1usize;
    for j in 0..n_samples {
        let target = if j == n_samples - 1 {
            total
        } else {
            ds * j as f64
        };
        let t = if j == 0 {
            t0
        } else if j == n_samples - 1 {
            t1
        } else {
            while seg < n_samples - 1 && s_of_t[seg] < target {
                seg += 1;
            }
            invert_arc_length(
                curve,
                ts[seg - 1],
                ts[seg],
                s_of_t[seg - 1],
                s_of_t[seg],
                target,
            )
        };
        let p = curve.point(t);
        out.s.push(target);
        out.x.push(p.x);
        out.y.push(p.y);
        out.theta.push(p.heading());
        out.kappa.push(p.curvature());
    }
    Ok(out)
}

fn simpson_speed<C: PlanarCurve>(curve: &C, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (curve.point(a).speed() + 4.0 * curve.point(m).speed() + curve.point(b).speed())
}

fn invert_arc_length<C: PlanarCurve>(
    curve: &C,
    ta: f64,
    tb: f64,
    sa: f64,
    sb: f64,
    target: f64,
) -> f64 {
    let mut t = ta + (tb - ta) * (target - sa) / (sb - sa);
    for _ in 0..20 {
        let f = sa + simpson_speed(curve, ta, t) - target;
        let d = curve.point(t).speed();
        let dt = f / d;
        t = (t - dt).clamp(ta, tb);
        if dt.abs() < 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

impl ArcPath {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    /// Radius of curvature at sample `i` (infinite on straight samples).
    pub fn radius(&self, i: usize) -> f64 {
        1.0 / self.kappa[i]
    }

    /// Rebuild `(θ, x, y)` from the stored curvature by integrating
    /// `θ = θ0 + ∫K`, `x = x0 + ∫cos θ`, `y = y0 + ∫sin θ` on the sample
    /// grid (corrected trapezoid for θ, Simpson for position).
    pub fn reconstruct(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut th = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        if n == 0 {
            return (th, xs, ys);
        }
        let dk = self.kappa_slope();
        th.push(self.theta[0]);
        xs.push(self.x[0]);
        ys.push(self.y[0]);
        for i in 1..n {
            let ds = self.s[i] - self.s[i - 1];
            let (k0, k1) = (self.kappa[i - 1], self.kappa[i]);
            let (d0, d1) = (dk[i - 1], dk[i]);
            let t = th[i - 1] + 0.5 * ds * (k0 + k1) + ds * ds / 12.0 * (d0 - d1);
            // cubic Hermite curvature integrated over the first half segment
            let tm = th[i - 1]
                + ds * (0.34375 * k0 + 0.15625 * k1)
                + ds * ds * (5.0 * d0 - 3.0 * d1) / 192.0;
            xs.push(xs[i - 1] + ds / 6.0 * (cos(th[i - 1]) + 4.0 * cos(tm) + cos(t)));
            ys.push(ys[i - 1] + ds / 6.0 * (sin(th[i - 1]) + 4.0 * sin(tm) + sin(t)));
            th.push(t);
        }
        (th, xs, ys)
    }

    fn kappa_slope(&self) -> Vec<f64> {
        let n = self.len();
        let (s, k) = (&self.s, &self.kappa);
        (0..n)
            .map(|i| {
                if n < 3 {
                    return if n == 2 {
                        (k[1] - k[0]) / (s[1] - s[0])
                    } else {
                        0.0
                    };
                }
                let (a, b, c) = match i {
                    0 => (0, 1, 2),
                    _ if i == n - 1 => (n - 3, n - 2, n - 1),
                    _ => (i - 1, i, i + 1),
                };
                // derivative of the parabola through three samples, taken at i
                let (h1, h2) = (s[b] - s[a], s[c] - s[b]);
                let (d1, d2) = ((k[b] - k[a]) / h1, (k[c] - k[b]) / h2);
                let curv = (d2 - d1) / (h1 + h2);
                let x = s[i];
                d1 + curv * ((x - s[a]) + (x - s[b]))
            })
            .collect()
    }
}
