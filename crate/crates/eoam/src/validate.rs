//! Invariant checks over a persisted table set.

use eoam_core::dmm::{stopping_distance, ttc_threshold, PhaseDiagram, Sector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tables::TableSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub failures: Vec<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn check(name: &'static str, f: impl FnOnce(&mut Vec<String>)) -> Check {
    let mut failures = Vec::new();
    f(&mut failures);
    Check { name, failures }
}

fn finite_increasing(v: &[f64]) -> bool {
    let f: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    f.windows(2).all(|w| w[1] > w[0])
}

/// Independent restatement of the sector rules.
fn expected_sector(d: &PhaseDiagram, dist: f64, v: f64) -> Sector {
    let (stop, stop_b) = (d.stop_at(v), d.stop_buffered_at(v));
    let (clear, clear_b) = (d.clear_at(v), d.clear_buffered_at(v));
    if v <= 0.0 {
        Sector::G
    } else if dist < clear && dist < stop {
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

pub fn run_checks(ts: &TableSet) -> Vec<Check> {
    let t = &ts.table;
    let y_f = ts.grid.pipeline.y_f;
    let mut out = Vec::new();

    out.push(check("one diagram per table page", |f| {
        let dm: Vec<f64> = {
            let mut m: Vec<f64> = ts.diagrams.iter().map(|d| d.mu).collect();
            m.sort_by(f64::total_cmp);
            m
        };
        if dm != t.mus {
            f.push(format!("diagram mus {dm:?} vs table mus {:?}", t.mus));
        }
    }));

    out.push(check("ttc thresholds", |f| {
        for d in &ts.diagrams {
            if d.ttc_threshold != ttc_threshold(d.mu) {
                f.push(format!("mu {}: {} s", d.mu, d.ttc_threshold));
            }
        }
    }));

    out.push(check("stopping curve follows the braking law", |f| {
        for d in &ts.diagrams {
            for (v, s) in d.speeds.iter().zip(&d.stop) {
                let want = stopping_distance(*v, d.mu, &ts.vehicle);
                if (s - want).abs() > 1e-9 * want.max(1.0) {
                    f.push(format!("mu {} v {v}: {s} vs {want}", d.mu));
                }
            }
        }
    }));

    out.push(check("buffered curves dominate", |f| {
        for d in &ts.diagrams {
            for i in 0..d.speeds.len() {
                if d.stop_buffered[i] < d.stop[i] || d.clear_buffered[i] < d.clear_subopt[i] {
                    f.push(format!("mu {} v {}", d.mu, d.speeds[i]));
                }
            }
        }
    }));

    out.push(check("clearing distance increases with speed", |f| {
        for d in &ts.diagrams {
            if !finite_increasing(&d.clear_subopt) || !finite_increasing(&d.clear_const) {
                f.push(format!("mu {}", d.mu));
            }
        }
    }));

    out.push(check("clearing distance increases as mu drops", |f| {
        let mut ds: Vec<&PhaseDiagram> = ts.diagrams.iter().collect();
        ds.sort_by(|a, b| b.mu.total_cmp(&a.mu));
        for w in ds.windows(2) {
            for (i, &v) in w[0].speeds.iter().enumerate().filter(|(_, v)| **v > 0.0) {
                let hi = w[0].clear_subopt[i];
                let lo = w[1].clear_at(v);
                if hi.is_finite() && lo.is_finite() && lo <= hi {
                    f.push(format!(
                        "v {v}: mu {} gives {lo} <= {hi} at mu {}",
                        w[1].mu, w[0].mu
                    ));
                }
            }
        }
    }));

    out.push(check("sector classification is a total partition", |f| {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in &ts.diagrams {
            let vmax = d.speeds.last().copied().unwrap_or(40.0) * 1.2;
            for _ in 0..10_000 {
                let dist = rng.random_range(0.0..300.0);
                let v = rng.random_range(-5.0..vmax);
                let got = d.classify(dist, v);
                let want = expected_sector(d, dist, v);
                if got != want {
                    f.push(format!("mu {} ({dist}, {v}): {got:?} vs {want:?}", d.mu));
                    return;
                }
            }
        }
    }));

    out.push(check(
        "table rows start at the origin and end in the target lane",
        |f| {
            for p in 0..t.mus.len() {
                for r in 0..t.speeds.len() {
                    let first = t.sample(p, r, 0);
                    let last = t.sample(p, r, t.dx.len() - 1);
                    if first.y.abs() > 1e-6 || (last.y - y_f).abs() > 1e-2 {
                        f.push(format!(
                            "mu {} v {}: y0 {} y_end {}",
                            t.mus[p], t.speeds[r], first.y, last.y
                        ));
                    }
                }
            }
        },
    ));

    out.push(check("interpolation reproduces table nodes", |f| {
        let cols = [0, t.dx.len() / 3, t.dx.len() / 2, t.dx.len() - 1];
        for p in 0..t.mus.len() {
            for r in 0..t.speeds.len() {
                for &c in &cols {
                    let want = t.sample(p, r, c);
                    let got = t.interpolate(t.speeds[r], t.dx[c], t.mus[p]).values;
                    if (got.y - want.y).abs() > 1e-12 || (got.kappa - want.kappa).abs() > 1e-12 {
                        f.push(format!("page {p} row {r} col {c}"));
                    }
                }
            }
        }
    }));

    out.push(check("maneuver length grows with speed", |f| {
        for (p, lens) in t.maneuver_length.chunks(t.speeds.len()).enumerate() {
            if !lens.windows(2).all(|w| w[1] > w[0]) {
                f.push(format!("mu {}", t.mus[p]));
            }
        }
    }));

    out
}
