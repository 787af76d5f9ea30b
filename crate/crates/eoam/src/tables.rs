//! Plain-text persistence of lookup tables and phase diagrams.
//!
//! Both files start with a header (format tag, provenance hash, units and
//! axes) followed by numeric blocks, one text line per matrix row. Numbers
//! use the shortest decimal form that parses back to the same `f64`, so a
//! write/read cycle is bit-exact. The last line holds a SHA-256 checksum of
//! everything above it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eoam_core::dmm::{BufferPolicy, LookupTable3D, PhaseDiagram};
use eoam_core::vehicle::VehicleParams;
use sha2::{Digest, Sha256};

use crate::config::GridSpec;
use crate::error::{AppError, AppResult};

pub const TABLE_FILE: &str = "tables.txt";
pub const DIAGRAM_FILE: &str = "diagrams.txt";
pub const VEHICLE_FILE: &str = "vehicle.toml";
pub const GRID_FILE: &str = "grid.toml";

const TABLE_TAG: &str = "eoam-table 1";
const DIAGRAM_TAG: &str = "eoam-diagrams 1";
const PLANES: [&str; 4] = ["y_target", "ax_target", "theta_target", "kappa_target"];
const DIAGRAM_COLUMNS: &str = "speed stop stop_buffered clear_subopt clear_const clear_buffered";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn seal(mut body: String) -> String {
    let sum = sha256_hex(body.as_bytes());
    let _ = writeln!(body, "checksum {sum}");
    body
}

pub fn write_table(t: &LookupTable3D, provenance: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{TABLE_TAG}");
    let _ = writeln!(s, "provenance {provenance}");
    let _ = writeln!(s, "units speed=m/s dx=m mu=1 y_target=m ax_target=m/s^2 theta_target=rad kappa_target=1/m length=m");
    let _ = writeln!(
        s,
        "layout one page per mu in axis order, one row per speed, one column per dx"
    );
    for (name, axis) in [("speeds", &t.speeds), ("dx", &t.dx), ("mus", &t.mus)] {
        let _ = writeln!(s, "axis {name} {}", axis.len());
        row(&mut s, axis);
    }
    let _ = writeln!(s, "length");
    for page in t.maneuver_length.chunks(t.speeds.len()) {
        row(&mut s, page);
    }
    let planes = [&t.y_target, &t.ax_target, &t.theta_target, &t.kappa_target];
    for (name, plane) in PLANES.iter().zip(planes) {
        let _ = writeln!(s, "plane {name}");
        for values in plane.chunks(t.dx.len()) {
            row(&mut s, values);
        }
    }
    seal(s)
}

pub fn write_diagrams(diagrams: &[PhaseDiagram], provenance: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{DIAGRAM_TAG}");
    let _ = writeln!(s, "provenance {provenance}");
    let _ = writeln!(s, "units speed=m/s distance=m ttc=s");
    for d in diagrams {
        let _ = writeln!(
            s,
            "diagram mu={} ttc={} stop_factor={} clear_factor={} rows={}",
            d.mu,
            d.ttc_threshold,
            d.buffers.stop_factor,
            d.buffers.clear_factor,
            d.speeds.len()
        );
        let _ = writeln!(s, "{DIAGRAM_COLUMNS}");
        for i in 0..d.speeds.len() {
            row(
                &mut s,
                &[
                    d.speeds[i],
                    d.stop[i],
                    d.stop_buffered[i],
                    d.clear_subopt[i],
                    d.clear_const[i],
                    d.clear_buffered[i],
                ],
            );
        }
    }
    seal(s)
}

/// Line reader that reports positions in the source file.
struct Lines<'a> {
    path: &'a Path,
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> AppResult<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let lines = verify_checksum(lines, path)?;
        Ok(Self {
            path,
            lines,
            pos: 0,
        })
    }

    fn err(&self, message: impl Into<String>) -> AppError {
        AppError::Format {
            path: self.path.to_path_buf(),
            line: self.pos.max(1),
            message: message.into(),
        }
    }

    fn next(&mut self) -> AppResult<&'a str> {
        let l = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(l)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn expect(&mut self, want: &str) -> AppResult<()> {
        let l = self.next()?;
        if l == want {
            Ok(())
        } else {
            Err(self.err(format!("expected `{want}`, found `{l}`")))
        }
    }

    /// `keyword rest`, returning `rest`.
    fn keyed(&mut self, keyword: &str) -> AppResult<&'a str> {
        let l = self.next()?;
        l.strip_prefix(keyword)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{keyword} ...`, found `{l}`")))
    }

    fn numbers(&mut self, n: usize) -> AppResult<Vec<f64>> {
        let l = self.next()?;
        let v = l
            .split_ascii_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| self.err(format!("bad number: {e}")))?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn count(&self, s: &str) -> AppResult<usize> {
        s.parse().map_err(|_| self.err(format!("bad count `{s}`")))
    }
}

fn verify_checksum<'a>(mut lines: Vec<&'a str>, path: &Path) -> AppResult<Vec<&'a str>> {
    let bad = |line: usize, message: &str| AppError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    };
    let last = lines.pop().ok_or_else(|| bad(1, "empty file"))?;
    let want = last
        .strip_prefix("checksum ")
        .ok_or_else(|| bad(lines.len() + 1, "missing checksum line"))?;
    let mut body = String::new();
    for l in &lines {
        body.push_str(l);
        body.push('\n');
    }
    if sha256_hex(body.as_bytes()) != want {
        return Err(bad(lines.len() + 1, "checksum mismatch"));
    }
    Ok(lines)
}

pub fn parse_table(text: &str, path: &Path) -> AppResult<(LookupTable3D, String)> {
    let mut r = Lines::new(text, path)?;
    r.expect(TABLE_TAG)?;
    let provenance = r.keyed("provenance")?.to_string();
    r.keyed("units")?;
    r.keyed("layout")?;
    let mut axes = Vec::new();
    for name in ["speeds", "dx", "mus"] {
        let rest = r.keyed("axis")?;
        let n = match rest.split_once(' ') {
            Some((k, n)) if k == name => r.count(n)?,
            _ => return Err(r.err(format!("expected axis `{name}`"))),
        };
        axes.push(r.numbers(n)?);
    }
    let mus = axes.pop().unwrap_or_default();
    let dx = axes.pop().unwrap_or_default();
    let speeds = axes.pop().unwrap_or_default();
    r.expect("length")?;
    let mut maneuver_length = Vec::with_capacity(mus.len() * speeds.len());
    for _ in &mus {
        maneuver_length.extend(r.numbers(speeds.len())?);
    }
    let mut planes: Vec<Vec<f64>> = Vec::new();
    for name in PLANES {
        r.expect(&format!("plane {name}"))?;
        let mut plane = Vec::with_capacity(mus.len() * speeds.len() * dx.len());
        for _ in 0..mus.len() * speeds.len() {
            plane.extend(r.numbers(dx.len())?);
        }
        planes.push(plane);
    }
    if let Some(l) = r.peek() {
        r.pos += 1;
        return Err(r.err(format!("trailing content `{l}`")));
    }
    let kappa_target = planes.pop().unwrap_or_default();
    let theta_target = planes.pop().unwrap_or_default();
    let ax_target = planes.pop().unwrap_or_default();
    let y_target = planes.pop().unwrap_or_default();
    let t = LookupTable3D {
        speeds,
        dx,
        mus,
        y_target,
        ax_target,
        theta_target,
        kappa_target,
        maneuver_length,
    };
    t.validate()?;
    Ok((t, provenance))
}

fn field<'a>(r: &Lines<'_>, tokens: &[&'a str], key: &str) -> AppResult<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| r.err(format!("missing `{key}=`")))
}

fn number(r: &Lines<'_>, s: &str) -> AppResult<f64> {
    s.parse().map_err(|_| r.err(format!("bad number `{s}`")))
}

pub fn parse_diagrams(text: &str, path: &Path) -> AppResult<(Vec<PhaseDiagram>, String)> {
    let mut r = Lines::new(text, path)?;
    r.expect(DIAGRAM_TAG)?;
    let provenance = r.keyed("provenance")?.to_string();
    r.keyed("units")?;
    let mut out = Vec::new();
    while r.peek().is_some() {
        let head: Vec<&str> = r.keyed("diagram")?.split_ascii_whitespace().collect();
        let mu = number(&r, field(&r, &head, "mu")?)?;
        let ttc_threshold = number(&r, field(&r, &head, "ttc")?)?;
        let buffers = BufferPolicy {
            stop_factor: number(&r, field(&r, &head, "stop_factor")?)?,
            clear_factor: number(&r, field(&r, &head, "clear_factor")?)?,
        };
        let rows = r.count(field(&r, &head, "rows")?)?;
        r.expect(DIAGRAM_COLUMNS)?;
        let mut cols: [Vec<f64>; 6] = Default::default();
        for _ in 0..rows {
            for (c, v) in cols.iter_mut().zip(r.numbers(6)?) {
                c.push(v);
            }
        }
        let [speeds, stop, stop_buffered, clear_subopt, clear_const, clear_buffered] = cols;
        out.push(PhaseDiagram {
            mu,
            speeds,
            stop,
            stop_buffered,
            clear_subopt,
            clear_const,
            clear_buffered,
            ttc_threshold,
            buffers,
        });
    }
    Ok((out, provenance))
}

/// Curves of one diagram as CSV for plotting, with the TTC line as distance.
pub fn diagram_csv(d: &PhaseDiagram, manifest: &str) -> AppResult<Vec<u8>> {
    let mut w = crate::output::csv_writer(manifest);
    w.write_record([
        "speed_mps",
        "stop_m",
        "stop_buffered_m",
        "clear_subopt_m",
        "clear_const_m",
        "clear_buffered_m",
        "ttc_line_m",
    ])?;
    for i in 0..d.speeds.len() {
        let v = d.speeds[i];
        w.write_record(
            [
                v,
                d.stop[i],
                d.stop_buffered[i],
                d.clear_subopt[i],
                d.clear_const[i],
                d.clear_buffered[i],
                d.ttc_threshold * v,
            ]
            .map(|x| x.to_string()),
        )?;
    }
    crate::output::finish(w)
}

/// Everything the runtime needs, loaded from a precompute directory.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSet {
    pub dir: PathBuf,
    pub provenance: String,
    pub vehicle: VehicleParams,
    pub grid: GridSpec,
    pub table: LookupTable3D,
    pub diagrams: Vec<PhaseDiagram>,
}

impl TableSet {
    pub fn load(dir: &Path) -> AppResult<Self> {
        let read = |name: &str| -> AppResult<(PathBuf, String)> {
            let p = dir.join(name);
            if !p.is_file() {
                return Err(AppError::Data(format!(
                    "missing {} (run `eoam precompute` first)",
                    p.display()
                )));
            }
            let text = std::fs::read_to_string(&p).map_err(AppError::io(&p))?;
            Ok((p, text))
        };
        let (tp, text) = read(TABLE_FILE)?;
        let (table, provenance) = parse_table(&text, &tp)?;
        let (dp, text) = read(DIAGRAM_FILE)?;
        let (diagrams, dprov) = parse_diagrams(&text, &dp)?;
        if dprov != provenance {
            return Err(AppError::Data(format!(
                "{} and {} come from different builds",
                tp.display(),
                dp.display()
            )));
        }
        let (vp, text) = read(VEHICLE_FILE)?;
        let vehicle: VehicleParams = crate::config::parse_toml(&text, &vp)?;
        let (gp, text) = read(GRID_FILE)?;
        let grid: GridSpec = crate::config::parse_toml(&text, &gp)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
            vehicle,
            grid,
            table,
            diagrams,
        })
    }

    /// Fail before simulating when no page covers `mu`.
    pub fn check_mu(&self, mu: f64) -> AppResult<()> {
        let lo = self.table.mus.first().copied().unwrap_or(f64::NAN);
        let hi = self.table.mus.last().copied().unwrap_or(f64::NAN);
        if !(mu >= lo - 1e-9 && mu <= hi + 1e-9) || self.diagrams.is_empty() {
            return Err(eoam_core::Error::MissingPage { mu }.into());
        }
        Ok(())
    }
}
