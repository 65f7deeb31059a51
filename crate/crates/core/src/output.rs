//! CSV, JSON and SVG artifacts written by the command line front end.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{Continuous, Normal};

use crate::error::{Error, Result};
use crate::estimate::Variant;
use crate::mc::{EstimateRecord, MCReport};
use crate::simulate::Trajectory;
use crate::spectrum::ModeVector;

pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "k", "x"];
pub const ESTIMATES_HEADER: [&str; 6] = ["trial", "variant", "N", "alpha", "theta_hat", "z"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("malformed CSV: {other:?}")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Long format, one row per `(snapshot, mode)`; `k` is 1-based.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        for (k, v) in x.iter().enumerate() {
            w.write_record([t.to_string(), (k + 1).to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(Error::Config(format!(
            "{}: expected header t,k,x",
            path.display()
        )));
    }
    let mut traj = Trajectory::default();
    let mut current: Vec<f64> = Vec::new();
    let mut current_t: Option<f64> = None;
    for (line, rec) in r.deserialize::<(f64, usize, f64)>().enumerate() {
        let (t, k, x) = rec.map_err(csv_err)?;
        if current_t != Some(t) {
            if let Some(t0) = current_t {
                if t <= t0 {
                    return Err(Error::Config(format!(
                        "{}: times must increase (row {})",
                        path.display(),
                        line + 2
                    )));
                }
                traj.times.push(t0);
                traj.states.push(finish_state(&mut current, path)?);
            }
            current_t = Some(t);
        }
        if k != current.len() + 1 {
            return Err(Error::Config(format!(
                "{}: modes must be listed as k = 1, 2, ... (row {})",
                path.display(),
                line + 2
            )));
        }
        current.push(x);
    }
    if let Some(t0) = current_t {
        traj.times.push(t0);
        traj.states.push(finish_state(&mut current, path)?);
    }
    if let Some(first) = traj.states.first() {
        let m = first.modes();
        if traj.states.iter().any(|s| s.modes() != m) {
            return Err(Error::Config(format!(
                "{}: every snapshot must list the same number of modes",
                path.display()
            )));
        }
    }
    Ok(traj)
}

fn finish_state(current: &mut Vec<f64>, path: &Path) -> Result<ModeVector> {
    ModeVector::new(std::mem::take(current))
        .map_err(|_| Error::Config(format!("{}: non-finite coefficient", path.display())))
}

#[derive(Serialize)]
struct EstimateRow<'a> {
    trial: usize,
    variant: &'a str,
    #[serde(rename = "N")]
    n: usize,
    alpha: f64,
    theta_hat: f64,
    z: Option<f64>,
}

pub fn write_estimates_csv(path: &Path, records: &[EstimateRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.write_record(ESTIMATES_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(EstimateRow {
            trial: r.trial,
            variant: r.variant.as_str(),
            n: r.n,
            alpha: r.alpha,
            theta_hat: r.theta_hat,
            z: r.z,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes the band, MSE and histogram panels for every variant and returns
/// the file names.
pub fn write_plots(dir: &Path, report: &MCReport) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for variant in report.variants() {
        let panels = [
            (format!("band_{variant}.svg"), band_svg(report, variant)),
            (format!("mse_{variant}.svg"), mse_svg(report, variant)),
            (format!("hist_{variant}.svg"), histogram_svg(report, variant)),
        ];
        for (name, svg) in panels {
            let mut w = create(&dir.join(&name))?;
            w.write_all(svg.as_bytes())?;
            w.flush()?;
            names.push(name);
        }
    }
    Ok(names)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

#[derive(Clone, Copy)]
enum Scale {
    Linear,
    Log,
}

struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Axis {
    fn new(values: impl IntoIterator<Item = f64>, scale: Scale) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = match scale {
                Scale::Linear => v,
                Scale::Log if v > 0.0 => v.log10(),
                Scale::Log => continue,
            };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = match scale {
            Scale::Linear => 0.05 * (hi - lo),
            Scale::Log => 0.1,
        };
        Self {
            lo: lo - pad,
            hi: hi + pad,
            scale,
        }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = match self.scale {
            Scale::Linear => v,
            Scale::Log => v.max(f64::MIN_POSITIVE).log10(),
        };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Linear => (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect(),
            Scale::Log => {
                let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
                let mantissas: &[f64] = if self.hi - self.lo < 2.5 { &[1.0, 2.0, 5.0] } else { &[1.0] };
                let mut t: Vec<(f64, String)> = (a - 1..=b)
                    .flat_map(|e| {
                        mantissas.iter().map(move |&m| {
                            let label = if m == 1.0 { format!("1e{e}") } else { format!("{m}e{e}") };
                            (m * 10f64.powi(e), label)
                        })
                    })
                    .filter(|(v, _)| (self.lo..=self.hi).contains(&v.log10()))
                    .collect();
                if t.is_empty() {
                    let v = 10f64.powf(0.5 * (self.lo + self.hi));
                    t.push((v, format!("{v:.2e}")));
                }
                t
            }
        }
    }
}

struct Canvas {
    x: Axis,
    y: Axis,
    body: String,
}

impl Canvas {
    fn new(x: Axis, y: Axis) -> Self {
        Self {
            x,
            y,
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + self.x.unit(x) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - self.y.unit(y) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dash: bool) {
        let dash = if dash { " stroke-dasharray=\"6,4\"" } else { "" };
        let p = self.points(pts);
        let _ = writeln!(
            self.body,
            "<polyline points=\"{p}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>"
        );
    }

    fn polygon(&mut self, pts: &[(f64, f64)], color: &str) {
        let p = self.points(pts);
        let _ = writeln!(
            self.body,
            "<polygon points=\"{p}\" fill=\"{color}\" fill-opacity=\"0.3\" stroke=\"none\"/>"
        );
    }

    fn markers(&mut self, pts: &[(f64, f64)], color: &str) {
        for &(x, y) in pts {
            let _ = writeln!(
                self.body,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                self.px(x),
                self.py(y)
            );
        }
    }

    fn rect(&mut self, x0: f64, x1: f64, y: f64, color: &str) {
        let (l, r) = (self.px(x0), self.px(x1));
        let (top, base) = (self.py(y), self.py(0.0));
        let _ = writeln!(
            self.body,
            "<rect x=\"{l:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\" stroke=\"white\"/>",
            (r - l).max(0.0),
            (base - top).max(0.0)
        );
    }

    fn finish(self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            x1 - x0,
            y0 - y1
        );
        for (v, label) in self.x.ticks() {
            let p = self.px(v);
            let _ = writeln!(
                s,
                "<line x1=\"{p:.2}\" y1=\"{y0}\" x2=\"{p:.2}\" y2=\"{}\" stroke=\"black\"/><text x=\"{p:.2}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                y0 + 5.0,
                y0 + 18.0
            );
        }
        for (v, label) in self.y.ticks() {
            let p = self.py(v);
            let _ = writeln!(
                s,
                "<line x1=\"{}\" y1=\"{p:.2}\" x2=\"{x0}\" y2=\"{p:.2}\" stroke=\"black\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>",
                x0 - 5.0,
                x0 - 8.0,
                p + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            (x0 + x1) / 2.0,
            HEIGHT - 10.0,
            escape(xlabel)
        );
        let _ = writeln!(
            s,
            "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
        let _ = writeln!(
            s,
            "<svg x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" viewBox=\"{x0} {y1} {} {}\" overflow=\"hidden\">",
            x1 - x0,
            y0 - y1,
            x1 - x0,
            y0 - y1
        );
        s.push_str(&self.body);
        s.push_str("</svg>\n</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Median with the `[p2.5, p97.5]` band against `N`, and the true value.
pub fn band_svg(report: &MCReport, variant: Variant) -> String {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.variant == variant).collect();
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys = rows
        .iter()
        .flat_map(|r| [r.p2_5, r.p97_5])
        .chain([report.theta_true]);
    let mut c = Canvas::new(Axis::new(ns.iter().copied(), Scale::Linear), Axis::new(ys, Scale::Linear));
    let mut band: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.p2_5)).collect();
    band.extend(rows.iter().rev().map(|r| (r.n as f64, r.p97_5)));
    c.polygon(&band, "steelblue");
    let median: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.median)).collect();
    c.polyline(&median, "navy", false);
    c.markers(&median, "navy");
    if let (Some(&a), Some(&b)) = (ns.first(), ns.last()) {
        c.polyline(&[(a, report.theta_true), (b, report.theta_true)], "firebrick", true);
    }
    c.finish(
        &format!("{variant}: median and 95% band"),
        "N",
        "theta estimate",
    )
}

/// Log-log MSE against `N` with the reference `V · N^{-(β+1)}`.
pub fn mse_svg(report: &MCReport, variant: Variant) -> String {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.variant == variant).collect();
    let mse: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mse)).collect();
    let reference: Vec<(f64, f64)> = match report.v {
        Some(v) => rows
            .iter()
            .map(|r| (r.n as f64, v * (r.n as f64).powf(-(report.beta + 1.0))))
            .collect(),
        None => Vec::new(),
    };
    let ys = mse.iter().chain(&reference).map(|p| p.1).collect::<Vec<_>>();
    let mut c = Canvas::new(
        Axis::new(mse.iter().map(|p| p.0), Scale::Log),
        Axis::new(ys, Scale::Log),
    );
    if !reference.is_empty() {
        c.polyline(&reference, "firebrick", true);
    }
    c.polyline(&mse, "navy", false);
    c.markers(&mse, "navy");
    c.finish(&format!("{variant}: MSE and squared rate"), "N", "MSE")
}

/// Residual histogram as a density, overlaid with the standard normal.
pub fn histogram_svg(report: &MCReport, variant: Variant) -> String {
    let Some(h) = report.histogram(variant) else {
        let c = Canvas::new(Axis::new([-5.0, 5.0], Scale::Linear), Axis::new([0.0, 0.5], Scale::Linear));
        return c.finish(&format!("{variant}: no standardized residuals"), "z", "density");
    };
    let total: usize = h.counts.iter().sum();
    let density: Vec<f64> = h
        .counts
        .iter()
        .zip(h.edges.windows(2))
        .map(|(&n, e)| {
            if total == 0 {
                0.0
            } else {
                n as f64 / (total as f64 * (e[1] - e[0]))
            }
        })
        .collect();
    let normal = Normal::standard();
    let (lo, hi) = (h.edges[0], *h.edges.last().unwrap());
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            (x, normal.pdf(x))
        })
        .collect();
    let ys = density.iter().copied().chain([0.0, normal.pdf(0.0)]);
    let mut c = Canvas::new(Axis::new([lo, hi], Scale::Linear), Axis::new(ys, Scale::Linear));
    for (d, e) in density.iter().zip(h.edges.windows(2)) {
        c.rect(e[0], e[1], *d, "steelblue");
    }
    c.polyline(&curve, "firebrick", false);
    c.finish(
        &format!("{variant}: standardized residuals at N = {}", h.n),
        "z",
        "density",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![
                ModeVector::new(vec![1.0, -0.25]).unwrap(),
                ModeVector::new(vec![0.1, 1e-17]).unwrap(),
                ModeVector::new(vec![std::f64::consts::PI, 2.0]).unwrap(),
            ],
        };
        write_trajectory_csv(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,k,x\n0,1,1\n"));
        assert_eq!(read_trajectory_csv(&path).unwrap(), traj);
    }

    #[test]
    fn trajectory_rejects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(&path, "t,k,x\n0,1,1\n0,3,1\n").unwrap();
        assert!(read_trajectory_csv(&path).is_err());
        std::fs::write(&path, "t,k,x\n0,1,1\n1,1,1\n1,2,1\n").unwrap();
        assert!(read_trajectory_csv(&path).is_err());
        std::fs::write(&path, "time,k,x\n0,1,1\n").unwrap();
        assert!(read_trajectory_csv(&path).is_err());
    }

    #[test]
    fn estimates_header_and_empty_z() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let recs = vec![
            EstimateRecord {
                trial: 0,
                variant: Variant::Full,
                n: 4,
                alpha: 0.5,
                theta_hat: 0.1,
                z: Some(-0.5),
            },
            EstimateRecord {
                trial: 1,
                variant: Variant::Linear,
                n: 4,
                alpha: 0.5,
                theta_hat: 0.2,
                z: None,
            },
        ];
        write_estimates_csv(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "trial,variant,N,alpha,theta_hat,z\n0,full,4,0.5,0.1,-0.5\n1,linear,4,0.5,0.2,\n"
        );
    }

    #[test]
    fn log_axis_ticks_are_decades() {
        let a = Axis::new([1e-6, 1e-2], Scale::Log);
        let t: Vec<String> = a.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(t, vec!["1e-6", "1e-5", "1e-4", "1e-3", "1e-2"]);
        assert!((a.unit(1e-4) - 0.5).abs() < 1e-12);
    }
}
