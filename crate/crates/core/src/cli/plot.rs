//! Static SVG figures drawn from persisted CSV artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::output::{read_artifact, ManifestEntry, Table};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a polyline.
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let n = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    n * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
            r - l,
            b - t
        );
        let (xt, xd) = ticks(self.x0, self.x1);
        for v in xt {
            let x = self.px(v);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{:.*}</text>"##,
                b + 5.0,
                b + 18.0,
                xd,
                v
            );
        }
        let (yt, yd) = ticks(self.y0, self.y1);
        for v in yt {
            let y = self.py(v);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{v:.yd$}</text>"##,
                l - 5.0,
                l - 8.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            0.5 * (l + r),
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            0.5 * (l + r),
            HEIGHT - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.2})">{}</text>"#,
            0.5 * (t + b),
            0.5 * (t + b),
            escape(y_label)
        );
    }
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
}

fn legend(out: &mut String, entries: &[(String, &str, bool)]) {
    let x = WIDTH - RIGHT + 12.0;
    for (i, (label, color, markers)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        if *markers {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#, x + 10.0);
        } else {
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
                x + 20.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
}

impl LineChart {
    pub fn to_svg(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let (x0, x1) = padded_range(self.series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0))));
        let (y0, y1) = padded_range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let frame = Frame { x0, x1, y0, y1 };
        let mut out = String::new();
        svg_open(&mut out);
        let x_label = if self.log_x {
            format!("log10 {}", self.x_label)
        } else {
            self.x_label.clone()
        };
        frame.axes(&mut out, &self.title, &x_label, &self.y_label);
        let mut entries = Vec::new();
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|p| (frame.px(tx(p.0)), frame.py(p.1)))
                .collect();
            if s.markers {
                for (x, y) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
                }
            } else if !pts.is_empty() {
                let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    d.join(" ")
                );
            }
            entries.push((s.label.clone(), color, s.markers));
        }
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}

pub type Segment = [(f64, f64); 2];

/// Marching squares on `values[ix * ys.len() + iy]`. Saddle cells are
/// resolved by the cell-centre average.
pub fn contour_segments(xs: &[f64], ys: &[f64], values: &[f64], level: f64) -> Vec<Segment> {
    let ny = ys.len();
    let f = |i: usize, j: usize| values[i * ny + j] - level;
    let cross = |a: (f64, f64), fa: f64, b: (f64, f64), fb: f64| -> Option<(f64, f64)> {
        if (fa >= 0.0) == (fb >= 0.0) {
            return None;
        }
        let t = fa / (fa - fb);
        Some((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)))
    };
    let mut segs = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            let p00 = (xs[i], ys[j]);
            let p10 = (xs[i + 1], ys[j]);
            let p11 = (xs[i + 1], ys[j + 1]);
            let p01 = (xs[i], ys[j + 1]);
            let (f00, f10, f11, f01) = (f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1));
            let e = [
                cross(p00, f00, p10, f10),
                cross(p10, f10, p11, f11),
                cross(p11, f11, p01, f01),
                cross(p01, f01, p00, f00),
            ];
            let hits: Vec<(f64, f64)> = e.iter().flatten().copied().collect();
            match hits.len() {
                2 => segs.push([hits[0], hits[1]]),
                4 => {
                    let centre = 0.25 * (f00 + f10 + f11 + f01);
                    if (centre >= 0.0) == (f00 >= 0.0) {
                        segs.push([hits[0], hits[1]]);
                        segs.push([hits[2], hits[3]]);
                    } else {
                        segs.push([hits[0], hits[3]]);
                        segs.push([hits[1], hits[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

/// `(max r - min r) / mean r` over contour vertices, measured from the origin.
pub fn contour_radius_asymmetry(segments: &[Segment]) -> Option<f64> {
    let r: Vec<f64> = segments
        .iter()
        .flat_map(|s| s.iter().map(|p| p.0.hypot(p.1)))
        .collect();
    if r.is_empty() {
        return None;
    }
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
    Some((max - min) / mean)
}

/// Grid of a Wigner table with columns `x,p,W` written x-major.
pub fn wigner_from_table(t: &Table, name: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let bad = |m: &str| Error::MissingArtifact(format!("{name}: {m}"));
    let (x, p, w) = match (t.column("x"), t.column("p"), t.column("W")) {
        (Some(x), Some(p), Some(w)) => (x, p, w),
        _ => return Err(bad("needs columns x, p, W")),
    };
    let np = p.iter().skip(1).position(|&v| v == p[0]).map_or(p.len(), |k| k + 1);
    if np == 0 || w.len() % np != 0 {
        return Err(bad("not a rectangular grid"));
    }
    let xs: Vec<f64> = x.iter().step_by(np).copied().collect();
    let ps: Vec<f64> = p[..np].to_vec();
    Ok((xs, ps, w))
}

/// Contour levels as fractions of the maximum, plus one negative level when
/// the function dips below zero.
pub fn wigner_levels(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut levels: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|f| f * max).collect();
    if min < -0.01 * max {
        levels.insert(0, 0.5 * min);
    }
    levels
}

pub fn contour_svg(title: &str, xs: &[f64], ps: &[f64], values: &[f64]) -> String {
    let frame = Frame {
        x0: xs[0],
        x1: xs[xs.len() - 1],
        y0: ps[0],
        y1: ps[ps.len() - 1],
    };
    let mut out = String::new();
    svg_open(&mut out);
    frame.axes(&mut out, title, "x", "p");
    let mut entries = Vec::new();
    for (k, &level) in wigner_levels(values).iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let segs = contour_segments(xs, ps, values, level);
        let mut d = String::new();
        for s in &segs {
            let _ = write!(
                d,
                "M{:.2} {:.2}L{:.2} {:.2}",
                frame.px(s[0].0),
                frame.py(s[0].1),
                frame.px(s[1].0),
                frame.py(s[1].1)
            );
        }
        if !d.is_empty() {
            let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        }
        entries.push((format!("W = {level:.4}"), color, false));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

fn load(dir: &Path, manifest: &[ManifestEntry], rel: &str) -> Result<Table> {
    Table::from_csv(&read_artifact(dir, manifest, rel)?, rel)
}

fn column(t: &Table, rel: &str, name: &str) -> Result<Vec<f64>> {
    t.column(name)
        .ok_or_else(|| Error::MissingArtifact(format!("{rel}: column '{name}' missing")))
}

fn series(label: &str, x: &[f64], y: &[f64], markers: bool) -> Series {
    Series {
        label: label.into(),
        points: x.iter().copied().zip(y.iter().copied()).collect(),
        markers,
    }
}

fn variance_plot(dir: &Path, manifest: &[ManifestEntry], bins_rel: &str, fit_rel: &str, label: &str) -> Result<String> {
    let bins = load(dir, manifest, bins_rel)?;
    let fit = load(dir, manifest, fit_rel)?;
    let mut s = vec![
        series(
            "binned variance",
            &column(&bins, bins_rel, "theta")?,
            &column(&bins, bins_rel, "variance")?,
            true,
        ),
        series(
            "fit",
            &column(&fit, fit_rel, "theta")?,
            &column(&fit, fit_rel, "variance_fit")?,
            false,
        ),
    ];
    if let Some(truth) = fit.column("variance_model") {
        s.push(series("model", &column(&fit, fit_rel, "theta")?, &truth, false));
    }
    Ok(LineChart {
        title: format!("Quadrature variance vs LO phase{label}"),
        x_label: "theta (rad)".into(),
        y_label: "variance (SNU)".into(),
        log_x: false,
        series: s,
    }
    .to_svg())
}

/// Renders every figure whose source CSVs appear in `manifest`. Returns
/// `(file name, svg)` pairs in a fixed order.
pub fn emit_plots(dir: &Path, manifest: &[ManifestEntry]) -> Result<Vec<(String, String)>> {
    let listed = |p: &str| manifest.iter().any(|e| e.path == p);
    let mut out = Vec::new();
    for e in manifest {
        let p = e.path.as_str();
        if let Some(suffix) = p.strip_prefix("variance_bins").and_then(|s| s.strip_suffix(".csv")) {
            let fit = format!("variance_fit{suffix}.csv");
            if !listed(&fit) {
                return Err(Error::MissingArtifact(format!("{fit} (needed to plot {p})")));
            }
            let label = match suffix.trim_start_matches('_') {
                "" => String::new(),
                s => format!(" ({s})"),
            };
            out.push((format!("variance{suffix}.svg"), variance_plot(dir, manifest, p, &fit, &label)?));
        } else if let Some(suffix) = p.strip_prefix("wigner").and_then(|s| s.strip_suffix(".csv")) {
            let t = load(dir, manifest, p)?;
            let (xs, ps, w) = wigner_from_table(&t, p)?;
            let label = match suffix.trim_start_matches('_') {
                "" => String::new(),
                s => format!(" ({s})"),
            };
            out.push((format!("wigner{suffix}.svg"), contour_svg(&format!("Wigner function{label}"), &xs, &ps, &w)));
        } else if let Some(suffix) = p.strip_prefix("loglik").and_then(|s| s.strip_suffix(".csv")) {
            let t = load(dir, manifest, p)?;
            let chart = LineChart {
                title: "MLE log-likelihood".into(),
                x_label: "iteration".into(),
                y_label: "log-likelihood".into(),
                log_x: false,
                series: vec![series(
                    "log L",
                    &column(&t, p, "iteration")?,
                    &column(&t, p, "log_likelihood")?,
                    false,
                )],
            };
            out.push((format!("loglik{suffix}.svg"), chart.to_svg()));
        } else if p == "bandwidth_sweep.csv" {
            let t = load(dir, manifest, p)?;
            let b = column(&t, p, "bandwidth_mhz")?;
            let chart = LineChart {
                title: "Squeezing vs bandwidth".into(),
                x_label: "bandwidth (MHz)".into(),
                y_label: "squeezing (dB)".into(),
                log_x: false,
                series: vec![
                    series("input", &b, &column(&t, p, "input_squeeze_db")?, false),
                    series("output", &b, &column(&t, p, "output_squeeze_db")?, false),
                ],
            };
            out.push(("squeezing_vs_bandwidth.svg".into(), chart.to_svg()));
        } else if p == "fidelity_scan.csv" {
            let t = load(dir, manifest, p)?;
            let b = column(&t, p, "bandwidth_mhz")?;
            let a = column(&t, p, "scan_antisqueeze_db")?;
            let f = column(&t, p, "fidelity")?;
            let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for i in 0..b.len() {
                groups
                    .entry(format!("{:06.3}", a[i]))
                    .or_default()
                    .push((b[i], f[i]));
            }
            let chart = LineChart {
                title: "Fidelity vs bandwidth".into(),
                x_label: "bandwidth (MHz)".into(),
                y_label: "fidelity".into(),
                log_x: false,
                series: groups
                    .into_iter()
                    .map(|(k, points)| Series {
                        label: format!("anti-sq {} dB", k.trim_start_matches('0')),
                        points,
                        markers: false,
                    })
                    .collect(),
            };
            out.push(("fidelity_vs_bandwidth.svg".into(), chart.to_svg()));
        } else if p == "read_power_sweep.csv" {
            let t = load(dir, manifest, p)?;
            let pw = column(&t, p, "read_power")?;
            for (name, title, y, fwd, bwd) in [
                ("read_power_efficiency.svg", "Memory efficiency vs read power", "efficiency", "eta_forward", "eta_backward"),
                ("read_power_excess_noise.svg", "Excess noise vs read power", "excess noise (SNU)", "delta_forward", "delta_backward"),
            ] {
                let chart = LineChart {
                    title: title.into(),
                    x_label: "relative read power".into(),
                    y_label: y.into(),
                    log_x: true,
                    series: vec![
                        series("forward", &pw, &column(&t, p, fwd)?, false),
                        series("backward", &pw, &column(&t, p, bwd)?, false),
                    ],
                };
                out.push((name.into(), chart.to_svg()));
            }
        } else if p == "envelopes.csv" {
            let t = load(dir, manifest, p)?;
            let x = column(&t, p, "t")?;
            let col = |n: &str| column(&t, p, n);
            let controls = LineChart {
                title: "Control pulses".into(),
                x_label: "time (window units)".into(),
                y_label: "Rabi frequency (real part)".into(),
                log_x: false,
                series: vec![
                    series("write", &x, &col("write_re")?, false),
                    series("read", &x, &col("read_re")?, false),
                ],
            };
            let signals = LineChart {
                title: "Signal envelopes".into(),
                x_label: "time (window units)".into(),
                y_label: "amplitude (real part)".into(),
                log_x: false,
                series: vec![
                    series("input", &x, &col("input_re")?, false),
                    series("transmitted", &x, &col("transmitted_re")?, false),
                    series("retrieved", &x, &col("retrieved_re")?, false),
                ],
            };
            out.push(("control_pulses.svg".into(), controls.to_svg()));
            out.push(("signal_envelopes.svg".into(), signals.to_svg()));
        } else if p == "spin_wave.csv" {
            let t = load(dir, manifest, p)?;
            let z = column(&t, p, "z")?;
            let chart = LineChart {
                title: "Spin wave".into(),
                x_label: "z (medium length)".into(),
                y_label: "amplitude (real part)".into(),
                log_x: false,
                series: vec![
                    series("stored", &z, &column(&t, p, "stored_re")?, false),
                    series("after read", &z, &column(&t, p, "residual_re")?, false),
                ],
            };
            out.push(("spin_wave.svg".into(), chart.to_svg()));
        } else if p == "de_history.csv" {
            let t = load(dir, manifest, p)?;
            let g = column(&t, p, "generation")?;
            let chart = LineChart {
                title: "Differential evolution".into(),
                x_label: "generation".into(),
                y_label: "write efficiency".into(),
                log_x: false,
                series: vec![
                    series("best", &g, &column(&t, p, "best_fitness")?, false),
                    series("mean", &g, &column(&t, p, "mean_fitness")?, false),
                ],
            };
            out.push(("de_history.svg".into(), chart.to_svg()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_grid(sx: f64, sp: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
        let mut v = Vec::new();
        for &x in &g {
            for &p in &g {
                v.push((-(x * x) / (2.0 * sx * sx) - (p * p) / (2.0 * sp * sp)).exp());
            }
        }
        (g.clone(), g, v)
    }

    #[test]
    fn circle_contours_are_round() {
        let (xs, ps, v) = gaussian_grid(0.5f64.sqrt(), 0.5f64.sqrt());
        let segs = contour_segments(&xs, &ps, &v, 0.5);
        assert!(segs.len() > 20);
        // Half maximum of exp(-r²) sits at r = sqrt(ln 2).
        for s in &segs {
            for q in s {
                assert!((q.0.hypot(q.1) - 2f64.ln().sqrt()).abs() < 0.01);
            }
        }
        assert!(contour_radius_asymmetry(&segs).unwrap() < 0.02);
    }

    #[test]
    fn ellipse_contours_are_not_round() {
        let (xs, ps, v) = gaussian_grid(0.5, 1.0);
        let segs = contour_segments(&xs, &ps, &v, 0.5);
        assert!(contour_radius_asymmetry(&segs).unwrap() > 0.5);
        assert!(contour_segments(&xs, &ps, &v, 2.0).is_empty());
        assert!(contour_radius_asymmetry(&[]).is_none());
    }

    #[test]
    fn saddle_cells_give_two_segments() {
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0];
        // values[ix * 2 + iy]: diagonal corners high.
        let v = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(contour_segments(&xs, &ys, &v, 0.5).len(), 2);
    }

    #[test]
    fn ticks_are_round_numbers() {
        let (t, d) = ticks(0.03, 0.97);
        assert_eq!(d, 1);
        assert_eq!(t.len(), 4);
        assert!((t[0] - 0.2).abs() < 1e-12);
        let (t, d) = ticks(-1.0, 1.0);
        assert_eq!(d, 1);
        assert!(t.iter().any(|v| v.abs() < 1e-12));
    }

    #[test]
    fn chart_is_deterministic_svg() {
        let chart = LineChart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            series: vec![
                series("pts", &[0.0, 1.0, 2.0], &[1.0, 0.5, 2.0], true),
                series("line", &[0.0, 2.0], &[1.0, 2.0], false),
            ],
        };
        let a = chart.to_svg();
        assert_eq!(a, chart.to_svg());
        assert!(a.starts_with("<svg "));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a &lt; b"));
        assert_eq!(a.matches("<circle").count(), 3 + 1);
        assert_eq!(a.matches("<polyline").count(), 1);
    }
}
