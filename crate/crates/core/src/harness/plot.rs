//! Standalone SVG plots of one or more trajectories.
//!
//! Curves are written in data coordinates inside a group carrying the
//! data-to-pixel transform, so the polyline points in the file are the
//! trajectory values themselves.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::Trajectory;
use crate::geometry::polar_to_cart;
use crate::harness::scenario::PlotKind;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One labelled curve family per trajectory.
pub struct Track<'a> {
    pub label: &'a str,
    pub traj: &'a Trajectory,
}

struct Series {
    track: usize,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

fn series(kind: PlotKind, tracks: &[Track]) -> Vec<Series> {
    let mut out = Vec::new();
    for (i, tr) in tracks.iter().enumerate() {
        let samples = &tr.traj.samples;
        let mut push = |dashed, f: &dyn Fn(&crate::dynamics::Sample) -> (f64, f64)| {
            out.push(Series {
                track: i,
                dashed,
                points: samples.iter().map(f).collect(),
            })
        };
        match kind {
            PlotKind::XyTrack => push(false, &|s| {
                let p = polar_to_cart(s.state);
                (p.x, p.y)
            }),
            PlotKind::OmegaVsT => push(false, &|s| (s.t, s.inputs.omega)),
            PlotKind::VVsT => push(false, &|s| (s.t, s.inputs.v)),
            PlotKind::AnglesVsT => {
                push(false, &|s| (s.t, s.state.delta));
                push(true, &|s| (s.t, s.state.gamma));
            }
        }
    }
    out
}

fn title(kind: PlotKind) -> (&'static str, &'static str, &'static str) {
    match kind {
        PlotKind::XyTrack => ("vehicle track", "x", "y"),
        PlotKind::OmegaVsT => ("steering rate", "t", "omega"),
        PlotKind::AnglesVsT => ("polar angle (solid) and line-of-sight angle (dashed)", "t", "rad"),
        PlotKind::VVsT => ("forward speed", "t", "v"),
    }
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo > hi {
            return Range { lo: -1.0, hi: 1.0 };
        }
        let span = hi - lo;
        if span <= 1e-12 * lo.abs().max(1.0) {
            let pad = 0.1 * lo.abs().max(1.0);
            return Range { lo: lo - pad, hi: hi + pad };
        }
        Range {
            lo: lo - 0.04 * span,
            hi: hi + 0.04 * span,
        }
    }

    fn span(self) -> f64 {
        self.hi - self.lo
    }

    fn widen_to(self, span: f64) -> Self {
        let mid = 0.5 * (self.lo + self.hi);
        Range {
            lo: mid - 0.5 * span,
            hi: mid + 0.5 * span,
        }
    }
}

/// Round tick spacing `{1, 2, 5} x 10^k` giving about five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(r: Range) -> (Vec<f64>, usize) {
    let step = tick_step(r.span());
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (r.lo / step).ceil() as i64;
    let last = (r.hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // avoid "-0.0"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Renders the plot as an SVG document.
pub fn svg_string(tracks: &[Track], kind: PlotKind) -> Result<String> {
    if tracks.is_empty() {
        return Err(Error::Domain("nothing to plot: no trajectories".into()));
    }
    let series = series(kind, tracks);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let mut xr = Range::of(all().map(|p| p.0));
    let mut yr = Range::of(all().map(|p| p.1));
    if kind == PlotKind::XyTrack {
        xr = Range::of(all().map(|p| p.0).chain([0.0]));
        yr = Range::of(all().map(|p| p.1).chain([0.0]));
        // equal aspect
        let scale = (xr.span() / pw).max(yr.span() / ph);
        xr = xr.widen_to(scale * pw);
        yr = yr.widen_to(scale * ph);
    }
    let sx = pw / xr.span();
    let sy = ph / yr.span();
    let px = |x: f64| LEFT + (x - xr.lo) * sx;
    let py = |y: f64| TOP + ph - (y - yr.lo) * sy;

    let (heading, xlabel, ylabel) = title(kind);
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{heading}</text>"#,
        LEFT + pw / 2.0
    );

    // axes and ticks
    let _ = writeln!(
        w,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let (xt, xd) = ticks(xr);
    for t in xt {
        let x = px(t);
        let _ = writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text class="tick" x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            label(t, xd)
        );
    }
    let (yt, yd) = ticks(yr);
    for t in yt {
        let y = py(t);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            label(t, yd)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{ylabel}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    if kind == PlotKind::XyTrack {
        let (x0, y0) = (px(0.0), py(0.0));
        let _ = writeln!(
            w,
            r#"<g class="target" stroke="black"><circle cx="{x0:.2}" cy="{y0:.2}" r="5" fill="none"/><line x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{:.2}"/></g>"#,
            x0 - 8.0,
            x0 + 8.0,
            y0 - 8.0,
            y0 + 8.0
        );
    } else {
        for (i, tr) in tracks.iter().enumerate() {
            if let Some(tc) = tr.traj.cutoff_time {
                let x = px(tc);
                let _ = writeln!(
                    w,
                    r#"<line class="cutoff" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="6 4"/>"#,
                    TOP + ph,
                    COLORS[i % COLORS.len()]
                );
            }
        }
    }

    // curves in data coordinates
    let _ = writeln!(
        w,
        r#"<g class="data" transform="matrix({sx:e} 0 0 {:e} {:e} {:e})" fill="none" stroke-width="1.5">"#,
        -sy,
        LEFT - xr.lo * sx,
        TOP + ph + yr.lo * sy
    );
    for se in &series {
        let color = COLORS[se.track % COLORS.len()];
        let dash = if se.dashed { r#" stroke-dasharray="5 3""# } else { "" };
        if se.points.len() == 1 {
            continue;
        }
        let _ = write!(
            w,
            r#"<polyline stroke="{color}"{dash} vector-effect="non-scaling-stroke" points=""#
        );
        for (k, (x, y)) in se.points.iter().enumerate() {
            let sep = if k == 0 { "" } else { " " };
            let _ = write!(w, "{sep}{x:e},{y:e}");
        }
        let _ = writeln!(w, r#""/>"#);
    }
    let _ = writeln!(w, "</g>");
    for se in series.iter().filter(|se| se.points.len() == 1) {
        let (x, y) = se.points[0];
        let _ = writeln!(
            w,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            px(x),
            py(y),
            COLORS[se.track % COLORS.len()]
        );
    }

    // legend
    for (i, tr) in tracks.iter().enumerate() {
        let y = TOP + 14.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            w,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            COLORS[i % COLORS.len()],
            x + 26.0,
            y + 4.0,
            escape(tr.label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_svg(tracks: &[Track], kind: PlotKind, path: &Path) -> Result<()> {
    let text = svg_string(tracks, kind)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Points of every polyline in an SVG produced by [`svg_string`].
pub fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.split("points=\"")
        .skip(1)
        .map(|chunk| {
            let body = &chunk[..chunk.find('"').unwrap_or(chunk.len())];
            body.split_whitespace()
                .filter_map(|pair| {
                    let (x, y) = pair.split_once(',')?;
                    Some((x.parse().ok()?, y.parse().ok()?))
                })
                .collect()
        })
        .collect()
}
