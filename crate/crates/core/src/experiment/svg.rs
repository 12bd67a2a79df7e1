//! Self-contained SVG figures.
//!
//! Every axis spans the data extent plus a 5% margin on each side (see
//! [`axis_range`]); reference curves such as nullclines and guard lines are
//! clipped to the plot area and do not widen the axes.

use std::fmt::Write as _;
use std::path::Path;

use super::ExperimentError;
use crate::model::{equilibria, ib_nullcline_ib, ControlPolicy, Parameters, State};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 52.0;

const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Phase,
    Timeseries,
    Bifurcation,
}

/// One labelled time series of planar states.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, State)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    /// Continuous flights in the `(M, I_b)` plane; consecutive flights are joined by dashed jumps.
    Phase {
        flights: Vec<Vec<State>>,
        params: Parameters,
        policy: Option<ControlPolicy>,
    },
    /// `M(t)` (top panel) and `I_b(t)` (bottom panel).
    Timeseries { series: Vec<Series> },
    /// Recorded tail values against the swept parameter.
    Bifurcation {
        key: String,
        y_label: String,
        points: Vec<(f64, f64)>,
    },
}

impl PlotData {
    pub fn kind(&self) -> PlotKind {
        match self {
            PlotData::Phase { .. } => PlotKind::Phase,
            PlotData::Timeseries { .. } => PlotKind::Timeseries,
            PlotData::Bifurcation { .. } => PlotKind::Bifurcation,
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            PlotData::Phase { flights, .. } => flights.iter().all(|f| f.is_empty()),
            PlotData::Timeseries { series } => series.iter().all(|s| s.points.is_empty()),
            PlotData::Bifurcation { points, .. } => points.is_empty(),
        }
    }
}

/// Axis limits: data extent widened by 5% of the span on each side.
///
/// A zero span is widened by 5% of the magnitude (or by 0.5 around zero).
pub fn axis_range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        return None;
    }
    let span = hi - lo;
    let pad = if span > 0.0 {
        0.05 * span
    } else if lo != 0.0 {
        0.05 * lo.abs()
    } else {
        0.5
    };
    Some((lo - pad, hi + pad))
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * self.h
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn path_data(frame: &Frame, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.into_iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(d, "{cmd}{:.2},{:.2} ", frame.px(x), frame.py(y)).unwrap();
    }
    d.trim_end().to_string()
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, clip_id: &str) {
    writeln!(
        out,
        r##"<clipPath id="{clip_id}"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"##,
        frame.x0, frame.y0, frame.w, frame.h
    )
    .unwrap();
    writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
        frame.x0, frame.y0, frame.w, frame.h
    )
    .unwrap();
    let bottom = frame.y0 + frame.h;
    for t in ticks(frame.x_range.0, frame.x_range.1) {
        let x = frame.px(t);
        writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
            bottom + 5.0,
            bottom + 18.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    for t in ticks(frame.y_range.0, frame.y_range.1) {
        let y = frame.py(t);
        writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
            frame.x0 - 5.0,
            frame.x0,
            frame.x0 - 8.0,
            y + 4.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{x_label}</text>"##,
        frame.x0 + frame.w / 2.0,
        bottom + 38.0
    )
    .unwrap();
    let (lx, ly) = (frame.x0 - 52.0, frame.y0 + frame.h / 2.0);
    writeln!(
        out,
        r##"<text x="{lx:.2}" y="{ly:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{y_label}</text>"##
    )
    .unwrap();
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"##
    )
    .unwrap();
    writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##).unwrap();
    writeln!(
        out,
        r##"<text x="{:.2}" y="20" font-size="14" text-anchor="middle">{title}</text>"##,
        WIDTH / 2.0
    )
    .unwrap();
}

fn full_frame(x_range: (f64, f64), y_range: (f64, f64)) -> Frame {
    Frame {
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        x_range,
        y_range,
    }
}

fn hline(out: &mut String, frame: &Frame, y: f64, color: &str, dash: &str, id: &str) {
    writeln!(
        out,
        r##"<line id="{id}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.2" stroke-dasharray="{dash}" clip-path="url(#plot)"/>"##,
        frame.x0,
        frame.py(y),
        frame.x0 + frame.w,
        frame.py(y)
    )
    .unwrap();
}

fn render_phase(
    flights: &[Vec<State>],
    params: &Parameters,
    policy: Option<&ControlPolicy>,
) -> String {
    let all = || flights.iter().flatten();
    let x_range = axis_range(all().map(|s| s.m)).unwrap();
    let y_range = axis_range(all().map(|s| s.i_b)).unwrap();
    let frame = full_frame(x_range, y_range);
    let mut out = String::new();
    header(&mut out, "Phase plane (M, I_b)");
    axes(
        &mut out,
        &frame,
        "M (mosquitoes)",
        "I_b (infected birds)",
        "plot",
    );

    // dM/dt = 0: the I_b axis and M = M*; dI_b/dt = 0: increasing curve through the origin.
    let mut m_nullclines = vec![0.0];
    if let Some(e) = equilibria(params).endemic {
        m_nullclines.push(e.m);
    }
    for m in m_nullclines {
        writeln!(
            out,
            r##"<line class="m-nullcline" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#2ca02c" stroke-width="1.2" clip-path="url(#plot)"/>"##,
            frame.y0,
            frame.y0 + frame.h,
            x = frame.px(m)
        )
        .unwrap();
    }
    let n = 200;
    let curve = (0..=n).map(|i| {
        let m = (x_range.0 + (x_range.1 - x_range.0) * i as f64 / n as f64).max(0.0);
        (m, ib_nullcline_ib(params, m))
    });
    writeln!(
        out,
        r##"<path class="ib-nullcline" d="{}" fill="none" stroke="#1f77b4" stroke-width="1.2" clip-path="url(#plot)"/>"##,
        path_data(&frame, curve)
    )
    .unwrap();

    if let Some(policy) = policy {
        hline(&mut out, &frame, policy.h_b, "#d62728", "6,3", "guard");
        hline(
            &mut out,
            &frame,
            policy.phase_level(),
            "#ff7f0e",
            "2,3",
            "phase-set",
        );
    }

    let flow: String = flights
        .iter()
        .filter(|f| !f.is_empty())
        .map(|f| path_data(&frame, f.iter().map(|s| (s.m, s.i_b))))
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(
        out,
        r##"<path id="trajectory" d="{flow}" fill="none" stroke="#000" stroke-width="1.4" clip-path="url(#plot)"/>"##
    )
    .unwrap();
    let jumps: Vec<String> = flights
        .windows(2)
        .filter_map(|w| Some((*w[0].last()?, *w[1].first()?)))
        .map(|(a, b)| path_data(&frame, [(a.m, a.i_b), (b.m, b.i_b)]))
        .collect();
    if !jumps.is_empty() {
        writeln!(
            out,
            r##"<path id="jumps" d="{}" fill="none" stroke="#555" stroke-width="1" stroke-dasharray="4,3" clip-path="url(#plot)"/>"##,
            jumps.join(" ")
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn render_timeseries(series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let t_range = axis_range(all().map(|p| p.0)).unwrap();
    let m_range = axis_range(all().map(|p| p.1.m)).unwrap();
    let ib_range = axis_range(all().map(|p| p.1.i_b)).unwrap();
    let panel_h = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM - 40.0) / 2.0;
    let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let top = Frame {
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        w,
        h: panel_h,
        x_range: t_range,
        y_range: m_range,
    };
    let bottom = Frame {
        y0: MARGIN_TOP + panel_h + 40.0,
        y_range: ib_range,
        ..top
    };
    let mut out = String::new();
    header(&mut out, "Time series");
    axes(&mut out, &top, "t (days)", "M", "panel-m");
    axes(&mut out, &bottom, "t (days)", "I_b", "panel-ib");
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(
            out,
            r##"<path class="series-m" d="{}" fill="none" stroke="{color}" stroke-width="1.2" clip-path="url(#panel-m)"/>"##,
            path_data(&top, s.points.iter().map(|(t, st)| (*t, st.m)))
        )
        .unwrap();
        writeln!(
            out,
            r##"<path class="series-ib" d="{}" fill="none" stroke="{color}" stroke-width="1.2" clip-path="url(#panel-ib)"/>"##,
            path_data(&bottom, s.points.iter().map(|(t, st)| (*t, st.i_b)))
        )
        .unwrap();
        if !s.label.is_empty() {
            writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" font-size="11" fill="{color}" text-anchor="end">{}</text>"##,
                WIDTH - MARGIN_RIGHT - 6.0,
                MARGIN_TOP + 14.0 + 13.0 * i as f64,
                s.label
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

fn render_bifurcation(key: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let x_range = axis_range(points.iter().map(|p| p.0)).unwrap();
    let y_range = axis_range(points.iter().map(|p| p.1)).unwrap();
    let frame = full_frame(x_range, y_range);
    let mut out = String::new();
    header(&mut out, &format!("Bifurcation diagram in {key}"));
    axes(&mut out, &frame, key, y_label, "plot");
    out.push_str(r##"<g id="tail" fill="#000">"##);
    out.push('\n');
    for (x, y) in points {
        writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.6"/>"##,
            frame.px(*x),
            frame.py(*y)
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub fn render_svg(data: &PlotData) -> Result<String, ExperimentError> {
    if data.is_empty() {
        return Err(ExperimentError::EmptySeries);
    }
    Ok(match data {
        PlotData::Phase {
            flights,
            params,
            policy,
        } => render_phase(flights, params, policy.as_ref()),
        PlotData::Timeseries { series } => render_timeseries(series),
        PlotData::Bifurcation {
            key,
            y_label,
            points,
        } => render_bifurcation(key, y_label, points),
    })
}

/// Renders and writes the figure. Nothing is written when the data are empty.
pub fn emit_svg(data: &PlotData, path: &Path) -> Result<(), ExperimentError> {
    let svg = render_svg(data)?;
    std::fs::write(path, svg).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}
