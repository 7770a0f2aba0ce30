//! Deterministic SVG charts on a fixed 800×600 canvas.

use serde::{Deserialize, Serialize};
use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
const NOISE_COLOUR: &str = "#b0b0b0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    ConfusionHeatmap,
    RocCurve,
    PcaScatter,
    ClusterScatter,
    PdpCurve,
    CorrelationHeatmap,
    ShapBar,
    LossCurve,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ConfusionHeatmap => "confusion_heatmap",
            PlotKind::RocCurve => "roc_curve",
            PlotKind::PcaScatter => "pca_scatter",
            PlotKind::ClusterScatter => "cluster_scatter",
            PlotKind::PdpCurve => "pdp_curve",
            PlotKind::CorrelationHeatmap => "correlation_heatmap",
            PlotKind::ShapBar => "shap_bar",
            PlotKind::LossCurve => "loss_curve",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// One line chart inside a figure (several make small multiples).
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw the y = x reference line.
    pub diagonal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Lines(Vec<Panel>),
    Scatter { x_label: String, y_label: String, points: Vec<(f64, f64)>, groups: Vec<i64> },
    Matrix { row_labels: Vec<String>, col_labels: Vec<String>, values: Vec<Vec<Option<f64>>>, symmetric_scale: bool },
    Bars { labels: Vec<String>, values: Vec<f64>, value_label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotArtifact {
    pub kind: PlotKind,
    pub file_name: String,
    pub caption: String,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlotError {
    #[error("series incompatible with {kind}: {reason}")]
    IncompatibleSeries { kind: &'static str, reason: String },
}

/// Formats a number to four significant digits, switching to exponent
/// notation outside `[1e-3, 1e5)`.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return String::from("n/a");
    }
    if v == 0.0 {
        return String::from("0");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-3..5).contains(&mag) {
        let s = format!("{v:.3e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" { "0".into() } else { s }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Coordinate with two decimals; callers only pass finite values.
fn c(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<text x="{}" y="30" text-anchor="middle" font-size="18" font-weight="bold">{}</text>"#,
            c(WIDTH / 2.0),
            esc(title)
        );
        body.push('\n');
        Self { body }
    }

    fn push(&mut self, element: String) {
        self.body.push_str(&element);
        self.body.push('\n');
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, content: &str) {
        self.push(format!(
            r#"<text x="{}" y="{}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            c(x),
            c(y),
            esc(content)
        ));
    }

    fn finish(self) -> String {
        format!(
            concat!(
                r#"<?xml version="1.0" encoding="UTF-8"?>"#,
                "\n",
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif">"#,
                "\n",
                r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#,
                "\n{}</svg>\n"
            ),
            self.body
        )
    }
}

#[derive(Clone, Copy)]
struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn of(values: impl Iterator<Item = f64>) -> Option<Scale> {
        let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            return None;
        }
        if hi > lo {
            let pad = (hi - lo) * 0.05;
            Some(Scale { lo: lo - pad, hi: hi + pad })
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            Some(Scale { lo: lo - pad, hi: hi + pad })
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..5).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
    }
}

fn axes(canvas: &mut Canvas, area: Rect, xs: Scale, ys: Scale, x_label: &str, y_label: &str) {
    let bottom = area.y + area.h;
    canvas.push(format!(
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333" stroke-width="1"/>"##,
        c(area.x),
        c(area.y),
        c(area.w),
        c(area.h)
    ));
    for t in xs.ticks() {
        let px = area.x + xs.frac(t) * area.w;
        canvas.push(format!(r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#333"/>"##, c(px), c(bottom), c(bottom + 5.0)));
        canvas.text(px, bottom + 18.0, "middle", 11, &format_sig(t));
    }
    for t in ys.ticks() {
        let py = bottom - ys.frac(t) * area.h;
        canvas.push(format!(r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#333"/>"##, c(area.x - 5.0), c(py), c(area.x)));
        canvas.text(area.x - 8.0, py + 4.0, "end", 11, &format_sig(t));
    }
    canvas.text(area.x + area.w / 2.0, bottom + 38.0, "middle", 13, x_label);
    let (lx, ly) = (area.x - 55.0, area.y + area.h / 2.0);
    canvas.push(format!(
        r#"<text x="{0}" y="{1}" text-anchor="middle" font-size="13" transform="rotate(-90 {0} {1})">{2}</text>"#,
        c(lx),
        c(ly),
        esc(y_label)
    ));
}

fn incompatible(kind: PlotKind, reason: impl Into<String>) -> PlotError {
    PlotError::IncompatibleSeries { kind: kind.name(), reason: reason.into() }
}

fn panel_rects(n: usize) -> Vec<Rect> {
    let full = Rect { x: 100.0, y: 60.0, w: 660.0, h: 460.0 };
    match n {
        1 => vec![full],
        2 => (0..2).map(|i| Rect { x: 100.0 + i as f64 * 380.0, y: 80.0, w: 290.0, h: 420.0 }).collect(),
        _ => (0..n.min(4))
            .map(|i| Rect { x: 100.0 + (i % 2) as f64 * 380.0, y: 80.0 + (i / 2) as f64 * 260.0, w: 290.0, h: 170.0 })
            .collect(),
    }
}

fn render_lines(kind: PlotKind, title: &str, panels: &[Panel]) -> Result<String, PlotError> {
    if panels.is_empty() || panels.len() > 4 {
        return Err(incompatible(kind, "need between one and four panels"));
    }
    let mut canvas = Canvas::new(title);
    let multi = panels.len() > 1;
    for (panel, area) in panels.iter().zip(panel_rects(panels.len())) {
        let finite = |s: &Series| s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).count();
        if panel.series.is_empty() || panel.series.iter().all(|s| finite(s) == 0) {
            return Err(incompatible(kind, format!("panel {:?} has no finite points", panel.title)));
        }
        let all = || panel.series.iter().flat_map(|s| s.points.iter().copied()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let xs = Scale::of(all().map(|p| p.0)).expect("finite points");
        let ys = Scale::of(all().map(|p| p.1)).expect("finite points");
        axes(&mut canvas, area, xs, ys, &panel.x_label, &panel.y_label);
        if multi {
            canvas.text(area.x + area.w / 2.0, area.y - 8.0, "middle", 13, &panel.title);
        }
        let to_px = |(x, y): (f64, f64)| (area.x + xs.frac(x) * area.w, area.y + area.h - ys.frac(y) * area.h);
        if panel.diagonal {
            let lo = xs.lo.max(ys.lo);
            let hi = xs.hi.min(ys.hi);
            if hi > lo {
                let (a, b) = (to_px((lo, lo)), to_px((hi, hi)));
                canvas.push(format!(
                    r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
                    c(a.0),
                    c(a.1),
                    c(b.0),
                    c(b.1)
                ));
            }
        }
        for (i, s) in panel.series.iter().enumerate() {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&p| {
                    let (px, py) = to_px(p);
                    format!("{},{}", c(px), c(py))
                })
                .collect();
            canvas.push(format!(
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                pts.join(" "),
                PALETTE[i % PALETTE.len()]
            ));
            if panel.series.len() > 1 {
                let ly = area.y + 16.0 + 16.0 * i as f64;
                canvas.push(format!(
                    r#"<rect x="{}" y="{}" width="12" height="3" fill="{}"/>"#,
                    c(area.x + area.w - 150.0),
                    c(ly - 4.0),
                    PALETTE[i % PALETTE.len()]
                ));
                canvas.text(area.x + area.w - 132.0, ly, "start", 11, &s.label);
            }
        }
    }
    Ok(canvas.finish())
}

fn render_scatter(kind: PlotKind, title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], groups: &[i64]) -> Result<String, PlotError> {
    if points.is_empty() {
        return Err(incompatible(kind, "no points"));
    }
    if !groups.is_empty() && groups.len() != points.len() {
        return Err(incompatible(kind, "group count differs from point count"));
    }
    let xs = Scale::of(points.iter().map(|p| p.0)).ok_or_else(|| incompatible(kind, "no finite points"))?;
    let ys = Scale::of(points.iter().map(|p| p.1)).ok_or_else(|| incompatible(kind, "no finite points"))?;
    let area = Rect { x: 100.0, y: 60.0, w: 620.0, h: 460.0 };
    let mut canvas = Canvas::new(title);
    axes(&mut canvas, area, xs, ys, x_label, y_label);
    for (i, &(x, y)) in points.iter().enumerate() {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let g = groups.get(i).copied().unwrap_or(0);
        let colour = if g < 0 { NOISE_COLOUR } else { PALETTE[g as usize % PALETTE.len()] };
        canvas.push(format!(
            r#"<circle cx="{}" cy="{}" r="3.5" fill="{colour}" fill-opacity="0.8"/>"#,
            c(area.x + xs.frac(x) * area.w),
            c(area.y + area.h - ys.frac(y) * area.h)
        ));
    }
    if !groups.is_empty() {
        let mut distinct: Vec<i64> = groups.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        for (i, g) in distinct.iter().enumerate().take(12) {
            let ly = area.y + 10.0 + 18.0 * i as f64;
            let colour = if *g < 0 { NOISE_COLOUR } else { PALETTE[*g as usize % PALETTE.len()] };
            canvas.push(format!(r#"<circle cx="{}" cy="{}" r="5" fill="{colour}"/>"#, c(area.x + area.w + 15.0), c(ly)));
            let label = if *g < 0 { "noise".to_string() } else { format!("cluster {g}") };
            canvas.text(area.x + area.w + 25.0, ly + 4.0, "start", 11, &label);
        }
    }
    Ok(canvas.finish())
}

fn heat_colour(t: f64, symmetric: bool) -> String {
    // white to blue, or red-white-blue around zero
    let (r, g, b) = if symmetric {
        let t = t.clamp(-1.0, 1.0);
        if t >= 0.0 {
            (255.0 * (1.0 - t) + 33.0 * t, 255.0 * (1.0 - t) + 102.0 * t, 255.0 * (1.0 - t) + 172.0 * t)
        } else {
            let s = -t;
            (255.0 * (1.0 - s) + 178.0 * s, 255.0 * (1.0 - s) + 24.0 * s, 255.0 * (1.0 - s) + 43.0 * s)
        }
    } else {
        let t = t.clamp(0.0, 1.0);
        (255.0 * (1.0 - t) + 8.0 * t, 255.0 * (1.0 - t) + 81.0 * t, 255.0 * (1.0 - t) + 156.0 * t)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn render_matrix(
    kind: PlotKind,
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<Option<f64>>],
    symmetric: bool,
) -> Result<String, PlotError> {
    if values.is_empty() || values.len() != row_labels.len() || values.iter().any(|r| r.len() != col_labels.len()) {
        return Err(incompatible(kind, "matrix shape does not match labels"));
    }
    let finite: Vec<f64> = values.iter().flatten().flatten().copied().filter(|v| v.is_finite()).collect();
    let max_abs = finite.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (nr, nc) = (values.len() as f64, col_labels.len() as f64);
    let area = Rect { x: 180.0, y: 60.0, w: 560.0, h: 400.0 };
    let (cw, ch) = (area.w / nc, area.h / nr);
    let font = (ch.min(cw) * 0.35).clamp(6.0, 16.0) as u32;
    let mut canvas = Canvas::new(title);
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let (x, y) = (area.x + j as f64 * cw, area.y + i as f64 * ch);
            let fill = match v {
                Some(v) if v.is_finite() => {
                    let t = if symmetric { v / max_abs.max(1e-300) } else { v.abs() / max_abs.max(1e-300) };
                    heat_colour(if symmetric { t } else { t }, symmetric)
                }
                _ => String::from("#eeeeee"),
            };
            canvas.push(format!(
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="white"/>"#,
                c(x),
                c(y),
                c(cw),
                c(ch)
            ));
            let label = v.filter(|v| v.is_finite()).map_or_else(|| String::from("n/a"), format_sig);
            canvas.text(x + cw / 2.0, y + ch / 2.0 + font as f64 / 3.0, "middle", font, &label);
        }
    }
    for (i, l) in row_labels.iter().enumerate() {
        canvas.text(area.x - 6.0, area.y + (i as f64 + 0.5) * ch + 4.0, "end", 11, l);
    }
    for (j, l) in col_labels.iter().enumerate() {
        let (x, y) = (area.x + (j as f64 + 0.5) * cw, area.y + area.h + 12.0);
        canvas.push(format!(
            r#"<text x="{0}" y="{1}" text-anchor="end" font-size="11" transform="rotate(-40 {0} {1})">{2}</text>"#,
            c(x),
            c(y),
            esc(l)
        ));
    }
    Ok(canvas.finish())
}

fn render_bars(kind: PlotKind, title: &str, labels: &[String], values: &[f64], value_label: &str) -> Result<String, PlotError> {
    if labels.is_empty() || labels.len() != values.len() {
        return Err(incompatible(kind, "label and value counts differ or are zero"));
    }
    let xs = Scale::of(values.iter().copied().chain([0.0])).ok_or_else(|| incompatible(kind, "no finite values"))?;
    let area = Rect { x: 220.0, y: 60.0, w: 520.0, h: 460.0 };
    let mut canvas = Canvas::new(title);
    let ys = Scale { lo: 0.0, hi: 1.0 };
    axes(&mut canvas, area, xs, ys, value_label, "");
    let bh = area.h / labels.len() as f64;
    let zero = area.x + xs.frac(0.0) * area.w;
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let y = area.y + i as f64 * bh;
        if v.is_finite() {
            let end = area.x + xs.frac(*v) * area.w;
            let colour = if *v >= 0.0 { PALETTE[0] } else { PALETTE[3] };
            canvas.push(format!(
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{colour}"/>"#,
                c(zero.min(end)),
                c(y + bh * 0.15),
                c((end - zero).abs()),
                c(bh * 0.7)
            ));
        }
        canvas.text(area.x - 8.0, y + bh / 2.0 + 4.0, "end", 11, l);
    }
    Ok(canvas.finish())
}

/// Renders `data` as a chart of the given kind.
pub fn plot(kind: PlotKind, title: &str, caption: &str, file_name: &str, data: &PlotData) -> Result<PlotArtifact, PlotError> {
    let svg = match (kind, data) {
        (PlotKind::RocCurve | PlotKind::PdpCurve | PlotKind::LossCurve, PlotData::Lines(panels)) => render_lines(kind, title, panels)?,
        (PlotKind::PcaScatter | PlotKind::ClusterScatter, PlotData::Scatter { x_label, y_label, points, groups }) => {
            render_scatter(kind, title, x_label, y_label, points, groups)?
        }
        (PlotKind::ConfusionHeatmap | PlotKind::CorrelationHeatmap, PlotData::Matrix { row_labels, col_labels, values, symmetric_scale }) => {
            render_matrix(kind, title, row_labels, col_labels, values, *symmetric_scale)?
        }
        (PlotKind::ShapBar, PlotData::Bars { labels, values, value_label }) => render_bars(kind, title, labels, values, value_label)?,
        _ => return Err(incompatible(kind, "data shape does not suit this chart")),
    };
    Ok(PlotArtifact { kind, file_name: file_name.to_string(), caption: caption.to_string(), svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.123456), "0.1235");
        assert_eq!(format_sig(1234.6), "1235");
        assert_eq!(format_sig(2.0), "2");
        assert_eq!(format_sig(-0.5), "-0.5");
        assert_eq!(format_sig(123456.0), "1.235e5");
        assert_eq!(format_sig(0.0001234), "1.234e-4");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn confusion_annotations() {
        let data = PlotData::Matrix {
            row_labels: vec!["a".into(), "b".into()],
            col_labels: vec!["a".into(), "b".into()],
            values: vec![vec![Some(2.0), Some(0.0)], vec![Some(0.0), Some(3.0)]],
            symmetric_scale: false,
        };
        let p = plot(PlotKind::ConfusionHeatmap, "Confusion", "", "c.svg", &data).unwrap();
        assert!(p.svg.contains(">2</text>"));
        assert!(p.svg.contains(">3</text>"));
    }

    #[test]
    fn incompatible_data() {
        let data = PlotData::Bars { labels: vec!["x".into()], values: vec![1.0], value_label: "v".into() };
        assert!(plot(PlotKind::RocCurve, "t", "", "r.svg", &data).is_err());
        let empty = PlotData::Scatter { x_label: "x".into(), y_label: "y".into(), points: vec![], groups: vec![] };
        assert!(plot(PlotKind::PcaScatter, "t", "", "p.svg", &empty).is_err());
    }

    #[test]
    fn non_finite_points_skipped() {
        let panel = Panel {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series { label: "s".into(), points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)] }],
            diagonal: false,
        };
        let p = plot(PlotKind::LossCurve, "t", "", "l.svg", &PlotData::Lines(vec![panel])).unwrap();
        assert!(!p.svg.contains("NaN") && !p.svg.contains("inf"));
    }

    #[test]
    fn escapes_text() {
        let data = PlotData::Bars { labels: vec!["a<b & c".into()], values: vec![1.0], value_label: "v".into() };
        let p = plot(PlotKind::ShapBar, "x", "", "s.svg", &data).unwrap();
        assert!(p.svg.contains("a&lt;b &amp; c"));
    }
}
