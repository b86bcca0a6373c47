//! Minimal SVG scatter plots on the unit square.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub size: f64,
    pub radius: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "majority accuracy".into(),
            y_label: "minority accuracy".into(),
            size: 480.0,
            radius: 2.5,
        }
    }
}

const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the plot. Axes span [0, 1] with ticks every 0.1; values outside
/// the square are clipped to its border.
pub fn render_svg(scatters: &[Scatter], overlays: &[Overlay], style: &PlotStyle) -> String {
    let s = style.size;
    let total = s + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x.clamp(0.0, 1.0) * s;
    let py = |y: f64| MARGIN + (1.0 - y.clamp(0.0, 1.0)) * s;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{s}" height="{s}" fill="none" stroke="#333"/>"##
    );
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let (x, y) = (px(v), py(v));
        let bottom = MARGIN + s;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"##,
            bottom + 4.0,
            bottom + 16.0
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            MARGIN - 4.0,
            MARGIN - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN + s / 2.0,
        total - 14.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        MARGIN + s / 2.0,
        MARGIN + s / 2.0,
        escape(&style.y_label)
    );
    if !style.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            total / 2.0,
            escape(&style.title)
        );
    }
    for sc in scatters {
        let _ = writeln!(out, r#"<g fill="{}" fill-opacity="0.6"><title>{}</title>"#, escape(&sc.color), escape(&sc.label));
        for &(x, y) in &sc.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="{}"/>"#, px(x), py(y), style.radius);
        }
        out.push_str("</g>\n");
    }
    for ov in overlays {
        let pts: Vec<String> = ov.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            escape(&ov.color),
            pts.join(" "),
            escape(&ov.label)
        );
    }
    let mut legend_y = MARGIN + 14.0;
    for (label, color) in scatters
        .iter()
        .map(|s| (&s.label, &s.color))
        .chain(overlays.iter().map(|o| (&o.label, &o.color)))
    {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            MARGIN + 8.0,
            legend_y - 9.0,
            escape(color),
            MARGIN + 22.0,
            legend_y,
            escape(label)
        );
        legend_y += 14.0;
    }
    out.push_str("</svg>\n");
    out
}

/// Renders and writes the plot atomically. At least one scatter point is
/// required.
pub fn emit_plot(scatters: &[Scatter], overlays: &[Overlay], style: &PlotStyle, path: &Path) -> Result<()> {
    if scatters.iter().all(|s| s.points.is_empty()) {
        return Err(crate::Error::InvalidArgument("plot has no points".into()));
    }
    super::write_atomic(path, render_svg(scatters, overlays, style).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(n: usize) -> Scatter {
        Scatter {
            label: "models".into(),
            color: "steelblue".into(),
            points: (0..n).map(|i| (i as f64 / n as f64, 0.5)).collect(),
        }
    }

    #[test]
    fn one_circle_per_point_and_no_polyline_without_overlays() {
        let svg = render_svg(&[cloud(3)], &[], &PlotStyle::default());
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("text-anchor=\"middle\">0.").count(), 10);
    }

    #[test]
    fn overlays_become_polylines() {
        let ov = Overlay { label: "fit <q>".into(), color: "red".into(), points: vec![(0.0, 0.0), (1.0, 1.0)] };
        let svg = render_svg(&[cloud(2)], &[ov], &PlotStyle::default());
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("fit &lt;q&gt;"));
    }

    /// Balanced-tag check: every opened element is closed in order.
    fn well_formed(svg: &str) -> bool {
        let mut stack = Vec::new();
        let mut rest = svg;
        while let Some(i) = rest.find('<') {
            let end = match rest[i..].find('>') {
                Some(e) => i + e,
                None => return false,
            };
            let tag = &rest[i + 1..end];
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop() != Some(name.trim().to_string()) {
                    return false;
                }
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                stack.push(tag.split_whitespace().next().unwrap_or("").to_string());
            }
            rest = &rest[end + 1..];
        }
        stack.is_empty()
    }

    #[test]
    fn large_sweep_plot_is_well_formed_and_small() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moon.svg");
        let ov = Overlay { label: "fit".into(), color: "red".into(), points: (0..61).map(|i| (i as f64 / 60.0, 0.4)).collect() };
        emit_plot(&[cloud(500)], &[ov], &PlotStyle::default(), &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.len() < 2 << 20);
        assert!(well_formed(&svg));
        assert!(!well_formed("<svg><g></svg>"));
    }

    #[test]
    fn empty_plot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let empty = Scatter { label: "none".into(), color: "black".into(), points: vec![] };
        assert!(emit_plot(&[empty], &[], &PlotStyle::default(), &dir.path().join("x.svg")).is_err());
    }
}
