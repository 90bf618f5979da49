//! Minimal SVG output: scatter plots with a fitted line and region-level
//! connectivity edge diagrams.

use std::fmt::Write;

use crate::model::{Region, RegionPair};

const W: f64 = 420.0;
const H: f64 = 320.0;
const MARGIN: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    SigPos,
    SigNeg,
    Neutral,
}

impl EdgeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::SigPos => "sig-pos",
            EdgeClass::SigNeg => "sig-neg",
            EdgeClass::Neutral => "neutral",
        }
    }

    fn stroke(self) -> (&'static str, f64) {
        match self {
            EdgeClass::SigPos => ("#c0392b", 4.0),
            EdgeClass::SigNeg => ("#2166ac", 4.0),
            EdgeClass::Neutral => ("#cccccc", 1.0),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Padded axis range that contains every value; degenerate ranges widen by 1.
pub fn axis_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    (lo - pad, hi + pad)
}

pub struct Scatter<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: &'a [(f64, f64)],
    pub r: Option<f64>,
    pub p: Option<f64>,
}

pub fn scatter_svg(s: &Scatter) -> String {
    let xs: Vec<f64> = s.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = s.points.iter().map(|p| p.1).collect();
    let (x0, x1) = axis_range(&xs);
    let (y0, y1) = axis_range(&ys);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" data-x-min="{x0}" data-x-max="{x1}" data-y-min="{y0}" data-y-max="{y1}">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(s.title));
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, W / 2.0, H - 12.0, escape(s.x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="11" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(s.y_label)
    );
    for (v, x) in [(x0, px(x0)), (x1, px(x1))] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="9">{v:.3}</text>"#, H - MARGIN + 12.0);
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-size="9">{v:.3}</text>"#, MARGIN - 4.0);
    }
    if let Some((slope, icept)) = fit_line(s.points) {
        let _ = writeln!(
            out,
            r##"<line class="fit" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
            px(x0),
            py(slope * x0 + icept),
            px(x1),
            py(slope * x1 + icept)
        );
    }
    for &(x, y) in s.points {
        let _ = writeln!(out, r#"<circle class="point" cx="{}" cy="{}" r="4"/>"#, px(x), py(y));
    }
    if let (Some(r), Some(p)) = (s.r, s.p) {
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11">r = {r:.3}, p = {p:.3}</text>"#, MARGIN + 6.0, MARGIN + 14.0);
    }
    out.push_str("</svg>\n");
    out
}

fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn node_position(r: Region) -> (f64, f64) {
    match r {
        Region::Frontal => (160.0, 60.0),
        Region::Central => (160.0, 150.0),
        Region::Temporal => (60.0, 170.0),
        Region::Parietal => (160.0, 240.0),
        Region::Occipital => (160.0, 310.0),
    }
}

/// One element per region pair. Between-region edges are lines, within-region
/// edges are rings around the node; significant edges carry a sign class.
pub fn edge_svg(title: &str, edges: &[(RegionPair, EdgeClass)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="320" height="360">"#);
    let _ = writeln!(out, r#"<text x="160" y="20" text-anchor="middle" font-size="13">{}</text>"#, escape(title));
    let mut sorted: Vec<&(RegionPair, EdgeClass)> = edges.iter().collect();
    sorted.sort_by_key(|(_, c)| *c != EdgeClass::Neutral);
    for (pair, class) in sorted {
        let (color, width) = class.stroke();
        let (x1, y1) = node_position(pair.first());
        if pair.is_within() {
            let _ = writeln!(
                out,
                r#"<circle class="edge {}" data-pair="{}" cx="{x1}" cy="{y1}" r="24" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
                class.as_str(),
                pair.label()
            );
        } else {
            let (x2, y2) = node_position(pair.second());
            let (dx, dy) = if pair.first() == Region::Frontal && pair.second() != Region::Central
                || pair.first() == Region::Central && pair.second() == Region::Occipital
            {
                (70.0, 0.0)
            } else {
                (0.0, 0.0)
            };
            let _ = writeln!(
                out,
                r#"<path class="edge {}" data-pair="{}" d="M {x1} {y1} Q {} {} {x2} {y2}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
                class.as_str(),
                pair.label(),
                (x1 + x2) / 2.0 + dx,
                (y1 + y2) / 2.0 + dy
            );
        }
    }
    for r in Region::ALL {
        let (x, y) = node_position(r);
        let _ = writeln!(out, r##"<circle class="node" cx="{x}" cy="{y}" r="16" fill="#fff" stroke="black"/>"##);
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, y + 4.0, r.abbrev());
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(svg: &str, name: &str) -> f64 {
        let key = format!("{name}=\"");
        let start = svg.find(&key).unwrap() + key.len();
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end].parse().unwrap()
    }

    #[test]
    fn scatter_axes_cover_extrema() {
        let pts = [(-2.5, 10.0), (3.0, -4.0), (0.1, 0.2)];
        let svg = scatter_svg(&Scatter {
            title: "t",
            x_label: "x",
            y_label: "y",
            points: &pts,
            r: Some(0.5),
            p: Some(0.1),
        });
        assert!(attr(&svg, "data-x-min") <= -2.5 && attr(&svg, "data-x-max") >= 3.0);
        assert!(attr(&svg, "data-y-min") <= -4.0 && attr(&svg, "data-y-max") >= 10.0);
        assert_eq!(svg.matches("class=\"point\"").count(), 3);
    }

    #[test]
    fn edge_counts_pass_through() {
        let mut edges: Vec<(RegionPair, EdgeClass)> =
            RegionPair::all().into_iter().map(|p| (p, EdgeClass::Neutral)).collect();
        let svg = edge_svg("none", &edges);
        assert_eq!(svg.matches("class=\"edge neutral\"").count(), 15);
        assert_eq!(svg.matches("sig-").count(), 0);

        edges[1].1 = EdgeClass::SigPos;
        edges[4].1 = EdgeClass::SigNeg;
        edges[14].1 = EdgeClass::SigPos;
        let svg = edge_svg("three", &edges);
        assert_eq!(svg.matches("class=\"edge sig-").count(), 3);
        assert_eq!(svg.matches("class=\"edge neutral\"").count(), 12);
    }
}
