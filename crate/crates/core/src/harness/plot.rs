//! Minimal standalone SVG line charts.
//!
//! Hand-rolled on purpose: the charts only need polylines, axes, ticks, and
//! a legend, and emitting the SVG directly keeps plotting free of
//! dependencies and bit-reproducible. Layout is fixed at 640x440.

use crate::error::{Error, Result};

/// One plotted line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Pads a data range so lines do not sit on the plot border; degenerate
/// (zero-span) ranges get a unit of breathing room.
pub(crate) fn padded_range(min: f64, max: f64) -> (f64, f64) {
    let span = max - min;
    let pad = if span == 0.0 { 1.0 } else { span * 0.05 };
    (min - pad, max + pad)
}

/// Tick label formatting: fixed precision with trailing zeros removed, so
/// ticks like 0.3 and -10 read naturally.
fn fmt_tick(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the series as a standalone SVG line chart.
///
/// Every point must be finite and at least one series must contain a point;
/// axis ranges are derived from the data with a small pad.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Config(format!(
                    "series {:?} contains a non-finite point ({}, {})",
                    s.name, x, y
                )));
            }
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.is_empty() {
        return Err(Error::Config("nothing to plot: all series are empty".into()));
    }

    let (x_min, x_max) = padded_range(
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_min, y_max) = padded_range(
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w,
            MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n",
        w = WIDTH,
        h = HEIGHT
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        WIDTH, HEIGHT
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" fill=\"#222222\">{}</text>\n",
        WIDTH / 2.0,
        escape_xml(title)
    ));

    // Gridlines and tick labels, five per axis.
    const TICKS: usize = 5;
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let (px, _) = to_px(xv, y_min);
        let (_, py) = to_px(x_min, yv);
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            px,
            MARGIN_TOP,
            px,
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_LEFT,
            py,
            MARGIN_LEFT + plot_w,
            py
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\" fill=\"#222222\">{}</text>\n",
            px,
            MARGIN_TOP + plot_h + 16.0,
            fmt_tick(xv)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\" fill=\"#222222\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            py + 4.0,
            fmt_tick(yv)
        ));
    }

    // Axes on top of the grid.
    svg.push_str(&format!(
        "  <line x1=\"{l:.2}\" y1=\"{t:.2}\" x2=\"{l:.2}\" y2=\"{b:.2}\" stroke=\"#333333\"/>\n  \
         <line x1=\"{l:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"#333333\"/>\n",
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h,
        r = MARGIN_LEFT + plot_w
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape_xml(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\" \
         transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape_xml(y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.points.is_empty() {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{:.2},{:.2}", px, py)
                })
                .collect();
            svg.push_str(&format!(
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                pts.join(" "),
                color
            ));
            // Markers keep single- and two-point series visible.
            for &(x, y) in &s.points {
                let (px, py) = to_px(x, y);
                svg.push_str(&format!(
                    "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>\n",
                    px, py, color
                ));
            }
        }
        // Legend entry, top-right inside the plot area.
        let ly = MARGIN_TOP + 14.0 + i as f64 * 16.0;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            lx,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            color
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#222222\">{}</text>\n",
            lx + 24.0,
            ly,
            escape_xml(&s.name)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter(|l| l.contains("<polyline"))
            .map(|l| {
                let start = l.find("points=\"").unwrap() + 8;
                let end = l[start..].find('"').unwrap() + start;
                l[start..end]
                    .split(' ')
                    .map(|p| {
                        let (x, y) = p.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn one_polyline_per_series_with_all_points() {
        let series = vec![
            Series { name: "a".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] },
            Series { name: "b".into(), points: vec![(0.0, 2.0), (1.0, 1.0), (2.0, 3.0)] },
        ];
        let svg = line_chart("demo", "x", "y", &series).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let lines = polyline_points(&svg);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].len(), 2);
        assert_eq!(lines[1].len(), 3);
    }

    #[test]
    fn points_stay_inside_the_plot_area() {
        let series = vec![Series {
            name: "s".into(),
            points: vec![(-10.0, 0.01), (0.0, 0.5), (10.0, 0.93)],
        }];
        let svg = line_chart("demo", "x", "y", &series).unwrap();
        for line in polyline_points(&svg) {
            for (px, py) in line {
                assert!((64.0..=624.0).contains(&px), "x pixel {} out of plot", px);
                assert!((40.0..=392.0).contains(&py), "y pixel {} out of plot", py);
            }
        }
    }

    #[test]
    fn degenerate_ranges_are_padded() {
        // A single point has zero span on both axes; the chart must not
        // divide by zero and the point must land mid-plot.
        let series = vec![Series { name: "p".into(), points: vec![(3.0, 3.0)] }];
        let svg = line_chart("demo", "x", "y", &series).unwrap();
        let pts = polyline_points(&svg);
        assert_eq!(pts[0].len(), 1);
        let (px, py) = pts[0][0];
        assert!((px - (64.0 + 560.0 / 2.0)).abs() < 0.5);
        assert!((py - (40.0 + 352.0 / 2.0)).abs() < 0.5);
        assert_eq!(padded_range(2.0, 2.0), (1.0, 3.0));
        assert_eq!(padded_range(0.0, 10.0), (-0.5, 10.5));
    }

    #[test]
    fn series_names_are_escaped() {
        let series = vec![Series { name: "a<b&c".into(), points: vec![(0.0, 0.0), (1.0, 1.0)] }];
        let svg = line_chart("t&t", "x", "y", &series).unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(svg.contains("t&amp;t"));
        assert!(!svg.contains("a<b"));
    }

    #[test]
    fn empty_or_non_finite_input_is_rejected() {
        assert!(line_chart("t", "x", "y", &[]).is_err());
        let empty = vec![Series { name: "e".into(), points: vec![] }];
        assert!(line_chart("t", "x", "y", &empty).is_err());
        let bad = vec![Series { name: "n".into(), points: vec![(0.0, f64::NAN)] }];
        assert!(line_chart("t", "x", "y", &bad).is_err());
    }

    #[test]
    fn output_is_deterministic() {
        let series = vec![Series { name: "s".into(), points: vec![(0.0, 0.3), (5.0, 0.9)] }];
        let a = line_chart("t", "x", "y", &series).unwrap();
        let b = line_chart("t", "x", "y", &series).unwrap();
        assert_eq!(a, b);
    }
}
