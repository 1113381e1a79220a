//! Minimal deterministic SVG rendering for reports.
//!
//! Hand-rolled on purpose: the plots are simple (learning curves with
//! confidence bands, grid heatmaps, bar charts) and the report contract
//! requires byte-stable output, so every coordinate is formatted with a
//! fixed precision and no external plotting machinery is involved.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Color for the i-th series.
pub fn series_color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

/// One line series, optionally with a shaded confidence band.
pub struct Series {
    pub label: String,
    pub color: String,
    /// (x, y) points in data coordinates.
    pub points: Vec<(f64, f64)>,
    /// (x, low, high) band in data coordinates.
    pub band: Option<Vec<(f64, f64, f64)>>,
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        if self.x_max == self.x_min {
            return self.x0 + self.w / 2.0;
        }
        self.x0 + (v - self.x_min) / (self.x_max - self.x_min) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        if self.y_max == self.y_min {
            return self.y0 + self.h / 2.0;
        }
        self.y0 + self.h - (v - self.y_min) / (self.y_max - self.y_min) * self.h
    }
}

/// A line chart with optional per-series confidence bands and a legend.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    y_range: Option<(f64, f64)>,
) -> String {
    let (width, height) = (720.0, 440.0);
    let frame = {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for s in series {
            for &(x, y) in &s.points {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
            if let Some(band) = &s.band {
                for &(_, lo, hi) in band {
                    y_min = y_min.min(lo);
                    y_max = y_max.max(hi);
                }
            }
        }
        if !x_min.is_finite() {
            x_min = 0.0;
            x_max = 1.0;
            y_min = 0.0;
            y_max = 1.0;
        }
        if let Some((lo, hi)) = y_range {
            y_min = lo;
            y_max = hi;
        }
        Frame {
            x0: 70.0,
            y0: 40.0,
            w: width - 100.0,
            h: height - 110.0,
            x_min,
            x_max,
            y_min,
            y_max,
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        escape(title)
    );

    // Axes with 5 ticks per side.
    let _ = writeln!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        fmt2(frame.x0),
        fmt2(frame.y0),
        fmt2(frame.w),
        fmt2(frame.h)
    );
    for i in 0..=5 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * f64::from(i) / 5.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * f64::from(i) / 5.0;
        let px = frame.x(fx);
        let py = frame.y(fy);
        let _ = writeln!(
            svg,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>",
            x = fmt2(px),
            y0 = fmt2(frame.y0),
            y1 = fmt2(frame.y0 + frame.h)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt2(px),
            fmt2(frame.y0 + frame.h + 14.0),
            format_tick(fx)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>",
            x0 = fmt2(frame.x0),
            x1 = fmt2(frame.x0 + frame.w),
            y = fmt2(py)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            fmt2(frame.x0 - 6.0),
            fmt2(py + 3.0),
            format_tick(fy)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        fmt2(frame.x0 + frame.w / 2.0),
        fmt2(frame.y0 + frame.h + 34.0),
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        fmt2(frame.y0 + frame.h / 2.0),
        fmt2(frame.y0 + frame.h / 2.0),
        escape(y_label)
    );

    for s in series {
        if let Some(band) = &s.band {
            if band.len() >= 2 {
                let mut points = String::new();
                for &(x, _, hi) in band {
                    let _ = write!(points, "{},{} ", fmt2(frame.x(x)), fmt2(frame.y(hi)));
                }
                for &(x, lo, _) in band.iter().rev() {
                    let _ = write!(points, "{},{} ", fmt2(frame.x(x)), fmt2(frame.y(lo)));
                }
                let _ = writeln!(
                    svg,
                    "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
                    points.trim_end(),
                    s.color
                );
            }
        }
        if !s.points.is_empty() {
            let mut points = String::new();
            for &(x, y) in &s.points {
                let _ = write!(points, "{},{} ", fmt2(frame.x(x)), fmt2(frame.y(y)));
            }
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                points.trim_end(),
                s.color
            );
        }
    }

    // Legend.
    for (i, s) in series.iter().enumerate() {
        let ly = frame.y0 + 14.0 * i as f64 + 8.0;
        let lx = frame.x0 + frame.w - 160.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>",
            fmt2(lx),
            fmt2(ly),
            fmt2(lx + 18.0),
            fmt2(ly),
            s.color
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>",
            fmt2(lx + 24.0),
            fmt2(ly + 3.0),
            escape(&s.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

/// A per-cell grid heatmap with numeric annotations. `values` is
/// row-major; `None` marks wall cells, drawn dark and unannotated.
pub fn grid_heatmap(title: &str, cols: usize, rows: usize, values: &[Option<f64>]) -> String {
    assert_eq!(values.len(), cols * rows);
    let cell = 42.0;
    let margin = 30.0;
    let width = margin * 2.0 + cell * cols as f64;
    let height = margin * 2.0 + cell * rows as f64 + 20.0;
    let max = values
        .iter()
        .flatten()
        .copied()
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        escape(title)
    );
    for r in 0..rows {
        for c in 0..cols {
            let x = margin + cell * c as f64;
            let y = margin + cell * r as f64 + 10.0;
            match values[r * cols + c] {
                None => {
                    let _ = writeln!(
                        svg,
                        "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"#333\" stroke=\"#999\" stroke-width=\"0.5\"/>",
                        fmt2(x),
                        fmt2(y)
                    );
                }
                Some(v) => {
                    let frac = (v / max).clamp(0.0, 1.0);
                    // White → saturated blue ramp.
                    let r_ch = (255.0 - 204.0 * frac) as u8;
                    let g_ch = (255.0 - 136.0 * frac) as u8;
                    let b_ch = 255u8;
                    let _ = writeln!(
                        svg,
                        "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({r_ch},{g_ch},{b_ch})\" stroke=\"#999\" stroke-width=\"0.5\"/>",
                        fmt2(x),
                        fmt2(y)
                    );
                    let _ = writeln!(
                        svg,
                        "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{}</text>",
                        fmt2(x + cell / 2.0),
                        fmt2(y + cell / 2.0 + 3.0),
                        format_tick(v)
                    );
                }
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// One bar: label, value, optional error-bar interval.
pub type Bar = (String, f64, Option<(f64, f64)>);

/// A simple bar chart with optional error bars.
pub fn bar_chart(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let (width, height) = (640.0, 400.0);
    let frame_x0 = 70.0;
    let frame_y0 = 40.0;
    let frame_w = width - 100.0;
    let frame_h = height - 120.0;
    let y_max = bars
        .iter()
        .map(|(_, v, ci)| ci.map_or(*v, |(_, hi)| hi.max(*v)))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.1;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"#444\"/>",
        x0 = fmt2(frame_x0),
        x1 = fmt2(frame_x0 + frame_w),
        y1 = fmt2(frame_y0 + frame_h)
    );
    for i in 0..=5 {
        let v = y_max * f64::from(i) / 5.0;
        let y = frame_y0 + frame_h - v / y_max * frame_h;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            fmt2(frame_x0 - 6.0),
            fmt2(y + 3.0),
            format_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        fmt2(frame_y0 + frame_h / 2.0),
        fmt2(frame_y0 + frame_h / 2.0),
        escape(y_label)
    );
    let slot = frame_w / bars.len().max(1) as f64;
    for (i, (label, value, ci)) in bars.iter().enumerate() {
        let cx = frame_x0 + slot * (i as f64 + 0.5);
        let bar_w = slot * 0.6;
        let top = frame_y0 + frame_h - value / y_max * frame_h;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            fmt2(cx - bar_w / 2.0),
            fmt2(top),
            fmt2(bar_w),
            fmt2(frame_y0 + frame_h - top),
            series_color(i)
        );
        if let Some((lo, hi)) = ci {
            let y_lo = frame_y0 + frame_h - lo / y_max * frame_h;
            let y_hi = frame_y0 + frame_h - hi / y_max * frame_h;
            let _ = writeln!(
                svg,
                "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"#222\" stroke-width=\"1.5\"/>",
                x = fmt2(cx),
                y0 = fmt2(y_lo),
                y1 = fmt2(y_hi)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt2(cx),
            fmt2(frame_y0 + frame_h + 16.0),
            escape(label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt2(cx),
            fmt2(top - 4.0),
            format_tick(*value)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 10_000.0 {
        format!("{:.0}k", v / 1_000.0)
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed_and_deterministic() {
        let series = vec![Series {
            label: "run".into(),
            color: series_color(0).into(),
            points: vec![(0.0, 0.0), (1.0, 0.5), (2.0, 1.0)],
            band: Some(vec![(0.0, 0.0, 0.1), (1.0, 0.4, 0.6), (2.0, 0.9, 1.0)]),
        }];
        let a = line_chart("title", "x", "y", &series, Some((0.0, 1.0)));
        let b = line_chart("title", "x", "y", &series, Some((0.0, 1.0)));
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("<polyline"));
        assert!(a.contains("<polygon"));
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn heatmap_marks_walls() {
        let values = vec![Some(1.0), None, Some(0.5), Some(0.0)];
        let svg = grid_heatmap("t", 2, 2, &values);
        assert!(svg.contains("#333"));
        assert!(svg.matches("<rect").count() >= 5);
    }

    #[test]
    fn bar_chart_renders_error_bars() {
        let bars = vec![
            ("a".to_string(), 0.5, Some((0.4, 0.6))),
            ("b".to_string(), 0.8, None),
        ];
        let svg = bar_chart("t", "score", &bars);
        assert!(svg.contains("stroke-width=\"1.5\""));
        assert!(svg.contains(">a<"));
    }
}
