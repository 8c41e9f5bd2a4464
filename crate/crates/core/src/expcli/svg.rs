//! Minimal deterministic SVG charts. Coordinates are printed with fixed
//! precision so re-rendering the same data yields identical bytes.

use std::fmt::Write;

use crate::metrics::Histogram;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; otherwise fitted to the data.
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else if v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            out,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
            x1 - x0,
            y1 - y0
        );
        for t in ticks(self.x.0, self.x.1) {
            let px = self.px(t);
            let _ = writeln!(
                out,
                "<line x1=\"{px:.2}\" y1=\"{y1}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"#444\"/>\
                 <text x=\"{px:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                y1 + 5.0,
                y1 + 18.0,
                tick_label(t)
            );
        }
        for t in ticks(self.y.0, self.y.1) {
            let py = self.py(t);
            let _ = writeln!(
                out,
                "<line x1=\"{:.1}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"#444\"/>\
                 <text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
            (x0 + x1) / 2.0,
            H - 12.0,
            escape(x_label),
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

pub fn line_chart(chart: &LineChart) -> String {
    let mut out = String::new();
    header(&mut out, &chart.title);
    let x = extent(chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = chart
        .y_range
        .unwrap_or_else(|| extent(chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
    let frame = Frame { x, y };
    frame.axes(&mut out, &chart.x_label, &chart.y_label);
    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", frame.px(a), frame.py(b.clamp(y.0, y.1))))
            .collect();
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        if path.len() == 1 {
            let (cx, cy) = path[0].split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(out, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>");
        } else if !path.is_empty() {
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
                path.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 10.0;
        let _ = writeln!(
            out,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{:.1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Blue (−1) through white (0) to red (+1); values are clipped to [−1, 1].
pub fn diverging_color(v: f64) -> String {
    let v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    let fade = |c: f64, t: f64| (255.0 + (c - 255.0) * t).round() as u8;
    let (r, g, b) = if v < 0.0 {
        (fade(33.0, -v), fade(102.0, -v), fade(172.0, -v))
    } else {
        (fade(178.0, v), fade(24.0, v), fade(43.0, v))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn heatmap(title: &str, matrix: &[Vec<f64>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let n = matrix.len().max(1);
    let size = (H - TOP - BOTTOM).min(W - LEFT - RIGHT);
    let cell = size / n as f64;
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                LEFT + j as f64 * cell,
                TOP + i as f64 * cell,
                cell + 0.05,
                cell + 0.05,
                diverging_color(v)
            );
        }
    }
    // Color bar.
    let bx = LEFT + size + 20.0;
    for k in 0..50 {
        let v = 1.0 - 2.0 * k as f64 / 49.0;
        let _ = writeln!(
            out,
            "<rect x=\"{bx:.1}\" y=\"{:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>",
            TOP + k as f64 * size / 50.0,
            size / 50.0 + 0.05,
            diverging_color(v)
        );
    }
    for (v, y) in [(1.0, TOP), (0.0, TOP + size / 2.0), (-1.0, TOP + size)] {
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>", bx + 20.0, y + 4.0, tick_label(v));
    }
    out.push_str("</svg>\n");
    out
}

pub fn histogram_chart(title: &str, x_label: &str, h: &Histogram, peaks: Option<(f64, f64)>) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame {
        x: (h.lo, h.hi),
        y: (0.0, top),
    };
    frame.axes(&mut out, x_label, "count");
    for (k, &c) in h.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x0 = frame.px(h.lo + k as f64 * h.width());
        let x1 = frame.px(h.lo + (k + 1) as f64 * h.width());
        let y = frame.py(c as f64);
        let _ = writeln!(
            out,
            "<rect x=\"{x0:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#1f77b4\"/>",
            (x1 - x0).max(0.5),
            H - BOTTOM - y
        );
    }
    if let Some((a, b)) = peaks {
        for p in [a, b] {
            let px = frame.px(p);
            let _ = writeln!(
                out,
                "<line x1=\"{px:.2}\" y1=\"{TOP}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>",
                H - BOTTOM
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(0.0, 2500.0), vec![0.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0]);
    }

    #[test]
    fn color_scale_is_clipped() {
        assert_eq!(diverging_color(0.0), "#ffffff");
        assert_eq!(diverging_color(1.0), diverging_color(7.0));
        assert_eq!(diverging_color(-1.0), "#2166ac");
        assert_eq!(diverging_color(1.0), "#b2182b");
    }

    #[test]
    fn deterministic_output() {
        let chart = LineChart {
            title: "a < b".into(),
            x_label: "epoch".into(),
            y_label: "acc".into(),
            series: vec![Series::new("train", vec![(0.0, 0.1), (10.0, 0.9)]), Series::new("one", vec![(5.0, 0.5)]).dashed()],
            y_range: Some((0.0, 1.0)),
        };
        let a = line_chart(&chart);
        assert_eq!(a, line_chart(&chart));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a &lt; b"));
        assert!(a.contains("<circle"));
    }
}
