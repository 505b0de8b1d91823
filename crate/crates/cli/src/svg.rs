//! Self-contained SVG line plots: axes, decade or linear ticks, one polyline
//! per series with the data points drawn explicitly so the artifact carries
//! its numbers.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
    pub series: &'a [Series<'a>],
}

const W: f64 = 760.0;
const H: f64 = 480.0;
const ML: f64 = 86.0;
const MR: f64 = 24.0;
const MT: f64 = 46.0;
const MB: f64 = 64.0;
const COLORS: [&str; 5] = ["#1f6feb", "#d62728", "#2ca02c", "#9467bd", "#e08e00"];

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.log10()
    } else {
        v
    }
}

/// Tick positions in transformed coordinates with their display labels.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    if log {
        let first = lo.ceil() as i64;
        let last = hi.floor() as i64;
        let mut out = Vec::new();
        let step = 1 + ((last - first) / 8).max(0);
        let mut k = first;
        while k <= last {
            out.push((k as f64, format!("1e{k}")));
            k += step;
        }
        if out.is_empty() {
            out.push((lo, format!("{:.3e}", 10f64.powf(lo))));
            out.push((hi, format!("{:.3e}", 10f64.powf(hi))));
        }
        out
    } else {
        let span = hi - lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| span / s <= 6.0)
            .unwrap_or(mag);
        let mut out = Vec::new();
        let mut v = (lo / step).ceil() * step;
        while v <= hi + 1e-12 * span {
            out.push((v, format!("{}", (v * 1e6).round() / 1e6)));
            v += step;
        }
        out
    }
}

pub fn render(plot: &Plot) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in plot.series {
        for &(x, y) in s.points {
            if plot.log_x && x <= 0.0 || plot.log_y && y <= 0.0 {
                continue;
            }
            xs.push(transform(x, plot.log_x));
            ys.push(transform(y, plot.log_y));
        }
    }
    let (mut x0, mut x1) = bounds(&xs);
    let (mut y0, mut y1) = bounds(&ys);
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_y = 0.06 * (y1 - y0);
    y0 -= pad_y;
    y1 += pad_y;

    let px = |v: f64| ML + (v - x0) / (x1 - x0) * (W - ML - MR);
    let py = |v: f64| H - MB - (v - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"monospace\" font-size=\"13\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(plot.title)
    );

    for (v, label) in ticks(x0, x1, plot.log_x) {
        let x = px(v);
        let _ = write!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#ddd\"/>\n\
             <text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            MT,
            H - MB,
            H - MB + 20.0
        );
    }
    for (v, label) in ticks(y0, y1, plot.log_y) {
        let y = py(v);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>\n",
            ML,
            W - MR,
            ML - 8.0,
            y + 4.0
        );
    }
    let _ = write!(
        svg,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"20\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
        W - ML - MR,
        H - MT - MB,
        (ML + W - MR) / 2.0,
        H - 18.0,
        escape(plot.x_label),
        H / 2.0,
        H / 2.0,
        escape(plot.y_label)
    );

    for (si, s) in plot.series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let mut path = String::new();
        for &(x, y) in s.points {
            if plot.log_x && x <= 0.0 || plot.log_y && y <= 0.0 {
                continue;
            }
            let cx = px(transform(x, plot.log_x));
            let cy = py(transform(y, plot.log_y));
            let _ = write!(path, "{},{} ", fmt(cx), fmt(cy));
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.trim_end()
        );
        for &(x, y) in s.points {
            if plot.log_x && x <= 0.0 || plot.log_y && y <= 0.0 {
                continue;
            }
            let cx = px(transform(x, plot.log_x));
            let cy = py(transform(y, plot.log_y));
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\">\
                 <title>{:.17e}, {:.17e}</title></circle>\n",
                fmt(cx),
                fmt(cy),
                x,
                y
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            ML + 12.0,
            MT + 20.0 + 18.0 * si as f64,
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(vs: &[f64]) -> (f64, f64) {
    let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_contains_points_and_labels() {
        let pts = [(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)];
        let svg = render(&Plot {
            title: "decay",
            x_label: "t",
            y_label: "error",
            log_x: true,
            log_y: true,
            series: &[Series {
                label: "einf",
                points: &pts,
            }],
        });
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("decay"));
        assert!(svg.contains("einf"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn log_axis_skips_nonpositive_values() {
        let pts = [(0.0, 1.0), (2.0, 0.5)];
        let svg = render(&Plot {
            title: "t",
            x_label: "x",
            y_label: "y",
            log_x: true,
            log_y: false,
            series: &[Series {
                label: "a",
                points: &pts,
            }],
        });
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
