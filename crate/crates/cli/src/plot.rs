//! Deterministic SVG scatter plots for two-dimensional datasets: points
//! colored by cluster label (categorical palette) or by predicted value
//! (sequential ramp). The output depends only on the inputs, so fixed
//! pipelines reproduce plots byte for byte.

use geoseg_core::graph::SpatialDataset;
use geoseg_core::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PLOT_X: f64 = 40.0;
const PLOT_Y: f64 = 20.0;
const PLOT_W: f64 = 420.0;
const PLOT_H: f64 = 420.0;
const LEGEND_X: f64 = 480.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf",
];

/// Three-stop ramp from low (dark purple) through teal to high (yellow).
const RAMP: [(u8, u8, u8); 3] = [(0x44, 0x01, 0x54), (0x21, 0x91, 0x8c), (0xfd, 0xe7, 0x25)];

fn require_planar(data: &SpatialDataset) -> Result<()> {
    if data.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "plotting needs exactly two axes (dataset has {})",
            data.dim()
        )));
    }
    Ok(())
}

/// Maps data coordinates into the plot rectangle, y flipped so larger
/// values sit higher. Degenerate spans get a unit of artificial width so
/// single points land in the middle.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn new(data: &SpatialDataset) -> Frame {
        let (lo, hi) = data.bounding_box();
        let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
        let (wx, wy) = (span(lo[0], hi[0]), span(lo[1], hi[1]));
        let pad = 0.05;
        Frame {
            x0: lo[0] - pad * wx,
            y0: lo[1] - pad * wy,
            sx: PLOT_W / (wx * (1.0 + 2.0 * pad)),
            sy: PLOT_H / (wy * (1.0 + 2.0 * pad)),
        }
    }

    fn x(&self, v: f64) -> f64 {
        PLOT_X + (v - self.x0) * self.sx
    }

    fn y(&self, v: f64) -> f64 {
        PLOT_Y + PLOT_H - (v - self.y0) * self.sy
    }
}

fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (a, b, s) = if t <= 0.5 {
        (RAMP[0], RAMP[1], t * 2.0)
    } else {
        (RAMP[1], RAMP[2], (t - 0.5) * 2.0)
    };
    let mix = |x: u8, y: u8| (f64::from(x) + (f64::from(y) - f64::from(x)) * s).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn open_svg(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <rect x=\"{PLOT_X}\" y=\"{PLOT_Y}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         fill=\"none\" stroke=\"#cccccc\"/>\n"
    ));
}

fn push_circle(out: &mut String, frame: &Frame, p: &[f64], color: &str) {
    out.push_str(&format!(
        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{color}\"/>\n",
        frame.x(p[0]),
        frame.y(p[1])
    ));
}

/// Scatter of `data` colored by cluster label; one legend entry per cluster.
pub fn labels_svg(data: &SpatialDataset, labels: &[usize], m: usize) -> Result<String> {
    require_planar(data)?;
    if labels.len() != data.n() {
        return Err(Error::InvalidParameter(format!(
            "{} labels for {} points",
            labels.len(),
            data.n()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} out of range for {m} clusters"
        )));
    }
    let mut sizes = vec![0usize; m];
    for &l in labels {
        sizes[l] += 1;
    }
    let frame = Frame::new(data);
    let mut out = String::new();
    open_svg(&mut out);
    for (i, p) in data.points().enumerate() {
        push_circle(&mut out, &frame, p, PALETTE[labels[i] % PALETTE.len()]);
    }
    for (k, &size) in sizes.iter().enumerate() {
        let y = PLOT_Y + 22.0 * k as f64;
        out.push_str(&format!(
            "<rect class=\"legend\" x=\"{LEGEND_X}\" y=\"{y}\" width=\"14\" height=\"14\" \
             fill=\"{}\"/>\n",
            PALETTE[k % PALETTE.len()]
        ));
        out.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\">cluster {} ({size})</text>\n",
            LEGEND_X + 20.0,
            y + 12.0,
            k + 1
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Scatter of `data` colored by the prediction at each point, with a
/// vertical color-bar legend from the minimum to the maximum.
pub fn eta_svg(data: &SpatialDataset, eta: &[f64]) -> Result<String> {
    require_planar(data)?;
    if eta.len() != data.n() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} points",
            eta.len(),
            data.n()
        )));
    }
    let lo = eta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_of = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let frame = Frame::new(data);
    let mut out = String::new();
    open_svg(&mut out);
    out.push_str(&format!(
        "<linearGradient id=\"ramp\" x1=\"0\" y1=\"0\" x2=\"0\" y2=\"1\">\n\
         <stop offset=\"0%\" stop-color=\"{}\"/>\n\
         <stop offset=\"50%\" stop-color=\"{}\"/>\n\
         <stop offset=\"100%\" stop-color=\"{}\"/>\n\
         </linearGradient>\n",
        ramp_color(1.0),
        ramp_color(0.5),
        ramp_color(0.0)
    ));
    for (i, p) in data.points().enumerate() {
        push_circle(&mut out, &frame, p, &ramp_color(t_of(eta[i])));
    }
    let bar_h = 200.0;
    out.push_str(&format!(
        "<rect class=\"ramp\" x=\"{LEGEND_X}\" y=\"{PLOT_Y}\" width=\"18\" height=\"{bar_h}\" \
         fill=\"url(#ramp)\" stroke=\"#cccccc\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\">{hi:.4}</text>\n",
        LEGEND_X + 24.0,
        PLOT_Y + 12.0
    ));
    out.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\">{lo:.4}</text>\n",
        LEGEND_X + 24.0,
        PLOT_Y + bar_h
    ));
    out.push_str("</svg>\n");
    Ok(out)
}
