//! Self-contained SVG scatter plots: one panel per factor against the loss,
//! with scenario markers and the threshold rule-line overlaid. Everything is
//! written with fixed decimal formatting so identical inputs give
//! byte-identical documents.

use std::fmt::Write as _;

use crate::commands::EstimateArtifact;
use crate::data::Dataset;
use crate::CliError;

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 220.0;
const GAP: f64 = 16.0;
const LEFT: f64 = 48.0;
const RIGHT: f64 = 12.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 32.0;
const LEGEND_H: f64 = 26.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Inclusive data range padded by 5%, widened when degenerate.
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Range { lo: -1.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            return Range { lo: lo - 1.0, hi: hi + 1.0 };
        }
        let pad = 0.05 * (hi - lo);
        Range { lo: lo - pad, hi: hi + pad }
    }

    /// Map a data value to a pixel offset in [0, extent].
    fn to_px(&self, v: f64, extent: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo) * extent
    }
}

/// Tick label with enough digits for daily changes without drowning the axis.
fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs();
    if (0.01..10000.0).contains(&magnitude) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Render the dataset and scenario estimates as one SVG document.
pub fn render_scatter(data: &Dataset, artifacts: &[EstimateArtifact]) -> Result<String, CliError> {
    for artifact in artifacts {
        if artifact.estimate.m_hat.len() != artifact.names.len() {
            return Err(CliError::User(format!(
                "estimate for {} names {} factors but carries {} coordinates",
                artifact.estimate.method,
                artifact.names.len(),
                artifact.estimate.m_hat.len()
            )));
        }
    }

    let d = data.dimension();
    let cols = if d <= 4 { 2.min(d) } else { 3 };
    let rows = d.div_ceil(cols);
    let width = GAP + (PANEL_W + GAP) * cols as f64;
    let height = LEGEND_H + GAP + (PANEL_H + GAP) * rows as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>");

    let mut x = GAP;
    for (i, artifact) in artifacts.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&artifact.estimate.method.to_string());
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"10\" width=\"14\" height=\"6\" fill=\"{color}\"/>\
             <text x=\"{:.2}\" y=\"17\" fill=\"#222\">{label}</text>",
            x + 18.0
        );
        x += 26.0 + 8.0 * label.len() as f64;
    }

    let plot_w = PANEL_W - LEFT - RIGHT;
    let plot_h = PANEL_H - TOP - BOTTOM;
    for (j, name) in data.names.iter().enumerate() {
        let px = GAP + (PANEL_W + GAP) * (j % cols) as f64;
        let py = LEGEND_H + GAP + (PANEL_H + GAP) * (j / cols) as f64;

        let markers: Vec<(usize, f64)> = artifacts
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                a.names.iter().position(|n| n == name).map(|k| (i, a.estimate.m_hat[k]))
            })
            .collect();
        let xr = Range::of(
            data.factors.iter().map(|row| row[j]).chain(markers.iter().map(|&(_, m)| m)),
        );
        let yr = Range::of(
            data.losses.iter().copied().chain(artifacts.iter().map(|a| a.threshold)),
        );

        let _ = writeln!(svg, "<g transform=\"translate({px:.2},{py:.2})\">");
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"14\" text-anchor=\"middle\" fill=\"#222\">{}</text>",
            LEFT + plot_w / 2.0,
            escape(name)
        );
        // Axes and corner tick labels.
        let _ = writeln!(
            svg,
            "<rect x=\"{LEFT:.2}\" y=\"{TOP:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
             fill=\"none\" stroke=\"#999\"/>"
        );
        let base = TOP + plot_h;
        let _ = writeln!(
            svg,
            "<text x=\"{LEFT:.2}\" y=\"{:.2}\" fill=\"#555\">{}</text>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#555\">{}</text>",
            base + 14.0,
            tick(xr.lo),
            LEFT + plot_w,
            base + 14.0,
            tick(xr.hi)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#555\">{}</text>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#555\">{}</text>",
            LEFT - 4.0,
            base,
            tick(yr.lo),
            LEFT - 4.0,
            TOP + 8.0,
            tick(yr.hi)
        );

        for (row, &loss) in data.factors.iter().zip(&data.losses) {
            let cx = LEFT + xr.to_px(row[j], plot_w);
            let cy = base - yr.to_px(loss, plot_h);
            let _ = writeln!(
                svg,
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\" fill=\"#777777\" fill-opacity=\"0.45\"/>"
            );
        }

        for (i, artifact) in artifacts.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let ty = base - yr.to_px(artifact.threshold, plot_h);
            let _ = writeln!(
                svg,
                "<line x1=\"{LEFT:.2}\" y1=\"{ty:.2}\" x2=\"{:.2}\" y2=\"{ty:.2}\" \
                 stroke=\"{color}\" stroke-dasharray=\"5,3\"/>",
                LEFT + plot_w
            );
        }
        for &(i, m) in &markers {
            let color = PALETTE[i % PALETTE.len()];
            let mx = LEFT + xr.to_px(m, plot_w);
            let _ = writeln!(
                svg,
                "<line x1=\"{mx:.2}\" y1=\"{TOP:.2}\" x2=\"{mx:.2}\" y2=\"{base:.2}\" \
                 stroke=\"{color}\" stroke-width=\"1.5\"/>"
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
