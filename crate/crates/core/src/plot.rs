//! Standalone SVG emitters for the two standard figures: the 2-D
//! feature scatter and the per-class growth-weight trajectories.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::MetricsRecord;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

const PALETTE: [&str; 10] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
    "#66c2a5", "#1b6e99",
];

pub fn class_color(j: usize) -> &'static str {
    PALETTE[j % PALETTE.len()]
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_bounds(mut x_min: f64, mut x_max: f64, mut y_min: f64, mut y_max: f64) -> Frame {
        if x_min == x_max {
            x_min -= 0.5;
            x_max += 0.5;
        }
        if y_min == y_max {
            y_min -= 0.5;
            y_max += 0.5;
        }
        let pad_x = (x_max - x_min) * 0.05;
        let pad_y = (y_max - y_min) * 0.05;
        Frame { x_min: x_min - pad_x, x_max: x_max + pad_x, y_min: y_min - pad_y, y_max: y_max + pad_y }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    /// SVG y grows downward; data y grows upward.
    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n<title>{title}</title>\n\
         <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let x0 = frame.px(frame.x_min);
    let x1 = frame.px(frame.x_max);
    let y0 = frame.py(frame.y_min);
    let y1 = frame.py(frame.y_max);
    format!(
        "<g stroke=\"#333333\" stroke-width=\"1\">\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\"/>\n\
         </g>\n\
         <text x=\"{x0}\" y=\"{ylab}\" fill=\"#333333\">{min_y:.3} .. {max_y:.3} {y_label}</text>\n\
         <text x=\"{x0}\" y=\"{xlab}\" fill=\"#333333\">{min_x:.3} .. {max_x:.3} {x_label}</text>\n",
        ylab = y1 - 8.0,
        xlab = y0 + 28.0,
        min_y = frame.y_min,
        max_y = frame.y_max,
        min_x = frame.x_min,
        max_x = frame.x_max,
    )
}

/// Scatter of 2-D features colored by class, with one hollow square
/// marker per class center.
pub fn features_scatter_svg(features: &Tensor, labels: &[usize], centers: &Tensor) -> Result<String> {
    if features.shape().len() != 2 || features.shape()[1] != 2 {
        return Err(Error::Plot(format!(
            "features have shape {:?}; the scatter needs feature_dim = 2 (train a feature_dim = 2 model)",
            features.shape()
        )));
    }
    if centers.shape().len() != 2 || centers.shape()[1] != 2 {
        return Err(Error::Plot(format!(
            "centers have shape {:?}; the scatter needs feature_dim = 2",
            centers.shape()
        )));
    }
    let n = features.shape()[0];
    if labels.len() != n {
        return Err(Error::Plot(format!("{n} feature rows but {} labels", labels.len())));
    }
    let k = centers.shape()[0];
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Plot(format!("label {bad} out of range for {k} centers")));
    }

    let xs = || features.data().iter().step_by(2).chain(centers.data().iter().step_by(2));
    let ys = || features.data().iter().skip(1).step_by(2).chain(centers.data().iter().skip(1).step_by(2));
    let frame = Frame::from_bounds(
        xs().fold(f64::INFINITY, |a, &b| a.min(b)),
        xs().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
        ys().fold(f64::INFINITY, |a, &b| a.min(b)),
        ys().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
    );

    let mut svg = svg_open("deep features");
    svg.push_str(&axes(&frame, "feature 0", "feature 1"));
    for j in 0..k {
        svg.push_str(&format!("<g class=\"class-{j}\" fill=\"{}\">\n", class_color(j)));
        for (i, &l) in labels.iter().enumerate() {
            if l != j {
                continue;
            }
            let row = features.row(i);
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\"/>\n",
                frame.px(row[0]),
                frame.py(row[1])
            ));
        }
        svg.push_str("</g>\n");
    }
    for j in 0..k {
        let row = centers.row(j);
        svg.push_str(&format!(
            "<rect class=\"center-marker\" x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" \
             fill=\"none\" stroke=\"{}\" stroke-width=\"2.5\"/>\n",
            frame.px(row[0]) - 5.0,
            frame.py(row[1]) - 5.0,
            class_color(j)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One polyline per class tracking its growth weight across epochs.
pub fn wk_trajectory_svg(records: &[MetricsRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Plot("no metrics records to plot".into()));
    }
    let k = records[0].wk.len();
    if k == 0 || records.iter().any(|r| r.wk.len() != k) {
        return Err(Error::Plot("records carry inconsistent growth-weight columns".into()));
    }
    let last_epoch = records.iter().map(|r| r.epoch).max().unwrap() as f64;
    let all = records.iter().flat_map(|r| r.wk.iter());
    let frame = Frame::from_bounds(
        records.iter().map(|r| r.epoch).min().unwrap() as f64,
        last_epoch.max(1.0),
        all.clone().fold(f64::INFINITY, |a, &b| a.min(b)),
        all.fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
    );

    let mut svg = svg_open("growth-weight trajectories");
    svg.push_str(&axes(&frame, "epoch", "w_K"));
    for j in 0..k {
        let points: Vec<String> = records
            .iter()
            .map(|r| format!("{:.2},{:.2}", frame.px(r.epoch as f64), frame.py(r.wk[j])))
            .collect();
        svg.push_str(&format!(
            "<polyline class=\"wk-class-{j}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            class_color(j),
            points.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
