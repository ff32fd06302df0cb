use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::RgbImage;
use plotters::prelude::*;

use crate::dataset::{save_rgb, ImageFormat};
use crate::error::{Error, Result};
use crate::train::{read_metrics, METRIC_COLUMNS};

pub const PLOTS_DIR: &str = "plots";
pub const SERIES_FILE: &str = "series.json";
const WIDTH: u32 = 640;
const HEIGHT: u32 = 400;

/// Per-stream `(epoch, value)` points; validation streams only carry their
/// validation epochs.
pub type History = BTreeMap<String, Vec<(usize, f32)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotReport {
    pub history: History,
    /// One image per stream, `plots/<stream>.png`.
    pub images: Vec<PathBuf>,
    pub series_path: PathBuf,
}

pub fn load_history(metrics_csv: &Path) -> Result<History> {
    let rows = read_metrics(metrics_csv)?;
    let mut history: History = METRIC_COLUMNS[1..]
        .iter()
        .map(|s| (s.to_string(), Vec::new()))
        .collect();
    for row in &rows {
        for (name, v) in row.streams() {
            history
                .get_mut(name)
                .expect("known stream")
                .push((row.epoch, v));
        }
    }
    Ok(history)
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = ((hi - lo) * 0.05).max(0.05);
    (lo - pad, hi + pad)
}

fn render(points: &[(usize, f32)], accuracy: bool) -> Result<RgbImage> {
    let mut buffer = vec![0u8; (WIDTH * HEIGHT * 3) as usize];
    let draw_err = |e: &dyn std::fmt::Display| Error::Runtime(format!("plotting: {e}"));
    {
        let root = BitMapBackend::with_buffer(&mut buffer, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| draw_err(&e))?;
        let first = points.first().map_or(0, |p| p.0) as f64;
        let last = points.last().map_or(1, |p| p.0) as f64;
        let (x0, x1) = (first - 0.5, last + 0.5);
        let (y0, y1) = if accuracy {
            (-0.02, 1.02)
        } else {
            let lo = points
                .iter()
                .map(|p| p.1 as f64)
                .fold(f64::INFINITY, f64::min);
            let hi = points
                .iter()
                .map(|p| p.1 as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            if points.is_empty() {
                (0.0, 1.0)
            } else {
                padded(lo, hi)
            }
        };
        let mut chart = ChartBuilder::on(&root)
            .margin(24)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| draw_err(&e))?;
        chart
            .plotting_area()
            .draw(&Rectangle::new([(x0, y0), (x1, y1)], BLACK.stroke_width(1)))
            .map_err(|e| draw_err(&e))?;
        let xy: Vec<(f64, f64)> = points.iter().map(|&(e, v)| (e as f64, v as f64)).collect();
        let color = if accuracy { BLUE } else { RED };
        chart
            .draw_series(LineSeries::new(xy.iter().copied(), color.stroke_width(2)))
            .map_err(|e| draw_err(&e))?;
        chart
            .draw_series(xy.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(|e| draw_err(&e))?;
        root.present().map_err(|e| draw_err(&e))?;
    }
    Ok(RgbImage::from_raw(WIDTH, HEIGHT, buffer).expect("buffer sized from dimensions"))
}

/// Writes one curve per metric stream under `out_dir/plots/`, plus the
/// plotted points as JSON.
pub fn plot_history(metrics_csv: &Path, out_dir: &Path) -> Result<PlotReport> {
    let history = load_history(metrics_csv)?;
    let dir = out_dir.join(PLOTS_DIR);
    let mut images = Vec::new();
    for (stream, points) in &history {
        if points.is_empty() {
            continue;
        }
        let img = render(points, stream.contains("_acc_"))?;
        let path = dir.join(format!("{stream}.png"));
        save_rgb(&img, &path, ImageFormat::Png)?;
        images.push(path);
    }
    let series_path = dir.join(SERIES_FILE);
    let mut json = serde_json::to_string_pretty(&history).expect("history serialises");
    json.push('\n');
    crate::write_atomic(&series_path, json.as_bytes())?;
    Ok(PlotReport {
        history,
        images,
        series_path,
    })
}
