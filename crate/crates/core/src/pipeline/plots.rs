use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::BenchmarkRow;

pub const PLOT_FILES: [&str; 3] = ["iterations_vs_n.svg", "condition_vs_n.svg", "density_vs_n.svg"];

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn series(rows: &[BenchmarkRow], value: impl Fn(&BenchmarkRow) -> f64) -> Series {
    let mut out: Series = BTreeMap::new();
    for r in rows {
        let v = value(r);
        if v.is_finite() {
            out.entry(r.method.clone()).or_default().push((r.n as f64, v));
        }
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).abs().max(hi.abs() * 0.1).max(1e-12);
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn draw(path: &Path, y_label: &str, data: &Series) -> Result<()> {
    let err = |e: String| Error::io(path, std::io::Error::other(e));
    let pts = data.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0.min(0.0), y1);

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("n")
        .y_desc(y_label)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (k, (method, pts)) in data.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(e.to_string()))?
            .label(method.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 4, color.filled())))
            .map_err(|e| err(e.to_string()))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}

/// Writes iteration, condition number and density curves against `n`, one
/// line per method.
pub fn plot_rows(rows: &[BenchmarkRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let specs: [(&str, Series); 3] = [
        ("mean PCG iterations", series(rows, |r| r.mean_iterations)),
        ("mean two-sided condition number", series(rows, |r| r.mean_condition)),
        ("mean density", series(rows, |r| r.mean_density)),
    ];
    let mut written = Vec::with_capacity(3);
    for ((label, data), file) in specs.iter().zip(PLOT_FILES) {
        let path = out_dir.join(file);
        draw(&path, label, data)?;
        written.push(path);
    }
    Ok(written)
}
