//! SVG figures: overlap, HCF benefit and multiplier against distance.
//!
//! One panel per model. Color encodes the GPU; filled markers are SMF and
//! hollow markers HCF.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::coord::Shift;
use plotters::prelude::*;
use thiserror::Error;

use crate::config::FiberKind;
use crate::metrics::{delta_eta, DeltaRow, SweepRow};

pub const ETA_FILE: &str = "eta_vs_distance.svg";
pub const DELTA_FILE: &str = "delta_eta_vs_distance.svg";
pub const MULTIPLIER_FILE: &str = "multiplier_vs_distance.svg";

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("need at least two distinct distances, got {0}")]
    InsufficientData(usize),
    #[error("drawing {path}: {message}")]
    Draw { path: PathBuf, message: String },
}

#[derive(Debug, Default)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

const PANEL_SIZE: (u32, u32) = (560, 420);

fn gpu_color(gpu: &str) -> RGBColor {
    match gpu {
        "a100" => RGBColor(31, 119, 180),
        "h100" => RGBColor(214, 39, 40),
        _ => RGBColor(90, 90, 90),
    }
}

struct Series {
    label: String,
    color: RGBColor,
    hollow: bool,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    series: Vec<Series>,
}

struct Figure<'a> {
    y_label: &'a str,
    log_x: bool,
    panels: Vec<Panel>,
}

fn series_label(gpu: &str, fiber: Option<FiberKind>, extra: &str) -> String {
    let mut s = gpu.to_ascii_uppercase();
    if let Some(f) = fiber {
        s.push(' ');
        s.push_str(&f.name().to_ascii_uppercase());
    }
    if !extra.is_empty() {
        s.push(' ');
        s.push_str(extra);
    }
    s
}

/// Curve identity beyond model/gpu/fiber: only shown when it varies.
fn extra_label(total_gpus: u64, bw: f64, bucket: u64, vary: &Vary) -> String {
    let mut parts = Vec::new();
    if vary.gpus {
        parts.push(format!("{total_gpus} GPUs"));
    }
    if vary.bw {
        parts.push(format!("{} GB/s", bw / 1e9));
    }
    if vary.bucket {
        parts.push(format!("{} MB", bucket as f64 / 1e6));
    }
    parts.join(" ")
}

#[derive(Default)]
struct Vary {
    gpus: bool,
    bw: bool,
    bucket: bool,
}

fn varies<T: PartialEq>(mut it: impl Iterator<Item = T>) -> bool {
    match it.next() {
        Some(first) => it.any(|x| x != first),
        None => false,
    }
}

fn sweep_figure<'a>(rows: &[SweepRow], y_label: &'a str, value: impl Fn(&SweepRow) -> Option<f64>) -> Figure<'a> {
    let vary = Vary {
        gpus: varies(rows.iter().map(|r| r.total_gpus)),
        bw: varies(rows.iter().map(|r| r.inter_bw)),
        bucket: varies(rows.iter().map(|r| r.bucket_bytes)),
    };
    let mut panels: BTreeMap<String, BTreeMap<_, Vec<SweepRow>>> = BTreeMap::new();
    for r in rows {
        panels.entry(r.model.clone()).or_default().entry(r.group()).or_default().push(r.clone());
    }
    let panels = panels
        .into_iter()
        .map(|(model, groups)| Panel {
            title: model.to_ascii_uppercase(),
            series: groups
                .into_iter()
                .map(|(g, mut rs)| {
                    rs.sort_by_key(|r| r.distance);
                    Series {
                        label: series_label(
                            &g.gpu,
                            Some(g.fiber),
                            &extra_label(g.total_gpus, g.inter_bw.as_f64(), g.bucket_bytes, &vary),
                        ),
                        color: gpu_color(&g.gpu),
                        hollow: g.fiber == FiberKind::Hcf,
                        points: rs.iter().filter_map(|r| value(r).map(|v| (r.distance.km(), v))).collect(),
                    }
                })
                .collect(),
        })
        .collect();
    Figure { y_label, log_x: true, panels }
}

fn delta_figure(deltas: &[DeltaRow]) -> Figure<'static> {
    let vary = Vary {
        gpus: varies(deltas.iter().map(|r| r.total_gpus)),
        bw: varies(deltas.iter().map(|r| r.inter_bw)),
        bucket: varies(deltas.iter().map(|r| r.bucket_bytes)),
    };
    let mut panels: BTreeMap<String, BTreeMap<_, Vec<&DeltaRow>>> = BTreeMap::new();
    for d in deltas {
        panels
            .entry(d.model.clone())
            .or_default()
            .entry((d.gpu.clone(), d.total_gpus, d.inter_bw, d.bucket_bytes))
            .or_default()
            .push(d);
    }
    let panels = panels
        .into_iter()
        .map(|(model, groups)| Panel {
            title: model.to_ascii_uppercase(),
            series: groups
                .into_iter()
                .map(|((gpu, gpus, bw, bucket), mut ds)| {
                    ds.sort_by_key(|d| d.distance);
                    Series {
                        label: series_label(&gpu, None, &extra_label(gpus, bw.as_f64(), bucket, &vary)),
                        color: gpu_color(&gpu),
                        hollow: false,
                        points: ds.iter().map(|d| (d.distance.km(), d.delta_eta)).collect(),
                    }
                })
                .collect(),
        })
        .collect();
    Figure { y_label: "delta eta (HCF - SMF)", log_x: true, panels }
}

fn bounds(points: impl Iterator<Item = (f64, f64)>) -> ((f64, f64), (f64, f64)) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    ((x0, x1), (y0, y1))
}

fn draw_panel(
    area: &DrawingArea<SVGBackend, Shift>,
    panel: &Panel,
    fig: &Figure,
) -> Result<(), Box<dyn std::error::Error>> {
    let ((x0, x1), (mut y0, mut y1)) = bounds(panel.series.iter().flat_map(|s| s.points.iter().copied()));
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += (y1 - y0) * 0.05;
    let x0 = if fig.log_x { x0.max(1e-6) } else { x0 };
    let mut builder = ChartBuilder::on(area);
    builder.caption(&panel.title, ("sans-serif", 18)).margin(12).x_label_area_size(40).y_label_area_size(56);

    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc("inter-DC distance (km)").y_desc(fig.y_label).draw()?;
            for s in &panel.series {
                let color = s.color;
                chart
                    .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(1)))?
                    .label(s.label.clone())
                    .legend(move |(x, y)| Circle::new((x + 10, y), 4, color.filled()));
                let style = if s.hollow { color.stroke_width(2) } else { color.filled() };
                chart.draw_series(s.points.iter().map(|&p| Circle::new(p, 4, style)))?;
            }
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        }};
    }
    if fig.log_x {
        draw!(builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1)?);
    } else {
        draw!(builder.build_cartesian_2d(x0..x1, y0..y1)?);
    }
    Ok(())
}

fn render(fig: &Figure, path: &Path) -> Result<(), PlotError> {
    let fail = |e: Box<dyn std::error::Error>| PlotError::Draw { path: path.to_path_buf(), message: e.to_string() };
    let n = fig.panels.len().max(1) as u32;
    let root = SVGBackend::new(path, (PANEL_SIZE.0 * n, PANEL_SIZE.1)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| fail(e.into()))?;
    let areas = root.split_evenly((1, n as usize));
    for (area, panel) in areas.iter().zip(&fig.panels) {
        draw_panel(area, panel, fig).map_err(fail)?;
    }
    root.present().map_err(|e| fail(e.into()))?;
    Ok(())
}

/// Writes the overlap, benefit and multiplier figures into `dir`.
pub fn emit_plots(rows: &[SweepRow], dir: &Path) -> Result<PlotOutput, PlotError> {
    let mut distances: Vec<_> = rows.iter().map(|r| r.distance).collect();
    distances.sort();
    distances.dedup();
    if distances.len() < 2 {
        return Err(PlotError::InsufficientData(distances.len()));
    }
    let mut out = PlotOutput::default();

    let eta_path = dir.join(ETA_FILE);
    render(&sweep_figure(rows, "compute-communication overlap", |r| Some(r.eta)), &eta_path)?;
    out.files.push(eta_path);

    let (deltas, unpaired) = delta_eta(rows);
    if deltas.is_empty() {
        out.warnings.push("only one fiber type present; skipping HCF benefit and multiplier plots".to_string());
        return Ok(out);
    }
    if !unpaired.is_empty() {
        out.warnings
            .push(format!("{} rows lack an other-fiber partner and are left out of the benefit plot", unpaired.len()));
    }
    let delta_path = dir.join(DELTA_FILE);
    render(&delta_figure(&deltas), &delta_path)?;
    out.files.push(delta_path);

    if rows.iter().all(|r| r.multiplier.is_none()) {
        out.warnings.push("no multipliers present; skipping multiplier plot".to_string());
        return Ok(out);
    }
    let mult_path = dir.join(MULTIPLIER_FILE);
    render(&sweep_figure(rows, "training time multiplier", |r| r.multiplier), &mult_path)?;
    out.files.push(mult_path);
    Ok(out)
}
