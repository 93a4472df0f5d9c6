use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use super::report::{Metric, MetricReport};
use crate::error::{Error, Result};

pub const TABLE_FILE: &str = "comparison.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

#[derive(Serialize)]
struct TableRow<'a> {
    model: &'a str,
    metric: &'a str,
    timestep: usize,
    mean: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    model: &'a str,
    metric: &'a str,
    seeds: usize,
    mean: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompareOutput {
    pub table: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn check_compatible(reports: &[MetricReport]) -> Result<()> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one report".into()))?;
    let offenders: Vec<String> = reports
        .iter()
        .filter(|r| r.horizon != first.horizon || r.split != first.split)
        .map(|r| format!("{} (split {}, horizon {})", r.model, r.split, r.horizon))
        .collect();
    if !offenders.is_empty() {
        return Err(Error::Config(format!(
            "reports must share split {} and horizon {}; offenders: {}",
            first.split,
            first.horizon,
            offenders.join(", ")
        )));
    }
    Ok(())
}

fn plot_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Plot(format!("{}: {e}", path.display()))
}

fn metrics_in(reports: &[MetricReport]) -> Vec<Metric> {
    let mut out: Vec<Metric> = reports.iter().flat_map(|r| r.metrics()).collect();
    out.sort();
    out.dedup();
    out
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

fn line_plot(reports: &[MetricReport], metric: Metric, path: &Path) -> Result<()> {
    let horizon = reports[0].horizon;
    let series: Vec<(usize, &MetricReport)> = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| r.aggregate(metric).is_some())
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, r) in &series {
        for row in r.series(metric) {
            lo = lo.min(row.ci_low.unwrap_or(row.mean));
            hi = hi.max(row.ci_high.unwrap_or(row.mean));
        }
    }
    let (lo, hi) = padded_range(lo, hi);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_error(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{metric} per prediction step"), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(1f64..horizon.max(2) as f64, lo..hi)
        .map_err(|e| plot_error(path, e))?;
    chart
        .configure_mesh()
        .x_desc("step (t+k)")
        .y_desc(metric.name())
        .draw()
        .map_err(|e| plot_error(path, e))?;
    for (i, r) in series {
        let colour = PALETTE[i % PALETTE.len()];
        let rows = r.series(metric);
        if r.ci_available {
            let mut band: Vec<(f64, f64)> = rows.iter().map(|row| (row.step as f64, row.ci_high.unwrap_or(row.mean))).collect();
            band.extend(rows.iter().rev().map(|row| (row.step as f64, row.ci_low.unwrap_or(row.mean))));
            chart
                .draw_series(std::iter::once(Polygon::new(band, colour.mix(0.2).filled())))
                .map_err(|e| plot_error(path, e))?;
        }
        chart
            .draw_series(LineSeries::new(
                rows.iter().map(|row| (row.step as f64, row.mean)),
                colour.stroke_width(2),
            ))
            .map_err(|e| plot_error(path, e))?
            .label(r.model.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], colour.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_error(path, e))?;
    root.present().map_err(|e| plot_error(path, e))
}

fn box_plot(reports: &[MetricReport], metric: Metric, path: &Path) -> Result<()> {
    let groups: Vec<(String, Vec<f64>)> = reports
        .iter()
        .filter(|r| r.aggregate(metric).is_some())
        .map(|r| {
            let v = r.per_seed.iter().filter_map(|s| s.aggregate(metric)).collect();
            (r.model.clone(), v)
        })
        .collect();
    let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = padded_range(lo, hi);
    let names: Vec<String> = groups.iter().map(|g| g.0.clone()).collect();
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_error(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{metric} across seeds"), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d((0..groups.len()).into_segmented(), lo as f32..hi as f32)
        .map_err(|e| plot_error(path, e))?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(groups.len().max(1))
        .x_label_formatter(&|v| match v {
            SegmentValue::CenterOf(i) | SegmentValue::Exact(i) => names.get(*i).cloned().unwrap_or_default(),
            SegmentValue::Last => String::new(),
        })
        .y_desc(metric.name())
        .draw()
        .map_err(|e| plot_error(path, e))?;
    for (i, (_, values)) in groups.iter().enumerate() {
        let q = Quartiles::new(values);
        let colour = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(std::iter::once(
                Boxplot::new_vertical(SegmentValue::CenterOf(i), &q).width(30).style(colour.stroke_width(2)),
            ))
            .map_err(|e| plot_error(path, e))?;
    }
    root.present().map_err(|e| plot_error(path, e))
}

/// Writes the aligned per-step table, the per-model summary, one line plot
/// per metric with confidence bands, and one box plot per metric of the
/// seed-level aggregates.
pub fn compare(reports: &[MetricReport], out: &Path) -> Result<CompareOutput> {
    check_compatible(reports)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let table = out.join(TABLE_FILE);
    let mut w = csv::Writer::from_path(&table)?;
    let summary = out.join(SUMMARY_FILE);
    let mut s = csv::Writer::from_path(&summary)?;
    for r in reports {
        for row in &r.rows {
            w.serialize(TableRow {
                model: &r.model,
                metric: row.metric.name(),
                timestep: row.step,
                mean: row.mean,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
            })?;
        }
        for row in &r.aggregates {
            s.serialize(SummaryRow {
                model: &r.model,
                metric: row.metric.name(),
                seeds: r.seeds.len(),
                mean: row.mean,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    s.flush().map_err(|e| Error::io(&summary, e))?;

    let mut plots = Vec::new();
    for metric in metrics_in(reports) {
        let line = out.join(format!("{}_per_step.svg", metric.name()));
        line_plot(reports, metric, &line)?;
        let boxes = out.join(format!("{}_boxplot.svg", metric.name()));
        box_plot(reports, metric, &boxes)?;
        plots.push(line);
        plots.push(boxes);
    }
    Ok(CompareOutput { table, summary, plots })
}
