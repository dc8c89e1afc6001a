//! Minimal static SVG charts. Decorative only; the CSVs carry the numbers.

use std::fmt::Write;

use pluvia_core::dataset::{MonthlyStats, TrendTable, MONTH_ABBREVIATIONS};
use pluvia_core::evaluation::ForecastRow;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    y_max: f64,
    slots: usize,
}

impl Frame {
    fn x(&self, slot: f64) -> f64 {
        let span = (self.slots.max(2) - 1) as f64;
        LEFT + (WIDTH - LEFT - RIGHT) * slot / span
    }

    fn y(&self, v: f64) -> f64 {
        let plot = HEIGHT - TOP - BOTTOM;
        TOP + plot * (1.0 - v / self.y_max)
    }
}

fn nice_max(v: f64) -> f64 {
    if v <= 0.0 || !v.is_finite() {
        return 1.0;
    }
    let step = 10f64.powf(v.log10().floor());
    (v / step).ceil() * step
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, frame: &Frame, y_label: &str, x_labels: &[(f64, String)]) {
    let x0 = LEFT;
    let x1 = WIDTH - RIGHT;
    let y0 = HEIGHT - BOTTOM;
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(out, r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#).unwrap();
    for i in 0..=4 {
        let v = frame.y_max * i as f64 / 4.0;
        let y = frame.y(v);
        writeln!(
            out,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.0}</text>"##,
            x0 - 4.0,
            y + 4.0
        )
        .unwrap();
    }
    for (slot, label) in x_labels {
        writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            frame.x(*slot),
            y0 + 16.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn polyline(out: &mut String, points: &[(f64, f64)], colour: &str, width: f64) {
    if points.is_empty() {
        return;
    }
    let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    writeln!(
        out,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    )
    .unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn month_labels() -> Vec<(f64, String)> {
    MONTH_ABBREVIATIONS
        .iter()
        .enumerate()
        .map(|(i, m)| (i as f64 + 0.5, m.to_string()))
        .collect()
}

/// Twelve box-and-whisker glyphs, one per calendar month.
pub fn boxplot(stats: &MonthlyStats) -> String {
    let y_max = nice_max(stats.months.iter().flatten().map(|m| m.max).fold(0.0, f64::max));
    let frame = Frame { y_max, slots: 13 };
    let mut out = String::new();
    header(&mut out, "Monthly precipitation distribution");
    axes(&mut out, &frame, "precipitation (mm)", &month_labels());
    let half = (frame.x(1.0) - frame.x(0.0)) * 0.3;
    for (i, m) in stats.months.iter().enumerate() {
        let Some(m) = m else { continue };
        let cx = frame.x(i as f64 + 0.5);
        let (q1, q3) = (frame.y(m.q1), frame.y(m.q3));
        writeln!(
            out,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            frame.y(m.min),
            frame.y(m.max)
        )
        .unwrap();
        writeln!(
            out,
            r##"<rect x="{:.1}" y="{q3:.1}" width="{:.1}" height="{:.1}" fill="#9cc3e6" stroke="black"/>"##,
            cx - half,
            2.0 * half,
            (q1 - q3).max(0.5)
        )
        .unwrap();
        let med = frame.y(m.median);
        writeln!(
            out,
            r#"<line x1="{:.1}" y1="{med:.1}" x2="{:.1}" y2="{med:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            cx + half
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// One line per year across the twelve months.
pub fn trend_chart(table: &TrendTable) -> String {
    let y_max = nice_max(table.cells.iter().flatten().flatten().copied().fold(0.0, f64::max));
    let frame = Frame { y_max, slots: 13 };
    let mut out = String::new();
    header(&mut out, "Yearly precipitation by month");
    axes(&mut out, &frame, "precipitation (mm)", &month_labels());
    for (k, row) in table.cells.iter().enumerate() {
        let points: Vec<(f64, f64)> = row
            .iter()
            .enumerate()
            .filter_map(|(m, v)| v.map(|v| (frame.x(m as f64 + 0.5), frame.y(v))))
            .collect();
        polyline(&mut out, &points, PALETTE[k % PALETTE.len()], 1.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Actual and predicted series on a shared time axis.
pub fn forecast_overlay(rows: &[ForecastRow]) -> String {
    let y_max = nice_max(rows.iter().map(|r| r.actual.max(r.predicted)).fold(0.0, f64::max));
    let frame = Frame { y_max, slots: rows.len() };
    let mut out = String::new();
    header(&mut out, "Actual vs predicted precipitation");
    let ticks: Vec<(f64, String)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.month == 1)
        .step_by((rows.len() / 120).max(1))
        .map(|(i, r)| (i as f64, r.year.to_string()))
        .collect();
    axes(&mut out, &frame, "precipitation (mm)", &ticks);
    let series = |f: fn(&ForecastRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (frame.x(i as f64), frame.y(f(r).max(0.0))))
            .collect()
    };
    polyline(&mut out, &series(|r| r.actual), "#1f77b4", 1.2);
    polyline(&mut out, &series(|r| r.predicted), "#d62728", 1.2);
    let lx = WIDTH - RIGHT - 150.0;
    writeln!(
        out,
        r##"<text x="{lx}" y="{}" fill="#1f77b4">actual</text><text x="{}" y="{}" fill="#d62728">predicted</text>"##,
        TOP + 12.0,
        lx + 60.0,
        TOP + 12.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}
