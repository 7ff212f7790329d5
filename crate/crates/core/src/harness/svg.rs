//! Minimal SVG line plots of a trace.

use std::fmt::Write as _;

use crate::controller::TraceRow;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];
const CONTROL_NAMES: [&str; 4] = ["u_cmdamp", "u_kright", "u_kleft", "u_alpha"];

/// Longest polyline emitted; longer series are decimated.
const MAX_POINTS: usize = 2000;

struct Series<'a> {
    label: &'a str,
    values: Vec<f64>,
}

fn panel(out: &mut String, top: f64, title: &str, t: &[f64], series: &[Series<'_>]) {
    let (t0, t1) = (t[0], *t.last().unwrap_or(&t[0]));
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let w = WIDTH - 2.0 * MARGIN;
    let h = PANEL_HEIGHT - 2.0 * MARGIN;
    let sx = |v: f64| {
        MARGIN
            + if t1 > t0 {
                (v - t0) / (t1 - t0) * w
            } else {
                0.0
            }
    };
    let sy = |v: f64| top + MARGIN + (hi - v) / (hi - lo) * h;

    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##,
        top + MARGIN
    );
    let _ = writeln!(
        out,
        r##"<text x="{MARGIN}" y="{}" font-size="14">{title}</text>"##,
        top + MARGIN - 10.0
    );
    let _ = writeln!(
        out,
        r##"<text x="5" y="{}" font-size="11">{hi:.3}</text><text x="5" y="{}" font-size="11">{lo:.3}</text>"##,
        top + MARGIN + 4.0,
        top + MARGIN + h
    );
    let _ = writeln!(
        out,
        r##"<text x="{MARGIN}" y="{}" font-size="11">t = {t0:.2} s</text><text x="{}" y="{}" font-size="11" text-anchor="end">{t1:.2} s</text>"##,
        top + MARGIN + h + 15.0,
        MARGIN + w,
        top + MARGIN + h + 15.0
    );

    let stride = t.len().div_ceil(MAX_POINTS).max(1);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        for (j, (&ti, &v)) in t.iter().zip(&s.values).enumerate() {
            if (j % stride == 0 || j + 1 == t.len()) && v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(ti), sy(v));
            }
        }
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"##,
            pts.trim_end()
        );
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"##,
            MARGIN + w - 90.0,
            top + MARGIN + 14.0 * (i as f64 + 1.0),
            s.label
        );
    }
}

/// Two panels: reference against measured yaw rate, then the control channels.
pub fn render_trace_svg(rows: &[TraceRow], title: &str) -> String {
    let height = 2.0 * PANEL_HEIGHT;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
    if !rows.is_empty() {
        let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        let tracking = [
            Series {
                label: "yr_ref",
                values: rows.iter().map(|r| r.yr_ref).collect(),
            },
            Series {
                label: "yr_real",
                values: rows.iter().map(|r| r.yr_real).collect(),
            },
        ];
        panel(
            &mut out,
            0.0,
            &format!("{title}: yaw rate (rad/s)"),
            &t,
            &tracking,
        );
        let m = rows[0].u.len();
        let controls: Vec<Series<'_>> = (0..m)
            .map(|j| Series {
                label: CONTROL_NAMES.get(j).copied().unwrap_or("u"),
                values: rows.iter().map(|r| r.u[j]).collect(),
            })
            .collect();
        panel(&mut out, PANEL_HEIGHT, "controls", &t, &controls);
    }
    out.push_str("</svg>\n");
    out
}
