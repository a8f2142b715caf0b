//! Minimal SVG bar and line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub name: &'a str,
    pub values: Vec<f64>,
}

fn frame(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    s
}

fn range(series: &[Series]) -> (f64, f64) {
    let all = series.iter().flat_map(|s| s.values.iter().copied());
    let (lo, hi) = all.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == lo {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn legend(s: &mut String, series: &[Series]) {
    for (i, ser) in series.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            y - 9.0,
            COLORS[i % COLORS.len()],
            WIDTH - MARGIN - 105.0,
            y,
            ser.name
        );
    }
}

fn y_axis(s: &mut String, lo: f64, hi: f64, to_y: &dyn Fn(f64) -> f64) {
    for v in [lo, 0.5 * (lo + hi), hi] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
            MARGIN - 4.0,
            to_y(v) + 4.0
        );
    }
}

/// Grouped bars, one group per label.
pub fn bar_chart(title: &str, labels: &[String], series: &[Series]) -> String {
    let mut s = frame(title);
    let (lo, hi) = range(series);
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let to_y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * plot_h;
    y_axis(&mut s, lo, hi, &to_y);
    let group_w = (WIDTH - 2.0 * MARGIN) / labels.len().max(1) as f64;
    let bar_w = 0.8 * group_w / series.len().max(1) as f64;
    for (g, label) in labels.iter().enumerate() {
        let x0 = MARGIN + g as f64 * group_w + 0.1 * group_w;
        for (i, ser) in series.iter().enumerate() {
            let v = ser.values.get(g).copied().unwrap_or(0.0);
            let (y_top, y_bot) = (to_y(v.max(0.0)), to_y(v.min(0.0)));
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                x0 + i as f64 * bar_w,
                y_top,
                bar_w,
                (y_bot - y_top).max(0.0),
                COLORS[i % COLORS.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{label}</text>"#,
            x0 + 0.4 * group_w,
            HEIGHT - MARGIN + 16.0
        );
    }
    legend(&mut s, series);
    s.push_str("</svg>\n");
    s
}

/// Polylines over a shared x axis.
pub fn line_chart(title: &str, x: &[f64], series: &[Series]) -> String {
    let mut s = frame(title);
    let (lo, hi) = range(series);
    let (x_lo, x_hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let to_x = |v: f64| MARGIN + (v - x_lo) / x_span * plot_w;
    let to_y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * plot_h;
    y_axis(&mut s, lo, hi, &to_y);
    for v in [x_lo, x_hi] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{v}</text>"#,
            to_x(v),
            HEIGHT - MARGIN + 16.0
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let points: Vec<String> = x
            .iter()
            .zip(&ser.values)
            .map(|(&a, &b)| format!("{:.1},{:.1}", to_x(a), to_y(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            points.join(" ")
        );
    }
    legend(&mut s, series);
    s.push_str("</svg>\n");
    s
}
