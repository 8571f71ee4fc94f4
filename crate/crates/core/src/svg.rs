//! Minimal SVG line chart of `log10(mean NRMSE)` against qubit count, one
//! series per `(method, width)`.

use std::fmt::Write as _;

use crate::bench::CellSummary;
use crate::estimators::Method;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
const DASHES: [&str; 4] = ["", "6,3", "2,3", "8,3,2,3"];

struct Series {
    method: Method,
    width: f64,
    points: Vec<(f64, f64)>,
}

fn series(cells: &[CellSummary]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for c in cells {
        if !(c.mean_nrmse > 0.0) || !c.mean_nrmse.is_finite() {
            continue;
        }
        let point = (c.qubits as f64, c.mean_nrmse.log10());
        match out
            .iter_mut()
            .find(|s| s.method == c.method && s.width == c.width)
        {
            Some(s) => s.points.push(point),
            None => out.push(Series {
                method: c.method,
                width: c.width,
                points: vec![point],
            }),
        }
    }
    for s in &mut out {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

fn padded_range(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

/// Renders the chart. Cells with a zero mean (exact recovery) have no
/// logarithm and are left out.
pub fn render(cells: &[CellSummary]) -> String {
    let all = series(cells);
    let (x0, x1) = padded_range(all.iter().flat_map(|s| s.points.iter().map(|p| p.0)), 1.0);
    let (y0, y1) = padded_range(all.iter().flat_map(|s| s.points.iter().map(|p| p.1)), 0.5);
    let (y0, y1) = (y0.floor(), y1.ceil());
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let mut q = x0.ceil();
    while q <= x1 + 1e-9 {
        let x = sx(q);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{q}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 18.0
        );
        q += 1.0;
    }
    let mut e = y0;
    while e <= y1 + 1e-9 {
        let y = sy(e);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
        e += 1.0;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">qubits</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">mean NRMSE</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let methods: Vec<Method> = all.iter().fold(Vec::new(), |mut v, s| {
        if !v.contains(&s.method) {
            v.push(s.method);
        }
        v
    });
    let widths: Vec<f64> = all.iter().fold(Vec::new(), |mut v, s| {
        if !v.contains(&s.width) {
            v.push(s.width);
        }
        v
    });
    for (k, s) in all.iter().enumerate() {
        let color =
            PALETTE[methods.iter().position(|m| *m == s.method).unwrap_or(0) % PALETTE.len()];
        let dash = DASHES[widths.iter().position(|w| *w == s.width).unwrap_or(0) % DASHES.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/><text x="{:.1}" y="{:.1}">{} w={:e}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            s.method,
            s.width
        );
    }
    out.push_str("</svg>\n");
    out
}
