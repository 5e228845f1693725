//! Minimal static SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        Self {
            label: label.into(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn header(s: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        W / 2.0,
        escape(title),
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0,
        escape(xlabel),
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for k in 0..=4 {
        let x = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let y = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{1}" x2="{0:.1}" y2="{2}" stroke="black"/><text x="{0:.1}" y="{3}" text-anchor="middle">{4}</text>"#,
            f.px(x),
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0,
            num(x)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1:.1}" x2="{2}" y2="{1:.1}" stroke="black"/><text x="{3}" y="{4:.1}" text-anchor="end">{5}</text>"#,
            LEFT - 5.0,
            f.py(y),
            LEFT,
            LEFT - 8.0,
            f.py(y) + 4.0,
            num(y)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let f = Frame { x0, x1, y0, y1 };
    let mut s = String::new();
    header(&mut s, title, xlabel, ylabel, &f);
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        // NaN breaks the polyline into pieces
        for piece in ser.points.split(|p| !(p.0.is_finite() && p.1.is_finite())) {
            if piece.is_empty() {
                continue;
            }
            let pts: Vec<String> = piece
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        if series.len() > 1 {
            let y = TOP + 14.0 * k as f64 + 8.0;
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}">{5}</text>"#,
                W - RIGHT + 10.0,
                y,
                W - RIGHT + 28.0,
                W - RIGHT + 32.0,
                y + 4.0,
                escape(&ser.label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Blue to yellow through green.
fn color(u: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let u = u.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (u.floor() as usize).min(STOPS.len() - 2);
    let w = u - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * w).round() as u8;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn edges(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n == 1 {
        return vec![c[0] - 0.5, c[0] + 0.5];
    }
    let mut e = Vec::with_capacity(n + 1);
    e.push(c[0] - 0.5 * (c[1] - c[0]));
    for w in c.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(c[n - 1] + 0.5 * (c[n - 1] - c[n - 2]));
    e
}

/// `z[j][i]` is the value at `(xs[i], ys[j])`; non-finite cells are left blank.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64], z: &[Vec<f64>]) -> String {
    let ex = edges(xs);
    let ey = edges(ys);
    let f = Frame {
        x0: ex[0],
        x1: ex[ex.len() - 1],
        y0: ey[0],
        y1: ey[ey.len() - 1],
    };
    let (z0, z1) = range(z.iter().flatten().copied());
    let mut s = String::new();
    header(&mut s, title, xlabel, ylabel, &f);
    for (j, row) in z.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let (xa, xb) = (f.px(ex[i]), f.px(ex[i + 1]));
            let (ya, yb) = (f.py(ey[j + 1]), f.py(ey[j]));
            let _ = writeln!(
                s,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                (xb - xa).max(0.1),
                (yb - ya).max(0.1),
                color((v - z0) / (z1 - z0))
            );
        }
    }
    let bar_x = W - RIGHT + 20.0;
    let steps = 50;
    let span = H - TOP - BOTTOM;
    for k in 0..steps {
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            TOP + span * (steps - k - 1) as f64 / steps as f64,
            span / steps as f64 + 0.5,
            color((k as f64 + 0.5) / steps as f64)
        );
    }
    for (v, y) in [(z1, TOP + 4.0), (z0, H - BOTTOM)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, bar_x + 20.0, num(v));
    }
    s.push_str("</svg>\n");
    s
}
