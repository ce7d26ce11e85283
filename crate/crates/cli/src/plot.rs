//! Minimal SVG log-log plot: points, an optional fitted line, decade ticks.

use std::fmt::Write;

const W: f64 = 560.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

pub struct LogLogPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: &'a [(f64, f64)],
    /// `(slope, intercept)` of `ln y = intercept + slope ln x`.
    pub fit: Option<(f64, f64)>,
}

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let a = lo.log10().floor();
    let b = hi.log10().ceil();
    if a == b {
        (a - 0.5, b + 0.5)
    } else {
        (a, b)
    }
}

impl LogLogPlot<'_> {
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self.points.iter().copied().filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(self.title));
        if pts.is_empty() {
            s.push_str("</svg>\n");
            return s;
        }
        let (x0, x1) = decades(pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.0).fold(0.0, f64::max));
        let (y0, y1) = decades(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.1).fold(0.0, f64::max));
        let px = |x: f64| MARGIN + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let py = |y: f64| H - MARGIN - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * MARGIN,
            H - 2.0 * MARGIN
        );
        for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
            let x = px(10f64.powi(d));
            let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/>"#, H - MARGIN, H - MARGIN + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{d}</text>"#, H - MARGIN + 18.0);
        }
        for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
            let y = py(10f64.powi(d));
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.1}" x2="{MARGIN}" y2="{y:.1}" stroke="black"/>"#, MARGIN - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#, MARGIN - 8.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, esc(self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(self.y_label)
        );

        if let Some((slope, icpt)) = self.fit {
            let xa = 10f64.powf(x0);
            let xb = 10f64.powf(x1);
            let f = |x: f64| (icpt + slope * x.ln()).exp();
            let _ = writeln!(
                s,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#c33" stroke-dasharray="6 4"/>"##,
                px(xa),
                py(f(xa)).clamp(0.0, H),
                px(xb),
                py(f(xb)).clamp(0.0, H)
            );
            let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="end" fill="#c33">slope {slope:.3}</text>"##, W - MARGIN - 6.0, MARGIN + 16.0);
        }
        let line: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#236"/>"##, line.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="#236"/>"##, px(x), py(y));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
