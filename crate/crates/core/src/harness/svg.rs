//! Self-contained SVG plots: computed spectra against predictions in the
//! complex plane, and counts against `h` on log-log axes.

use std::fmt::Write as _;

use super::report::ExperimentReport;

const W: f64 = 420.0;
const H: f64 = 320.0;
const M: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    ox: f64,
}

impl Axes {
    fn new(mut x0: f64, mut x1: f64, mut y0: f64, mut y1: f64, ox: f64) -> Self {
        if !(x1 > x0) {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if !(y1 > y0) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let (px, py) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
        Self { x0: x0 - px, x1: x1 + px, y0: y0 - py, y1: y1 + py, ox }
    }

    fn sx(&self, x: f64) -> f64 {
        self.ox + M + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * M)
    }

    fn sy(&self, y: f64) -> f64 {
        H - M - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * M)
    }

    fn frame(&self, s: &mut String, title: &str, xl: &str, yl: &str, lx: impl Fn(f64) -> String, ly: impl Fn(f64) -> String) {
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{M:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
            self.ox + M,
            W - 2.0 * M,
            H - 2.0 * M
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{title}</text>"#, self.ox + W / 2.0, M - 14.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{xl}</text>"#, self.ox + W / 2.0, H - 10.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{yl}</text>"#,
            self.ox + 12.0,
            H / 2.0,
            self.ox + 12.0,
            H / 2.0
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let (x, y) = (self.x0 + t * (self.x1 - self.x0), self.y0 + t * (self.y1 - self.y0));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#, self.sx(x), H - M + 13.0, lx(x));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="9">{}</text>"#, self.ox + M - 3.0, self.sy(y) + 3.0, ly(y));
        }
    }
}

fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.1e}")
    }
}

fn spectrum_panel(r: &ExperimentReport, s: &mut String) {
    let mut pts = vec![];
    for rec in &r.sweep {
        for z in &rec.resonances {
            pts.push((z.re, z.im));
        }
        for &v in &rec.reference {
            pts.push((v, 0.0));
        }
        for p in &rec.predictions {
            pts.push((p.value, 0.0));
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 0.0);
    }
    let ax = Axes::new(x0, x1, y0, y1.max(0.0), 0.0);
    ax.frame(s, "spectrum", "Re z", "Im z", fmt_g, fmt_g);
    for (i, rec) in r.sweep.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for p in &rec.predictions {
            let x = ax.sx(p.value);
            let y = ax.sy(0.0);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{c}" stroke-width="1"/>"#, y - 6.0, y + 6.0);
        }
        for &v in &rec.reference {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="{c}"/>"#, ax.sx(v), ax.sy(0.0));
        }
        for z in &rec.resonances {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{c}"/>"#, ax.sx(z.re), ax.sy(z.im));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" fill="{c}">h = {}</text>"#,
            W - M - 50.0,
            M + 12.0 + 11.0 * i as f64,
            rec.h
        );
    }
}

fn counts_panel(r: &ExperimentReport, s: &mut String) {
    let rows: Vec<(f64, f64, f64)> = r
        .sweep
        .iter()
        .filter_map(|rec| rec.count.as_ref().map(|c| (rec.h, c.reference as f64, c.prediction)))
        .filter(|(h, n, p)| *h > 0.0 && *n > 0.0 && *p > 0.0)
        .collect();
    let lg = |v: f64| v.log10();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(h, n, p) in &rows {
        x0 = x0.min(lg(h));
        x1 = x1.max(lg(h));
        y0 = y0.min(lg(n)).min(lg(p));
        y1 = y1.max(lg(n)).max(lg(p));
    }
    if rows.is_empty() {
        (x0, x1, y0, y1) = (-2.0, 0.0, 0.0, 2.0);
    }
    let ax = Axes::new(x0, x1, y0, y1, W);
    let pow = |v: f64| fmt_g(10f64.powf(v));
    ax.frame(s, "count vs h", "h", "count", pow, pow);
    for (series, color, key) in [(1usize, COLORS[0], "computed"), (2, COLORS[1], "Weyl")] {
        let pts: Vec<String> = rows
            .iter()
            .map(|&(h, n, p)| format!("{:.2},{:.2}", ax.sx(lg(h)), ax.sy(lg(if series == 1 { n } else { p }))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, pts.join(" "));
            for p in &pts {
                let (x, y) = p.split_once(',').unwrap();
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" fill="{color}">{key}</text>"#,
            W + W - M - 50.0,
            M + 12.0 + 11.0 * (series - 1) as f64
        );
    }
    if rows.is_empty() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">no counts</text>"#, W + W / 2.0, H / 2.0);
    }
}

pub fn render(r: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{H}" viewBox="0 0 {} {H}" font-family="sans-serif">"#,
        2.0 * W,
        2.0 * W
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    spectrum_panel(r, &mut s);
    counts_panel(r, &mut s);
    s.push_str("</svg>\n");
    s
}
