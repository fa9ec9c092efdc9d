//! Minimal SVG charts: line plots and filled-cell maps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log => v.log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-30 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xs: Scale, ys: Scale, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    for k in 0..=5 {
        let s = k as f64 / 5.0;
        let xv = f.x0 + s * (f.x1 - f.x0);
        let yv = f.y0 + s * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - MB,
            H - MB + 5.0,
            H - MB + 18.0,
            tick(xv, xs)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.1}" x2="{ML}" y2="{py:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            ML - 5.0,
            ML - 8.0,
            py + 4.0,
            tick(yv, ys)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64, s: Scale) -> String {
    match s {
        Scale::Linear => format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string(),
        Scale::Log => format!("1e{:.1}", v),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    pub fn render(&self) -> String {
        let mapped: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .map(|&(x, y)| (self.x_scale.map(x), self.y_scale.map(y)))
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                    .collect()
            })
            .collect();
        let (x0, x1) = extent(mapped.iter().flatten().map(|p| p.0));
        let (y0, y1) = extent(mapped.iter().flatten().map(|p| p.1));
        let f = Frame { x0, x1, y0, y1 };
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, self.x_scale, self.y_scale, &self.x_label, &self.y_label);
        for (k, (pts, s)) in mapped.iter().zip(&self.series).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            let ly = MT + 14.0 + 14.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
                ML + 8.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Grid of values drawn as colored cells, `z[i][j]` at (`x[i]`, `y[j]`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellMap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_scale: Scale,
    pub z: Vec<Vec<f64>>,
}

fn color_ramp(s: f64) -> String {
    let s = s.clamp(0.0, 1.0);
    let r = (255.0 * s) as u8;
    let b = (255.0 * (1.0 - s)) as u8;
    let g = (255.0 * (1.0 - (2.0 * s - 1.0).abs()) * 0.8) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

impl CellMap {
    pub fn render(&self) -> String {
        let ys: Vec<f64> = self.y.iter().map(|&v| self.y_scale.map(v)).collect();
        let (x0, x1) = extent(self.x.iter().copied());
        let (y0, y1) = extent(ys.iter().copied());
        let dx = if self.x.len() > 1 { (x1 - x0) / (self.x.len() - 1) as f64 } else { 1.0 };
        let dy = if ys.len() > 1 { (y1 - y0) / (ys.len() - 1) as f64 } else { 1.0 };
        let f = Frame {
            x0: x0 - dx / 2.0,
            x1: x1 + dx / 2.0,
            y0: y0 - dy / 2.0,
            y1: y1 + dy / 2.0,
        };
        let (z0, z1) = extent(self.z.iter().flatten().copied());
        let mut out = String::new();
        header(&mut out, &self.title);
        for (i, &xv) in self.x.iter().enumerate() {
            for (j, &yv) in ys.iter().enumerate() {
                let z = self.z[i][j];
                let fill = if z.is_finite() {
                    color_ramp((z - z0) / (z1 - z0))
                } else {
                    "#cccccc".to_string()
                };
                let (px0, px1) = (f.px(xv - dx / 2.0), f.px(xv + dx / 2.0));
                let (py0, py1) = (f.py(yv + dy / 2.0), f.py(yv - dy / 2.0));
                let _ = writeln!(
                    out,
                    r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    px1 - px0,
                    py1 - py0
                );
            }
        }
        axes(&mut out, &f, Scale::Linear, self.y_scale, &self.x_label, &self.y_label);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{} .. {}</text>"#,
            W - MR,
            MT - 6.0,
            tick(z0, Scale::Linear),
            tick(z1, Scale::Linear)
        );
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed() {
        let c = LineChart {
            title: "a < b".into(),
            x_scale: Scale::Log,
            series: vec![Series {
                label: "s".into(),
                points: vec![(1e-7, 0.1), (1.0, 0.5), (1e3, 0.9)],
            }],
            ..Default::default()
        };
        let s = c.render();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn cell_map_draws_every_cell() {
        let m = CellMap {
            x: vec![1.0, 2.0],
            y: vec![1e-6, 1e-5, 1e-4],
            y_scale: Scale::Log,
            z: vec![vec![0.0, 0.5, f64::NAN], vec![1.0, 1.5, 1.5]],
            ..Default::default()
        };
        let s = m.render();
        assert_eq!(s.matches("<rect x=").count(), 6 + 1);
        assert!(s.contains("#cccccc"));
    }
}
