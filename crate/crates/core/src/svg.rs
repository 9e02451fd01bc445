//! Minimal SVG writer for the analysis plots.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Data-space to pixel-space mapping for a rectangular plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Frame {
    pub fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let span = if hi > lo { hi - lo } else { 1.0 };
        self.left + (v - lo) / span * self.width
    }

    pub fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        let span = if hi > lo { hi - lo } else { 1.0 };
        self.top + self.height - (v - lo) / span * self.height
    }
}

pub struct Svg {
    body: String,
    width: u32,
    height: u32,
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn points(pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

impl Svg {
    pub fn new(width: u32, height: u32) -> Self {
        Self { body: String::new(), width, height }
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="2,3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            points(pts)
        );
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], color: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>"#,
            points(pts)
        );
    }

    pub fn line(&mut self, from: (f64, f64), to: (f64, f64), color: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1"/>"#,
            from.0, from.1, to.0, to.1
        );
    }

    pub fn circle(&mut self, at: (f64, f64), r: f64, color: &str, title: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{color}"><title>{}</title></circle>"#,
            at.0,
            at.1,
            escape(title)
        );
    }

    pub fn text(&mut self, at: (f64, f64), size: u32, anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            at.0,
            at.1,
            escape(text)
        );
    }

    /// Axes with `ticks` evenly spaced labeled ticks on each.
    pub fn axes(&mut self, f: &Frame, ticks: usize, x_label: &str, y_label: &str) {
        let bottom = f.top + f.height;
        self.line((f.left, bottom), (f.left + f.width, bottom), "#000");
        self.line((f.left, f.top), (f.left, bottom), "#000");
        for i in 0..=ticks {
            let frac = i as f64 / ticks as f64;
            let xv = f.x_range.0 + frac * (f.x_range.1 - f.x_range.0);
            let yv = f.y_range.0 + frac * (f.y_range.1 - f.y_range.0);
            let (px, py) = (f.x(xv), f.y(yv));
            self.line((px, bottom), (px, bottom + 4.0), "#000");
            self.text((px, bottom + 16.0), 10, "middle", &format_tick(xv));
            self.line((f.left - 4.0, py), (f.left, py), "#000");
            self.text((f.left - 6.0, py + 3.0), 10, "end", &format_tick(yv));
        }
        self.text((f.left + f.width / 2.0, bottom + 32.0), 12, "middle", x_label);
        let (lx, ly) = (f.left - 40.0, f.top + f.height / 2.0);
        let _ = writeln!(
            self.body,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(y_label)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn format_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_maps_corners() {
        let f = Frame { left: 10.0, top: 20.0, width: 100.0, height: 50.0, x_range: (0.0, 10.0), y_range: (0.0, 1.0) };
        assert_eq!((f.x(0.0), f.y(0.0)), (10.0, 70.0));
        assert_eq!((f.x(10.0), f.y(1.0)), (110.0, 20.0));
    }

    #[test]
    fn text_is_escaped() {
        let mut s = Svg::new(10, 10);
        s.text((0.0, 0.0), 10, "start", "a<b & \"c\"");
        assert!(s.finish().contains("a&lt;b &amp; &quot;c&quot;"));
    }
}
