//! Hand-written SVG for the (w_D, w_Q) region plot.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub struct RegionPlot<'a> {
    pub kappa: usize,
    pub boundary: &'a [(f64, f64)],
    /// Points with a flag telling whether they violate the boundary.
    pub scatter: &'a [(f64, f64, bool)],
}

struct Frame {
    y_min: f64,
}

impl Frame {
    fn x(&self, w_d: f64) -> f64 {
        MARGIN + w_d * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, w_q: f64) -> f64 {
        HEIGHT - MARGIN - (w_q - self.y_min) / (1.0 - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

pub fn render(plot: &RegionPlot) -> String {
    let lowest = plot
        .boundary
        .iter()
        .map(|p| p.1)
        .chain(plot.scatter.iter().map(|p| p.1))
        .fold(1.0, f64::min);
    let y_min = if lowest >= 1.0 { 0.0 } else { ((lowest - 0.05 * (1.0 - lowest)) * 20.0).floor() / 20.0 };
    let f = Frame { y_min: y_min.max(0.0) };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // Forbidden region: above the boundary, right of 1/kappa.
    let mut poly = String::new();
    for &(x, y) in plot.boundary {
        let _ = write!(poly, "{:.2},{:.2} ", f.x(x), f.y(y));
    }
    if let (Some(first), Some(last)) = (plot.boundary.first(), plot.boundary.last()) {
        let _ = write!(poly, "{:.2},{:.2} {:.2},{:.2}", f.x(last.0), f.y(1.0), f.x(first.0), f.y(1.0));
    }
    let _ = writeln!(s, r##"<polygon points="{poly}" fill="#bbbbbb" fill-opacity="0.6" stroke="none"/>"##);

    // Axes and ticks.
    let (x0, x1, y0, y1) = (f.x(0.0), f.x(1.0), f.y(f.y_min), f.y(1.0));
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let x = f.x(v);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, y0 + 20.0);
        let w = f.y_min + v * (1.0 - f.y_min);
        let y = f.y(w);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{w:.3}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">A(Density)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">A(QuasiCheck)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    // Boundary curve.
    let mut line = String::new();
    for &(x, y) in plot.boundary {
        let _ = write!(line, "{:.2},{:.2} ", f.x(x), f.y(y));
    }
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#, line.trim_end());

    for &(x, y, above) in plot.scatter {
        let color = if above { "#d62728" } else { "#1f77b4" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}" fill-opacity="0.6"/>"#,
            f.x(x),
            f.y(y)
        );
    }

    // Rigid states sit at (1/kappa, 1).
    let (rx, ry) = (f.x(1.0 / plot.kappa as f64), f.y(1.0));
    let _ = writeln!(
        s,
        r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="black" stroke-width="2.5"/>"#,
        rx - 6.0,
        ry - 6.0,
        rx + 6.0,
        ry + 6.0,
        rx - 6.0,
        ry + 6.0,
        rx + 6.0,
        ry - 6.0
    );
    s.push_str("</svg>\n");
    s
}
