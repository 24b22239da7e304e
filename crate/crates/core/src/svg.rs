//! Overhead SVG plot of a run: obstacles, robot and person paths, and
//! heading arrows every few ticks.

use std::fmt::Write;

use crate::runlog::LogRow;
use crate::world::Obstacle;

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    pub arrow_every: usize,
    pub arrow_length: f64,
    /// Pixels per meter.
    pub scale: f64,
    pub margin: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            arrow_every: 10,
            arrow_length: 0.4,
            scale: 60.0,
            margin: 0.8,
        }
    }
}

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        (x - self.min_x) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        (self.max_y - y) * self.scale
    }
}

fn bounds(rows: &[LogRow], obstacles: &[Obstacle]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut add = |x: f64, y: f64, r: f64| {
        b.0 = b.0.min(x - r);
        b.1 = b.1.min(y - r);
        b.2 = b.2.max(x + r);
        b.3 = b.3.max(y + r);
    };
    for r in rows {
        add(r.robot_x, r.robot_y, 0.0);
        add(r.person_x, r.person_y, 0.0);
    }
    for o in obstacles {
        match *o {
            Obstacle::Circle { center, radius } => add(center.x, center.y, radius),
            Obstacle::Segment { a, b: e, thickness } => {
                add(a.x, a.y, 0.5 * thickness);
                add(e.x, e.y, 0.5 * thickness);
            }
        }
    }
    if !b.0.is_finite() {
        return (0.0, 0.0, 1.0, 1.0);
    }
    b
}

fn polyline(out: &mut String, f: &Frame, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let mut s = String::new();
    for (i, (x, y)) in pts.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", f.x(x), f.y(y));
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{s}" fill="none" stroke="{color}" stroke-width="2"/>"#
    );
}

pub fn render(rows: &[LogRow], obstacles: &[Obstacle], opts: &PlotOptions) -> String {
    let (x0, y0, x1, y1) = bounds(rows, obstacles);
    let m = opts.margin;
    let f = Frame {
        min_x: x0 - m,
        max_y: y1 + m,
        scale: opts.scale,
    };
    let width = (x1 - x0 + 2.0 * m) * opts.scale;
    let height = (y1 - y0 + 2.0 * m) * opts.scale + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    out.push_str(concat!(
        "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">",
        "<path d=\"M0,0 L6,3 L0,6 z\" fill=\"#d62728\"/></marker></defs>\n",
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
    ));
    for o in obstacles {
        match *o {
            Obstacle::Circle { center, radius } => {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#999999" stroke="#333333"/>"##,
                    f.x(center.x),
                    f.y(center.y),
                    radius * f.scale
                );
            }
            Obstacle::Segment { a, b, thickness } => {
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333" stroke-width="{:.2}" stroke-linecap="round"/>"##,
                    f.x(a.x),
                    f.y(a.y),
                    f.x(b.x),
                    f.y(b.y),
                    (thickness * f.scale).max(2.0)
                );
            }
        }
    }
    polyline(&mut out, &f, rows.iter().map(|r| (r.person_x, r.person_y)), "#2ca02c");
    polyline(&mut out, &f, rows.iter().map(|r| (r.robot_x, r.robot_y)), "#1f77b4");
    let every = opts.arrow_every.max(1);
    for r in rows.iter().step_by(every) {
        let (s, c) = r.robot_heading.sin_cos();
        let tip = (r.robot_x + opts.arrow_length * c, r.robot_y + opts.arrow_length * s);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-width="2" marker-end="url(#head)"/>"##,
            f.x(r.robot_x),
            f.y(r.robot_y),
            f.x(tip.0),
            f.y(tip.1)
        );
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#2ca02c"/>"##,
            f.x(r.person_x),
            f.y(r.person_y)
        );
    }
    let ly = height - 15.0;
    let legend = [("#1f77b4", "robot"), ("#2ca02c", "person"), ("#d62728", "heading")];
    for (i, (color, label)) in legend.iter().enumerate() {
        let x = 10.0 + 110.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.0}" y1="{ly:.0}" x2="{:.0}" y2="{ly:.0}" stroke="{color}" stroke-width="3"/><text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12">{label}</text>"#,
            x + 25.0,
            x + 30.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}
