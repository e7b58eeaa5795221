//! Static SVG charts. Coordinates are printed with fixed precision so the
//! files are byte-stable.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 4] = ["#1f4e9c", "#c0392b", "#2e8b57", "#7f6000"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    /// Pointwise band drawn as a shaded area, `(x, lower, upper)`.
    pub band: Option<Vec<(f64, f64, f64)>>,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.to_string(),
            points,
            dashed: false,
            band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Vertical markers with labels.
    pub markers: Vec<(f64, String)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Axis range padded by 5%, or a unit range around a constant.
fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, s: &mut String, title: &str, x_label: &str, y_label: &str) {
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            r#"<path d="M{x0:.1},{y0:.1} L{x0:.1},{y1:.1} L{x1:.1},{y1:.1}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let (px, py) = (self.px(fx), self.py(fy));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{y1:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y1 + 4.0,
                y1 + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 7.0,
                py + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn polyline(frame: &Frame, points: &[(f64, f64)]) -> String {
    let mut d = String::new();
    let mut pen_up = true;
    for &(x, y) in points {
        if !(x.is_finite() && y.is_finite()) {
            pen_up = true;
            continue;
        }
        let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, frame.px(x), frame.py(y));
        pen_up = false;
    }
    d.trim_end().to_string()
}

impl LineChart {
    pub fn to_svg(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
        let mut ys: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
        for s in &self.series {
            if let Some(b) = &s.band {
                ys.extend(b.iter().flat_map(|p| [p.1, p.2]));
            }
        }
        let frame = Frame {
            x: padded(xs.chain(self.markers.iter().map(|m| m.0))),
            y: padded(ys.into_iter()),
        };
        let mut s = String::new();
        frame.axes(&mut s, &self.title, &self.x_label, &self.y_label);
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            if let Some(band) = &series.band {
                let upper: Vec<(f64, f64)> = band.iter().map(|p| (p.0, p.2)).collect();
                let lower: Vec<(f64, f64)> = band.iter().rev().map(|p| (p.0, p.1)).collect();
                let pts: Vec<(f64, f64)> = upper.into_iter().chain(lower).filter(|p| p.1.is_finite()).collect();
                if !pts.is_empty() {
                    let _ = writeln!(
                        s,
                        r#"<path d="{} Z" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                        polyline(&frame, &pts)
                    );
                }
            }
            let dash = if series.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                polyline(&frame, &series.points)
            );
            let ly = TOP + 8.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                WIDTH - RIGHT - 170.0,
                WIDTH - RIGHT - 145.0,
                WIDTH - RIGHT - 140.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        for (x, label) in &self.markers {
            let px = frame.px(*x);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{TOP:.1}" x2="{px:.1}" y2="{:.1}" stroke="grey" stroke-dasharray="3,3"/><text x="{:.1}" y="{:.1}" fill="grey">{}</text>"#,
                HEIGHT - BOTTOM,
                px + 4.0,
                TOP + 12.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiskerRow {
    pub label: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Drawn as a triangle instead of a circle.
    pub triangle: bool,
}

/// Point estimates with interval whiskers, one row each, and a vertical
/// reference line.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiskerChart {
    pub title: String,
    pub x_label: String,
    pub rows: Vec<WhiskerRow>,
    pub reference: Option<f64>,
}

impl WhiskerChart {
    pub fn to_svg(&self) -> String {
        let xs = self.rows.iter().flat_map(|r| [r.lower, r.upper, r.estimate]).chain(self.reference);
        let n = self.rows.len().max(1) as f64;
        let frame = Frame {
            x: padded(xs),
            y: (0.0, n + 1.0),
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let left = 200.0;
        let px = |x: f64| left + (x - frame.x.0) / (frame.x.1 - frame.x.0) * (WIDTH - left - RIGHT);
        let y1 = HEIGHT - BOTTOM;
        let _ = writeln!(s, r#"<line x1="{left:.1}" y1="{y1:.1}" x2="{:.1}" y2="{y1:.1}" stroke="black"/>"#, WIDTH - RIGHT);
        for i in 0..=4 {
            let fx = frame.x.0 + (frame.x.1 - frame.x.0) * i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" y1="{y1:.1}" x2="{0:.1}" y2="{1:.1}" stroke="black"/><text x="{0:.1}" y="{2:.1}" text-anchor="middle">{3}</text>"#,
                px(fx),
                y1 + 4.0,
                y1 + 18.0,
                tick(fx)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (left + WIDTH - RIGHT) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        if let Some(r) = self.reference {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" y1="{TOP:.1}" x2="{0:.1}" y2="{y1:.1}" stroke="grey"/>"#,
                px(r)
            );
        }
        for (i, row) in self.rows.iter().enumerate() {
            let y = frame.py(n - i as f64);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                left - 8.0,
                y + 4.0,
                escape(&row.label)
            );
            if !(row.estimate.is_finite() && row.lower.is_finite() && row.upper.is_finite()) {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/>"#,
                px(row.lower),
                px(row.upper)
            );
            let cx = px(row.estimate);
            if row.triangle {
                let _ = writeln!(
                    s,
                    r#"<path d="M{cx:.1},{:.1} L{:.1},{:.1} L{:.1},{:.1} Z" fill="{}"/>"#,
                    y - 5.0,
                    cx - 5.0,
                    y + 4.0,
                    cx + 5.0,
                    y + 4.0,
                    COLORS[1]
                );
            } else {
                let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{y:.1}" r="4" fill="{}"/>"#, COLORS[0]);
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed_and_stable() {
        let chart = LineChart {
            title: "e <l> & e_h".into(),
            x_label: "theta".into(),
            y_label: "effort".into(),
            series: vec![
                Series::line("e_l", vec![(1.0, 0.25), (2.0, 0.2), (3.0, f64::NAN), (4.0, 0.1)]),
                Series {
                    name: "e_h".into(),
                    points: vec![(1.0, 0.25), (4.0, 0.2)],
                    dashed: true,
                    band: Some(vec![(1.0, 0.2, 0.3), (4.0, 0.1, 0.3)]),
                },
            ],
            markers: vec![(2.0, "peak".into())],
        };
        let a = chart.to_svg();
        assert_eq!(a, chart.to_svg());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("e &lt;l&gt; &amp; e_h"));
        assert_eq!(a.matches("stroke-dasharray=\"6,4\"").count(), 2);
        // The NaN breaks the first line into two pieces.
        let first = a.lines().find(|l| l.contains("stroke-width=\"2\"") && l.starts_with("<path")).unwrap();
        assert_eq!(first.matches('M').count(), 2);
    }

    #[test]
    fn whiskers_draw_every_row() {
        let chart = WhiskerChart {
            title: "splits".into(),
            x_label: "coefficient".into(),
            rows: vec![
                WhiskerRow { label: "low".into(), estimate: -1.0, lower: -2.0, upper: 0.0, triangle: false },
                WhiskerRow { label: "high".into(), estimate: 1.0, lower: 0.5, upper: 1.5, triangle: true },
            ],
            reference: Some(0.2),
        };
        let svg = chart.to_svg();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("Z\" fill").count(), 1);
    }

    #[test]
    fn constant_ranges_are_padded() {
        assert_eq!(padded([3.0, 3.0].into_iter()), (2.5, 3.5));
        assert_eq!(padded(std::iter::empty()), (0.0, 1.0));
    }
}
