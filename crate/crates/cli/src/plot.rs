//! Minimal deterministic SVG line plots of result tables.

use std::fmt::Write as _;

use crate::table::ResultTable;

/// Values at or below this are drawn at the floor with a marker.
pub const LOG_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const LEGEND: f64 = 200.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Linear x, logarithmic y.
    LogY,
    /// Logarithmic x and y.
    LogLog,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            let v = if log { v.max(LOG_FLOOR).log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.max(LOG_FLOOR).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }
}

/// Renders every `(series, metric)` curve as one polyline with standard
/// deviation bars. Returns `None` for an empty table.
pub fn emit_plot(table: &ResultTable, kind: PlotKind) -> Option<String> {
    if table.is_empty() {
        return None;
    }
    let log_x = kind == PlotKind::LogLog && table.rows().iter().all(|r| r.x > 0.0);
    let xa = Axis::fit(table.rows().iter().map(|r| r.x), log_x);
    let ya = Axis::fit(
        table
            .rows()
            .iter()
            .flat_map(|r| [r.mean, r.mean + r.std, (r.mean - r.std).max(r.mean * 0.1)]),
        true,
    );
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + xa.unit(x) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - ya.unit(y) * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#,
        WIDTH + LEGEND
    )
    .unwrap();
    writeln!(s, r#"<title>{}</title>"#, escape(&table.experiment)).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    let decades = (ya.lo as i64)..=(ya.hi as i64);
    for e in decades {
        let y = py(10f64.powi(e as i32));
        writeln!(s, r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, MARGIN + plot_w).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#, MARGIN - 4.0, y + 4.0).unwrap();
    }
    for tick in 0..=4 {
        let u = tick as f64 / 4.0;
        let v = xa.lo + u * (xa.hi - xa.lo);
        let label = if xa.log { format!("{:.3}", 10f64.powf(v)) } else { format!("{v:.3}") };
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN + u * plot_w,
            HEIGHT - MARGIN + 16.0,
            label.trim_end_matches('0').trim_end_matches('.')
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN + plot_w / 2.0,
        HEIGHT - MARGIN / 3.0,
        escape(&table.x_label)
    )
    .unwrap();

    for (i, (series, metric)) in table.curves().iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let rows = table.select(series, metric);
        let pts: Vec<String> = rows
            .iter()
            .filter(|r| r.mean.is_finite())
            .map(|r| format!("{:.2},{:.2}", px(r.x), py(r.mean)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for r in rows.iter().filter(|r| r.mean.is_finite()) {
            let x = px(r.x);
            if r.std > 0.0 {
                let lo = (r.mean - r.std).max(LOG_FLOOR);
                writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    py(lo),
                    py(r.mean + r.std)
                )
                .unwrap();
            }
            if r.mean <= LOG_FLOOR {
                let y = py(LOG_FLOOR);
                writeln!(
                    s,
                    r#"<path d="M{:.2},{:.2} l6,6 m0,-6 l-6,6" stroke="{color}" class="floor"/>"#,
                    x - 3.0,
                    y - 3.0
                )
                .unwrap();
            }
        }
        let ly = MARGIN + 14.0 * i as f64;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{} {}</text>"#,
            WIDTH - MARGIN + 10.0,
            escape(series),
            escape(metric)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Provenance;

    fn table() -> ResultTable {
        let mut t = ResultTable::new("demo", "K", Provenance::new("h".into(), 0));
        t.push("a", 1.0, "err", &[1e-2]);
        t.push("a", 2.0, "err", &[0.0]);
        t.push("a", 3.0, "err", &[1e-6, 2e-6]);
        t
    }

    #[test]
    fn one_polyline_per_curve() {
        let svg = emit_plot(&table(), PlotKind::LogY).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let mut t = table();
        t.push("a", 1.0, "other", &[1.0]);
        assert_eq!(emit_plot(&t, PlotKind::LogLog).unwrap().matches("<polyline").count(), 2);
    }

    #[test]
    fn zeros_are_marked_at_the_floor() {
        let svg = emit_plot(&table(), PlotKind::LogY).unwrap();
        assert_eq!(svg.matches("class=\"floor\"").count(), 1);
    }

    #[test]
    fn output_is_deterministic_and_empty_tables_give_nothing() {
        assert_eq!(emit_plot(&table(), PlotKind::LogY), emit_plot(&table(), PlotKind::LogY));
        let empty = ResultTable::new("e", "x", Provenance::new("h".into(), 0));
        assert!(emit_plot(&empty, PlotKind::LogY).is_none());
    }
}
