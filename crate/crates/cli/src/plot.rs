//! CSV and SVG rendering of density traces.

use std::fmt::Write;

use gstat::density::DensityTrace;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub fn trace_csv(trace: &DensityTrace) -> String {
    let mut out = String::from("n,value,ci_halfwidth\n");
    for e in &trace.estimates {
        writeln!(out, "{},{},{}", e.n, e.value, e.ci_halfwidth).expect("write to string");
    }
    out
}

/// Line chart of value against `log n`, with the confidence band when any
/// estimate is sampled.
pub fn trace_svg(trace: &DensityTrace) -> String {
    let est = &trace.estimates;
    let (lo, hi) = match (est.first(), est.last()) {
        (Some(a), Some(b)) => ((a.n as f64).ln(), (b.n as f64).ln()),
        _ => (0.0, 1.0),
    };
    let top = est.iter().map(|e| e.value + e.ci_halfwidth).fold(1.0, f64::max);
    let x = |n: usize| {
        if hi > lo {
            MARGIN + ((n as f64).ln() - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN)
        } else {
            WIDTH / 2.0
        }
    };
    let y = |v: f64| HEIGHT - MARGIN - v.clamp(0.0, top) / top * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(w, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    for v in [0.0, 0.5, 1.0] {
        let yy = y(v);
        let _ = writeln!(
            w,
            r##"<line x1="{x0}" y1="{yy:.2}" x2="{x1}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v}</text>"##,
            x0 - 6.0,
            yy + 4.0
        );
    }
    if let (Some(a), Some(b)) = (est.first(), est.last()) {
        for n in [a.n, b.n] {
            let _ = writeln!(
                w,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{n}</text>"#,
                x(n),
                y0 + 16.0
            );
        }
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">n (log scale)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );

    if est.iter().any(|e| e.ci_halfwidth > 0.0) {
        let upper = est.iter().map(|e| format!("{:.2},{:.2}", x(e.n), y(e.value + e.ci_halfwidth)));
        let lower = est.iter().rev().map(|e| format!("{:.2},{:.2}", x(e.n), y(e.value - e.ci_halfwidth)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(w, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5"/>"##, band.join(" "));
    }
    let line: Vec<String> = est.iter().map(|e| format!("{:.2},{:.2}", x(e.n), y(e.value))).collect();
    let _ = writeln!(w, r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##, line.join(" "));
    for e in est {
        let _ = writeln!(w, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#08519c"/>"##, x(e.n), y(e.value));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use gstat::density::{density_trace, EstimatorPolicy, TuplePredicate};
    use gstat::generate::is_square;

    fn spike_trace() -> DensityTrace {
        let p = TuplePredicate::factorized(2, |i| !is_square(i));
        density_trace(&p, &[100, 1000, 10_000], &EstimatorPolicy::default()).unwrap()
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = trace_csv(&spike_trace());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "n,value,ci_halfwidth");
        assert_eq!(lines[1], "100,0.801,0");
    }

    #[test]
    fn polyline_rises_for_growing_values() {
        let svg = trace_svg(&spike_trace());
        let pts = svg.split("<polyline points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<f64> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect();
        // svg y grows downward
        assert!(ys.windows(2).all(|w| w[1] < w[0]), "{ys:?}");
        assert_eq!(svg, trace_svg(&spike_trace()));
    }
}
