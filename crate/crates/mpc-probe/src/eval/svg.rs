//! Hand-rolled SVG charts: no font or rasterizer dependencies, so the plot
//! bytes are identical on every platform.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = writeln!(
        s,
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>"
    );
    // y grid at 0.0, 0.25, 0.5, 0.75, 1.0
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = y0 - frac * (y0 - y1);
        let _ = writeln!(
            s,
            "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{x1:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{frac:.2}</text>",
            x0 - 6.0,
            y + 4.0
        );
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of values in [0, 1].
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut s = header(title);
    axes(&mut s);
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let n = bars.len().max(1) as f64;
    let slot = (x1 - x0) / n;
    let bar_w = slot * 0.6;
    for (i, (label, value)) in bars.iter().enumerate() {
        let x = x0 + slot * i as f64 + (slot - bar_w) / 2.0;
        let h = value.clamp(0.0, 1.0) * (y0 - y1);
        let y = y0 - h;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{color}\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{value:.3}</text>",
            x + bar_w / 2.0,
            y - 4.0
        );
        let cx = x + bar_w / 2.0;
        let ty = y0 + 14.0;
        let _ = writeln!(
            s,
            "<text x=\"{cx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\" transform=\"rotate(-30 {cx:.1} {ty:.1})\" font-size=\"10\">{}</text>",
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart: one polyline per series over integer x buckets, y in [0, 1].
pub fn line_chart(title: &str, x_label: &str, series: &[(String, Vec<(u32, f64)>)]) -> String {
    let mut s = header(title);
    axes(&mut s);
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;

    let buckets: Vec<u32> = {
        let mut all: Vec<u32> = series
            .iter()
            .flat_map(|(_, pts)| pts.iter().map(|(b, _)| *b))
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    };
    if buckets.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (bmin, bmax) = (buckets[0] as f64, *buckets.last().unwrap() as f64);
    let span = (bmax - bmin).max(1.0);
    let px = |b: u32| x0 + (b as f64 - bmin) / span * (x1 - x0);
    let py = |v: f64| y0 - v.clamp(0.0, 1.0) * (y0 - y1);

    for b in &buckets {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{b}</text>",
            px(*b),
            y0 + 16.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|(b, v)| format!("{:.1},{:.1}", px(*b), py(*v)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        );
        for (b, v) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                px(*b),
                py(*v)
            );
        }
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            x1 + 10.0,
            ly,
            x1 + 26.0,
            ly + 9.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
