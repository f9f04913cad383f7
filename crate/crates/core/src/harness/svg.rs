//! Minimal SVG line plot of cumulative regret curves.

use std::fmt::Write as _;

use crate::harness::experiment::AggregateTrace;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render(traces: &[AggregateTrace]) -> String {
    let horizon = traces.iter().map(|t| t.horizon()).max().unwrap_or(1).max(1);
    let y_max = traces
        .iter()
        .flat_map(|t| t.ci_high.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |round: usize| MARGIN_LEFT + plot_w * round as f64 / horizon as f64;
    let y = |v: f64| MARGIN_TOP + plot_h * (1.0 - v.max(0.0) / y_max);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();

    // axes
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    writeln!(
        s,
        r#"<path d="M{x0:.1},{MARGIN_TOP:.1} L{x0:.1},{y0:.1} L{:.1},{y0:.1}" fill="none" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    )
    .unwrap();
    for i in 0..=TICKS {
        let round = horizon * i / TICKS;
        let v = y_max * i as f64 / TICKS as f64;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{round}</text>"#,
            x(round),
            y0 + 18.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            x0 - 6.0,
            y(v) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">cumulative regret</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    let whisker_every = (horizon / 20).max(1);
    for (n, tr) in traces.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let mut points = String::new();
        for (t, &m) in tr.mean.iter().enumerate() {
            if t > 0 {
                points.push(' ');
            }
            write!(points, "{:.2},{:.2}", x(t + 1), y(m)).unwrap();
        }
        writeln!(
            s,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        )
        .unwrap();
        for t in (whisker_every - 1..tr.horizon()).step_by(whisker_every) {
            let px = x(t + 1);
            writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/>"#,
                y(tr.ci_low[t]),
                y(tr.ci_high[t])
            )
            .unwrap();
        }
        let ly = MARGIN_TOP + 10.0 + 18.0 * n as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&tr.label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
