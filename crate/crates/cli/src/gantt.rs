//! SVG Gantt chart: one 100 px row per accelerator, one colour per DNN,
//! hatching wherever a group ran slowed by more than 5%.

use std::fmt::Write;

use contsched::{Scenario, Timeline};

const ROW_HEIGHT: f64 = 100.0;
const PLOT_WIDTH: f64 = 1000.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 20.0;
const AXIS: f64 = 30.0;
const HATCH_ABOVE: f64 = 1.05;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(scenario: &Scenario, t: &Timeline) -> String {
    let rows = scenario.accelerators().len();
    let span = if t.makespan_ms > 0.0 { t.makespan_ms } else { 1.0 };
    let x = |ms: f64| LEFT + ms / span * PLOT_WIDTH;
    let width = LEFT + PLOT_WIDTH + 20.0;
    let height = TOP + rows as f64 * ROW_HEIGHT + AXIS;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    svg.push_str(
        r#"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="black" stroke-width="1.5" stroke-opacity="0.5"/></pattern></defs>"#,
    );
    svg.push('\n');

    for (row, acc) in scenario.accelerators().iter().enumerate() {
        let y = TOP + row as f64 * ROW_HEIGHT;
        let _ = writeln!(
            svg,
            r##"<rect x="{LEFT}" y="{y:.1}" width="{PLOT_WIDTH}" height="{ROW_HEIGHT}" fill="none" stroke="#cccccc"/><text x="8" y="{:.1}">{}</text>"##,
            y + ROW_HEIGHT / 2.0,
            esc(&acc.name)
        );
    }

    for g in &t.groups {
        let y = TOP + g.accel as f64 * ROW_HEIGHT + 10.0;
        let h = ROW_HEIGHT - 20.0;
        let colour = PALETTE[g.group.dnn % PALETTE.len()];
        let name = &scenario.dnns()[g.group.dnn].name;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.3}" y="{y:.1}" width="{:.3}" height="{h:.1}" fill="{colour}" stroke="white"><title>{} {} {:.3}-{:.3} ms</title></rect>"#,
            x(g.start_ms),
            x(g.end_ms) - x(g.start_ms),
            esc(name),
            g.group,
            g.start_ms,
            g.end_ms
        );
        for seg in g.segments.iter().filter(|s| s.factor > HATCH_ABOVE) {
            let _ = writeln!(
                svg,
                r#"<rect x="{:.3}" y="{y:.1}" width="{:.3}" height="{h:.1}" fill="url(#hatch)"><title>slowdown {:.3}</title></rect>"#,
                x(seg.start_ms),
                x(seg.end_ms) - x(seg.start_ms),
                seg.factor
            );
        }
    }

    let axis_y = TOP + rows as f64 * ROW_HEIGHT;
    for i in 0..=4 {
        let ms = span * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{ms:.3} ms</text>"#,
            x(ms),
            axis_y + 18.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
