//! Minimal SVG emission for joint-trajectory plots: one polyline per motion,
//! shaded bands over constrained frames, axis ticks, and a legend.

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn trajectory_svg(
    curves: &[Vec<f64>],
    labels: &[String],
    constrained_frames: &[usize],
    fps: f64,
    title: &str,
) -> String {
    let max_len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for c in curves {
        for &v in c {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !y_min.is_finite() || y_min == y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_of = |f: f64| MARGIN_L + plot_w * f / (max_len.saturating_sub(1).max(1)) as f64;
    let y_of = |v: f64| MARGIN_T + plot_h * (1.0 - (v - y_min) / (y_max - y_min));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Constrained spans as translucent bands (contiguous runs of frames).
    let mut run_start: Option<usize> = None;
    let mut prev = 0usize;
    let mut bands = Vec::new();
    for &f in constrained_frames {
        match run_start {
            None => run_start = Some(f),
            Some(_) if f == prev + 1 => {}
            Some(s) => {
                bands.push((s, prev));
                run_start = Some(f);
            }
        }
        prev = f;
    }
    if let Some(s) = run_start {
        bands.push((s, prev));
    }
    for (s, e) in bands {
        let x0 = x_of(s as f64) - 2.0;
        let x1 = x_of(e as f64) + 2.0;
        svg.push_str(&format!(
            "<rect x=\"{x0:.1}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{plot_h}\" \
             fill=\"#ffcccc\" opacity=\"0.6\"/>\n",
            x1 - x0
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    for k in 0..=4 {
        let v = y_min + (y_max - y_min) * k as f64 / 4.0;
        let y = y_of(v);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\" text-anchor=\"end\" \
             dominant-baseline=\"middle\">{v:.3}</text>\n",
            MARGIN_L - 6.0
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{MARGIN_L}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
            MARGIN_L - 4.0
        ));
    }
    for k in 0..=4 {
        let f = max_len.saturating_sub(1) as f64 * k as f64 / 4.0;
        let x = x_of(f);
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{:.1}s</text>\n",
            MARGIN_T + plot_h + 18.0,
            f / fps
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        MARGIN_L + plot_w / 2.0,
        MARGIN_T - 14.0
    ));

    for (i, curve) in curves.iter().enumerate() {
        if curve.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let mut points = String::new();
        for (f, &v) in curve.iter().enumerate() {
            points.push_str(&format!("{:.2},{:.2} ", x_of(f as f64), y_of(v)));
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            points.trim_end()
        ));
        let ly = MARGIN_T + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            MARGIN_L + plot_w - 150.0,
            MARGIN_L + plot_w - 120.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"12\" dominant-baseline=\"middle\">{}</text>\n",
            MARGIN_L + plot_w - 112.0,
            &labels[i]
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
