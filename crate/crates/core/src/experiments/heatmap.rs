use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PhaseGridResult, YAxis};
use crate::error::{Error, Result};

const CELL_W: f64 = 56.0;
const CELL_H: f64 = 32.0;
const LEFT: f64 = 90.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const BAR_GAP: f64 = 30.0;
const BAR_W: f64 = 18.0;
const RIGHT: f64 = 110.0;
const EMPTY_FILL: &str = "#bdbdbd";

/// Anchor colours of a perceptually ordered map (dark purple to yellow).
const ANCHORS: [(u8, u8, u8); 5] = [
    (0x44, 0x01, 0x54),
    (0x3b, 0x52, 0x8b),
    (0x21, 0x91, 0x8c),
    (0x5e, 0xc9, 0x62),
    (0xfd, 0xe7, 0x25),
];

/// Colour at `t ∈ [0, 1]`, linearly interpolated between the anchors.
pub fn colormap(t: f64) -> (u8, u8, u8) {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (ANCHORS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(ANCHORS.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (ANCHORS[i], ANCHORS[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Log-scale position of `v` between `lo` and `hi`; zero and anything below
/// `lo` sit at the bottom of the scale.
fn log_position(v: f64, lo: f64, hi: f64) -> f64 {
    if !(v > 0.0) || hi <= lo {
        return 0.0;
    }
    ((v.log10() - lo.log10()) / (hi.log10() - lo.log10())).clamp(0.0, 1.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG: one rectangle per cell coloured by `log10(mse_mean)`,
/// the first row at the bottom, a colour bar at the right. Empty cells are grey.
pub fn heatmap_svg(result: &PhaseGridResult) -> Result<String> {
    let rows = result.cells.len();
    let cols = result.x_axis.len();
    if rows == 0 || cols == 0 || result.cells.iter().any(|r| r.len() != cols) || result.y_axis.len() != rows {
        return Err(Error::InvalidArgument(
            "heatmap needs a non-empty rectangular grid".into(),
        ));
    }
    let positive: Vec<f64> = result
        .cells
        .iter()
        .flatten()
        .map(|c| c.mse_mean)
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = if positive.is_empty() { (1.0, 1.0) } else { (lo, hi) };

    let grid_w = cols as f64 * CELL_W;
    let grid_h = rows as f64 * CELL_H;
    let width = LEFT + grid_w + BAR_GAP + BAR_W + RIGHT;
    let height = TOP + grid_h + BOTTOM;
    let y_label = match result.y_kind {
        YAxis::Rho => "ρ = p/d",
        YAxis::Cosparsity => "cosparsity",
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let settings: Vec<String> = result.meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(
        s,
        "<desc>mean squared error, log colour scale; {}</desc>",
        escape(&settings.join(" "))
    );

    for (r, row) in result.cells.iter().enumerate() {
        let y = TOP + (rows - 1 - r) as f64 * CELL_H;
        for (c, cell) in row.iter().enumerate() {
            let x = LEFT + c as f64 * CELL_W;
            let fill = if cell.mse_mean.is_nan() {
                EMPTY_FILL.to_string()
            } else {
                hex(colormap(log_position(cell.mse_mean, lo, hi)))
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" data-mse="{:e}"/>"#,
                cell.mse_mean
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + CELL_H / 2.0 + 4.0,
            result.y_axis[r]
        );
    }
    for (c, delta) in result.x_axis.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{delta}</text>"#,
            LEFT + (c as f64 + 0.5) * CELL_W,
            TOP + grid_h + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">δ = m/d</text>"#,
        LEFT + grid_w / 2.0,
        TOP + grid_h + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{y_label}</text>"#,
        TOP + grid_h / 2.0,
        TOP + grid_h / 2.0
    );

    // Colour bar: bottom = lo, top = hi.
    let bar_x = LEFT + grid_w + BAR_GAP;
    let steps = 32;
    let step_h = grid_h / steps as f64;
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        let y = TOP + grid_h - (i + 1) as f64 * step_h;
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{bar_x}" y="{y}" width="{BAR_W}" height="{step_h}" fill="{}"/>"#,
            hex(colormap(t))
        );
    }
    for (label, y) in [(hi, TOP + 4.0), (lo, TOP + grid_h)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{label:.2e}</text>"#, bar_x + BAR_W + 6.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">MSE (log)</text>"#, bar_x - 4.0, TOP - 12.0);
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_heatmap(result: &PhaseGridResult, path: &Path) -> Result<()> {
    fs::write(path, heatmap_svg(result)?)?;
    Ok(())
}
