//! Textual output helpers: float formatting and CSV/SVG writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Floats in textual outputs carry 6 significant digits; binary artifacts are
/// the ground truth.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.5e}")
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Minimal SVG line plot: one polyline per named series over a shared x axis.
pub fn write_svg_lines(
    path: &Path,
    title: &str,
    series: &[(&str, &[f64])],
) -> Result<()> {
    let width = 720.0;
    let height = 400.0;
    let margin = 50.0;
    let n = series.iter().map(|(_, ys)| ys.len()).max().unwrap_or(0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, ys) in series {
        for &y in *ys {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    if !lo.is_finite() || !hi.is_finite() || n < 2 {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"];
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        margin
    ));
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        width - 2.0 * margin,
        height - 2.0 * margin
    ));
    for (si, (name, ys)) in series.iter().enumerate() {
        if ys.len() < 2 {
            continue;
        }
        let color = colors[si % colors.len()];
        let pts: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let x = margin + (width - 2.0 * margin) * i as f64 / (ys.len() - 1) as f64;
                let yy = height - margin - (height - 2.0 * margin) * (y - lo) / (hi - lo);
                format!("{x:.1},{yy:.1}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            width - margin - 120.0,
            margin + 16.0 * (si + 1) as f64
        ));
    }
    svg.push_str(&format!(
        "<text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        margin,
        fmt6(hi)
    ));
    svg.push_str(&format!(
        "<text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        height - margin,
        fmt6(lo)
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Minimal SVG grouped-bar plot: one bar group per label.
pub fn write_svg_bars(
    path: &Path,
    title: &str,
    labels: &[String],
    series: &[(&str, &[f64])],
) -> Result<()> {
    let width = 720.0;
    let height = 400.0;
    let margin = 50.0;
    let hi = series
        .iter()
        .flat_map(|(_, ys)| ys.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let groups = labels.len().max(1);
    let group_w = (width - 2.0 * margin) / groups as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
    ));
    for (gi, label) in labels.iter().enumerate() {
        for (si, (_, ys)) in series.iter().enumerate() {
            let y = ys.get(gi).copied().unwrap_or(0.0);
            let h = (height - 2.0 * margin) * y / hi;
            let x = margin + group_w * gi as f64 + group_w * 0.1 + bar_w * si as f64;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{}\"/>\n",
                height - margin - h,
                colors[si % colors.len()]
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            margin + group_w * (gi as f64 + 0.5),
            height - margin + 16.0
        ));
    }
    for (si, (name, _)) in series.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{name}</text>\n",
            width - margin - 120.0,
            margin + 16.0 * (si + 1) as f64,
            colors[si % colors.len()]
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt6_is_stable_and_compact() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(0.0621), "6.21000e-2");
        assert_eq!(fmt6(-1.5), "-1.50000e0");
    }
}
