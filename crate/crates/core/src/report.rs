//! CSV and SVG emission for command-line reports.
//!
//! CSV files are the authoritative outputs; the SVG plots are dependency-free
//! convenience views (line charts and heat maps) over the same data.

use crate::geometry::{FeasibleRegion, SensitivityField};
use crate::infer::ErrorMap;

fn push_num(out: &mut String, v: f64) {
    if v.is_finite() {
        out.push_str(&format!("{v}"));
    } else if v.is_nan() {
        out.push_str("nan");
    } else if v > 0.0 {
        out.push_str("inf");
    } else {
        out.push_str("-inf");
    }
}

fn csv_line(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_num(out, *v);
    }
    out.push('\n');
}

/// `x[,y],value` rows of a sensitivity field.
pub fn sensitivity_to_csv(field: &SensitivityField) -> String {
    let mut out = String::new();
    out.push_str(if field.dimensionality == 2 { "x_mm,y_mm,value\n" } else { "x_mm,value\n" });
    for (p, v) in field.points.iter().zip(&field.values) {
        if field.dimensionality == 2 {
            csv_line(&mut out, &[p[0], p[1], *v]);
        } else {
            csv_line(&mut out, &[p[0], *v]);
        }
    }
    out
}

/// `x[,y],value` rows of the feasible cells; value is the center of the
/// consistent force interval at the cell.
pub fn feasible_region_to_csv(region: &FeasibleRegion, two_d: bool) -> String {
    let mut out = String::new();
    out.push_str(if two_d { "x_mm,y_mm,value\n" } else { "x_mm,value\n" });
    for c in &region.cells {
        let value = 0.5 * (c.force_lo + c.force_hi);
        if two_d {
            csv_line(&mut out, &[c.x, c.y, value]);
        } else {
            csv_line(&mut out, &[c.x, value]);
        }
    }
    out
}

/// Position profile of sigma and sensitivity along a 1D device:
/// `x_mm,sigma_p_mm,sigma_f_N,f_s_N`.
pub fn profile_to_csv(rows: &[(f64, f64, f64, f64)]) -> String {
    let mut out = String::from("x_mm,sigma_p_mm,sigma_f_N,f_s_N\n");
    for &(x, sp, sf, fs) in rows {
        csv_line(&mut out, &[x, sp, sf, fs]);
    }
    out
}

/// `force_N,omega_theory,omega_ml` curve for theory/ML comparison plots.
pub fn omega_curve_to_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("force_N,omega_theory,omega_ml\n");
    for &(f, t, m) in rows {
        csv_line(&mut out, &[f, t, m]);
    }
    out
}

/// `x[,y],band,position_rmse_mm,force_rmse_N,count` rows of an error map.
pub fn error_map_to_csv(map: &ErrorMap) -> String {
    let mut out = String::new();
    out.push_str(if map.dimensionality == 2 {
        "x_mm,y_mm,band,position_rmse_mm,force_rmse_N,count\n"
    } else {
        "x_mm,band,position_rmse_mm,force_rmse_N,count\n"
    });
    for e in &map.entries {
        if map.dimensionality == 2 {
            csv_line(
                &mut out,
                &[e.x, e.y, e.band as f64, e.rmse_position, e.rmse_force, e.count as f64],
            );
        } else {
            csv_line(&mut out, &[e.x, e.band as f64, e.rmse_position, e.rmse_force, e.count as f64]);
        }
    }
    out
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 440.0;
const MARGIN: f64 = 60.0;
const SERIES_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn finite_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Multi-series line chart. Non-finite samples break the polyline.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let (x_lo, x_hi) = finite_bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y_lo, y_hi) = finite_bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (PLOT_W - 2.0 * MARGIN);
    let sy = |y: f64| PLOT_H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (PLOT_H - 2.0 * MARGIN);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        PLOT_W / 2.0,
        xml_escape(title)
    );
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{lb}\" text-anchor=\"middle\" font-size=\"12\">{xl}</text>\n\
         <text x=\"16\" y=\"{cy}\" transform=\"rotate(-90 16 {cy})\" text-anchor=\"middle\" font-size=\"12\">{yl}</text>\n\
         <text x=\"{m}\" y=\"{lb2}\" text-anchor=\"middle\" font-size=\"10\">{x0:.4}</text>\n\
         <text x=\"{r}\" y=\"{lb2}\" text-anchor=\"middle\" font-size=\"10\">{x1:.4}</text>\n\
         <text x=\"{m2}\" y=\"{b}\" text-anchor=\"end\" font-size=\"10\">{y0:.4}</text>\n\
         <text x=\"{m2}\" y=\"{t}\" text-anchor=\"end\" font-size=\"10\">{y1:.4}</text>\n",
        m = MARGIN,
        m2 = MARGIN - 6.0,
        b = PLOT_H - MARGIN,
        t = MARGIN,
        r = PLOT_W - MARGIN,
        cx = PLOT_W / 2.0,
        cy = PLOT_H / 2.0,
        lb = PLOT_H - 18.0,
        lb2 = PLOT_H - MARGIN + 16.0,
        xl = xml_escape(x_label),
        yl = xml_escape(y_label),
        x0 = x_lo,
        x1 = x_hi,
        y0 = y_lo,
        y1 = y_hi,
    ));
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                path.push_str(if pen_down { "L" } else { "M" });
                path.push_str(&format!("{:.2},{:.2} ", sx(x), sy(y)));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        svg.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            PLOT_W - MARGIN + 4.0,
            MARGIN + 14.0 * si as f64,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Blue-to-red ramp; NaN and infinities render gray.
fn heat_color(t: f64) -> String {
    if !t.is_finite() {
        return "#999999".to_string();
    }
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (
            (40.0 + 215.0 * u) as u8,
            (60.0 + 170.0 * u) as u8,
            (150.0 - 20.0 * u) as u8,
        )
    } else {
        let u = (t - 0.5) / 0.5;
        ((255.0) as u8, (230.0 - 190.0 * u) as u8, (130.0 - 100.0 * u) as u8)
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat map over a regular lattice (`values` row-major, `ny` rows of `nx`).
pub fn svg_heatmap(
    title: &str,
    nx: usize,
    ny: usize,
    extent: (f64, f64, f64, f64),
    values: &[f64],
) -> String {
    assert_eq!(values.len(), nx * ny, "values must fill the lattice");
    let (lo, hi) = finite_bounds(values.iter().copied());
    let (x0, x1, y0, y1) = extent;
    let cell_w = (PLOT_W - 2.0 * MARGIN) / nx as f64;
    let cell_h = (PLOT_H - 2.0 * MARGIN) / ny as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        PLOT_W / 2.0,
        xml_escape(title)
    );
    for iy in 0..ny {
        for ix in 0..nx {
            let v = values[iy * nx + ix];
            let t = (v - lo) / (hi - lo).max(1e-300);
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                MARGIN + ix as f64 * cell_w,
                PLOT_H - MARGIN - (iy + 1) as f64 * cell_h,
                cell_w + 0.5,
                cell_h + 0.5,
                heat_color(t)
            ));
        }
    }
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{lb}\" font-size=\"10\">x: [{x0:.3}, {x1:.3}] mm, y: [{y0:.3}, {y1:.3}] mm, \
         value: [{lo:.4}, {hi:.4}]</text>\n</svg>\n",
        m = MARGIN,
        lb = PLOT_H - 18.0,
    ));
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_emits_inf_markers() {
        let mut s = String::new();
        csv_line(&mut s, &[1.0, f64::INFINITY, f64::NAN]);
        assert_eq!(s, "1,inf,nan\n");
    }

    #[test]
    fn line_chart_is_well_formed() {
        let svg = svg_line_chart(
            "sigma vs x",
            "x (mm)",
            "sigma (mm)",
            &[("a".to_string(), vec![(0.0, 1.0), (1.0, 2.0), (f64::INFINITY, 3.0), (2.0, 1.5)])],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("sigma vs x"));
    }

    #[test]
    fn heatmap_counts_cells() {
        let svg = svg_heatmap("f", 3, 2, (0.0, 3.0, 0.0, 2.0), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(svg.matches("<rect").count(), 7); // 6 cells + background
    }
}
