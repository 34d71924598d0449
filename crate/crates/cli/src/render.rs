//! SVG heatmaps and line plots from sweep tables, and raster field images.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use metaporous::solver::FieldSolution;
use num_complex::Complex64;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPart {
    /// Signed real part, blue-white-red.
    Real,
    /// Magnitude, grey levels.
    Magnitude,
}

/// Binary PPM (real part) or PGM (magnitude) image of `field`, top row
/// first. Rigid cells are drawn mid-grey; the colour scale is normalized to
/// the largest magnitude outside the absorbing layers.
pub fn field_ppm(sol: &FieldSolution, vals: &[Complex64], part: FieldPart) -> Vec<u8> {
    let (nx, ny) = (sol.nx, sol.ny);
    let norm = (0..nx * ny)
        .filter(|&c| !sol.absorbing[c] && !sol.rigid[c])
        .map(|c| vals[c].norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (magic, channels) = match part {
        FieldPart::Real => ("P6", 3),
        FieldPart::Magnitude => ("P5", 1),
    };
    let mut out = format!("{magic}\n{nx} {ny}\n255\n").into_bytes();
    out.reserve(nx * ny * channels);
    for j in (0..ny).rev() {
        for i in 0..nx {
            let c = j * nx + i;
            if sol.rigid[c] {
                out.extend(std::iter::repeat(128u8).take(channels));
                continue;
            }
            match part {
                FieldPart::Real => out.extend(diverging(vals[c].re / norm)),
                FieldPart::Magnitude => out.push(to_byte(vals[c].norm() / norm)),
            }
        }
    }
    out
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `v ∈ [-1, 1]` to blue (−1), white (0), red (+1).
fn diverging(v: f64) -> [u8; 3] {
    let v = v.clamp(-1.0, 1.0);
    if v >= 0.0 {
        [255, to_byte(1.0 - v), to_byte(1.0 - v)]
    } else {
        [to_byte(1.0 + v), to_byte(1.0 + v), 255]
    }
}

/// Perceptually ordered colour ramp for `t ∈ [0, 1]`.
pub fn ramp(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let u = x - k as f64;
    let mut c = [0u8; 3];
    for (ch, out) in c.iter_mut().enumerate() {
        *out = (STOPS[k][ch] + u * (STOPS[k + 1][ch] - STOPS[k][ch])).round() as u8;
    }
    c
}

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Parsed numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let headers: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Render("empty table".into()))?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Render(format!("row {}: {e}", n + 1)))?;
            if row.len() != headers.len() {
                return Err(CliError::Render(format!("row {} has {} fields, expected {}", n + 1, row.len(), headers.len())));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Render("table has no rows".into()));
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// The plotted quantity and the two axes picked for a sweep table.
#[derive(Debug, Clone)]
pub struct Surface {
    pub x_label: String,
    pub y_label: String,
    pub value_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[iy][ix]`, `NaN` where the table has no entry.
    pub values: Vec<Vec<f64>>,
}

const VALUE_COLUMNS: [&str; 3] = ["alpha", "n_r", "reflected_fraction"];

impl Surface {
    /// Frequency along x; along y the protrusion ratio when it varies,
    /// otherwise the incidence angle. Rows sharing both keys keep the first.
    pub fn from_table(t: &Table) -> Result<Self, CliError> {
        let fx = t.column("f_hz").ok_or_else(|| CliError::Render("table has no f_hz column".into()))?;
        let (vcol, vname) = VALUE_COLUMNS
            .iter()
            .find_map(|n| t.column(n).map(|c| (c, *n)))
            .ok_or_else(|| CliError::Render("table has no alpha, n_r or reflected_fraction column".into()))?;
        let distinct = |c: usize| {
            let mut v: Vec<f64> = t.rows.iter().map(|r| r[c]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let pcol = t.column("p_over_w").filter(|&c| distinct(c).len() > 1);
        let ycol = match (pcol, t.column("theta_deg")) {
            (Some(c), _) => Some((c, "p/w")),
            (None, Some(c)) => Some((c, "incidence angle (deg)")),
            (None, None) => t.column("p_over_w").map(|c| (c, "p/w")),
        };
        let xs = distinct(fx);
        let ys = ycol.map_or(vec![0.0], |(c, _)| distinct(c));
        let mut values = vec![vec![f64::NAN; xs.len()]; ys.len()];
        for r in &t.rows {
            let ix = xs.partition_point(|&x| x < r[fx]);
            let iy = ycol.map_or(0, |(c, _)| ys.partition_point(|&y| y < r[c]));
            if values[iy][ix].is_nan() {
                values[iy][ix] = r[vcol];
            }
        }
        Ok(Self {
            x_label: "frequency (Hz)".into(),
            y_label: ycol.map_or(String::new(), |(_, l)| l.to_string()),
            value_label: vname.to_string(),
            xs,
            ys,
            values,
        })
    }

    fn range(&self) -> (f64, f64) {
        let finite = self.values.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo.is_finite() {
            (lo, hi)
        } else {
            (0.0, 1.0)
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Cell heatmap with a colour bar whose ends are the data minimum and maximum.
pub fn heatmap_svg(s: &Surface) -> String {
    let (lo, hi) = s.range();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let cw = pw / s.xs.len() as f64;
    let ch = ph / s.ys.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    for (iy, row) in s.values.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            let fill = if v.is_finite() { hex(ramp((v - lo) / span)) } else { "#ffffff".into() };
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>{}, {}: {v}</title></rect>"#,
                LEFT + ix as f64 * cw,
                TOP + ph - (iy + 1) as f64 * ch,
                cw,
                ch,
                s.xs[ix],
                s.ys[iy],
            );
        }
    }
    axes(&mut out, s, cw, ch);
    // colour bar
    let bx = W - RIGHT + 20.0;
    let steps = 50;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            TOP + ph * (1.0 - (k + 1) as f64 / steps as f64),
            ph / steps as f64 + 0.5,
            hex(ramp(t))
        );
    }
    let _ = writeln!(out, r#"<text class="legend-max" x="{}" y="{}">{hi:.3}</text>"#, bx + 20.0, TOP + 8.0);
    let _ = writeln!(out, r#"<text class="legend-min" x="{}" y="{}">{lo:.3}</text>"#, bx + 20.0, TOP + ph);
    let _ = writeln!(out, r#"<text x="{bx}" y="{}">{}</text>"#, TOP + ph + 20.0, s.value_label);
    out.push_str("</svg>\n");
    out
}

fn axes(out: &mut String, s: &Surface, cw: f64, ch: f64) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let every = |n: usize| (n / 8).max(1);
    for (ix, x) in s.xs.iter().enumerate().step_by(every(s.xs.len())) {
        let _ = writeln!(
            out,
            r#"<text class="xtick" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + (ix as f64 + 0.5) * cw,
            TOP + ph + 15.0,
            fmt_tick(*x)
        );
    }
    for (iy, y) in s.ys.iter().enumerate().step_by(every(s.ys.len())) {
        let _ = writeln!(
            out,
            r#"<text class="ytick" x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            TOP + ph - (iy as f64 + 0.5) * ch + 4.0,
            fmt_tick(*y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        s.x_label
    );
    let _ = writeln!(
        out,
        r#"<text class="ylabel" transform="translate(15,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        s.y_label
    );
}

/// One polyline per y value of the surface, the value against frequency.
pub fn spectrum_svg(s: &Surface) -> String {
    let (lo, hi) = s.range();
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (x0, x1) = (s.xs[0], *s.xs.last().unwrap_or(&s.xs[0]));
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - x0) / xspan * pw;
    let py = |y: f64| TOP + ph - (y - lo) / (hi - lo) * ph;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for (iy, row) in s.values.iter().enumerate() {
        let colour = hex(ramp(if s.ys.len() > 1 { iy as f64 / (s.ys.len() - 1) as f64 } else { 0.0 }));
        let pts: Vec<String> = row
            .iter()
            .zip(&s.xs)
            .filter(|(v, _)| v.is_finite())
            .map(|(v, x)| format!("{:.2},{:.2}", px(*x), py(*v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{colour}">{} = {}</text>"#,
            W - RIGHT + 10.0,
            TOP + 14.0 * (iy + 1) as f64,
            s.y_label,
            fmt_tick(s.ys[iy])
        );
    }
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text class="ytick" x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 5.0,
            py(v) + 4.0
        );
    }
    for k in 0..=4 {
        let x = x0 + xspan * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text class="xtick" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + ph + 15.0,
            fmt_tick(x)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        s.x_label
    );
    let _ = writeln!(
        out,
        r#"<text class="ylabel" transform="translate(15,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        s.value_label
    );
    out.push_str("</svg>\n");
    out
}

/// Frequency in the first column, one column per series.
pub fn spectrum_csv(s: &Surface) -> String {
    let mut out = String::from("f_hz");
    for y in &s.ys {
        let _ = write!(out, ",{}={}", s.value_label, y);
    }
    out.push('\n');
    for (ix, x) in s.xs.iter().enumerate() {
        let _ = write!(out, "{x}");
        for row in &s.values {
            let _ = write!(out, ",{}", row[ix]);
        }
        out.push('\n');
    }
    out
}

/// Band means of the plotted value, keyed by the y axis.
pub fn row_means(s: &Surface) -> BTreeMap<String, f64> {
    s.ys
        .iter()
        .zip(&s.values)
        .map(|(y, row)| {
            let v: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
            (fmt_tick(*y), v.iter().sum::<f64>() / v.len().max(1) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Surface {
        Surface::from_table(&Table::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn uniform_table_gives_uniform_heatmap() {
        let s = table("f_hz,theta_deg,re_R,im_R,alpha\n500,0,0,0,1\n750,0,0,0,1\n500,15,0,0,1\n750,15,0,0,1\n500,30,0,0,1\n");
        let svg = heatmap_svg(&s);
        let fills: std::collections::HashSet<_> = svg
            .lines()
            .filter(|l| l.contains(r#"class="cell""#))
            .filter_map(|l| l.split("fill=\"").nth(1).map(|f| f[..7].to_string()))
            .collect();
        assert_eq!(fills.len(), 2, "one colour plus the blank cell");
        let max = svg.lines().find(|l| l.contains(r#"class="legend-max""#)).unwrap();
        assert!(max.ends_with(">1.000</text>"), "{max}");
    }

    #[test]
    fn two_by_two_heatmap() {
        let s = table("f_hz,theta_deg,re_R,im_R,alpha\n500,0,0,0,0.1\n1000,0,0,0,0.2\n500,45,0,0,0.3\n1000,45,0,0,0.4\n");
        let svg = heatmap_svg(&s);
        assert_eq!(svg.matches(r#"class="cell""#).count(), 4);
        for label in [">500<", ">1000<", ">0<", ">45<", "frequency (Hz)", "incidence angle (deg)"] {
            assert!(svg.contains(label), "{label}");
        }
    }

    #[test]
    fn protrusion_axis_wins_when_it_varies() {
        let s = table("p_over_w,f_hz,theta_deg,re_R,im_R,alpha\n0,500,0,0,0,0.5\n0.1,500,0,0,0,0.6\n");
        assert_eq!(s.y_label, "p/w");
        assert_eq!(s.ys, vec![0.0, 0.1]);
    }

    #[test]
    fn empty_tables_are_errors() {
        assert!(Table::parse("").is_err());
        assert!(Table::parse("f_hz,theta_deg,alpha\n").is_err());
        assert!(Table::parse("f_hz,alpha\n1,2,3\n").is_err());
    }

    #[test]
    fn spectrum_has_one_line_per_series() {
        let s = table("f_hz,theta_deg,re_R,im_R,alpha\n500,0,0,0,0.1\n1000,0,0,0,0.2\n500,45,0,0,0.3\n1000,45,0,0,0.4\n");
        assert_eq!(spectrum_svg(&s).matches("<polyline").count(), 2);
        let csv = spectrum_csv(&s);
        assert_eq!(csv.lines().next(), Some("f_hz,alpha=0,alpha=45"));
        assert_eq!(csv.lines().nth(2), Some("1000,0.2,0.4"));
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), [68, 1, 84]);
        assert_eq!(ramp(1.0), [253, 231, 37]);
        assert_eq!(diverging(0.0), [255, 255, 255]);
    }
}
