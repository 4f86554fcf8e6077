//! Self-contained SVG line plots of CSV columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub logy: bool,
    /// One polyline per distinct value of this column.
    pub group: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Reads the series a spec selects; rows with an empty or non-numeric x or y are skipped.
pub fn read_series(csv_text: &str, spec: &PlotSpec) -> Result<Vec<Series>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyData("CSV has no header".into()));
    }
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let xi = col(&spec.x)?;
    let yi: Vec<usize> = spec.y.iter().map(|y| col(y)).collect::<Result<_>>()?;
    let gi = spec.group.as_deref().map(col).transpose()?;
    let mut series: Vec<Series> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let Ok(x) = rec.get(xi).unwrap_or("").parse::<f64>() else { continue };
        let g = gi.map(|i| rec.get(i).unwrap_or("").to_string());
        for (k, &i) in yi.iter().enumerate() {
            let Ok(y) = rec.get(i).unwrap_or("").parse::<f64>() else { continue };
            if spec.logy && !(y > 0.0) {
                continue;
            }
            let label = match &g {
                Some(g) if spec.y.len() > 1 => format!("{} {}={g}", spec.y[k], spec.group.as_deref().unwrap_or("")),
                Some(g) => format!("{}={g}", spec.group.as_deref().unwrap_or("")),
                None => spec.y[k].clone(),
            };
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((x, y)),
                None => series.push(Series { label, points: vec![(x, y)] }),
            }
        }
    }
    if series.is_empty() {
        return Err(Error::EmptyData(format!("no numeric rows for x = {} and y = {}", spec.x, spec.y.join(", "))));
    }
    Ok(series)
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

/// Evenly spaced "nice" ticks covering [lo, hi].
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

pub fn render_svg(series: &[Series], spec: &PlotSpec) -> String {
    let fy = |y: f64| if spec.logy { y.log10() } else { y };
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(fy(y));
        y1 = y1.max(fy(y));
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#, num(LEFT), num(TOP), num(pw), num(ph));
    for t in linear_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#ddd"/>"##, num(x), num(TOP), num(TOP + ph));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(x), num(TOP + ph + 16.0), tick_label(t));
    }
    let yticks: Vec<f64> = if spec.logy {
        let ticks: Vec<f64> = (y0.ceil() as i64..=y1.floor() as i64).map(|e| e as f64).collect();
        if ticks.is_empty() {
            linear_ticks(y0, y1)
        } else {
            ticks
        }
    } else {
        linear_ticks(y0, y1)
    };
    for t in yticks {
        let y = sy(t);
        let label = if spec.logy { format!("1e{}", num(t)) } else { tick_label(t) };
        let _ = writeln!(s, r##"<line x1="{1}" y1="{0}" x2="{2}" y2="{0}" stroke="#ddd"/>"##, num(y), num(LEFT), num(LEFT + pw));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, num(LEFT - 6.0), num(y + 4.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(LEFT + pw / 2.0), num(HEIGHT - 10.0), escape(&spec.x));
    let ylabel = if spec.logy { format!("{} (log)", spec.y.join(", ")) } else { spec.y.join(", ") };
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        num(TOP + ph / 2.0),
        escape(&ylabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = ser.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(fy(y))))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}"/>"#, num(sx(x)), num(sy(fy(y))));
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/>"#, num(lx), num(ly), num(lx + 18.0));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, num(lx + 24.0), num(ly + 4.0), escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Reads `csv_path`, renders and writes `out`.
pub fn plot_file(csv_path: &Path, spec: &PlotSpec, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyData(format!("{} is empty", csv_path.display())));
    }
    let series = read_series(&text, spec)?;
    std::fs::write(out, render_svg(&series, spec)).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(y: &[&str], group: Option<&str>, logy: bool) -> PlotSpec {
        PlotSpec { x: "r".into(), y: y.iter().map(|s| s.to_string()).collect(), logy, group: group.map(String::from) }
    }

    const CSV: &str = "ell,r,mass\n8,1,0.1\n8,2,0.01\n12,1,0.2\n12,2,\n12,3,0.002\n";

    #[test]
    fn one_series_per_group() {
        let s = read_series(CSV, &spec(&["mass"], Some("ell"), true)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, "ell=8");
        assert_eq!(s[1].points, vec![(1.0, 0.2), (3.0, 0.002)]);
        let svg = render_svg(&s, &spec(&["mass"], Some("ell"), true));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, render_svg(&s, &spec(&["mass"], Some("ell"), true)));
    }

    #[test]
    fn missing_column_and_empty_data() {
        assert!(matches!(read_series(CSV, &spec(&["nope"], None, false)), Err(Error::MissingColumn(c)) if c == "nope"));
        assert!(matches!(read_series("r,mass\n", &spec(&["mass"], None, false)), Err(Error::EmptyData(_))));
        assert!(read_series("", &spec(&["mass"], None, false)).is_err());
    }

    #[test]
    fn ticks_cover_range() {
        let t = linear_ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.len() >= 3 && t.len() <= 7);
        assert_eq!(num(1.5), "1.5");
        assert_eq!(num(2.0), "2");
    }
}
