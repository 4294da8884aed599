//! CSV tables, JSON run records and Bloch-sphere SVG plots.
//!
//! Every writer is deterministic: identical input gives identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::state::BlochVector;

pub const SIG_DIGITS: usize = 12;

/// Formats `x` with at most 12 significant digits, in plain notation for
/// moderate exponents and scientific notation otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `x` rounded to the value that [`format_sig`] prints.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::validation(format!("line {line}: '{field}' is not a number")))
}

/// Table written as CSV with a fixed header; all cells after the first
/// `text_columns` are numeric.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub text_columns: usize,
    pub rows: Vec<(Vec<String>, Vec<f64>)>,
}

impl Table {
    pub fn new(header: &[&str], text_columns: usize) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            text_columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, text: Vec<String>, values: Vec<f64>) -> Result<()> {
        if text.len() != self.text_columns || text.len() + values.len() != self.header.len() {
            return Err(Error::validation("row does not match the table header"));
        }
        self.rows.push((text, values));
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::validation(format!("csv: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for (text, values) in &self.rows {
            let record = text.iter().cloned().chain(values.iter().map(|v| format_sig(*v)));
            w.write_record(record).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::validation(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str, text_columns: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let csv_err = |e: csv::Error| Error::validation(format!("csv: {e}"));
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut table = Table {
            header,
            text_columns,
            rows: Vec::new(),
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let text = rec.iter().take(text_columns).map(String::from).collect();
            let values = rec
                .iter()
                .skip(text_columns)
                .map(|f| parse_f64(f, i + 2))
                .collect::<Result<Vec<_>>>()?;
            table.push(text, values)?;
        }
        Ok(table)
    }
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Named sequence of Bloch vectors, drawn as markers joined by a guide line.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochSeries {
    pub label: String,
    pub points: Vec<BlochVector>,
}

const SVG_SIZE: f64 = 420.0;
const SPHERE_RADIUS: f64 = 160.0;
const VIEW_AZIMUTH: f64 = -0.9;
const VIEW_ELEVATION: f64 = 0.35;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Orthographic screen coordinates of a Bloch vector.
pub fn project(b: &BlochVector) -> (f64, f64) {
    let (sa, ca) = VIEW_AZIMUTH.sin_cos();
    let (se, ce) = VIEW_ELEVATION.sin_cos();
    let u = -b.x * sa + b.y * ca;
    let v = -(b.x * ca + b.y * sa) * se + b.z * ce;
    let c = SVG_SIZE / 2.0;
    (c + SPHERE_RADIUS * u, c - SPHERE_RADIUS * v)
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (i, (u, v)) in points.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{u:.2},{v:.2}");
    }
    s
}

fn circle_points(f: impl Fn(f64) -> BlochVector) -> String {
    polyline((0..=96).map(|k| project(&f(std::f64::consts::TAU * k as f64 / 96.0))))
}

/// Renders the series on a wireframe Bloch sphere.
pub fn render_bloch_svg(title: &str, series: &[BlochSeries]) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::validation("Bloch plot needs at least one point per series"));
    }
    let mut s = String::new();
    let size = SVG_SIZE;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14" font-family="sans-serif">{}</text>"#, escape(title));
    let c = size / 2.0;
    let _ = writeln!(
        s,
        r##"<circle cx="{c:.2}" cy="{c:.2}" r="{SPHERE_RADIUS:.2}" fill="none" stroke="#888"/>"##
    );
    let equator = circle_points(|t| BlochVector { x: t.cos(), y: t.sin(), z: 0.0 });
    let meridian = circle_points(|t| BlochVector { x: t.sin(), y: 0.0, z: t.cos() });
    for ring in [equator, meridian] {
        let _ = writeln!(
            s,
            r##"<polyline points="{ring}" fill="none" stroke="#ccc" stroke-dasharray="3,3"/>"##
        );
    }
    for (label, axis) in [
        ("x", BlochVector { x: 1.0, y: 0.0, z: 0.0 }),
        ("y", BlochVector { x: 0.0, y: 1.0, z: 0.0 }),
        ("|0>", BlochVector { x: 0.0, y: 0.0, z: 1.0 }),
    ] {
        let (u, v) = project(&axis);
        let _ = writeln!(s, r##"<line x1="{c:.2}" y1="{c:.2}" x2="{u:.2}" y2="{v:.2}" stroke="#aaa"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{}</text>"#,
            u + 4.0,
            v - 4.0,
            escape(label)
        );
    }
    for (k, series) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let line = polyline(series.points.iter().map(project));
        let _ = writeln!(s, r#"<g class="series" data-label="{}">"#, escape(&series.label));
        let _ = writeln!(s, r#"<polyline points="{line}" fill="none" stroke="{color}"/>"#);
        for b in &series.points {
            let (u, v) = project(b);
            let _ = writeln!(s, r#"<circle class="pt" cx="{u:.2}" cy="{v:.2}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text x="10" y="{:.2}" font-size="12" font-family="sans-serif" fill="{color}">{}</text>"#,
            size - 10.0 - 16.0 * k as f64,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn write_bloch_svg(path: &Path, title: &str, series: &[BlochSeries]) -> Result<()> {
    write_text(path, &render_bloch_svg(title, series)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(12000.0), "12000");
        assert_eq!(format_sig(1.23456789012345e-9), "1.23456789012e-9");
        assert_eq!(format_sig(-2.5e15), "-2.5e15");
        assert_eq!(format_sig(0.96571144), "0.96571144");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [std::f64::consts::PI, 1e-7 / 3.0, 0.999999999999999, 123456.7890123456] {
            let r = round_sig(x);
            assert_eq!(round_sig(r), r);
            assert_eq!(format_sig(r), format_sig(x));
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["state", "p", "f"], 1);
        t.push(vec!["x".into()], vec![round_sig(0.1), round_sig(2.0f64.sqrt())]).unwrap();
        t.push(vec!["0".into()], vec![0.94, 1.0]).unwrap();
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("state,p,f\n"));
        assert_eq!(Table::from_csv(&text, 1).unwrap(), t);
        assert!(t.push(vec![], vec![1.0]).is_err());
    }

    #[test]
    fn svg_pole_marker() {
        let series = [BlochSeries {
            label: "pole".into(),
            points: vec![BlochVector { x: 0.0, y: 0.0, z: 1.0 }],
        }];
        let svg = render_bloch_svg("t", &series).unwrap();
        assert_eq!(svg.matches(r#"class="pt""#).count(), 1);
        let (u, v) = project(&series[0].points[0]);
        assert_eq!(u, SVG_SIZE / 2.0);
        assert!(svg.contains(&format!(r#"cx="{u:.2}" cy="{v:.2}""#)));
        assert_eq!(svg, render_bloch_svg("t", &series).unwrap());
    }

    #[test]
    fn svg_rejects_empty() {
        assert!(render_bloch_svg("t", &[]).is_err());
        let empty = [BlochSeries { label: "e".into(), points: vec![] }];
        assert!(render_bloch_svg("t", &empty).is_err());
    }
}
