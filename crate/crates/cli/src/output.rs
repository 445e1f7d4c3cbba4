//! Artifacts, the run manifest and SVG rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Format;

pub const MANIFEST: &str = "manifest.json";

/// A file to be written, held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub format: Format,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Artifacts {
    items: Vec<Artifact>,
}

impl Artifacts {
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.push(name, Format::Json, bytes);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().context("flushing CSV buffer")?;
        self.push(name, Format::Csv, bytes);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, doc: String) {
        self.push(name, Format::Svg, doc.into_bytes());
    }

    fn push(&mut self, name: &str, format: Format, bytes: Vec<u8>) {
        self.items.push(Artifact {
            name: name.to_string(),
            format,
            bytes,
        });
    }

    pub fn names(&self) -> Vec<&str> {
        self.items.iter().map(|a| a.name.as_str()).collect()
    }

    /// Keeps the artifacts whose format was requested.
    pub fn select(self, formats: &[Format]) -> Vec<Artifact> {
        self.items
            .into_iter()
            .filter(|a| formats.contains(&a.format))
            .collect()
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub schema_version: u32,
    pub subcommand: &'static str,
    pub seed: u64,
    pub workers: usize,
    pub config: serde_json::Value,
    pub status: String,
    pub files: Vec<FileEntry>,
    pub elapsed_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Writes the artifacts and then the manifest, one file at a time.
pub fn write_all(dir: &Path, artifacts: &[Artifact], mut manifest: Manifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    manifest.files.clear();
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
        manifest.files.push(FileEntry {
            name: a.name.clone(),
            bytes: a.bytes.len(),
            sha256: sha256_hex(&a.bytes),
        });
    }
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join(MANIFEST), bytes).context("writing manifest")?;
    Ok(())
}

/// Minimal line plot.
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
    equal_aspect: bool,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 60.0;

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            equal_aspect: false,
        }
    }

    pub fn equal_aspect(mut self) -> Self {
        self.equal_aspect = true;
        self
    }

    pub fn line(&mut self, label: &str, pts: Vec<(f64, f64)>) {
        let pts: Vec<(f64, f64)> = pts
            .into_iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if !pts.is_empty() {
            self.series.push((label.into(), pts));
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (_, pts) in &self.series {
            for &(x, y) in pts {
                b.0 = b.0.min(x);
                b.1 = b.1.max(x);
                b.2 = b.2.min(y);
                b.3 = b.3.max(y);
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let w = (hi - lo).max(1e-12);
            (lo - 0.05 * w, hi + 0.05 * w)
        };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        if !self.equal_aspect {
            return (x0, x1, y0, y1);
        }
        // widen the narrower axis so that one unit has the same length on both
        let sx = (x1 - x0) / (W - 2.0 * M);
        let sy = (y1 - y0) / (H - 2.0 * M);
        let s = sx.max(sy);
        let cx = 0.5 * (x0 + x1);
        let cy = 0.5 * (y0 + y1);
        let hx = 0.5 * s * (W - 2.0 * M);
        let hy = 0.5 * s * (H - 2.0 * M);
        (cx - hx, cx + hx, cy - hy, cy + hy)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let mut s = svg_header(&self.title);
        let _ = writeln!(
            s,
            r##"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            W - 2.0 * M,
            H - 2.0 * M
        );
        for (k, (label, pts)) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let mut d = String::new();
            for (i, &(x, y)) in pts.iter().enumerate() {
                let _ = write!(
                    d,
                    "{}{:.2},{:.2}",
                    if i == 0 { "M" } else { " L" },
                    px(x),
                    py(y)
                );
            }
            let _ = writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" fill="{colour}">{}</text>"#,
                W - M + 4.0,
                M + 14.0 * (k as f64 + 1.0),
                escape(label)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        for (v, anchor, x, y) in [
            (x0, "start", M, H - M + 16.0),
            (x1, "end", W - M, H - M + 16.0),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#
            );
        }
        for (v, y) in [(y0, H - M), (y1, M + 10.0)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{v:.3}</text>"#,
                M - 4.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"{}\" y=\"30\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        escape(title),
        W / 2.0,
        escape(title)
    )
}

/// Coloured cell grid; `None` cells are drawn hatched grey.
pub fn heatmap(title: &str, xs: &[f64], ts: &[f64], values: &[Vec<Option<usize>>]) -> String {
    let mut s = svg_header(title);
    let nx = xs.len().max(1) as f64;
    let nt = ts.len().max(1) as f64;
    let cw = (W - 2.0 * M) / nx;
    let ch = (H - 2.0 * M) / nt;
    for (it, row) in values.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            let fill = match v {
                Some(g) => PALETTE[g % PALETTE.len()],
                None => "#bbbbbb",
            };
            let x = M + ix as f64 * cw;
            let y = H - M - (it as f64 + 1.0) * ch;
            let _ = writeln!(
                s,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}" stroke="#fff"/>"##
            );
            let label = v.map_or("-".to_string(), |g| g.to_string());
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label}</text>"#,
                x + cw / 2.0,
                y + ch / 2.0 + 4.0
            );
        }
    }
    for (ix, x) in xs.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="10" text-anchor="middle">{x:.3}</text>"#,
            M + (ix as f64 + 0.5) * cw,
            H - M + 16.0
        );
    }
    for (it, t) in ts.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="10" text-anchor="end">{t:.3}</text>"#,
            M - 4.0,
            H - M - (it as f64 + 0.5) * ch + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">x</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(s, r#"<text x="15" y="{}" font-size="12">t</text>"#, H / 2.0);
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_crlf_and_quotes() {
        let mut a = Artifacts::default();
        a.csv("t.csv", &["a", "b"], &[vec!["1".into(), "x,y".into()]])
            .unwrap();
        let out = a.select(&[Format::Csv]);
        assert_eq!(out[0].bytes, b"a,b\r\n1,\"x,y\"\r\n");
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn plot_is_well_formed() {
        let mut p = Plot::new("a < b", "x", "y");
        p.line("s", vec![(0.0, 0.0), (1.0, 2.0)]);
        let svg = p.render();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
