use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigensolver::Mesh;
use crate::error::{Error, Result};
use crate::geometry::{Continuum, Domain2D, Segment};

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRow {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

/// Writes one `x1,y1,x2,y2` row per segment.
pub fn write_segments(c: &Continuum, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in c.segments() {
        let (p, q) = (s.p(), s.q());
        w.serialize(SegmentRow {
            x1: p.x,
            y1: p.y,
            x2: q.x,
            y2: q.y,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_segments(path: &Path) -> Result<Continuum> {
    let mut segs = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: SegmentRow = row?;
        segs.push(Segment::from_coords(r.x1, r.y1, r.x2, r.y2)?);
    }
    Continuum::new(segs)
}

/// Reads a domain from TOML, either bare (`outer`, `holes`) or as the
/// `[domain]` table of an experiment config.
pub fn read_domain(path: &Path) -> Result<Domain2D> {
    #[derive(Deserialize)]
    struct Wrapped {
        domain: Domain2D,
    }
    let text = fs::read_to_string(path)?;
    let table: toml::Table = toml::from_str(&text)?;
    if table.contains_key("domain") {
        let w: Wrapped = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(w.domain)
    } else {
        table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }
}

/// Plain SVG 1.1 drawing: the outline of `Ω` as polygons, then one `<line>` per segment.
pub fn render_svg_string(c: &Continuum, omega: &Domain2D) -> String {
    const SIZE: f64 = 800.0;
    let b = omega.bbox().union(&c.bbox());
    let scale = SIZE / b.width().max(b.height());
    let pad = 10.0;
    let (w, h) = (b.width() * scale + 2.0 * pad, b.height() * scale + 2.0 * pad);
    let tx = |x: f64| pad + (x - b.min.x) * scale;
    let ty = |y: f64| pad + (b.max.y - y) * scale;
    let stroke = (0.6f64).min(200.0 / (c.len() as f64).sqrt().max(1.0));
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    for ring in omega.rings() {
        let pts: Vec<String> = ring.iter().map(|p| format!("{:.3},{:.3}", tx(p.x), ty(p.y))).collect();
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="#f4f4f4" stroke="#888" stroke-width="1"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="{stroke:.3}" stroke-linecap="round">"#);
    for s in c.segments() {
        let (p, q) = (s.p(), s.q());
        let _ = writeln!(
            out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            tx(p.x),
            ty(p.y),
            tx(q.x),
            ty(q.y)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub fn render_svg(c: &Continuum, omega: &Domain2D, path: &Path) -> Result<()> {
    fs::write(path, render_svg_string(c, omega))?;
    Ok(())
}

/// Nodal values as `x,y,u` rows.
pub fn write_nodal(mesh: &Mesh, values: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "u"])?;
    for (k, v) in values.iter().enumerate() {
        let p = mesh.position(k);
        w.write_record([p.x.to_string(), p.y.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes rows to CSV with a header derived from the row type.
pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let c = Domain2D::unit_square().boundary();
        write_segments(&c, &p).unwrap();
        let back = read_segments(&p).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_segment_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "x1,y1,x2,y2\n").unwrap();
        assert!(matches!(read_segments(&p), Err(Error::EmptyContinuum)));
    }

    #[test]
    fn svg_has_one_line_per_segment() {
        let sq = Domain2D::unit_square();
        let svg = render_svg_string(&sq.boundary(), &sq);
        assert_eq!(svg.matches("<line ").count(), 4);
        assert_eq!(svg.matches("<polygon ").count(), 1);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn domain_files() {
        let dir = tempfile::tempdir().unwrap();
        let bare = dir.path().join("d.toml");
        fs::write(&bare, "outer = [[0,0],[2,0],[2,1],[0,1]]\n").unwrap();
        assert_eq!(read_domain(&bare).unwrap().area(), 2.0);
        let wrapped = dir.path().join("c.toml");
        fs::write(&wrapped, "kind = \"x\"\n[domain]\nouter = [[0,0],[1,0],[0,1]]\n").unwrap();
        assert_eq!(read_domain(&wrapped).unwrap().area(), 0.5);
    }
}
