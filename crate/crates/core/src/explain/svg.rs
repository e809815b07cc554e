//! Deterministic SVG 1.1 rendering of explanation artifacts.
//!
//! Lattice artifacts draw one cell per neuron at its coordinate: squares,
//! or hexagons in offset rows (odd rows shifted half a cell right). Numbers
//! are printed with fixed precision so output is byte-stable.

use super::treemap::CellClass;
use super::{Artifact, ArtifactDoc, Cell, ExplainError, TreemapLayout};
use crate::label::Label;
use crate::map::Coord;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lattice {
    Square,
    Hex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvgStyle {
    pub lattice: Lattice,
    /// Cell pitch in pixels.
    pub cell: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { lattice: Lattice::Square, cell: 24.0 }
    }
}

const MARGIN: f64 = 10.0;
const TITLE: f64 = 22.0;
const BENIGN: &str = "#3b6fb6";
const MALICIOUS: &str = "#c8352e";
const BRANCH: &str = "#e8c547";
const NONE: &str = "#bdbdbd";

pub fn render_svg(doc: &ArtifactDoc, style: &SvgStyle) -> Result<String, ExplainError> {
    Ok(render_artifact(&Artifact::from_doc(doc)?, style))
}

pub fn render_artifact(a: &Artifact, style: &SvgStyle) -> String {
    match a {
        Artifact::UMatrix(u) => {
            let heights: Vec<f64> = u.umatrix.cells.iter().map(|c| c.value).collect();
            let hi = heights.iter().copied().fold(0.0, f64::max);
            let title = format!("U-matrix, map {}", u.umatrix.map_id);
            let mut g = Grid::new(&u.umatrix.cells, style);
            let mut body = g.cells(&u.umatrix.cells, |h| ramp(if hi > 0.0 { h / hi } else { 0.0 }));
            for (i, &j) in u.starburst.next.iter().enumerate() {
                if i != j {
                    let (x1, y1) = g.center(u.umatrix.cells[i].coord);
                    let (x2, y2) = g.center(u.umatrix.cells[j].coord);
                    let _ = writeln!(
                        body,
                        r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#d62728" stroke-width="1.5"/>"##
                    );
                }
            }
            for (i, &c) in u.starburst.cluster.iter().enumerate() {
                if c == i {
                    let (x, y) = g.center(u.umatrix.cells[i].coord);
                    let _ = writeln!(body, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.50" fill="#d62728"/>"##);
                }
            }
            g.finish(&title, &body)
        }
        Artifact::FeatureHeatmap(h) => {
            let (lo, hi) = h.cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.value), hi.max(c.value)));
            let span = hi - lo;
            let mut g = Grid::new(&h.cells, style);
            let body = g.cells(&h.cells, |v| ramp(if span > 0.0 { (v - lo) / span } else { 0.0 }));
            g.finish(&format!("{}, map {}", h.feature_name, h.map_id), &body)
        }
        Artifact::LabelMap(l) => {
            let mut g = Grid::new(&l.cells, style);
            let body = g.cells(&l.cells, |c| {
                match (c.branch, c.label) {
                    (true, _) => BRANCH,
                    (false, Some(Label::Benign)) => BENIGN,
                    (false, Some(Label::Malicious)) => MALICIOUS,
                    (false, None) => NONE,
                }
                .to_string()
            });
            g.finish(&format!("Labels, map {}", l.map_id), &body)
        }
        Artifact::LocalExplanation(e) => {
            let names = names_or_index(&e.feature_names, e.significance.len());
            let rows: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(e.significance.iter().copied()).collect();
            bars(&format!("Local significance, {} via map {} neuron {}", e.label, e.map_id, e.bmu), &rows)
        }
        Artifact::GlobalSignificance(g) => {
            let rows: Vec<(&str, f64)> = g.ranking.iter().map(|f| (f.name.as_str(), f.score)).collect();
            bars("Global significance", &rows)
        }
        Artifact::Treemap(t) => treemap(t),
    }
}

fn names_or_index(names: &[String], n: usize) -> Vec<String> {
    if names.len() == n {
        names.to_vec()
    } else {
        (0..n).map(|i| format!("f{i}")).collect()
    }
}

struct Grid {
    lattice: Lattice,
    pitch: f64,
    r0: i32,
    c0: i32,
    width: f64,
    height: f64,
}

impl Grid {
    fn new<T>(cells: &[Cell<T>], style: &SvgStyle) -> Grid {
        let r0 = cells.iter().map(|c| c.coord.row).min().unwrap_or(0);
        let c0 = cells.iter().map(|c| c.coord.col).min().unwrap_or(0);
        let rows = cells.iter().map(|c| c.coord.row - r0 + 1).max().unwrap_or(0) as f64;
        let cols = cells.iter().map(|c| c.coord.col - c0 + 1).max().unwrap_or(0) as f64;
        let s = style.cell;
        let (w, h) = match style.lattice {
            Lattice::Square => (cols * s, rows * s),
            Lattice::Hex => ((cols + 0.5) * s, (rows - 1.0).max(0.0) * s * 0.75 * hex_h() + s * hex_h()),
        };
        Grid { lattice: style.lattice, pitch: s, r0, c0, width: w + 2.0 * MARGIN, height: h + 2.0 * MARGIN + TITLE }
    }

    fn center(&self, c: Coord) -> (f64, f64) {
        let s = self.pitch;
        let (r, col) = ((c.row - self.r0) as f64, (c.col - self.c0) as f64);
        match self.lattice {
            Lattice::Square => (MARGIN + (col + 0.5) * s, MARGIN + TITLE + (r + 0.5) * s),
            Lattice::Hex => {
                let shift = if c.row.rem_euclid(2) == 1 { 0.5 * s } else { 0.0 };
                (MARGIN + (col + 0.5) * s + shift, MARGIN + TITLE + s * hex_h() * (0.5 + 0.75 * r))
            }
        }
    }

    fn cells<T>(&mut self, cells: &[Cell<T>], fill: impl Fn(&T) -> String) -> String {
        let mut out = String::new();
        let s = self.pitch;
        for c in cells {
            let (x, y) = self.center(c.coord);
            let color = fill(&c.value);
            match self.lattice {
                Lattice::Square => {
                    let _ = writeln!(
                        out,
                        r##"<rect x="{:.2}" y="{:.2}" width="{s:.2}" height="{s:.2}" fill="{color}" stroke="#ffffff" stroke-width="0.5"><title>neuron {}</title></rect>"##,
                        x - s / 2.0,
                        y - s / 2.0,
                        c.id
                    );
                }
                Lattice::Hex => {
                    // Pointy-top hexagon with width equal to the pitch.
                    let r = s / 3f64.sqrt();
                    let pts: Vec<String> = (0..6)
                        .map(|k| {
                            let a = std::f64::consts::PI / 3.0 * k as f64 + std::f64::consts::PI / 6.0;
                            format!("{:.2},{:.2}", x + r * a.cos(), y + r * a.sin())
                        })
                        .collect();
                    let _ = writeln!(
                        out,
                        r##"<polygon points="{}" fill="{color}" stroke="#ffffff" stroke-width="0.5"><title>neuron {}</title></polygon>"##,
                        pts.join(" "),
                        c.id
                    );
                }
            }
        }
        out
    }

    fn finish(&self, title: &str, body: &str) -> String {
        document(self.width, self.height, title, body)
    }
}

/// Height of a pointy-top hexagon relative to its width.
fn hex_h() -> f64 {
    2.0 / 3f64.sqrt()
}

fn document(w: f64, h: f64, title: &str, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.2}\" height=\"{h:.2}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"#ffffff\"/>\n\
         <text x=\"{MARGIN:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n\
         {body}</svg>\n",
        MARGIN + 13.0,
        escape(title)
    )
}

fn bars(title: &str, rows: &[(&str, f64)]) -> String {
    const LABEL: f64 = 180.0;
    const BAR: f64 = 300.0;
    const ROW: f64 = 18.0;
    let w = 2.0 * MARGIN + LABEL + BAR + 50.0;
    let h = 2.0 * MARGIN + TITLE + ROW * rows.len() as f64;
    let mut body = String::new();
    for (i, (name, v)) in rows.iter().enumerate() {
        let y = MARGIN + TITLE + ROW * i as f64;
        let len = BAR * v.clamp(0.0, 1.0);
        let _ = writeln!(
            body,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"##,
            MARGIN + LABEL - 6.0,
            y + 12.0,
            escape(name)
        );
        let _ = writeln!(
            body,
            r##"<rect x="{:.2}" y="{:.2}" width="{len:.2}" height="{:.2}" fill="{BENIGN}"/>"##,
            MARGIN + LABEL,
            y + 2.0,
            ROW - 4.0
        );
        let _ = writeln!(
            body,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{v:.3}</text>"##,
            MARGIN + LABEL + len + 4.0,
            y + 12.0
        );
    }
    document(w, h, title, &body)
}

fn treemap(t: &TreemapLayout) -> String {
    let (ox, oy) = (MARGIN, MARGIN + TITLE);
    let mut body = String::new();
    for n in &t.neurons {
        let fill = match n.class {
            CellClass::Benign => BENIGN,
            CellClass::Malicious => MALICIOUS,
            CellClass::Branch => BRANCH,
            CellClass::Unlabeled => NONE,
        };
        let r = n.rect;
        let _ = writeln!(
            body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="#ffffff" stroke-width="0.5"><title>map {} neuron {} layer {} hits {}</title></rect>"##,
            ox + r.x,
            oy + r.y,
            r.w,
            r.h,
            n.map_id,
            n.neuron,
            n.depth,
            n.hit_count
        );
    }
    for m in &t.maps {
        let r = m.rect;
        let _ = writeln!(
            body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#202020" stroke-width="1"><title>map {} layer {}</title></rect>"##,
            ox + r.x,
            oy + r.y,
            r.w,
            r.h,
            m.map_id,
            m.depth
        );
    }
    document(t.width + 2.0 * MARGIN, t.height + 2.0 * MARGIN + TITLE, "Hierarchy treemap", &body)
}

/// White to dark blue.
fn ramp(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{global_explanation, label_map, u_matrix_artifact};
    use crate::map::{MapId, MapModel};

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#f7fbff");
        assert_eq!(ramp(1.0), "#08306b");
        assert_eq!(ramp(7.0), "#08306b");
    }

    #[test]
    fn escapes_names() {
        let g = global_explanation(&[1.0], &["proto=<tcp>&".to_string()]).unwrap();
        let svg = render_artifact(&Artifact::GlobalSignificance(g), &SvgStyle::default());
        assert!(svg.contains("proto=&lt;tcp&gt;&amp;"));
    }

    #[test]
    fn hex_and_square_differ_but_are_stable() {
        let m = MapModel::grid(MapId(3), 3, 4, 2, 0, |i| vec![i as f64 / 12.0, 0.5]).unwrap();
        let a = Artifact::UMatrix(u_matrix_artifact(&m));
        let sq = render_artifact(&a, &SvgStyle::default());
        let hex = render_artifact(&a, &SvgStyle { lattice: Lattice::Hex, ..Default::default() });
        assert_eq!(sq.matches("<rect").count(), 13);
        assert_eq!(hex.matches("<polygon").count(), 12);
        assert_eq!(sq, render_artifact(&a, &SvgStyle::default()));
        assert!(sq.starts_with("<?xml") && sq.ends_with("</svg>\n"));
        let l = render_artifact(&Artifact::LabelMap(label_map(&m)), &SvgStyle::default());
        assert_eq!(l.matches(NONE).count(), 12);
    }
}
