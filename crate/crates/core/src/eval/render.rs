use std::fmt::Write as _;
use std::path::Path;

use super::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::label::{ClassLabel, N_CLASSES};

const CSV_CORNER: &str = "true\\predicted";

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from(CSV_CORNER);
    for l in ClassLabel::ALL {
        out.push(',');
        out.push_str(l.name());
    }
    out.push('\n');
    for (l, row) in ClassLabel::ALL.iter().zip(&cm.counts) {
        out.push_str(l.name());
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix> {
    let bad = |why: &str| Error::MalformedHeader(format!("confusion CSV: {why}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty"))?;
    let expected: Vec<&str> = std::iter::once(CSV_CORNER).chain(ClassLabel::ALL.iter().map(|l| l.name())).collect();
    if header.split(',').collect::<Vec<_>>() != expected {
        return Err(bad("unexpected header"));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, label) in ClassLabel::ALL.iter().enumerate() {
        let line = lines.next().ok_or_else(|| bad("missing row"))?;
        let mut cells = line.split(',');
        if cells.next() != Some(label.name()) {
            return Err(bad("row label out of order"));
        }
        for j in 0..N_CLASSES {
            cm.counts[i][j] = cells
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| bad("non-integer cell"))?;
        }
        if cells.next().is_some() {
            return Err(bad("extra cells"));
        }
    }
    if lines.next().is_some() {
        return Err(bad("extra rows"));
    }
    Ok(cm)
}

/// Heatmap shaded by each cell's share of its true-class row.
pub fn confusion_svg(cm: &ConfusionMatrix) -> String {
    const CELL: usize = 90;
    const LEFT: usize = 110;
    const TOP: usize = 70;
    let size = CELL * N_CLASSES;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = LEFT + size + 20,
        h = TOP + size + 50
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">predicted</text>"#,
        LEFT + size / 2
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {y})">true</text>"#,
        y = TOP + size / 2
    );
    for (k, l) in ClassLabel::ALL.iter().enumerate() {
        let c = k * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            LEFT + c,
            TOP - 10,
            l.name()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="12">{}</text>"#,
            LEFT - 8,
            TOP + c + 4,
            l.name()
        );
    }
    for i in 0..N_CLASSES {
        let row = cm.row_total(i);
        for j in 0..N_CLASSES {
            let v = cm.counts[i][j];
            let share = if row == 0 { 0.0 } else { v as f64 / row as f64 };
            let shade = (255.0 - 200.0 * share).round() as u8;
            let (x, y) = (LEFT + j * CELL, TOP + i * CELL);
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({shade},{shade},255)" stroke="#444"/>"##
            );
            let ink = if share > 0.6 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="18" fill="{ink}">{v}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 6
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the CSV table and the SVG heatmap atomically.
pub fn render_confusion(cm: &ConfusionMatrix, csv_path: &Path, svg_path: &Path) -> Result<()> {
    let csv = confusion_csv(cm);
    write_atomic(csv_path, |w| w.write_all(csv.as_bytes()))?;
    let svg = confusion_svg(cm);
    write_atomic(svg_path, |w| w.write_all(svg.as_bytes()))
}
