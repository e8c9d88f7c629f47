//! SVG heatmap of a normalized confusion matrix.
//!
//! Cells are drawn row-major, rows = true class (top to bottom), columns =
//! predicted class (left to right). A value `v` in [0, 1] is filled with
//! `rgb(255·(1-v), 255·(1-v), 255)`: white at 0, pure blue at 1.

use std::fmt::Write;

const CELL: usize = 36;
const MARGIN: usize = 90;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn confusion_svg(matrix: &[Vec<f64>], labels: &[String], title: &str) -> String {
    let k = matrix.len();
    let size = MARGIN + k * CELL + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        "<!-- rows: true class; columns: predicted class; fill rgb(255(1-v),255(1-v),255) -->"
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="14" font-size="12">{}</text>"#,
        escape(title)
    );
    for (i, row) in matrix.iter().enumerate() {
        let y = MARGIN + i * CELL;
        if let Some(l) = labels.get(i) {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                MARGIN - 4,
                y + CELL / 2 + 3,
                escape(l)
            );
        }
        for (j, &v) in row.iter().enumerate() {
            let x = MARGIN + j * CELL;
            let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({shade},{shade},255)" stroke="gray"><title>{v:.4}</title></rect>"#
            );
            let ink = if v > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{:.2}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 3,
                v
            );
        }
    }
    for (j, l) in labels.iter().enumerate().take(k) {
        let x = MARGIN + j * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="start" transform="rotate(-60 {x} {})">{}</text>"#,
            MARGIN - 4,
            MARGIN - 4,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rect_per_cell() {
        let m = vec![vec![1.0, 0.0], vec![0.25, 0.75]];
        let svg = confusion_svg(&m, &["a".into(), "b<c".into()], "t");
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("rgb(0,0,255)"));
        assert!(svg.contains("rgb(255,255,255)"));
        assert!(svg.contains("b&lt;c"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
