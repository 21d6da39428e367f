//! Plain SVG output: ranking bar chart and confusion heatmap.

use std::fmt::Write as _;

use crate::causality::GcRanking;
use crate::evaluate::NormalizedMatrix;
use crate::ingest::SeverityClass;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const BAR_HEIGHT: f64 = 18.0;
const BAR_GAP: f64 = 6.0;
const LABEL_WIDTH: f64 = 180.0;
const PLOT_WIDTH: f64 = 420.0;

/// Horizontal bars in rank order, longest at the top.
pub fn ranking_bar_chart(ranking: &GcRanking, title: &str) -> String {
    let n = ranking.scores.len();
    let top = 40.0;
    let height = top + n as f64 * (BAR_HEIGHT + BAR_GAP) + 40.0;
    let width = LABEL_WIDTH + PLOT_WIDTH + 90.0;
    let max_g = ranking.scores.iter().map(|s| s.g).fold(0.0, f64::max);
    let scale = if max_g > 0.0 { PLOT_WIDTH / max_g } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, score) in ranking.scores.iter().enumerate() {
        let y = top + i as f64 * (BAR_HEIGHT + BAR_GAP);
        let w = score.g * scale;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LABEL_WIDTH - 8.0,
            y + BAR_HEIGHT * 0.75,
            escape(&score.feature)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LABEL_WIDTH:.1}" y="{y:.1}" width="{w:.2}" height="{BAR_HEIGHT:.1}" fill="#4c72b0"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{:.5}</text>"#,
            LABEL_WIDTH + w + 4.0,
            y + BAR_HEIGHT * 0.75,
            score.g
        );
    }
    let axis_y = top + n as f64 * (BAR_HEIGHT + BAR_GAP);
    let _ = writeln!(
        s,
        r#"<line x1="{LABEL_WIDTH:.1}" y1="{:.1}" x2="{LABEL_WIDTH:.1}" y2="{axis_y:.1}" stroke="black"/>"#,
        top - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Granger causality score</text>"#,
        LABEL_WIDTH + PLOT_WIDTH / 2.0,
        axis_y + 24.0
    );
    s.push_str("</svg>\n");
    s
}

/// White to dark blue.
fn cell_colour(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

const CELL: f64 = 90.0;

/// 3x3 heatmap of a row-normalized confusion matrix with two-decimal labels.
pub fn confusion_heatmap(matrix: &NormalizedMatrix, title: &str) -> String {
    let left = 90.0;
    let top = 60.0;
    let width = left + 3.0 * CELL + 30.0;
    let height = top + 3.0 * CELL + 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (r, row) in matrix.values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let x = left + c as f64 * CELL;
            let y = top + r as f64 * CELL;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{CELL:.1}" height="{CELL:.1}" fill="{}" stroke="white"/>"#,
                cell_colour(v)
            );
            let ink = if v > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{ink}">{v:.2}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 5.0
            );
        }
    }
    for cls in SeverityClass::ALL {
        let i = cls.index() as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 8.0,
            top + i * CELL + CELL / 2.0 + 5.0,
            cls.label()
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + i * CELL + CELL / 2.0,
            top - 8.0,
            cls.label()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Predicted</text>"#,
        left + 1.5 * CELL,
        top + 3.0 * CELL + 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">True</text>"#,
        top + 1.5 * CELL,
        top + 1.5 * CELL
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_nine_cells_and_labels() {
        let m = NormalizedMatrix {
            values: [[0.5, 0.25, 0.25], [0.0, 1.0, 0.0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
            empty_rows: [false; 3],
        };
        let svg = confusion_heatmap(&m, "DT <full>");
        assert_eq!(svg.matches("<rect x=").count(), 9);
        assert!(svg.contains(">0.25<") && svg.contains(">0.33<") && svg.contains(">1.00<"));
        for l in ["PDO", "BC", "KA"] {
            assert_eq!(svg.matches(&format!(">{l}<")).count(), 2);
        }
        assert!(svg.contains("DT &lt;full&gt;"));
    }

    #[test]
    fn colour_ends() {
        assert_eq!(cell_colour(0.0), "#f7fbff");
        assert_eq!(cell_colour(1.0), "#08306b");
    }
}
