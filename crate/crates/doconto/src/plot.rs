//! Static SVG scatter plots of the 2-d header embedding, colored by cluster.

use std::io::Write;
use std::path::Path;

use crate::manifold::{ClusterAssignment, LowDimEmbedding};

pub const PALETTE_SIZE: usize = 50;

#[derive(Debug, Clone)]
pub struct PlotConfig {
    pub width: f64,
    pub height: f64,
    pub point_radius: f64,
    /// fraction of the viewport kept blank around the data extent
    pub margin: f64,
    /// draw each cluster's medoid label next to its centroid
    pub medoid_labels: Vec<(usize, String)>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig {
            width: 800.0,
            height: 600.0,
            point_radius: 4.0,
            margin: 0.05,
            medoid_labels: Vec::new(),
        }
    }
}

/// Fixed 50-color palette; cluster ids wrap around.
pub fn palette_color(index: usize) -> String {
    let i = index % PALETTE_SIZE;
    // golden-angle hue walk with two lightness bands keeps neighbors distinct
    let hue = (i as f64 * 137.0) % 360.0;
    let light = if i.is_multiple_of(2) { 0.45 } else { 0.62 };
    let (r, g, b) = hsl_to_rgb(hue, 0.65, light);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to8 = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (to8(r1), to8(g1), to8(b1))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Deterministic standalone SVG: one circle per point, fill keyed by
/// cluster id. The viewport is a linear fit of the data extent with a
/// margin; degenerate extents fall back to a unit span.
pub fn render_scatter(
    lowdim: &LowDimEmbedding,
    assign: &ClusterAssignment,
    cfg: &PlotConfig,
) -> String {
    assert_eq!(lowdim.len(), assign.labels.len(), "points must align with cluster labels");
    let PlotConfig { width, height, point_radius, margin, .. } = *cfg;

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &lowdim.points {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }
    if lowdim.is_empty() {
        (min_x, max_x, min_y, max_y) = (0.0, 1.0, 0.0, 1.0);
    }
    let span_x = if max_x - min_x > 0.0 { max_x - min_x } else { 1.0 };
    let span_y = if max_y - min_y > 0.0 { max_y - min_y } else { 1.0 };
    let inner_w = width * (1.0 - 2.0 * margin);
    let inner_h = height * (1.0 - 2.0 * margin);
    let sx = |x: f64| width * margin + (x - min_x) / span_x * inner_w;
    // SVG y axis grows downward
    let sy = |y: f64| height - (height * margin + (y - min_y) / span_y * inner_h);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "  <rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    ));
    for (p, &cluster) in lowdim.points.iter().zip(&assign.labels) {
        out.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{point_radius}\" fill=\"{}\"/>\n",
            sx(p[0]),
            sy(p[1]),
            palette_color(cluster),
        ));
    }
    for (cluster, label) in &cfg.medoid_labels {
        if let Some(centroid) = assign.centroids.get(*cluster) {
            if centroid.len() == 2 {
                out.push_str(&format!(
                    "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" \
                     font-family=\"sans-serif\" fill=\"#000000\">{}</text>\n",
                    sx(centroid[0]),
                    sy(centroid[1]),
                    xml_escape(label),
                ));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn plot_clusters(
    lowdim: &LowDimEmbedding,
    assign: &ClusterAssignment,
    cfg: &PlotConfig,
    out: &Path,
) -> std::io::Result<()> {
    let svg = render_scatter(lowdim, assign, cfg);
    let mut f = std::fs::File::create(out)?;
    f.write_all(svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lowdim(points: Vec<[f64; 2]>) -> LowDimEmbedding {
        let labels = (0..points.len()).map(|i| format!("h{i}")).collect();
        LowDimEmbedding { labels, points }
    }

    fn assign(labels: Vec<usize>, k: usize) -> ClusterAssignment {
        ClusterAssignment {
            labels,
            centroids: vec![vec![0.0, 0.0]; k],
            inertia: 0.0,
            inertia_history: vec![],
        }
    }

    #[test]
    fn one_circle_per_point_two_fills() {
        let ld = lowdim(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let a = assign(vec![0, 0, 1, 1], 2);
        let svg = render_scatter(&ld, &a, &PlotConfig::default());
        assert_eq!(svg.matches("<circle").count(), 4);
        let mut fills: Vec<&str> = svg
            .match_indices("fill=\"#")
            .map(|(i, _)| &svg[i + 6..i + 13])
            .filter(|f| *f != "#ffffff")
            .collect();
        fills.sort_unstable();
        fills.dedup();
        assert_eq!(fills.len(), 2);
    }

    #[test]
    fn empty_input_valid_svg() {
        let ld = lowdim(vec![]);
        let a = assign(vec![], 0);
        let svg = render_scatter(&ld, &a, &PlotConfig::default());
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn byte_deterministic() {
        let ld = lowdim(vec![[0.3, -2.0], [4.5, 9.1], [-7.0, 0.0]]);
        let a = assign(vec![0, 1, 2], 3);
        let cfg = PlotConfig {
            medoid_labels: vec![(0, "introduction".into()), (1, "a<b&c>d".into())],
            ..PlotConfig::default()
        };
        assert_eq!(render_scatter(&ld, &a, &cfg), render_scatter(&ld, &a, &cfg));
    }

    #[test]
    fn labels_escaped() {
        let ld = lowdim(vec![[0.0, 0.0]]);
        let a = assign(vec![0], 1);
        let cfg = PlotConfig {
            medoid_labels: vec![(0, "a<b&c".into())],
            ..PlotConfig::default()
        };
        let svg = render_scatter(&ld, &a, &cfg);
        assert!(svg.contains("a&lt;b&amp;c"));
    }

    #[test]
    fn coincident_points_in_viewport() {
        let ld = lowdim(vec![[5.0, 5.0], [5.0, 5.0]]);
        let a = assign(vec![0, 0], 1);
        let svg = render_scatter(&ld, &a, &PlotConfig::default());
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn palette_distinct_50() {
        let mut colors: Vec<String> = (0..PALETTE_SIZE).map(palette_color).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), PALETTE_SIZE);
        assert_eq!(palette_color(0), palette_color(PALETTE_SIZE));
    }
}
