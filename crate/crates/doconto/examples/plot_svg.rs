//! Render a cluster scatter plot as standalone SVG.
//!
//! ```bash
//! cargo run -p doconto --example plot_svg > clusters.svg
//! ```

use doconto::manifold::{kmeans, LowDimEmbedding};
use doconto::plot::{render_scatter, PlotConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    // three deterministic blobs in the plane
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let centers = [(-4.0, 0.0), (4.0, 3.0), (2.0, -5.0)];
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for i in 0..12 {
            points.push([cx + rng.gen_range(-1.0..1.0), cy + rng.gen_range(-1.0..1.0)]);
            labels.push(format!("blob{c}-{i}"));
        }
    }

    let flat: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    let assign = kmeans(&flat, 3, 7, 100).unwrap();
    let lowdim = LowDimEmbedding { labels, points };

    let cfg = PlotConfig {
        medoid_labels: (0..3).map(|c| (c, format!("cluster {c}"))).collect(),
        ..PlotConfig::default()
    };
    print!("{}", render_scatter(&lowdim, &assign, &cfg));
}
