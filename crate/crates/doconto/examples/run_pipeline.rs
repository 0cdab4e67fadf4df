//! Run the full eleven-stage pipeline on the bundled corpus, then run it
//! again to show every stage is served from the cache.
//!
//! ```bash
//! cargo run --release -p doconto --example run_pipeline
//! ```

use doconto::config::Config;
use doconto::pipeline::{run_pipeline, PipelineConfig};

fn main() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
    let mut cfg = Config::load(std::path::Path::new(&format!("{root}/configs/desk.cfg"))).unwrap();
    cfg.set("corpus", format!("{root}/data/toy.jsonl"));
    cfg.set("ontology.aliases", format!("{root}/configs/aliases.tsv"));
    let workdir = std::env::temp_dir().join("doconto-example-pipeline");
    cfg.set("workdir", workdir.to_str().unwrap());
    // keep the demo quick; desk.cfg trains longer
    cfg.set("train.epochs", "10");

    let pcfg = PipelineConfig::from_config(&cfg).unwrap();
    for pass in 1..=2 {
        let manifest = run_pipeline(&pcfg).unwrap();
        println!("pass {pass}:");
        for s in &manifest.stages {
            let state = if s.cached { "cached" } else { "ran" };
            println!("  {:<10} {state:<6} {:>5} ms", s.name, s.elapsed_ms);
        }
    }
    println!("\nartifacts in {}", workdir.display());
}
