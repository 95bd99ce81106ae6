//! Measures compression time as the number of sentences doubles.
//!
//! cargo run --release --example bench_latency

use std::time::Instant;

use cpc::cli::median;
use cpc::compressor::{Budget, CompressionRequest, Compressor};
use cpc::providers::HashEncoder;
use cpc::segmentation::Document;

const WORDS: &[&str] = &[
    "river", "stone", "market", "winter", "signal", "garden", "engine", "letter", "harbor", "forest",
];

fn document(sentences: usize) -> String {
    (0..sentences)
        .map(|i| {
            let w: Vec<&str> = (0..8).map(|k| WORDS[(i * 7 + k * 3) % WORDS.len()]).collect();
            format!("The {} near the {} held {} {} {}.", w[0], w[1], w[2], w[3], w[4])
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> cpc::Result<()> {
    let compressor = Compressor::new(HashEncoder::default());
    let mut prev: Option<f64> = None;
    println!("{:>9} {:>8} {:>12} {:>7}", "sentences", "tokens", "median_s", "ratio");
    for k in [100, 200, 400, 800, 1600] {
        let req = CompressionRequest::new(Document::new(document(k)), "Where is the harbor?", Budget::Ratio(0.3))?;
        compressor.compress(&req)?;
        let times = (0..5)
            .map(|_| {
                let t = Instant::now();
                compressor.compress(&req).map(|_| t.elapsed().as_secs_f64())
            })
            .collect::<cpc::Result<Vec<_>>>()?;
        let m = median(&times);
        let ratio = prev.map(|p| format!("{:.2}", m / p)).unwrap_or_default();
        println!("{k:>9} {:>8} {m:>12.6} {ratio:>7}", req.context.token_count);
        prev = Some(m);
    }
    Ok(())
}
