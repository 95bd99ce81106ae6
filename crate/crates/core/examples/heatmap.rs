//! Writes a relevance heatmap HTML page for a sample document.
//!
//! cargo run --example heatmap -- [out.html]

use cpc::cli::render_heatmap;
use cpc::compressor::{Budget, CompressionRequest, Compressor};
use cpc::providers::HashEncoder;
use cpc::segmentation::Document;

fn main() -> cpc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "heatmap.html".into());
    let text = "Marie Curie was born in Warsaw in 1867. She moved to Paris to study physics. \
                There she met Pierre Curie. Together they discovered polonium and radium. \
                She won two Nobel prizes. Warsaw is the capital of Poland.";
    let question = "Which elements did the Curies discover?";
    let req = CompressionRequest::new(Document::new(text), question, Budget::Ratio(0.4))?;
    let result = Compressor::new(HashEncoder::default()).compress(&req)?;
    std::fs::write(&out, render_heatmap(&req.context, question, &result))
        .map_err(|e| cpc::Error::InvalidRequest(format!("{out}: {e}")))?;
    println!("wrote {out}");
    Ok(())
}
