//! Compresses a short document for a question with the offline test encoder.
//!
//! cargo run --example compress -- [ratio]

use cpc::compressor::{Budget, CompressionRequest, Compressor};
use cpc::providers::HashEncoder;
use cpc::segmentation::Document;

const TEXT: &str = "The Eiffel Tower was completed in 1889. It was designed by the company of \
Gustave Eiffel. Paris hosted the World's Fair that year. The tower is 330 metres tall. \
Millions of people visit it every year. Bread in Paris is famously good.";

fn main() -> cpc::Result<()> {
    let ratio = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let question = "When was the Eiffel Tower completed?";
    let req = CompressionRequest::new(Document::new(TEXT), question, Budget::Ratio(ratio))?;
    let result = Compressor::new(HashEncoder::default()).compress(&req)?;
    for s in &result.scores {
        let mark = if result.kept_indices.contains(&s.index) { '*' } else { ' ' };
        println!("{mark} {:>2} {:+.4}  {}", s.index, s.score, req.context.sentences[s.index].text);
    }
    println!(
        "\nkept {} of {} tokens (budget {}):\n{}",
        result.compressed_tokens, result.original_tokens, result.budget_tokens, result.compressed_text
    );
    Ok(())
}
