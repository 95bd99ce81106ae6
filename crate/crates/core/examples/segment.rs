//! Shows sentence boundaries, byte offsets and token spans.

use cpc::segmentation::Document;

fn main() {
    let text = std::env::args().nth(1).unwrap_or_else(|| {
        "Dr. Smith arrived at 5 p.m. on Monday. \"Is it late?\" she asked.\nNobody answered! \
         The U.S. team's coach didn't mind."
            .to_string()
    });
    let doc = Document::new(text);
    println!("{} sentences, {} tokens", doc.len(), doc.token_count);
    for (i, s) in doc.sentences.iter().enumerate() {
        println!("{i:>2} bytes {:?} tokens {:?}  {:?}", s.char_span, s.token_span, s.text);
        println!("   {:?}", &doc.tokens[s.token_span.0..=s.token_span.1]);
    }
}
