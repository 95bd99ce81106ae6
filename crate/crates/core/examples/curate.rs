//! Runs the curation pipeline on a two-document corpus with a scripted
//! generator, the hash embedder and the bigram density model.

use cpc::curation::{build_dataset, CurationConfig, CurationProviders};
use cpc::io::CorpusDoc;
use cpc::providers::{BigramDensity, DensityVocab, HashEncoder, ScriptedGenerator, Standalone};

fn main() -> cpc::Result<()> {
    let corpus = vec![
        CorpusDoc {
            id: "tower".into(),
            text: "The tower was built in 1889. It stands in Paris. Bread is tasty. \
                   Rivers flow to the sea. Cats sleep a lot."
                .into(),
            question: None,
        },
        CorpusDoc {
            id: "curie".into(),
            text: "Marie Curie studied in Paris. She discovered radium with her husband. \
                   The river was cold. Dogs bark at night. Apples are red."
                .into(),
            question: None,
        },
    ];
    // Prompt 1 mentions the sentence in double brackets; Prompt 2 ends with the
    // verification slot. Rules match on substrings of the rendered prompts.
    let generator = ScriptedGenerator::new()
        .with_rule("[[It stands in Paris.]]", "Q: In which city does the tower stand?\nA: Paris")
        .with_rule("[[She discovered radium with her husband.]]", "Q: What did Curie discover?\nA: radium")
        .with_rule("Question: What is this about?", "The sentence alone answers it. Yes")
        .with_rule("Verification result:", "The sentence does not name the subject. No")
        .with_default("Q: What is this about?\nA: nothing");
    let embedder = Standalone { encoder: HashEncoder::default() };
    let density = BigramDensity::new(DensityVocab::from_texts(corpus.iter().map(|d| d.text.as_str())));
    let providers = CurationProviders { generator: &generator, embedder: &embedder, density: &density };
    let cfg = CurationConfig { max_positives_per_doc: 5, ..CurationConfig::default() };
    let stats = build_dataset(&corpus, &cfg, &providers, |t| {
        println!("{}", serde_json::to_string(t)?);
        Ok(())
    })?;
    eprintln!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
