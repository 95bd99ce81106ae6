//! Question-generation and verification prompts, and their response parsers.

use crate::error::{Error, Result};
use crate::providers::GenerationProvider;

/// Worked example shown to the verifier before the real triplet.
pub const DEFAULT_DEMONSTRATION: &str = "Text: Mary is worried that her two children are too small to travel on the plane.\n\
Question: How many children does John have?\n\
Answer: Two.\n\
Verification result: The text says that Mary has two children, but it does not say that they are also John's children. No";

pub fn question_prompt(context: &str, sentence: &str) -> String {
    format!(
        "Here is a text to consider: TEXT: \"{context}\"\n\
         Read the sentence in double brackets, namely, [[{sentence}]].\n\
         Ask questions to this sentence, and make sure the question is not answerable from this sentence alone without knowing the context.\n\
         Reply in this format:\n\
         Q: {{question 1}}\n\
         A: {{answer 1}}\n\
         Q: {{question 2}}\n\
         A: {{answer 2}}"
    )
}

pub fn verification_prompt(demonstration: &str, sentence: &str, question: &str, answer: &str) -> String {
    format!(
        "You are given a piece of text, a question and an answer. Verify whether it is possible to derive such an answer by considering only the given piece of text (you should rely only on the piece of text). Think step by step and finish your thoughts with one word: \"Yes\" or \"No\". Answer \"Yes\" if and only if ALL the necessary information is contained in the text. If anything is missing, then state what is missing and answer \"No\". Answer \"Yes\" ONLY if there is no such information in the answer that is missing in the text. Otherwise, answer \"No\"!!\n\
         {demonstration}\n\
         Text: {sentence}\n\
         Question: {question}\n\
         Answer: {answer}\n\
         Verification result:"
    )
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let line = line.trim().trim_start_matches("**");
    let rest = line.strip_prefix(label)?;
    Some(rest.trim_start_matches("**").trim())
}

/// Collects complete `Q:`/`A:` pairs. A `Q:` line replaces any pending
/// unanswered question; an `A:` without a pending question is ignored.
pub fn parse_qa_pairs(response: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut pending: Option<String> = None;
    for line in response.lines() {
        if let Some(q) = strip_label(line, "Q:") {
            pending = Some(q.to_string()).filter(|q| !q.is_empty());
        } else if let Some(a) = strip_label(line, "A:") {
            if let Some(q) = pending.take() {
                if !a.is_empty() {
                    pairs.push((q, a.to_string()));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::QaParse);
    }
    Ok(pairs)
}

/// `Ok(true)` when the response ends with "No", `Ok(false)` for "Yes".
pub fn parse_verdict(response: &str) -> Result<bool> {
    let last = response
        .split(|c: char| !c.is_alphanumeric())
        .rev()
        .find(|w| !w.is_empty())
        .unwrap_or("");
    match last.to_ascii_lowercase().as_str() {
        "no" => Ok(true),
        "yes" => Ok(false),
        _ => Err(Error::AmbiguousVerdict(response.to_string())),
    }
}

pub fn generate_qa(
    gen: &dyn GenerationProvider,
    context: &str,
    positive: &str,
) -> Result<Vec<(String, String)>> {
    parse_qa_pairs(&gen.generate(&question_prompt(context, positive))?)
}

/// Keep decision for a pair: true iff the verifier says the answer cannot be
/// derived from the positive sentence alone.
pub fn verify_qa(
    gen: &dyn GenerationProvider,
    demonstration: &str,
    positive: &str,
    question: &str,
    answer: &str,
) -> Result<bool> {
    let prompt = verification_prompt(demonstration, positive, question, answer);
    parse_verdict(&gen.generate(&prompt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ScriptedGenerator;

    #[test]
    fn question_prompt_layout() {
        let p = question_prompt("Ctx here.", "Sent.");
        let lines: Vec<&str> = p.lines().collect();
        assert_eq!(lines[0], "Here is a text to consider: TEXT: \"Ctx here.\"");
        assert_eq!(lines[1], "Read the sentence in double brackets, namely, [[Sent.]].");
        assert_eq!(lines[4], "Q: {question 1}");
        assert_eq!(lines.len(), 8);
    }

    #[test]
    fn verification_prompt_ends_with_slot() {
        let p = verification_prompt("DEMO", "S.", "Q?", "A.");
        assert!(p.ends_with("Text: S.\nQuestion: Q?\nAnswer: A.\nVerification result:"));
        assert!(p.contains("\nDEMO\n"));
        assert!(p.starts_with("You are given a piece of text"));
    }

    #[test]
    fn parses_pairs() {
        let pairs = parse_qa_pairs("Q: q1\nA: a1\nQ: q2\nA: a2").unwrap();
        assert_eq!(pairs, [("q1".into(), "a1".into()), ("q2".into(), "a2".into())]);
        let pairs = parse_qa_pairs("Q: q1\nA: a1\nQ: dangling").unwrap();
        assert_eq!(pairs.len(), 1);
        let pairs = parse_qa_pairs("Sure!\n**Q:** bold q\n**A:** bold a\n").unwrap();
        assert_eq!(pairs, [("bold q".into(), "bold a".into())]);
        assert!(matches!(parse_qa_pairs(""), Err(Error::QaParse)));
        assert!(matches!(parse_qa_pairs("A: orphan"), Err(Error::QaParse)));
    }

    #[test]
    fn verdicts() {
        assert!(parse_verdict("...the text lacks the date. No").unwrap());
        assert!(!parse_verdict("...all information present. Yes").unwrap());
        assert!(parse_verdict("Answer: \"No\"!!").unwrap());
        assert!(matches!(parse_verdict("Maybe"), Err(Error::AmbiguousVerdict(_))));
        assert!(matches!(parse_verdict(""), Err(Error::AmbiguousVerdict(_))));
    }

    #[test]
    fn generate_and_verify_through_provider() {
        let gen = ScriptedGenerator::new()
            .with_rule("[[", "Q: q1\nA: a1\nQ: q2\nA: a2")
            .with_rule("Question: q1", "missing context. No")
            .with_rule("Question: q2", "all there. Yes");
        let pairs = generate_qa(&gen, "C.", "P.").unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(verify_qa(&gen, DEFAULT_DEMONSTRATION, "P.", "q1", "a1").unwrap());
        assert!(!verify_qa(&gen, DEFAULT_DEMONSTRATION, "P.", "q2", "a2").unwrap());
    }
}
