//! Sentence splitting and token counting.
//!
//! Everything downstream (budgets, pooled spans, masking) is expressed in the
//! units of a [`Tokenizer`]. The default tokenizer is rule based and
//! dependency free:
//!
//! * text is split on Unicode whitespace into words;
//! * inside a word every maximal alphanumeric run is one token and every other
//!   character is a token of its own;
//! * an apostrophe (`'` or `’`) directly after an alphanumeric run and followed
//!   by one or two letters that end the run forms a contraction suffix token
//!   (`don't` becomes `don` + `'t`).
//!
//! Sentences end after terminal punctuation (`.`, `!`, `?`, optionally followed
//! by closing quotes or brackets) when the next non-space character is
//! uppercase or an opening quote, unless the word before the period is a known
//! abbreviation. Every newline also ends a sentence.
//!
//! All offsets are byte offsets into the UTF-8 text.

use std::ops::Range;

use serde::{Deserialize, Serialize};

const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "fig.", "eq.", "e.g.", "i.e.", "etc.", "vs.", "st.",
    "no.",
];

/// A pluggable token counter. Budgets are always in the active tokenizer's units.
pub trait Tokenizer: Send + Sync {
    /// Byte ranges of the tokens of `text`, in order.
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.token_spans(text).len()
    }

    fn tokens<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.token_spans(text)
            .into_iter()
            .map(|r| &text[r])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DefaultTokenizer;

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

impl DefaultTokenizer {
    fn word_spans(word: &str, offset: usize, out: &mut Vec<Range<usize>>) {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let end_of = |k: usize| chars.get(k).map_or(word.len(), |&(b, _)| b);
        let mut k = 0;
        while k < chars.len() {
            let (start, c) = chars[k];
            if c.is_alphanumeric() {
                let mut e = k;
                while e < chars.len() && chars[e].1.is_alphanumeric() {
                    e += 1;
                }
                out.push(offset + start..offset + end_of(e));
                k = e;
                continue;
            }
            if is_apostrophe(c) && k > 0 && chars[k - 1].1.is_alphanumeric() {
                let mut e = k + 1;
                while e < chars.len() && chars[e].1.is_alphanumeric() {
                    e += 1;
                }
                let run = e - (k + 1);
                if (1..=2).contains(&run) && chars[k + 1..e].iter().all(|&(_, c)| c.is_alphabetic())
                {
                    out.push(offset + start..offset + end_of(e));
                    k = e;
                    continue;
                }
            }
            out.push(offset + start..offset + end_of(k + 1));
            k += 1;
        }
    }
}

impl Tokenizer for DefaultTokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                if let Some(s) = word_start.take() {
                    Self::word_spans(&text[s..i], s, &mut out);
                }
            } else if word_start.is_none() {
                word_start = Some(i);
            }
        }
        if let Some(s) = word_start {
            Self::word_spans(&text[s..], s, &mut out);
        }
        out
    }
}

/// Number of tokens in `text` under the default tokenizer.
pub fn count_tokens(text: &str) -> usize {
    DefaultTokenizer.count(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    /// Byte offsets `[start, end)` into the owning document's text.
    pub char_span: (usize, usize),
    /// Inclusive token indices into the document token stream.
    pub token_span: (usize, usize),
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub sentences: Vec<Sentence>,
    /// Token stream of the whole document (concatenation of sentence tokens).
    pub tokens: Vec<String>,
    pub token_count: usize,
}

impl Document {
    pub fn new(text: impl Into<String>) -> Self {
        Self::with_tokenizer(text, &DefaultTokenizer)
    }

    pub fn with_tokenizer(text: impl Into<String>, tokenizer: &dyn Tokenizer) -> Self {
        let text = text.into();
        let mut sentences = Vec::new();
        let mut tokens = Vec::new();
        for seg in sentence_segments(&text) {
            let seg_text = &text[seg.clone()];
            let toks = tokenizer.tokens(seg_text);
            // zero-token fragments stay in the separator between neighbours
            if toks.is_empty() {
                continue;
            }
            let first = tokens.len();
            tokens.extend(toks.iter().map(|t| t.to_string()));
            sentences.push(Sentence {
                text: seg_text.to_string(),
                char_span: (seg.start, seg.end),
                token_span: (first, tokens.len() - 1),
                token_count: toks.len(),
            });
        }
        let token_count = tokens.len();
        Document {
            text,
            sentences,
            tokens,
            token_count,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentence texts joined by a single space, optionally leaving one out.
    pub fn joined_without(&self, skip: Option<usize>) -> String {
        self.sentences
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, s)| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Splits `text` into sentences using the default tokenizer for token spans.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    Document::new(text).sentences
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opening_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201C}' | '\u{2018}')
}

fn ends_with_abbreviation(text: &str, period_at: usize) -> bool {
    let word_start = text[..period_at]
        .rfind(char::is_whitespace)
        .map_or(0, |i| i + text[i..].chars().next().map_or(1, char::len_utf8));
    let word = text[word_start..=period_at]
        .trim_start_matches(|c: char| is_opening_quote(c))
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Trimmed, non-empty byte ranges of the raw sentence segments.
fn sentence_segments(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);
    let mut segments = Vec::new();
    let mut push = |start: usize, end: usize| {
        let raw = &text[start..end];
        let lead = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        if !trimmed.is_empty() {
            segments.push(start + lead..start + lead + trimmed.len());
        }
    };

    let mut seg_start = 0;
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k].1;
        if c == '\n' {
            push(seg_start, chars[k].0);
            seg_start = byte_at(k + 1);
            k += 1;
            continue;
        }
        if !is_terminal(c) {
            k += 1;
            continue;
        }
        let run_start = k;
        let mut e = k;
        while e < chars.len() && is_terminal(chars[e].1) {
            e += 1;
        }
        while e < chars.len() && is_closing(chars[e].1) {
            e += 1;
        }
        let boundary = if e == chars.len() {
            true
        } else if chars[e].1.is_whitespace() {
            let mut n = e;
            while n < chars.len() && chars[n].1.is_whitespace() && chars[n].1 != '\n' {
                n += 1;
            }
            match chars.get(n) {
                Some(&(_, next)) if next != '\n' => {
                    let starts_new = next.is_uppercase() || is_opening_quote(next);
                    let single_period = chars[run_start].1 == '.'
                        && (run_start + 1 == chars.len() || !is_terminal(chars[run_start + 1].1));
                    starts_new && !(single_period && ends_with_abbreviation(text, chars[run_start].0))
                }
                // the newline rule closes the sentence anyway
                _ => false,
            }
        } else {
            false
        };
        if boundary {
            push(seg_start, byte_at(e));
            seg_start = byte_at(e);
        }
        k = e;
    }
    push(seg_start, text.len());
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        split_sentences(s).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn empty_input() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n\t ").is_empty());
        assert_eq!(count_tokens(""), 0);
    }

    #[test]
    fn splits_on_terminal_punctuation() {
        assert_eq!(texts("It rained. Did it? Yes!"), ["It rained.", "Did it?", "Yes!"]);
    }

    #[test]
    fn abbreviations_suppress_splits() {
        assert_eq!(texts("Dr. Smith left early."), ["Dr. Smith left early."]);
        assert_eq!(
            texts("Use a tool, e.g. The hammer. It works."),
            ["Use a tool, e.g. The hammer.", "It works."]
        );
        assert_eq!(texts("See (Fig. 3) for details."), ["See (Fig. 3) for details."]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(texts("It was 3 p.m. and late."), ["It was 3 p.m. and late."]);
        assert_eq!(texts("Version 2.5 shipped. Then"), ["Version 2.5 shipped.", "Then"]);
    }

    #[test]
    fn quotes_close_and_open_sentences() {
        assert_eq!(
            texts("He said \"Go.\" Then he left. \"Why?\" she asked."),
            ["He said \"Go.\"", "Then he left.", "\"Why?\" she asked."]
        );
    }

    #[test]
    fn newlines_end_sentences() {
        assert_eq!(
            texts("Shopping list\n- eggs\n- milk\n\nDone. Bye"),
            ["Shopping list", "- eggs", "- milk", "Done.", "Bye"]
        );
    }

    #[test]
    fn token_examples() {
        assert_eq!(count_tokens("hello world"), 2);
        assert_eq!(DefaultTokenizer.tokens("don't stop"), ["don", "'t", "stop"]);
        assert_eq!(DefaultTokenizer.tokens("(yes)!"), ["(", "yes", ")", "!"]);
        assert_eq!(DefaultTokenizer.tokens("we’ll"), ["we", "’ll"]);
        assert_eq!(DefaultTokenizer.tokens("rock'n'roll"), ["rock", "'n", "'", "roll"]);
        assert_eq!(DefaultTokenizer.tokens("'tis 3.14"), ["'", "tis", "3", ".", "14"]);
    }

    #[test]
    fn token_spans_and_counts_line_up() {
        let doc = Document::new("It rained. Did it? Yes!");
        let counts: Vec<_> = doc.sentences.iter().map(|s| s.token_count).collect();
        assert_eq!(counts, [3, 3, 2]);
        assert_eq!(doc.sentences[1].token_span, (3, 5));
        assert_eq!(doc.token_count, 8);
        assert_eq!(doc.tokens[3], "Did");
    }

    #[test]
    fn zero_token_fragments_are_dropped() {
        struct WordsOnly;
        impl Tokenizer for WordsOnly {
            fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
                DefaultTokenizer
                    .token_spans(text)
                    .into_iter()
                    .filter(|r| text[r.clone()].chars().any(char::is_alphanumeric))
                    .collect()
            }
        }
        let doc = Document::with_tokenizer("Stop!\n...\nGo on.", &WordsOnly);
        assert_eq!(doc.len(), 2);
        assert_eq!(doc.sentences[1].text, "Go on.");
        assert_eq!(doc.sentences[1].token_span, (1, 2));
        assert_eq!(doc.token_count, 3);
    }

    #[test]
    fn joined_without_skips_one_sentence() {
        let doc = Document::new("A b.  C d.\nE f.");
        assert_eq!(doc.joined_without(None), "A b. C d. E f.");
        assert_eq!(doc.joined_without(Some(1)), "A b. E f.");
    }
}
