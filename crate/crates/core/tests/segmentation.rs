use cpc::segmentation::{count_tokens, DefaultTokenizer, Document, Tokenizer};
use proptest::prelude::*;

fn piece() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        "[A-Z][a-z]{0,6}",
        "[0-9]{1,4}",
        Just("Dr.".to_string()),
        Just("e.g.".to_string()),
        Just("don't".to_string()),
        Just("U.S.".to_string()),
        Just("\"Yes!\"".to_string()),
        Just("(see".to_string()),
        Just("it)".to_string()),
        Just("naïve".to_string()),
        Just("—".to_string()),
        "[.!?,;:]",
    ]
}

fn sep() -> impl Strategy<Value = &'static str> {
    prop_oneof![8 => Just(" "), 1 => Just(". "), 1 => Just("? "), 1 => Just("\n"), 1 => Just("  \t")]
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec((piece(), sep()), 0..40)
        .prop_map(|v| v.into_iter().map(|(p, s)| format!("{p}{s}")).collect())
}

proptest! {
    #[test]
    fn spans_cover_text_with_whitespace_gaps(t in text()) {
        let doc = Document::new(t.as_str());
        let mut pos = 0;
        let mut tok = 0;
        for s in &doc.sentences {
            let (a, b) = s.char_span;
            prop_assert!(a >= pos && b > a);
            prop_assert!(t[pos..a].chars().all(char::is_whitespace), "gap {:?}", &t[pos..a]);
            prop_assert_eq!(&t[a..b], s.text.as_str());
            prop_assert_eq!(s.token_span, (tok, tok + s.token_count - 1));
            prop_assert_eq!(s.token_count, count_tokens(&s.text));
            tok += s.token_count;
            pos = b;
        }
        prop_assert!(t[pos..].chars().all(char::is_whitespace));
        prop_assert_eq!(doc.token_count, tok);
        prop_assert_eq!(doc.token_count, count_tokens(&t));
        let all: Vec<&str> = DefaultTokenizer.tokens(&t);
        prop_assert_eq!(doc.tokens.iter().map(String::as_str).collect::<Vec<_>>(), all);
    }

    #[test]
    fn token_count_is_prefix_monotone(t in text()) {
        let mut last = 0;
        for (i, _) in t.char_indices().chain(std::iter::once((t.len(), ' '))) {
            let n = count_tokens(&t[..i]);
            prop_assert!(n >= last, "prefix {:?}", &t[..i]);
            last = n;
        }
    }

    #[test]
    fn resplitting_a_sentence_is_idempotent(t in text()) {
        for s in Document::new(t.as_str()).sentences {
            let again = Document::new(s.text.as_str());
            prop_assert_eq!(again.len(), 1, "{:?}", s.text);
            prop_assert_eq!(&again.sentences[0].text, &s.text);
        }
    }
}
