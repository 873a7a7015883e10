//! Golden-file check: 25 hand-constructed headlines with hand-computed
//! feature maps. Values must match exactly; the two ratio features are
//! stored as [numerator, denominator] pairs and compared after the same
//! single f64 division the extractor performs.

use std::collections::BTreeMap;

use clickcascade_core::textfeat::{classify_headline_type, extract_formal};
use serde::Deserialize;

#[derive(Deserialize)]
struct GoldenCase {
    headline: String,
    #[serde(rename = "type")]
    headline_type: String,
    n_chars: u64,
    n_words: u64,
    avg_word_len: [u64; 2],
    n_sentences: u64,
    n_exclamation: u64,
    n_question_mark: u64,
    n_dots: u64,
    contains_number: u64,
    contains_pronoun: u64,
    contains_you: u64,
    starts_how_to: u64,
    starts_interrogative: u64,
    contains_quote: u64,
    stopword_ratio: [u64; 2],
    forward_reference: u64,
    all_caps_word: u64,
}

impl GoldenCase {
    fn expected_features(&self) -> BTreeMap<&'static str, f64> {
        let ratio = |pair: [u64; 2]| pair[0] as f64 / pair[1] as f64;
        BTreeMap::from([
            ("n_chars", self.n_chars as f64),
            ("n_words", self.n_words as f64),
            ("avg_word_len", ratio(self.avg_word_len)),
            ("n_sentences", self.n_sentences as f64),
            ("n_exclamation", self.n_exclamation as f64),
            ("n_question_mark", self.n_question_mark as f64),
            ("n_dots", self.n_dots as f64),
            ("contains_number", self.contains_number as f64),
            ("contains_pronoun", self.contains_pronoun as f64),
            ("contains_you", self.contains_you as f64),
            ("starts_how_to", self.starts_how_to as f64),
            ("starts_interrogative", self.starts_interrogative as f64),
            ("contains_quote", self.contains_quote as f64),
            ("stopword_ratio", ratio(self.stopword_ratio)),
            ("forward_reference", self.forward_reference as f64),
            ("all_caps_word", self.all_caps_word as f64),
        ])
    }
}

#[test]
fn golden_headline_features_match_exactly() {
    let raw = include_str!("data/golden_headlines.json");
    let cases: Vec<GoldenCase> = serde_json::from_str(raw).unwrap();
    assert_eq!(cases.len(), 25, "golden file must hold 25 headlines");

    for case in &cases {
        let actual = extract_formal(&case.headline).unwrap();
        let expected = case.expected_features();
        for (name, want) in &expected {
            let got = actual[name];
            assert_eq!(
                got.to_bits(),
                want.to_bits(),
                "{:?}: feature {name} = {got}, expected {want}",
                case.headline
            );
        }
        assert_eq!(actual.len(), expected.len());

        let ty = classify_headline_type(&case.headline);
        assert_eq!(
            ty.as_str(),
            case.headline_type,
            "{:?} classified as {}",
            case.headline,
            ty.as_str()
        );
    }
}
