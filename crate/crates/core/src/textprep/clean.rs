//! Sentence cleaning: lowercase, contraction expansion, URL and digit
//! removal, punctuation stripping, whitespace collapse.

const WHOLE_WORD: &[(&str, &str)] = &[
    ("won't", "will not"),
    ("can't", "cannot"),
    ("shan't", "shall not"),
    ("ain't", "is not"),
    ("let's", "let us"),
    ("it's", "it is"),
    ("that's", "that is"),
    ("there's", "there is"),
    ("here's", "here is"),
    ("what's", "what is"),
    ("who's", "who is"),
    ("he's", "he is"),
    ("she's", "she is"),
    ("y'all", "you all"),
];

const SUFFIXES: &[(&str, &str)] = &[
    ("n't", " not"),
    ("'re", " are"),
    ("'ve", " have"),
    ("'ll", " will"),
    ("'d", " would"),
    ("'m", " am"),
    ("'s", ""),
];

fn is_url(token: &str) -> bool {
    token.starts_with("http") || token.starts_with("www.")
}

fn expand_contraction(word: &str) -> String {
    if let Some(&(_, full)) = WHOLE_WORD.iter().find(|(c, _)| *c == word) {
        return full.to_string();
    }
    for &(suffix, full) in SUFFIXES {
        if let Some(stem) = word.strip_suffix(suffix) {
            if !stem.is_empty() {
                return format!("{stem}{full}");
            }
        }
    }
    word.to_string()
}

fn keep_char(c: char) -> bool {
    c.is_alphabetic() || matches!(c, '&' | '-' | '_')
}

fn trim_joiners(s: &str) -> &str {
    s.trim_matches(|c: char| matches!(c, '&' | '-' | '_'))
}

/// Cleans a raw sentence. The result holds lowercase words made of letters
/// plus inner `&`, `-` and `_`, separated by single spaces. Idempotent.
pub fn clean_sentence(raw: &str) -> String {
    let lower = raw
        .to_lowercase()
        .replace(['\u{2019}', '\u{2018}', '`'], "'");
    let mut words: Vec<String> = Vec::new();
    for token in lower.split_whitespace() {
        let core = token.trim_matches(|c: char| !c.is_alphanumeric());
        if is_url(core) {
            continue;
        }
        let spaced: String = token
            .chars()
            .map(|c| if keep_char(c) || c == '\'' || c.is_numeric() { c } else { ' ' })
            .collect();
        for piece in spaced.split_whitespace() {
            let piece = piece.trim_matches(|c: char| !c.is_alphanumeric());
            let expanded = expand_contraction(piece);
            let stripped: String = expanded
                .chars()
                .filter(|c| !c.is_numeric())
                .map(|c| if keep_char(c) { c } else { ' ' })
                .collect();
            for word in stripped.split_whitespace() {
                let word = trim_joiners(word);
                if !word.is_empty() && !is_url(word) {
                    words.push(word.to_string());
                }
            }
        }
    }
    words.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn contractions() {
        assert_eq!(clean_sentence("we don't expect growth"), "we do not expect growth");
        assert_eq!(clean_sentence("We won't, and can't."), "we will not and cannot");
        assert_eq!(clean_sentence("The company's results"), "the company results");
        assert_eq!(clean_sentence("They're sure we'll see it's fine"), "they are sure we will see it is fine");
    }

    #[test]
    fn urls_and_numbers() {
        assert_eq!(clean_sentence("see https://example.com for 2022 data"), "see for data");
        assert_eq!(clean_sentence("visit www.sec.gov (or http://x.y/z) now"), "visit or now");
        assert_eq!(clean_sentence("a $1.5 billion, 12% rise"), "a billion rise");
    }

    #[test]
    fn keeps_inner_joiners() {
        assert_eq!(clean_sentence("M&A and SARS-CoV-2 work_capital"), "m&a and sars-cov work_capital");
        assert_eq!(clean_sentence("COVID-19 pandemic"), "covid pandemic");
    }

    #[test]
    fn already_clean_unchanged() {
        let s = "revenue increased due to higher demand";
        assert_eq!(clean_sentence(s), s);
    }

    proptest! {
        #[test]
        fn idempotent(raw in "[ -~\u{2019}]{0,80}") {
            let once = clean_sentence(&raw);
            prop_assert_eq!(clean_sentence(&once), once.clone());
            prop_assert!(!once.chars().any(|c| c.is_ascii_digit()));
        }

        #[test]
        fn idempotent_on_wordy_input(words in proptest::collection::vec("(https?://[a-z]{1,5}|www\\.[a-z]{1,4}|[A-Za-z']{1,8}|[0-9]{1,4}|[a-z]{1,4}[-&_/.:][a-z0-9]{1,4})", 0..15)) {
            let raw = words.join(" ");
            let once = clean_sentence(&raw);
            prop_assert_eq!(clean_sentence(&once), once.clone());
        }
    }
}
