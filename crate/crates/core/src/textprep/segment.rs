//! Rule-based sentence splitter.

const ABBREVIATIONS: &[&str] = &[
    "inc.", "co.", "corp.", "ltd.", "llc.", "plc.", "no.", "nos.", "vs.", "etc.", "e.g.", "i.e.",
    "mr.", "mrs.", "ms.", "dr.", "jr.", "sr.", "st.", "approx.", "est.", "dept.", "fig.", "jan.",
    "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
    "u.s.", "u.k.", "a.m.", "p.m.",
];

fn is_abbreviation(token: &str) -> bool {
    let t = token
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if ABBREVIATIONS.contains(&t.as_str()) {
        return true;
    }
    // dotted initials such as "u.s." or "n.a."
    let letters: Vec<&str> = t.split('.').filter(|p| !p.is_empty()).collect();
    letters.len() >= 2 && letters.iter().all(|p| p.chars().count() == 1)
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Splits text into trimmed sentences on terminal punctuation followed by
/// whitespace, and on blank lines. A period closing a known abbreviation or a
/// run of initials does not end a sentence, and neither does terminal
/// punctuation followed by a lowercase letter or digit.
pub fn segment_text(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    let push = |out: &mut Vec<String>, s: &str| {
        let t = s.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            // blank line: newline, optional horizontal space, newline
            let mut j = i + 1;
            while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                push(&mut out, &text[start..pos]);
                start = chars[j].0;
                i = j + 1;
                continue;
            }
        }
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || is_closer(chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            let at_break = j >= chars.len() || chars[j].1.is_whitespace();
            if at_break {
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let next = chars.get(k).map(|&(_, c)| c);
                let continues = next.is_some_and(|n| n.is_lowercase() || n.is_ascii_digit());
                let token_start = text[..pos + c.len_utf8()]
                    .rfind(char::is_whitespace)
                    .map_or(0, |p| p + 1);
                let token = &text[token_start..pos + c.len_utf8()];
                let abbrev = c == '.' && is_abbreviation(token);
                if !continues && !abbrev {
                    push(&mut out, &text[start..end]);
                    start = end;
                }
            }
            i = j;
            continue;
        }
        i += 1;
    }
    push(&mut out, &text[start..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sentences() {
        assert_eq!(segment_text("Revenue grew. Costs fell."), ["Revenue grew.", "Costs fell."]);
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(segment_text("U.S. sales rose."), ["U.S. sales rose."]);
        assert_eq!(
            segment_text("Acme Inc. reported growth. Margins held."),
            ["Acme Inc. reported growth.", "Margins held."]
        );
    }

    #[test]
    fn empty_text() {
        assert!(segment_text("   \n\t ").is_empty());
        assert!(segment_text("").is_empty());
    }

    #[test]
    fn blank_line_breaks() {
        assert_eq!(
            segment_text("Item 7. Overview\n\nSales rose! Did costs fall? Yes."),
            ["Item 7.", "Overview", "Sales rose!", "Did costs fall?", "Yes."]
        );
    }

    #[test]
    fn lowercase_continuation_and_quotes() {
        assert_eq!(
            segment_text("Rates were approx. five percent. He said \"stop.\" Then left."),
            ["Rates were approx. five percent.", "He said \"stop.\"", "Then left."]
        );
        assert_eq!(segment_text("Growth was 3.5 percent. Next."), ["Growth was 3.5 percent.", "Next."]);
    }

    #[test]
    fn covers_text() {
        let text = "One two. Three four!  Five six?\nSeven";
        let joined: String = segment_text(text).concat();
        let squeeze = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(squeeze(&joined), squeeze(text));
    }
}
