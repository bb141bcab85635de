//! Turning free-text model output into a match / not-match label.
//!
//! Models mostly lead with the class label and then explain, so the rules
//! fire in priority order on the whole response first, then once more on the
//! first sentence that mentions a label keyword:
//!
//! 1. a negated phrase ("not match", "no match", "don't match") anywhere
//! 2. leading token "no"
//! 3. leading token "yes"
//! 4. the standalone word "match"
//! 5. any form of "contradict" (models answer "the statements are
//!    contradictory" instead of a label often enough that it has to count)
//!
//! No rule firing means `Unparsed`; the function is total and
//! case-insensitive.

use super::templates::AnswerFormat;
use serde::{Deserialize, Serialize};

/// Outcome of label parsing. `Unparsed` means no rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedLabel {
    Match,
    NoMatch,
    Unparsed,
}

impl ParsedLabel {
    pub fn to_label(self) -> Option<crate::corpus::Label> {
        match self {
            ParsedLabel::Match => Some(crate::corpus::Label::Match),
            ParsedLabel::NoMatch => Some(crate::corpus::Label::NoMatch),
            ParsedLabel::Unparsed => None,
        }
    }
}

impl From<crate::corpus::Label> for ParsedLabel {
    fn from(label: crate::corpus::Label) -> Self {
        match label {
            crate::corpus::Label::Match => ParsedLabel::Match,
            crate::corpus::Label::NoMatch => ParsedLabel::NoMatch,
        }
    }
}

const NEGATED_PHRASES: &[&str] = &["not match", "no match", "don't match"];

fn normalize(raw: &str) -> String {
    raw.to_lowercase()
        .replace('\u{2019}', "'")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn leading_token(text: &str) -> Option<String> {
    let rest = text.trim_start_matches(|c: char| !c.is_alphanumeric());
    let token: String = rest.chars().take_while(|c| c.is_alphanumeric()).collect();
    if token.is_empty() {
        None
    } else {
        Some(token)
    }
}

fn has_standalone_word(text: &str, word: &str) -> bool {
    text.split(|c: char| !c.is_alphanumeric())
        .any(|token| token == word)
}

fn apply_rules(text: &str) -> Option<ParsedLabel> {
    if NEGATED_PHRASES.iter().any(|p| text.contains(p)) {
        return Some(ParsedLabel::NoMatch);
    }
    match leading_token(text).as_deref() {
        Some("no") => return Some(ParsedLabel::NoMatch),
        Some("yes") => return Some(ParsedLabel::Match),
        _ => {}
    }
    if has_standalone_word(text, "match") {
        return Some(ParsedLabel::Match);
    }
    if text.contains("contradict") {
        return Some(ParsedLabel::NoMatch);
    }
    None
}

fn has_keyword(sentence: &str) -> bool {
    ["yes", "no", "match"]
        .iter()
        .any(|w| has_standalone_word(sentence, w))
        || sentence.contains("contradict")
}

/// Parse a raw model response into a label. The answer format is accepted
/// for interface symmetry; both vocabularies share one rule table.
pub fn parse_label(raw: &str, _format: AnswerFormat) -> ParsedLabel {
    let text = normalize(raw);
    if text.is_empty() {
        return ParsedLabel::Unparsed;
    }
    if let Some(label) = apply_rules(&text) {
        return label;
    }
    // fall back to the first sentence that mentions a keyword
    if let Some(sentence) = text
        .split(['.', '!', '?', ';', ':'])
        .map(str::trim)
        .find(|s| !s.is_empty() && has_keyword(s))
    {
        if let Some(label) = apply_rules(sentence) {
            return label;
        }
    }
    ParsedLabel::Unparsed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(raw: &str) -> ParsedLabel {
        parse_label(raw, AnswerFormat::YesNo)
    }

    #[test]
    fn leading_yes_and_no() {
        assert_eq!(
            parse("Yes, both statements describe the Netflix announcement."),
            ParsedLabel::Match
        );
        assert_eq!(parse("no"), ParsedLabel::NoMatch);
        assert_eq!(parse("  YES!"), ParsedLabel::Match);
        assert_eq!(parse("**No**, different events."), ParsedLabel::NoMatch);
    }

    #[test]
    fn negated_phrase_beats_embedded_match() {
        assert_eq!(
            parse("The statements do not match because the dates differ."),
            ParsedLabel::NoMatch
        );
        assert_eq!(
            parse("There is no match between these claims."),
            ParsedLabel::NoMatch
        );
        assert_eq!(parse("They don't match."), ParsedLabel::NoMatch);
        // curly apostrophe variant
        assert_eq!(parse("They don\u{2019}t match."), ParsedLabel::NoMatch);
    }

    #[test]
    fn standalone_match_word() {
        assert_eq!(parse("The two statements match."), ParsedLabel::Match);
        assert_eq!(parse("The answer is: match"), ParsedLabel::Match);
        // "matches"/"mismatch" are not the standalone word
        assert_eq!(
            parse("Statement 1 mismatches statement 2, clearly."),
            ParsedLabel::Unparsed
        );
    }

    #[test]
    fn sentence_scoped_fallback() {
        assert_eq!(
            parse("Let me think. Yes: both refer to the same storm."),
            ParsedLabel::Match
        );
        assert_eq!(
            parse("Considering the details carefully. No, they differ."),
            ParsedLabel::NoMatch
        );
        // keyword present but not sentence-leading: stays unparsed
        assert_eq!(parse("I would say no."), ParsedLabel::Unparsed);
    }

    #[test]
    fn contradiction_counts_as_no_match() {
        assert_eq!(
            parse("The statements are contradictory."),
            ParsedLabel::NoMatch
        );
        assert_eq!(
            parse("Statement 2 contradicts statement 1 about the year."),
            ParsedLabel::NoMatch
        );
        // but an explicit leading label wins
        assert_eq!(
            parse("Yes, despite a contradictory detail they describe the same event."),
            ParsedLabel::Match
        );
    }

    #[test]
    fn unparsed_cases() {
        assert_eq!(parse("Possibly related."), ParsedLabel::Unparsed);
        assert_eq!(parse(""), ParsedLabel::Unparsed);
        assert_eq!(parse("   \n\t "), ParsedLabel::Unparsed);
        assert_eq!(parse("The claims concern sports."), ParsedLabel::Unparsed);
    }

    #[test]
    fn case_insensitive_by_construction() {
        let samples = [
            "Yes, they describe the same event.",
            "The statements do not match.",
            "no",
            "They match.",
            "The statements are contradictory. 1 states X, 2 states Y.",
            "Possibly related.",
        ];
        for s in samples {
            assert_eq!(parse(s), parse(&s.to_uppercase()), "{s}");
            assert_eq!(parse(s), parse(&s.to_lowercase()), "{s}");
        }
    }

    #[test]
    fn totality_on_arbitrary_bytes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..500 {
            let len = rng.gen_range(0..120);
            let s: String = (0..len)
                .map(|_| char::from_u32(rng.gen_range(0x20..0x2FF)).unwrap_or(' '))
                .collect();
            let _ = parse(&s); // must not panic
        }
    }
}
