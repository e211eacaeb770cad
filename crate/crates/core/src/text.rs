//! Word segmentation shared by keyword extraction and term matching.

/// Splits `text` on whitespace and strips punctuation from both ends of each
/// token. Tokens that are pure punctuation (such as `&` or `-`) become `None`
/// so that multi-word phrases never bridge across them.
///
/// Interior punctuation is kept: `spell-playing` and `children's` are single
/// words.
pub fn words(text: &str) -> Vec<Option<&str>> {
    text.split_whitespace()
        .map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed)
            }
        })
        .collect()
}

/// Lowercased variant of [`words`].
pub fn lower_words(text: &str) -> Vec<Option<String>> {
    words(text)
        .into_iter()
        .map(|w| w.map(str::to_lowercase))
        .collect()
}

/// Number of whitespace-delimited tokens.
pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// True when `phrase` (space-joined lowercase words) occurs as a contiguous
/// word sequence of `text` under [`lower_words`] segmentation.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let needle: Vec<&str> = phrase.split(' ').collect();
    let hay = lower_words(text);
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    hay.windows(needle.len()).any(|window| {
        window
            .iter()
            .zip(&needle)
            .all(|(w, n)| w.as_deref() == Some(*n))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_edge_punctuation() {
        assert_eq!(
            words("Rolling toy, (air) gun."),
            vec![Some("Rolling"), Some("toy"), Some("air"), Some("gun")]
        );
    }

    #[test]
    fn punctuation_tokens_are_breaks() {
        assert_eq!(
            words("Drilling & Mining"),
            vec![Some("Drilling"), None, Some("Mining")]
        );
        assert_eq!(words("Children's spell-playing toy")[1], Some("spell-playing"));
    }

    #[test]
    fn phrase_containment() {
        assert!(contains_phrase("Rolling toy air gun.", "air gun"));
        assert!(!contains_phrase("Rolling toy air gun.", "toy gun"));
        assert!(!contains_phrase("Drilling & mining", "drilling mining"));
    }
}
