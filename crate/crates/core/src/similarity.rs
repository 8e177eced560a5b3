//! String matching used for `stop_at` navigation and label comparison.

use std::collections::BTreeSet;

/// Default threshold for `stop_at` matching.
pub const DEFAULT_STOP_THRESHOLD: f64 = 0.85;

/// Case-insensitive normalized Levenshtein ratio in `[0, 1]`.
///
/// Two empty strings are identical (ratio 1).
pub fn transcript_similarity(a: &str, b: &str) -> f64 {
    let a = a.trim().to_lowercase();
    let b = b.trim().to_lowercase();
    strsim::normalized_levenshtein(&a, &b)
}

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Jaccard overlap of the token sets. Empty against anything is 0.
pub fn token_overlap(a: &str, b: &str) -> f64 {
    let ta = tokens(a);
    let tb = tokens(b);
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let inter = ta.intersection(&tb).count() as f64;
    let union = ta.union(&tb).count() as f64;
    inter / union
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_is_case_insensitive() {
        assert_eq!(transcript_similarity("Submit, Button", "submit, button"), 1.0);
        assert_eq!(transcript_similarity("", ""), 1.0);
        assert!(transcript_similarity("Search, button", "Explore, tab") < 0.5);
    }

    #[test]
    fn near_match_clears_threshold() {
        // one edit out of 14 characters
        let s = transcript_similarity("Submit, button", "Submit, buttan");
        assert!(s >= DEFAULT_STOP_THRESHOLD, "{s}");
    }

    #[test]
    fn overlap_counts_shared_tokens() {
        assert_eq!(token_overlap("Search", "Explore"), 0.0);
        assert_eq!(token_overlap("Search options", "Search"), 0.5);
        assert_eq!(token_overlap("", "Search"), 0.0);
    }
}
