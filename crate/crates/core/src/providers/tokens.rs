//! Token counting.
//!
//! The built-in scheme approximates BPE tokenizers without a vocabulary:
//! `ceil((chars / 4 + words * 4 / 3) / 2)`, the mean of the usual
//! characters-per-token and tokens-per-word heuristics. Characters are Unicode
//! scalar values; words are whitespace-separated runs. Computed in integers as
//! `ceil((3 * chars + 16 * words) / 24)`.

/// A pluggable tokenizer.
pub trait TokenCounter: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> u32;
}

/// The built-in approximation.
#[derive(Debug, Default, Clone, Copy)]
pub struct ApproxTokenCounter;

impl TokenCounter for ApproxTokenCounter {
    fn name(&self) -> &str {
        "approx-chars-words-v1"
    }

    fn count(&self, text: &str) -> u32 {
        count_tokens(text)
    }
}

/// Built-in token count of `text`.
pub fn count_tokens(text: &str) -> u32 {
    let chars = text.chars().count() as u64;
    let words = text.split_whitespace().count() as u64;
    tokens_for(chars, words)
}

pub(crate) fn tokens_for(chars: u64, words: u64) -> u32 {
    (3 * chars + 16 * words).div_ceil(24) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("   "), 1);
    }

    #[test]
    fn case_study_minimal_response() {
        let text = "Answer: C) 13\n\nArithmetic sequence with $a_1 = -36$, $d = 7$, $a_n = 48$. \
Using $n = \\frac{a_n - a_1}{d} + 1 = \\frac{48-(-36)}{7} + 1 = 13$.";
        // 140 chars, 29 words.
        assert_eq!(count_tokens(text), 37);
        let rel = (f64::from(count_tokens(text)) - 43.0).abs() / 43.0;
        assert!(rel <= 0.15);
    }

    proptest! {
        #[test]
        fn monotone_under_concatenation(a in "\\PC{0,60}", b in "\\PC{0,60}") {
            let ab = format!("{a}{b}");
            prop_assert!(count_tokens(&ab) >= count_tokens(&a).max(count_tokens(&b)));
        }
    }
}
