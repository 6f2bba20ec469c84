use std::collections::HashMap;

use super::TokenSeq;

pub const BLEU_MAX_ORDER: usize = 4;
/// Substituted for a zero modified precision before taking the log.
pub const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with clipped n-gram precisions (n = 1..4, uniform weights),
/// ε-smoothing of zero precisions and the standard brevity penalty against
/// the closest reference length. Scaled to 0–100.
pub fn bleu(candidate: &TokenSeq, references: &[TokenSeq]) -> f64 {
    let cand = candidate.tokens();
    if cand.is_empty() || references.is_empty() {
        return 0.0;
    }

    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let cand_counts = ngram_counts(cand, n);
        let total: usize = cand_counts.values().sum();
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for reference in references {
            for (gram, count) in ngram_counts(reference.tokens(), n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, &count)| count.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if total == 0 { 0.0 } else { clipped as f64 / total as f64 };
        let precision = if precision == 0.0 { BLEU_EPSILON } else { precision };
        log_sum += precision.ln() / BLEU_MAX_ORDER as f64;
    }

    let c = cand.len();
    // closest reference length, shorter one on ties
    let r = references
        .iter()
        .map(TokenSeq::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0);
    let brevity = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };

    (100.0 * brevity * log_sum.exp()).clamp(0.0, 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSeq {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_long_enough_is_100() {
        let s = seq("#pragma omp parallel for private ( i )");
        assert_eq!(bleu(&s, std::slice::from_ref(&s)), 100.0);
    }

    #[test]
    fn short_candidate_hand_computed() {
        // p1 = p2 = 1, p3 = p4 = ε, BP = exp(1 - 3/2)
        let got = bleu(&seq("the cat"), &[seq("the cat sat")]);
        let expected = 100.0 * (-0.5f64).exp() * (0.25 * 2.0 * 1e-9f64.ln()).exp();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn empty_candidate_is_zero() {
        assert_eq!(bleu(&seq(""), &[seq("a b")]), 0.0);
        assert_eq!(bleu(&seq("a b"), &[]), 0.0);
    }

    #[test]
    fn clipping_limits_repeated_tokens() {
        // "the the the the" vs "the cat": p1 = 1/4 after clipping
        let got = bleu(&seq("the the the the"), &[seq("the cat")]);
        let expected = 100.0 * (0.25 * (0.25f64.ln() + 3.0 * 1e-9f64.ln())).exp();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn best_reference_counts_are_used() {
        let cand = seq("a b c d");
        let refs = [seq("x y z w"), seq("a b c d")];
        assert_eq!(bleu(&cand, &refs), 100.0);
    }
}
