use super::TokenSeq;

/// Length of the longest common subsequence. Uses a bit-parallel row update
/// when `b` fits in a machine word, the O(n·m) table otherwise.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs_len_by(a, b, |x, y| x == y)
}

pub fn lcs_len_by<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    if b.len() <= 64 {
        return lcs_bits(a, b, eq);
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if eq(x, y) { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

// Hyyrö's formulation: zero bits of `v` mark LCS increments along `b`.
// Match masks are built once per distinct token of `b`.
fn lcs_bits<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    let mut keys: [Option<&T>; 64] = [None; 64];
    let mut masks = [0u64; 64];
    let mut distinct = 0;
    for (j, y) in b.iter().enumerate() {
        let k = (0..distinct)
            .find(|&k| keys[k].is_some_and(|t| eq(t, y)))
            .unwrap_or_else(|| {
                keys[distinct] = Some(y);
                distinct += 1;
                distinct - 1
            });
        masks[k] |= 1 << j;
    }
    let mut v = !0u64;
    for x in a {
        let Some(k) = (0..distinct).find(|&k| keys[k].is_some_and(|t| eq(t, x))) else {
            continue;
        };
        let u = v & masks[k];
        v = v.wrapping_add(u) | (v - u);
    }
    let live = if b.len() == 64 { !0 } else { (1u64 << b.len()) - 1 };
    (!v & live).count_ones() as usize
}

// Tokens are short; an inline byte loop beats a memcmp call per cell.
fn token_eq(x: &str, y: &str) -> bool {
    x.len() == y.len() && x.bytes().zip(y.bytes()).all(|(p, q)| p == q)
}

/// ROUGE-L F1 (β = 1), scaled to 0–100.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let (c, r) = (candidate.tokens(), reference.tokens());
    let lcs = lcs_len_by(c, r, |x, y| token_eq(x, y));
    if lcs == 0 {
        return 0.0;
    }
    // 2PR / (P + R) with P = lcs/|c|, R = lcs/|r|, in a single rounding.
    200.0 * lcs as f64 / (c.len() + r.len()) as f64
}
