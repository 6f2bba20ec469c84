use std::collections::HashMap;

use super::TokenSeq;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Search nodes explored before settling for the best alignment found so far.
const SEARCH_BUDGET: usize = 200_000;

/// Exact-match unigram alignment summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
    /// False when the chunk search ran out of budget and `chunks` is only an
    /// upper bound (long code bodies).
    pub exact: bool,
}

/// METEOR restricted to exact matches: alignment with the maximum number of
/// matched unigrams and, among those, the fewest chunks.
pub fn meteor(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let alignment = meteor_alignment(candidate, reference);
    let m = alignment.matches as f64;
    if alignment.matches == 0 {
        return 0.0;
    }
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let fmean = precision * recall / (METEOR_ALPHA * precision + (1.0 - METEOR_ALPHA) * recall);
    let penalty = METEOR_GAMMA * (alignment.chunks as f64 / m).powf(METEOR_BETA);
    (100.0 * fmean * (1.0 - penalty)).clamp(0.0, 100.0)
}

pub fn meteor_alignment(candidate: &TokenSeq, reference: &TokenSeq) -> MeteorAlignment {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let cand = intern(&mut ids, candidate.tokens());
    let refs = intern(&mut ids, reference.tokens());
    let vocab = ids.len();

    let mut cand_count = vec![0usize; vocab];
    let mut ref_count = vec![0usize; vocab];
    cand.iter().for_each(|&t| cand_count[t as usize] += 1);
    refs.iter().for_each(|&t| ref_count[t as usize] += 1);
    let matches: usize = (0..vocab).map(|t| cand_count[t].min(ref_count[t])).sum();
    if matches == 0 {
        return MeteorAlignment {
            matches: 0,
            chunks: 0,
            exact: true,
        };
    }

    let greedy = greedy_chunks(&cand, &refs);
    let mut search = ChunkSearch {
        cand: &cand,
        refs: &refs,
        ref_positions: positions_by_token(&refs, vocab),
        used: vec![false; refs.len()],
        skips_left: (0..vocab)
            .map(|t| cand_count[t] - cand_count[t].min(ref_count[t]))
            .collect(),
        best: greedy,
        nodes: 0,
        exhausted: false,
    };
    search.run(0, None, 0);
    MeteorAlignment {
        matches,
        chunks: search.best,
        exact: !search.exhausted,
    }
}

fn intern<'a>(ids: &mut HashMap<&'a str, u32>, seq: &'a [String]) -> Vec<u32> {
    seq.iter()
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(t.as_str()).or_insert(next)
        })
        .collect()
}

fn positions_by_token(tokens: &[u32], vocab: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); vocab];
    for (j, &t) in tokens.iter().enumerate() {
        out[t as usize].push(j);
    }
    out
}

/// Repeatedly aligns the longest common run of still-unaligned tokens. Always
/// reaches the maximum match count; the chunk count is an upper bound.
fn greedy_chunks(cand: &[u32], refs: &[u32]) -> usize {
    let mut cand_used = vec![false; cand.len()];
    let mut ref_used = vec![false; refs.len()];
    let mut chunks = 0;
    loop {
        let mut best = (0usize, 0usize, 0usize); // (len, cand start, ref start)
        let mut prev = vec![0usize; refs.len() + 1];
        let mut cur = vec![0usize; refs.len() + 1];
        for i in 0..cand.len() {
            for j in 0..refs.len() {
                cur[j + 1] = if !cand_used[i] && !ref_used[j] && cand[i] == refs[j] {
                    prev[j] + 1
                } else {
                    0
                };
                let len = cur[j + 1];
                if len > best.0 {
                    best = (len, i + 1 - len, j + 1 - len);
                }
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        let (len, ci, rj) = best;
        if len == 0 {
            return chunks;
        }
        for k in 0..len {
            cand_used[ci + k] = true;
            ref_used[rj + k] = true;
        }
        chunks += 1;
    }
}

struct ChunkSearch<'a> {
    cand: &'a [u32],
    refs: &'a [u32],
    ref_positions: Vec<Vec<usize>>,
    used: Vec<bool>,
    /// How many more candidate tokens of each type may stay unaligned.
    skips_left: Vec<usize>,
    best: usize,
    nodes: usize,
    exhausted: bool,
}

impl ChunkSearch<'_> {
    /// Depth-first over candidate positions; `prev` is the reference index
    /// aligned to position `i - 1`, if any.
    fn run(&mut self, i: usize, prev: Option<usize>, chunks: usize) {
        if chunks >= self.best {
            return;
        }
        if i == self.cand.len() {
            self.best = chunks;
            return;
        }
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET {
            self.exhausted = true;
            return;
        }
        let t = self.cand[i] as usize;

        // Extending the current chunk first finds good bounds early.
        if let Some(j) = prev.map(|p| p + 1) {
            if j < self.refs.len() && !self.used[j] && self.refs[j] as usize == t {
                self.used[j] = true;
                self.run(i + 1, Some(j), chunks);
                self.used[j] = false;
            }
        }
        for k in 0..self.ref_positions[t].len() {
            let j = self.ref_positions[t][k];
            if self.used[j] || prev.map(|p| p + 1) == Some(j) {
                continue;
            }
            self.used[j] = true;
            self.run(i + 1, Some(j), chunks + 1);
            self.used[j] = false;
            if self.exhausted {
                return;
            }
        }
        if self.skips_left[t] > 0 {
            self.skips_left[t] -= 1;
            self.run(i + 1, None, chunks);
            self.skips_left[t] += 1;
        }
    }
}
