//! k-subset enumeration in lexicographic order, split into chunks so the
//! exhaustive oracles can run data-parallel with a deterministic tie-break.

use crate::exec::par_map_range;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
pub fn nth_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let mut x = next;
        loop {
            let count = binomial(n - x - 1, k - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            x += 1;
        }
        out.push(x);
        next = x + 1;
    }
    out
}

/// Advances `c` to the next k-subset of `0..n`; false once exhausted.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

const CHUNK: u128 = 2048;

/// Minimiser of `score` over all k-subsets of `0..n`. Ties go to the
/// lexicographically first subset; NaN scores are treated as `+inf`.
/// Returns `None` only when there are no subsets.
pub fn argmin_subsets<F>(n: usize, k: usize, score: F) -> Option<(Vec<usize>, f64)>
where
    F: Fn(&[usize]) -> f64 + Sync + Send,
{
    let total = binomial(n, k);
    if total == 0 {
        return None;
    }
    let chunks = total.div_ceil(CHUNK);
    let best_per_chunk = par_map_range(chunks as usize, |ci| {
        let start = ci as u128 * CHUNK;
        let len = CHUNK.min(total - start);
        let mut c = nth_combination(n, k, start);
        let mut best: Option<(Vec<usize>, f64)> = None;
        for step in 0..len {
            let mut v = score(&c);
            if v.is_nan() {
                v = f64::INFINITY;
            }
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((c.clone(), v));
            }
            if step + 1 < len {
                next_combination(&mut c, n);
            }
        }
        best
    });
    best_per_chunk
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(Vec<usize>, f64)>, cand| match acc {
            Some(a) if a.1 <= cand.1 => Some(a),
            _ => Some(cand),
        })
}
