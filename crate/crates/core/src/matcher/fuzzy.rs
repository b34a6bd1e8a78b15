//! Indel-based fuzzy matching.
//!
//! `partial_ratio` takes the best indel similarity between the shorter string and
//! any contiguous substring of the longer one. LCS lengths come from a
//! bit-parallel scan (Hyyrö), which lets every start position extend its
//! window one character at a time in O(⌈m/64⌉).

use std::collections::HashMap;

use crate::ingest::fold;

/// Per-character match masks for a pattern of arbitrary length.
struct PatternMasks {
    len: usize,
    words: usize,
    ascii: Vec<u64>,
    other: HashMap<char, Vec<u64>>,
    last_mask: u64,
}

impl PatternMasks {
    fn new(pattern: &[char]) -> Self {
        let len = pattern.len();
        let words = len.div_ceil(64).max(1);
        let mut ascii = vec![0u64; 128 * words];
        let mut other: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in pattern.iter().enumerate() {
            let (w, bit) = (i / 64, 1u64 << (i % 64));
            if (c as u32) < 128 {
                ascii[c as usize * words + w] |= bit;
            } else {
                other.entry(c).or_insert_with(|| vec![0; words])[w] |= bit;
            }
        }
        let rem = len % 64;
        let last_mask = if rem == 0 {
            u64::MAX
        } else {
            (1u64 << rem) - 1
        };
        PatternMasks {
            len,
            words,
            ascii,
            other,
            last_mask,
        }
    }

    fn contains(&self, c: char) -> bool {
        if (c as u32) < 128 {
            let base = c as usize * self.words;
            self.ascii[base..base + self.words].iter().any(|&m| m != 0)
        } else {
            self.other.contains_key(&c)
        }
    }

    #[inline]
    fn mask(&self, c: char, w: usize) -> u64 {
        if (c as u32) < 128 {
            self.ascii[c as usize * self.words + w]
        } else {
            self.other.get(&c).map_or(0, |m| m[w])
        }
    }
}

/// Running LCS state of a fixed pattern against a growing text.
struct LcsScan<'a> {
    pm: &'a PatternMasks,
    state: Vec<u64>,
}

impl<'a> LcsScan<'a> {
    fn new(pm: &'a PatternMasks) -> Self {
        LcsScan {
            pm,
            state: vec![u64::MAX; pm.words],
        }
    }

    #[inline]
    fn push(&mut self, c: char) {
        let mut carry = 0u64;
        for w in 0..self.pm.words {
            let s = self.state[w];
            let u = s & self.pm.mask(c, w);
            let (x1, c1) = s.overflowing_add(u);
            let (x2, c2) = x1.overflowing_add(carry);
            carry = (c1 | c2) as u64;
            self.state[w] = x2 | s.wrapping_sub(u);
        }
    }

    fn lcs(&self) -> usize {
        let last = self.pm.words - 1;
        self.state
            .iter()
            .enumerate()
            .map(|(w, &s)| {
                let m = if w == last {
                    self.pm.last_mask
                } else {
                    u64::MAX
                };
                (!s & m).count_ones() as usize
            })
            .sum::<usize>()
            .min(self.pm.len)
    }
}

fn lcs_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let pm = PatternMasks::new(a);
    let mut scan = LcsScan::new(&pm);
    for &c in b {
        scan.push(c);
    }
    scan.lcs()
}

#[inline]
fn indel_ratio(len_a: usize, len_b: usize, lcs: usize) -> f64 {
    let total = len_a + len_b;
    if total == 0 {
        return 100.0;
    }
    let indel = total - 2 * lcs;
    100.0 * (1.0 - indel as f64 / total as f64)
}

/// Insert/delete edit distance between two strings (no folding).
pub fn indel_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    a.len() + b.len() - 2 * lcs_chars(&a, &b)
}

/// Normalized indel similarity of the two folded strings, in [0, 100].
pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = fold(a).chars().collect();
    let b: Vec<char> = fold(b).chars().collect();
    indel_ratio(a.len(), b.len(), lcs_chars(&a, &b))
}

/// Best ratio of `short` against any substring of `long`.
fn best_substring_ratio(short: &[char], long: &[char]) -> f64 {
    let m = short.len();
    let pm = PatternMasks::new(short);
    let mut best = 0.0f64;
    for start in 0..long.len() {
        if !pm.contains(long[start]) {
            continue;
        }
        let mut scan = LcsScan::new(&pm);
        for (offset, &c) in long[start..].iter().enumerate() {
            let len = offset + 1;
            // Windows of length >= len score at most 2m / (m + max(len, m)).
            if indel_ratio(m, len.max(m), m) <= best {
                break;
            }
            scan.push(c);
            if !pm.contains(c) {
                continue;
            }
            let score = indel_ratio(m, len, scan.lcs());
            if score > best {
                best = score;
                if best >= 100.0 {
                    return 100.0;
                }
            }
        }
    }
    best
}

/// Partial ratio in [0, 100] after case folding and whitespace collapsing.
///
/// The shorter string is compared against every contiguous substring of the
/// longer one; equal-length inputs are tried in both directions so the score is
/// symmetric. Both empty gives 100, exactly one empty gives 0.
pub fn partial_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = fold(a).chars().collect();
    let b: Vec<char> = fold(b).chars().collect();
    partial_ratio_chars(&a, &b)
}

pub(crate) fn partial_ratio_chars(a: &[char], b: &[char]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 100.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    use std::cmp::Ordering::*;
    match a.len().cmp(&b.len()) {
        Less => best_substring_ratio(a, b),
        Greater => best_substring_ratio(b, a),
        Equal => best_substring_ratio(a, b).max(best_substring_ratio(b, a)),
    }
}
