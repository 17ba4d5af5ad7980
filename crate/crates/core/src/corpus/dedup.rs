use rayon::prelude::*;

use super::Transaction;

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.90;

/// Character-level edit distance (unit-cost insert, delete, substitute).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)`, counted in characters. Two empty
/// strings are identical.
pub fn fuzzy_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_chars(&a, &b)
}

fn ratio_chars(a: &[char], b: &[char]) -> f64 {
    let m = a.len().max(b.len());
    if m == 0 {
        return 1.0;
    }
    1.0 - levenshtein_chars(a, b) as f64 / m as f64
}

const BUCKETS: usize = 64;

struct Fingerprint {
    chars: Vec<char>,
    hist: [u16; BUCKETS],
}

impl Fingerprint {
    fn new(s: &str) -> Self {
        let chars: Vec<char> = s.chars().collect();
        let mut hist = [0u16; BUCKETS];
        for c in &chars {
            let slot = &mut hist[*c as usize % BUCKETS];
            *slot = slot.saturating_add(1);
        }
        Self { chars, hist }
    }

    /// A lower bound on the edit distance: every edit moves at most two
    /// units of histogram mass.
    fn distance_lower_bound(&self, other: &Self) -> usize {
        let l1: usize = self
            .hist
            .iter()
            .zip(&other.hist)
            .map(|(a, b)| a.abs_diff(*b) as usize)
            .sum();
        l1.div_ceil(2)
    }

    fn exceeds(&self, other: &Self, threshold: f64) -> bool {
        let m = self.chars.len().max(other.chars.len());
        if m == 0 {
            return 1.0 > threshold;
        }
        let bound = 1.0 - self.distance_lower_bound(other) as f64 / m as f64;
        if bound <= threshold {
            return false;
        }
        ratio_chars(&self.chars, &other.chars) > threshold
    }
}

/// Greedy first-seen-wins deduplication over raw descriptions.
///
/// A transaction survives iff its ratio against every previously kept
/// description is at most `threshold`.
pub fn deduplicate(corpus: &[Transaction], threshold: f64) -> Vec<Transaction> {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "dedup threshold must lie in (0, 1], got {threshold}"
    );
    let mut kept: Vec<Fingerprint> = Vec::new();
    let mut out = Vec::new();
    for t in corpus {
        let fp = Fingerprint::new(t.description.as_str());
        let duplicate = if kept.len() > 256 {
            kept.par_iter().any(|k| k.exceeds(&fp, threshold))
        } else {
            kept.iter().any(|k| k.exceeds(&fp, threshold))
        };
        if !duplicate {
            kept.push(fp);
            out.push(t.clone());
        }
    }
    out
}
