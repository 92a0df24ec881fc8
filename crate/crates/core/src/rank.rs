//! Deterministic orderings. Ties always go to the lower index.

use crate::scalar::{total_cmp, Scalar};

/// Indices of `scores` sorted by descending score; equal scores keep index order.
pub fn rank_descending<S: Scalar>(scores: &[S]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so equal keys keep ascending index order.
    order.sort_by(|&a, &b| total_cmp(scores[b], scores[a]));
    order
}

/// The `k` best indices by descending score, same tie rule as [`rank_descending`].
pub fn top_k<S: Scalar>(scores: &[S], k: usize) -> Vec<usize> {
    let mut order = rank_descending(scores);
    order.truncate(k);
    order
}

/// Splitmix64 finalizer, used to derive independent child seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
