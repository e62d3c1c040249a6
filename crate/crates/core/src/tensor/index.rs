//! Flat row-major storage of tensor components: contravariant indices first.

use crate::numkernel::DScalar;

pub fn flat_index(dim: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

pub fn multi_index(dim: usize, rank: usize, mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; rank];
    for slot in (0..rank).rev() {
        out[slot] = flat % dim;
        flat /= dim;
    }
    out
}

pub fn count(dim: usize, rank: usize) -> usize {
    dim.pow(rank as u32)
}

/// Contracts slot `slot` of a rank-`rank` array against `m`:
/// `out[.., a, ..] = Σ_i m[a][i] t[.., i, ..]`.
pub fn transform_slot(
    t: &[DScalar],
    dim: usize,
    rank: usize,
    slot: usize,
    m: &[Vec<DScalar>],
) -> Vec<DScalar> {
    let stride = dim.pow((rank - slot - 1) as u32);
    let mut out = vec![DScalar::constant(0.0); t.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let a = (flat / stride) % dim;
        let base = flat - a * stride;
        let mut acc = DScalar::constant(0.0);
        for (i, mai) in m[a].iter().enumerate() {
            if mai.value() != 0.0 || mai.width() > 0 {
                acc += *mai * t[base + i * stride];
            }
        }
        *o = acc;
    }
    out
}

/// Swaps two slots.
pub fn transpose_slots(t: &[DScalar], dim: usize, rank: usize, s1: usize, s2: usize) -> Vec<DScalar> {
    (0..t.len())
        .map(|flat| {
            let mut idx = multi_index(dim, rank, flat);
            idx.swap(s1, s2);
            t[flat_index(dim, &idx)]
        })
        .collect()
}

/// Parity of a permutation given as an index list (true when odd).
pub fn is_odd(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut odd = false;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            odd = !odd;
        }
    }
    odd
}
