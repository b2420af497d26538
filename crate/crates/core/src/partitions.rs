//! Partitions of `K` into at most `M` parts.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// `p_K(M)`, the number of partitions of `k` into at most `m` parts.
pub fn partition_count(k: usize, m: usize) -> BigUint {
    partition_table(k, m).swap_remove(k)
}

/// `p_j(m)` for every `j in 0..=k`, via `p(j, m) = p(j - m, m) + p(j, m - 1)`.
pub fn partition_table(k: usize, m: usize) -> Vec<BigUint> {
    // Row for "at most 0 parts": only the empty partition of 0.
    let mut row: Vec<BigUint> = (0..=k).map(|j| if j == 0 { BigUint::one() } else { BigUint::zero() }).collect();
    for parts in 1..=m {
        for j in parts..=k {
            let prev = row[j - parts].clone();
            row[j] += prev;
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(k: usize, max_part: usize) -> u64 {
        // Partitions into parts of size at most `max_part` (conjugate count).
        if k == 0 {
            return 1;
        }
        (1..=max_part.min(k)).map(|p| brute(k - p, p)).sum()
    }

    #[test]
    fn known_values() {
        for m in 1..6 {
            assert_eq!(partition_count(0, m), BigUint::one());
        }
        assert_eq!(partition_count(6, 3), BigUint::from(7u32));
        assert_eq!(partition_count(50, 3), BigUint::from(234u32));
        assert_eq!(partition_count(5, 0), BigUint::zero());
    }

    #[test]
    fn matches_brute_force() {
        for m in 1..=6 {
            let table = partition_table(30, m);
            for (k, v) in table.iter().enumerate() {
                assert_eq!(*v, BigUint::from(brute(k, m)), "p_{k}({m})");
            }
        }
    }

    #[test]
    fn large_values_do_not_overflow() {
        // p(400) unrestricted exceeds u64.
        let v = partition_count(400, 400);
        assert_eq!(v.to_string(), "6727090051741041926");
        assert!(partition_count(1000, 1000).bits() > 64);
    }
}
