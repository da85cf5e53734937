//! Deterministic, splittable random streams.
//!
//! Every experiment takes a single 64-bit seed. Parallel rollouts get
//! children via [`split_rng`]; ChaCha streams make the children pairwise
//! independent without coordination.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SplitRng = ChaCha8Rng;

/// Deterministic stream for a seed: identical seed, identical draws.
pub fn seeded_rng(seed: u64) -> SplitRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child stream `index` of `seed`; children are pairwise distinct and
/// independent of the parent stream.
pub fn split_rng(seed: u64, index: u64) -> SplitRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 is the parent itself; children start at 1.
    rng.set_stream(index.wrapping_add(1));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(rng: &mut SplitRng, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn same_seed_same_stream() {
        let a = draws(&mut seeded_rng(42), 100);
        let b = draws(&mut seeded_rng(42), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = draws(&mut seeded_rng(1), 1);
        let b = draws(&mut seeded_rng(2), 1);
        assert_ne!(a, b);
    }

    #[test]
    fn split_children_pairwise_distinct() {
        let children: Vec<Vec<u64>> = (0..8).map(|i| draws(&mut split_rng(7, i), 100)).collect();
        for i in 0..children.len() {
            for j in (i + 1)..children.len() {
                assert_ne!(children[i], children[j], "children {i} and {j} collide");
            }
        }
        // children also differ from the parent stream
        let parent = draws(&mut seeded_rng(7), 100);
        for (i, c) in children.iter().enumerate() {
            assert_ne!(&parent, c, "child {i} equals parent");
        }
    }
}
