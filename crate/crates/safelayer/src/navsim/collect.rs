//! Internal-test-data collection: labeled (measurement, action) records
//! sampled from policy rollouts.

use crate::core::{split_rng, InternalTestRecord, InternalTestSet};
use crate::navsim::policy::GreedyPolicy;
use crate::navsim::world::{GridWorld, MoveAction, WorldGen};
use crate::{Error, Result, Scalar};
use rand::Rng;

/// Steps between samples, so consecutive records decorrelate.
const SAMPLE_EVERY: usize = 10;

/// Steps per world before a fresh one is drawn.
const STEPS_PER_WORLD: usize = 200;

/// A collected set plus the ground truth behind each record, kept for
/// audit replay.
pub struct CollectedData {
    pub set: InternalTestSet<Scalar>,
    /// (world snapshot, candidate action) behind each record, in order.
    pub provenance: Vec<(GridWorld, MoveAction)>,
    /// True when the balance target could not be met within the step budget.
    pub flagged_partial: bool,
}

/// Collects `n` label-balanced records of (measurement ⊕ action, label) by
/// rolling the policy through generated worlds, sampling every tenth step.
/// The over-represented class is rejected until balance catches up.
pub fn collect_internal_test(
    gen: &WorldGen,
    policy: &GreedyPolicy,
    n: usize,
    seed: u64,
) -> Result<CollectedData> {
    if n < 2 {
        return Err(Error::validation("need at least two records"));
    }
    let mut world_rng = split_rng(seed, 0);
    let mut step_rng = split_rng(seed, 1);
    let mut records: Vec<InternalTestRecord<Scalar>> = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    let mut counts = [0usize; 2];
    let target_per_class = [n - n / 2, n / 2];
    let budget = 100 * n * SAMPLE_EVERY;
    let mut steps = 0usize;
    'outer: while records.len() < n && steps < budget {
        let mut world = gen.sample(&mut world_rng);
        for local in 0..STEPS_PER_WORLD {
            if records.len() >= n || steps >= budget {
                break 'outer;
            }
            steps += 1;
            if local % SAMPLE_EVERY == 0 {
                // Pick a candidate of the class that is still behind.
                let needed: Vec<usize> = (0..2)
                    .filter(|&c| counts[c] < target_per_class[c])
                    .collect();
                let measurement = world.measurement(&mut step_rng);
                let mut options: Vec<MoveAction> = MoveAction::ALL
                    .iter()
                    .copied()
                    .filter(|&a| needed.contains(&world.label_action(a)))
                    .collect();
                if !options.is_empty() {
                    let pick = options.remove(step_rng.gen_range(0..options.len()));
                    let label = world.label_action(pick);
                    records.push(InternalTestRecord {
                        measurement: GridWorld::classifier_input(&measurement, pick),
                        label,
                    });
                    provenance.push((world.clone(), pick));
                    counts[label] += 1;
                }
            }
            let ranked = policy.ranked_actions(&world, &mut step_rng);
            world.step(ranked[0], &mut step_rng);
        }
    }
    let flagged_partial = records.len() < n;
    if records.is_empty() {
        return Err(Error::validation("collected no records within budget"));
    }
    Ok(CollectedData {
        set: InternalTestSet::new(records, 2)?,
        provenance,
        flagged_partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_gen() -> WorldGen {
        WorldGen {
            width: 9,
            height: 9,
            hazard_density: 0.15,
            sensor_noise: 0.1,
            horizon: 3,
        }
    }

    #[test]
    fn two_records_one_per_class() {
        let data = collect_internal_test(&test_gen(), &GreedyPolicy::default(), 2, 11).unwrap();
        assert!(!data.flagged_partial);
        assert_eq!(data.set.per_state_counts(), &[1, 1]);
    }

    #[test]
    fn collection_is_seed_deterministic() {
        let a = collect_internal_test(&test_gen(), &GreedyPolicy::default(), 64, 42).unwrap();
        let b = collect_internal_test(&test_gen(), &GreedyPolicy::default(), 64, 42).unwrap();
        assert_eq!(a.set, b.set);
    }

    #[test]
    fn labels_replay_from_provenance() {
        let data = collect_internal_test(&test_gen(), &GreedyPolicy::default(), 128, 7).unwrap();
        for (record, (world, action)) in data.set.records().iter().zip(&data.provenance) {
            assert_eq!(record.label, world.label_action(*action));
        }
    }

    #[test]
    fn balance_within_one_record() {
        let data = collect_internal_test(&test_gen(), &GreedyPolicy::default(), 101, 3).unwrap();
        let c = data.set.per_state_counts();
        assert!(!data.flagged_partial);
        assert!(c[0].abs_diff(c[1]) <= 1, "counts {c:?}");
    }
}
