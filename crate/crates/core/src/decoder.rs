//! Iterative interference-cancellation (peeling) decoding of a frame graph.
//!
//! The central decoder classifies every `(receiver, slot)` node as empty,
//! singleton or collision. Singleton slots decode without error; each
//! decoded device is then cancelled from every other slot that contains a
//! replica of it, across all receivers (spatial) and all slots (temporal).
//! Iterations are synchronous: all singletons present at the start of an
//! iteration are decoded as a batch before their cancellations take effect.
//! Decoding stops when every device node is decoded or no singleton is
//! left; the terminal decoded set is independent of the schedule.
//!
//! [`peel_decode`] runs in O(|E|) amortized using degree-tracked slot
//! queues; [`reference_decode`] recomputes slot states from scratch every
//! iteration and exists to guard the fast path in tests.

use crate::protocol::CsaGraph;

/// Residual classification of one slot node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotClass {
    /// No undecoded replica present.
    Empty,
    /// Exactly one undecoded replica.
    Singleton,
    /// Two or more collided replicas.
    Collision,
}

/// Classification plus the residual device set of one slot node.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub class: SlotClass,
    /// Device ids still colliding in this slot.
    pub residual: Vec<u32>,
}

/// Outcome of decoding one frame graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Decoded device ids, ascending.
    pub decoded: Vec<u32>,
    /// Number of synchronous iterations that decoded at least one device.
    pub iterations: usize,
    /// Devices decoded per iteration.
    pub per_iteration: Vec<usize>,
    /// Decoded device ids grouped by iteration, each group ascending.
    pub rounds: Vec<Vec<u32>>,
}

impl DecodeResult {
    fn from_rounds(mut rounds: Vec<Vec<u32>>) -> Self {
        for round in &mut rounds {
            round.sort_unstable();
        }
        let per_iteration: Vec<usize> = rounds.iter().map(Vec::len).collect();
        let mut decoded: Vec<u32> = rounds.iter().flatten().copied().collect();
        decoded.sort_unstable();
        Self { decoded: decoded.clone(), iterations: rounds.len(), per_iteration, rounds }
    }

    pub fn decoded_count(&self) -> usize {
        self.decoded.len()
    }
}

/// Classify every slot node of `graph` after removing `decoded_devices`.
pub fn classify_slots(graph: &CsaGraph, decoded_devices: &[u32]) -> Vec<SlotState> {
    let decoded: std::collections::HashSet<u32> = decoded_devices.iter().copied().collect();
    (0..graph.slot_count())
        .map(|s| {
            let residual: Vec<u32> = graph
                .slot_devices(s)
                .iter()
                .map(|&u| graph.device_id(u as usize))
                .filter(|id| !decoded.contains(id))
                .collect();
            let class = match residual.len() {
                0 => SlotClass::Empty,
                1 => SlotClass::Singleton,
                _ => SlotClass::Collision,
            };
            SlotState { class, residual }
        })
        .collect()
}

/// Peel the graph to its fixed point with degree-tracked slot queues.
pub fn peel_decode(graph: &CsaGraph) -> DecodeResult {
    let slot_count = graph.slot_count();
    let mut slot_degree: Vec<u32> = (0..slot_count)
        .map(|s| graph.slot_devices(s).len() as u32)
        .collect();
    let mut decoded = vec![false; graph.device_count()];

    let mut frontier: Vec<u32> = (0..slot_count as u32)
        .filter(|&s| slot_degree[s as usize] == 1)
        .collect();
    let mut rounds: Vec<Vec<u32>> = Vec::new();

    while !frontier.is_empty() {
        // Decode the batch of singletons visible at the iteration start.
        let mut batch: Vec<u32> = Vec::new();
        for &s in &frontier {
            if slot_degree[s as usize] != 1 {
                continue;
            }
            // The one undecoded device in this slot, unless an earlier
            // singleton of the same batch already claimed it.
            if let Some(&u) = graph
                .slot_devices(s as usize)
                .iter()
                .find(|&&u| !decoded[u as usize])
            {
                decoded[u as usize] = true;
                batch.push(u);
            }
        }
        if batch.is_empty() {
            break;
        }
        // Cancellation: remove every replica of each decoded device.
        let mut next = Vec::new();
        for &u in &batch {
            for &s in graph.device_slots(u as usize) {
                slot_degree[s as usize] -= 1;
                if slot_degree[s as usize] == 1 {
                    next.push(s);
                }
            }
        }
        rounds.push(batch.iter().map(|&u| graph.device_id(u as usize)).collect());
        frontier = next;
    }

    DecodeResult::from_rounds(rounds)
}

/// Same contract as [`peel_decode`], with no incremental bookkeeping:
/// every iteration rescans all slot nodes against the decoded set.
pub fn reference_decode(graph: &CsaGraph) -> DecodeResult {
    let mut decoded = vec![false; graph.device_count()];
    let mut rounds: Vec<Vec<u32>> = Vec::new();
    loop {
        let mut batch: Vec<u32> = Vec::new();
        for s in 0..graph.slot_count() {
            let residual: Vec<u32> = graph
                .slot_devices(s)
                .iter()
                .copied()
                .filter(|&u| !decoded[u as usize])
                .collect();
            if residual.len() == 1 {
                batch.push(residual[0]);
            }
        }
        batch.sort_unstable();
        batch.dedup();
        if batch.is_empty() {
            break;
        }
        for &u in &batch {
            decoded[u as usize] = true;
        }
        rounds.push(batch.iter().map(|&u| graph.device_id(u as usize)).collect());
    }
    DecodeResult::from_rounds(rounds)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Coverage, GainMatrix};
    use crate::protocol::{CsaGraph, DegreeDistribution, FrameInstance};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Random instance over a random support, small-world sized.
    fn random_graph(n: usize, m: usize, l: usize, seed: u64) -> CsaGraph {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if r.random::<f64>() < 0.6 { 1e-6 } else { 0.0 })
                    .collect()
            })
            .collect();
        let cov = Coverage::from_gains(GainMatrix::from_rows(&rows));
        let max_d = 1 + (seed as usize % l);
        let dist = DegreeDistribution::from_weights(
            &[(1usize, 0.4), (max_d, 0.6)].into_iter().collect(),
        )
        .unwrap();
        let frame = FrameInstance::sample(n, 0.6, &dist, l, &mut r).unwrap();
        CsaGraph::build(&frame, &cov)
    }

    /// Asynchronous peeling in random singleton order; an independent
    /// route to the same fixed point.
    fn randomized_async_decode(graph: &CsaGraph, seed: u64) -> Vec<u32> {
        let mut r = rng(seed);
        let mut decoded = vec![false; graph.device_count()];
        loop {
            let singles: Vec<u32> = (0..graph.slot_count())
                .filter_map(|s| {
                    let residual: Vec<u32> = graph
                        .slot_devices(s)
                        .iter()
                        .copied()
                        .filter(|&u| !decoded[u as usize])
                        .collect();
                    (residual.len() == 1).then(|| residual[0])
                })
                .collect();
            if singles.is_empty() {
                break;
            }
            let pick = singles[r.random_range(0..singles.len())];
            decoded[pick as usize] = true;
        }
        let mut ids: Vec<u32> = decoded
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(u, _)| graph.device_id(u))
            .collect();
        ids.sort_unstable();
        ids
    }

    #[test]
    fn slot_classification() {
        // Slot 0 empty, slot 1 singleton, slot 2 has three devices.
        let g = CsaGraph::from_edges(
            vec![10, 11, 12],
            1,
            3,
            &[(0, 1), (0, 2), (1, 2), (2, 2)],
        );
        let states = classify_slots(&g, &[]);
        assert_eq!(states[0].class, SlotClass::Empty);
        assert_eq!(states[1].class, SlotClass::Singleton);
        assert_eq!(states[1].residual, vec![10]);
        assert_eq!(states[2].class, SlotClass::Collision);
        assert_eq!(states[2].residual.len(), 3);

        // Removing device 10 leaves slot 2 a two-way collision.
        let states = classify_slots(&g, &[10]);
        assert_eq!(states[1].class, SlotClass::Empty);
        assert_eq!(states[2].residual, vec![11, 12]);
    }

    #[test]
    fn chain_decodes_in_two_iterations() {
        // Device A alone in slot 1, A and B colliding in slot 0: the first
        // iteration decodes A, cancellation frees slot 0, the second
        // iteration decodes B.
        let g = CsaGraph::from_edges(vec![7, 8], 1, 2, &[(0, 0), (0, 1), (1, 0)]);
        let res = peel_decode(&g);
        assert_eq!(res.decoded, vec![7, 8]);
        assert_eq!(res.iterations, 2);
        assert_eq!(res.per_iteration, vec![1, 1]);
        assert_eq!(res.rounds, vec![vec![7], vec![8]]);
        assert_eq!(reference_decode(&g), res);
    }

    #[test]
    fn two_device_stopping_set() {
        // Both devices hold replicas in the same two slots and nowhere
        // else; no singleton ever appears.
        let g = CsaGraph::from_edges(vec![3, 4], 2, 1, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        let res = peel_decode(&g);
        assert!(res.decoded.is_empty());
        assert_eq!(res.iterations, 0);
        assert_eq!(reference_decode(&g), res);
    }

    #[test]
    fn empty_graph() {
        let g = CsaGraph::from_edges(vec![], 2, 3, &[]);
        let res = peel_decode(&g);
        assert!(res.decoded.is_empty());
        assert_eq!(res.iterations, 0);
        assert_eq!(reference_decode(&g), res);
    }

    #[test]
    fn isolated_device_never_decodes() {
        let g = CsaGraph::from_edges(vec![1, 2], 1, 1, &[(0, 0)]);
        let res = peel_decode(&g);
        assert_eq!(res.decoded, vec![1]);
    }

    #[test]
    fn spatial_cancellation_across_receivers() {
        // Device 0 received at both APs in the single slot; device 1 only
        // at AP 0. AP 1 sees a singleton for device 0, cancelling it from
        // AP 0 leaves device 1 a singleton there.
        let g = CsaGraph::from_edges(vec![20, 21], 2, 1, &[(0, 0), (0, 1), (1, 0)]);
        let res = peel_decode(&g);
        assert_eq!(res.decoded, vec![20, 21]);
        assert_eq!(res.iterations, 2);
    }

    #[test]
    fn equivalence_against_reference_on_random_instances() {
        for seed in 0..2000u64 {
            let g = random_graph(
                1 + (seed % 10) as usize,
                1 + (seed % 2) as usize,
                1 + (seed % 4) as usize,
                seed,
            );
            let fast = peel_decode(&g);
            let slow = reference_decode(&g);
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn decoded_set_schedule_invariant() {
        for seed in 0..300u64 {
            let g = random_graph(8, 2, 3, seed);
            let sync = peel_decode(&g).decoded;
            let async_order = randomized_async_decode(&g, seed.wrapping_add(999));
            assert_eq!(sync, async_order, "seed {seed}");
        }
    }

    #[test]
    fn progress_is_strict_until_termination() {
        for seed in 0..200u64 {
            let g = random_graph(10, 2, 4, seed);
            let res = peel_decode(&g);
            assert!(res.per_iteration.iter().all(|&c| c >= 1));
            assert_eq!(res.per_iteration.len(), res.iterations);
            assert!(res.iterations <= g.device_count() + 1);
        }
    }

    #[test]
    fn removing_a_slot_node_never_grows_the_decoded_set() {
        for seed in 0..300u64 {
            let g = random_graph(9, 2, 3, seed);
            let full: Vec<(u32, u32)> = (0..g.device_count())
                .flat_map(|u| {
                    g.device_slots(u).iter().map(move |&s| (u as u32, s)).collect::<Vec<_>>()
                })
                .collect();
            let victim = (seed as u32 * 7) % (g.slot_count() as u32);
            let pruned: Vec<(u32, u32)> =
                full.iter().copied().filter(|&(_, s)| s != victim).collect();
            let g_pruned = CsaGraph::from_edges(
                g.device_ids().to_vec(),
                g.rx_count(),
                g.slots_per_frame(),
                &pruned,
            );
            let with_slot = peel_decode(&g).decoded;
            let without_slot = peel_decode(&g_pruned).decoded;
            let with_set: std::collections::HashSet<u32> = with_slot.into_iter().collect();
            for id in without_slot {
                assert!(with_set.contains(&id), "seed {seed}: extra slot lost device {id}");
            }
        }
    }

    proptest! {
        #[test]
        fn fast_and_reference_agree(n in 1usize..10, m in 1usize..3, l in 1usize..5, seed in 0u64..1000) {
            let g = random_graph(n, m, l, seed);
            prop_assert_eq!(peel_decode(&g), reference_decode(&g));
        }
    }
}
