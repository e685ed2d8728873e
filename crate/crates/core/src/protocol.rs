//! Per-frame randomness and the spatio-temporal CSA bipartite graph.
//!
//! Every active device picks a replication degree `d` from a common
//! distribution and transmits `d` copies of its packet in `d` distinct
//! slots of the frame. The frame is then summarized as a bipartite graph
//! between active device nodes and `(receiver, slot)` nodes; an edge means
//! the replica was received with positive gain. The decoder only ever sees
//! this graph.
//!
//! Randomness for one frame is consumed in a fixed, documented order so
//! that identical seeds reproduce identical frames everywhere:
//! 1. one uniform draw per device index, in ascending order (activity),
//! 2. per active device in ascending index order: one uniform draw for the
//!    degree, then the replica slot subset by partial Fisher-Yates.

use crate::geometry::Coverage;
use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("degree distribution: {0}")]
    InvalidDistribution(String),
    #[error("replica degree {degree} exceeds the {slots} slots per frame")]
    DegreeExceedsSlots { degree: usize, slots: usize },
}

/// Replication degree distribution with probabilities over degrees >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    /// (degree, probability) with strictly increasing degrees and
    /// probabilities summing to 1.
    entries: Vec<(usize, f64)>,
    /// Cumulative probabilities aligned with `entries`.
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    /// Normalize raw nonnegative weights into a distribution. Weights whose
    /// sum deviates from 1 by more than 1e-6 are accepted with a warning.
    pub fn from_weights(weights: &BTreeMap<usize, f64>) -> Result<Self, ProtocolError> {
        let mut entries = Vec::new();
        for (&degree, &w) in weights {
            if degree == 0 {
                return Err(ProtocolError::InvalidDistribution(
                    "degree 0 is not a valid replication degree".into(),
                ));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(ProtocolError::InvalidDistribution(format!(
                    "weight for degree {degree} must be nonnegative and finite, got {w}"
                )));
            }
            if w > 0.0 {
                entries.push((degree, w));
            }
        }
        let sum: f64 = entries.iter().map(|(_, w)| w).sum();
        if sum <= 0.0 {
            return Err(ProtocolError::InvalidDistribution(
                "at least one degree weight must be positive".into(),
            ));
        }
        if (sum - 1.0).abs() > 1e-6 {
            log::warn!("degree weights sum to {sum}; normalizing");
        }
        for (_, w) in &mut entries {
            *w /= sum;
        }
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for (_, w) in &entries {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self { entries, cumulative })
    }

    /// Degenerate distribution sending exactly `degree` replicas.
    /// `single(1)` is plain slotted ALOHA, `single(2)` is CRDSA.
    pub fn single(degree: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(degree, 1.0);
        Self::from_weights(&weights).expect("degenerate distribution is valid")
    }

    /// 16-max-degree distribution optimized for single-receiver IRSA,
    /// normalized from its published weights.
    pub fn optimized_d16() -> Self {
        let raw = [
            (2, 0.498),
            (3, 0.221),
            (4, 0.038),
            (5, 0.076),
            (6, 0.040),
            (7, 0.01),
            (8, 0.09),
            (9, 0.07),
            (11, 0.03),
            (14, 0.043),
            (15, 0.08),
            (16, 0.058),
        ];
        Self::from_weights(&raw.into_iter().collect()).expect("static table is valid")
    }

    /// Probability of one degree.
    pub fn probability(&self, degree: usize) -> f64 {
        self.entries
            .iter()
            .find(|(d, _)| *d == degree)
            .map_or(0.0, |(_, w)| *w)
    }

    /// Largest degree with positive probability.
    pub fn max_degree(&self) -> usize {
        self.entries.last().map_or(0, |(d, _)| *d)
    }

    /// Mean replication degree.
    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|(d, w)| *d as f64 * w).sum()
    }

    /// Supported degrees with their probabilities.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Draw one degree; consumes exactly one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        for (idx, cum) in self.cumulative.iter().enumerate() {
            if u < *cum {
                return self.entries[idx].0;
            }
        }
        self.entries.last().expect("distribution is nonempty").0
    }
}

/// One frame's random realization: who transmitted, and where.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInstance {
    /// Active device indices, ascending.
    pub active: Vec<u32>,
    /// Replica slots per active device (parallel to `active`), each a
    /// sorted set of distinct slot indices in `0..slots_per_frame`.
    pub replica_slots: Vec<Vec<u32>>,
    /// Frame length L.
    pub slots_per_frame: usize,
}

impl FrameInstance {
    /// Sample a full frame in the documented draw order.
    pub fn sample<R: Rng + ?Sized>(
        device_count: usize,
        activation_probability: f64,
        degrees: &DegreeDistribution,
        slots_per_frame: usize,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        if degrees.max_degree() > slots_per_frame {
            return Err(ProtocolError::DegreeExceedsSlots {
                degree: degrees.max_degree(),
                slots: slots_per_frame,
            });
        }
        let active = sample_activity(device_count, activation_probability, rng);
        let mut replica_slots = Vec::with_capacity(active.len());
        for _ in &active {
            let d = degrees.sample(rng);
            replica_slots.push(place_replicas(d, slots_per_frame, rng)?);
        }
        Ok(Self { active, replica_slots, slots_per_frame })
    }
}

/// Independent Bernoulli activation per device; one uniform draw per
/// device index, ascending. Returns the active indices in ascending order.
pub fn sample_activity<R: Rng + ?Sized>(
    device_count: usize,
    activation_probability: f64,
    rng: &mut R,
) -> Vec<u32> {
    let mut active = Vec::new();
    for i in 0..device_count {
        let u: f64 = rng.random();
        if u < activation_probability {
            active.push(i as u32);
        }
    }
    active
}

/// Uniformly random `degree`-subset of `0..slots_per_frame` via partial
/// Fisher-Yates, returned sorted. Exact uniformity at any degree/slot
/// ratio, `degree` range draws consumed.
pub fn place_replicas<R: Rng + ?Sized>(
    degree: usize,
    slots_per_frame: usize,
    rng: &mut R,
) -> Result<Vec<u32>, ProtocolError> {
    if degree == 0 || degree > slots_per_frame {
        return Err(ProtocolError::DegreeExceedsSlots { degree, slots: slots_per_frame });
    }
    let mut pool: Vec<u32> = (0..slots_per_frame as u32).collect();
    for k in 0..degree {
        let j = rng.random_range(k..slots_per_frame);
        pool.swap(k, j);
    }
    let mut slots = pool[..degree].to_vec();
    slots.sort_unstable();
    Ok(slots)
}

/// Bipartite frame graph between active device nodes and receiver slot
/// nodes, stored as forward and reverse compressed adjacency.
///
/// Device node `u` stands for device `device_ids[u]`; slot node `j * L + k`
/// stands for slot `k` at receiver `j`. An edge joins them exactly when the
/// device is active, covered by receiver `j`, and transmitted in slot `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsaGraph {
    device_ids: Vec<u32>,
    rx_count: usize,
    slots_per_frame: usize,
    device_offsets: Vec<u32>,
    device_targets: Vec<u32>,
    slot_offsets: Vec<u32>,
    slot_targets: Vec<u32>,
}

impl CsaGraph {
    /// Assemble the graph for one frame against a coverage support.
    pub fn build(frame: &FrameInstance, coverage: &Coverage) -> Self {
        let l = frame.slots_per_frame;
        let rx_count = coverage.rx_count();
        let slot_count = rx_count * l;
        let device_count = frame.active.len();

        let mut device_offsets = Vec::with_capacity(device_count + 1);
        device_offsets.push(0u32);
        let mut device_targets = Vec::new();
        let mut slot_degrees = vec![0u32; slot_count];
        for (u, &device) in frame.active.iter().enumerate() {
            for &j in coverage.tx_rxs(device as usize) {
                let base = j as usize * l;
                for &k in &frame.replica_slots[u] {
                    let sid = (base + k as usize) as u32;
                    device_targets.push(sid);
                    slot_degrees[sid as usize] += 1;
                }
            }
            device_offsets.push(device_targets.len() as u32);
        }

        let mut slot_offsets = Vec::with_capacity(slot_count + 1);
        let mut acc = 0u32;
        slot_offsets.push(0);
        for d in &slot_degrees {
            acc += d;
            slot_offsets.push(acc);
        }
        let mut cursor: Vec<u32> = slot_offsets[..slot_count].to_vec();
        let mut slot_targets = vec![0u32; device_targets.len()];
        for u in 0..device_count {
            for idx in device_offsets[u]..device_offsets[u + 1] {
                let sid = device_targets[idx as usize] as usize;
                slot_targets[cursor[sid] as usize] = u as u32;
                cursor[sid] += 1;
            }
        }

        Self {
            device_ids: frame.active.clone(),
            rx_count,
            slots_per_frame: l,
            device_offsets,
            device_targets,
            slot_offsets,
            slot_targets,
        }
    }

    /// Assemble a graph from an explicit edge list over device nodes and
    /// slot node ids. Intended for tests and synthetic topologies; edges
    /// must be unique.
    pub fn from_edges(
        device_ids: Vec<u32>,
        rx_count: usize,
        slots_per_frame: usize,
        edges: &[(u32, u32)],
    ) -> Self {
        let device_count = device_ids.len();
        let slot_count = rx_count * slots_per_frame;
        let mut by_device: Vec<Vec<u32>> = vec![Vec::new(); device_count];
        for &(u, sid) in edges {
            assert!((u as usize) < device_count, "device node out of range");
            assert!((sid as usize) < slot_count, "slot node out of range");
            by_device[u as usize].push(sid);
        }
        let mut device_offsets = vec![0u32];
        let mut device_targets = Vec::with_capacity(edges.len());
        for adj in &mut by_device {
            adj.sort_unstable();
            device_targets.extend_from_slice(adj);
            device_offsets.push(device_targets.len() as u32);
        }
        let mut slot_adj: Vec<Vec<u32>> = vec![Vec::new(); slot_count];
        for (u, adj) in by_device.iter().enumerate() {
            for &sid in adj {
                slot_adj[sid as usize].push(u as u32);
            }
        }
        let mut slot_offsets = vec![0u32];
        let mut slot_targets = Vec::with_capacity(edges.len());
        for adj in &slot_adj {
            slot_targets.extend_from_slice(adj);
            slot_offsets.push(slot_targets.len() as u32);
        }
        Self {
            device_ids,
            rx_count,
            slots_per_frame,
            device_offsets,
            device_targets,
            slot_offsets,
            slot_targets,
        }
    }

    pub fn device_count(&self) -> usize {
        self.device_ids.len()
    }

    pub fn slot_count(&self) -> usize {
        self.rx_count * self.slots_per_frame
    }

    pub fn rx_count(&self) -> usize {
        self.rx_count
    }

    pub fn slots_per_frame(&self) -> usize {
        self.slots_per_frame
    }

    pub fn edge_count(&self) -> usize {
        self.device_targets.len()
    }

    /// Device id represented by a device node.
    pub fn device_id(&self, node: usize) -> u32 {
        self.device_ids[node]
    }

    pub fn device_ids(&self) -> &[u32] {
        &self.device_ids
    }

    /// Slot nodes adjacent to a device node.
    pub fn device_slots(&self, node: usize) -> &[u32] {
        let lo = self.device_offsets[node] as usize;
        let hi = self.device_offsets[node + 1] as usize;
        &self.device_targets[lo..hi]
    }

    /// Device nodes adjacent to a slot node.
    pub fn slot_devices(&self, slot: usize) -> &[u32] {
        let lo = self.slot_offsets[slot] as usize;
        let hi = self.slot_offsets[slot + 1] as usize;
        &self.slot_targets[lo..hi]
    }

    /// Receiver and slot index of a slot node id.
    pub fn slot_coords(&self, slot: usize) -> (usize, usize) {
        (slot / self.slots_per_frame, slot % self.slots_per_frame)
    }
}

/// Empirical node degree histogram: `fractions[d]` is the fraction of
/// nodes with degree `d` (degree-0 nodes included). Empty when the node
/// class itself is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeHistogram {
    pub fractions: Vec<f64>,
    pub node_count: usize,
}

impl DegreeHistogram {
    fn from_degrees(degrees: impl Iterator<Item = usize>, node_count: usize) -> Self {
        if node_count == 0 {
            return Self { fractions: Vec::new(), node_count: 0 };
        }
        let mut counts = Vec::new();
        for d in degrees {
            if d >= counts.len() {
                counts.resize(d + 1, 0usize);
            }
            counts[d] += 1;
        }
        let fractions = counts.iter().map(|&c| c as f64 / node_count as f64).collect();
        Self { fractions, node_count }
    }

    pub fn fraction(&self, degree: usize) -> f64 {
        self.fractions.get(degree).copied().unwrap_or(0.0)
    }
}

/// Empirical device and slot node degree distributions of a graph.
pub fn measure_degree_distributions(graph: &CsaGraph) -> (DegreeHistogram, DegreeHistogram) {
    let device = DegreeHistogram::from_degrees(
        (0..graph.device_count()).map(|u| graph.device_slots(u).len()),
        graph.device_count(),
    );
    let slot = DegreeHistogram::from_degrees(
        (0..graph.slot_count()).map(|s| graph.slot_devices(s).len()),
        graph.slot_count(),
    );
    (device, slot)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
