//! Bulk-synchronous iterative execution across partitions.
//!
//! Each query vertex carries a 64-bit label. Within a superstep every
//! partition runs the program for its owned query vertices against frozen
//! labels L, staging results in L'. At the barrier, owned labels flip
//! L ← L', owners publish their values to the partition-sharded update
//! store, and ghost copies in other partitions refresh from the store.
//! Copies inside the owner's partition refresh through shared state, so
//! only cross-partition refreshes count as messages. Reads are epoch-gated:
//! a value written in superstep s is visible only in supersteps after s.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bitmap::{AnyBitmap, BitmapKind};
use crate::engine::{PartitionGraph, StateSlots, SubgraphView};
use crate::error::{Error, Result};
use crate::graph::VertexId;

/// In-process sharded key-value store, one shard per partition.
pub struct UpdateStore {
    shards: Vec<Mutex<HashMap<VertexId, (usize, u64)>>>,
}

impl UpdateStore {
    pub fn new(partitions: usize) -> Self {
        UpdateStore { shards: (0..partitions).map(|_| Mutex::new(HashMap::new())).collect() }
    }

    /// Publishes `value` for `qv` in the owner's shard, tagged with the
    /// superstep that produced it.
    pub fn write(&self, shard: usize, qv: VertexId, epoch: usize, value: u64) {
        self.shards[shard].lock().expect("store lock").insert(qv, (epoch, value));
    }

    /// Reads the value published at exactly `epoch`; anything else means
    /// the owner never wrote this superstep.
    pub fn read(&self, shard: usize, qv: VertexId, epoch: usize) -> Result<u64> {
        match self.shards[shard].lock().expect("store lock").get(&qv) {
            Some(&(e, v)) if e == epoch => Ok(v),
            Some(&(e, _)) => Err(Error::Consistency(format!(
                "stale value for ghost {qv}: epoch {e}, expected {epoch}"
            ))),
            None => Err(Error::Consistency(format!("no owner value for ghost {qv}"))),
        }
    }
}

/// When the superstep loop stops early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    /// Stop when every owned query vertex voted to halt.
    AllHalted,
    /// Stop when no label changed in a superstep.
    Fixpoint,
}

/// An iterative vertex program over 64-bit labels.
pub trait BspProgram: Sync {
    /// Initial label of any vertex (query or copy).
    fn init(&self, v: VertexId) -> u64;

    /// One superstep for one owned query vertex. `labels` resolves the
    /// frozen previous-superstep label of any vertex in the view; returns
    /// the new label and a halt vote.
    fn step(
        &self,
        view: &SubgraphView<'_>,
        labels: &dyn Fn(VertexId) -> u64,
        current: u64,
    ) -> (u64, bool);
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperstepTiming {
    pub superstep: usize,
    pub compute_ms: f64,
    pub barrier_ms: f64,
    pub message_ms: f64,
}

#[derive(Debug)]
pub struct BspOutcome {
    /// Final label of every query vertex.
    pub labels: BTreeMap<VertexId, u64>,
    pub supersteps: usize,
    pub converged: bool,
    pub timings: Vec<SuperstepTiming>,
    /// Cross-partition ghost refreshes per superstep.
    pub messages_per_superstep: usize,
    /// Total cross-partition refreshes over the whole run.
    pub total_messages: usize,
}

struct PartitionState<'a> {
    part: &'a PartitionGraph,
    /// Frozen labels L, one per resident vertex position.
    labels: Vec<u64>,
    /// Slots whose query vertex this partition owns.
    owned_slots: Vec<usize>,
    /// (vertex position, owner partition) for resident query-vertex copies
    /// owned elsewhere.
    ghost_refresh: Vec<(usize, VertexId, usize)>,
    vbits: Vec<AnyBitmap>,
    ebits: Vec<AnyBitmap>,
    state: StateSlots,
}

/// Runs `program` to convergence (or `max_supersteps`). `ownership` maps
/// each query vertex to its owning bin id; partitions must be the
/// materialization of those bins in order.
pub fn run_iterative<P: BspProgram>(
    partitions: &[PartitionGraph],
    program: &P,
    ownership: &BTreeMap<VertexId, usize>,
    max_supersteps: usize,
    convergence: Convergence,
) -> Result<BspOutcome> {
    let bin_to_part: HashMap<usize, usize> =
        partitions.iter().enumerate().map(|(i, p)| (p.bin_id, i)).collect();
    let owner_partition = |qv: VertexId| -> Option<usize> {
        ownership.get(&qv).and_then(|bin| bin_to_part.get(bin)).copied()
    };
    let mut states: Vec<PartitionState<'_>> = partitions
        .iter()
        .enumerate()
        .map(|(pidx, part)| {
            let labels = part.vertices.iter().map(|&v| program.init(v)).collect();
            let owned_slots = part
                .subgraph_slots
                .iter()
                .enumerate()
                .filter(|(_, &(_, qv))| owner_partition(qv) == Some(pidx))
                .map(|(s, _)| s)
                .collect();
            let ghost_refresh = part
                .vertices
                .iter()
                .enumerate()
                .filter_map(|(pos, &v)| {
                    let owner = owner_partition(v)?;
                    (owner != pidx && part.ghosts.contains(&v)).then_some((pos, v, owner))
                })
                .collect();
            let (vbits, ebits) = part.build_full_bitmaps(BitmapKind::Word);
            let state = StateSlots::new(part.subgraph_count());
            PartitionState { part, labels, owned_slots, ghost_refresh, vbits, ebits, state }
        })
        .collect();
    let messages_per_superstep: usize = states.iter().map(|s| s.ghost_refresh.len()).sum();
    let store = UpdateStore::new(partitions.len());

    let mut timings = Vec::new();
    let mut converged = false;
    let mut supersteps = 0;
    for superstep in 0..max_supersteps {
        supersteps = superstep + 1;
        // compute phase: partitions in parallel against frozen labels
        let t0 = Instant::now();
        let compute: Vec<(Vec<(usize, u64, bool)>, f64)> = states
            .par_iter()
            .map(|ps| {
                let t = Instant::now();
                let lookup = |v: VertexId| -> u64 {
                    ps.part.position_of(v).map(|p| ps.labels[p]).unwrap_or(u64::MAX)
                };
                let out = ps
                    .owned_slots
                    .iter()
                    .map(|&slot| {
                        let qv = ps.part.subgraph_slots[slot].1;
                        let view = ps.part.view(slot, &ps.vbits, &ps.ebits, &ps.state);
                        let current = lookup(qv);
                        let (next, halt) = program.step(&view, &lookup, current);
                        (slot, next, halt)
                    })
                    .collect();
                (out, t.elapsed().as_secs_f64() * 1e3)
            })
            .collect();
        let compute_wall = t0.elapsed().as_secs_f64() * 1e3;
        let compute_max =
            compute.iter().map(|(_, ms)| *ms).fold(0.0f64, f64::max);
        // barrier: the rendezvous cost is the wall time minus the busiest
        // partition's own compute
        let barrier_ms = (compute_wall - compute_max).max(0.0);

        // message phase: flip L <- L' for owned labels, publish to the
        // store, then refresh cross-partition ghosts
        let t1 = Instant::now();
        let mut any_changed = false;
        let mut all_halted = true;
        for (pidx, (updates, _)) in compute.iter().enumerate() {
            for &(slot, next, halt) in updates {
                let qv = states[pidx].part.subgraph_slots[slot].1;
                let pos = states[pidx].part.position_of(qv).expect("qv resident");
                if states[pidx].labels[pos] != next {
                    any_changed = true;
                }
                states[pidx].labels[pos] = next;
                all_halted &= halt;
                store.write(pidx, qv, superstep, next);
            }
        }
        let refreshed: Vec<Vec<(usize, u64)>> = states
            .par_iter()
            .map(|ps| {
                ps.ghost_refresh
                    .iter()
                    .map(|&(pos, qv, owner)| Ok((pos, store.read(owner, qv, superstep)?)))
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        for (ps, updates) in states.iter_mut().zip(refreshed) {
            for (pos, value) in updates {
                ps.labels[pos] = value;
            }
        }
        let message_ms = t1.elapsed().as_secs_f64() * 1e3;
        timings.push(SuperstepTiming {
            superstep,
            compute_ms: compute_max,
            barrier_ms,
            message_ms,
        });
        let done = match convergence {
            Convergence::Fixpoint => !any_changed,
            Convergence::AllHalted => all_halted,
        };
        if done {
            converged = true;
            break;
        }
    }

    let mut labels = BTreeMap::new();
    for (pidx, ps) in states.iter().enumerate() {
        for &slot in &ps.owned_slots {
            let qv = ps.part.subgraph_slots[slot].1;
            let pos = ps.part.position_of(qv).expect("qv resident");
            labels.insert(qv, ps.labels[pos]);
        }
        let _ = pidx;
    }
    Ok(BspOutcome {
        labels,
        supersteps,
        converged,
        timings,
        messages_per_superstep,
        total_messages: messages_per_superstep * supersteps,
    })
}

/// Two-level fold: pre-aggregate per partition, then fold the partials at
/// the coordinator. `f` must be associative and commutative.
pub fn aggregate<T, F>(per_partition: &[Vec<T>], identity: T, f: F) -> T
where
    T: Clone + Send + Sync,
    F: Fn(T, T) -> T + Sync,
{
    let partials: Vec<T> = per_partition
        .par_iter()
        .map(|msgs| msgs.iter().cloned().fold(identity.clone(), &f))
        .collect();
    partials.into_iter().fold(identity, f)
}
