//! Partition materialization and bitmap-scoped execution.
//!
//! Each bin becomes an in-memory `PartitionGraph` holding the union of its
//! subgraphs. Every vertex and edge carries a bitmap: bit b set means the
//! element belongs to subgraph b. A `SubgraphView` filters all graph
//! accesses through one bit position, so a user program sees exactly its
//! subgraph and nothing else; the scope guarantee is structural, not a
//! convention. Programs run in one of three modes: one bit at a time
//! (serial), the full bit vector at once (parallel workers), or fixed-size
//! batches whose bitmaps are re-initialized between batches.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bitmap::{AnyBitmap, Bitmap, BitmapKind};
use crate::error::{Error, Result};
use crate::extraction::ExtractionQuery;
use crate::graph::{AttributeRecord, AttributeValue, PropertyGraph, VertexId};
use crate::packing::PackingSolution;

/// How subgraph programs are scheduled over a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// One subgraph in flight; single-bit bitmaps, minimal memory.
    SingleBitSerial,
    /// Full-width bitmaps; all subgraphs dispatched to workers at once.
    VectorParallel,
    /// Fixed-width bitmaps re-initialized between batches.
    Batched { batch_size: usize },
}

/// Default width for batched mode.
pub const DEFAULT_BATCH_SIZE: usize = 3000;

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub mode: ExecutionMode,
    pub bitmap: BitmapKind,
    /// Worker threads for parallel modes; 0 means the rayon default.
    pub workers: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: ExecutionMode::Batched { batch_size: DEFAULT_BATCH_SIZE },
            bitmap: BitmapKind::Word,
            workers: 0,
        }
    }
}

/// One bin materialized in memory: the union of its subgraphs plus the
/// per-slot membership needed to build bitmaps.
#[derive(Debug)]
pub struct PartitionGraph {
    pub bin_id: usize,
    pub directed: bool,
    /// Resident vertices, ascending.
    pub vertices: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    /// Edges as vertex-position pairs; undirected edges stored once (lo, hi).
    pub edges: Vec<(usize, usize)>,
    out_adj: Vec<Vec<(usize, usize)>>,
    in_adj: Vec<Vec<(usize, usize)>>,
    vertex_attrs: Vec<AttributeRecord>,
    edge_attrs: Vec<AttributeRecord>,
    /// Bit slot -> (index into the solution's subgraph list, query vertex).
    pub subgraph_slots: Vec<(usize, VertexId)>,
    /// Slot -> member vertex positions.
    vertex_membership: Vec<Vec<usize>>,
    /// Slot -> induced edge indices (both endpoints members).
    edge_membership: Vec<Vec<usize>>,
    pub ghosts: BTreeSet<VertexId>,
}

impl PartitionGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn subgraph_count(&self) -> usize {
        self.subgraph_slots.len()
    }

    pub fn position_of(&self, v: VertexId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// A view onto one slot against full-width bitmaps (bit == slot), for
    /// callers that drive execution themselves (the BSP loop).
    pub fn view<'a>(
        &'a self,
        slot: usize,
        vertex_bits: &'a [AnyBitmap],
        edge_bits: &'a [AnyBitmap],
        state: &'a StateSlots,
    ) -> SubgraphView<'a> {
        SubgraphView { part: self, vertex_bits, edge_bits, bit: slot, slot, state }
    }

    /// Full-width membership bitmaps (one bit per subgraph), used by tests
    /// and by iterative execution where all subgraphs are live.
    pub fn build_full_bitmaps(&self, kind: BitmapKind) -> (Vec<AnyBitmap>, Vec<AnyBitmap>) {
        let width = self.subgraph_count().max(1);
        let mut vbits: Vec<AnyBitmap> =
            (0..self.vertices.len()).map(|_| AnyBitmap::new(kind, width)).collect();
        let mut ebits: Vec<AnyBitmap> =
            (0..self.edges.len()).map(|_| AnyBitmap::new(kind, width)).collect();
        for (slot, members) in self.vertex_membership.iter().enumerate() {
            for &pos in members {
                vbits[pos].set(slot).expect("slot within width");
            }
        }
        for (slot, members) in self.edge_membership.iter().enumerate() {
            for &idx in members {
                ebits[idx].set(slot).expect("slot within width");
            }
        }
        (vbits, ebits)
    }
}

/// Builds one `PartitionGraph` per bin: residents, induced edges passing
/// P_E, projected attributes, membership slots, and ghost flags.
pub fn materialize_partitions(
    graph: &PropertyGraph,
    solution: &PackingSolution,
    query: &ExtractionQuery,
) -> Result<Vec<PartitionGraph>> {
    let mut partitions = Vec::with_capacity(solution.bins.len());
    for bin in &solution.bins {
        // the bin's resident set must be exactly the union of its subgraphs
        let mut union: BTreeSet<VertexId> = BTreeSet::new();
        for &i in &bin.subgraphs {
            union.extend(solution.subgraphs[i].member_ids());
        }
        if !union.iter().eq(bin.resident.keys()) {
            return Err(Error::Integrity(format!(
                "bin {} resident set inconsistent with its assigned subgraphs",
                bin.id
            )));
        }
        let vertices: Vec<VertexId> = bin.resident.keys().copied().collect();
        let index: HashMap<VertexId, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let project = |attrs: Option<&AttributeRecord>, keep: &[String]| -> AttributeRecord {
            attrs
                .map(|a| {
                    a.iter()
                        .filter(|(k, _)| keep.contains(k))
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect()
                })
                .unwrap_or_default()
        };
        let vertex_attrs: Vec<AttributeRecord> = vertices
            .iter()
            .map(|&v| project(graph.vertex_attrs(v), &query.projection.vertex_attrs))
            .collect();
        let mut edges = Vec::new();
        let mut edge_attrs = Vec::new();
        let mut out_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vertices.len()];
        let mut in_adj: Vec<Vec<(usize, usize)>> =
            if graph.is_directed() { vec![Vec::new(); vertices.len()] } else { Vec::new() };
        for (upos, &u) in vertices.iter().enumerate() {
            for &v in graph.neighbors(u) {
                if !graph.is_directed() && v < u {
                    continue; // undirected edge visited from its low endpoint
                }
                let Some(&vpos) = index.get(&v) else { continue };
                if !query.edge_filter.matches(graph.edge_attrs_of(u, v)) {
                    continue;
                }
                let eidx = edges.len();
                edges.push((upos, vpos));
                edge_attrs
                    .push(project(graph.edge_attrs_of(u, v), &query.projection.edge_attrs));
                out_adj[upos].push((vpos, eidx));
                if graph.is_directed() {
                    in_adj[vpos].push((upos, eidx));
                } else if upos != vpos {
                    out_adj[vpos].push((upos, eidx));
                }
            }
        }
        let mut subgraph_slots = Vec::with_capacity(bin.subgraphs.len());
        let mut vertex_membership = Vec::with_capacity(bin.subgraphs.len());
        let mut edge_membership = Vec::with_capacity(bin.subgraphs.len());
        for &i in &bin.subgraphs {
            let sg = &solution.subgraphs[i];
            subgraph_slots.push((i, sg.query_vertex));
            let members: Vec<usize> = sg.member_ids().map(|v| index[&v]).collect();
            let member_set: BTreeSet<usize> = members.iter().copied().collect();
            vertex_membership.push(members);
            let induced: Vec<usize> = edges
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| member_set.contains(&a) && member_set.contains(&b))
                .map(|(e, _)| e)
                .collect();
            edge_membership.push(induced);
        }
        partitions.push(PartitionGraph {
            bin_id: bin.id,
            directed: graph.is_directed(),
            vertices,
            index,
            edges,
            out_adj,
            in_adj,
            vertex_attrs,
            edge_attrs,
            subgraph_slots,
            vertex_membership,
            edge_membership,
            ghosts: bin.ghosts.clone(),
        });
    }
    Ok(partitions)
}

/// Per-subgraph writable state: one slot per bit slot, writable only by
/// the view that owns it.
pub struct StateSlots {
    values: Vec<AtomicU64>,
    written: Vec<AtomicBool>,
}

impl StateSlots {
    pub fn new(n: usize) -> Self {
        StateSlots {
            values: (0..n).map(|_| AtomicU64::new(0)).collect(),
            written: (0..n).map(|_| AtomicBool::new(false)).collect(),
        }
    }

    pub fn get(&self, slot: usize) -> Option<u64> {
        if self.written[slot].load(Ordering::Acquire) {
            Some(self.values[slot].load(Ordering::Acquire))
        } else {
            None
        }
    }
}

/// A scope-restricted handle onto one subgraph of a partition. Every
/// accessor filters through the active bit, so elements outside the
/// subgraph are unobservable. The view cannot outlive its execution scope
/// (enforced by lifetimes).
pub struct SubgraphView<'a> {
    part: &'a PartitionGraph,
    vertex_bits: &'a [AnyBitmap],
    edge_bits: &'a [AnyBitmap],
    /// Bit position within the currently live bitmap width.
    bit: usize,
    /// Slot within the partition's subgraph list.
    slot: usize,
    state: &'a StateSlots,
}

impl<'a> SubgraphView<'a> {
    fn vbit(&self, pos: usize) -> bool {
        self.vertex_bits[pos].test(self.bit).expect("bit within width")
    }

    fn ebit(&self, idx: usize) -> bool {
        self.edge_bits[idx].test(self.bit).expect("bit within width")
    }

    pub fn query_vertex(&self) -> VertexId {
        self.part.subgraph_slots[self.slot].1
    }

    pub fn is_directed(&self) -> bool {
        self.part.directed
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.part.position_of(v).map_or(false, |p| self.vbit(p))
    }

    /// Member vertices, ascending.
    pub fn vertices(&self) -> Vec<VertexId> {
        self.part
            .vertices
            .iter()
            .enumerate()
            .filter(|(p, _)| self.vbit(*p))
            .map(|(_, &v)| v)
            .collect()
    }

    pub fn vertex_count(&self) -> usize {
        (0..self.part.vertices.len()).filter(|&p| self.vbit(p)).count()
    }

    /// Induced edges; undirected edges reported once as (lo, hi).
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        self.part
            .edges
            .iter()
            .enumerate()
            .filter(|(e, _)| self.ebit(*e))
            .map(|(_, &(a, b))| (self.part.vertices[a], self.part.vertices[b]))
            .collect()
    }

    /// Scoped neighbors of `v` (out-neighbors on directed graphs).
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        let Some(pos) = self.part.position_of(v) else { return Vec::new() };
        if !self.vbit(pos) {
            return Vec::new();
        }
        self.part.out_adj[pos]
            .iter()
            .filter(|&&(n, e)| self.vbit(n) && self.ebit(e))
            .map(|&(n, _)| self.part.vertices[n])
            .collect()
    }

    pub fn in_neighbors(&self, v: VertexId) -> Vec<VertexId> {
        if !self.part.directed {
            return self.neighbors(v);
        }
        let Some(pos) = self.part.position_of(v) else { return Vec::new() };
        if !self.vbit(pos) {
            return Vec::new();
        }
        self.part.in_adj[pos]
            .iter()
            .filter(|&&(n, e)| self.vbit(n) && self.ebit(e))
            .map(|&(n, _)| self.part.vertices[n])
            .collect()
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors(v).len()
    }

    /// Scoped adjacency test; on directed graphs, u → v.
    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        let (Some(up), Some(vp)) = (self.part.position_of(u), self.part.position_of(v)) else {
            return false;
        };
        if !self.vbit(up) || !self.vbit(vp) {
            return false;
        }
        self.part.out_adj[up].iter().any(|&(n, e)| n == vp && self.ebit(e))
    }

    pub fn attr(&self, v: VertexId, name: &str) -> Option<&AttributeValue> {
        let pos = self.part.position_of(v)?;
        if !self.vbit(pos) {
            return None;
        }
        self.part.vertex_attrs[pos].get(name)
    }

    pub fn edge_attr(&self, u: VertexId, v: VertexId, name: &str) -> Option<&AttributeValue> {
        let (up, vp) = (self.part.position_of(u)?, self.part.position_of(v)?);
        if !self.vbit(up) || !self.vbit(vp) {
            return None;
        }
        let &(_, e) = self.part.out_adj[up]
            .iter()
            .find(|&&(n, e)| n == vp && self.ebit(e))?;
        self.part.edge_attrs[e].get(name)
    }

    /// Writes this subgraph's state slot. Writing any other query vertex's
    /// slot is a contract violation.
    pub fn write_state(&self, qv: VertexId, value: u64) -> Result<()> {
        if qv != self.query_vertex() {
            return Err(Error::ContractViolation(format!(
                "program for query vertex {} attempted to write state of {qv}",
                self.query_vertex()
            )));
        }
        self.state.values[self.slot].store(value, Ordering::Release);
        self.state.written[self.slot].store(true, Ordering::Release);
        Ok(())
    }
}

/// Everything observable from one `execute` call.
pub struct ExecutionOutcome<O> {
    /// Program return values keyed by query vertex.
    pub results: BTreeMap<VertexId, O>,
    /// Per-subgraph failures; other subgraphs are unaffected.
    pub errors: BTreeMap<VertexId, Error>,
    /// Values written through `write_state`.
    pub states: BTreeMap<VertexId, u64>,
    /// Maximum concurrently-live bitmap bits: elements × live width.
    pub peak_live_bits: usize,
    /// Analytic bitmap footprint at the widest point, in bytes.
    pub peak_bitmap_bytes: usize,
    pub elapsed: Duration,
}

fn build_scoped_bitmaps(
    part: &PartitionGraph,
    kind: BitmapKind,
    chunk: &[usize],
) -> (Vec<AnyBitmap>, Vec<AnyBitmap>) {
    let width = chunk.len().max(1);
    let mut vbits: Vec<AnyBitmap> =
        (0..part.vertices.len()).map(|_| AnyBitmap::new(kind, width)).collect();
    let mut ebits: Vec<AnyBitmap> =
        (0..part.edges.len()).map(|_| AnyBitmap::new(kind, width)).collect();
    for (bit, &slot) in chunk.iter().enumerate() {
        for &pos in &part.vertex_membership[slot] {
            vbits[pos].set(bit).expect("bit within width");
        }
        for &idx in &part.edge_membership[slot] {
            ebits[idx].set(bit).expect("bit within width");
        }
    }
    (vbits, ebits)
}

/// Runs `program` once per subgraph of the partition. The mode controls
/// scheduling and bitmap width only; results are mode-independent for
/// deterministic programs.
pub fn execute<O, F>(
    part: &PartitionGraph,
    program: F,
    cfg: &EngineConfig,
) -> Result<ExecutionOutcome<O>>
where
    O: Send,
    F: Fn(&SubgraphView<'_>) -> Result<O> + Sync,
{
    let start = Instant::now();
    let q = part.subgraph_count();
    let width = match cfg.mode {
        ExecutionMode::SingleBitSerial => 1,
        ExecutionMode::VectorParallel => q.max(1),
        ExecutionMode::Batched { batch_size } => {
            if batch_size == 0 {
                return Err(Error::Config("batch_size must be at least 1".into()));
            }
            batch_size.min(q.max(1))
        }
    };
    let serial = matches!(cfg.mode, ExecutionMode::SingleBitSerial);
    let state = StateSlots::new(q);
    let mut results = BTreeMap::new();
    let mut errors = BTreeMap::new();
    let mut peak_bitmap_bytes = 0usize;
    let slots: Vec<usize> = (0..q).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    for chunk in slots.chunks(width.max(1)) {
        // bitmaps are re-initialized for every batch
        let (vbits, ebits) = build_scoped_bitmaps(part, cfg.bitmap, chunk);
        let bytes: usize = vbits.iter().map(|b| b.memory_estimate()).sum::<usize>()
            + ebits.iter().map(|b| b.memory_estimate()).sum::<usize>();
        peak_bitmap_bytes = peak_bitmap_bytes.max(bytes);
        let run_one = |(bit, &slot): (usize, &usize)| {
            let view = SubgraphView {
                part,
                vertex_bits: &vbits,
                edge_bits: &ebits,
                bit,
                slot,
                state: &state,
            };
            (part.subgraph_slots[slot].1, program(&view))
        };
        let outcomes: Vec<(VertexId, Result<O>)> = if serial {
            chunk.iter().enumerate().map(run_one).collect()
        } else {
            pool.install(|| chunk.par_iter().enumerate().map(run_one).collect())
        };
        for (qv, outcome) in outcomes {
            match outcome {
                Ok(v) => {
                    results.insert(qv, v);
                }
                Err(e) => {
                    errors.insert(qv, e);
                }
            }
        }
    }
    let elements = part.vertex_count() + part.edge_count();
    let mut states = BTreeMap::new();
    for (slot, &(_, qv)) in part.subgraph_slots.iter().enumerate() {
        if let Some(v) = state.get(slot) {
            states.insert(qv, v);
        }
    }
    Ok(ExecutionOutcome {
        results,
        errors,
        states,
        peak_live_bits: elements * width,
        peak_bitmap_bytes,
        elapsed: start.elapsed(),
    })
}

/// Runs `execute` over every partition and merges the result maps.
/// Partitions run concurrently up to `partition_parallelism`.
pub fn execute_all<O, F>(
    partitions: &[PartitionGraph],
    program: F,
    cfg: &EngineConfig,
    partition_parallelism: usize,
) -> Result<Vec<ExecutionOutcome<O>>>
where
    O: Send,
    F: Fn(&SubgraphView<'_>) -> Result<O> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(partition_parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot build partition pool: {e}")))?;
    pool.install(|| {
        partitions
            .par_iter()
            .map(|part| execute(part, &program, cfg))
            .collect()
    })
}
