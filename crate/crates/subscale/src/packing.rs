//! Overlap-aware set bin packing of subgraphs of interest.
//!
//! Bins have a memory capacity (BC) and a cap on subgraphs per bin (MAX).
//! Adding a subgraph to a bin is a set union, so overlapping subgraphs cost
//! less together than apart. Heuristics: first fit over several orderings
//! (input order, size-decreasing, min-hash shingle order), region-grow over
//! a graph overpartition, agglomerative clustering in shingle order,
//! K-means over set intersections, and an exact branch-and-bound solver for
//! tiny instances.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write as IoWrite;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::SubgraphOfInterest;
use crate::graph::{PropertyGraph, VertexId};
use crate::hashing::HashFamily;

/// Packing heuristic selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Heuristic {
    Firstfit,
    Ffd,
    Shingle,
    PartitionGrow,
    Agglomerative,
    Kmeans,
    Exact,
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Heuristic::Firstfit => "firstfit",
            Heuristic::Ffd => "ffd",
            Heuristic::Shingle => "shingle",
            Heuristic::PartitionGrow => "partition-grow",
            Heuristic::Agglomerative => "agglomerative",
            Heuristic::Kmeans => "kmeans",
            Heuristic::Exact => "exact",
        };
        f.write_str(s)
    }
}

/// Capacity limits plus heuristic-specific knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingConfig {
    /// Bin capacity in memory units (BC).
    pub bin_capacity: u64,
    /// Maximum subgraphs per bin (MAX).
    pub max_subgraphs_per_bin: usize,
    pub heuristic: Heuristic,
    /// Shingles per signature; the signature orders subgraphs by similarity.
    pub shingle_count: usize,
    /// Seed for shingle hash functions and all randomized heuristics.
    pub seed: u64,
    /// Initial merge window l for agglomerative clustering.
    pub merge_window: usize,
    /// Starting centroid count; estimated from sizes when absent.
    pub kmeans_k: Option<usize>,
    /// Improvement-pass bound for K-means.
    pub kmeans_max_iters: usize,
    /// Overpartition count for partition-grow; estimated when absent.
    pub overpartition: Option<usize>,
    /// Largest instance the exact solver will accept.
    pub exact_limit: usize,
}

impl Default for PackingConfig {
    fn default() -> Self {
        PackingConfig {
            bin_capacity: 1 << 30,
            max_subgraphs_per_bin: 3000,
            heuristic: Heuristic::Shingle,
            shingle_count: 6,
            seed: 0,
            merge_window: 2,
            kmeans_k: None,
            kmeans_max_iters: 10,
            overpartition: None,
            exact_limit: 12,
        }
    }
}

impl PackingConfig {
    pub fn new(bin_capacity: u64, max_subgraphs_per_bin: usize) -> Self {
        PackingConfig { bin_capacity, max_subgraphs_per_bin, ..Default::default() }
    }

    pub fn with_heuristic(mut self, heuristic: Heuristic) -> Self {
        self.heuristic = heuristic;
        self
    }

    pub fn hash_family(&self) -> HashFamily {
        HashFamily::new(self.shingle_count, self.seed)
    }

    fn check(&self) -> Result<()> {
        if self.max_subgraphs_per_bin == 0 {
            return Err(Error::Config("max_subgraphs_per_bin must be at least 1".into()));
        }
        if self.bin_capacity == 0 {
            return Err(Error::Config("bin_capacity must be positive".into()));
        }
        Ok(())
    }
}

/// Ordered min-hash values; compares lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShingleSignature(pub Vec<u64>);

/// The i-th shingle is the minimum of the i-th hash over member ids.
pub fn compute_shingles(sg: &SubgraphOfInterest, hashes: &HashFamily) -> Result<ShingleSignature> {
    if sg.is_empty() {
        return Err(Error::Integrity("cannot compute shingles of an empty subgraph".into()));
    }
    let sig = (0..hashes.len())
        .map(|i| sg.member_ids().map(|v| hashes.hash(i, v.0)).min().expect("non-empty"))
        .collect();
    Ok(ShingleSignature(sig))
}

fn shingles_of_members<'a>(
    members: impl Iterator<Item = &'a VertexId> + Clone,
    hashes: &HashFamily,
) -> ShingleSignature {
    let sig = (0..hashes.len())
        .map(|i| members.clone().map(|v| hashes.hash(i, v.0)).min().expect("non-empty"))
        .collect();
    ShingleSignature(sig)
}

/// One capacity-bounded bin of the solution.
#[derive(Debug, Clone)]
pub struct Bin {
    pub id: usize,
    /// Union of assigned subgraphs' members with weights.
    pub resident: BTreeMap<VertexId, u64>,
    /// Indices into the solution's subgraph list.
    pub subgraphs: Vec<usize>,
    /// Sum of distinct resident-vertex weights.
    pub used_capacity: u64,
    /// Query vertices this bin owns.
    pub owned: BTreeSet<VertexId>,
    /// Resident vertices whose home is another bin.
    pub ghosts: BTreeSet<VertexId>,
}

impl Bin {
    fn new(id: usize) -> Self {
        Bin {
            id,
            resident: BTreeMap::new(),
            subgraphs: Vec::new(),
            used_capacity: 0,
            owned: BTreeSet::new(),
            ghosts: BTreeSet::new(),
        }
    }

    fn add(&mut self, idx: usize, sg: &SubgraphOfInterest) {
        for (&v, &w) in &sg.members {
            if self.resident.insert(v, w).is_none() {
                self.used_capacity += w;
            }
        }
        self.subgraphs.push(idx);
    }
}

/// Exact memory use of `bin` after adding `sg` (set union, overlap-aware).
pub fn union_size(bin: &Bin, sg: &SubgraphOfInterest) -> u64 {
    bin.used_capacity
        + sg.members
            .iter()
            .filter(|(v, _)| !bin.resident.contains_key(v))
            .map(|(_, &w)| w)
            .sum::<u64>()
}

/// Assignment of every subgraph to exactly one bin, with ownership and
/// ghost bookkeeping.
#[derive(Debug, Clone)]
pub struct PackingSolution {
    pub subgraphs: Vec<SubgraphOfInterest>,
    pub bins: Vec<Bin>,
    /// subgraph index -> bin id.
    pub assignment: Vec<usize>,
    /// query vertex -> owning bin id.
    pub ownership: BTreeMap<VertexId, usize>,
}

impl PackingSolution {
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    /// Distinct vertices across all bins.
    pub fn distinct_vertices(&self) -> usize {
        let mut seen = BTreeSet::new();
        for bin in &self.bins {
            seen.extend(bin.resident.keys().copied());
        }
        seen.len()
    }

    /// Total resident slots over distinct vertices; 1.0 means no ghosts.
    pub fn replication_factor(&self) -> f64 {
        let total: usize = self.bins.iter().map(|b| b.resident.len()).sum();
        let distinct = self.distinct_vertices();
        if distinct == 0 { 1.0 } else { total as f64 / distinct as f64 }
    }

    pub fn total_ghosts(&self) -> usize {
        self.bins.iter().map(|b| b.ghosts.len()).sum()
    }

    /// Checks every solution invariant: coverage, containment, capacity,
    /// cardinality, and that ownership partitions the query vertices.
    pub fn validate(&self, cfg: &PackingConfig) -> Result<()> {
        if self.assignment.len() != self.subgraphs.len() {
            return Err(Error::Integrity("assignment length != subgraph count".into()));
        }
        for (i, (sg, &bin_id)) in self.subgraphs.iter().zip(&self.assignment).enumerate() {
            let bin = self
                .bins
                .get(bin_id)
                .ok_or_else(|| Error::Integrity(format!("subgraph {i} assigned to missing bin")))?;
            if !bin.subgraphs.contains(&i) {
                return Err(Error::Integrity(format!("bin {bin_id} does not list subgraph {i}")));
            }
            if !sg.members.keys().all(|v| bin.resident.contains_key(v)) {
                return Err(Error::Integrity(format!(
                    "containment violated: subgraph {i} not fully resident in bin {bin_id}"
                )));
            }
        }
        for bin in &self.bins {
            let expect: u64 = bin.resident.values().sum();
            if bin.used_capacity != expect {
                return Err(Error::Integrity(format!("bin {} capacity accounting drift", bin.id)));
            }
            if bin.used_capacity > cfg.bin_capacity {
                return Err(Error::Integrity(format!("bin {} exceeds capacity", bin.id)));
            }
            if bin.subgraphs.len() > cfg.max_subgraphs_per_bin {
                return Err(Error::Integrity(format!("bin {} exceeds MAX", bin.id)));
            }
        }
        let mut owned_total = 0usize;
        for bin in &self.bins {
            owned_total += bin.owned.len();
            for qv in &bin.owned {
                if self.ownership.get(qv) != Some(&bin.id) {
                    return Err(Error::Integrity(format!("ownership map disagrees for {qv}")));
                }
            }
        }
        if owned_total != self.ownership.len() {
            return Err(Error::Integrity("owned sets overlap across bins".into()));
        }
        for sg in &self.subgraphs {
            if !self.ownership.contains_key(&sg.query_vertex) {
                return Err(Error::Integrity(format!("query vertex {} unowned", sg.query_vertex)));
            }
        }
        Ok(())
    }
}

/// Rebuilds ownership and ghost marks: each query vertex is owned by the
/// bin its subgraph landed in; a non-query vertex resident in several bins
/// is home in the lowest bin id and a ghost everywhere else.
pub fn assign_ownership(mut solution: PackingSolution) -> PackingSolution {
    for bin in &mut solution.bins {
        bin.owned.clear();
        bin.ghosts.clear();
    }
    solution.ownership.clear();
    for (i, sg) in solution.subgraphs.iter().enumerate() {
        let bin_id = solution.assignment[i];
        if !solution.ownership.contains_key(&sg.query_vertex) {
            solution.ownership.insert(sg.query_vertex, bin_id);
            solution.bins[bin_id].owned.insert(sg.query_vertex);
        }
    }
    let mut residents: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
    for bin in &solution.bins {
        for &v in bin.resident.keys() {
            residents.entry(v).or_default().push(bin.id);
        }
    }
    for (v, bin_ids) in residents {
        let home = match solution.ownership.get(&v) {
            Some(&owner) => owner,
            None => *bin_ids.iter().min().expect("resident somewhere"),
        };
        for id in bin_ids {
            if id != home {
                solution.bins[id].ghosts.insert(v);
            }
        }
    }
    solution
}

/// First-fit over clusters of subgraph indices (a cluster is placed as one
/// unit; its constituents count against MAX). With `first_fit` false every
/// cluster opens its own bin.
fn pack_clusters(
    subgraphs: Vec<SubgraphOfInterest>,
    clusters: Vec<Vec<usize>>,
    cfg: &PackingConfig,
    first_fit: bool,
) -> Result<PackingSolution> {
    cfg.check()?;
    for sg in &subgraphs {
        if sg.size > cfg.bin_capacity {
            return Err(Error::SubgraphTooLarge {
                query_vertex: sg.query_vertex.0,
                size: sg.size,
                capacity: cfg.bin_capacity,
            });
        }
    }
    let mut bins: Vec<Bin> = Vec::new();
    let mut assignment = vec![usize::MAX; subgraphs.len()];
    for cluster in clusters {
        let mut union: BTreeMap<VertexId, u64> = BTreeMap::new();
        for &i in &cluster {
            union.extend(subgraphs[i].members.iter().map(|(&v, &w)| (v, w)));
        }
        let weight: u64 = union.values().sum();
        if weight > cfg.bin_capacity || cluster.len() > cfg.max_subgraphs_per_bin {
            return Err(Error::ContractViolation(format!(
                "cluster of {} subgraphs (weight {weight}) cannot fit any bin",
                cluster.len()
            )));
        }
        let target = if first_fit {
            bins.iter()
                .position(|b| {
                    b.subgraphs.len() + cluster.len() <= cfg.max_subgraphs_per_bin
                        && b.used_capacity
                            + union
                                .iter()
                                .filter(|(v, _)| !b.resident.contains_key(v))
                                .map(|(_, &w)| w)
                                .sum::<u64>()
                            <= cfg.bin_capacity
                })
                .unwrap_or(bins.len())
        } else {
            bins.len()
        };
        if target == bins.len() {
            bins.push(Bin::new(target));
        }
        for &i in &cluster {
            bins[target].add(i, &subgraphs[i]);
            assignment[i] = target;
        }
    }
    let solution = PackingSolution {
        subgraphs,
        bins,
        assignment,
        ownership: BTreeMap::new(),
    };
    Ok(assign_ownership(solution))
}

/// Rebuilds a solution from explicit clusters, one bin per cluster, with
/// full ownership/ghost bookkeeping. Used when bins were decided elsewhere
/// (shard outputs, post-merge results).
pub fn rebuild(
    subgraphs: Vec<SubgraphOfInterest>,
    clusters: Vec<Vec<usize>>,
    cfg: &PackingConfig,
) -> Result<PackingSolution> {
    pack_clusters(subgraphs, clusters, cfg, false)
}

/// First-fit in the order given: each subgraph lands in the first bin with
/// room for its union and below MAX, else opens a new bin.
pub fn greedy_pack(ordered: Vec<SubgraphOfInterest>, cfg: &PackingConfig) -> Result<PackingSolution> {
    let clusters = (0..ordered.len()).map(|i| vec![i]).collect();
    pack_clusters(ordered, clusters, cfg, true)
}

/// Input order, unchanged.
pub fn order_firstfit(subgraphs: Vec<SubgraphOfInterest>) -> Vec<SubgraphOfInterest> {
    subgraphs
}

/// Stable sort by size, largest first.
pub fn order_ffd(mut subgraphs: Vec<SubgraphOfInterest>) -> Vec<SubgraphOfInterest> {
    subgraphs.sort_by_key(|sg| std::cmp::Reverse(sg.size));
    subgraphs
}

/// Lexicographic sort by shingle signature; ties broken by query vertex so
/// the order is identical however the input was previously arranged.
pub fn order_shingle(
    subgraphs: Vec<SubgraphOfInterest>,
    cfg: &PackingConfig,
) -> Result<Vec<SubgraphOfInterest>> {
    let hashes = cfg.hash_family();
    let mut keyed: Vec<(ShingleSignature, SubgraphOfInterest)> = subgraphs
        .into_iter()
        .map(|sg| compute_shingles(&sg, &hashes).map(|sig| (sig, sg)))
        .collect::<Result<_>>()?;
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.query_vertex.cmp(&b.1.query_vertex)));
    Ok(keyed.into_iter().map(|(_, sg)| sg).collect())
}

fn jaccard_distance(a: &BTreeMap<VertexId, u64>, b: &BTreeMap<VertexId, u64>) -> f64 {
    let inter = a.keys().filter(|v| b.contains_key(v)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 { 0.0 } else { 1.0 - inter as f64 / union as f64 }
}

fn union_weight(a: &BTreeMap<VertexId, u64>, b: &BTreeMap<VertexId, u64>) -> u64 {
    let shared: u64 = a.iter().filter(|(v, _)| b.contains_key(v)).map(|(_, &w)| w).sum();
    a.values().sum::<u64>() + b.values().sum::<u64>() - shared
}

struct Cluster {
    members: BTreeMap<VertexId, u64>,
    subs: Vec<usize>,
    sig: ShingleSignature,
    min_qv: VertexId,
}

/// Agglomerative clustering in shingle order: repeatedly merge clusters
/// within a window l of each other whose Jaccard distance is at most a
/// sampled threshold and whose union fits BC. The threshold is the 10th
/// percentile of distances over a 1% pair sample; l grows by half whenever
/// most sampled pairs exceed BC. Final clusters become the bins.
pub fn pack_agglomerative(
    subgraphs: Vec<SubgraphOfInterest>,
    cfg: &PackingConfig,
) -> Result<PackingSolution> {
    cfg.check()?;
    let hashes = cfg.hash_family();
    let mut clusters: Vec<Cluster> = subgraphs
        .iter()
        .enumerate()
        .map(|(i, sg)| {
            Ok(Cluster {
                members: sg.members.clone(),
                subs: vec![i],
                sig: compute_shingles(sg, &hashes)?,
                min_qv: sg.query_vertex,
            })
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xa661));
    let mut window = cfg.merge_window.max(1);
    // each round does at least one merge, so rounds are bounded by q
    loop {
        if clusters.len() < 2 {
            break;
        }
        clusters.sort_by(|a, b| a.sig.cmp(&b.sig).then(a.min_qv.cmp(&b.min_qv)));
        let n = clusters.len();
        let total_pairs = n * (n - 1) / 2;
        let sample_size = ((total_pairs as f64 * 0.01).ceil() as usize).clamp(1, total_pairs).max(
            total_pairs.min(100),
        );
        let mut distances = Vec::with_capacity(sample_size);
        let mut over_bc = 0usize;
        for _ in 0..sample_size {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            distances.push(jaccard_distance(&clusters[i].members, &clusters[j].members));
            if union_weight(&clusters[i].members, &clusters[j].members) > cfg.bin_capacity {
                over_bc += 1;
            }
        }
        distances.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let tau = distances[distances.len() / 10];
        if over_bc * 2 > sample_size {
            window = window + (window + 1) / 2;
        }
        let mut merged_any = false;
        let mut i = 0;
        while i < clusters.len() {
            let upper = (i + 1 + window).min(clusters.len());
            let mut j = i + 1;
            while j < upper.min(clusters.len()) {
                let fits = union_weight(&clusters[i].members, &clusters[j].members)
                    <= cfg.bin_capacity
                    && clusters[i].subs.len() + clusters[j].subs.len()
                        <= cfg.max_subgraphs_per_bin;
                if fits && jaccard_distance(&clusters[i].members, &clusters[j].members) <= tau {
                    let victim = clusters.remove(j);
                    let c = &mut clusters[i];
                    c.members.extend(victim.members);
                    c.subs.extend(victim.subs);
                    c.min_qv = c.min_qv.min(victim.min_qv);
                    c.sig = shingles_of_members(c.members.keys(), &hashes);
                    merged_any = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged_any {
            break;
        }
    }
    clusters.sort_by(|a, b| a.sig.cmp(&b.sig).then(a.min_qv.cmp(&b.min_qv)));
    let cluster_subs = clusters.into_iter().map(|c| c.subs).collect();
    pack_clusters(subgraphs, cluster_subs, cfg, false)
}

/// Distance between a subgraph and a centroid's distinct member
/// set. `None` is the -infinity sentinel for a union that overflows BC.
pub fn compute_distance(
    sg: &SubgraphOfInterest,
    centroid: &BTreeMap<VertexId, u64>,
    bin_capacity: u64,
) -> Option<u64> {
    if union_weight(&sg.members, centroid) > bin_capacity {
        return None;
    }
    Some(sg.members.keys().filter(|v| centroid.contains_key(v)).count() as u64)
}

struct Centroid {
    /// vertex -> (weight, multiplicity across constituent subgraphs).
    counts: HashMap<VertexId, (u64, u32)>,
    subs: Vec<usize>,
}

impl Centroid {
    fn from_sg(idx: usize, sg: &SubgraphOfInterest) -> Self {
        let counts = sg.members.iter().map(|(&v, &w)| (v, (w, 1))).collect();
        Centroid { counts, subs: vec![idx] }
    }

    fn distinct_members(&self) -> BTreeMap<VertexId, u64> {
        self.counts.iter().map(|(&v, &(w, _))| (v, w)).collect()
    }

    fn distinct_weight(&self) -> u64 {
        self.counts.values().map(|&(w, _)| w).sum()
    }

    fn add(&mut self, idx: usize, sg: &SubgraphOfInterest) {
        for (&v, &w) in &sg.members {
            self.counts.entry(v).or_insert((w, 0)).1 += 1;
        }
        self.subs.push(idx);
    }

    fn remove(&mut self, idx: usize, sg: &SubgraphOfInterest) {
        for v in sg.members.keys() {
            if let Some(entry) = self.counts.get_mut(v) {
                entry.1 -= 1;
                if entry.1 == 0 {
                    self.counts.remove(v);
                }
            }
        }
        self.subs.retain(|&s| s != idx);
    }

    /// Distinct weight after adding sg.
    fn weight_with(&self, sg: &SubgraphOfInterest) -> u64 {
        self.distinct_weight()
            + sg.members
                .iter()
                .filter(|(v, _)| !self.counts.contains_key(v))
                .map(|(_, &w)| w)
                .sum::<u64>()
    }
}

/// Set-based K-means: K subgraphs seed the centroids; the rest join the centroid of
/// maximum set-intersection distance (capacity permitting), centroids being
/// multiset unions. Improvement passes move a subgraph when the net
/// decrease in total centroid size is positive. Unassignable residue bumps
/// K and restarts. Final centroids are greedy-packed into bins.
pub fn pack_kmeans(subgraphs: Vec<SubgraphOfInterest>, cfg: &PackingConfig) -> Result<PackingSolution> {
    cfg.check()?;
    let q = subgraphs.len();
    if q == 0 {
        return pack_clusters(subgraphs, Vec::new(), cfg, true);
    }
    let total: u64 = subgraphs.iter().map(|sg| sg.size).sum();
    let estimate = ((1.2 * total as f64 / cfg.bin_capacity as f64).ceil() as usize).max(1);
    let mut k = cfg.kmeans_k.unwrap_or(estimate).clamp(1, q);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x6b6d));
    loop {
        let seeds: BTreeSet<usize> = index_sample(&mut rng, q, k).into_iter().collect();
        let mut centroids: Vec<Centroid> =
            seeds.iter().map(|&i| Centroid::from_sg(i, &subgraphs[i])).collect();
        let mut residue = false;
        for (i, sg) in subgraphs.iter().enumerate() {
            if seeds.contains(&i) {
                continue;
            }
            let best = centroids
                .iter()
                .enumerate()
                .filter(|(_, c)| c.subs.len() < cfg.max_subgraphs_per_bin)
                .filter_map(|(ci, c)| {
                    compute_distance(sg, &c.distinct_members(), cfg.bin_capacity)
                        .map(|d| (ci, d))
                })
                .max_by_key(|&(ci, d)| (d, std::cmp::Reverse(ci)));
            match best {
                Some((ci, _)) => centroids[ci].add(i, sg),
                None => {
                    residue = true;
                    break;
                }
            }
        }
        if residue {
            if k == q {
                // every subgraph its own centroid always succeeds
                unreachable!("residue impossible at k = q");
            }
            k = (k + 1).min(q);
            continue;
        }
        // ComputeGain improvement passes
        for _ in 0..cfg.kmeans_max_iters {
            let mut moved = false;
            for (i, sg) in subgraphs.iter().enumerate() {
                let from = centroids
                    .iter()
                    .position(|c| c.subs.contains(&i))
                    .expect("assigned");
                if centroids[from].subs.len() == 1 {
                    continue;
                }
                let from_before = centroids[from].distinct_weight();
                centroids[from].remove(i, sg);
                let from_after = centroids[from].distinct_weight();
                let mut best: Option<(usize, i64)> = None;
                for (ci, c) in centroids.iter().enumerate() {
                    if ci == from
                        || c.subs.len() >= cfg.max_subgraphs_per_bin
                        || c.weight_with(sg) > cfg.bin_capacity
                    {
                        continue;
                    }
                    let gain = (from_before - from_after) as i64
                        - (c.weight_with(sg) - c.distinct_weight()) as i64;
                    if gain > 0 && best.map_or(true, |(_, g)| gain > g) {
                        best = Some((ci, gain));
                    }
                }
                match best {
                    Some((ci, _)) => {
                        centroids[ci].add(i, sg);
                        moved = true;
                    }
                    None => centroids[from].add(i, sg),
                }
            }
            if !moved {
                break;
            }
        }
        centroids.retain(|c| !c.subs.is_empty());
        centroids.sort_by_key(|c| c.subs.iter().copied().min().expect("non-empty"));
        let clusters = centroids.into_iter().map(|c| c.subs).collect();
        return pack_clusters(subgraphs, clusters, cfg, true);
    }
}

/// Deterministic multi-source BFS partitioner (stand-in for METIS): k seeds
/// spread over the id-sorted vertex list, grown round-robin toward a
/// balance target of |V|/k; stranded vertices join the smallest partition.
pub fn region_growing_partition(graph: &PropertyGraph, k: usize) -> Vec<Vec<VertexId>> {
    let vertices: Vec<VertexId> = graph.vertices().collect();
    let n = vertices.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let target = (n + k - 1) / k;
    let mut part_of: HashMap<VertexId, usize> = HashMap::new();
    let mut queues: Vec<std::collections::VecDeque<VertexId>> = Vec::with_capacity(k);
    let mut parts: Vec<Vec<VertexId>> = vec![Vec::new(); k];
    for p in 0..k {
        let seed = vertices[p * n / k];
        queues.push(std::collections::VecDeque::from([seed]));
    }
    let mut remaining = n;
    while remaining > 0 {
        let mut progressed = false;
        for p in 0..k {
            if parts[p].len() >= target {
                continue;
            }
            while let Some(v) = queues[p].pop_front() {
                if part_of.contains_key(&v) {
                    continue;
                }
                part_of.insert(v, p);
                parts[p].push(v);
                remaining -= 1;
                for &nb in graph.neighbors(v) {
                    if !part_of.contains_key(&nb) {
                        queues[p].push_back(nb);
                    }
                }
                if graph.is_directed() {
                    for &nb in graph.in_neighbors(v) {
                        if !part_of.contains_key(&nb) {
                            queues[p].push_back(nb);
                        }
                    }
                }
                progressed = true;
                break;
            }
        }
        if !progressed {
            // disconnected leftovers (or all queues at target): assign the
            // next unclaimed vertex to the smallest partition and resume
            match vertices.iter().find(|v| !part_of.contains_key(v)) {
                Some(&v) => {
                    let p = (0..k).min_by_key(|&p| parts[p].len()).expect("k > 0");
                    part_of.insert(v, p);
                    parts[p].push(v);
                    remaining -= 1;
                    for &nb in graph.neighbors(v) {
                        if !part_of.contains_key(&nb) {
                            queues[p].push_back(nb);
                        }
                    }
                }
                None => break,
            }
        }
    }
    parts.retain(|p| !p.is_empty());
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

/// Partition-and-grow: overpartition the graph, assign each subgraph to the partition
/// holding its query vertex, grow each partition with the full member sets
/// of its subgraphs, then shingle-order the grown partitions and greedy-
/// pack them. Oversized grown partitions are split in half and retried.
pub fn pack_partition_grow(
    graph: &PropertyGraph,
    subgraphs: Vec<SubgraphOfInterest>,
    cfg: &PackingConfig,
) -> Result<PackingSolution> {
    cfg.check()?;
    let total: u64 = subgraphs.iter().map(|sg| sg.size).sum();
    let k = cfg
        .overpartition
        .unwrap_or_else(|| ((1.5 * total as f64 / cfg.bin_capacity as f64).ceil() as usize).max(1));
    let parts = region_growing_partition(graph, k);
    let mut part_of: HashMap<VertexId, usize> = HashMap::new();
    for (p, vs) in parts.iter().enumerate() {
        for &v in vs {
            part_of.insert(v, p);
        }
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); parts.len().max(1)];
    for (i, sg) in subgraphs.iter().enumerate() {
        let p = part_of.get(&sg.query_vertex).copied().unwrap_or(0);
        clusters[p].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    // split any grown partition that cannot fit a bin
    let mut fitted: Vec<Vec<usize>> = Vec::new();
    let mut work: Vec<Vec<usize>> = clusters;
    while let Some(cluster) = work.pop() {
        let mut union: BTreeMap<VertexId, u64> = BTreeMap::new();
        for &i in &cluster {
            union.extend(subgraphs[i].members.iter().map(|(&v, &w)| (v, w)));
        }
        let weight: u64 = union.values().sum();
        if weight <= cfg.bin_capacity && cluster.len() <= cfg.max_subgraphs_per_bin {
            fitted.push(cluster);
        } else if cluster.len() == 1 {
            let sg = &subgraphs[cluster[0]];
            return Err(Error::SubgraphTooLarge {
                query_vertex: sg.query_vertex.0,
                size: sg.size,
                capacity: cfg.bin_capacity,
            });
        } else {
            let mid = cluster.len() / 2;
            work.push(cluster[..mid].to_vec());
            work.push(cluster[mid..].to_vec());
        }
    }
    // shingle-order the grown partitions by their union signatures
    let hashes = cfg.hash_family();
    let mut keyed: Vec<(ShingleSignature, VertexId, Vec<usize>)> = fitted
        .into_iter()
        .map(|cluster| {
            let mut union: BTreeSet<VertexId> = BTreeSet::new();
            for &i in &cluster {
                union.extend(subgraphs[i].member_ids());
            }
            let sig = shingles_of_members(union.iter(), &hashes);
            let min_qv =
                cluster.iter().map(|&i| subgraphs[i].query_vertex).min().expect("non-empty");
            (sig, min_qv, cluster)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let clusters = keyed.into_iter().map(|(_, _, c)| c).collect();
    pack_clusters(subgraphs, clusters, cfg, true)
}

/// Branch-and-bound minimizing bin count. Subgraphs are explored largest
/// first; at each step a subgraph tries every open bin plus one fresh bin
/// (which breaks bin-label symmetry). The incumbent comes from FFD and the
/// search stops early at the distinct-weight lower bound.
pub fn pack_exact(
    subgraphs: Vec<SubgraphOfInterest>,
    cfg: &PackingConfig,
    limit: usize,
) -> Result<PackingSolution> {
    cfg.check()?;
    let q = subgraphs.len();
    if q > limit {
        return Err(Error::InstanceTooLarge { subgraphs: q, limit });
    }
    if q == 0 {
        return pack_clusters(subgraphs, Vec::new(), cfg, true);
    }
    for sg in &subgraphs {
        if sg.size > cfg.bin_capacity {
            return Err(Error::SubgraphTooLarge {
                query_vertex: sg.query_vertex.0,
                size: sg.size,
                capacity: cfg.bin_capacity,
            });
        }
    }
    let mut distinct: BTreeMap<VertexId, u64> = BTreeMap::new();
    for sg in &subgraphs {
        distinct.extend(sg.members.iter().map(|(&v, &w)| (v, w)));
    }
    let weight_lb =
        (distinct.values().sum::<u64>() + cfg.bin_capacity - 1) / cfg.bin_capacity;
    let max_lb = (q + cfg.max_subgraphs_per_bin - 1) / cfg.max_subgraphs_per_bin;
    let lower_bound = weight_lb.max(max_lb as u64) as usize;

    // explore biggest subgraphs first for tighter early pruning
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(subgraphs[i].size));

    // FFD incumbent computed directly over original indices
    let best_bins;
    let mut best_assignment = {
        let mut idx: Vec<usize> = (0..q).collect();
        idx.sort_by_key(|&i| std::cmp::Reverse(subgraphs[i].size));
        let mut bins: Vec<(BTreeMap<VertexId, u64>, usize)> = Vec::new();
        let mut assign = vec![usize::MAX; q];
        for &i in &idx {
            let sg = &subgraphs[i];
            let pos = bins
                .iter()
                .position(|(members, count)| {
                    *count < cfg.max_subgraphs_per_bin
                        && union_weight(members, &sg.members) <= cfg.bin_capacity
                })
                .unwrap_or(bins.len());
            if pos == bins.len() {
                bins.push((BTreeMap::new(), 0));
            }
            bins[pos].0.extend(sg.members.iter().map(|(&v, &w)| (v, w)));
            bins[pos].1 += 1;
            assign[i] = pos;
        }
        best_bins = bins.len();
        assign
    };

    struct Search<'a> {
        subgraphs: &'a [SubgraphOfInterest],
        order: &'a [usize],
        cfg: &'a PackingConfig,
        lower_bound: usize,
        best_bins: usize,
        best_assignment: Vec<usize>,
        current: Vec<usize>,
        bins: Vec<(BTreeMap<VertexId, u64>, usize)>,
    }

    impl Search<'_> {
        fn dfs(&mut self, depth: usize) {
            if self.best_bins == self.lower_bound {
                return;
            }
            if self.bins.len() >= self.best_bins {
                return;
            }
            if depth == self.order.len() {
                self.best_bins = self.bins.len();
                self.best_assignment = self.current.clone();
                return;
            }
            let i = self.order[depth];
            let sg = &self.subgraphs[i];
            for b in 0..self.bins.len() {
                let fits = self.bins[b].1 < self.cfg.max_subgraphs_per_bin
                    && union_weight(&self.bins[b].0, &sg.members) <= self.cfg.bin_capacity;
                if !fits {
                    continue;
                }
                let added: Vec<VertexId> = sg
                    .members
                    .keys()
                    .filter(|v| !self.bins[b].0.contains_key(v))
                    .copied()
                    .collect();
                for &v in &added {
                    self.bins[b].0.insert(v, sg.members[&v]);
                }
                self.bins[b].1 += 1;
                self.current[i] = b;
                self.dfs(depth + 1);
                self.bins[b].1 -= 1;
                for v in &added {
                    self.bins[b].0.remove(v);
                }
            }
            // one fresh bin only
            self.bins.push((sg.members.clone(), 1));
            self.current[i] = self.bins.len() - 1;
            self.dfs(depth + 1);
            self.bins.pop();
        }
    }

    let mut search = Search {
        subgraphs: &subgraphs,
        order: &order,
        cfg,
        lower_bound,
        best_bins,
        best_assignment: best_assignment.clone(),
        current: vec![usize::MAX; q],
        bins: Vec::new(),
    };
    search.dfs(0);
    best_assignment = search.best_assignment;
    let nbins = search.best_bins;
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); nbins];
    for (i, &b) in best_assignment.iter().enumerate() {
        clusters[b].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    pack_clusters(subgraphs, clusters, cfg, false)
}

/// Dispatch to the configured heuristic. Partition-grow needs the graph.
pub fn pack(
    graph: Option<&PropertyGraph>,
    subgraphs: Vec<SubgraphOfInterest>,
    cfg: &PackingConfig,
) -> Result<PackingSolution> {
    match cfg.heuristic {
        Heuristic::Firstfit => greedy_pack(order_firstfit(subgraphs), cfg),
        Heuristic::Ffd => greedy_pack(order_ffd(subgraphs), cfg),
        Heuristic::Shingle => greedy_pack(order_shingle(subgraphs, cfg)?, cfg),
        Heuristic::PartitionGrow => {
            let graph = graph.ok_or_else(|| {
                Error::Config("partition-grow heuristic requires the source graph".into())
            })?;
            pack_partition_grow(graph, subgraphs, cfg)
        }
        Heuristic::Agglomerative => pack_agglomerative(subgraphs, cfg),
        Heuristic::Kmeans => pack_kmeans(subgraphs, cfg),
        Heuristic::Exact => {
            let limit = cfg.exact_limit;
            pack_exact(subgraphs, cfg, limit)
        }
    }
}

// ---- serialization ----

#[derive(Serialize, Deserialize)]
struct BinJson {
    id: usize,
    used_capacity: u64,
    subgraphs: Vec<usize>,
    owned: Vec<u64>,
    ghosts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    bins: Vec<BinJson>,
    subgraphs: Vec<SubgraphOfInterest>,
}

impl Serialize for PackingSolution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mirror = SolutionJson {
            bins: self
                .bins
                .iter()
                .map(|b| BinJson {
                    id: b.id,
                    used_capacity: b.used_capacity,
                    subgraphs: b.subgraphs.clone(),
                    owned: b.owned.iter().map(|v| v.0).collect(),
                    ghosts: b.ghosts.iter().map(|v| v.0).collect(),
                })
                .collect(),
            subgraphs: self.subgraphs.clone(),
        };
        mirror.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PackingSolution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mirror = SolutionJson::deserialize(deserializer)?;
        let mut bins = Vec::with_capacity(mirror.bins.len());
        let mut assignment = vec![usize::MAX; mirror.subgraphs.len()];
        for bj in mirror.bins {
            let mut bin = Bin::new(bj.id);
            for &i in &bj.subgraphs {
                let sg = mirror.subgraphs.get(i).ok_or_else(|| {
                    serde::de::Error::custom(format!("bin {} references missing subgraph {i}", bj.id))
                })?;
                bin.add(i, sg);
                assignment[i] = bj.id;
            }
            bin.owned = bj.owned.into_iter().map(VertexId).collect();
            bin.ghosts = bj.ghosts.into_iter().map(VertexId).collect();
            bins.push(bin);
        }
        if assignment.iter().any(|&b| b == usize::MAX) {
            return Err(serde::de::Error::custom("some subgraph is assigned to no bin"));
        }
        let mut ownership = BTreeMap::new();
        for bin in &bins {
            for &qv in &bin.owned {
                ownership.insert(qv, bin.id);
            }
        }
        Ok(PackingSolution { subgraphs: mirror.subgraphs, bins, assignment, ownership })
    }
}

impl PackingSolution {
    /// TSV map: one `vertex<TAB>bin<TAB>owned|ghost` line per residency.
    pub fn write_partition_map<W: IoWrite>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(u64, usize, bool)> = Vec::new();
        for bin in &self.bins {
            for &v in bin.resident.keys() {
                rows.push((v.0, bin.id, !bin.ghosts.contains(&v)));
            }
        }
        rows.sort_unstable();
        for (v, bin, owned) in rows {
            writeln!(out, "{v}\t{bin}\t{}", if owned { "owned" } else { "ghost" })?;
        }
        Ok(())
    }

    pub fn partition_map_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_partition_map(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }
}
