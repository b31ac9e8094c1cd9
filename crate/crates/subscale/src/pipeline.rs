//! End-to-end graph extraction and packing (GEP).
//!
//! Two paths produce the same subgraphs of interest. The centralized path
//! extracts everything in one pass and packs once. The distributed path
//! emulates the three-stage dataflow: stage 1 shards per-vertex records
//! and assembles 1-hop neighborhoods, stage 2 joins 2-hop weights and
//! completes each subgraph with its shingle signature, and stage 3 routes
//! subgraphs to shards by signature prefix, packs each shard separately,
//! and finally merges underutilized bins.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extraction::{Extractor, ExtractionQuery, QueryMode, SubgraphOfInterest};
use crate::extraction::{apply_sampling, extract_attribute_induced};
use crate::graph::{PropertyGraph, VertexId};
use crate::hashing::mix64;
use crate::packing::{
    self, compute_shingles, greedy_pack, order_shingle, pack, Bin, PackingConfig, PackingSolution,
    ShingleSignature,
};

/// A record flowing between pipeline stages.
#[derive(Debug, Clone)]
pub enum StageRecord {
    /// Stage 1: ⟨key, (u, weight(u), isQueryVertex, N(u))⟩.
    VertexInfo {
        key: VertexId,
        vertex: VertexId,
        weight: u64,
        is_query_vertex: bool,
        neighbors: Vec<VertexId>,
    },
    /// Stage 2: weight of a 2-hop vertex joined back to a query vertex.
    TwoHopWeight { key: VertexId, vertex: VertexId, weight: u64 },
    /// Stage 3: a completed subgraph keyed by its signature.
    Subgraph { key: ShingleSignature, subgraph: SubgraphOfInterest },
}

/// Shard counts and the key→shard hash for each stage.
#[derive(Debug, Clone, Copy)]
pub struct ShardPlan {
    pub shards: usize,
}

impl ShardPlan {
    pub fn new(shards: usize) -> Result<Self> {
        if shards == 0 {
            return Err(Error::Config("shard count must be at least 1".into()));
        }
        Ok(ShardPlan { shards })
    }

    pub fn route_vertex(&self, v: VertexId) -> usize {
        (mix64(v.0) % self.shards as u64) as usize
    }

    /// Signature-prefix routing: first shingle modulo shard count.
    pub fn route_signature(&self, sig: &ShingleSignature) -> usize {
        (sig.0.first().copied().unwrap_or(0) % self.shards as u64) as usize
    }
}

fn extract_subgraphs(
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    cfg: &PackingConfig,
) -> Result<Vec<SubgraphOfInterest>> {
    query.validate(graph)?;
    match &query.mode {
        QueryMode::Neighborhood => {
            Extractor::new(graph, query).extract_all(Some(cfg.bin_capacity))
        }
        QueryMode::AttributeInduced { attribute } => {
            extract_attribute_induced(graph, attribute, &query.projection, &query.weights)
        }
    }
}

/// Case 1: full extraction then one packing run over all subgraphs.
/// `memory_budget` caps the filtered structure size (sum of passing-vertex
/// weights); exceeding it is the signal to switch to the distributed path.
pub fn run_centralized(
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    cfg: &PackingConfig,
    memory_budget: Option<u64>,
) -> Result<PackingSolution> {
    if let Some(budget) = memory_budget {
        query.validate(graph)?;
        let ex = Extractor::new(graph, query);
        let required: u64 = graph
            .vertices()
            .filter(|&v| ex.passes_vertex_filter(v))
            .map(|v| graph.vertex_weight(v, &query.projection, &query.weights))
            .sum();
        if required > budget {
            return Err(Error::BudgetExceeded { required, budget });
        }
    }
    let subgraphs = extract_subgraphs(graph, query, cfg)?;
    pack(Some(graph), subgraphs, cfg)
}

/// Case 2: the 3-stage emulation. Supports k ≤ 2 only; packing within each
/// shard always uses shingle ordering regardless of `cfg.heuristic`.
pub fn run_distributed(
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    cfg: &PackingConfig,
    shards: usize,
) -> Result<PackingSolution> {
    if query.radius > 2 {
        return Err(Error::UnsupportedRadius { radius: query.radius });
    }
    if !matches!(query.mode, QueryMode::Neighborhood) {
        return Err(Error::Config(
            "distributed pipeline supports neighborhood queries only".into(),
        ));
    }
    query.validate(graph)?;
    let plan = ShardPlan::new(shards)?;
    let ex = Extractor::new(graph, query);
    let (stage1_out, _emitted) = stage1(graph, query, &ex, &plan);
    let subgraphs = stage2(graph, query, &ex, stage1_out, &plan, cfg)?;
    stage3(subgraphs, &plan, cfg)
}

/// Per-query-vertex output of stage 1: the 1-hop members with weights plus
/// the 2-hop id list still missing weights.
struct OneHop {
    query_vertex: VertexId,
    members: BTreeMap<VertexId, u64>,
    two_hop: Vec<VertexId>,
}

/// Emits N'(u)+1 VertexInfo records per passing vertex (one keyed by u,
/// one keyed by each filtered neighbor), routes them to shards, and has
/// each shard assemble the 1-hop neighborhood of its query vertices.
/// Returns the assembled neighborhoods and the number of records emitted.
fn stage1(
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    ex: &Extractor<'_>,
    plan: &ShardPlan,
) -> (Vec<OneHop>, usize) {
    let query_vertices: std::collections::HashSet<VertexId> =
        ex.query_vertices().into_iter().collect();
    let mut queues: Vec<Vec<StageRecord>> = vec![Vec::new(); plan.shards];
    let mut emitted = 0usize;
    let emit = |queues: &mut Vec<Vec<StageRecord>>, key: VertexId, rec: StageRecord| {
        queues[plan.route_vertex(key)].push(rec);
    };
    for u in graph.vertices() {
        if !ex.passes_vertex_filter(u) && !(query.exempt_query_vertex && query_vertices.contains(&u))
        {
            continue;
        }
        let neighbors = ex.filtered_neighbors(u).to_vec();
        let info = StageRecord::VertexInfo {
            key: u,
            vertex: u,
            weight: ex.weight_of(u),
            is_query_vertex: query_vertices.contains(&u),
            neighbors: neighbors.clone(),
        };
        emit(&mut queues, u, info);
        emitted += 1;
        for &v in &neighbors {
            emit(
                &mut queues,
                v,
                StageRecord::VertexInfo {
                    key: v,
                    vertex: u,
                    weight: ex.weight_of(u),
                    is_query_vertex: query_vertices.contains(&u),
                    neighbors: neighbors.clone(),
                },
            );
            emitted += 1;
        }
    }
    let one_hops: Vec<OneHop> = queues
        .into_par_iter()
        .map(|records| {
            // group by key within the shard
            let mut by_key: BTreeMap<VertexId, Vec<StageRecord>> = BTreeMap::new();
            for rec in records {
                if let StageRecord::VertexInfo { key, .. } = &rec {
                    by_key.entry(*key).or_default().push(rec);
                }
            }
            let mut out = Vec::new();
            for (key, recs) in by_key {
                // only query vertices assemble a neighborhood; other keys
                // are discarded here
                let is_qv = recs.iter().any(|r| {
                    matches!(r, StageRecord::VertexInfo { vertex, is_query_vertex, .. }
                        if *vertex == key && *is_query_vertex)
                });
                if !is_qv {
                    continue;
                }
                let mut members = BTreeMap::new();
                let mut two_hop = Vec::new();
                let self_neighbors: Vec<VertexId> = recs
                    .iter()
                    .find_map(|r| match r {
                        StageRecord::VertexInfo { vertex, neighbors, .. } if *vertex == key => {
                            Some(neighbors.clone())
                        }
                        _ => None,
                    })
                    .unwrap_or_default();
                for rec in &recs {
                    if let StageRecord::VertexInfo { vertex, weight, neighbors, .. } = rec {
                        if *vertex == key || self_neighbors.contains(vertex) {
                            members.insert(*vertex, *weight);
                            if *vertex != key {
                                two_hop.extend(neighbors.iter().copied());
                            }
                        }
                    }
                }
                two_hop.sort_unstable();
                two_hop.dedup();
                two_hop.retain(|v| !members.contains_key(v));
                out.push(OneHop { query_vertex: key, members, two_hop });
            }
            out
        })
        .flatten()
        .collect();
    (one_hops, emitted)
}

/// Joins 2-hop weights (k = 2 only), completes each subgraph, applies the
/// sampling policy to oversized ones, and computes the routing signature.
fn stage2(
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    ex: &Extractor<'_>,
    one_hops: Vec<OneHop>,
    plan: &ShardPlan,
    cfg: &PackingConfig,
) -> Result<Vec<StageRecord>> {
    // weight table sharded by vertex id answers the 2-hop joins
    let mut requests: Vec<Vec<(VertexId, VertexId)>> = vec![Vec::new(); plan.shards];
    if query.radius == 2 {
        for oh in &one_hops {
            for &x in &oh.two_hop {
                requests[plan.route_vertex(x)].push((x, oh.query_vertex));
            }
        }
    }
    let responses: Vec<StageRecord> = requests
        .into_par_iter()
        .map(|reqs| {
            reqs.into_iter()
                .map(|(x, qv)| StageRecord::TwoHopWeight {
                    key: qv,
                    vertex: x,
                    weight: ex.weight_of(x),
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let mut joined: BTreeMap<VertexId, Vec<(VertexId, u64)>> = BTreeMap::new();
    for rec in responses {
        if let StageRecord::TwoHopWeight { key, vertex, weight } = rec {
            joined.entry(key).or_default().push((vertex, weight));
        }
    }
    let hashes = cfg.hash_family();
    let mut out = Vec::with_capacity(one_hops.len());
    for oh in one_hops {
        let mut members = oh.members;
        if query.radius == 2 {
            if let Some(extra) = joined.get(&oh.query_vertex) {
                members.extend(extra.iter().copied());
            }
        }
        if query.radius == 0 {
            let w = members
                .get(&oh.query_vertex)
                .copied()
                .unwrap_or_else(|| ex.weight_of(oh.query_vertex));
            members = BTreeMap::from([(oh.query_vertex, w)]);
        }
        let mut sg = SubgraphOfInterest::new(oh.query_vertex, members);
        if sg.size > cfg.bin_capacity {
            sg = apply_sampling(&sg, graph, &query.sampling)?;
            if sg.size > cfg.bin_capacity {
                return Err(Error::SubgraphTooLarge {
                    query_vertex: sg.query_vertex.0,
                    size: sg.size,
                    capacity: cfg.bin_capacity,
                });
            }
        }
        let key = compute_shingles(&sg, &hashes)?;
        out.push(StageRecord::Subgraph { key, subgraph: sg });
    }
    Ok(out)
}

/// Routes subgraphs to shards by signature prefix, shingle-packs each
/// shard, concatenates the shard bins, and merges underutilized ones.
fn stage3(
    records: Vec<StageRecord>,
    plan: &ShardPlan,
    cfg: &PackingConfig,
) -> Result<PackingSolution> {
    let mut queues: Vec<Vec<SubgraphOfInterest>> = vec![Vec::new(); plan.shards];
    for rec in records {
        if let StageRecord::Subgraph { key, subgraph } = rec {
            queues[plan.route_signature(&key)].push(subgraph);
        }
    }
    let shard_solutions: Vec<PackingSolution> = queues
        .into_par_iter()
        .filter(|q| !q.is_empty())
        .map(|subs| greedy_pack(order_shingle(subs, cfg)?, cfg))
        .collect::<Result<_>>()?;
    // concatenate shard outputs into one solution
    let mut subgraphs = Vec::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for sol in shard_solutions {
        let offset = subgraphs.len();
        for bin in &sol.bins {
            clusters.push(bin.subgraphs.iter().map(|&i| i + offset).collect());
        }
        subgraphs.extend(sol.subgraphs);
    }
    let combined = rebuild_from_clusters(subgraphs, clusters, cfg)?;
    merge_underutilized(combined, cfg, 0.5)
}

fn rebuild_from_clusters(
    subgraphs: Vec<SubgraphOfInterest>,
    clusters: Vec<Vec<usize>>,
    cfg: &PackingConfig,
) -> Result<PackingSolution> {
    packing::rebuild(subgraphs, clusters, cfg)
}

/// Repeatedly merges the two least-full underutilized bins (used capacity
/// below `threshold` × BC) whose union respects BC and MAX.
pub fn merge_underutilized(
    solution: PackingSolution,
    cfg: &PackingConfig,
    threshold: f64,
) -> Result<PackingSolution> {
    let cutoff = (threshold * cfg.bin_capacity as f64) as u64;
    let union_fits = |a: &Bin, b: &Bin| -> bool {
        if a.subgraphs.len() + b.subgraphs.len() > cfg.max_subgraphs_per_bin {
            return false;
        }
        let extra: u64 = b
            .resident
            .iter()
            .filter(|(v, _)| !a.resident.contains_key(v))
            .map(|(_, &w)| w)
            .sum();
        a.used_capacity + extra <= cfg.bin_capacity
    };
    let mut clusters: Vec<Vec<usize>> =
        solution.bins.iter().map(|b| b.subgraphs.clone()).collect();
    let mut bins: Vec<Bin> = solution.bins.clone();
    loop {
        let mut order: Vec<usize> = (0..bins.len()).collect();
        order.sort_by_key(|&i| bins[i].used_capacity);
        let candidates: Vec<usize> =
            order.iter().copied().filter(|&i| bins[i].used_capacity < cutoff).collect();
        let mut merged = None;
        'outer: for (ai, &a) in candidates.iter().enumerate() {
            for &b in &candidates[ai + 1..] {
                if union_fits(&bins[a], &bins[b]) {
                    merged = Some((a, b));
                    break 'outer;
                }
            }
        }
        match merged {
            Some((a, b)) => {
                let (absorbed_subs, absorbed_bin) = (clusters[b].clone(), bins[b].clone());
                clusters[a].extend(absorbed_subs);
                for (&v, &w) in &absorbed_bin.resident {
                    if bins[a].resident.insert(v, w).is_none() {
                        bins[a].used_capacity += w;
                    }
                }
                let subs = clusters[a].clone();
                bins[a].subgraphs = subs;
                clusters.remove(b);
                bins.remove(b);
            }
            None => break,
        }
    }
    packing::rebuild(solution.subgraphs, clusters, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttributeValue;
    use crate::packing::Heuristic;
    use crate::synth;

    fn social_fixture() -> (PropertyGraph, ExtractionQuery) {
        let mut g = PropertyGraph::new(false);
        let edges: &[(u64, u64, i64)] = &[
            (1, 5, 8),
            (1, 2, 1),
            (2, 6, 8),
            (2, 7, 9),
            (3, 6, 7),
            (3, 7, 10),
            (4, 8, 9),
            (4, 5, 2),
        ];
        for &(u, v, w) in edges {
            let mut attrs = crate::graph::AttributeRecord::new();
            attrs.insert("weight".into(), AttributeValue::Int(w));
            g.add_edge(VertexId(u), VertexId(v), attrs);
        }
        let ages = [(1, 30), (2, 40), (3, 35), (4, 28), (5, 26), (6, 29), (7, 50), (8, 10)];
        for (v, age) in ages {
            g.set_vertex_attr(VertexId(v), "age", AttributeValue::Int(age));
        }
        for v in [1, 2, 3, 4] {
            g.set_vertex_attr(VertexId(v), "poi", AttributeValue::Bool(true));
        }
        let mut q = ExtractionQuery::neighborhood(1);
        q.query_vertex_predicate = "poi = true".parse().unwrap();
        q.vertex_filter = "age > 25".parse().unwrap();
        q.edge_filter = "weight > 5".parse().unwrap();
        (g, q)
    }

    #[test]
    fn centralized_covers_social_fixture() {
        let (g, q) = social_fixture();
        let cfg = PackingConfig::new(200, 10).with_heuristic(Heuristic::Shingle);
        let sol = run_centralized(&g, &q, &cfg, None).unwrap();
        sol.validate(&cfg).unwrap();
        assert_eq!(sol.subgraphs.len(), 4);
        let members_of = |qv: u64| -> Vec<u64> {
            sol.subgraphs
                .iter()
                .find(|s| s.query_vertex.0 == qv)
                .unwrap()
                .member_ids()
                .map(|v| v.0)
                .collect()
        };
        assert_eq!(members_of(2), vec![2, 6, 7]);
        assert_eq!(members_of(3), vec![3, 6, 7]);
    }

    #[test]
    fn centralized_empty_query_set() {
        let (g, mut q) = social_fixture();
        q.query_vertex_predicate = "age > 1000".parse().unwrap();
        let cfg = PackingConfig::new(200, 10);
        let sol = run_centralized(&g, &q, &cfg, None).unwrap();
        assert_eq!(sol.bin_count(), 0);
        assert!(sol.subgraphs.is_empty());
    }

    #[test]
    fn centralized_budget_refusal() {
        let (g, q) = social_fixture();
        let cfg = PackingConfig::new(200, 10);
        let err = run_centralized(&g, &q, &cfg, Some(10)).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn distributed_rejects_k3() {
        let (g, mut q) = social_fixture();
        q.radius = 3;
        let cfg = PackingConfig::new(200, 10);
        let err = run_distributed(&g, &q, &cfg, 2).unwrap_err();
        assert!(matches!(err, Error::UnsupportedRadius { radius: 3 }));
    }

    #[test]
    fn distributed_single_shard_matches_centralized() {
        let (g, q) = social_fixture();
        let cfg = PackingConfig::new(200, 10).with_heuristic(Heuristic::Shingle);
        let central = run_centralized(&g, &q, &cfg, None).unwrap();
        let dist = run_distributed(&g, &q, &cfg, 1).unwrap();
        assert_eq!(central.bin_count(), dist.bin_count());
        let sets = |sol: &PackingSolution| -> Vec<(u64, Vec<u64>)> {
            let mut v: Vec<(u64, Vec<u64>)> = sol
                .subgraphs
                .iter()
                .map(|s| (s.query_vertex.0, s.member_ids().map(|x| x.0).collect()))
                .collect();
            v.sort();
            v
        };
        assert_eq!(sets(&central), sets(&dist));
        // same bins hold the same member unions
        let mut a: Vec<Vec<u64>> = central
            .bins
            .iter()
            .map(|b| b.resident.keys().map(|v| v.0).collect())
            .collect();
        let mut b: Vec<Vec<u64>> =
            dist.bins.iter().map(|b| b.resident.keys().map(|v| v.0).collect()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn distributed_path_k2_matches_bfs_oracle() {
        let g = PropertyGraph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], false);
        let q = ExtractionQuery::neighborhood(2);
        let cfg = PackingConfig::new(10_000, 100);
        let sol = run_distributed(&g, &q, &cfg, 3).unwrap();
        assert_eq!(sol.subgraphs.len(), 6);
        let ex = Extractor::new(&g, &q);
        for sg in &sol.subgraphs {
            let oracle: Vec<VertexId> =
                ex.extract_khop(sg.query_vertex).member_ids().collect();
            let got: Vec<VertexId> = sg.member_ids().collect();
            assert_eq!(got, oracle, "qv {}", sg.query_vertex);
        }
    }

    #[test]
    fn distributed_k1_and_filters_match_centralized_sets() {
        let (g, q) = social_fixture();
        let cfg = PackingConfig::new(200, 10);
        for shards in [1, 2, 4] {
            let sol = run_distributed(&g, &q, &cfg, shards).unwrap();
            sol.validate(&cfg).unwrap();
            let ex = Extractor::new(&g, &q);
            for sg in &sol.subgraphs {
                let oracle: Vec<VertexId> =
                    ex.extract_khop(sg.query_vertex).member_ids().collect();
                assert_eq!(sg.member_ids().collect::<Vec<_>>(), oracle);
            }
        }
    }

    #[test]
    fn stage1_record_conservation() {
        let (g, q) = social_fixture();
        let ex = Extractor::new(&g, &q);
        let plan = ShardPlan::new(4).unwrap();
        let (_, emitted) = stage1(&g, &q, &ex, &plan);
        let expect: usize = g
            .vertices()
            .filter(|&v| ex.passes_vertex_filter(v))
            .map(|v| ex.filtered_neighbors(v).len() + 1)
            .sum();
        assert_eq!(emitted, expect);
    }

    #[test]
    fn distributed_parity_on_powerlaw_fixture() {
        let g = synth::barabasi_albert(500, 3, 17);
        let q = ExtractionQuery::neighborhood(1);
        let cfg = PackingConfig::new(25_000, 100).with_heuristic(Heuristic::Shingle);
        let central = run_centralized(&g, &q, &cfg, None).unwrap();
        for shards in [2, 4] {
            let dist = run_distributed(&g, &q, &cfg, shards).unwrap();
            dist.validate(&cfg).unwrap();
            assert_eq!(dist.subgraphs.len(), central.subgraphs.len());
            let hi = central.bin_count() + central.bin_count() / 4 + 1;
            assert!(
                dist.bin_count() <= hi,
                "{} shards: {} bins vs centralized {}",
                shards,
                dist.bin_count(),
                central.bin_count()
            );
        }
    }

    #[test]
    fn merge_combines_two_underfull_bins() {
        let subs = vec![
            SubgraphOfInterest::new(VertexId(1), BTreeMap::from([(VertexId(1), 3)])),
            SubgraphOfInterest::new(VertexId(2), BTreeMap::from([(VertexId(2), 3)])),
        ];
        let cfg = PackingConfig::new(10, 10);
        // force them apart first
        let tight = PackingConfig::new(3, 10);
        let sol = greedy_pack(subs, &tight).unwrap();
        assert_eq!(sol.bin_count(), 2);
        let merged = merge_underutilized(sol, &cfg, 0.5).unwrap();
        assert_eq!(merged.bin_count(), 1);
        merged.validate(&cfg).unwrap();
    }

    #[test]
    fn merge_leaves_full_bins_alone() {
        let subs = vec![
            SubgraphOfInterest::new(
                VertexId(1),
                (0..7).map(|i| (VertexId(i), 1)).collect(),
            ),
            SubgraphOfInterest::new(
                VertexId(100),
                (100..107).map(|i| (VertexId(i), 1)).collect(),
            ),
        ];
        let cfg = PackingConfig::new(10, 10);
        let sol = greedy_pack(subs, &cfg).unwrap();
        assert_eq!(sol.bin_count(), 2);
        let merged = merge_underutilized(sol, &cfg, 0.5).unwrap();
        assert_eq!(merged.bin_count(), 2);
    }

    #[test]
    fn merge_never_increases_bins_and_preserves_coverage() {
        let g = synth::erdos_renyi(120, 0.05, 5);
        let q = ExtractionQuery::neighborhood(1);
        let cfg = PackingConfig::new(1500, 50);
        let sol = run_centralized(&g, &q, &cfg, None).unwrap();
        let before = sol.bin_count();
        let merged = merge_underutilized(sol, &cfg, 0.5).unwrap();
        assert!(merged.bin_count() <= before);
        merged.validate(&cfg).unwrap();
    }
}
