//! The analytics programs, written against the `SubgraphView` contract.
//!
//! Each one-pass app is a pure function of a view: local clustering
//! coefficient, triangle count, weak ties, and feed-forward-loop motifs on
//! 1-hop views; Monte-Carlo personalized PageRank on 2-hop views.
//! Connected components is the iterative app, a min-label BSP program.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bsp::{run_iterative, BspProgram, Convergence};
use crate::engine::{materialize_partitions, PartitionGraph, SubgraphView};
use crate::error::{Error, Result};
use crate::extraction::ExtractionQuery;
use crate::graph::{PropertyGraph, VertexId};
use crate::hashing::mix64;
use crate::packing::{greedy_pack, PackingConfig};

/// App selector for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum AppKind {
    Lcc,
    Tc,
    Wt,
    Ffl,
    Ppr,
    Cc,
}

/// Local clustering coefficient of the query vertex: edges among its
/// neighbors over d(d−1)/2; zero when fewer than two neighbors.
pub fn lcc(view: &SubgraphView<'_>) -> f64 {
    let qv = view.query_vertex();
    let neighbors = view.neighbors(qv);
    let d = neighbors.len();
    if d < 2 {
        return 0.0;
    }
    let possible_links = (d * (d - 1) / 2) as f64;
    let num_edges = triangle_count(view);
    num_edges as f64 / possible_links
}

/// Number of adjacent neighbor pairs, i.e. triangles through the query
/// vertex.
pub fn triangle_count(view: &SubgraphView<'_>) -> u64 {
    let qv = view.query_vertex();
    let neighbors = view.neighbors(qv);
    let mut count = 0;
    for (i, &a) in neighbors.iter().enumerate() {
        for &b in &neighbors[i + 1..] {
            if view.has_edge(a, b) || view.has_edge(b, a) {
                count += 1;
            }
        }
    }
    count
}

/// Number of non-adjacent neighbor pairs: C(d, 2) − triangles.
pub fn weak_ties(view: &SubgraphView<'_>) -> u64 {
    let d = view.neighbors(view.query_vertex()).len() as u64;
    d * (d - 1) / 2 - triangle_count(view)
}

/// Feed-forward loops: distinct vertex triples containing the query vertex
/// that admit a labeling a→b, b→c, a→c within the view. Each triple counts
/// once, whatever role the query vertex plays.
pub fn motif_ffl(view: &SubgraphView<'_>) -> Result<u64> {
    if !view.is_directed() {
        return Err(Error::Config("feed-forward-loop motifs need a directed graph".into()));
    }
    let qv = view.query_vertex();
    let others: Vec<VertexId> = view.vertices().into_iter().filter(|&v| v != qv).collect();
    let is_ffl = |t: [VertexId; 3]| -> bool {
        // a feed-forward loop is any permutation with edges a→b, b→c, a→c
        let perms = [
            [t[0], t[1], t[2]],
            [t[0], t[2], t[1]],
            [t[1], t[0], t[2]],
            [t[1], t[2], t[0]],
            [t[2], t[0], t[1]],
            [t[2], t[1], t[0]],
        ];
        perms.iter().any(|&[a, b, c]| {
            view.has_edge(a, b) && view.has_edge(b, c) && view.has_edge(a, c)
        })
    };
    let mut count = 0;
    for (i, &b) in others.iter().enumerate() {
        for &c in &others[i + 1..] {
            if is_ffl([qv, b, c]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Monte-Carlo personalized PageRank from the query vertex: `walks`
/// restarts of `steps` transitions each. Every transition restarts to the
/// query vertex with probability `restart_prob`; dangling vertices always
/// restart. Scores are visit frequencies normalized to sum 1.
pub fn ppr_monte_carlo(
    view: &SubgraphView<'_>,
    walks: usize,
    restart_prob: f64,
    steps: usize,
    seed: u64,
) -> Result<BTreeMap<VertexId, f64>> {
    if !(restart_prob > 0.0 && restart_prob < 1.0) {
        return Err(Error::Config(format!("restart probability {restart_prob} outside (0, 1)")));
    }
    let qv = view.query_vertex();
    let mut visits: BTreeMap<VertexId, u64> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(qv.0)));
    let mut total = 0u64;
    for _ in 0..walks {
        let mut current = qv;
        for _ in 0..steps {
            let next = if rng.gen::<f64>() < restart_prob {
                qv
            } else {
                let out = view.neighbors(current);
                if out.is_empty() {
                    qv // dangling: restart
                } else {
                    out[rng.gen_range(0..out.len())]
                }
            };
            current = next;
            *visits.entry(current).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        // degenerate budget: all mass on the query vertex
        return Ok(BTreeMap::from([(qv, 1.0)]));
    }
    Ok(visits.into_iter().map(|(v, n)| (v, n as f64 / total as f64)).collect())
}

/// Min-label propagation: each superstep a query vertex takes the minimum
/// of its own and its neighbors' labels.
pub struct MinLabelProgram;

impl BspProgram for MinLabelProgram {
    fn init(&self, v: VertexId) -> u64 {
        v.0
    }

    fn step(
        &self,
        view: &SubgraphView<'_>,
        labels: &dyn Fn(VertexId) -> u64,
        current: u64,
    ) -> (u64, bool) {
        let qv = view.query_vertex();
        let next = view
            .neighbors(qv)
            .into_iter()
            .map(&labels)
            .fold(current, u64::min);
        (next, next == current)
    }
}

/// Builds the partitioning connected components runs on: every vertex a
/// query vertex with its 1-hop subgraph, spread over roughly `n`
/// capacity-unbounded bins.
pub fn cc_partitions(
    graph: &PropertyGraph,
    n: usize,
) -> Result<(Vec<PartitionGraph>, BTreeMap<VertexId, usize>)> {
    let query = ExtractionQuery::neighborhood(1);
    let ex = crate::extraction::Extractor::new(graph, &query);
    let subgraphs = ex.extract_all(None)?;
    let q = subgraphs.len().max(1);
    let cfg = PackingConfig::new(u64::MAX, q.div_ceil(n.max(1)));
    let solution = greedy_pack(subgraphs, &cfg)?;
    let partitions = materialize_partitions(graph, &solution, &query)?;
    Ok((partitions, solution.ownership))
}

/// Connected components via BSP min-label propagation over `n` partitions:
/// label(v) = the smallest vertex id in v's component.
pub fn connected_components(graph: &PropertyGraph, n: usize) -> Result<BTreeMap<VertexId, u64>> {
    let (partitions, ownership) = cc_partitions(graph, n)?;
    let max_supersteps = graph.vertex_count() + 2;
    let out = run_iterative(
        &partitions,
        &MinLabelProgram,
        &ownership,
        max_supersteps,
        Convergence::Fixpoint,
    )?;
    if !out.converged {
        return Err(Error::Consistency(format!(
            "label propagation did not converge in {max_supersteps} supersteps"
        )));
    }
    Ok(out.labels)
}

/// Union-find oracle used by tests and the acceptance harness.
pub fn union_find_components(graph: &PropertyGraph) -> BTreeMap<VertexId, u64> {
    let vertices: Vec<VertexId> = graph.vertices().collect();
    let index: std::collections::HashMap<VertexId, usize> =
        vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for (u, v) in graph.edges() {
        let (ru, rv) = (find(&mut parent, index[&u]), find(&mut parent, index[&v]));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let mut min_label: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();
    for (i, &v) in vertices.iter().enumerate() {
        let root = find(&mut parent, i);
        let entry = min_label.entry(root).or_insert(v.0);
        *entry = (*entry).min(v.0);
    }
    vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, min_label[&find(&mut parent, i)]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{execute, EngineConfig};
    use crate::pipeline::run_centralized;
    use crate::synth;

    /// Runs a one-pass app over every query vertex of `graph` with no
    /// filters and radius `k`, returning the merged result map.
    fn run_app<O: Send, F>(graph: &PropertyGraph, k: u32, program: F) -> BTreeMap<VertexId, O>
    where
        F: Fn(&SubgraphView<'_>) -> Result<O> + Sync,
    {
        let query = ExtractionQuery::neighborhood(k);
        let cfg = PackingConfig::new(u64::MAX, 3000);
        let sol = run_centralized(graph, &query, &cfg, None).unwrap();
        let parts = materialize_partitions(graph, &sol, &query).unwrap();
        let ecfg = EngineConfig::default();
        let mut all = BTreeMap::new();
        for part in &parts {
            let out = execute(part, &program, &ecfg).unwrap();
            assert!(out.errors.is_empty(), "app errors: {:?}", out.errors.keys());
            all.extend(out.results);
        }
        all
    }

    #[test]
    fn lcc_triangle_is_one() {
        let g = PropertyGraph::from_edges(&[(1, 2), (2, 3), (1, 3)], false);
        for (_, v) in run_app(&g, 1, |view| Ok(lcc(view))) {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn lcc_star_center_is_zero() {
        let g = PropertyGraph::from_edges(&[(0, 1), (0, 2), (0, 3), (0, 4)], false);
        let out = run_app(&g, 1, |view| Ok(lcc(view)));
        assert_eq!(out[&VertexId(0)], 0.0);
    }

    #[test]
    fn lcc_matches_adjacency_oracle() {
        let g = synth::erdos_renyi(100, 0.1, 42);
        let out = run_app(&g, 1, |view| Ok(lcc(view)));
        for v in g.vertices() {
            let neigh = g.neighbors(v);
            let d = neigh.len();
            let expect = if d < 2 {
                0.0
            } else {
                let mut edges = 0;
                for (i, &a) in neigh.iter().enumerate() {
                    for &b in &neigh[i + 1..] {
                        if g.has_edge(a, b) {
                            edges += 1;
                        }
                    }
                }
                edges as f64 / (d * (d - 1) / 2) as f64
            };
            assert!((out[&v] - expect).abs() < 1e-12, "lcc({v})");
        }
    }

    #[test]
    fn triangles_k3_k4() {
        let k3 = PropertyGraph::from_edges(&[(1, 2), (2, 3), (1, 3)], false);
        for (_, t) in run_app(&k3, 1, |view| Ok(triangle_count(view))) {
            assert_eq!(t, 1);
        }
        let mut edges = Vec::new();
        for i in 0..4u64 {
            for j in (i + 1)..4 {
                edges.push((i, j));
            }
        }
        let k4 = PropertyGraph::from_edges(&edges, false);
        for (_, t) in run_app(&k4, 1, |view| Ok(triangle_count(view))) {
            assert_eq!(t, 3);
        }
    }

    #[test]
    fn triangle_sum_is_thrice_total() {
        let g = synth::erdos_renyi(60, 0.12, 7);
        let out = run_app(&g, 1, |view| Ok(triangle_count(view)));
        let per_vertex_sum: u64 = out.values().sum();
        // brute-force count of distinct triangles
        let vs: Vec<VertexId> = g.vertices().collect();
        let mut total = 0u64;
        for (i, &a) in vs.iter().enumerate() {
            for (j, &b) in vs.iter().enumerate().skip(i + 1) {
                if !g.has_edge(a, b) {
                    continue;
                }
                for &c in vs.iter().skip(j + 1) {
                    if g.has_edge(a, c) && g.has_edge(b, c) {
                        total += 1;
                    }
                }
            }
        }
        assert_eq!(per_vertex_sum, 3 * total);
    }

    #[test]
    fn weak_ties_star() {
        let g = PropertyGraph::from_edges(&[(0, 1), (0, 2), (0, 3), (0, 4)], false);
        let out = run_app(&g, 1, |view| Ok(weak_ties(view)));
        assert_eq!(out[&VertexId(0)], 6);
    }

    #[test]
    fn weak_tie_identity_holds_everywhere() {
        let g = synth::erdos_renyi(80, 0.08, 13);
        let out = run_app(&g, 1, |view| Ok((triangle_count(view), weak_ties(view))));
        for (v, (tc, wt)) in out {
            let d = g.degree(v) as u64;
            assert_eq!(tc + wt, d * (d - 1) / 2, "identity at {v}");
        }
    }

    #[test]
    fn ffl_basic_and_cycle() {
        let g = PropertyGraph::from_edges(&[(1, 2), (2, 3), (1, 3)], true);
        let out = run_app(&g, 1, |view| motif_ffl(view));
        assert_eq!(out[&VertexId(1)], 1);
        let cycle = PropertyGraph::from_edges(&[(1, 2), (2, 3), (3, 1)], true);
        let out = run_app(&cycle, 1, |view| motif_ffl(view));
        for (_, c) in out {
            assert_eq!(c, 0);
        }
    }

    #[test]
    fn ffl_rejects_undirected() {
        let g = PropertyGraph::from_edges(&[(1, 2), (2, 3), (1, 3)], false);
        let query = ExtractionQuery::neighborhood(1);
        let cfg = PackingConfig::new(u64::MAX, 3000);
        let sol = run_centralized(&g, &query, &cfg, None).unwrap();
        let parts = materialize_partitions(&g, &sol, &query).unwrap();
        let out = execute(&parts[0], |view| motif_ffl(view), &EngineConfig::default()).unwrap();
        assert!(!out.errors.is_empty());
        assert!(out.results.is_empty());
    }

    #[test]
    fn ffl_matches_triple_enumeration_oracle() {
        let g = synth::erdos_renyi_directed(25, 0.15, 19);
        let out = run_app(&g, 1, |view| motif_ffl(view));
        for v in g.vertices() {
            // oracle over the closed neighborhood (the 1-hop view follows
            // edges in both directions)
            let mut members = vec![v];
            members.extend(g.neighbors(v));
            members.extend(g.in_neighbors(v));
            members.sort_unstable();
            members.dedup();
            let mut expect = 0u64;
            for (i, &b) in members.iter().enumerate() {
                if b == v {
                    continue;
                }
                for &c in &members[i + 1..] {
                    if c == v {
                        continue;
                    }
                    let t = [v, b, c];
                    let mut found = false;
                    for &a in &t {
                        for &x in &t {
                            for &y in &t {
                                if a != x && a != y && x != y {
                                    found |= g.has_edge(a, x)
                                        && g.has_edge(x, y)
                                        && g.has_edge(a, y);
                                }
                            }
                        }
                    }
                    if found {
                        expect += 1;
                    }
                }
            }
            assert_eq!(out[&v], expect, "ffl({v})");
        }
    }

    #[test]
    fn ppr_single_vertex_view() {
        let g = PropertyGraph::from_edges(&[(1, 2)], false);
        let mut query = ExtractionQuery::neighborhood(0);
        query.query_vertex_predicate = crate::predicate::Predicate::True;
        let cfg = PackingConfig::new(u64::MAX, 3000);
        let sol = run_centralized(&g, &query, &cfg, None).unwrap();
        let parts = materialize_partitions(&g, &sol, &query).unwrap();
        for part in &parts {
            let out = execute(
                part,
                |view| ppr_monte_carlo(view, 10, 0.15, 100, 1),
                &EngineConfig::default(),
            )
            .unwrap();
            for (qv, scores) in out.results {
                assert_eq!(scores.len(), 1);
                assert!((scores[&qv] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ppr_deterministic_for_fixed_seed() {
        let g = synth::erdos_renyi(40, 0.1, 3);
        let a = run_app(&g, 2, |view| ppr_monte_carlo(view, 50, 0.15, 40, 77));
        let b = run_app(&g, 2, |view| ppr_monte_carlo(view, 50, 0.15, 40, 77));
        assert_eq!(a, b);
    }

    #[test]
    fn ppr_scores_normalized() {
        let g = synth::erdos_renyi(30, 0.15, 9);
        let out = run_app(&g, 2, |view| ppr_monte_carlo(view, 100, 0.15, 50, 5));
        for (v, scores) in out {
            let sum: f64 = scores.values().sum();
            assert!((sum - 1.0).abs() < 1e-9, "ppr({v}) sums to {sum}");
        }
    }

    /// Power-iteration oracle of the same walk process on an explicit
    /// transition structure.
    pub(crate) fn ppr_power_iteration(
        members: &[VertexId],
        out_edges: &dyn Fn(VertexId) -> Vec<VertexId>,
        qv: VertexId,
        restart: f64,
    ) -> BTreeMap<VertexId, f64> {
        let n = members.len();
        let idx: std::collections::HashMap<VertexId, usize> =
            members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let qi = idx[&qv];
        let mut p = vec![0.0f64; n];
        p[qi] = 1.0;
        for _ in 0..10_000 {
            let mut next = vec![0.0f64; n];
            next[qi] += restart;
            for (i, &v) in members.iter().enumerate() {
                let mass = p[i] * (1.0 - restart);
                let out: Vec<usize> = out_edges(v).iter().map(|n| idx[n]).collect();
                if out.is_empty() {
                    next[qi] += mass;
                } else {
                    let share = mass / out.len() as f64;
                    for o in out {
                        next[o] += share;
                    }
                }
            }
            let delta: f64 =
                p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            p = next;
            if delta < 1e-12 {
                break;
            }
        }
        members.iter().enumerate().map(|(i, &v)| (v, p[i])).collect()
    }

    #[test]
    fn ppr_two_cycle_close_to_power_iteration() {
        let g = PropertyGraph::from_edges(&[(1, 2)], false);
        let out = run_app(&g, 2, |view| ppr_monte_carlo(view, 1000, 0.15, 100, 21));
        let members = vec![VertexId(1), VertexId(2)];
        let oracle = ppr_power_iteration(
            &members,
            &|v| g.neighbors(v).to_vec(),
            VertexId(1),
            0.15,
        );
        for v in &members {
            let got = out[&VertexId(1)].get(v).copied().unwrap_or(0.0);
            assert!(
                (got - oracle[v]).abs() < 0.02,
                "{v}: mc {got} vs power {}",
                oracle[v]
            );
        }
    }

    #[test]
    fn cc_path_and_oracle() {
        let g = PropertyGraph::from_edges(&[(1, 2), (2, 3)], false);
        let labels = connected_components(&g, 1).unwrap();
        assert!(labels.values().all(|&l| l == 1));
    }

    #[test]
    fn cc_matches_union_find_on_random_graphs() {
        for seed in 0..5 {
            let g = synth::erdos_renyi(120, 0.02, seed);
            let labels = connected_components(&g, 3).unwrap();
            assert_eq!(labels, union_find_components(&g), "seed {seed}");
        }
    }

    #[test]
    fn cc_partition_count_independence() {
        let g = synth::erdos_renyi(150, 0.015, 8);
        let one = connected_components(&g, 1).unwrap();
        for n in [2usize, 5] {
            assert_eq!(connected_components(&g, n).unwrap(), one, "{n} partitions");
        }
    }
}
