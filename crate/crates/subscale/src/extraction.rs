//! Declarative extraction of subgraphs of interest.
//!
//! An extraction query names a set of query vertices (P_QV), a radius k,
//! vertex and edge filters (P_V, P_E), and the attributes to retain (A_V,
//! A_E). Extraction is a filtered BFS: edges failing P_E do not count for
//! reachability, and traversal visits neighbors in ascending id order so
//! results are reproducible. Subgraphs larger than the bin capacity can be
//! cut down by random-node or random-walk sampling.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Projection, PropertyGraph, VertexId, WeightConfig};
use crate::hashing::mix64;
use crate::predicate::Predicate;

/// How to shrink a subgraph that exceeds bin capacity.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SamplingMethod {
    #[default]
    None,
    RandomNode {
        ratio: f64,
    },
    RandomWalk {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_ratio: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SamplingPolicy {
    #[serde(flatten)]
    pub method: SamplingMethod,
    #[serde(default)]
    pub seed: u64,
}

/// Query mode: k-hop neighborhoods of query vertices, or one induced
/// subgraph per distinct value of an attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryMode {
    Neighborhood,
    AttributeInduced { attribute: String },
}

impl Default for QueryMode {
    fn default() -> Self {
        QueryMode::Neighborhood
    }
}

/// The declarative extraction query (P_QV, k, P_E, P_V, A_E, A_V).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionQuery {
    #[serde(rename = "p_qv")]
    pub query_vertex_predicate: Predicate,
    #[serde(rename = "k")]
    pub radius: u32,
    #[serde(rename = "p_v", default = "Predicate::default_true")]
    pub vertex_filter: Predicate,
    #[serde(rename = "p_e", default = "Predicate::default_true")]
    pub edge_filter: Predicate,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub mode: QueryMode,
    /// When set, a query vertex failing P_V is still extracted; by default
    /// query vertices must pass P_V like any other member.
    #[serde(default)]
    pub exempt_query_vertex: bool,
    #[serde(default)]
    pub sampling: SamplingPolicy,
    #[serde(default)]
    pub weights: WeightConfig,
}

impl ExtractionQuery {
    /// A k-hop query with no filters and no projection.
    pub fn neighborhood(radius: u32) -> Self {
        ExtractionQuery {
            query_vertex_predicate: Predicate::True,
            radius,
            vertex_filter: Predicate::True,
            edge_filter: Predicate::True,
            projection: Projection::default(),
            mode: QueryMode::Neighborhood,
            exempt_query_vertex: false,
            sampling: SamplingPolicy::default(),
            weights: WeightConfig::default(),
        }
    }

    /// Fails if any predicate references an attribute absent from the
    /// vertex schema (edge filters are checked against edge attributes).
    pub fn validate(&self, graph: &PropertyGraph) -> Result<()> {
        for name in self
            .query_vertex_predicate
            .referenced_attrs()
            .into_iter()
            .chain(self.vertex_filter.referenced_attrs())
        {
            if !graph.vertex_schema_contains(name) {
                return Err(Error::UnknownAttribute { name: name.to_string() });
            }
        }
        Ok(())
    }
}

impl Predicate {
    fn default_true() -> Predicate {
        Predicate::True
    }
}

/// A query vertex plus its weighted member set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphOfInterest {
    pub query_vertex: VertexId,
    /// Member vertices with their weights, in ascending id order.
    pub members: BTreeMap<VertexId, u64>,
    /// Sum of member weights.
    pub size: u64,
}

impl SubgraphOfInterest {
    pub fn new(query_vertex: VertexId, members: BTreeMap<VertexId, u64>) -> Self {
        let size = members.values().sum();
        SubgraphOfInterest { query_vertex, members, size }
    }

    pub fn member_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.members.keys().copied()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.members.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Precomputed filter state shared by all k-hop extractions of one query.
pub struct Extractor<'g> {
    graph: &'g PropertyGraph,
    query: &'g ExtractionQuery,
    passes_v: HashSet<VertexId>,
    /// Filtered undirected adjacency: P_E-passing edges between P_V-passing
    /// vertices, both directions merged for directed graphs.
    filtered_adj: HashMap<VertexId, Vec<VertexId>>,
    /// Weight of each P_V-passing vertex under its retained degree.
    weights: HashMap<VertexId, u64>,
}

impl<'g> Extractor<'g> {
    pub fn new(graph: &'g PropertyGraph, query: &'g ExtractionQuery) -> Self {
        let passes_v: HashSet<VertexId> = graph
            .vertices()
            .filter(|&v| query.vertex_filter.matches(graph.vertex_attrs(v)))
            .collect();
        let mut filtered_adj: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        let mut retained_edges: HashMap<VertexId, usize> = HashMap::new();
        for (u, v) in graph.edges() {
            if !passes_v.contains(&u) || !passes_v.contains(&v) {
                continue;
            }
            if !query.edge_filter.matches(graph.edge_attrs_of(u, v)) {
                continue;
            }
            *retained_edges.entry(u).or_default() += 1;
            if u != v {
                *retained_edges.entry(v).or_default() += 1;
            }
            filtered_adj.entry(u).or_default().push(v);
            if u != v {
                filtered_adj.entry(v).or_default().push(u);
            }
        }
        for list in filtered_adj.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let weights = passes_v
            .iter()
            .map(|&v| {
                let deg = retained_edges.get(&v).copied().unwrap_or(0);
                (v, graph.weight_with_degree(v, &query.projection, &query.weights, deg))
            })
            .collect();
        Extractor { graph, query, passes_v, filtered_adj, weights }
    }

    pub fn passes_vertex_filter(&self, v: VertexId) -> bool {
        self.passes_v.contains(&v)
    }

    /// Query vertices in ascending id order: P_QV-passing vertices, also
    /// required to pass P_V unless the query exempts them.
    pub fn query_vertices(&self) -> Vec<VertexId> {
        self.graph
            .vertices()
            .filter(|&v| self.query.query_vertex_predicate.matches(self.graph.vertex_attrs(v)))
            .filter(|&v| self.query.exempt_query_vertex || self.passes_v.contains(&v))
            .collect()
    }

    /// P_E/P_V-filtered neighbors of `v`, ascending; empty for vertices
    /// failing the vertex filter.
    pub fn filtered_neighbors(&self, v: VertexId) -> &[VertexId] {
        self.filtered_adj.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Weight of `v` under the query's projection and retained degree.
    pub fn weight_of(&self, v: VertexId) -> u64 {
        self.weights.get(&v).copied().unwrap_or_else(|| {
            // exempt query vertex that failed P_V: no retained edges
            self.graph.weight_with_degree(v, &self.query.projection, &self.query.weights, 0)
        })
    }

    /// Depth-bounded BFS over filtered edges, neighbors in ascending order.
    pub fn extract_khop(&self, qv: VertexId) -> SubgraphOfInterest {
        let mut members = BTreeMap::new();
        members.insert(qv, self.weight_of(qv));
        let mut frontier = VecDeque::new();
        frontier.push_back((qv, 0u32));
        while let Some((v, depth)) = frontier.pop_front() {
            if depth == self.query.radius {
                continue;
            }
            if let Some(neigh) = self.filtered_adj.get(&v) {
                for &n in neigh {
                    if !members.contains_key(&n) {
                        members.insert(n, self.weight_of(n));
                        frontier.push_back((n, depth + 1));
                    }
                }
            }
        }
        SubgraphOfInterest::new(qv, members)
    }

    /// Extracts every query vertex's subgraph, applying the sampling policy
    /// to any subgraph whose size exceeds `capacity` (when given).
    pub fn extract_all(&self, capacity: Option<u64>) -> Result<Vec<SubgraphOfInterest>> {
        let mut out = Vec::new();
        for qv in self.query_vertices() {
            let mut sg = self.extract_khop(qv);
            if let Some(bc) = capacity {
                if sg.size > bc {
                    sg = apply_sampling(&sg, self.graph, &self.query.sampling)?;
                    if sg.size > bc {
                        return Err(Error::SubgraphTooLarge {
                            query_vertex: qv.0,
                            size: sg.size,
                            capacity: bc,
                        });
                    }
                }
            }
            out.push(sg);
        }
        Ok(out)
    }
}

/// Vertices satisfying P_QV, ascending. This is the raw predicate scan;
/// pipeline entry points additionally drop query vertices failing P_V when
/// not exempted.
pub fn select_query_vertices(graph: &PropertyGraph, query: &ExtractionQuery) -> Vec<VertexId> {
    graph
        .vertices()
        .filter(|&v| query.query_vertex_predicate.matches(graph.vertex_attrs(v)))
        .collect()
}

pub fn extract_khop(
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    qv: VertexId,
) -> SubgraphOfInterest {
    Extractor::new(graph, query).extract_khop(qv)
}

/// One induced subgraph per distinct value of `attribute`. String values
/// are treated as `|`-separated tag sets, so a multi-tagged vertex appears
/// in every matching subgraph. The representative query vertex is the
/// lowest member id; subgraphs are returned in attribute-value order.
pub fn extract_attribute_induced(
    graph: &PropertyGraph,
    attribute: &str,
    projection: &Projection,
    weights: &WeightConfig,
) -> Result<Vec<SubgraphOfInterest>> {
    if !graph.vertex_schema_contains(attribute) {
        return Err(Error::UnknownAttribute { name: attribute.to_string() });
    }
    let mut groups: BTreeMap<String, Vec<VertexId>> = BTreeMap::new();
    for v in graph.vertices() {
        if let Some(value) = graph.vertex_attr(v, attribute) {
            let tags: Vec<String> = match value {
                crate::graph::AttributeValue::Str(s) => {
                    s.split('|').map(|t| t.to_string()).collect()
                }
                other => vec![format!("{other:?}")],
            };
            for tag in tags {
                groups.entry(tag).or_default().push(v);
            }
        }
    }
    let mut out = Vec::new();
    for (_value, vertices) in groups {
        let member_set: HashSet<VertexId> = vertices.iter().copied().collect();
        let members: BTreeMap<VertexId, u64> = vertices
            .iter()
            .map(|&v| {
                let deg =
                    graph.neighbors(v).iter().filter(|n| member_set.contains(n)).count()
                        + if graph.is_directed() {
                            graph.in_neighbors(v).iter().filter(|n| member_set.contains(n)).count()
                        } else {
                            0
                        };
                (v, graph.weight_with_degree(v, projection, weights, deg))
            })
            .collect();
        let qv = *members.keys().next().expect("group is non-empty");
        out.push(SubgraphOfInterest::new(qv, members));
    }
    Ok(out)
}

fn sampling_rng(policy: &SamplingPolicy, qv: VertexId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(policy.seed ^ mix64(qv.0)))
}

/// Keeps each non-query member independently with probability `ratio`; the
/// query vertex is always kept.
pub fn sample_random_node(sg: &SubgraphOfInterest, policy: &SamplingPolicy) -> SubgraphOfInterest {
    let ratio = match policy.method {
        SamplingMethod::RandomNode { ratio } => ratio,
        _ => return sg.clone(),
    };
    let mut rng = sampling_rng(policy, sg.query_vertex);
    let members: BTreeMap<VertexId, u64> = sg
        .members
        .iter()
        .filter(|(&v, _)| v == sg.query_vertex || rng.gen::<f64>() < ratio)
        .map(|(&v, &w)| (v, w))
        .collect();
    SubgraphOfInterest::new(sg.query_vertex, members)
}

/// Random walk from the query vertex restricted to the subgraph's members,
/// stopped once `target_size` distinct vertices are visited. A trapped walk
/// restarts from the query vertex; the total step budget is 10x the target,
/// after which the visited set is returned with `truncated = true`.
pub fn sample_random_walk(
    sg: &SubgraphOfInterest,
    graph: &PropertyGraph,
    policy: &SamplingPolicy,
) -> (SubgraphOfInterest, bool) {
    let target = match policy.method {
        SamplingMethod::RandomWalk { target_size, target_ratio } => target_size
            .or_else(|| target_ratio.map(|r| ((sg.len() as f64 * r).ceil() as usize).max(1)))
            .unwrap_or(sg.len()),
        _ => return (sg.clone(), false),
    };
    let target = target.min(sg.len());
    let mut rng = sampling_rng(policy, sg.query_vertex);
    let mut visited: HashSet<VertexId> = HashSet::new();
    visited.insert(sg.query_vertex);
    let mut current = sg.query_vertex;
    let budget = 10usize.saturating_mul(target.max(1));
    let mut steps = 0;
    while visited.len() < target && steps < budget {
        steps += 1;
        let mut eligible: Vec<VertexId> = graph
            .neighbors(current)
            .iter()
            .chain(if graph.is_directed() { graph.in_neighbors(current) } else { &[] })
            .copied()
            .filter(|n| sg.contains(*n))
            .collect();
        eligible.sort_unstable();
        eligible.dedup();
        if eligible.is_empty() {
            current = sg.query_vertex;
            continue;
        }
        current = eligible[rng.gen_range(0..eligible.len())];
        visited.insert(current);
    }
    let truncated = visited.len() < target;
    let members: BTreeMap<VertexId, u64> =
        sg.members.iter().filter(|(v, _)| visited.contains(v)).map(|(&v, &w)| (v, w)).collect();
    (SubgraphOfInterest::new(sg.query_vertex, members), truncated)
}

/// Applies the policy's method to one oversized subgraph.
pub fn apply_sampling(
    sg: &SubgraphOfInterest,
    graph: &PropertyGraph,
    policy: &SamplingPolicy,
) -> Result<SubgraphOfInterest> {
    match policy.method {
        SamplingMethod::None => Ok(sg.clone()),
        SamplingMethod::RandomNode { ratio } => {
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(Error::Config(format!("sampling ratio {ratio} outside (0, 1]")));
            }
            Ok(sample_random_node(sg, policy))
        }
        SamplingMethod::RandomWalk { .. } => Ok(sample_random_walk(sg, graph, policy).0),
    }
}
