//! Property graph storage and ingestion.
//!
//! The graph is immutable once ingestion (loading plus attribute
//! attachment) finishes, and is safe to share read-only across any number
//! of worker threads. Adjacency lists are kept sorted by neighbor id so
//! that traversal order, and everything derived from it, is deterministic.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External vertex identifier, stable across the whole pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Typed scalar attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl AttributeValue {
    /// Byte size under the documented encoding table: scalars cost
    /// `scalar_size` bytes each, strings their UTF-8 length.
    pub fn encoded_size(&self, cfg: &WeightConfig) -> u64 {
        match self {
            AttributeValue::Str(s) => s.len() as u64,
            _ => cfg.scalar_size,
        }
    }

    fn parse(text: &str) -> AttributeValue {
        if let Ok(i) = text.parse::<i64>() {
            AttributeValue::Int(i)
        } else if let Ok(x) = text.parse::<f64>() {
            AttributeValue::Float(x)
        } else if text == "true" {
            AttributeValue::Bool(true)
        } else if text == "false" {
            AttributeValue::Bool(false)
        } else {
            AttributeValue::Str(text.to_string())
        }
    }
}

/// Attribute map of one vertex or edge. Ordered so serialization and
/// iteration are deterministic.
pub type AttributeRecord = BTreeMap<String, AttributeValue>;

/// Constants of the additive vertex-weight estimator. The packing phase only
/// needs a consistent estimator, so these are configuration with documented
/// defaults rather than measured values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Fixed per-vertex overhead in bytes.
    pub vertex_overhead: u64,
    /// Overhead per retained incident edge.
    pub edge_overhead: u64,
    /// Encoded size of a non-string scalar attribute value.
    pub scalar_size: u64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { vertex_overhead: 16, edge_overhead: 8, scalar_size: 8 }
    }
}

/// Attribute names retained by an extraction query (A_V and A_E).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Projection {
    #[serde(default)]
    pub vertex_attrs: Vec<String>,
    #[serde(default)]
    pub edge_attrs: Vec<String>,
}

/// Target of an attribute attachment file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeTarget {
    Vertex,
    Edge,
}

/// Counters for tolerated ingestion anomalies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub duplicate_edges: u64,
    pub skipped_attribute_rows: u64,
    pub overwritten_attributes: u64,
}

/// Immutable adjacency-list graph with typed vertex/edge attributes.
///
/// Directed graphs store both out- and in-adjacency so that k-hop expansion
/// and feed-forward-loop counting can traverse both directions. Undirected
/// edges are stored once per endpoint in `out_adj` (symmetric lists) and
/// once in `edge_attrs` under the canonical (min, max) key.
#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    directed: bool,
    out_adj: BTreeMap<VertexId, Vec<VertexId>>,
    in_adj: BTreeMap<VertexId, Vec<VertexId>>,
    vertex_attrs: HashMap<VertexId, AttributeRecord>,
    edge_attrs: HashMap<(VertexId, VertexId), AttributeRecord>,
    stats: IngestStats,
}

impl PropertyGraph {
    pub fn new(directed: bool) -> Self {
        PropertyGraph { directed, ..Default::default() }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Canonical key of an edge: ordered pair for directed graphs,
    /// (min, max) for undirected.
    pub fn edge_key(&self, u: VertexId, v: VertexId) -> (VertexId, VertexId) {
        if self.directed || u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    /// Registers `v` as an isolated vertex if not already present.
    pub fn ensure_vertex(&mut self, v: VertexId) {
        self.add_vertex(v);
    }

    fn add_vertex(&mut self, v: VertexId) {
        self.out_adj.entry(v).or_default();
        if self.directed {
            self.in_adj.entry(v).or_default();
        }
    }

    fn insert_sorted(list: &mut Vec<VertexId>, v: VertexId) -> bool {
        match list.binary_search(&v) {
            Ok(_) => false,
            Err(pos) => {
                list.insert(pos, v);
                true
            }
        }
    }

    /// Adds an edge, deduplicating silently with a counter. Self-loops are
    /// stored once.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId, attrs: AttributeRecord) {
        self.add_vertex(u);
        self.add_vertex(v);
        let fresh = Self::insert_sorted(self.out_adj.get_mut(&u).unwrap(), v);
        if !fresh {
            self.stats.duplicate_edges += 1;
            return;
        }
        if self.directed {
            Self::insert_sorted(self.in_adj.get_mut(&v).unwrap(), u);
        } else if u != v {
            Self::insert_sorted(self.out_adj.get_mut(&v).unwrap(), u);
        }
        let key = self.edge_key(u, v);
        if !attrs.is_empty() {
            self.edge_attrs.insert(key, attrs);
        }
    }

    pub fn from_edges(edges: &[(u64, u64)], directed: bool) -> Self {
        let mut g = PropertyGraph::new(directed);
        for &(u, v) in edges {
            g.add_edge(VertexId(u), VertexId(v), AttributeRecord::new());
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = self.out_adj.values().map(|l| l.len()).sum();
        if self.directed {
            total
        } else {
            let loops = self.out_adj.iter().filter(|(v, l)| l.binary_search(v).is_ok()).count();
            (total + loops) / 2
        }
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.out_adj.contains_key(&v)
    }

    /// All vertices in ascending id order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.out_adj.keys().copied()
    }

    /// Neighbors of `v` in ascending order. For directed graphs these are
    /// out-neighbors.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        self.out_adj.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_neighbors(&self, v: VertexId) -> &[VertexId] {
        if self.directed {
            self.in_adj.get(&v).map(Vec::as_slice).unwrap_or(&[])
        } else {
            self.neighbors(v)
        }
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.out_adj.get(&u).is_some_and(|l| l.binary_search(&v).is_ok())
    }

    /// Incident edge count: undirected degree, or out-degree plus in-degree
    /// for directed graphs.
    pub fn degree(&self, v: VertexId) -> usize {
        if self.directed {
            self.neighbors(v).len() + self.in_neighbors(v).len()
        } else {
            self.neighbors(v).len()
        }
    }

    /// Edges under their canonical keys, each once, in ascending order.
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        for (&u, list) in &self.out_adj {
            for &v in list {
                if self.directed || u <= v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn vertex_attrs(&self, v: VertexId) -> Option<&AttributeRecord> {
        self.vertex_attrs.get(&v)
    }

    pub fn vertex_attr(&self, v: VertexId, name: &str) -> Option<&AttributeValue> {
        self.vertex_attrs.get(&v).and_then(|r| r.get(name))
    }

    pub fn edge_attrs_of(&self, u: VertexId, v: VertexId) -> Option<&AttributeRecord> {
        self.edge_attrs.get(&self.edge_key(u, v))
    }

    pub fn edge_attr(&self, u: VertexId, v: VertexId, name: &str) -> Option<&AttributeValue> {
        self.edge_attrs_of(u, v).and_then(|r| r.get(name))
    }

    /// True iff any vertex carries the named attribute.
    pub fn vertex_schema_contains(&self, name: &str) -> bool {
        self.vertex_attrs.values().any(|r| r.contains_key(name))
    }

    /// weight(v) = vertex overhead + edge overhead x retained degree
    ///           + encoded size of projected vertex attributes.
    ///
    /// `retained_degree` is the number of incident edges surviving the
    /// query's filters; callers without filters pass the full degree.
    pub fn weight_with_degree(
        &self,
        v: VertexId,
        projection: &Projection,
        cfg: &WeightConfig,
        retained_degree: usize,
    ) -> u64 {
        let mut w = cfg.vertex_overhead + cfg.edge_overhead * retained_degree as u64;
        if let Some(attrs) = self.vertex_attrs.get(&v) {
            for name in &projection.vertex_attrs {
                if let Some(val) = attrs.get(name) {
                    w += val.encoded_size(cfg);
                }
            }
        }
        w
    }

    /// Weight using the vertex's full incident degree.
    pub fn vertex_weight(&self, v: VertexId, projection: &Projection, cfg: &WeightConfig) -> u64 {
        self.weight_with_degree(v, projection, cfg, self.degree(v))
    }

    /// Structural and attribute equality under sorted-adjacency comparison,
    /// ignoring ingestion counters.
    pub fn canonical_eq(&self, other: &PropertyGraph) -> bool {
        self.directed == other.directed
            && self.out_adj == other.out_adj
            && self.in_adj == other.in_adj
            && self.vertex_attrs == other.vertex_attrs
            && self.edge_attrs == other.edge_attrs
    }

    /// Attaches attributes from a TSV file: `id<TAB>key=value<TAB>...`,
    /// where edge ids are written `src,dst`. Unknown ids either fail
    /// (`strict`) or are skipped with a counter.
    pub fn attach_attributes(
        &mut self,
        path: impl AsRef<Path>,
        target: AttributeTarget,
        strict: bool,
    ) -> Result<()> {
        let path_str = path.as_ref().display().to_string();
        let file = File::open(path.as_ref())?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split('\t');
            let id = fields.next().unwrap();
            let record = match target {
                AttributeTarget::Vertex => {
                    let v = parse_vertex(id, &path_str, line_no)?;
                    if !self.contains_vertex(v) {
                        if strict {
                            return Err(Error::UnknownElement { id: id.to_string() });
                        }
                        self.stats.skipped_attribute_rows += 1;
                        continue;
                    }
                    self.vertex_attrs.entry(v).or_default()
                }
                AttributeTarget::Edge => {
                    let (a, b) = id.split_once(',').ok_or_else(|| Error::Parse {
                        path: path_str.clone(),
                        line: line_no,
                        msg: format!("edge id must be 'src,dst', got '{id}'"),
                    })?;
                    let u = parse_vertex(a, &path_str, line_no)?;
                    let v = parse_vertex(b, &path_str, line_no)?;
                    if !self.has_edge(u, v) {
                        if strict {
                            return Err(Error::UnknownElement { id: id.to_string() });
                        }
                        self.stats.skipped_attribute_rows += 1;
                        continue;
                    }
                    let key = self.edge_key(u, v);
                    self.edge_attrs.entry(key).or_default()
                }
            };
            for field in fields {
                let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
                    path: path_str.clone(),
                    line: line_no,
                    msg: format!("expected key=value, got '{field}'"),
                })?;
                // Last value wins on re-assignment.
                if record.insert(key.to_string(), AttributeValue::parse(value)).is_some() {
                    self.stats.overwritten_attributes += 1;
                }
            }
        }
        Ok(())
    }

    /// Sets one vertex attribute. Ingestion-time helper for fixtures.
    pub fn set_vertex_attr(&mut self, v: VertexId, name: &str, value: AttributeValue) {
        self.add_vertex(v);
        self.vertex_attrs.entry(v).or_default().insert(name.to_string(), value);
    }
}

fn parse_vertex(text: &str, path: &str, line: usize) -> Result<VertexId> {
    text.trim().parse::<u64>().map(VertexId).map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("invalid vertex id '{text}'"),
    })
}

/// Loads a whitespace-separated edge list: `src dst [w]`, `#` comments.
/// The optional third column is stored as edge attribute `weight`.
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<PropertyGraph> {
    let path_str = path.as_ref().display().to_string();
    let file = File::open(path.as_ref())?;
    let mut g = PropertyGraph::new(directed);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (src, dst) = match (parts.next(), parts.next()) {
            (Some(s), Some(d)) => (s, d),
            _ => {
                return Err(Error::Parse {
                    path: path_str,
                    line: line_no,
                    msg: format!("expected 'src dst [w]', got '{trimmed}'"),
                })
            }
        };
        let u = parse_vertex(src, &path_str, line_no)?;
        let v = parse_vertex(dst, &path_str, line_no)?;
        let mut attrs = AttributeRecord::new();
        if let Some(w) = parts.next() {
            attrs.insert("weight".to_string(), AttributeValue::parse(w));
        }
        if parts.next().is_some() {
            return Err(Error::Parse {
                path: path_str,
                line: line_no,
                msg: format!("trailing fields in '{trimmed}'"),
            });
        }
        g.add_edge(u, v, attrs);
    }
    Ok(g)
}

/// Loads an undirected adjacency list: `v: n1 n2 ...`. Every neighbor must
/// also appear as a head vertex somewhere in the file.
pub fn load_adjacency_list(path: impl AsRef<Path>) -> Result<PropertyGraph> {
    let path_str = path.as_ref().display().to_string();
    let file = File::open(path.as_ref())?;
    let mut g = PropertyGraph::new(false);
    let mut declared = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (head, rest) = trimmed.split_once(':').ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            msg: format!("expected 'v: n1 n2 ...', got '{trimmed}'"),
        })?;
        let v = parse_vertex(head, &path_str, line_no)?;
        g.add_vertex(v);
        declared.push(v);
        for token in rest.split_whitespace() {
            let n = parse_vertex(token, &path_str, line_no)?;
            // Symmetric pairs appear twice; add_edge dedups, so don't let
            // the mirror entry inflate the duplicate counter.
            if !g.has_edge(v, n) {
                g.add_edge(v, n, AttributeRecord::new());
            }
        }
    }
    declared.sort_unstable();
    for v in g.vertices().collect::<Vec<_>>() {
        if declared.binary_search(&v).is_err() {
            return Err(Error::UnresolvedReference { vertex: v.0 });
        }
    }
    Ok(g)
}
