//! Seeded synthetic graph generators for fixtures and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{AttributeValue, PropertyGraph, VertexId};

/// Barabási–Albert preferential attachment: `n` vertices, each newcomer
/// attaching `m` edges biased toward high-degree targets. Undirected.
pub fn barabasi_albert(n: u64, m: usize, seed: u64) -> PropertyGraph {
    let mut g = PropertyGraph::new(false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 0 {
        return g;
    }
    let m = m.max(1);
    // endpoint multiset: vertices appear once per incident edge, which
    // makes uniform draws degree-proportional
    let mut endpoints: Vec<u64> = Vec::new();
    let core = (m as u64 + 1).min(n);
    for u in 0..core {
        g.ensure_vertex(VertexId(u));
        for v in 0..u {
            g.add_edge(VertexId(u), VertexId(v), Default::default());
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    for u in core..n {
        let mut targets = std::collections::BTreeSet::new();
        let mut guard = 0;
        while targets.len() < m && guard < 50 * m {
            guard += 1;
            let t = endpoints[rng.gen_range(0..endpoints.len())];
            if t != u {
                targets.insert(t);
            }
        }
        for &t in &targets {
            g.add_edge(VertexId(u), VertexId(t), Default::default());
            endpoints.push(u);
            endpoints.push(t);
        }
    }
    g
}

/// Erdős–Rényi G(n, p), undirected; isolated vertices are kept.
pub fn erdos_renyi(n: u64, p: f64, seed: u64) -> PropertyGraph {
    let mut g = PropertyGraph::new(false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..n {
        g.ensure_vertex(VertexId(v));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                g.add_edge(VertexId(u), VertexId(v), Default::default());
            }
        }
    }
    g
}

/// Directed G(n, p) over ordered pairs; used for motif fixtures.
pub fn erdos_renyi_directed(n: u64, p: f64, seed: u64) -> PropertyGraph {
    let mut g = PropertyGraph::new(true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..n {
        g.ensure_vertex(VertexId(v));
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen::<f64>() < p {
                g.add_edge(VertexId(u), VertexId(v), Default::default());
            }
        }
    }
    g
}

/// Attaches a uniform random integer attribute in `lo..hi` to every vertex.
pub fn attach_random_int(graph: &mut PropertyGraph, name: &str, lo: i64, hi: i64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<VertexId> = graph.vertices().collect();
    for v in vertices {
        let value = rng.gen_range(lo..hi);
        graph.set_vertex_attr(v, name, AttributeValue::Int(value));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ba_is_connected_and_sized() {
        let g = barabasi_albert(200, 2, 1);
        assert_eq!(g.vertex_count(), 200);
        // every non-core vertex attached at least one edge
        for v in g.vertices() {
            assert!(g.degree(v) >= 1);
        }
    }

    #[test]
    fn ba_deterministic() {
        let a = barabasi_albert(100, 3, 9);
        let b = barabasi_albert(100, 3, 9);
        assert!(a.canonical_eq(&b));
    }

    #[test]
    fn ba_degree_skew() {
        // preferential attachment: max degree well above the mean
        let g = barabasi_albert(500, 2, 4);
        let max_deg = g.vertices().map(|v| g.degree(v)).max().unwrap();
        let mean = 2.0 * g.edge_count() as f64 / g.vertex_count() as f64;
        assert!(max_deg as f64 > 4.0 * mean, "max {max_deg}, mean {mean}");
    }

    #[test]
    fn er_edge_count_near_expectation() {
        let n = 200u64;
        let p = 0.1;
        let g = erdos_renyi(n, p, 7);
        let expect = p * (n * (n - 1) / 2) as f64;
        let got = g.edge_count() as f64;
        // 5 sigma of Binomial(19900, 0.1)
        let sigma = (expect * (1.0 - p)).sqrt();
        assert!((got - expect).abs() < 5.0 * sigma, "edges {got} vs {expect}");
        assert_eq!(g.vertex_count(), n as usize);
    }

    #[test]
    fn er_keeps_isolated_vertices() {
        let g = erdos_renyi(50, 0.0, 3);
        assert_eq!(g.vertex_count(), 50);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn directed_generator_is_directed() {
        let g = erdos_renyi_directed(30, 0.2, 11);
        assert!(g.is_directed());
        assert_eq!(g.vertex_count(), 30);
    }

    #[test]
    fn random_attr_covers_all_vertices() {
        let mut g = erdos_renyi(40, 0.1, 2);
        attach_random_int(&mut g, "age", 18, 80, 5);
        for v in g.vertices() {
            match g.vertex_attr(v, "age") {
                Some(AttributeValue::Int(a)) => assert!((18..80).contains(a)),
                other => panic!("missing age on {v}: {other:?}"),
            }
        }
    }
}
