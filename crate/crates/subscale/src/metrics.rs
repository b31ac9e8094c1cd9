//! The measurement harness: computational effort in node-seconds, peak
//! memory, wall-clock time, per-phase breakdown, and per-bin distribution
//! data, plus the multi-heuristic packing comparison table.
//!
//! "Node-seconds" sums the busy time of each emulated partition as if it
//! ran on its own node; partitions are executed sequentially here, so the
//! per-partition clocks never overlap and the sum is exact. Memory figures
//! are analytic: the weight model already prices vertices in bytes, and
//! bitmaps report their own footprint formulas.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{execute, EngineConfig, ExecutionOutcome, SubgraphView};
use crate::error::{Error, Result};
use crate::extraction::ExtractionQuery;
use crate::graph::{PropertyGraph, VertexId};
use crate::packing::{Heuristic, PackingConfig, PackingSolution};
use crate::pipeline::{run_centralized, run_distributed};

/// Wall-clock seconds spent in each pipeline phase.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PhaseBreakdown {
    /// Graph ingestion, if the caller timed it.
    pub load_secs: f64,
    /// Extraction plus packing.
    pub gep_secs: f64,
    /// Partition materialization (the emulated shuffle).
    pub shuffle_secs: f64,
    /// User-program execution over all partitions.
    pub execute_secs: f64,
}

/// Five-number-free summary of a sample: count, min, median, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl DistributionStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return DistributionStats { count: 0, min: 0.0, median: 0.0, max: 0.0 };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        DistributionStats { count: n, min: sorted[0], median, max: sorted[n - 1] }
    }
}

/// One finished pipeline run, measured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// Σ over emulated partitions of their busy seconds.
    pub ce_node_secs: f64,
    /// Resident partition bytes plus the widest concurrent bitmap
    /// footprint, both analytic.
    pub peak_memory_bytes: u64,
    /// Analytic resident size of all partitions (the weight model prices
    /// vertices in bytes).
    pub resident_partition_bytes: u64,
    /// Largest per-partition bitmap footprint observed.
    pub peak_bitmap_bytes: u64,
    /// End-to-end wall clock.
    pub elapsed_secs: f64,
    pub phases: PhaseBreakdown,
    pub bin_count: usize,
    /// Box-plot data: subgraphs per bin.
    pub subgraphs_per_bin: DistributionStats,
    /// Box-plot data: per-bin execution milliseconds.
    pub bin_runtime_ms: DistributionStats,
    pub replication_factor: f64,
    pub total_ghosts: usize,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat two-column TSV (`metric<TAB>value`) for quick inspection.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('\t');
            out.push_str(&v);
            out.push('\n');
        };
        push("ce_node_secs", format!("{:.6}", self.ce_node_secs));
        push("peak_memory_bytes", self.peak_memory_bytes.to_string());
        push("resident_partition_bytes", self.resident_partition_bytes.to_string());
        push("peak_bitmap_bytes", self.peak_bitmap_bytes.to_string());
        push("elapsed_secs", format!("{:.6}", self.elapsed_secs));
        push("load_secs", format!("{:.6}", self.phases.load_secs));
        push("gep_secs", format!("{:.6}", self.phases.gep_secs));
        push("shuffle_secs", format!("{:.6}", self.phases.shuffle_secs));
        push("execute_secs", format!("{:.6}", self.phases.execute_secs));
        push("bin_count", self.bin_count.to_string());
        push("subgraphs_per_bin_min", format!("{}", self.subgraphs_per_bin.min));
        push("subgraphs_per_bin_median", format!("{}", self.subgraphs_per_bin.median));
        push("subgraphs_per_bin_max", format!("{}", self.subgraphs_per_bin.max));
        push("bin_runtime_ms_min", format!("{:.3}", self.bin_runtime_ms.min));
        push("bin_runtime_ms_median", format!("{:.3}", self.bin_runtime_ms.median));
        push("bin_runtime_ms_max", format!("{:.3}", self.bin_runtime_ms.max));
        push("replication_factor", format!("{:.4}", self.replication_factor));
        push("total_ghosts", self.total_ghosts.to_string());
        out
    }
}

/// What to measure: one graph, one query, one packing config, one engine
/// config. `shards` switches to the distributed pipeline.
pub struct MeasureSpec<'a> {
    pub graph: &'a PropertyGraph,
    pub query: &'a ExtractionQuery,
    pub packing: &'a PackingConfig,
    pub engine: &'a EngineConfig,
    pub shards: Option<usize>,
    /// Ingestion time measured by the caller, folded into the breakdown.
    pub load_secs: f64,
}

/// Runs the full pipeline once, executing `program` over every subgraph,
/// and returns the measured report plus the merged per-query-vertex
/// results and the solution the run was built on.
pub fn measure_run<O, F>(
    spec: &MeasureSpec<'_>,
    program: F,
) -> Result<(RunReport, BTreeMap<VertexId, O>, PackingSolution)>
where
    O: Send,
    F: Fn(&SubgraphView<'_>) -> Result<O> + Sync,
{
    let run_start = Instant::now();

    let gep_start = Instant::now();
    let solution = match spec.shards {
        Some(shards) => run_distributed(spec.graph, spec.query, spec.packing, shards)?,
        None => run_centralized(spec.graph, spec.query, spec.packing, None)?,
    };
    let gep_secs = gep_start.elapsed().as_secs_f64();

    let shuffle_start = Instant::now();
    let partitions =
        crate::engine::materialize_partitions(spec.graph, &solution, spec.query)?;
    let shuffle_secs = shuffle_start.elapsed().as_secs_f64();

    // one emulated node per partition, run sequentially so the busy clocks
    // never overlap
    let mut results = BTreeMap::new();
    let mut bin_runtimes_ms = Vec::with_capacity(partitions.len());
    let mut ce_node_secs = 0.0;
    let mut peak_bitmap_bytes = 0usize;
    for part in &partitions {
        let out: ExecutionOutcome<O> = execute(part, &program, spec.engine)?;
        if let Some((qv, err)) = out.errors.into_iter().next() {
            return Err(Error::ContractViolation(format!(
                "program failed on query vertex {qv}: {err}"
            )));
        }
        ce_node_secs += out.elapsed.as_secs_f64();
        bin_runtimes_ms.push(out.elapsed.as_secs_f64() * 1000.0);
        peak_bitmap_bytes = peak_bitmap_bytes.max(out.peak_bitmap_bytes);
        results.extend(out.results);
    }
    let execute_secs: f64 = ce_node_secs;

    let resident_partition_bytes: u64 =
        solution.bins.iter().map(|b| b.used_capacity).sum();
    let subgraph_counts: Vec<f64> =
        solution.bins.iter().map(|b| b.subgraphs.len() as f64).collect();

    let report = RunReport {
        ce_node_secs,
        peak_memory_bytes: resident_partition_bytes + peak_bitmap_bytes as u64,
        resident_partition_bytes,
        peak_bitmap_bytes: peak_bitmap_bytes as u64,
        elapsed_secs: run_start.elapsed().as_secs_f64(),
        phases: PhaseBreakdown {
            load_secs: spec.load_secs,
            gep_secs,
            shuffle_secs,
            execute_secs,
        },
        bin_count: solution.bin_count(),
        subgraphs_per_bin: DistributionStats::from_values(&subgraph_counts),
        bin_runtime_ms: DistributionStats::from_values(&bin_runtimes_ms),
        replication_factor: solution.replication_factor(),
        total_ghosts: solution.total_ghosts(),
    };
    Ok((report, results, solution))
}

/// One row of the packing comparison: a (heuristic, seed) pair measured
/// end to end with local clustering coefficient as the probe workload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub heuristic: Heuristic,
    pub seed: u64,
    pub bins: usize,
    pub pack_ms: f64,
    /// Analytic packed size: Σ bin used capacities.
    pub pack_memory_bytes: u64,
    pub ce_node_secs: f64,
    pub elapsed_secs: f64,
}

/// The full comparison table with per-heuristic median bin counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    /// heuristic name -> median bins over all seeds.
    pub median_bins: BTreeMap<String, f64>,
}

impl Comparison {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "heuristic\tseed\tbins\tpack_ms\tpack_memory_bytes\tce_node_secs\telapsed_secs\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.3}\t{}\t{:.6}\t{:.6}\n",
                r.heuristic, r.seed, r.bins, r.pack_ms, r.pack_memory_bytes,
                r.ce_node_secs, r.elapsed_secs
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

/// Runs every heuristic against every seeded fixture instance. `fixture`
/// maps a seed to a graph; each (heuristic, seed) pair is packed and then
/// executed (local clustering coefficient) for its CE and elapsed columns.
pub fn compare_packing<G>(
    fixture: G,
    query: &ExtractionQuery,
    base: &PackingConfig,
    heuristics: &[Heuristic],
    seeds: &[u64],
) -> Result<Comparison>
where
    G: Fn(u64) -> PropertyGraph,
{
    if heuristics.len() < 2 {
        return Err(Error::Config(format!(
            "comparison needs at least 2 heuristics, got {}",
            heuristics.len()
        )));
    }
    let engine = EngineConfig::default();
    let mut rows = Vec::new();
    for &seed in seeds {
        let graph = fixture(seed);
        for &heuristic in heuristics {
            let cfg = base.clone().with_heuristic(heuristic);
            let pack_start = Instant::now();
            let solution = run_centralized(&graph, query, &cfg, None)?;
            let pack_ms = pack_start.elapsed().as_secs_f64() * 1000.0;
            let pack_memory_bytes = solution.bins.iter().map(|b| b.used_capacity).sum();
            let bins = solution.bin_count();

            let spec = MeasureSpec {
                graph: &graph,
                query,
                packing: &cfg,
                engine: &engine,
                shards: None,
                load_secs: 0.0,
            };
            let (report, _, _) =
                measure_run(&spec, |view| Ok(crate::apps::lcc(view)))?;
            rows.push(CompareRow {
                heuristic,
                seed,
                bins,
                pack_ms,
                pack_memory_bytes,
                ce_node_secs: report.ce_node_secs,
                elapsed_secs: report.elapsed_secs,
            });
        }
    }
    let mut median_bins = BTreeMap::new();
    for &heuristic in heuristics {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.heuristic == heuristic)
            .map(|r| r.bins as f64)
            .collect();
        median_bins
            .insert(heuristic.to_string(), DistributionStats::from_values(&values).median);
    }
    Ok(Comparison { rows, median_bins })
}
