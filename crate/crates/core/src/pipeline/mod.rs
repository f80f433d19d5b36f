//! Batch orchestration over manifests: filtering, metrics, reporting and the
//! synthetic corpus used by the tests.
//!
//! Pairs are independent work items. They are evaluated on a bounded rayon
//! pool and collected back in input order before anything is serialized, so
//! output files do not depend on the worker count.

mod corpus;
mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::corpus::{
    gen_synthetic_corpus, read_labels, ClassCounts, CorpusLabel, CorpusSpec, DefectClass,
    GeneratedCorpus, LABELS_FILE, MANIFEST_FILE,
};
pub use self::report::{report, ManualPassRate, MetricsSummary, Report};

use crate::error::{ForgeError, Result};
use crate::filters::run_all_filters;
use crate::metrics::{clip_i, embedding_path_for, l2m, read_embedding, ssim, MetricsRow};
use crate::model::{
    load_image, load_mask, manifest_base_dir, read_manifest, write_manifest, FilterConfig,
    PairRecord, PairResources,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub workers: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            workers: default_workers(),
            seed: 0,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(ForgeError::Config("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ForgeError::Config(format!("cannot start worker pool: {e}")))
}

/// Maps `f` over `items` on `workers` threads, preserving input order.
fn ordered_map<I, O, F>(items: Vec<I>, workers: usize, f: F) -> Result<Vec<O>>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    let pool = worker_pool(workers)?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

/// Annotates one record with verdicts, or with an error message when its
/// resources cannot be loaded.
pub fn filter_record(mut record: PairRecord, base_dir: &Path, config: &FilterConfig) -> PairRecord {
    record.verdicts = None;
    record.passed = None;
    record.error = None;
    let outcome = PairResources::load(&record, base_dir)
        .map_err(|e| e.for_pair(&record.id))
        .and_then(|res| run_all_filters(&record, &res, config));
    match outcome {
        Ok(verdicts) => {
            record.passed = Some(verdicts.iter().all(|v| v.passed));
            record.verdicts = Some(verdicts);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

pub fn filter_records(
    records: Vec<PairRecord>,
    base_dir: &Path,
    config: &FilterConfig,
    workers: usize,
) -> Result<Vec<PairRecord>> {
    config.validate()?;
    ordered_map(records, workers, |r| filter_record(r, base_dir, config))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRunSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

impl FilterRunSummary {
    pub fn of(records: &[PairRecord]) -> Self {
        let mut s = Self {
            total: records.len(),
            ..Self::default()
        };
        for r in records {
            match (r.error.is_some(), r.passed) {
                (true, _) => s.errors += 1,
                (false, Some(true)) => s.passed += 1,
                _ => s.failed += 1,
            }
        }
        s
    }
}

/// Reads `manifest_in`, filters every pair, and writes all records to `out`
/// and failed ones to `rejected`.
///
/// An unreadable manifest aborts; per-pair load failures are recorded on the
/// pair and counted as errors.
pub fn run_filter_pipeline(
    manifest_in: &Path,
    out: &Path,
    rejected: Option<&Path>,
    config: &PipelineConfig,
) -> Result<FilterRunSummary> {
    let records = read_manifest(manifest_in)?;
    let base_dir = manifest_base_dir(manifest_in);
    let annotated = filter_records(records, &base_dir, &config.filter, config.workers)?;
    write_manifest(out, &annotated)?;
    if let Some(rejected) = rejected {
        write_manifest(
            rejected,
            annotated
                .iter()
                .filter(|r| r.error.is_none() && r.passed == Some(false)),
        )?;
    }
    Ok(FilterRunSummary::of(&annotated))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsOptions {
    pub with_embeddings: bool,
    pub workers: usize,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            with_embeddings: false,
            workers: default_workers(),
        }
    }
}

/// Outcome of measuring one record.
struct Measured {
    record: PairRecord,
    missing_embedding: bool,
}

fn measure_record(mut record: PairRecord, base_dir: &Path, options: &MetricsOptions) -> Measured {
    let mut missing_embedding = false;
    let mut run = || -> Result<MetricsRow> {
        let source = load_image(base_dir.join(&record.source_path))?;
        let generated = load_image(base_dir.join(&record.generated_path))?;
        let face = load_mask(base_dir.join(&record.source_face), source.dims())?;
        let ssim_value = ssim::<f64>(&source, &generated)?;
        let l2m_value = l2m::<f64>(&source, &generated, &face)?;
        let clip_value = if options.with_embeddings {
            let reference = record
                .reference_path
                .as_ref()
                .unwrap_or(&record.source_path);
            let ref_path = embedding_path_for(&base_dir.join(reference));
            let gen_path = embedding_path_for(&base_dir.join(&record.generated_path));
            if ref_path.is_file() && gen_path.is_file() {
                let a = read_embedding(&ref_path)?.cast::<f64>();
                let b = read_embedding(&gen_path)?.cast::<f64>();
                Some(clip_i(&a, &b)?)
            } else {
                missing_embedding = true;
                None
            }
        } else {
            None
        };
        Ok(MetricsRow {
            clip_i: clip_value,
            ssim: ssim_value,
            l2m: l2m_value,
        })
    };
    match run() {
        Ok(row) => record.metrics = Some(row),
        Err(e) => {
            record.metrics = None;
            record.error = Some(e.for_pair(&record.id).to_string());
        }
    }
    Measured {
        record,
        missing_embedding,
    }
}

/// Measures every record; returns annotated records and the aggregate.
pub fn measure_records(
    records: Vec<PairRecord>,
    base_dir: &Path,
    options: &MetricsOptions,
) -> Result<(Vec<PairRecord>, MetricsSummary)> {
    let measured = ordered_map(records, options.workers, |r| {
        measure_record(r, base_dir, options)
    })?;
    let missing = measured.iter().filter(|m| m.missing_embedding).count();
    let records: Vec<PairRecord> = measured.into_iter().map(|m| m.record).collect();
    let mut summary = MetricsSummary::of(&records);
    summary.missing_embeddings = missing;
    Ok((records, summary))
}

pub fn run_metrics(
    manifest_in: &Path,
    out: &Path,
    options: &MetricsOptions,
) -> Result<MetricsSummary> {
    let records = read_manifest(manifest_in)?;
    let base_dir = manifest_base_dir(manifest_in);
    let (records, summary) = measure_records(records, &base_dir, options)?;
    write_manifest(out, &records)?;
    Ok(summary)
}

/// Default sidecar path for rejected records: `out.rejected.jsonl`.
pub fn rejected_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.rejected.jsonl"))
}
