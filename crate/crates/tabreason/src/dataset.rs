//! Teacher-driven dataset building: sample instances, generate candidates
//! through the full pipeline, keep answers consistent with gold, and export
//! prompt/response pairs.

use std::num::NonZeroUsize;
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use tabreason_core::dataset::{candidate_from_trace, consistency_filter, training_pairs, Candidate, Dropped, SegmentSelection, TrainingPair};
use tabreason_core::eval::EvalError;
use tabreason_core::prompt::PromptTemplates;
use tabreason_core::response::Segmenter;
use tabreason_core::{Backend, Instance, RunConfig};

use crate::batch::{fit_to_budget, run_batch_with};
use crate::io::{write_jsonl, IoFailure};

/// A uniform sample of `n` instances (all of them if `n` exceeds the
/// count), kept in input order. The same seed always picks the same set.
pub fn sample_instances(instances: &[Instance], n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, instances.len(), n.min(instances.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| instances[i].clone()).collect()
}

/// One candidate per instance, in input order. A failed generation yields a
/// candidate whose `error` is set.
pub fn generate_candidates(
    instances: &[Instance],
    teacher: &dyn Backend,
    config: &RunConfig,
    parallelism: NonZeroUsize,
    templates: &PromptTemplates,
) -> Vec<Candidate> {
    let run = run_batch_with(instances, config, teacher, parallelism, templates);
    let segmenter = Segmenter::new(config.result_markers.clone());
    run.results
        .iter()
        .zip(instances)
        .map(|((_, trace), inst)| candidate_from_trace(trace, &fit_to_budget(inst, config.table_token_budget), &segmenter))
        .collect()
}

/// Everything one dataset build produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBuild {
    pub candidates: Vec<Candidate>,
    pub kept: Vec<Candidate>,
    pub dropped: Vec<Dropped>,
    pub pairs: Vec<TrainingPair>,
}

impl DatasetBuild {
    pub fn generation_failures(&self) -> usize {
        self.candidates.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Generates, filters, and renders training pairs. Pair prompts use the
/// same budget-truncated tables the teacher saw.
pub fn build_dataset(
    instances: &[Instance],
    teacher: &dyn Backend,
    config: &RunConfig,
    parallelism: NonZeroUsize,
    templates: &PromptTemplates,
    selection: SegmentSelection,
) -> Result<DatasetBuild, EvalError> {
    let candidates = generate_candidates(instances, teacher, config, parallelism, templates);
    let (kept, dropped) = consistency_filter(candidates.clone(), instances)?;
    let fitted: Vec<Instance> = instances.iter().map(|i| fit_to_budget(i, config.table_token_budget)).collect();
    let pairs = training_pairs(&kept, &fitted, selection, templates)?;
    Ok(DatasetBuild { candidates, kept, dropped, pairs })
}

/// Writes one pair per line. Exporting nothing is an error.
pub fn export_jsonl(path: &Path, pairs: &[TrainingPair]) -> Result<(), IoFailure> {
    if pairs.is_empty() {
        return Err(IoFailure::Empty { path: path.to_path_buf() });
    }
    write_jsonl(path, pairs)
}
