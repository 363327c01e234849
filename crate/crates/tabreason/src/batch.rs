//! Parallel batch inference over a bounded pool of scoped threads.
//!
//! Workers claim instance indices from a shared counter and keep their
//! results in private buffers, which are merged and put back in input order
//! at the end. Each instance's calls stay on one worker and are issued in
//! order, so with a keyed replay backend the result does not depend on the
//! thread count.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use tabreason_core::orchestrator::run_instance_with;
use tabreason_core::prompt::PromptTemplates;
use tabreason_core::table::truncate_to_budget;
use tabreason_core::{Backend, Instance, Outcome, OutcomeStatus, RunConfig, Trace};

/// Per-instance results in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub results: Vec<(Outcome, Trace)>,
}

impl BatchRun {
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.results.iter().map(|(o, _)| o.clone()).collect()
    }

    pub fn traces(&self) -> Vec<Trace> {
        self.results.iter().map(|(_, t)| t.clone()).collect()
    }

    /// Instances whose run did not finish with status ok.
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|(o, _)| o.status != OutcomeStatus::Ok).count()
    }

    /// Mean API calls per instance; 0 for an empty batch.
    pub fn mean_api_calls(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        let total: u64 = self.results.iter().map(|(o, _)| u64::from(o.api_calls)).sum();
        total as f64 / self.results.len() as f64
    }
}

/// `instance` with its table cut to the longest row prefix that fits
/// `budget`. A budget too small even for the header leaves the table
/// unchanged rather than dropping the instance.
pub fn fit_to_budget(instance: &Instance, budget: usize) -> Instance {
    let mut fitted = instance.clone();
    if let Ok(table) = truncate_to_budget(&instance.table, budget) {
        fitted.table = table;
    }
    fitted
}

/// [`run_batch_with`] using the built-in templates.
pub fn run_batch(instances: &[Instance], config: &RunConfig, backend: &dyn Backend, parallelism: NonZeroUsize) -> BatchRun {
    run_batch_with(instances, config, backend, parallelism, &PromptTemplates::builtin())
}

/// Runs every instance. Failures are recorded in the instance's outcome and
/// never stop the batch.
pub fn run_batch_with(
    instances: &[Instance],
    config: &RunConfig,
    backend: &dyn Backend,
    parallelism: NonZeroUsize,
    templates: &PromptTemplates,
) -> BatchRun {
    let next = AtomicUsize::new(0);
    let workers = parallelism.get().min(instances.len()).max(1);
    let worker = || {
        let mut local = Vec::new();
        loop {
            let i = next.fetch_add(1, Ordering::Relaxed);
            let Some(instance) = instances.get(i) else { break };
            let fitted = fit_to_budget(instance, config.table_token_budget);
            local.push((i, run_instance_with(&fitted, config, backend, templates)));
        }
        local
    };
    let mut merged: Vec<(usize, (Outcome, Trace))> = if workers == 1 {
        worker()
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = (0..workers).map(|_| scope.spawn(worker)).collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap_or_else(|panic| std::panic::resume_unwind(panic)))
                .collect()
        })
    };
    merged.sort_by_key(|(i, _)| *i);
    BatchRun { results: merged.into_iter().map(|(_, r)| r).collect() }
}
