//! Allocation-only core of the plan-then-reason pipeline.
//!
//! Everything here is pure: tables and their prompt serialization, a small
//! SQL dialect evaluated over a single in-memory table, segmentation of model
//! generations, prompt templates, the per-instance orchestration loop (driven
//! through the [`backend::Backend`] trait), scoring, and dataset filtering.
//! IO, network backends, and thread pools live in the `tabreason` crate.
#![cfg_attr(not(test), no_std)]
#![warn(rust_2018_idioms, unused_qualifications)]

extern crate alloc;

pub mod backend;
pub mod dataset;
pub mod eval;
pub mod orchestrator;
pub mod prompt;
pub mod response;
pub mod sql;
pub mod table;
pub mod task;
mod text;

pub use backend::{Backend, BackendError, FinishReason, GenerationRequest, GenerationResult};
pub use orchestrator::{run_instance, Outcome, OutcomeStatus, RunConfig, Trace};
pub use response::{extract_final_answer, segment_response, FinalAnswer, ResponseSegments};
pub use sql::{execute, format_result, parse_query, ResultTable, SqlError, SqlQuery};
pub use table::{Cell, Instance, SentenceContext, Table, TableError};
pub use task::{GoldAnswer, Label, LabelSet, TaskKind};
