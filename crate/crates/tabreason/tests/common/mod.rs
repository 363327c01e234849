//! Fixture loading shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tabreason::io::read_jsonl;
use tabreason::replay::{RecordingBackend, ReplayBackend, ScriptEntry};
use tabreason_core::orchestrator::run_instance;
use tabreason_core::{Instance, RunConfig};

pub const CASES: [&str; 5] = ["wikitab_case", "tabfact_case", "feverous_case", "hybridqa_case", "scitab_case"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn instances() -> Vec<Instance> {
    read_jsonl(&fixtures().join("cases.jsonl")).expect("fixture instances parse")
}

pub fn instance(id: &str) -> Instance {
    instances().into_iter().find(|i| i.id == id).expect("fixture instance exists")
}

pub fn transcript(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("transcripts").join(format!("{name}.txt"))).expect("transcript exists")
}

/// Splits a transcript after the first result-marker line that follows a
/// SQL fence: the first part ends with the marker line (no newline), the
/// second is everything after it. Transcripts without SQL stay whole.
pub fn split_at_marker(text: &str) -> Vec<String> {
    let Some(sql) = text.find("```sql") else { return vec![text.to_string()] };
    let mut offset = sql;
    for line in text[sql..].split_inclusive('\n') {
        let end = offset + line.trim_end_matches('\n').len();
        if line.to_lowercase().contains("result:") {
            let rest = text.get(end + 1..).unwrap_or("");
            return vec![text[..end].to_string(), rest.to_string()];
        }
        offset += line.len();
    }
    vec![text.to_string()]
}

/// Generations for a case, split at its marker.
pub fn generations(case: &str) -> Vec<String> {
    split_at_marker(&transcript(case))
}

/// Keyed replay entries obtained by running each instance against its own
/// sequential script and recording the requests.
pub fn keyed_script(pairs: &[(Instance, Vec<String>)], config: &RunConfig) -> Vec<ScriptEntry> {
    let mut entries = Vec::new();
    for (inst, gens) in pairs {
        let rec = RecordingBackend::new(ReplayBackend::sequential(gens.clone()));
        let fitted = tabreason::fit_to_budget(inst, config.table_token_budget);
        let (outcome, _) = run_instance(&fitted, config, &rec);
        assert_eq!(outcome.api_calls as usize, gens.len(), "{} consumes its script", inst.id);
        entries.extend(rec.entries());
    }
    entries
}

/// `copies` variants of every fixture case, each with a distinct query so
/// their prompts (and replay keys) differ.
pub fn variant_batch(copies: usize) -> Vec<(Instance, Vec<String>)> {
    let mut out = Vec::new();
    for k in 0..copies {
        for case in CASES {
            let mut inst = instance(case);
            inst.id = format!("{case}_{k}");
            inst.query = format!("{} (variant {k})", inst.query);
            out.push((inst, generations(case)));
        }
    }
    out
}
