//! The gate request path shared by the CLI and the HTTP service:
//! observe, evaluate, persist.

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::gate::{evaluate, GateDecision, GateError, PolicyConfig};
use crate::manifest::SbomSnapshot;
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Gate(#[from] GateError),
}

/// Records the SBOM's observations and snapshot, evaluates it against the
/// store, and stores the decision.
pub fn gate_sbom(
    store: &Store,
    sbom: &SbomSnapshot,
    policy: &PolicyConfig,
    now: DateTime<Utc>,
) -> Result<GateDecision, PipelineError> {
    store.upsert_observation(sbom, now)?;
    store.record_sbom(sbom)?;
    let view = store.drd_view(&sbom.application, sbom.coordinates())?;
    let waivers = store.waivers_for(&sbom.application)?;
    let decision = evaluate(sbom, &view, &waivers, policy, now)?;
    store.record_decision(
        &decision.application,
        &decision.commit,
        decision.evaluated_at,
        decision.verdict.as_str(),
        &serde_json::to_string(&decision).expect("decision serializes"),
    )?;
    Ok(decision)
}
