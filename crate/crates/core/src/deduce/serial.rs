//! Canonical JSON persistence for the fact store.
//!
//! The document is schema-tagged (`divseq-facts/1`), lists handle records
//! before facts, and keeps facts in id order, so exporting an imported
//! canonical document is the identity. Import re-validates everything:
//! statements, derivations, and certificate replay.

use super::{DeduceError, Fact, FactStore, HandleRecord, LogEntry, SCHEMA};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct StoreDocument {
    schema: String,
    handles: Vec<HandleRecord>,
    facts: Vec<Fact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    log: Vec<LogEntry>,
}

impl FactStore {
    /// Canonical pretty-printed JSON document.
    pub fn export_json(&self) -> String {
        let doc = StoreDocument {
            schema: SCHEMA.to_string(),
            handles: self.handles.clone(),
            facts: self.facts.clone(),
            log: self.log.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("store serializes");
        out.push('\n');
        out
    }

    /// Parses and fully validates a store document; every certificate must
    /// replay and every derivation must check.
    pub fn import_json(text: &str) -> Result<FactStore, DeduceError> {
        let doc: StoreDocument = serde_json::from_str(text)
            .map_err(|e| DeduceError::MalformedDocument(e.to_string()))?;
        if doc.schema != SCHEMA {
            return Err(DeduceError::SchemaVersionMismatch(doc.schema));
        }
        let mut store = FactStore {
            facts: Vec::new(),
            index: Default::default(),
            handles: doc.handles,
            log: doc.log,
        };
        let total = doc.facts.len();
        for (at, fact) in doc.facts.into_iter().enumerate() {
            if fact.id != at {
                return Err(DeduceError::MalformedDocument(format!(
                    "fact ids must be dense and ordered; found {} at position {at}",
                    fact.id
                )));
            }
            let statement = fact.statement.clone().normalized();
            if statement != fact.statement {
                return Err(DeduceError::MalformedDocument(format!(
                    "fact {at} is not in normalized form"
                )));
            }
            if let Some(d) = &fact.derivation {
                if d.premises.iter().any(|&p| p >= total) {
                    return Err(DeduceError::MalformedDocument(format!(
                        "fact {at} references a premise outside the document"
                    )));
                }
            }
            if let super::FactStatus::Conditional { assumes } = &fact.status {
                if assumes.iter().any(|&a| a >= total) {
                    return Err(DeduceError::MalformedDocument(format!(
                        "fact {at} assumes a fact outside the document"
                    )));
                }
            }
            if store.index.contains_key(&fact.statement) {
                return Err(DeduceError::MalformedDocument(format!(
                    "duplicate statement at fact {at}"
                )));
            }
            store.index.insert(fact.statement.clone(), at);
            store.facts.push(fact);
        }
        // whole-store validation: every derivation checks, every witness
        // replays, and the derivation graph is acyclic
        store.replay_all()?;
        Ok(store)
    }
}
