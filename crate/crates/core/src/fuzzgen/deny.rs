use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenError;
use crate::scene::{ObjectDatabase, Pool, Role, TaskKind};

const DENY_SEEN: &str = include_str!("../../data/deny_seen.json");
const DENY_UNSEEN: &str = include_str!("../../data/deny_unseen.json");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DenyEntry {
    pub role: Role,
    pub record_id: String,
}

/// Per task kind, the (role, record) pairs that make a target selection
/// semantically invalid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenyList {
    pub entries: BTreeMap<TaskKind, Vec<DenyEntry>>,
}

impl DenyList {
    pub fn from_json(text: &str) -> Result<Self, GenError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GenError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn builtin(pool: Pool) -> Self {
        let text = match pool {
            Pool::Seen => DENY_SEEN,
            Pool::Unseen => DENY_UNSEEN,
        };
        Self::from_json(text).expect("bundled deny list is valid")
    }

    /// Fails if any entry names an id missing from `db`.
    pub fn check(&self, db: &ObjectDatabase) -> Result<(), GenError> {
        for e in self.entries.values().flatten() {
            if !db.contains(&e.record_id) {
                return Err(GenError::UnknownDenied(e.record_id.clone()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, kind: TaskKind, role: Role, record_id: &str) -> bool {
        self.entries
            .get(&kind)
            .is_some_and(|list| list.iter().any(|e| e.role == role && e.record_id == record_id))
    }
}

/// False iff a selected (role, id) pair is denied for the task.
/// Single-object and proximity tasks are always valid.
pub fn semantic_valid(targets: &[(Role, &str)], kind: TaskKind, deny: &DenyList) -> bool {
    if matches!(kind, TaskKind::PickUp | TaskKind::MoveNear) {
        return true;
    }
    !targets.iter().any(|&(role, id)| deny.contains(kind, role, id))
}
