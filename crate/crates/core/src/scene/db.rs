use std::collections::HashMap;
use std::path::Path;

use super::{ObjectRecord, Pool, SceneError};

const SEEN_JSON: &str = include_str!("../../data/objects_seen.json");
const UNSEEN_JSON: &str = include_str!("../../data/objects_unseen.json");

/// Record counts per pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoolCounts {
    pub seen: usize,
    pub unseen: usize,
}

/// Object records with unique ids, in file order.
#[derive(Debug, Clone)]
pub struct ObjectDatabase {
    records: Vec<ObjectRecord>,
    index: HashMap<String, usize>,
}

impl ObjectDatabase {
    pub fn new(records: Vec<ObjectRecord>) -> Result<Self, SceneError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            rec.check()?;
            if index.insert(rec.id.clone(), i).is_some() {
                return Err(SceneError::DuplicateId(rec.id.clone()));
            }
        }
        Ok(Self { records, index })
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let records: Vec<ObjectRecord> = serde_json::from_str(text)?;
        Self::new(records)
    }

    /// Loads a JSON array of object records.
    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// The bundled default database (18 records).
    pub fn builtin_seen() -> Self {
        Self::from_json(SEEN_JSON).expect("bundled seen database is valid")
    }

    /// The bundled held-out database (56 records).
    pub fn builtin_unseen() -> Self {
        Self::from_json(UNSEEN_JSON).expect("bundled unseen database is valid")
    }

    pub fn builtin(pool: Pool) -> Self {
        match pool {
            Pool::Seen => Self::builtin_seen(),
            Pool::Unseen => Self::builtin_unseen(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&ObjectRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn require(&self, id: &str) -> Result<&ObjectRecord, SceneError> {
        self.get(id).ok_or_else(|| SceneError::UnknownObject(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn records(&self) -> &[ObjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> PoolCounts {
        self.records.iter().fold(PoolCounts::default(), |mut c, r| {
            match r.pool {
                Pool::Seen => c.seen += 1,
                Pool::Unseen => c.unseen += 1,
            }
            c
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }
}
