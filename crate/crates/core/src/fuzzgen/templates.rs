use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::scene::{ObjectDatabase, TaskInstance, TaskKind};

const STANDARD: &str = include_str!("../../data/standard.json");
const PARAPHRASES: &str = include_str!("../../data/paraphrases.json");
const TWO_STEP: &str = include_str!("../../data/two_step.json");

/// Instruction templates per task kind.
///
/// Templates use `[object name]` placeholders filled in order: for
/// single-object tasks every placeholder is the manipulated object; for
/// two-object tasks the last placeholder is the reference object and all
/// earlier ones the manipulated object. `[object a]` / `[object b]` name
/// the objects explicitly. Placeholders are case-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParaphraseSet {
    pub templates: BTreeMap<TaskKind, Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Positional,
    A,
    B,
}

enum Piece<'t> {
    Text(&'t str),
    Slot(Slot),
}

fn parse(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']').map(|c| open + c) else { break };
        let slot = match rest[open + 1..close].trim().to_ascii_lowercase().as_str() {
            "object name" => Some(Slot::Positional),
            "object a" => Some(Slot::A),
            "object b" => Some(Slot::B),
            _ => None,
        };
        match slot {
            Some(slot) => {
                out.push(Piece::Text(&rest[..open]));
                out.push(Piece::Slot(slot));
            }
            None => out.push(Piece::Text(&rest[..=close])),
        }
        rest = &rest[close + 1..];
    }
    out.push(Piece::Text(rest));
    out
}

/// Resolves each slot of a template to object A (false) or B (true).
fn resolve(template: &str, kind: TaskKind) -> Result<Vec<bool>, GenError> {
    let bad = |reason: &str| GenError::BadTemplate { template: template.to_string(), reason: reason.to_string() };
    let pieces = parse(template);
    let slots: Vec<Slot> = pieces
        .iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(*s),
            Piece::Text(_) => None,
        })
        .collect();
    let positional = slots.iter().filter(|&&s| s == Slot::Positional).count();
    let two = kind.n_targets() == 2;
    let mut seen_positional = 0;
    let resolved: Vec<bool> = slots
        .iter()
        .map(|s| match s {
            Slot::A => false,
            Slot::B => true,
            Slot::Positional => {
                seen_positional += 1;
                two && seen_positional == positional && !slots.contains(&Slot::B)
            }
        })
        .collect();
    if !resolved.contains(&false) {
        return Err(bad("no placeholder for the manipulated object"));
    }
    match (two, resolved.contains(&true)) {
        (true, false) => Err(bad("two-object task needs a placeholder for the reference object")),
        (false, true) => Err(bad("single-object task cannot reference a second object")),
        _ => Ok(resolved),
    }
}

/// Fills a template with the display names of the task objects.
pub fn render_template(template: &str, kind: TaskKind, a: &str, b: Option<&str>) -> Result<String, GenError> {
    let slots = resolve(template, kind)?;
    let b = match (kind.n_targets(), b) {
        (2, None) => {
            return Err(GenError::BadTemplate { template: template.into(), reason: "missing reference object".into() })
        }
        (_, b) => b.unwrap_or(""),
    };
    let mut slot_iter = slots.into_iter();
    let mut out = String::with_capacity(template.len() + 32);
    for piece in parse(template) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(_) => out.push_str(if slot_iter.next() == Some(true) { b } else { a }),
        }
    }
    Ok(out)
}

impl ParaphraseSet {
    pub fn from_json(text: &str) -> Result<Self, GenError> {
        let set: Self = serde_json::from_str(text)?;
        set.check()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GenError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// One template per task: the standard phrasing.
    pub fn standard() -> Self {
        Self::from_json(STANDARD).expect("bundled standard templates are valid")
    }

    /// Ten authored paraphrases per task.
    pub fn builtin_paraphrases() -> Self {
        Self::from_json(PARAPHRASES).expect("bundled paraphrases are valid")
    }

    /// Two-step decomposition of the containment task.
    pub fn two_step() -> Self {
        Self::from_json(TWO_STEP).expect("bundled two-step templates are valid")
    }

    pub fn standard_template(kind: TaskKind) -> &'static str {
        match kind {
            TaskKind::PickUp => "pick up [object name]",
            TaskKind::MoveNear => "move [object name] near [object name]",
            TaskKind::PutOn => "put [object name] on [object name]",
            TaskKind::PutIn => "put [object name] into [object name]",
        }
    }

    pub fn check(&self) -> Result<(), GenError> {
        for (kind, list) in &self.templates {
            for t in list {
                resolve(t, *kind)?;
            }
        }
        Ok(())
    }

    pub fn for_task(&self, kind: TaskKind) -> &[String] {
        self.templates.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Re-renders the instruction from a uniformly chosen template of the set.
/// Object ids are unchanged. Returns the new task and the chosen template.
pub fn mutate_instruction<R: Rng + ?Sized>(
    task: &TaskInstance,
    set: &ParaphraseSet,
    db: &ObjectDatabase,
    rng: &mut R,
) -> Result<(TaskInstance, String), GenError> {
    let templates = set.for_task(task.kind);
    if templates.is_empty() {
        return Err(GenError::MissingTemplate(task.kind));
    }
    let template = &templates[rng.random_range(0..templates.len())];
    let name = |id: &str| {
        db.get(id)
            .map(|r| r.display_name.clone())
            .ok_or_else(|| GenError::InvalidConfig(format!("object {id:?} not in database")))
    };
    let a = name(&task.target_a_id)?;
    let b = task.target_b_id.as_deref().map(name).transpose()?;
    let instruction = render_template(template, task.kind, &a, b.as_deref())?;
    Ok((TaskInstance { instruction, ..task.clone() }, template.clone()))
}
