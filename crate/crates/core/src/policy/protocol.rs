//! Newline-delimited JSON wire messages exchanged with a policy.

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::render::{Observation, Privileged};
use crate::sim::{ActionCommand, Termination};

pub const PROTOCOL_VERSION: u32 = 1;
/// Number of values in an `act` message.
pub const ACTION_ARITY: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Init(InitMsg),
    InitAck(InitAck),
    Observe(ObserveMsg),
    Act(ActMsg),
    Done(DoneMsg),
    Error(ErrorMsg),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Init(_) => "init",
            Message::InitAck(_) => "init_ack",
            Message::Observe(_) => "observe",
            Message::Act(_) => "act",
            Message::Done(_) => "done",
            Message::Error(_) => "error",
        }
    }

    /// One line of UTF-8 JSON, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, PolicyError> {
        serde_json::from_str(line.trim_end()).map_err(|e| PolicyError::Malformed(format!("{e}: {}", truncate(line))))
    }
}

fn truncate(s: &str) -> String {
    let mut t: String = s.chars().take(120).collect();
    if t.len() < s.len() {
        t.push_str("...");
    }
    t
}

/// Sent by the framework at the start of every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitMsg {
    pub protocol_version: u32,
    pub instruction: String,
    pub image_width: u32,
    pub image_height: u32,
    pub max_steps: u32,
    /// Episode seed, for policies that sample.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitAck {
    pub protocol_version: u32,
    pub name: String,
    #[serde(default)]
    pub accepts_privileged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveMsg {
    pub step: u32,
    pub instruction: String,
    pub width: u32,
    pub height: u32,
    /// Raw RGB rows, base64 encoded on the wire.
    #[serde(with = "b64")]
    pub rgb: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privileged: Option<Privileged>,
}

impl ObserveMsg {
    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            step: obs.step,
            instruction: obs.instruction.clone(),
            width: obs.width,
            height: obs.height,
            rgb: obs.rgb.clone(),
            privileged: obs.privileged.clone(),
        }
    }

    pub fn into_observation(self) -> Result<Observation, PolicyError> {
        let want = self.width as usize * self.height as usize * 3;
        if self.rgb.len() != want {
            return Err(PolicyError::Malformed(format!("rgb has {} bytes, expected {want}", self.rgb.len())));
        }
        Ok(Observation {
            rgb: self.rgb,
            width: self.width,
            height: self.height,
            step: self.step,
            instruction: self.instruction,
            privileged: self.privileged,
        })
    }
}

/// `[dx, dy, dz, droll, dpitch, dyaw, dgrip]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActMsg {
    pub action: Vec<f64>,
}

impl ActMsg {
    pub fn from_action(a: &ActionCommand) -> Self {
        Self { action: a.to_array().to_vec() }
    }

    /// Checks arity and finiteness.
    pub fn to_action(&self) -> Result<ActionCommand, PolicyError> {
        let arr: [f64; ACTION_ARITY] = self
            .action
            .as_slice()
            .try_into()
            .map_err(|_| PolicyError::Malformed(format!("act has {} values, expected {ACTION_ARITY}", self.action.len())))?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::Malformed("act contains a non-finite value".into()));
        }
        Ok(ActionCommand::from_array(arr))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoneMsg {
    pub reason: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    pub message: String,
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_lines() {
        let m = Message::Act(ActMsg { action: vec![0.0, 0.5, -1.0, 0.0, 0.0, 0.0, 1.0] });
        assert_eq!(m.to_line(), r#"{"type":"act","action":[0.0,0.5,-1.0,0.0,0.0,0.0,1.0]}"#);
        assert_eq!(Message::from_line(&m.to_line()).unwrap(), m);
        let d = Message::Done(DoneMsg { reason: Termination::MaxSteps });
        assert_eq!(d.to_line(), r#"{"type":"done","reason":"max_steps"}"#);
    }

    #[test]
    fn rgb_is_base64() {
        let m = Message::Observe(ObserveMsg { step: 3, instruction: "x".into(), width: 1, height: 1, rgb: vec![1, 2, 3], privileged: None });
        let line = m.to_line();
        assert!(line.contains(r#""rgb":"AQID""#), "{line}");
        assert!(!line.contains("privileged"));
        assert_eq!(Message::from_line(&line).unwrap(), m);
    }

    #[test]
    fn act_validation() {
        assert!(ActMsg { action: vec![0.0; 7] }.to_action().is_ok());
        assert!(matches!(ActMsg { action: vec![0.0; 6] }.to_action(), Err(PolicyError::Malformed(_))));
        let mut v = vec![0.0; 7];
        v[2] = f64::INFINITY;
        assert!(matches!(ActMsg { action: v }.to_action(), Err(PolicyError::Malformed(_))));
        // JSON has no NaN literal; a sender emitting one produces a parse error.
        assert!(Message::from_line(r#"{"type":"act","action":[NaN,0,0,0,0,0,0]}"#).is_err());
        assert!(Message::from_line(r#"{"type":"act","action":[1e999,0,0,0,0,0,0]}"#).map(|m| match m {
            Message::Act(a) => a.to_action().is_err(),
            _ => false,
        }).unwrap_or(true));
    }

    #[test]
    fn observation_size_checked() {
        let m = ObserveMsg { step: 0, instruction: "x".into(), width: 2, height: 2, rgb: vec![0; 11], privileged: None };
        assert!(m.into_observation().is_err());
    }
}
