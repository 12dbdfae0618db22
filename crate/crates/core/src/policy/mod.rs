//! Policy interface: the wire protocol, transports, and built-in policies.

mod builtin;
pub mod protocol;
mod server;
mod transport;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

pub use builtin::{EchoPolicy, GreedyPolicy, OraclePolicy, RandomPolicy};
pub use protocol::{ActMsg, DoneMsg, ErrorMsg, InitAck, InitMsg, Message, ObserveMsg, PROTOCOL_VERSION};
pub use server::{serve_lines, serve_tcp, PolicyServer};
pub use transport::{ChildProcess, InProcess, Lines, Recording, Tcp, Transport};

use crate::render::Observation;
use crate::sim::{ActionCommand, Termination};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("bad policy descriptor {0:?}")]
    Descriptor(String),
    #[error("failed to spawn {command:?}: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("failed to connect to {addr}: {source}")]
    Connect { addr: String, source: std::io::Error },
    #[error("protocol version mismatch: expected {expected}, policy speaks {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("transport closed")]
    Closed,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("policy reported error: {0}")]
    Remote(String),
    #[error("unexpected {got} message, expected {expected}")]
    Unexpected { expected: &'static str, got: &'static str },
    #[error("handshake not completed")]
    NoHandshake,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Policy-side behaviour behind the protocol.
pub trait Policy: Send {
    fn name(&self) -> String;

    fn accepts_privileged(&self) -> bool {
        false
    }

    /// Called on `init`, once per episode.
    fn reset(&mut self, _init: &InitMsg) -> Result<(), String> {
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<ActionCommand, String>;

    fn done(&mut self, _reason: Termination) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Oracle,
    Greedy,
    Random(u64),
    Echo,
}

impl Builtin {
    pub fn instantiate(self) -> Box<dyn Policy> {
        match self {
            Builtin::Oracle => Box::new(OraclePolicy::new()),
            Builtin::Greedy => Box::new(GreedyPolicy::new()),
            Builtin::Random(seed) => Box::new(RandomPolicy::new(seed)),
            Builtin::Echo => Box::new(EchoPolicy),
        }
    }
}

/// Where a policy lives: `builtin:oracle`, `builtin:greedy`,
/// `builtin:random[:SEED]`, `builtin:echo`, `cmd:<shell command>` or
/// `tcp:<host>:<port>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Descriptor {
    Builtin(Builtin),
    Command(String),
    Tcp(String),
}

impl Descriptor {
    /// Scripted built-ins that need ground truth get privileged observations
    /// by default; external policies never do unless asked.
    pub fn default_cheat_mode(&self) -> bool {
        matches!(self, Descriptor::Builtin(Builtin::Oracle | Builtin::Greedy))
    }
}

impl FromStr for Descriptor {
    type Err = PolicyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolicyError::Descriptor(s.to_string());
        let (scheme, rest) = s.split_once(':').ok_or_else(bad)?;
        match scheme {
            "builtin" => {
                let b = match rest.split_once(':') {
                    None => match rest {
                        "oracle" => Builtin::Oracle,
                        "greedy" => Builtin::Greedy,
                        "random" => Builtin::Random(0),
                        "echo" => Builtin::Echo,
                        _ => return Err(bad()),
                    },
                    Some(("random", seed)) => Builtin::Random(seed.parse().map_err(|_| bad())?),
                    Some(_) => return Err(bad()),
                };
                Ok(Descriptor::Builtin(b))
            }
            "cmd" if !rest.trim().is_empty() => Ok(Descriptor::Command(rest.to_string())),
            "tcp" if rest.contains(':') => Ok(Descriptor::Tcp(rest.to_string())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Descriptor::Builtin(Builtin::Oracle) => f.write_str("builtin:oracle"),
            Descriptor::Builtin(Builtin::Greedy) => f.write_str("builtin:greedy"),
            Descriptor::Builtin(Builtin::Random(s)) => write!(f, "builtin:random:{s}"),
            Descriptor::Builtin(Builtin::Echo) => f.write_str("builtin:echo"),
            Descriptor::Command(c) => write!(f, "cmd:{c}"),
            Descriptor::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timeouts {
    pub handshake: Duration,
    pub step: Duration,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self { handshake: Duration::from_secs(10), step: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    ChildProcessStdio,
    Tcp,
}

/// Framework-side endpoint of one policy instance.
pub struct PolicyHandle {
    transport: Box<dyn Transport>,
    pub kind: TransportKind,
    pub descriptor: String,
    pub cheat_mode: bool,
    pub timeouts: Timeouts,
    handshake: Option<InitAck>,
    healthy: bool,
}

impl fmt::Debug for PolicyHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolicyHandle")
            .field("kind", &self.kind)
            .field("descriptor", &self.descriptor)
            .field("cheat_mode", &self.cheat_mode)
            .field("handshake", &self.handshake)
            .finish()
    }
}

impl PolicyHandle {
    /// Spawns or connects to the policy named by `descriptor`.
    pub fn start(descriptor: &Descriptor, cheat_mode: bool, timeouts: Timeouts) -> Result<Self, PolicyError> {
        let (transport, kind): (Box<dyn Transport>, _) = match descriptor {
            Descriptor::Builtin(b) => (Box::new(InProcess::new(PolicyServer::new(b.instantiate()))), TransportKind::InProcess),
            Descriptor::Command(c) => (Box::new(ChildProcess::spawn(c)?), TransportKind::ChildProcessStdio),
            Descriptor::Tcp(addr) => (Box::new(Tcp::connect(addr, timeouts.handshake)?), TransportKind::Tcp),
        };
        Ok(Self::with_transport(transport, kind, descriptor.to_string(), cheat_mode, timeouts))
    }

    pub fn with_transport(
        transport: Box<dyn Transport>,
        kind: TransportKind,
        descriptor: String,
        cheat_mode: bool,
        timeouts: Timeouts,
    ) -> Self {
        Self { transport, kind, descriptor, cheat_mode, timeouts, handshake: None, healthy: true }
    }

    /// In-process handle around an arbitrary policy.
    pub fn in_process(policy: Box<dyn Policy>, cheat_mode: bool) -> Self {
        let name = policy.name();
        Self::with_transport(
            Box::new(InProcess::new(PolicyServer::new(policy))),
            TransportKind::InProcess,
            name,
            cheat_mode,
            Timeouts::default(),
        )
    }

    pub fn handshake(&self) -> Option<&InitAck> {
        self.handshake.as_ref()
    }

    /// False once any exchange failed; the transport may be out of sync.
    pub fn is_healthy(&self) -> bool {
        self.healthy
    }

    /// Whether observations carry the privileged block.
    pub fn sends_privileged(&self) -> bool {
        self.cheat_mode && self.handshake.as_ref().is_some_and(|h| h.accepts_privileged)
    }

    fn exchange<T>(&mut self, r: Result<T, PolicyError>) -> Result<T, PolicyError> {
        if r.is_err() {
            self.healthy = false;
        }
        r
    }

    /// Sends `init` and waits for `init_ack`.
    pub fn begin_episode(&mut self, init: &InitMsg) -> Result<&InitAck, PolicyError> {
        self.handshake = None;
        let r = self.do_handshake(init);
        let ack = self.exchange(r)?;
        Ok(self.handshake.insert(ack))
    }

    fn do_handshake(&mut self, init: &InitMsg) -> Result<InitAck, PolicyError> {
        self.transport.send(&Message::Init(init.clone()))?;
        match self.transport.recv(self.timeouts.handshake)? {
            Message::InitAck(ack) if ack.protocol_version == init.protocol_version => Ok(ack),
            Message::InitAck(ack) => Err(PolicyError::VersionMismatch { expected: init.protocol_version, got: ack.protocol_version }),
            Message::Error(e) => Err(PolicyError::Remote(e.message)),
            other => Err(PolicyError::Unexpected { expected: "init_ack", got: other.kind() }),
        }
    }

    /// Sends one observation and waits for the action.
    pub fn query_action(&mut self, obs: &Observation) -> Result<ActionCommand, PolicyError> {
        if self.handshake.is_none() {
            return Err(PolicyError::NoHandshake);
        }
        let mut msg = ObserveMsg::from_observation(obs);
        if !self.sends_privileged() {
            msg.privileged = None;
        }
        let r = self.do_query(msg);
        self.exchange(r)
    }

    fn do_query(&mut self, msg: ObserveMsg) -> Result<ActionCommand, PolicyError> {
        self.transport.send(&Message::Observe(msg))?;
        match self.transport.recv(self.timeouts.step)? {
            Message::Act(a) => a.to_action(),
            Message::Error(e) => Err(PolicyError::Remote(e.message)),
            other => Err(PolicyError::Unexpected { expected: "act", got: other.kind() }),
        }
    }

    /// Notifies the policy that the episode ended.
    pub fn end_episode(&mut self, reason: Termination) -> Result<(), PolicyError> {
        self.handshake = None;
        let r = self.transport.send(&Message::Done(DoneMsg { reason }));
        self.exchange(r)
    }
}
