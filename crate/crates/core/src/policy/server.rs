//! Policy side of the protocol: dispatches messages to a [`Policy`].

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use super::protocol::{ActMsg, ErrorMsg, InitAck, Message, PROTOCOL_VERSION};
use super::Policy;

pub struct PolicyServer {
    policy: Box<dyn Policy>,
}

impl PolicyServer {
    pub fn new(policy: Box<dyn Policy>) -> Self {
        Self { policy }
    }

    /// Reply to one framework message, if any.
    pub fn handle(&mut self, msg: Message) -> Option<Message> {
        let error = |message: String| Some(Message::Error(ErrorMsg { message }));
        match msg {
            Message::Init(init) => match self.policy.reset(&init) {
                Ok(()) => Some(Message::InitAck(InitAck {
                    protocol_version: PROTOCOL_VERSION,
                    name: self.policy.name(),
                    accepts_privileged: self.policy.accepts_privileged(),
                })),
                Err(e) => error(e),
            },
            Message::Observe(obs) => match obs.into_observation() {
                Ok(obs) => match self.policy.act(&obs) {
                    Ok(a) => Some(Message::Act(ActMsg::from_action(&a))),
                    Err(e) => error(e),
                },
                Err(e) => error(e.to_string()),
            },
            Message::Done(d) => {
                self.policy.done(d.reason);
                None
            }
            other => error(format!("unexpected {} message", other.kind())),
        }
    }
}

/// Serves one connection until the reader reaches end of input.
pub fn serve_lines(reader: impl Read, mut writer: impl Write, policy: Box<dyn Policy>) -> std::io::Result<()> {
    let mut server = PolicyServer::new(policy);
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::from_line(&line) {
            Ok(msg) => server.handle(msg),
            Err(e) => Some(Message::Error(ErrorMsg { message: e.to_string() })),
        };
        if let Some(reply) = reply {
            writeln!(writer, "{}", reply.to_line())?;
            writer.flush()?;
        }
    }
    Ok(())
}

/// Accepts connections, one fresh policy per connection, each on its own
/// thread. Stops after `max_connections` when given.
pub fn serve_tcp(
    listener: TcpListener,
    factory: impl Fn() -> Box<dyn Policy> + Send + Sync + 'static,
    max_connections: Option<usize>,
) -> std::io::Result<()> {
    let factory = std::sync::Arc::new(factory);
    let mut workers = Vec::new();
    for (i, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        stream.set_nodelay(true).ok();
        let reader = stream.try_clone()?;
        let f = factory.clone();
        workers.push(thread::spawn(move || {
            if let Err(e) = serve_lines(reader, stream, f()) {
                log::warn!("policy connection ended: {e}");
            }
        }));
        if max_connections.is_some_and(|m| i + 1 >= m) {
            break;
        }
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}
