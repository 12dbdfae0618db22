use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::Message;
use super::server::PolicyServer;
use super::PolicyError;

/// Strict request/response channel to one policy instance.
pub trait Transport: Send {
    fn send(&mut self, msg: &Message) -> Result<(), PolicyError>;
    fn recv(&mut self, timeout: Duration) -> Result<Message, PolicyError>;
}

/// Calls a policy server directly, without serialization.
pub struct InProcess {
    server: PolicyServer,
    replies: VecDeque<Message>,
}

impl InProcess {
    pub fn new(server: PolicyServer) -> Self {
        Self { server, replies: VecDeque::new() }
    }
}

impl Transport for InProcess {
    fn send(&mut self, msg: &Message) -> Result<(), PolicyError> {
        if let Some(reply) = self.server.handle(msg.clone()) {
            self.replies.push_back(reply);
        }
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> Result<Message, PolicyError> {
        self.replies.pop_front().ok_or(PolicyError::Closed)
    }
}

/// JSON lines over a byte stream. A reader thread feeds a channel so reads
/// can time out.
pub struct Lines {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
}

impl Lines {
    pub fn new(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut r = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match r.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if line.trim().is_empty() {
                            continue;
                        }
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Self { writer: Box::new(writer), lines: rx }
    }
}

impl Transport for Lines {
    fn send(&mut self, msg: &Message) -> Result<(), PolicyError> {
        let mut line = msg.to_line();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).and_then(|_| self.writer.flush()).map_err(|_| PolicyError::Closed)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, PolicyError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Message::from_line(&line),
            Ok(Err(e)) => Err(PolicyError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(PolicyError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(PolicyError::Closed),
        }
    }
}

/// A spawned command speaking the protocol on stdin/stdout.
pub struct ChildProcess {
    child: Child,
    lines: Option<Lines>,
}

impl ChildProcess {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, PolicyError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PolicyError::Spawn { command: command.to_string(), source: e })?;
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self { child, lines: Some(Lines::new(stdout, stdin)) })
    }
}

impl Transport for ChildProcess {
    fn send(&mut self, msg: &Message) -> Result<(), PolicyError> {
        self.lines.as_mut().ok_or(PolicyError::Closed)?.send(msg)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, PolicyError> {
        self.lines.as_mut().ok_or(PolicyError::Closed)?.recv(timeout)
    }
}

impl Drop for ChildProcess {
    fn drop(&mut self) {
        // Closing stdin asks the child to exit; kill it if it lingers.
        self.lines.take();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A TCP connection speaking the protocol.
pub struct Tcp {
    stream: TcpStream,
    lines: Lines,
}

impl Tcp {
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, PolicyError> {
        let connect_err = |e: std::io::Error| PolicyError::Connect { addr: addr.to_string(), source: e };
        let sock = addr
            .to_socket_addrs()
            .map_err(connect_err)?
            .next()
            .ok_or_else(|| connect_err(std::io::Error::new(std::io::ErrorKind::NotFound, "no address")))?;
        let stream = TcpStream::connect_timeout(&sock, timeout).map_err(connect_err)?;
        stream.set_nodelay(true).ok();
        let reader = stream.try_clone().map_err(connect_err)?;
        let writer = stream.try_clone().map_err(connect_err)?;
        Ok(Self { stream, lines: Lines::new(reader, writer) })
    }
}

impl Transport for Tcp {
    fn send(&mut self, msg: &Message) -> Result<(), PolicyError> {
        self.lines.send(msg)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, PolicyError> {
        self.lines.recv(timeout)
    }
}

impl Drop for Tcp {
    fn drop(&mut self) {
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
    }
}

/// Wraps a transport and records every message line in both directions,
/// prefixed with `> ` (framework to policy) or `< ` (policy to framework).
pub struct Recording<T: Transport> {
    inner: T,
    pub log: std::sync::Arc<std::sync::Mutex<Vec<String>>>,
}

impl<T: Transport> Recording<T> {
    pub fn new(inner: T) -> Self {
        Self { inner, log: Default::default() }
    }
}

impl<T: Transport> Transport for Recording<T> {
    fn send(&mut self, msg: &Message) -> Result<(), PolicyError> {
        self.log.lock().expect("log lock").push(format!("> {}", msg.to_line()));
        self.inner.send(msg)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, PolicyError> {
        let m = self.inner.recv(timeout)?;
        self.log.lock().expect("log lock").push(format!("< {}", m.to_line()));
        Ok(m)
    }
}
