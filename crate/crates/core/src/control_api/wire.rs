use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, PoisonError};
use std::thread;
use std::time::Duration;

use log::{debug, info, warn};
use serde_json::Value;

use super::client::ControlClient;
use super::dispatch::{Role, Session, SharedCore};
use super::protocol::{Command, Response, Verb};
use crate::error::{Error, Result};

const ACCEPT_POLL: Duration = Duration::from_millis(5);

/// Serves the control surface over TCP. The first connection controls the
/// engine; later ones are observers. [`Server::run`] returns once the
/// controlling session has closed.
#[derive(Debug)]
pub struct Server {
    listener: TcpListener,
    core: SharedCore,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, core: SharedCore) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        Ok(Server { listener, core })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn core(&self) -> &SharedCore {
        &self.core
    }

    pub fn run(self) -> Result<()> {
        self.listener.set_nonblocking(true)?;
        let controller_done = Arc::new(AtomicBool::new(false));
        let mut controller: Option<thread::JoinHandle<()>> = None;
        let mut observers = Vec::new();
        loop {
            if controller_done.load(Ordering::SeqCst) {
                break;
            }
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_nodelay(true)?;
                    let core = Arc::clone(&self.core);
                    if controller.is_none() {
                        info!("controller connected from {peer}");
                        let done = Arc::clone(&controller_done);
                        controller = Some(thread::spawn(move || {
                            if let Err(e) = serve_session(stream, core, Role::Controller) {
                                warn!("controller session ended with error: {e}");
                            }
                            done.store(true, Ordering::SeqCst);
                        }));
                    } else {
                        debug!("observer connected from {peer}");
                        observers.push(thread::spawn(move || {
                            if let Err(e) = serve_session(stream, core, Role::Observer) {
                                debug!("observer session ended with error: {e}");
                            }
                        }));
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(h) = controller {
            let _ = h.join();
        }
        info!("controller session closed");
        Ok(())
    }
}

fn serve_session(stream: TcpStream, core: SharedCore, role: Role) -> io::Result<()> {
    let mut session = Session::new(role);
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        let response = {
            let mut core = core.lock().unwrap_or_else(PoisonError::into_inner);
            core.handle_line(&mut session, &line)
        };
        writer.write_all(response.to_line().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Client side of the wire protocol.
#[derive(Debug)]
pub struct WireClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    next_id: i64,
}

impl WireClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(WireClient {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            next_id: 1,
        })
    }

    /// Sends one raw line and reads one response line.
    pub fn send_raw(&mut self, line: &str) -> Result<Response> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut buf = String::new();
        if self.reader.read_line(&mut buf)? == 0 {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "server closed the session",
            )));
        }
        serde_json::from_str(buf.trim_end_matches('\n'))
            .map_err(|e| Error::Format(format!("bad response line: {e}")))
    }

    /// Sends a command with a caller-chosen id. Later automatic ids skip past it.
    pub fn execute(&mut self, cmd: &Command) -> Result<Response> {
        self.next_id = self.next_id.max(cmd.id.saturating_add(1));
        let response = self.send_raw(&cmd.to_line())?;
        if response.id != Some(cmd.id) {
            return Err(Error::Format(format!(
                "response id {:?} does not match command id {}",
                response.id, cmd.id
            )));
        }
        Ok(response)
    }
}

impl ControlClient for WireClient {
    fn call(&mut self, verb: Verb, args: Option<Value>) -> Result<Response> {
        let id = self.next_id;
        self.next_id += 1;
        self.execute(&Command { id, verb, args })
    }
}
