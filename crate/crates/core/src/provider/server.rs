use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, info, warn};

use super::ledger::DEFAULT_RHO;
use super::session::{error_reply, Session};
use super::store::ImageStore;
use super::wire::{read_frame, ReadError};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerConfig {
    /// Initial ρ of every session; clients may override it in HELLO.
    pub rho: f64,
    /// Optional link emulation: sleep after each reply as if the channel
    /// carried this many bytes per second.
    pub throttle_bytes_per_sec: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            throttle_bytes_per_sec: None,
        }
    }
}

/// Running provider. Dropping the handle stops accepting new connections;
/// open sessions finish when their clients disconnect.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_accepting();
        }
    }
}

/// Binds and serves on a background thread, one thread per session.
pub fn spawn(
    store: Arc<dyn ImageStore>,
    bind: impl ToSocketAddrs,
    config: ServerConfig,
) -> Result<ServerHandle> {
    let listener = TcpListener::bind(bind)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::Builder::new()
        .name("bandseek-accept".into())
        .spawn(move || accept_loop(listener, store, config, &flag))?;
    info!("serving on {addr}");
    Ok(ServerHandle {
        addr,
        stop,
        thread: Some(thread),
    })
}

/// Serves on the calling thread until the process exits.
pub fn serve(
    store: Arc<dyn ImageStore>,
    bind: impl ToSocketAddrs,
    config: ServerConfig,
) -> Result<()> {
    let listener = TcpListener::bind(bind)?;
    info!("serving on {}", listener.local_addr()?);
    accept_loop(listener, store, config, &AtomicBool::new(false));
    Ok(())
}

fn accept_loop(
    listener: TcpListener,
    store: Arc<dyn ImageStore>,
    config: ServerConfig,
    stop: &AtomicBool,
) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(stream) => {
                let store = store.clone();
                let spawned = thread::Builder::new()
                    .name("bandseek-session".into())
                    .spawn(move || {
                        if let Err(e) = serve_connection(stream, store, config) {
                            debug!("session ended: {e}");
                        }
                    });
                if let Err(e) = spawned {
                    warn!("cannot spawn session thread: {e}");
                }
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

fn serve_connection(
    mut stream: TcpStream,
    store: Arc<dyn ImageStore>,
    config: ServerConfig,
) -> Result<()> {
    stream.set_nodelay(true)?;
    let peer = stream.peer_addr().ok();
    debug!("session from {peer:?}");
    let mut session = Session::new(store, config.rho);
    loop {
        let reply = match read_frame(&mut stream) {
            Ok(None) => return Ok(()),
            Ok(Some(raw)) => {
                let id = raw.id_hint();
                match raw.parse() {
                    Ok(msg) => session.respond(msg),
                    Err(e) => error_reply(id, &e),
                }
            }
            Err(ReadError::Malformed(m)) => error_reply(0, &Error::Protocol(m)),
            Err(ReadError::Fatal(e)) => {
                let _ = stream.write_all(&error_reply(0, &e));
                return Err(e);
            }
        };
        stream.write_all(&reply)?;
        if let Some(rate) = config.throttle_bytes_per_sec.filter(|r| *r > 0) {
            thread::sleep(Duration::from_secs_f64(reply.len() as f64 / rate as f64));
        }
    }
}
