//! Prover-side TCP server. The verifier connects, sends a challenge
//! (operation id + nonce), and the server runs the requested operation
//! under measurement and replies with the attestation file.

use super::frame::{decode_challenge, Frame, FrameType};
use crate::instrument::Instrumented;
use crate::mini_ir::Program;
use crate::prover::{Machine, RunConfig};
use ed25519_dalek::SigningKey;
use std::io;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// Everything the prover needs to service challenges.
pub struct ProverConfig {
    pub program: Program,
    pub inst: Instrumented,
    pub key: SigningKey,
    /// Inputs fed to `input` instructions on each run.
    pub inputs: Vec<i64>,
}

impl ProverConfig {
    fn handle(&self, stream: &mut TcpStream) -> io::Result<()> {
        let req = Frame::read_from(stream)?;
        if req.kind != FrameType::Challenge {
            return Frame::new(FrameType::Error, b"expected a challenge".to_vec())
                .write_to(stream);
        }
        let Some((op_id, nonce)) = decode_challenge(&req.payload) else {
            return Frame::new(FrameType::Error, b"malformed challenge".to_vec()).write_to(stream);
        };
        let cfg = RunConfig::new(self.key.clone(), nonce);
        let out = Machine::new(&self.program, &self.inst, self.inputs.clone(), vec![], vec![], cfg)
            .run();
        match out.attestations.get(&op_id) {
            Some(file) => Frame::new(FrameType::Attestation, file.encode()).write_to(stream),
            None => Frame::new(
                FrameType::Error,
                format!("operation {op_id} did not run").into_bytes(),
            )
            .write_to(stream),
        }
    }
}

pub struct ServerHandle {
    addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Accepts challenges until `stop()`. One thread per connection.
pub fn serve(config: ProverConfig, listener: TcpListener) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let config = Arc::new(config);
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(mut stream) = conn else { continue };
            let cfg = config.clone();
            std::thread::spawn(move || {
                let _ = cfg.handle(&mut stream);
            });
        }
    });
    Ok(ServerHandle { addr, stop, thread: Some(thread) })
}

/// Serves exactly one connection on the calling thread. Used by the CLI
/// when a single exchange is wanted, and by tests.
pub fn serve_once(config: &ProverConfig, listener: &TcpListener) -> io::Result<()> {
    let (mut stream, _) = listener.accept()?;
    config.handle(&mut stream)
}
