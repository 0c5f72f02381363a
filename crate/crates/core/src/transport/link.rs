//! Point-to-point links between the three parties.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::frame::Frame;
use super::PartyId;
use crate::error::{Error, Result};

/// Longest a connected peer may stay silent before a receive fails.
pub const IDLE_TIMEOUT: Duration = Duration::from_secs(600);

/// Ordered, reliable delivery to and from each peer.
pub trait Link: Send {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()>;
    fn recv(&mut self, from: PartyId) -> Result<Frame>;
}

/// Channels inside one process. Sends never block.
pub struct InProcessLink {
    me: PartyId,
    tx: [Option<Sender<Frame>>; 3],
    rx: [Option<Receiver<Frame>>; 3],
    timeout: Duration,
    abort: Arc<AtomicBool>,
}

impl InProcessLink {
    /// Six directed channels wiring three parties together. Setting the
    /// returned flag makes every pending receive fail promptly.
    pub fn triple(timeout: Duration) -> ([InProcessLink; 3], Arc<AtomicBool>) {
        let abort = Arc::new(AtomicBool::new(false));
        let mut tx: [[Option<Sender<Frame>>; 3]; 3] = Default::default();
        let mut rx: [[Option<Receiver<Frame>>; 3]; 3] = Default::default();
        for from in 0..3 {
            for to in 0..3 {
                if from != to {
                    let (s, r) = mpsc::channel();
                    tx[from][to] = Some(s);
                    rx[to][from] = Some(r);
                }
            }
        }
        let [t0, t1, t2] = tx;
        let [r0, r1, r2] = rx;
        let link = |me, tx, rx| InProcessLink {
            me,
            tx,
            rx,
            timeout,
            abort: abort.clone(),
        };
        let links = [
            link(PartyId::P0, t0, r0),
            link(PartyId::P1, t1, r1),
            link(PartyId::P2, t2, r2),
        ];
        (links, abort)
    }
}

impl Link for InProcessLink {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()> {
        let tx = self.tx[to.index()].as_ref().ok_or_else(|| Error::Transport {
            from: self.me,
            to,
            reason: "no channel to self".into(),
        })?;
        tx.send(frame).map_err(|_| Error::Transport {
            from: self.me,
            to,
            reason: "peer hung up".into(),
        })
    }

    fn recv(&mut self, from: PartyId) -> Result<Frame> {
        let rx = self.rx[from.index()].as_ref().ok_or_else(|| Error::Transport {
            from,
            to: self.me,
            reason: "no channel from self".into(),
        })?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let fail = |reason: &str| Error::Transport {
                from,
                to: self.me,
                reason: reason.into(),
            };
            match rx.recv_timeout(Duration::from_millis(20)) {
                Ok(frame) => return Ok(frame),
                Err(RecvTimeoutError::Disconnected) => return Err(fail("peer hung up")),
                Err(RecvTimeoutError::Timeout) => {
                    if self.abort.load(Ordering::SeqCst) {
                        return Err(fail("aborted after a peer failed"));
                    }
                    if Instant::now() >= deadline {
                        return Err(fail("timed out waiting for message"));
                    }
                }
            }
        }
    }
}

struct Peer {
    // Writes go through a dedicated thread so that two parties sending
    // large payloads to each other in the same round cannot deadlock on
    // full socket buffers.
    queue: Option<Sender<Vec<u8>>>,
    writer: Option<JoinHandle<std::io::Result<()>>>,
    reader: BufReader<TcpStream>,
}

/// TCP connections to both peers. The higher-numbered party dials the
/// lower-numbered one and announces itself with a one-byte hello.
pub struct TcpLink {
    me: PartyId,
    peers: [Option<Peer>; 3],
}

impl TcpLink {
    /// Bind `endpoints[me]` and connect to the other two parties.
    pub fn connect(me: PartyId, endpoints: &[SocketAddr; 3], timeout: Duration) -> Result<TcpLink> {
        let listener = TcpListener::bind(endpoints[me.index()]).map_err(|e| Error::Transport {
            from: me,
            to: me,
            reason: format!("cannot bind {}: {e}", endpoints[me.index()]),
        })?;
        Self::with_listener(me, listener, endpoints, timeout)
    }

    /// Like [`TcpLink::connect`] with an already bound listener.
    pub fn with_listener(
        me: PartyId,
        listener: TcpListener,
        endpoints: &[SocketAddr; 3],
        timeout: Duration,
    ) -> Result<TcpLink> {
        let deadline = Instant::now() + timeout;
        let mut streams: [Option<TcpStream>; 3] = Default::default();

        for lower in PartyId::ALL.into_iter().filter(|p| p.index() < me.index()) {
            let stream = dial(me, lower, endpoints[lower.index()], deadline)?;
            streams[lower.index()] = Some(stream);
        }

        listener.set_nonblocking(true)?;
        let mut waiting: Vec<PartyId> = PartyId::ALL
            .into_iter()
            .filter(|p| p.index() > me.index())
            .collect();
        while !waiting.is_empty() {
            match listener.accept() {
                Ok((mut stream, _)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_read_timeout(Some(remaining(deadline)))?;
                    let mut hello = [0u8; 1];
                    if stream.read_exact(&mut hello).is_err() {
                        continue;
                    }
                    let Ok(peer) = PartyId::new(hello[0]) else {
                        continue;
                    };
                    if let Some(pos) = waiting.iter().position(|&p| p == peer) {
                        waiting.remove(pos);
                        streams[peer.index()] = Some(stream);
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::Transport {
                            from: waiting[0],
                            to: me,
                            reason: format!(
                                "timed out after {:?} waiting for {} to connect",
                                timeout, waiting[0]
                            ),
                        });
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }

        let mut peers: [Option<Peer>; 3] = Default::default();
        for p in PartyId::ALL {
            if let Some(stream) = streams[p.index()].take() {
                stream.set_read_timeout(Some(IDLE_TIMEOUT))?;
                stream.set_nodelay(true)?;
                let write_half = stream.try_clone()?;
                let (tx, rx) = mpsc::channel::<Vec<u8>>();
                let writer = thread::spawn(move || -> std::io::Result<()> {
                    let mut w = BufWriter::new(write_half);
                    for buf in rx {
                        w.write_all(&buf)?;
                        w.flush()?;
                    }
                    Ok(())
                });
                peers[p.index()] = Some(Peer {
                    queue: Some(tx),
                    writer: Some(writer),
                    reader: BufReader::new(stream),
                });
            }
        }
        Ok(TcpLink { me, peers })
    }
}

fn remaining(deadline: Instant) -> Duration {
    deadline
        .saturating_duration_since(Instant::now())
        .max(Duration::from_millis(10))
}

fn dial(me: PartyId, peer: PartyId, addr: SocketAddr, deadline: Instant) -> Result<TcpStream> {
    loop {
        match TcpStream::connect_timeout(&addr, remaining(deadline)) {
            Ok(mut s) => {
                s.write_all(&[me.index() as u8])?;
                return Ok(s);
            }
            Err(e) => {
                if Instant::now() >= deadline {
                    return Err(Error::Transport {
                        from: me,
                        to: peer,
                        reason: format!("timed out connecting to {addr}: {e}"),
                    });
                }
                thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

impl Link for TcpLink {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()> {
        let me = self.me;
        let peer = self.peers[to.index()].as_mut().ok_or(Error::Transport {
            from: me,
            to,
            reason: "no connection".into(),
        })?;
        let bytes = frame.encode()?;
        peer.queue
            .as_ref()
            .expect("queue lives until drop")
            .send(bytes)
            .map_err(|_| Error::Transport {
                from: me,
                to,
                reason: "writer thread stopped".into(),
            })
    }

    fn recv(&mut self, from: PartyId) -> Result<Frame> {
        let me = self.me;
        let peer = self.peers[from.index()].as_mut().ok_or(Error::Transport {
            from,
            to: me,
            reason: "no connection".into(),
        })?;
        Frame::read_from(&mut peer.reader).map_err(|e| Error::Transport {
            from,
            to: me,
            reason: e.to_string(),
        })
    }
}

impl Drop for TcpLink {
    fn drop(&mut self) {
        for peer in self.peers.iter_mut().flatten() {
            peer.queue.take();
            if let Some(w) = peer.writer.take() {
                let _ = w.join();
            }
        }
    }
}
