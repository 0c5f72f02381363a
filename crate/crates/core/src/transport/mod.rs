//! Three-party sessions: ordered channels between every pair of parties,
//! round bookkeeping and transcript capture.
//!
//! Every party runs the same protocol code against its own [`Session`].
//! A round is one call to [`Session::exchange`] made by all three parties
//! with the same public [`RoundPlan`]; each party only fills in the
//! payloads it sends.

mod frame;
mod link;
mod transcript;

use std::collections::HashSet;
use std::fmt;
use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use frame::Frame;
pub use link::{InProcessLink, Link, TcpLink, IDLE_TIMEOUT};
pub use transcript::{measured_cost, MeasuredCost, Record, Transcript};

use crate::error::{Error, Result};
use crate::ring::{derive_seed, CommonRandomness, Prg, RingParams, RingTensor};

/// Party identity: P0 model owner, P1 data owner, P2 crypto producer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartyId(u8);

impl PartyId {
    pub const P0: PartyId = PartyId(0);
    pub const P1: PartyId = PartyId(1);
    pub const P2: PartyId = PartyId(2);
    pub const ALL: [PartyId; 3] = [PartyId::P0, PartyId::P1, PartyId::P2];

    pub fn new(id: u8) -> Result<PartyId> {
        if id < 3 {
            Ok(PartyId(id))
        } else {
            Err(Error::ProtocolMisuse(format!("party id {id} is not 0, 1 or 2")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_u8(self) -> u8 {
        self.0
    }

    /// The other share-holding party (P0 <-> P1).
    pub fn peer(self) -> PartyId {
        match self.0 {
            0 => PartyId::P1,
            1 => PartyId::P0,
            _ => panic!("P2 holds no value shares"),
        }
    }

    pub fn is_share_holder(self) -> bool {
        self.0 < 2
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    InProcess,
    TcpLoopback,
}

/// One planned message. Only the sender needs to supply the payload.
#[derive(Clone, Debug)]
pub struct PlannedMessage {
    pub from: PartyId,
    pub to: PartyId,
    pub tag: String,
    pub payload: Option<Vec<u8>>,
}

/// The public shape of one round: which directed edges carry a message.
#[derive(Clone, Debug, Default)]
pub struct RoundPlan {
    messages: Vec<PlannedMessage>,
}

impl RoundPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(mut self, from: PartyId, to: PartyId, tag: &str, payload: Option<Vec<u8>>) -> Self {
        self.messages.push(PlannedMessage {
            from,
            to,
            tag: tag.to_string(),
            payload,
        });
        self
    }

    /// Add an edge whose payload is produced lazily, only on the sender.
    pub fn send_from(
        self,
        me: PartyId,
        from: PartyId,
        to: PartyId,
        tag: &str,
        payload: impl FnOnce() -> Vec<u8>,
    ) -> Self {
        let payload = (me == from).then(payload);
        self.send(from, to, tag, payload)
    }

    pub fn messages(&self) -> &[PlannedMessage] {
        &self.messages
    }
}

/// Payloads received by one party in one round.
#[derive(Debug, Default)]
pub struct Delivered {
    frames: Vec<(PartyId, Frame)>,
}

impl Delivered {
    pub fn take(&mut self, from: PartyId) -> Result<Vec<u8>> {
        let pos = self
            .frames
            .iter()
            .position(|(p, _)| *p == from)
            .ok_or_else(|| Error::ProtocolMisuse(format!("no message from {from} this round")))?;
        Ok(self.frames.swap_remove(pos).1.payload)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// One party's view of a three-party session.
pub struct Session {
    id: PartyId,
    kind: TransportKind,
    params: RingParams,
    link: Box<dyn Link>,
    round: u64,
    transcript: Transcript,
    pair: [Option<CommonRandomness>; 3],
    private: Prg,
}

fn pair_label(a: PartyId, b: PartyId) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    10 + 3 * lo.0 as u64 + hi.0 as u64
}

impl Session {
    pub fn new(
        id: PartyId,
        kind: TransportKind,
        params: RingParams,
        master_seed: u64,
        link: Box<dyn Link>,
    ) -> Session {
        let mut pair: [Option<CommonRandomness>; 3] = Default::default();
        for other in PartyId::ALL.into_iter().filter(|&p| p != id) {
            pair[other.index()] = Some(CommonRandomness::new(derive_seed(
                master_seed,
                pair_label(id, other),
            )));
        }
        Session {
            id,
            kind,
            params,
            link,
            round: 0,
            transcript: Transcript::new(),
            pair,
            private: Prg::new(derive_seed(master_seed, 100 + id.0 as u64), 0),
        }
    }

    /// Connect this party to its peers over TCP.
    pub fn connect_tcp(
        id: PartyId,
        endpoints: &[SocketAddr; 3],
        params: RingParams,
        master_seed: u64,
        timeout: Duration,
    ) -> Result<Session> {
        let link = TcpLink::connect(id, endpoints, timeout)?;
        Ok(Session::new(id, TransportKind::TcpLoopback, params, master_seed, Box::new(link)))
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn kind(&self) -> TransportKind {
        self.kind
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Records of every message this party sent or received.
    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Private randomness of this party.
    pub fn rng(&mut self) -> &mut Prg {
        &mut self.private
    }

    /// Randomness shared with `other`.
    pub fn common_randomness(&mut self, other: PartyId) -> Result<&mut CommonRandomness> {
        self.pair[other.index()]
            .as_mut()
            .ok_or_else(|| Error::ProtocolMisuse("no common randomness with self".into()))
    }

    /// This party's half of a fresh sharing of zero (P0 and P1 only).
    pub fn zero_share(&mut self, shape: Vec<usize>) -> Result<RingTensor> {
        if !self.id.is_share_holder() {
            return Err(Error::ProtocolMisuse("P2 holds no zero shares".into()));
        }
        let bits = self.params.bits;
        let me = self.id;
        let (u0, u1) = self.common_randomness(me.peer())?.next_zero_shares(bits, shape);
        Ok(if me == PartyId::P0 { u0 } else { u1 })
    }

    /// Run one round. Every party must call this with the same plan.
    pub fn exchange(&mut self, plan: RoundPlan) -> Result<Delivered> {
        if plan.messages.is_empty() {
            return Err(Error::ProtocolMisuse("a round must carry at least one message".into()));
        }
        let mut edges = HashSet::new();
        for m in &plan.messages {
            if m.from == m.to {
                return Err(Error::ProtocolMisuse(format!("{} cannot send to itself", m.from)));
            }
            if !edges.insert((m.from, m.to)) {
                return Err(Error::ProtocolMisuse(format!(
                    "edge {}->{} appears twice in one round",
                    m.from, m.to
                )));
            }
        }

        let round = self.round;
        let mut incoming = Vec::new();
        for m in plan.messages {
            if m.from == self.id {
                let payload = m.payload.ok_or_else(|| {
                    Error::ProtocolMisuse(format!(
                        "{} must supply the payload for {}->{} ({})",
                        self.id, m.from, m.to, m.tag
                    ))
                })?;
                self.transcript.push(Record {
                    round,
                    from: m.from.0,
                    to: m.to.0,
                    bytes: payload.len() as u64,
                    tag: m.tag.clone(),
                });
                self.link.send(m.to, Frame::new(m.tag, payload))?;
            } else if m.to == self.id {
                incoming.push((m.from, m.tag));
            }
        }

        let mut delivered = Delivered::default();
        for (from, tag) in incoming {
            let frame = self.link.recv(from)?;
            if frame.tag != tag {
                return Err(Error::Transport {
                    from,
                    to: self.id,
                    reason: format!("expected `{tag}` in round {round}, got `{}`", frame.tag),
                });
            }
            self.transcript.push(Record {
                round,
                from: from.0,
                to: self.id.0,
                bytes: frame.payload.len() as u64,
                tag: frame.tag.clone(),
            });
            delivered.frames.push((from, frame));
        }
        self.round += 1;
        Ok(delivered)
    }
}

/// All three parties of a session hosted in one process, each driven by
/// its own thread when a protocol runs.
pub struct Cluster {
    sessions: Vec<Session>,
    abort: Option<Arc<AtomicBool>>,
}

/// Open a three-party session. In TCP mode the parties connect to each
/// other over ephemeral loopback ports.
pub fn open_session(kind: TransportKind, master_seed: u64, params: RingParams) -> Result<Cluster> {
    Cluster::open(kind, master_seed, params)
}

impl Cluster {
    pub fn open(kind: TransportKind, master_seed: u64, params: RingParams) -> Result<Cluster> {
        params.validate()?;
        match kind {
            TransportKind::InProcess => {
                let (links, abort) = InProcessLink::triple(IDLE_TIMEOUT);
                let sessions = links
                    .into_iter()
                    .zip(PartyId::ALL)
                    .map(|(link, id)| Session::new(id, kind, params, master_seed, Box::new(link)))
                    .collect();
                Ok(Cluster {
                    sessions,
                    abort: Some(abort),
                })
            }
            TransportKind::TcpLoopback => {
                let listeners = (0..3)
                    .map(|_| TcpListener::bind("127.0.0.1:0"))
                    .collect::<std::io::Result<Vec<_>>>()?;
                let addrs: Vec<SocketAddr> = listeners
                    .iter()
                    .map(|l| l.local_addr())
                    .collect::<std::io::Result<_>>()?;
                let endpoints: [SocketAddr; 3] = [addrs[0], addrs[1], addrs[2]];
                let links: Vec<Result<TcpLink>> = std::thread::scope(|s| {
                    let handles: Vec<_> = listeners
                        .into_iter()
                        .zip(PartyId::ALL)
                        .map(|(l, id)| {
                            s.spawn(move || {
                                TcpLink::with_listener(id, l, &endpoints, Duration::from_secs(10))
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("connect thread")).collect()
                });
                let mut sessions = Vec::with_capacity(3);
                for (link, id) in links.into_iter().zip(PartyId::ALL) {
                    sessions.push(Session::new(id, kind, params, master_seed, Box::new(link?)));
                }
                Ok(Cluster {
                    sessions,
                    abort: None,
                })
            }
        }
    }

    pub fn params(&self) -> &RingParams {
        self.sessions[0].params()
    }

    pub fn session(&self, id: PartyId) -> &Session {
        &self.sessions[id.index()]
    }

    pub fn session_mut(&mut self, id: PartyId) -> &mut Session {
        &mut self.sessions[id.index()]
    }

    /// Rounds completed (identical on every party).
    pub fn round(&self) -> u64 {
        self.sessions[0].round()
    }

    /// Run `f` on all three parties concurrently. Results are returned in
    /// party order; the first error (by party) wins.
    pub fn run<T, F>(&mut self, f: F) -> Result<[T; 3]>
    where
        T: Send,
        F: Fn(&mut Session) -> Result<T> + Sync,
    {
        let abort = self.abort.clone();
        let f = &f;
        let results: Vec<Result<T>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .sessions
                .iter_mut()
                .map(|sess| {
                    let abort = abort.clone();
                    s.spawn(move || {
                        let out = f(sess);
                        if out.is_err() {
                            if let Some(flag) = &abort {
                                flag.store(true, Ordering::SeqCst);
                            }
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::ProtocolMisuse("party thread panicked".into()))))
                .collect()
        });
        if let Some(flag) = &self.abort {
            flag.store(false, Ordering::SeqCst);
        }
        // Report the root cause rather than a peer's "aborted" error.
        let mut first_err = None;
        let mut oks = Vec::with_capacity(3);
        for r in results {
            match r {
                Ok(v) => oks.push(v),
                Err(e) => {
                    let is_abort = matches!(&e, Error::Transport { reason, .. } if reason.starts_with("aborted"));
                    match (&first_err, is_abort) {
                        (None, _) => first_err = Some(e),
                        (Some(Error::Transport { reason, .. }), false) if reason.starts_with("aborted") => {
                            first_err = Some(e)
                        }
                        _ => {}
                    }
                }
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        let mut it = oks.into_iter();
        Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
    }

    /// Global transcript: every message once, ordered by (round, from, to).
    pub fn transcript(&self) -> Transcript {
        Transcript::merge(self.sessions.iter().map(|s| s.transcript()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_way(me: PartyId) -> RoundPlan {
        RoundPlan::new()
            .send_from(me, PartyId::P0, PartyId::P1, "t", || vec![0; 8])
            .send_from(me, PartyId::P1, PartyId::P0, "t", || vec![1; 8])
    }

    #[test]
    fn parallel_messages_share_a_round() {
        let mut c = open_session(TransportKind::InProcess, 7, RingParams::default()).unwrap();
        assert!(c.transcript().is_empty());
        c.run(|s| s.exchange(two_way(s.id())).map(|_| ())).unwrap();
        assert_eq!(c.round(), 1);
        assert_eq!(measured_cost(&c.transcript(), None), MeasuredCost { rounds: 1, bytes: 16 });
        c.run(|s| s.exchange(two_way(s.id())).map(|_| ())).unwrap();
        assert_eq!(c.round(), 2);
        assert_eq!(measured_cost(&c.transcript(), None), MeasuredCost { rounds: 2, bytes: 32 });
    }

    #[test]
    fn payloads_arrive_in_order() {
        let mut c = open_session(TransportKind::InProcess, 1, RingParams::default()).unwrap();
        let got = c
            .run(|s| {
                let me = s.id();
                let mut out = Vec::new();
                for i in 0..5u8 {
                    let mut d = s.exchange(
                        RoundPlan::new().send_from(me, PartyId::P2, PartyId::P0, "seq", || vec![i]),
                    )?;
                    if me == PartyId::P0 {
                        out.push(d.take(PartyId::P2)?[0]);
                    }
                }
                Ok(out)
            })
            .unwrap();
        assert_eq!(got[0], vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn empty_plan_is_rejected() {
        let mut c = open_session(TransportKind::InProcess, 7, RingParams::default()).unwrap();
        let err = c.run(|s| s.exchange(RoundPlan::new()).map(|_| ())).unwrap_err();
        assert!(matches!(err, Error::ProtocolMisuse(_)));
        assert_eq!(c.round(), 0);
    }

    #[test]
    fn duplicate_edge_is_rejected() {
        let mut c = open_session(TransportKind::InProcess, 7, RingParams::default()).unwrap();
        let err = c
            .run(|s| {
                let me = s.id();
                s.exchange(
                    RoundPlan::new()
                        .send_from(me, PartyId::P0, PartyId::P1, "a", || vec![1])
                        .send_from(me, PartyId::P0, PartyId::P1, "b", || vec![2]),
                )
                .map(|_| ())
            })
            .unwrap_err();
        assert!(matches!(err, Error::ProtocolMisuse(m) if m.contains("twice")));
    }

    #[test]
    fn zero_shares_agree_between_p0_and_p1() {
        let mut c = open_session(TransportKind::InProcess, 3, RingParams::default()).unwrap();
        let [a, b, _] = c
            .run(|s| {
                if s.id().is_share_holder() {
                    s.zero_share(vec![4]).map(Some)
                } else {
                    Ok(None)
                }
            })
            .unwrap();
        let sum = a.unwrap().add(&b.unwrap()).unwrap();
        assert!(sum.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn same_seed_same_transcript() {
        let run = || {
            let mut c = open_session(TransportKind::InProcess, 11, RingParams::default()).unwrap();
            c.run(|s| {
                let me = s.id();
                let r = s.rng().ring_tensor(64, vec![3]).to_words();
                s.exchange(RoundPlan::new().send_from(me, PartyId::P2, PartyId::P1, "x", || r))
                    .map(|_| ())
            })
            .unwrap();
            c.transcript()
        };
        assert_eq!(run(), run());
    }
}
