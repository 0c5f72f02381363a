use std::io::Cursor;

use shadownet::protocols::{pi_relu, simulate};
use shadownet::ring::{Prg, RingParams};
use shadownet::transport::{measured_cost, open_session, PartyId, RoundPlan, Transcript, TransportKind};
use shadownet::Error;

fn ping_pong(kind: TransportKind, rounds: usize, size: usize) -> Transcript {
    let mut c = open_session(kind, 42, RingParams::default()).unwrap();
    c.run(|s| {
        let me = s.id();
        for r in 0..rounds {
            let plan = RoundPlan::new()
                .send_from(me, PartyId::P0, PartyId::P1, "ping", || vec![r as u8; size])
                .send_from(me, PartyId::P1, PartyId::P2, "pong", || vec![1; size + r])
                .send_from(me, PartyId::P2, PartyId::P0, "pong", || vec![2; 3]);
            let mut got = s.exchange(plan)?;
            match me {
                PartyId::P0 => assert_eq!(got.take(PartyId::P2)?, vec![2; 3]),
                PartyId::P1 => assert_eq!(got.take(PartyId::P0)?, vec![r as u8; size]),
                _ => assert_eq!(got.take(PartyId::P1)?.len(), size + r),
            }
        }
        Ok(())
    })
    .unwrap();
    c.transcript()
}

#[test]
fn tcp_and_in_process_transcripts_agree() {
    let a = ping_pong(TransportKind::InProcess, 5, 1 << 16);
    let b = ping_pong(TransportKind::TcpLoopback, 5, 1 << 16);
    assert_eq!(a, b);
    assert_eq!(a.records().len(), 15);
    assert_eq!(measured_cost(&a, None).rounds, 5);
    assert_eq!(measured_cost(&a, Some("pong")).rounds, 5);
    assert_eq!(a.edge_bytes(2, 0), 15);
}

#[test]
fn large_symmetric_payloads_do_not_deadlock() {
    let mut c = open_session(TransportKind::TcpLoopback, 1, RingParams::default()).unwrap();
    c.run(|s| {
        let me = s.id();
        let plan = RoundPlan::new()
            .send_from(me, PartyId::P0, PartyId::P1, "x", || vec![7; 8 << 20])
            .send_from(me, PartyId::P1, PartyId::P0, "x", || vec![9; 8 << 20]);
        let mut got = s.exchange(plan)?;
        if me.is_share_holder() {
            assert_eq!(got.take(me.peer())?.len(), 8 << 20);
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn protocol_transcripts_are_reproducible() {
    let p = RingParams::default();
    let x = Prg::from_u64(3).ring_tensor(64, vec![50]);
    let run = |kind| {
        simulate(kind, 9, p, &[x.clone()], |s, ins| Ok(vec![pi_relu(s, &ins[0])?]))
            .unwrap()
            .transcript
    };
    let a = run(TransportKind::InProcess);
    assert_eq!(a, run(TransportKind::InProcess));
    assert_eq!(a, run(TransportKind::TcpLoopback));
}

#[test]
fn jsonl_round_trip() {
    let t = ping_pong(TransportKind::InProcess, 3, 10);
    let mut buf = Vec::new();
    t.write_jsonl(&mut buf).unwrap();
    assert_eq!(Transcript::read_jsonl(Cursor::new(buf)).unwrap(), t);
}

#[test]
fn failing_party_aborts_the_others() {
    let mut c = open_session(TransportKind::InProcess, 1, RingParams::default()).unwrap();
    let e = c
        .run(|s| {
            if s.id() == PartyId::P2 {
                return Err(Error::ProtocolMisuse("bail".into()));
            }
            let me = s.id();
            s.exchange(RoundPlan::new().send_from(me, PartyId::P2, PartyId::P0, "x", || vec![1]))?;
            Ok(())
        })
        .unwrap_err();
    assert!(e.to_string().contains("bail"), "{e}");
}

#[test]
fn bad_party_id() {
    assert!(PartyId::new(3).is_err());
    assert_eq!(PartyId::new(1).unwrap(), PartyId::P1);
}
