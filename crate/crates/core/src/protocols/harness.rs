//! Drive all three parties of a protocol inside one process, with inputs
//! shared up front (no transcript records) and outputs reconstructed.

use super::Secret;
use crate::error::{Error, Result};
use crate::ring::{reconstruct, share, Prg, RingParams, RingTensor};
use crate::transport::{open_session, PartyId, Session, Transcript, TransportKind};

/// Per-party handles on a fresh sharing of `x`, indexed by party.
pub fn pre_share(x: &RingTensor, rng: &mut Prg) -> [Secret; 3] {
    let (a, b) = share(x, rng);
    [
        Secret::from_share(a),
        Secret::from_share(b),
        Secret::shape_only(x.shape().to_vec()),
    ]
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub outputs: Vec<RingTensor>,
    pub transcript: Transcript,
    pub rounds: u64,
}

/// Share `inputs`, run `f` on every party and reconstruct what it returns.
pub fn simulate<F>(
    kind: TransportKind,
    seed: u64,
    params: RingParams,
    inputs: &[RingTensor],
    f: F,
) -> Result<Simulation>
where
    F: Fn(&mut Session, &[Secret]) -> Result<Vec<Secret>> + Sync,
{
    let mut rng = Prg::from_u64(seed ^ 0x5eed_1a9e);
    let mut per_party: [Vec<Secret>; 3] = Default::default();
    for x in inputs {
        if x.bits() != params.bits {
            return Err(Error::Params(format!(
                "input has {} bits, session uses {}",
                x.bits(),
                params.bits
            )));
        }
        for (slot, s) in per_party.iter_mut().zip(pre_share(x, &mut rng)) {
            slot.push(s);
        }
    }
    let mut cluster = open_session(kind, seed, params)?;
    let [out0, out1, _] = cluster.run(|s| f(s, &per_party[s.id().index()]))?;
    let outputs = out0
        .iter()
        .zip(&out1)
        .map(|(a, b)| {
            let (Some(a), Some(b)) = (a.share(), b.share()) else {
                return Err(Error::ProtocolMisuse(format!("{} returned no share", PartyId::P0)));
            };
            reconstruct(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        outputs,
        transcript: cluster.transcript(),
        rounds: cluster.round(),
    })
}
