use std::net::TcpListener;
use std::str::FromStr;
use std::sync::Arc;
use std::thread::JoinHandle;

use super::frame::{Frame, Message, ReadOutcome};
use super::{TcpTransport, Transport};
use crate::access::{AccessHandle, SampleOutcome};
use crate::error::{AsqError, Result};
use crate::numeric::{derive_seed, DenseVector};
use crate::pauli::{pauli_representation, ExactPauliSampler, PauliRepresentation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Alice,
    Bob,
}

impl FromStr for Role {
    type Err = AsqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alice" => Ok(Role::Alice),
            "bob" => Ok(Role::Bob),
            other => Err(AsqError::InvalidParameter(format!("role must be alice or bob, got {other}"))),
        }
    }
}

/// A party's sampler seed derived from an experiment's root seed.
pub fn party_seed(root: u64, role: Role) -> u64 {
    derive_seed(root, if role == Role::Alice { 1 } else { 2 })
}

/// One party: a private state, seen by others only through its Pauli
/// sampler. Session `s` uses a sampler seeded with `derive_seed(seed, s)`.
pub struct PartyEndpoint {
    pub role: Role,
    pi: Arc<PauliRepresentation>,
    seed: u64,
}

impl PartyEndpoint {
    pub fn new(role: Role, state: &DenseVector, seed: u64) -> Result<Self> {
        Ok(Self { role, pi: Arc::new(pauli_representation(state)?), seed })
    }

    pub fn representation(&self) -> &PauliRepresentation {
        &self.pi
    }

    /// The sampler serving `session`.
    pub fn session_sampler(&self, session: u64) -> ExactPauliSampler {
        ExactPauliSampler::shared(self.pi.clone(), derive_seed(self.seed, session))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub sessions: u64,
    pub requests: u64,
    pub errors: u64,
}

const CODE_MALFORMED: u32 = 1;
const CODE_REQUEST: u32 = 2;

/// Answers requests until the peer sends CLOSE.
///
/// Malformed frames get an ERROR reply and the session continues; losing the
/// transport aborts the session.
pub fn serve<T: Transport + ?Sized>(party: &PartyEndpoint, transport: &mut T) -> Result<ServeStats> {
    let mut stats = ServeStats::default();
    let mut current: Option<(u64, ExactPauliSampler)> = None;
    loop {
        let frame = match transport.recv() {
            Ok(ReadOutcome::Frame(f)) => f,
            Ok(ReadOutcome::Malformed(e)) => {
                stats.errors += 1;
                reply(transport, 0, Message::Error { code: CODE_MALFORMED, message: e.to_string() })?;
                continue;
            }
            Ok(ReadOutcome::Eof) => return Err(AsqError::SessionAbort("peer closed the connection without CLOSE".into())),
            Err(e) => return Err(AsqError::SessionAbort(e.to_string())),
        };
        let session = frame.session;
        if current.as_ref().map(|(s, _)| *s) != Some(session) {
            current = Some((session, party.session_sampler(session)));
            stats.sessions += 1;
        }
        let sampler = &mut current.as_mut().expect("session set").1;
        let response = match frame.message {
            Message::Close => return Ok(stats),
            Message::SampleReq => sampler.sample().map(|o| match o {
                SampleOutcome::Index(i) => Message::SampleResp { success: true, index: i as u64 },
                SampleOutcome::Failed => Message::SampleResp { success: false, index: 0 },
            }),
            Message::QueryReq { index, eps } => sampler.query(index as usize, eps).map(|q| Message::QueryResp { re: q.value.re, im: q.value.im }),
            Message::NormReq { eps } => sampler.norm_sq(eps).map(|value| Message::NormResp { value }),
            Message::OneNormReq => Ok(Message::OneNormResp { value: party.pi.one_norm(), dim: party.pi.values().len() as u64 }),
            other => Err(AsqError::InvalidParameter(format!("unexpected message with tag {}", other.tag()))),
        };
        stats.requests += 1;
        let message = response.unwrap_or_else(|e| {
            stats.errors += 1;
            Message::Error { code: CODE_REQUEST, message: e.to_string() }
        });
        reply(transport, session, message)?;
    }
}

fn reply<T: Transport + ?Sized>(transport: &mut T, session: u64, message: Message) -> Result<()> {
    transport.send(&Frame::new(session, message)).map_err(|e| AsqError::SessionAbort(e.to_string()))
}

/// Serves connections on `listener`, one thread per connection, stopping
/// after `sessions` connections (or never, if `None`). The join handle yields
/// the summed statistics; a session that aborts does not stop the others.
pub fn spawn_tcp_party(party: Arc<PartyEndpoint>, listener: TcpListener, sessions: Option<u64>) -> JoinHandle<Result<ServeStats>> {
    std::thread::spawn(move || {
        let mut workers = Vec::new();
        let mut accepted = 0;
        while sessions.is_none_or(|s| accepted < s) {
            let (stream, _) = listener.accept()?;
            accepted += 1;
            let party = party.clone();
            workers.push(std::thread::spawn(move || -> Result<ServeStats> {
                let mut transport = TcpTransport::from_stream(stream)?;
                serve(&party, &mut transport)
            }));
        }
        let mut total = ServeStats::default();
        for w in workers {
            if let Ok(Ok(s)) = w.join() {
                total.sessions += s.sessions;
                total.requests += s.requests;
                total.errors += s.errors;
            }
        }
        Ok(total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::channel_pair;
    use crate::pauli::PauliIndex;

    fn recv_frame<T: Transport>(t: &mut T) -> Frame {
        match t.recv().unwrap() {
            ReadOutcome::Frame(f) => f,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serves_sample_query_norm_and_errors() {
        let n = 3;
        let party = Arc::new(PartyEndpoint::new(Role::Alice, &DenseVector::basis(8, 0).unwrap(), 9).unwrap());
        let (mut client, mut server) = channel_pair();
        let p = party.clone();
        let worker = std::thread::spawn(move || serve(&p, &mut server));

        client.send(&Frame::new(4, Message::SampleReq)).unwrap();
        match recv_frame(&mut client).message {
            Message::SampleResp { success: true, index } => assert_eq!(PauliIndex { n, bits: index }.masks().0, 0),
            other => panic!("{other:?}"),
        }
        client.send(&Frame::new(4, Message::QueryReq { index: 0, eps: 0.1 })).unwrap();
        match recv_frame(&mut client).message {
            Message::QueryResp { re, .. } => assert!((re - 1.0 / 8f64.sqrt()).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        client.send(&Frame::new(4, Message::NormReq { eps: 0.1 })).unwrap();
        assert_eq!(recv_frame(&mut client).message, Message::NormResp { value: 1.0 });
        client.send(&Frame::new(4, Message::QueryReq { index: 64, eps: 0.1 })).unwrap();
        assert!(matches!(recv_frame(&mut client).message, Message::Error { code: CODE_REQUEST, .. }));
        // A frame with an unknown tag: error reply, session continues.
        let mut bad = Frame::new(4, Message::Close).encode();
        bad[4] = 200;
        client.tx.send(bad).unwrap();
        assert!(matches!(recv_frame(&mut client).message, Message::Error { code: CODE_MALFORMED, .. }));
        client.send(&Frame::new(4, Message::Close)).unwrap();
        let stats = worker.join().unwrap().unwrap();
        assert_eq!(stats.requests, 4);
        assert_eq!(stats.errors, 2);
    }

    #[test]
    fn transport_loss_aborts() {
        let party = PartyEndpoint::new(Role::Bob, &DenseVector::basis(2, 0).unwrap(), 1).unwrap();
        let (client, mut server) = channel_pair();
        drop(client);
        assert!(matches!(serve(&party, &mut server), Err(AsqError::SessionAbort(_))));
    }
}
