use num_complex::Complex64;

use super::frame::{Frame, Message, ReadOutcome};
use super::Transport;
use crate::access::{check_eps, check_index, AccessHandle, EstimatorReport, QueryResult, SampleOutcome};
use crate::error::{AsqError, Result};
use crate::estimators::{inner_product_real_exact, InnerProductConfig, Mode};
use crate::ledger::CostLedger;

/// Sample-and-query access to a remote party's Pauli sampler. Every oracle
/// call is one request frame; retries after a failed sample are new
/// requests.
pub struct RemoteHandle<T: Transport> {
    transport: T,
    session: u64,
    dim: usize,
    one_norm: f64,
    ledger: CostLedger,
    messages: u64,
}

fn abort(e: AsqError) -> AsqError {
    match e {
        AsqError::Io(m) => AsqError::SessionAbort(m),
        other => other,
    }
}

impl<T: Transport> RemoteHandle<T> {
    /// Opens a session and learns the party's dimension and `‖π‖₁`.
    pub fn open(transport: T, session: u64) -> Result<Self> {
        let mut h = Self { transport, session, dim: 0, one_norm: 0.0, ledger: CostLedger::new(), messages: 0 };
        h.send(Message::OneNormReq)?;
        match h.receive()? {
            Message::OneNormResp { value, dim } => {
                h.dim = dim as usize;
                h.one_norm = value;
                Ok(h)
            }
            other => Err(unexpected(&other)),
        }
    }

    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    /// Oracle requests sent so far (samples, queries and norms).
    pub fn messages(&self) -> u64 {
        self.messages
    }

    /// Ends the session and returns the transport.
    pub fn close(mut self) -> Result<T> {
        self.send(Message::Close)?;
        Ok(self.transport)
    }

    fn send(&mut self, message: Message) -> Result<()> {
        self.transport.send(&Frame::new(self.session, message)).map_err(abort)
    }

    fn receive(&mut self) -> Result<Message> {
        match self.transport.recv().map_err(abort)? {
            ReadOutcome::Frame(Frame { message: Message::Error { code, message }, .. }) => Err(AsqError::Remote { code, message }),
            ReadOutcome::Frame(f) if f.session != self.session => {
                Err(AsqError::SessionAbort(format!("reply for session {} in session {}", f.session, self.session)))
            }
            ReadOutcome::Frame(f) => Ok(f.message),
            ReadOutcome::Eof => Err(AsqError::SessionAbort("party hung up".into())),
            ReadOutcome::Malformed(e) => Err(e),
        }
    }

    fn receive_value(&mut self) -> Result<Complex64> {
        match self.receive()? {
            Message::QueryResp { re, im } => Ok(Complex64::new(re, im)),
            other => Err(unexpected(&other)),
        }
    }
}

fn unexpected(m: &Message) -> AsqError {
    AsqError::SessionAbort(format!("unexpected reply with tag {}", m.tag()))
}

impl<T: Transport> AccessHandle for RemoteHandle<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn phi(&self) -> f64 {
        1.0
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        self.send(Message::SampleReq)?;
        self.messages += 1;
        match self.receive()? {
            Message::SampleResp { success, index } => {
                self.ledger.record_sample(success);
                Ok(if success { SampleOutcome::Index(index as usize) } else { SampleOutcome::Failed })
            }
            other => Err(unexpected(&other)),
        }
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        check_eps(eps)?;
        check_index(index, self.dim)?;
        self.send(Message::QueryReq { index: index as u64, eps })?;
        self.messages += 1;
        let value = self.receive_value()?;
        self.ledger.record_queries(eps, 1);
        Ok(QueryResult { value, requested_eps: eps })
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        self.send(Message::NormReq { eps })?;
        self.messages += 1;
        match self.receive()? {
            Message::NormResp { value } => {
                self.ledger.record_norms(eps, 1);
                Ok(value)
            }
            other => Err(unexpected(&other)),
        }
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Pipelined: all requests go out before the first reply is read.
    fn query_batch(&mut self, index: usize, eps: f64, reps: u64) -> Result<Vec<Complex64>> {
        check_eps(eps)?;
        check_index(index, self.dim)?;
        for _ in 0..reps {
            self.send(Message::QueryReq { index: index as u64, eps })?;
        }
        self.messages += reps;
        let values = (0..reps).map(|_| self.receive_value()).collect::<Result<Vec<_>>>()?;
        self.ledger.record_queries(eps, reps);
        Ok(values)
    }
}

/// Result of a two-party session.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinatorReport {
    pub report: EstimatorReport,
    /// `max(‖π_ψ‖₁, ‖π_φ‖₁)` as reported by the parties.
    pub kappa: f64,
    /// Oracle requests sent to Alice and Bob.
    pub messages: (u64, u64),
}

/// Estimates `|⟨ψ|φ⟩|²` with Alice and Bob serving over `alice` and `bob`.
/// `seed` drives the mixture coin; with the parties seeded as in
/// [`crate::pauli::OverlapSeeds`] the result equals the local driver's bit for
/// bit.
pub fn coordinate_overlap<A: Transport, B: Transport>(alice: A, bob: B, eps: f64, session: u64, seed: u64) -> Result<CoordinatorReport> {
    let mut ha = RemoteHandle::open(alice, session)?;
    let mut hb = RemoteHandle::open(bob, session)?;
    if ha.dim() != hb.dim() {
        return Err(AsqError::DimensionMismatch { expected: ha.dim(), got: hb.dim() });
    }
    let kappa = ha.one_norm().max(hb.one_norm());
    let cfg = InnerProductConfig::new(eps, Mode::RealExact)?;
    let report = inner_product_real_exact(&mut ha, &mut hb, &cfg, kappa, seed)?.report;
    let messages = (ha.messages(), hb.messages());
    ha.close()?;
    hb.close()?;
    Ok(CoordinatorReport { report, kappa, messages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{analyze_transcript, channel_pair, serve, PartyEndpoint, RecordingTransport, Role};
    use crate::numeric::{seeded_rng, DenseVector};
    use crate::pauli::states::low_magic_pair;
    use crate::pauli::{distributed_overlap, OverlapSeeds};
    use std::sync::Arc;

    fn run_pair(psi: &DenseVector, phi: &DenseVector, root: u64, session: u64, eps: f64) -> (CoordinatorReport, EstimatorReport, Vec<Frame>) {
        let alice = Arc::new(PartyEndpoint::new(Role::Alice, psi, crate::net::party_seed(root, Role::Alice)).unwrap());
        let bob = Arc::new(PartyEndpoint::new(Role::Bob, phi, crate::net::party_seed(root, Role::Bob)).unwrap());
        let (ca, mut sa) = channel_pair();
        let (cb, mut sb) = channel_pair();
        let (ca, log) = RecordingTransport::new(ca);
        let wa = {
            let a = alice.clone();
            std::thread::spawn(move || serve(&a, &mut sa))
        };
        let wb = {
            let b = bob.clone();
            std::thread::spawn(move || serve(&b, &mut sb))
        };
        let seeds = OverlapSeeds::for_session(root, session);
        let remote = coordinate_overlap(ca, cb, eps, session, seeds.coordinator).unwrap();
        wa.join().unwrap().unwrap();
        wb.join().unwrap().unwrap();
        let local = distributed_overlap(psi, phi, eps, seeds).unwrap();
        let frames = log.lock().unwrap().clone();
        (remote, local, frames)
    }

    #[test]
    fn transport_transparency_and_privacy() {
        let mut rng = seeded_rng(3);
        let (psi, phi) = low_magic_pair(3, &mut rng);
        let (remote, local, frames) = run_pair(&psi, &phi, 17, 5, 0.3);
        assert_eq!(remote.report.estimate, local.estimate);
        assert_eq!(remote.report.ledger.sample_calls, local.ledger.sample_calls);
        assert_eq!(remote.report.ledger.queries(), local.ledger.queries());
        let (ma, mb) = remote.messages;
        assert_eq!(ma + mb, local.ledger.sample_calls + local.ledger.total_queries() + local.ledger.total_norms());
        let analysis = analyze_transcript(&frames);
        assert!(analysis.violations.is_empty());
        assert!(analysis.max_payload_bytes <= 16);
    }

    #[test]
    fn same_state_and_orthogonal_states() {
        let zero = DenseVector::basis(16, 0).unwrap();
        let one = DenseVector::basis(16, 1).unwrap();
        let (same, _, _) = run_pair(&zero, &zero, 1, 0, 0.1);
        assert!((same.report.estimate.re - 1.0).abs() <= 0.1);
        let (orth, _, _) = run_pair(&zero, &one, 2, 0, 0.1);
        assert!(orth.report.estimate.re.abs() <= 0.1);
    }
}
