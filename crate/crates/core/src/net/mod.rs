//! Two-party overlap estimation: each party serves sample-and-query access
//! to the Pauli representation of its private state, and a coordinator runs
//! the real-exact estimator with every oracle call sent as a message.

pub mod frame;
mod coordinator;
mod party;

pub use coordinator::{coordinate_overlap, CoordinatorReport, RemoteHandle};
pub use party::{party_seed, serve, spawn_tcp_party, PartyEndpoint, Role, ServeStats};

use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use frame::{read_frame, write_frame, Frame, Message, ReadOutcome, MAX_ERROR_LEN};

use crate::error::{AsqError, Result};

/// A bidirectional frame pipe. Sends may be buffered; a transport flushes
/// pending output before it blocks on a receive.
pub trait Transport: Send {
    fn send(&mut self, frame: &Frame) -> Result<()>;
    fn recv(&mut self) -> Result<ReadOutcome>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        (**self).send(frame)
    }
    fn recv(&mut self) -> Result<ReadOutcome> {
        (**self).recv()
    }
}

/// In-process transport; frames go through the same byte codec as TCP.
pub struct ChannelTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Two connected in-process endpoints.
pub fn channel_pair() -> (ChannelTransport, ChannelTransport) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (ChannelTransport { tx: a_tx, rx: a_rx }, ChannelTransport { tx: b_tx, rx: b_rx })
}

impl Transport for ChannelTransport {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.tx.send(frame.encode()).map_err(|_| AsqError::SessionAbort("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<ReadOutcome> {
        match self.rx.recv() {
            Ok(bytes) => read_frame(&mut &bytes[..]),
            Err(_) => Ok(ReadOutcome::Eof),
        }
    }
}

/// Buffered TCP transport.
pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpTransport {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?)
    }

    pub fn from_stream(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self { reader: BufReader::with_capacity(1 << 16, stream.try_clone()?), writer: BufWriter::with_capacity(1 << 16, stream) })
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        write_frame(&mut self.writer, frame)
    }

    fn recv(&mut self) -> Result<ReadOutcome> {
        if self.reader.buffer().is_empty() {
            self.writer.flush()?;
        }
        read_frame(&mut self.reader)
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        let _ = self.writer.flush();
    }
}

/// Copies every frame that passes through into a shared transcript.
pub struct RecordingTransport<T> {
    inner: T,
    log: Arc<Mutex<Vec<Frame>>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> (Self, Arc<Mutex<Vec<Frame>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (Self { inner, log: log.clone() }, log)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.log.lock().expect("transcript lock").push(frame.clone());
        self.inner.send(frame)
    }

    fn recv(&mut self) -> Result<ReadOutcome> {
        let outcome = self.inner.recv()?;
        if let ReadOutcome::Frame(f) = &outcome {
            self.log.lock().expect("transcript lock").push(f.clone());
        }
        Ok(outcome)
    }
}

/// What a transcript reveals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranscriptReport {
    pub frames: usize,
    /// Largest payload (bytes after tag and session id) seen.
    pub max_payload_bytes: usize,
    /// Frames that carry more than an index, an estimate, a precision or a
    /// norm.
    pub violations: Vec<usize>,
}

/// Checks that every frame is one of the ASQ-surface messages with its fixed
/// small payload: at most one index, one (complex) estimate, one precision or
/// one norm — never a block of amplitudes.
pub fn analyze_transcript(frames: &[Frame]) -> TranscriptReport {
    let mut report = TranscriptReport { frames: frames.len(), ..Default::default() };
    for (i, f) in frames.iter().enumerate() {
        let payload = f.encode().len() - 13;
        report.max_payload_bytes = report.max_payload_bytes.max(payload);
        let allowed = match &f.message {
            Message::SampleReq | Message::OneNormReq | Message::Close => 0,
            Message::SampleResp { .. } => 9,
            Message::QueryReq { .. } | Message::QueryResp { .. } | Message::OneNormResp { .. } => 16,
            Message::NormReq { .. } | Message::NormResp { .. } => 8,
            Message::Error { .. } => 8 + MAX_ERROR_LEN,
        };
        let amplitude_like = matches!(&f.message, Message::Error { message, .. } if message.split(|c: char| !c.is_ascii_digit() && c != '.' && c != '-').filter(|t| t.parse::<f64>().is_ok() && t.contains('.')).count() > 2);
        if payload > allowed || amplitude_like {
            report.violations.push(i);
        }
    }
    report
}
