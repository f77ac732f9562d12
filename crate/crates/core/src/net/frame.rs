//! Length-prefixed binary frames: `u32` LE length of the rest, `u8` tag,
//! `u64` LE session id, then the payload fields in order (`f64` as IEEE-754
//! LE).

use std::io::{ErrorKind, Read, Write};

use crate::error::{AsqError, Result};

pub const SAMPLE_REQ: u8 = 1;
pub const SAMPLE_RESP: u8 = 2;
pub const QUERY_REQ: u8 = 3;
pub const QUERY_RESP: u8 = 4;
pub const NORM_REQ: u8 = 5;
pub const NORM_RESP: u8 = 6;
pub const ERROR: u8 = 7;
/// Asks a party for `‖π‖₁` of its own state and the vector dimension.
pub const ONE_NORM_REQ: u8 = 8;
pub const ONE_NORM_RESP: u8 = 9;
/// Ends a session.
pub const CLOSE: u8 = 10;

/// Upper bound on the length field; anything larger is malformed.
pub const MAX_FRAME_LEN: u32 = 1 << 16;

/// Longest error message a party sends.
pub const MAX_ERROR_LEN: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    SampleReq,
    /// A failed attempt carries index 0, which consumers ignore.
    SampleResp { success: bool, index: u64 },
    QueryReq { index: u64, eps: f64 },
    QueryResp { re: f64, im: f64 },
    NormReq { eps: f64 },
    NormResp { value: f64 },
    Error { code: u32, message: String },
    OneNormReq,
    OneNormResp { value: f64, dim: u64 },
    Close,
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::SampleReq => SAMPLE_REQ,
            Message::SampleResp { .. } => SAMPLE_RESP,
            Message::QueryReq { .. } => QUERY_REQ,
            Message::QueryResp { .. } => QUERY_RESP,
            Message::NormReq { .. } => NORM_REQ,
            Message::NormResp { .. } => NORM_RESP,
            Message::Error { .. } => ERROR,
            Message::OneNormReq => ONE_NORM_REQ,
            Message::OneNormResp { .. } => ONE_NORM_RESP,
            Message::Close => CLOSE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub session: u64,
    pub message: Message,
}

impl Frame {
    pub fn new(session: u64, message: Message) -> Self {
        Self { session, message }
    }

    /// Full wire form, length prefix included.
    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::with_capacity(32);
        body.push(self.message.tag());
        body.extend_from_slice(&self.session.to_le_bytes());
        match &self.message {
            Message::SampleReq | Message::OneNormReq | Message::Close => {}
            Message::SampleResp { success, index } => {
                body.push(*success as u8);
                body.extend_from_slice(&(if *success { *index } else { 0 }).to_le_bytes());
            }
            Message::QueryReq { index, eps } => {
                body.extend_from_slice(&index.to_le_bytes());
                body.extend_from_slice(&eps.to_le_bytes());
            }
            Message::QueryResp { re, im } => {
                body.extend_from_slice(&re.to_le_bytes());
                body.extend_from_slice(&im.to_le_bytes());
            }
            Message::NormReq { eps } => body.extend_from_slice(&eps.to_le_bytes()),
            Message::NormResp { value } => body.extend_from_slice(&value.to_le_bytes()),
            Message::Error { code, message } => {
                let text = truncate(message, MAX_ERROR_LEN);
                body.extend_from_slice(&code.to_le_bytes());
                body.extend_from_slice(&(text.len() as u32).to_le_bytes());
                body.extend_from_slice(text.as_bytes());
            }
            Message::OneNormResp { value, dim } => {
                body.extend_from_slice(&value.to_le_bytes());
                body.extend_from_slice(&dim.to_le_bytes());
            }
        }
        let mut out = Vec::with_capacity(body.len() + 4);
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Decodes a frame body (everything after the length prefix).
    pub fn decode(body: &[u8]) -> Result<Self> {
        let mut r = Cursor { buf: body, pos: 0 };
        let tag = r.u8()?;
        let session = r.u64()?;
        let message = match tag {
            SAMPLE_REQ => Message::SampleReq,
            SAMPLE_RESP => {
                let success = match r.u8()? {
                    0 => false,
                    1 => true,
                    other => return Err(AsqError::MalformedFrame(format!("success flag {other}"))),
                };
                let index = r.u64()?;
                Message::SampleResp { success, index: if success { index } else { 0 } }
            }
            QUERY_REQ => Message::QueryReq { index: r.u64()?, eps: r.f64()? },
            QUERY_RESP => Message::QueryResp { re: r.f64()?, im: r.f64()? },
            NORM_REQ => Message::NormReq { eps: r.f64()? },
            NORM_RESP => Message::NormResp { value: r.f64()? },
            ERROR => {
                let code = r.u32()?;
                let len = r.u32()? as usize;
                if len > MAX_ERROR_LEN {
                    return Err(AsqError::MalformedFrame(format!("error text of {len} bytes")));
                }
                let bytes = r.take(len)?;
                let message = String::from_utf8(bytes.to_vec()).map_err(|_| AsqError::MalformedFrame("error text is not UTF-8".into()))?;
                Message::Error { code, message }
            }
            ONE_NORM_REQ => Message::OneNormReq,
            ONE_NORM_RESP => Message::OneNormResp { value: r.f64()?, dim: r.u64()? },
            CLOSE => Message::Close,
            other => return Err(AsqError::MalformedFrame(format!("unknown tag {other}"))),
        };
        if r.pos != body.len() {
            return Err(AsqError::MalformedFrame(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Frame { session, message })
    }
}

fn truncate(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut end = max;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    &text[..end]
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| AsqError::MalformedFrame("truncated payload".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Outcome of reading one frame from a byte stream.
#[derive(Debug)]
pub enum ReadOutcome {
    Frame(Frame),
    /// Clean end of stream before a length prefix.
    Eof,
    /// Framing was intact but the body did not decode; the stream stays
    /// usable.
    Malformed(AsqError),
}

/// Reads one frame. I/O failures and oversized length fields are errors,
/// since the stream position is lost.
pub fn read_frame<R: Read>(r: &mut R) -> Result<ReadOutcome> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(ReadOutcome::Eof),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME_LEN {
        return Err(AsqError::MalformedFrame(format!("frame length {len} exceeds {MAX_FRAME_LEN}")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(match Frame::decode(&body) {
        Ok(f) => ReadOutcome::Frame(f),
        Err(e) => ReadOutcome::Malformed(e),
    })
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    w.write_all(&frame.encode())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_variants(index: u64, x: f64) -> Vec<Message> {
        vec![
            Message::SampleReq,
            Message::SampleResp { success: true, index },
            Message::SampleResp { success: false, index: 0 },
            Message::QueryReq { index, eps: x },
            Message::QueryResp { re: x, im: -x },
            Message::NormReq { eps: x },
            Message::NormResp { value: x },
            Message::Error { code: 3, message: "bad index".into() },
            Message::OneNormReq,
            Message::OneNormResp { value: x, dim: index },
            Message::Close,
        ]
    }

    #[test]
    fn boundary_round_trip() {
        let n = 10;
        let top = (1u64 << (2 * n)) - 1;
        for m in all_variants(top, 1.0) {
            let f = Frame::new(u64::MAX, m);
            let bytes = f.encode();
            assert_eq!(u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize, bytes.len() - 4);
            match read_frame(&mut &bytes[..]).unwrap() {
                ReadOutcome::Frame(g) => assert_eq!(g, f),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn known_layout() {
        let bytes = Frame::new(7, Message::QueryReq { index: 5, eps: 1.0 }).encode();
        let mut expected = vec![25, 0, 0, 0, QUERY_REQ];
        expected.extend_from_slice(&7u64.to_le_bytes());
        expected.extend_from_slice(&5u64.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn failed_sample_carries_zero_index() {
        let bytes = Frame::new(1, Message::SampleResp { success: false, index: 42 }).encode();
        assert_eq!(&bytes[14..], &0u64.to_le_bytes());
    }

    #[test]
    fn malformed_bodies() {
        assert!(Frame::decode(&[99, 0, 0, 0, 0, 0, 0, 0, 0]).is_err());
        assert!(Frame::decode(&[QUERY_REQ, 0, 0]).is_err());
        let mut extra = Frame::new(0, Message::Close).encode()[4..].to_vec();
        extra.push(0);
        assert!(Frame::decode(&extra).is_err());
        let huge = (MAX_FRAME_LEN + 1).to_le_bytes();
        assert!(read_frame(&mut &huge[..]).is_err());
        assert!(matches!(read_frame(&mut &[][..]).unwrap(), ReadOutcome::Eof));
    }

    proptest! {
        #[test]
        fn round_trip(session: u64, index: u64, x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            for m in all_variants(index, x) {
                let f = Frame::new(session, m);
                prop_assert_eq!(Frame::decode(&f.encode()[4..]).unwrap(), f);
            }
        }
    }
}
