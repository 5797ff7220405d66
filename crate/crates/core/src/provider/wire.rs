//! Length-prefixed framing: `[u32 BE length][u16 BE header_len][JSON header][payload]`
//! where `length = 2 + header_len + payload_len`.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::EncodingKind;
use crate::{BBox, Frame};

/// Largest accepted frame body; a native 4000×3000 RAW8 image is ~36 MB.
pub const MAX_FRAME_LEN: u32 = 256 << 20;
/// Bytes before the JSON header.
pub const PREFIX_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageType {
    Hello,
    List,
    OverviewReq,
    RegionReq,
    ImageData,
    LedgerReq,
    LedgerData,
    Error,
}

/// JSON header. Only `type` is required; other fields depend on the type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(default)]
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    /// Longest-edge budget; absent means native resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edge: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<EncodingKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    /// Maps the transmitted image onto the full-resolution source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub since: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Header {
    pub fn new(kind: MessageType, id: u64) -> Self {
        Self {
            kind,
            id,
            image_id: None,
            bbox: None,
            max_edge: None,
            encoding: None,
            quality: None,
            stage: None,
            rho: None,
            width: None,
            height: None,
            frame: None,
            source_width: None,
            source_height: None,
            pixels: None,
            since: None,
            count: None,
            code: None,
            message: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(header: Header) -> Self {
        Self {
            header,
            payload: Vec::new(),
        }
    }

    pub fn with_payload(header: Header, payload: Vec<u8>) -> Self {
        Self { header, payload }
    }

    pub fn error(id: u64, code: &str, message: impl Into<String>) -> Self {
        let mut h = Header::new(MessageType::Error, id);
        h.code = Some(code.into());
        h.message = Some(message.into());
        Self::new(h)
    }

    pub fn kind(&self) -> MessageType {
        self.header.kind
    }

    /// Serialized frame, prefix included.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        frame_bytes(&header, &self.payload)
    }
}

/// Frames raw header bytes and payload.
pub fn frame_bytes(header: &[u8], payload: &[u8]) -> Result<Vec<u8>> {
    let header_len = u16::try_from(header.len())
        .map_err(|_| Error::Protocol(format!("header of {} bytes exceeds 65535", header.len())))?;
    let length = 2 + header.len() as u64 + payload.len() as u64;
    if length > MAX_FRAME_LEN as u64 {
        return Err(Error::Protocol(format!(
            "frame of {length} bytes exceeds limit"
        )));
    }
    let mut out = Vec::with_capacity(4 + length as usize);
    out.extend_from_slice(&(length as u32).to_be_bytes());
    out.extend_from_slice(&header_len.to_be_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(payload);
    Ok(out)
}

/// A frame whose header has not been parsed yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub header: Vec<u8>,
    pub payload: Vec<u8>,
}

impl RawFrame {
    /// Size on the wire including the length prefix.
    pub fn wire_len(&self) -> usize {
        PREFIX_LEN + self.header.len() + self.payload.len()
    }

    pub fn parse(self) -> Result<Message> {
        let text = std::str::from_utf8(&self.header)
            .map_err(|e| Error::Protocol(format!("header is not UTF-8: {e}")))?;
        let header: Header =
            serde_json::from_str(text).map_err(|e| Error::Protocol(format!("bad header: {e}")))?;
        Ok(Message {
            header,
            payload: self.payload,
        })
    }

    /// Best-effort request id for error replies to unparseable headers.
    pub fn id_hint(&self) -> u64 {
        serde_json::from_slice::<serde_json::Value>(&self.header)
            .ok()
            .and_then(|v| v.get("id")?.as_u64())
            .unwrap_or(0)
    }
}

/// Why a frame could not be read.
#[derive(Debug)]
pub enum ReadError {
    /// The body was consumed but is inconsistent; the stream is still in sync.
    Malformed(String),
    /// The stream cannot be resynchronized.
    Fatal(Error),
}

/// Reads one frame. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> std::result::Result<Option<RawFrame>, ReadError> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(ReadError::Fatal(e.into())),
    }
    let length = u32::from_be_bytes(len_buf);
    if length > MAX_FRAME_LEN {
        return Err(ReadError::Fatal(Error::Protocol(format!(
            "frame length {length} exceeds limit"
        ))));
    }
    let mut body = vec![0u8; length as usize];
    r.read_exact(&mut body)
        .map_err(|e| ReadError::Fatal(e.into()))?;
    if body.len() < 2 {
        return Err(ReadError::Malformed(format!(
            "frame length {length} shorter than header length field"
        )));
    }
    let header_len = u16::from_be_bytes([body[0], body[1]]) as usize;
    if 2 + header_len > body.len() {
        return Err(ReadError::Malformed(format!(
            "header length {header_len} overruns frame of {length} bytes"
        )));
    }
    let payload = body.split_off(2 + header_len);
    body.drain(..2);
    Ok(Some(RawFrame {
        header: body,
        payload,
    }))
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<usize> {
    let bytes = msg.to_bytes()?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(bytes.len())
}
