use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use super::ledger::SessionLedger;
use super::wire::{read_frame, write_frame, Header, Message, MessageType, ReadError};
use crate::error::{Error, Result};
use crate::raster::{decode, Encoding, ImageBuffer};
use crate::{BBox, Frame};

/// Byte-counting wrapper around a transport.
#[derive(Debug)]
pub struct Counted<S> {
    inner: S,
    read: u64,
    written: u64,
}

impl<S> Counted<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            read: 0,
            written: 0,
        }
    }

    pub fn bytes_read(&self) -> u64 {
        self.read
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }
}

impl<S: Read> Read for Counted<S> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.read += n as u64;
        Ok(n)
    }
}

impl<S: Write> Write for Counted<S> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// A received image and where it sits in the source.
#[derive(Debug, Clone)]
pub struct Received {
    pub image: ImageBuffer,
    /// Maps `image` coordinates onto the full-resolution source.
    pub frame: Frame,
    pub source_width: u32,
    pub source_height: u32,
    pub wire_bytes: u64,
}

/// Analyst-side connection to a provider.
pub struct Client<S> {
    stream: Counted<S>,
    next_id: u64,
    image_frame_bytes: u64,
    other_frame_bytes: u64,
    images_received: usize,
}

impl Client<TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self::new(stream))
    }
}

impl<S: Read + Write> Client<S> {
    pub fn new(stream: S) -> Self {
        Self {
            stream: Counted::new(stream),
            next_id: 1,
            image_frame_bytes: 0,
            other_frame_bytes: 0,
            images_received: 0,
        }
    }

    /// Raw bytes in both directions as seen on the transport.
    pub fn channel_bytes(&self) -> u64 {
        self.stream.bytes_read() + self.stream.bytes_written()
    }

    /// Bytes of IMAGE_DATA frames received.
    pub fn image_frame_bytes(&self) -> u64 {
        self.image_frame_bytes
    }

    /// IMAGE_DATA replies so far; equals the session ledger length.
    pub fn images_received(&self) -> usize {
        self.images_received
    }

    /// Bytes of every other frame, both directions.
    pub fn other_frame_bytes(&self) -> u64 {
        self.other_frame_bytes
    }

    /// Sends `header` (its id is assigned here) and waits for the reply.
    /// ERROR replies become [`Error::Remote`].
    pub fn request(&mut self, mut header: Header) -> Result<Message> {
        header.id = self.next_id;
        self.next_id += 1;
        let sent = write_frame(&mut self.stream, &Message::new(header.clone()))?;
        self.other_frame_bytes += sent as u64;
        let raw = match read_frame(&mut self.stream) {
            Ok(Some(raw)) => raw,
            Ok(None) => return Err(Error::Protocol("connection closed".into())),
            Err(ReadError::Malformed(m)) => return Err(Error::Protocol(m)),
            Err(ReadError::Fatal(e)) => return Err(e),
        };
        let len = raw.wire_len() as u64;
        let reply = raw.parse()?;
        if reply.kind() == MessageType::ImageData {
            self.image_frame_bytes += len;
            self.images_received += 1;
        } else {
            self.other_frame_bytes += len;
        }
        if reply.kind() == MessageType::Error {
            return Err(Error::Remote {
                code: reply.header.code.unwrap_or_default(),
                message: reply.header.message.unwrap_or_default(),
            });
        }
        if reply.header.id != header.id {
            return Err(Error::Protocol(format!(
                "reply id {} for request {}",
                reply.header.id, header.id
            )));
        }
        Ok(reply)
    }

    /// Returns the session's ρ and the number of images.
    pub fn hello(&mut self, rho: Option<f64>) -> Result<(f64, usize)> {
        let mut h = Header::new(MessageType::Hello, 0);
        h.rho = rho;
        let r = self.request(h)?;
        Ok((
            r.header.rho.unwrap_or_default(),
            r.header.count.unwrap_or_default(),
        ))
    }

    pub fn list(&mut self) -> Result<Vec<String>> {
        let r = self.request(Header::new(MessageType::List, 0))?;
        Ok(serde_json::from_slice(&r.payload)?)
    }

    pub fn overview(
        &mut self,
        image_id: &str,
        max_edge: Option<u32>,
        enc: Encoding,
        stage: &str,
    ) -> Result<Received> {
        let mut h = image_request(MessageType::OverviewReq, image_id, max_edge, enc, stage);
        h.bbox = None;
        self.fetch_image(h)
    }

    pub fn region(
        &mut self,
        image_id: &str,
        bbox: &BBox,
        max_edge: Option<u32>,
        enc: Encoding,
        stage: &str,
    ) -> Result<Received> {
        let mut h = image_request(MessageType::RegionReq, image_id, max_edge, enc, stage);
        h.bbox = Some(*bbox);
        self.fetch_image(h)
    }

    /// Ledger entries recorded from index `since` on.
    pub fn ledger(&mut self, since: usize) -> Result<SessionLedger> {
        let mut h = Header::new(MessageType::LedgerReq, 0);
        h.since = Some(since);
        let r = self.request(h)?;
        if r.kind() != MessageType::LedgerData {
            return Err(Error::Protocol(format!(
                "expected LEDGER_DATA, got {:?}",
                r.kind()
            )));
        }
        Ok(serde_json::from_slice(&r.payload)?)
    }

    fn fetch_image(&mut self, h: Header) -> Result<Received> {
        let before = self.image_frame_bytes;
        let r = self.request(h)?;
        if r.kind() != MessageType::ImageData {
            return Err(Error::Protocol(format!(
                "expected IMAGE_DATA, got {:?}",
                r.kind()
            )));
        }
        let missing = |f: &str| Error::Protocol(format!("IMAGE_DATA without {f}"));
        let kind = r.header.encoding.ok_or_else(|| missing("encoding"))?;
        let image = decode(&r.payload, kind)?;
        if Some(image.width()) != r.header.width || Some(image.height()) != r.header.height {
            return Err(Error::Protocol("decoded size disagrees with header".into()));
        }
        Ok(Received {
            image,
            frame: r.header.frame.ok_or_else(|| missing("frame"))?,
            source_width: r
                .header
                .source_width
                .ok_or_else(|| missing("source_width"))?,
            source_height: r
                .header
                .source_height
                .ok_or_else(|| missing("source_height"))?,
            wire_bytes: self.image_frame_bytes - before,
        })
    }
}

fn image_request(
    kind: MessageType,
    image_id: &str,
    max_edge: Option<u32>,
    enc: Encoding,
    stage: &str,
) -> Header {
    let mut h = Header::new(kind, 0);
    h.image_id = Some(image_id.to_string());
    h.max_edge = max_edge;
    h.encoding = Some(enc.kind());
    h.quality = enc.quality();
    h.stage = Some(stage.to_string());
    h
}
