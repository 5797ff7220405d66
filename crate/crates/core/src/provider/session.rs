use std::borrow::Cow;
use std::sync::Arc;

use log::debug;

use super::ledger::{LedgerEntry, RequestKind, SessionLedger, DEFAULT_RHO};
use super::store::ImageStore;
use super::wire::{Header, Message, MessageType};
use crate::error::{Error, Result};
use crate::raster::{
    crop_region, encode, resize_longest_edge, Encoding, EncodingKind, ImageBuffer, PixelRect,
};
use crate::{BBox, Frame};

/// Provider-side state of one connection. Messages are handled strictly in
/// order; every IMAGE_DATA reply is metered before it is returned.
pub struct Session {
    store: Arc<dyn ImageStore>,
    ledger: SessionLedger,
}

impl Session {
    pub fn new(store: Arc<dyn ImageStore>, rho: f64) -> Self {
        Self {
            store,
            ledger: SessionLedger::new(rho),
        }
    }

    pub fn with_default_rho(store: Arc<dyn ImageStore>) -> Self {
        Self::new(store, DEFAULT_RHO)
    }

    pub fn ledger(&self) -> &SessionLedger {
        &self.ledger
    }

    /// Encoded reply frame for `msg`. Failures become ERROR replies.
    pub fn respond(&mut self, msg: Message) -> Vec<u8> {
        let id = msg.header.id;
        let reply = match self.dispatch(msg) {
            Ok(Reply::Plain(m)) => m.to_bytes(),
            Ok(Reply::Image(m, entry)) => m.to_bytes().inspect(|bytes| {
                self.ledger.push(LedgerEntry {
                    wire_bytes: bytes.len() as u64,
                    ..entry
                });
            }),
            Err(e) => Err(e),
        };
        reply.unwrap_or_else(|e| {
            debug!("request {id} failed: {e}");
            error_reply(id, &e)
        })
    }

    fn dispatch(&mut self, msg: Message) -> Result<Reply> {
        let h = msg.header;
        match h.kind {
            MessageType::Hello => {
                if let Some(rho) = h.rho {
                    if !(rho.is_finite() && rho > 0.0) {
                        return Err(Error::Protocol(format!("rho must be positive, got {rho}")));
                    }
                    self.ledger.rho = rho;
                }
                let mut r = Header::new(MessageType::Hello, h.id);
                r.rho = Some(self.ledger.rho);
                r.count = Some(self.store.ids().len());
                Ok(Reply::Plain(Message::new(r)))
            }
            MessageType::List => {
                let ids = self.store.ids();
                let mut r = Header::new(MessageType::List, h.id);
                r.count = Some(ids.len());
                Ok(Reply::Plain(Message::with_payload(
                    r,
                    serde_json::to_vec(&ids)?,
                )))
            }
            MessageType::OverviewReq => self.serve_image(&h, None, RequestKind::Overview),
            MessageType::RegionReq => {
                let b = h
                    .bbox
                    .ok_or_else(|| Error::Protocol("REGION_REQ without box".into()))?;
                self.serve_image(&h, Some(b), RequestKind::Region)
            }
            MessageType::LedgerReq => {
                let part = self.ledger.since(h.since.unwrap_or(0));
                let mut r = Header::new(MessageType::LedgerData, h.id);
                r.count = Some(part.len());
                r.rho = Some(part.rho);
                Ok(Reply::Plain(Message::with_payload(
                    r,
                    serde_json::to_vec(&part)?,
                )))
            }
            other => Err(Error::Protocol(format!("{other:?} is not a request"))),
        }
    }

    fn serve_image(&mut self, h: &Header, bbox: Option<BBox>, kind: RequestKind) -> Result<Reply> {
        let image_id = h
            .image_id
            .as_deref()
            .ok_or_else(|| Error::Protocol("missing image_id".into()))?;
        let enc = Encoding::from_parts(h.encoding.unwrap_or(EncodingKind::Raw8), h.quality)?;
        if h.max_edge == Some(0) {
            return Err(Error::Protocol("max_edge must be positive".into()));
        }
        let full = self.store.load(image_id)?;
        let (src, rect): (Cow<ImageBuffer>, PixelRect) = match bbox {
            Some(b) => {
                let (c, r) = crop_region(&full, &b)?;
                (Cow::Owned(c), r)
            }
            None => (
                Cow::Borrowed(full.as_ref()),
                PixelRect {
                    x: 0,
                    y: 0,
                    w: full.width(),
                    h: full.height(),
                },
            ),
        };
        let out = match h.max_edge {
            Some(edge) => resize_longest_edge(&src, edge),
            None => Cow::Borrowed(src.as_ref()),
        };
        let scale = out.long_edge() as f64 / rect.w.max(rect.h) as f64;
        let frame = Frame::new(rect.x as f64, rect.y as f64, scale);
        let payload = encode(&out, enc)?;
        let stage = h.stage.clone().unwrap_or_else(|| match kind {
            RequestKind::Overview => "overview".into(),
            RequestKind::Region => "region".into(),
        });

        let mut r = Header::new(MessageType::ImageData, h.id);
        r.image_id = Some(image_id.to_string());
        r.width = Some(out.width());
        r.height = Some(out.height());
        r.encoding = Some(enc.kind());
        r.quality = enc.quality();
        r.frame = Some(frame);
        r.source_width = Some(full.width());
        r.source_height = Some(full.height());
        r.pixels = Some(out.pixel_count());
        r.stage = Some(stage.clone());
        let entry = LedgerEntry {
            stage,
            kind,
            image_id: image_id.to_string(),
            width: out.width(),
            height: out.height(),
            encoding: enc.kind(),
            pixels_sent: out.pixel_count(),
            payload_bytes: payload.len() as u64,
            wire_bytes: 0,
        };
        Ok(Reply::Image(Message::with_payload(r, payload), entry))
    }
}

enum Reply {
    Plain(Message),
    Image(Message, LedgerEntry),
}

pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::NotFound(_) => "not_found",
        Error::EmptyRegion => "empty_region",
        Error::Encode(_) => "encode_failed",
        Error::Protocol(_) | Error::Config(_) | Error::Json(_) => "bad_request",
        _ => "internal",
    }
}

pub fn error_reply(id: u64, e: &Error) -> Vec<u8> {
    let msg = match e {
        Error::NotFound(what) => format!("not found: {what}"),
        other => other.to_string(),
    };
    Message::error(id, error_code(e), msg)
        .to_bytes()
        .expect("error replies are small")
}
