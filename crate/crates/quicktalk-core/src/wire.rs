//! Payload codec for QuickTalk control broadcasts.
//!
//! The WiFi medium carries opaque byte payloads; this module defines the
//! small fixed-header messages the two protocol state machines exchange.
//! Background traffic (request/response sessions, download segments) is
//! deliberately opaque: only its length matters for airtime.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("payload empty")]
    Empty,
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("truncated {0} message")]
    Truncated(&'static str),
}

const TAG_BEACON: u8 = 1;
const TAG_ACK: u8 = 2;
const TAG_COMMAND: u8 = 3;
const TAG_RESPONSE: u8 = 4;

/// Response status byte.
pub const STATUS_OK: u8 = 0;
/// Response status byte for a command the device could not interpret.
pub const STATUS_ERROR: u8 = 1;

/// Control-plane message. `user_id` is the 24-bit IR-captured id; `device_id`
/// is the responding IoT device's id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// IoT -> user, repeated on the home channel until acknowledged.
    Beacon { user_id: u32, device_id: u32 },
    /// User -> IoT, stops the beacon loop.
    Ack { user_id: u32, device_id: u32 },
    /// User -> IoT application command.
    Command { txn_id: u32, user_id: u32, device_id: u32, body: Vec<u8> },
    /// IoT -> user reply, idempotent per `txn_id`.
    Response { txn_id: u32, user_id: u32, device_id: u32, status: u8, body: Vec<u8> },
}

fn put_u24(buf: &mut Vec<u8>, v: u32) {
    debug_assert!(v < 1 << 24);
    buf.extend_from_slice(&v.to_be_bytes()[1..]);
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.bytes.len() {
            return Err(WireError::Truncated(what));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u24(&mut self, what: &'static str) -> Result<u32, WireError> {
        let b = self.take(3, what)?;
        Ok(((b[0] as u32) << 16) | ((b[1] as u32) << 8) | b[2] as u32)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WireError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, WireError> {
        Ok(self.take(1, what)?[0])
    }

    fn rest(self) -> Vec<u8> {
        self.bytes[self.pos..].to_vec()
    }
}

impl Message {
    #[must_use]
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        match self {
            Message::Beacon { user_id, device_id } => {
                buf.push(TAG_BEACON);
                put_u24(&mut buf, *user_id);
                put_u32(&mut buf, *device_id);
            }
            Message::Ack { user_id, device_id } => {
                buf.push(TAG_ACK);
                put_u24(&mut buf, *user_id);
                put_u32(&mut buf, *device_id);
            }
            Message::Command { txn_id, user_id, device_id, body } => {
                buf.push(TAG_COMMAND);
                put_u32(&mut buf, *txn_id);
                put_u24(&mut buf, *user_id);
                put_u32(&mut buf, *device_id);
                buf.extend_from_slice(body);
            }
            Message::Response { txn_id, user_id, device_id, status, body } => {
                buf.push(TAG_RESPONSE);
                put_u32(&mut buf, *txn_id);
                put_u24(&mut buf, *user_id);
                put_u32(&mut buf, *device_id);
                buf.push(*status);
                buf.extend_from_slice(body);
            }
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
        let tag = *bytes.first().ok_or(WireError::Empty)?;
        let mut r = Reader { bytes, pos: 1 };
        match tag {
            TAG_BEACON => Ok(Message::Beacon {
                user_id: r.u24("beacon")?,
                device_id: r.u32("beacon")?,
            }),
            TAG_ACK => Ok(Message::Ack {
                user_id: r.u24("ack")?,
                device_id: r.u32("ack")?,
            }),
            TAG_COMMAND => Ok(Message::Command {
                txn_id: r.u32("command")?,
                user_id: r.u24("command")?,
                device_id: r.u32("command")?,
                body: r.rest(),
            }),
            TAG_RESPONSE => Ok(Message::Response {
                txn_id: r.u32("response")?,
                user_id: r.u24("response")?,
                device_id: r.u32("response")?,
                status: r.u8("response")?,
                body: r.rest(),
            }),
            other => Err(WireError::UnknownTag(other)),
        }
    }
}
