//! Levelwise code streams in text and packed binary form.
//!
//! The packed form is a 16-byte little-endian header followed by two codes
//! per byte:
//!
//! | bytes  | field                 |
//! |--------|-----------------------|
//! | 0..4   | magic `K2T1`          |
//! | 4..8   | grid side (`u32`)     |
//! | 8..12  | point count (`u32`)   |
//! | 12..16 | code count (`u32`)    |
//!
//! Code `i` occupies the low nibble of byte `i / 2` when `i` is even and the
//! high nibble otherwise. A nibble holds the code mask, bit `s` standing for
//! child `s`. An odd count leaves the last high nibble zero.

use crate::codes::NodeCode;
use crate::error::{Error, Result};
use crate::morton::GridShape;

pub const MAGIC: [u8; 4] = *b"K2T1";
pub const HEADER_LEN: usize = 16;

/// A decoded packed stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedStream {
    pub shape: GridShape,
    pub points: u64,
    pub codes: Vec<NodeCode>,
}

fn field(name: &str, v: u64) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Format(format!("{name} {v} does not fit the header")))
}

pub fn encode_packed(shape: GridShape, points: u64, codes: &[NodeCode]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + codes.len().div_ceil(2));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&field("side", shape.side())?);
    out.extend_from_slice(&field("point count", points)?);
    out.extend_from_slice(&field("code count", codes.len() as u64)?);
    for pair in codes.chunks(2) {
        let lo = pair[0].mask();
        let hi = pair.get(1).map_or(0, |c| c.mask());
        out.push(lo | hi << 4);
    }
    Ok(out)
}

pub fn decode_packed(bytes: &[u8]) -> Result<PackedStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let shape = GridShape::new(u64::from(word(4)))?;
    let points = u64::from(word(8));
    let count = word(12) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count.div_ceil(2) {
        return Err(Error::Format(format!(
            "{count} codes need {} payload bytes, found {}",
            count.div_ceil(2),
            body.len()
        )));
    }
    if count % 2 == 1 && body[body.len() - 1] >> 4 != 0 {
        return Err(Error::Format("nonzero padding nibble".into()));
    }
    let codes = (0..count)
        .map(|i| NodeCode::from_mask(body[i / 2] >> (4 * (i % 2))))
        .collect();
    Ok(PackedStream {
        shape,
        points,
        codes,
    })
}
