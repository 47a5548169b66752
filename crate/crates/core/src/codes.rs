//! The 4-bit node alphabet and its lookup tables.
//!
//! Bit `i` of a [`NodeCode`] is set when the child reached by symbol `i`
//! exists. The textual form lists the symbols left to right, so `"1011"`
//! has children `0`, `2` and `3`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeCode(u8);

const SKIP: [[u8; 4]; 16] = {
    let mut t = [[0u8; 4]; 16];
    let mut c = 0;
    while c < 16 {
        let mut i = 0;
        while i < 4 {
            t[c][i] = ((c as u8) & ((1u8 << i) - 1)).count_ones() as u8;
            i += 1;
        }
        c += 1;
    }
    t
};

const UNARY: [NodeCode; 4] = [NodeCode(1), NodeCode(2), NodeCode(4), NodeCode(8)];

const WITH: [[NodeCode; 4]; 16] = {
    let mut t = [[NodeCode(0); 4]; 16];
    let mut c = 0;
    while c < 16 {
        let mut s = 0;
        while s < 4 {
            t[c][s] = NodeCode(c as u8 | (1 << s));
            s += 1;
        }
        c += 1;
    }
    t
};

impl NodeCode {
    pub const EMPTY: NodeCode = NodeCode(0);
    pub const FULL: NodeCode = NodeCode(0xF);

    /// Builds a code from its raw mask; only the low nibble is kept.
    #[inline]
    pub const fn from_mask(mask: u8) -> Self {
        NodeCode(mask & 0xF)
    }

    #[inline]
    pub const fn mask(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub const fn child_count(self) -> u8 {
        self.0.count_ones() as u8
    }

    #[inline]
    pub fn has_child(self, s: u8) -> bool {
        debug_assert!(s < 4);
        self.0 >> s & 1 == 1
    }

    /// Number of present children with a symbol smaller than `s`.
    #[inline]
    pub fn children_to_skip(self, s: u8) -> u8 {
        SKIP[self.0 as usize][s as usize]
    }

    #[inline]
    pub fn unary(s: u8) -> Self {
        UNARY[s as usize]
    }

    #[inline]
    pub fn with_child(self, s: u8) -> Self {
        WITH[self.0 as usize][s as usize]
    }

    /// Clears the bit of symbol `s`; the bit must be set.
    #[inline]
    pub fn without_child(self, s: u8) -> Self {
        debug_assert!(self.has_child(s), "clearing absent child {s} of {self}");
        NodeCode(self.0 & !(1 << s))
    }

    /// Present symbols in increasing order.
    pub fn symbols(self) -> impl Iterator<Item = u8> {
        (0..4u8).filter(move |&s| self.has_child(s))
    }
}

impl fmt::Display for NodeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..4 {
            f.write_str(if self.has_child(s) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for NodeCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let b = s.as_bytes();
        if b.len() != 4 {
            return Err(Error::Format(format!(
                "node code {s:?} is not 4 characters"
            )));
        }
        let mut mask = 0;
        for (i, ch) in b.iter().enumerate() {
            match ch {
                b'1' => mask |= 1 << i,
                b'0' => {}
                _ => {
                    return Err(Error::Format(format!(
                        "node code {s:?} has non-binary digit"
                    )))
                }
            }
        }
        Ok(NodeCode(mask))
    }
}

/// Space-separated textual form, e.g. `"1001 1110 0100"`.
pub fn render(codes: &[NodeCode]) -> String {
    let mut out = String::with_capacity(codes.len() * 5);
    for (i, c) in codes.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&c.to_string());
    }
    out
}

/// Parses the output of [`render`].
pub fn parse(text: &str) -> Result<Vec<NodeCode>> {
    text.split_whitespace().map(str::parse).collect()
}
