//! Nibble-packed array of node codes, sixteen codes per `u64` word.
//!
//! Code `i` lives in bits `4*(i%16) .. 4*(i%16)+4` of word `i/16`. Insertion
//! and removal shift the tail a word at a time.

use crate::codes::NodeCode;

const NIBBLES_PER_WORD: usize = 16;

#[derive(Clone, Default, PartialEq, Eq)]
pub struct PackedCodes {
    words: Vec<u64>,
    len: usize,
}

impl std::fmt::Debug for PackedCodes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.iter().map(|c| c.to_string()))
            .finish()
    }
}

#[inline]
fn words_for(nodes: usize) -> usize {
    nodes.div_ceil(NIBBLES_PER_WORD)
}

#[inline]
fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        !0
    } else {
        (1u64 << bits) - 1
    }
}

impl PackedCodes {
    pub fn with_capacity(nodes: usize) -> Self {
        Self {
            words: vec![0; words_for(nodes)],
            len: 0,
        }
    }

    pub fn from_codes(codes: &[NodeCode], capacity: usize) -> Self {
        let mut p = Self::with_capacity(capacity.max(codes.len()));
        p.len = codes.len();
        for (i, &c) in codes.iter().enumerate() {
            p.set(i, c);
        }
        p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Physical capacity in nodes (whole words).
    #[inline]
    pub fn physical_capacity(&self) -> usize {
        self.words.len() * NIBBLES_PER_WORD
    }

    /// Resizes the backing words to hold exactly `nodes` rounded up to a word.
    pub fn set_capacity(&mut self, nodes: usize) {
        assert!(
            nodes >= self.len,
            "capacity {nodes} below length {}",
            self.len
        );
        let w = words_for(nodes);
        if w != self.words.len() {
            self.words.resize(w, 0);
            self.words.shrink_to_fit();
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> NodeCode {
        debug_assert!(i < self.len, "index {i} past length {}", self.len);
        let w = self.words[i / NIBBLES_PER_WORD];
        NodeCode::from_mask((w >> (4 * (i % NIBBLES_PER_WORD))) as u8)
    }

    #[inline]
    pub fn set(&mut self, i: usize, code: NodeCode) {
        debug_assert!(i < self.len);
        let shift = 4 * (i % NIBBLES_PER_WORD);
        let w = &mut self.words[i / NIBBLES_PER_WORD];
        *w = (*w & !(0xF << shift)) | (u64::from(code.mask()) << shift);
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeCode> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<NodeCode> {
        self.iter().collect()
    }

    /// 64 bits starting at bit `q`; bits outside the array read as zero.
    #[inline]
    fn read64(&self, q: isize) -> u64 {
        let word = |i: isize| -> u64 {
            if i < 0 {
                0
            } else {
                self.words.get(i as usize).copied().unwrap_or(0)
            }
        };
        let wi = q.div_euclid(64);
        let off = q.rem_euclid(64) as u32;
        if off == 0 {
            word(wi)
        } else {
            (word(wi) >> off) | (word(wi + 1) << (64 - off))
        }
    }

    /// Inserts `codes` before position `at`. The backing storage must already
    /// hold `len + codes.len()` nodes.
    pub fn insert_slice(&mut self, at: usize, codes: &[NodeCode]) {
        assert!(at <= self.len);
        let k = codes.len();
        if k == 0 {
            return;
        }
        assert!(
            self.len + k <= self.physical_capacity(),
            "insert of {k} into {} of {}",
            self.len,
            self.physical_capacity()
        );
        let shift = 4 * k;
        let start = 4 * at;
        let end = 4 * (self.len + k);
        if start + shift < end {
            let lo = (start + shift) / 64;
            let hi = (end - 1) / 64;
            for w in (lo..=hi).rev() {
                let moved = self.read64((64 * w) as isize - shift as isize);
                self.words[w] = if w == lo {
                    let keep = low_mask((start + shift) % 64);
                    (self.words[w] & keep) | (moved & !keep)
                } else {
                    moved
                };
            }
        }
        self.len += k;
        for (j, &c) in codes.iter().enumerate() {
            self.set(at + j, c);
        }
    }

    pub fn insert(&mut self, at: usize, code: NodeCode) {
        self.insert_slice(at, &[code]);
    }

    /// Removes positions `at .. at + k`.
    pub fn remove_range(&mut self, at: usize, k: usize) {
        assert!(at + k <= self.len);
        if k == 0 {
            return;
        }
        let shift = 4 * k;
        let start = 4 * at;
        let new_end = 4 * (self.len - k);
        if start < new_end {
            let lo = start / 64;
            let hi = (new_end - 1) / 64;
            for w in lo..=hi {
                let moved = self.read64((64 * w + shift) as isize);
                self.words[w] = if w == lo {
                    let keep = low_mask(start % 64);
                    (self.words[w] & keep) | (moved & !keep)
                } else {
                    moved
                };
            }
        }
        self.len -= k;
        // Zero the vacated tail so stale nibbles never leak into reads.
        let first_dead = 4 * self.len;
        let old_end = first_dead + shift;
        let (lo, hi) = (first_dead / 64, (old_end - 1) / 64);
        for w in lo..=hi.min(self.words.len().saturating_sub(1)) {
            if w == lo {
                self.words[w] &= low_mask(first_dead % 64);
            } else {
                self.words[w] = 0;
            }
        }
    }

    pub fn remove(&mut self, at: usize) {
        self.remove_range(at, 1);
    }

    /// Moves positions `at .. at + k` out into a new array.
    pub fn extract(&self, at: usize, k: usize) -> Vec<NodeCode> {
        (at..at + k).map(|i| self.get(i)).collect()
    }
}
