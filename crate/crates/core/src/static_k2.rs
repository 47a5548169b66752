//! Static levelwise k2-tree with rank-based navigation.
//!
//! Nodes are numbered breadth-first from 0. Bit `4*i + t` of the bitvector
//! is child `t` of node `i`. With `rank1(j)` counting the ones in bits
//! `0..j`, child `t` of node `i` is node `rank1(4*i + t + 1)`, whose bits
//! start at position `4 * rank1(4*i + t + 1)`.

use crate::codes::{self, NodeCode};
use crate::error::{Error, Result};
use crate::morton::{GridShape, Point};
use crate::serial;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticK2 {
    shape: GridShape,
    bits: Vec<u64>,
    nodes: usize,
    level_offsets: Vec<usize>,
    /// Ones in all words before word `w`.
    rank_index: Vec<u64>,
    points: u64,
}

impl StaticK2 {
    /// Builds the tree of a point set; duplicates are ignored.
    pub fn build<I>(points: I, shape: GridShape) -> Result<Self>
    where
        I: IntoIterator<Item = Point>,
    {
        let mut keys = Vec::new();
        for p in points {
            keys.push(shape.encode(p)?);
        }
        keys.sort_unstable();
        keys.dedup();
        let mut codes = Vec::new();
        for level in 0..shape.levels() {
            let mut i = 0;
            while i < keys.len() {
                let prefix = keys[i].prefix(level);
                let mut code = NodeCode::EMPTY;
                while i < keys.len() && keys[i].prefix(level) == prefix {
                    code = code.with_child(keys[i].symbol(level));
                    i += 1;
                }
                codes.push(code);
            }
        }
        if codes.is_empty() {
            codes.push(NodeCode::EMPTY);
        }
        Self::from_codes(shape, &codes)
    }

    /// Wraps a levelwise code sequence after checking that it describes a
    /// tree on `shape`.
    pub fn from_codes(shape: GridShape, codes: &[NodeCode]) -> Result<Self> {
        let levels = shape.levels() as usize;
        let mut level_offsets = Vec::with_capacity(levels + 1);
        let mut start = 0usize;
        let mut width = 1usize;
        let mut points = 0u64;
        for level in 0..levels {
            level_offsets.push(start);
            let end = start + width;
            if end > codes.len() {
                return Err(Error::Format(format!(
                    "level {level} needs {width} codes, stream ends at {}",
                    codes.len()
                )));
            }
            let ones: usize = codes[start..end]
                .iter()
                .map(|c| c.child_count() as usize)
                .sum();
            if codes[start..end].iter().any(|c| c.is_empty()) && !(level == 0 && ones == 0) {
                return Err(Error::Format(format!("empty node on level {level}")));
            }
            if level + 1 == levels {
                points = ones as u64;
            }
            start = end;
            width = ones;
            if width == 0 {
                for _ in level + 1..levels {
                    level_offsets.push(start);
                }
                break;
            }
        }
        level_offsets.push(start);
        if start != codes.len() {
            return Err(Error::Format(format!(
                "{} codes given, the tree has {start}",
                codes.len()
            )));
        }
        let mut bits = vec![0u64; codes.len().div_ceil(16)];
        for (i, c) in codes.iter().enumerate() {
            bits[i / 16] |= u64::from(c.mask()) << (4 * (i % 16));
        }
        let mut rank_index = Vec::with_capacity(bits.len() + 1);
        let mut acc = 0u64;
        for w in &bits {
            rank_index.push(acc);
            acc += u64::from(w.count_ones());
        }
        rank_index.push(acc);
        Ok(Self {
            shape,
            bits,
            nodes: codes.len(),
            level_offsets,
            rank_index,
            points,
        })
    }

    pub fn from_packed(bytes: &[u8]) -> Result<Self> {
        let s = serial::decode_packed(bytes)?;
        let t = Self::from_codes(s.shape, &s.codes)?;
        if t.points != s.points {
            return Err(Error::Format(format!(
                "header claims {} points, tree holds {}",
                s.points, t.points
            )));
        }
        Ok(t)
    }

    pub fn to_packed(&self) -> Result<Vec<u8>> {
        serial::encode_packed(self.shape, self.points, &self.codes())
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Number of nodes `v`; the bitvector has `4 v` bits.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn bit_len(&self) -> usize {
        4 * self.nodes
    }

    #[inline]
    pub fn point_count(&self) -> u64 {
        self.points
    }

    /// First node of each level, plus the total node count at the end.
    pub fn level_offsets(&self) -> &[usize] {
        &self.level_offsets
    }

    #[inline]
    pub fn code(&self, i: usize) -> NodeCode {
        NodeCode::from_mask((self.bits[i / 16] >> (4 * (i % 16))) as u8)
    }

    pub fn codes(&self) -> Vec<NodeCode> {
        (0..self.nodes).map(|i| self.code(i)).collect()
    }

    pub fn text(&self) -> String {
        codes::render(&self.codes())
    }

    /// Ones in bit positions `0..j`.
    #[inline]
    pub fn rank1(&self, j: usize) -> u64 {
        let (w, r) = (j / 64, j % 64);
        let partial = if r == 0 {
            0
        } else {
            (self.bits[w] & ((1u64 << r) - 1)).count_ones()
        };
        self.rank_index[w] + u64::from(partial)
    }

    /// Node holding child `t` of node `i`.
    pub fn child_node(&self, i: usize, t: u8) -> Result<usize> {
        if i >= self.nodes || t > 3 {
            return Err(Error::Contract("node or symbol out of range"));
        }
        if i >= self.level_offsets[self.level_offsets.len() - 2] {
            return Err(Error::Contract("last-level nodes have no child nodes"));
        }
        if !self.code(i).has_child(t) {
            return Err(Error::Contract("child symbol absent"));
        }
        Ok(self.rank1(4 * i + t as usize + 1) as usize)
    }

    /// Bit position of the code of child `t` of node `i`.
    pub fn child_position(&self, i: usize, t: u8) -> Result<usize> {
        Ok(4 * self.child_node(i, t)?)
    }

    pub fn contains(&self, p: Point) -> Result<bool> {
        let m = self.shape.encode(p)?;
        let mut node = 0;
        for level in 0..self.shape.levels() {
            let s = m.symbol(level);
            if !self.code(node).has_child(s) {
                return Ok(false);
            }
            if level == self.shape.leaf_depth() {
                return Ok(true);
            }
            node = self.rank1(4 * node + s as usize + 1) as usize;
        }
        unreachable!("a grid has at least one level")
    }
}
