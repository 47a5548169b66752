//! Grid geometry and Morton (Z-order) codes.
//!
//! A point `(row, col)` on a `side x side` grid maps to a string of
//! `levels = log2(side)` symbols over `{0, 1, 2, 3}`. Symbol `l` picks the
//! quadrant at level `l`, coarsest first: `2 * row_bit + col_bit`, so `0` is
//! top-left, `1` top-right, `2` bottom-left and `3` bottom-right.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported number of levels; coordinates fit in `u32`.
pub const MAX_LEVELS: u32 = 31;

/// A square power-of-two grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    side: u64,
    levels: u32,
}

impl GridShape {
    pub fn new(side: u64) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() || side > 1 << MAX_LEVELS {
            return Err(Error::InvalidSide(side));
        }
        Ok(Self {
            side,
            levels: side.trailing_zeros(),
        })
    }

    pub fn from_levels(levels: u32) -> Result<Self> {
        if levels == 0 || levels > MAX_LEVELS {
            return Err(Error::InvalidSide(1u64.checked_shl(levels).unwrap_or(0)));
        }
        Self::new(1 << levels)
    }

    #[inline]
    pub fn side(&self) -> u64 {
        self.side
    }

    #[inline]
    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Trie depth of the nodes whose four bits are matrix cells.
    #[inline]
    pub fn leaf_depth(&self) -> u32 {
        self.levels - 1
    }

    /// Side length of the submatrix covered by a node at `depth`.
    #[inline]
    pub fn extent_at(&self, depth: u32) -> u64 {
        self.side >> depth
    }

    pub fn check(&self, p: Point) -> Result<()> {
        if u64::from(p.row) >= self.side || u64::from(p.col) >= self.side {
            return Err(Error::OutOfRange {
                row: p.row.into(),
                col: p.col.into(),
                side: self.side,
            });
        }
        Ok(())
    }

    pub fn encode(&self, p: Point) -> Result<MortonCode> {
        self.check(p)?;
        Ok(MortonCode {
            bits: (spread(p.row) << 1) | spread(p.col),
            levels: self.levels,
        })
    }

    pub fn decode(&self, m: &MortonCode) -> Result<Point> {
        if m.levels != self.levels {
            return Err(Error::WrongLength {
                got: m.levels as usize,
                expected: self.levels,
            });
        }
        Ok(Point {
            row: compact(m.bits >> 1),
            col: compact(m.bits),
        })
    }
}

/// A cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub row: u32,
    pub col: u32,
}

impl Point {
    #[inline]
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl From<(u32, u32)> for Point {
    fn from((row, col): (u32, u32)) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Root-to-leaf path of a point, packed two bits per symbol with the first
/// symbol in the most significant position. Codes of equal length order
/// lexicographically by symbol string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MortonCode {
    bits: u64,
    levels: u32,
}

impl MortonCode {
    pub fn from_symbols(symbols: &[u8], shape: GridShape) -> Result<Self> {
        if symbols.len() != shape.levels as usize {
            return Err(Error::WrongLength {
                got: symbols.len(),
                expected: shape.levels,
            });
        }
        let mut bits = 0u64;
        for &s in symbols {
            if s > 3 {
                return Err(Error::InvalidSymbol(s));
            }
            bits = (bits << 2) | u64::from(s);
        }
        Ok(Self {
            bits,
            levels: shape.levels,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.levels as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.levels == 0
    }

    /// Symbol chosen at trie depth `level`.
    #[inline]
    pub fn symbol(&self, level: u32) -> u8 {
        debug_assert!(level < self.levels);
        ((self.bits >> (2 * (self.levels - 1 - level))) & 3) as u8
    }

    pub fn symbols(&self) -> Vec<u8> {
        (0..self.levels).map(|l| self.symbol(l)).collect()
    }

    /// Packed value; equals the interleaving `row_bit, col_bit, ...` from the
    /// most significant bit down.
    #[inline]
    pub fn raw(&self) -> u64 {
        self.bits
    }

    /// The first `len` symbols packed as an integer.
    #[inline]
    pub fn prefix(&self, len: u32) -> u64 {
        if len == 0 {
            0
        } else {
            self.bits >> (2 * (self.levels - len))
        }
    }
}

impl fmt::Display for MortonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in 0..self.levels {
            write!(f, "{}", self.symbol(l))?;
        }
        Ok(())
    }
}

#[inline]
fn spread(v: u32) -> u64 {
    let mut x = u64::from(v);
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}
