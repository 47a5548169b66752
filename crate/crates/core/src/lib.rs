//! Dynamic k2-trees.
//!
//! A set of points on a `2^h x 2^h` grid is stored as the 4-ary trie of the
//! points' Morton codes. The trie is cut into blocks, each holding a
//! connected piece of it as a depth-first sequence of 4-bit node codes, so
//! insertions and deletions only shift codes inside one small block. The
//! node codes read breadth-first are exactly the classical static k2-tree
//! bitvector, which [`StaticK2`] builds directly and navigates with rank.

pub mod bench;
pub mod block;
pub mod codes;
pub mod error;
pub mod morton;
pub mod packed;
pub mod serial;
pub mod static_k2;
pub mod trie;

pub use block::{Block, BlockId, SizeLadder};
pub use codes::NodeCode;
pub use error::{Error, Result};
pub use morton::{GridShape, MortonCode, Point};
pub use static_k2::StaticK2;
pub use trie::{K2Trie, SpaceReport, TrieConfig};
