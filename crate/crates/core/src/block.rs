//! One block of the trie: a connected piece of the tree stored in
//! depth-first order.
//!
//! A block keeps its node codes in preorder, so the index of a node in the
//! code array is its depth-first number. Nodes whose subtree lives in a child
//! block are *frontier* nodes. They are stored here as leaves, their code is
//! duplicated as the root of the child block, and their preorder numbers are
//! kept sorted in `frontier` with the matching child handles in `children`.
//!
//! There are no rank or select directories. Navigation is a left-to-right
//! scan that tracks the trie depth with a stack of pending child counts and
//! keeps a finger into `frontier`.
//!
//! A block whose depth limit is a single node is a *pointer block*. It holds
//! only its root code and every present child is a frontier entry whose code
//! is stored solely in the child block. Its `children` are ordered by symbol.

use std::fmt;

use crate::codes::NodeCode;
use crate::error::{Error, Result};
use crate::packed::PackedCodes;

/// Opaque handle of a block inside a trie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub(crate) u32);

impl BlockId {
    pub const fn new(index: u32) -> Self {
        Self(index)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Allowed block capacities `N_1 < N_2 < ... < N_max` with `N_max = 4 N_1`.
///
/// Consecutive classes grow by a factor of at most `1 / (1 - epsilon)`, so a
/// block that grew into its class is at least `1 - epsilon` full.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeLadder {
    epsilon: f64,
    classes: Vec<usize>,
}

impl SizeLadder {
    pub fn new(epsilon: f64, n_max: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {epsilon} not in (0, 1)"
            )));
        }
        if n_max < 4 || !n_max.is_multiple_of(4) {
            return Err(Error::InvalidConfig(format!(
                "maximum block size {n_max} must be a positive multiple of 4"
            )));
        }
        let mut classes = vec![n_max / 4];
        while *classes.last().unwrap() < n_max {
            let prev = *classes.last().unwrap();
            let next = ((prev as f64) / (1.0 - epsilon)).ceil() as usize;
            classes.push(next.max(prev + 1).min(n_max));
        }
        Ok(Self { epsilon, classes })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n1(&self) -> usize {
        self.classes[0]
    }

    pub fn n_max(&self) -> usize {
        *self.classes.last().unwrap()
    }

    pub fn smallest_fitting(&self, nodes: usize) -> Option<usize> {
        self.classes.iter().copied().find(|&c| c >= nodes)
    }

    /// Capacity a block with `occupancy` nodes and depth limit `limit` must
    /// have. Blocks limited below `N_max` have the fixed capacity `limit`.
    pub fn capacity_for(&self, occupancy: usize, limit: usize) -> Option<usize> {
        if occupancy > limit {
            None
        } else if limit < self.n_max() {
            Some(limit)
        } else {
            self.smallest_fitting(occupancy)
        }
    }
}

/// Where a `scan_to_child` landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildLocation {
    pub index: usize,
    /// Position in `frontier` when the child is a frontier node.
    pub frontier_slot: Option<usize>,
}

/// Position of a left-to-right scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanState {
    pub index: usize,
    pub depth: u32,
    /// Smallest `f` with `frontier[f] >= index`.
    pub finger: usize,
}

impl ScanState {
    pub fn at_root(block: &Block) -> Self {
        Self {
            index: 0,
            depth: block.root_depth,
            finger: 0,
        }
    }
}

/// Depth and subtree size of one stored node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeInfo {
    pub depth: u32,
    pub size: usize,
    pub frontier: bool,
}

// Depth is at most 31 levels, so the pending-children stack never exceeds 32.
struct Pending {
    counts: [u8; 33],
    len: usize,
}

impl Pending {
    fn new(first: u8) -> Self {
        let mut counts = [0; 33];
        counts[0] = first;
        Self { counts, len: 1 }
    }

    #[inline]
    fn push(&mut self, c: u8) {
        self.counts[self.len] = c;
        self.len += 1;
    }

    /// Marks one subtree as finished; returns how many levels were closed,
    /// or `None` once the stack empties.
    #[inline]
    fn finish_one(&mut self) -> Option<u32> {
        let mut closed = 0;
        loop {
            let top = &mut self.counts[self.len - 1];
            *top -= 1;
            if *top > 0 {
                return Some(closed);
            }
            self.len -= 1;
            if self.len == 0 {
                return None;
            }
            closed += 1;
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct Block {
    codes: PackedCodes,
    frontier: Vec<u32>,
    children: Vec<BlockId>,
    root_depth: u32,
    limit: u32,
    capacity: u32,
    parent: Option<BlockId>,
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Block")
            .field("codes", &self.render())
            .field("children", &self.children)
            .field("root_depth", &self.root_depth)
            .field("limit", &self.limit)
            .field("capacity", &self.capacity)
            .field("parent", &self.parent)
            .finish()
    }
}

impl Block {
    /// A block holding a single code.
    pub fn with_root(code: NodeCode, root_depth: u32, limit: usize, capacity: usize) -> Self {
        Self {
            codes: PackedCodes::from_codes(&[code], capacity),
            frontier: Vec::new(),
            children: Vec::new(),
            root_depth,
            limit: limit as u32,
            capacity: capacity as u32,
            parent: None,
        }
    }

    /// Assembles a block from raw parts, checking the frontier arrays.
    pub fn from_parts(
        codes: &[NodeCode],
        frontier: Vec<u32>,
        children: Vec<BlockId>,
        root_depth: u32,
        limit: usize,
        capacity: usize,
    ) -> Result<Self> {
        if codes.is_empty() || codes.len() > capacity || capacity > limit.max(1) {
            return Err(Error::Corrupt(format!(
                "{} codes, capacity {capacity}, limit {limit}",
                codes.len()
            )));
        }
        let pointer = limit == 1;
        if !pointer && frontier.len() != children.len() {
            return Err(Error::Corrupt(
                "frontier and children differ in length".into(),
            ));
        }
        if !pointer
            && (frontier.windows(2).any(|w| w[0] >= w[1])
                || frontier
                    .iter()
                    .any(|&f| f == 0 || f as usize >= codes.len()))
        {
            return Err(Error::Corrupt(format!("bad frontier {frontier:?}")));
        }
        Ok(Self {
            codes: PackedCodes::from_codes(codes, capacity),
            frontier,
            children,
            root_depth,
            limit: limit as u32,
            capacity: capacity as u32,
            parent: None,
        })
    }

    #[inline]
    pub fn occupancy(&self) -> usize {
        self.codes.len()
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity as usize
    }

    #[inline]
    pub fn limit(&self) -> usize {
        self.limit as usize
    }

    #[inline]
    pub fn root_depth(&self) -> u32 {
        self.root_depth
    }

    #[inline]
    pub fn is_pointer(&self) -> bool {
        self.limit == 1
    }

    #[inline]
    pub fn code(&self, i: usize) -> NodeCode {
        self.codes.get(i)
    }

    pub fn codes(&self) -> Vec<NodeCode> {
        self.codes.to_vec()
    }

    #[inline]
    pub fn frontier(&self) -> &[u32] {
        &self.frontier
    }

    #[inline]
    pub fn children(&self) -> &[BlockId] {
        &self.children
    }

    #[inline]
    pub fn parent(&self) -> Option<BlockId> {
        self.parent
    }

    pub(crate) fn set_parent(&mut self, parent: Option<BlockId>) {
        self.parent = parent;
    }

    pub(crate) fn set_code(&mut self, i: usize, code: NodeCode) {
        self.codes.set(i, code);
    }

    pub(crate) fn children_mut(&mut self) -> &mut Vec<BlockId> {
        &mut self.children
    }

    /// Frontier slot holding `child`.
    pub fn slot_of(&self, child: BlockId) -> Option<usize> {
        self.children.iter().position(|&c| c == child)
    }

    /// Allocated size in bits of the code array.
    pub fn topology_bits(&self) -> u64 {
        4 * u64::from(self.capacity)
    }

    /// Advances `finger` to `node` and reports whether `node` is a frontier
    /// node. Calls must come in non-decreasing `node` order.
    #[inline]
    pub fn at_frontier(&self, finger: &mut usize, node: usize) -> bool {
        let f = &self.frontier;
        while *finger < f.len() && (f[*finger] as usize) < node {
            *finger += 1;
        }
        *finger < f.len() && f[*finger] as usize == node
    }

    /// Index one past the subtree of `x`, a node at trie depth `depth`.
    pub fn subtree_end(
        &self,
        x: usize,
        depth: u32,
        leaf_depth: u32,
        finger: &mut usize,
    ) -> Result<usize> {
        let occ = self.occupancy();
        if x >= occ {
            return Err(Error::Corrupt(format!("scan past block end at {x}")));
        }
        if self.at_frontier(finger, x) || depth >= leaf_depth {
            return Ok(x + 1);
        }
        let first = self.code(x).child_count();
        if first == 0 {
            return Ok(x + 1);
        }
        let mut pending = Pending::new(first);
        let mut pos = x + 1;
        let mut d = depth + 1;
        loop {
            if pos >= occ {
                return Err(Error::Corrupt(format!(
                    "subtree of {x} runs past block end {occ}"
                )));
            }
            let node = pos;
            pos += 1;
            if d < leaf_depth && !self.at_frontier(finger, node) {
                let c = self.code(node).child_count();
                if c > 0 {
                    pending.push(c);
                    d += 1;
                    continue;
                }
            }
            match pending.finish_one() {
                Some(closed) => d -= closed,
                None => return Ok(pos),
            }
        }
    }

    /// Number of codes in the subtree of `x`, frontier and leaf-level nodes
    /// counting as one.
    pub fn subtree_size(&self, x: usize, depth: u32, leaf_depth: u32) -> Result<usize> {
        let mut finger = 0;
        Ok(self.subtree_end(x, depth, leaf_depth, &mut finger)? - x)
    }

    /// Finds child `s` of the non-frontier node `x` at `depth` by skipping
    /// the subtrees of its earlier children. `state.finger` must be valid for
    /// some index `<= x`; on return `state` sits on the child.
    pub fn scan_to_child(
        &self,
        x: usize,
        depth: u32,
        s: u8,
        leaf_depth: u32,
        state: &mut ScanState,
    ) -> Result<ChildLocation> {
        if depth >= leaf_depth {
            return Err(Error::Contract("leaf-level nodes have no stored children"));
        }
        let code = self.code(x);
        if !code.has_child(s) {
            return Err(Error::Contract("child symbol absent"));
        }
        let mut pos = x + 1;
        for _ in 0..code.children_to_skip(s) {
            pos = self.subtree_end(pos, depth + 1, leaf_depth, &mut state.finger)?;
        }
        if pos >= self.occupancy() {
            return Err(Error::Corrupt(format!("child of {x} past block end")));
        }
        let frontier = self.at_frontier(&mut state.finger, pos);
        state.index = pos;
        state.depth = depth + 1;
        Ok(ChildLocation {
            index: pos,
            frontier_slot: frontier.then_some(state.finger),
        })
    }

    /// Preorder position where a new child `s` of `x` belongs.
    pub fn locate_insertion(
        &self,
        x: usize,
        depth: u32,
        s: u8,
        leaf_depth: u32,
        finger: &mut usize,
    ) -> Result<usize> {
        let mut pos = x + 1;
        if depth >= leaf_depth {
            return Ok(pos);
        }
        for _ in 0..self.code(x).children_to_skip(s) {
            pos = self.subtree_end(pos, depth + 1, leaf_depth, finger)?;
        }
        Ok(pos)
    }

    fn shift_frontier(&mut self, from: usize, delta: isize) {
        let start = self.frontier.partition_point(|&f| (f as usize) < from);
        for f in &mut self.frontier[start..] {
            *f = (*f as isize + delta) as u32;
        }
    }

    /// Adds the suffix `z` below `x`: `x` gains child `z[0]` and the unary
    /// codes of `z[1..]` are written at `at`. Returns the number of codes
    /// added.
    pub fn splice_chain(&mut self, x: usize, at: usize, z: &[u8]) -> Result<usize> {
        let added = z.len().saturating_sub(1);
        if self.occupancy() + added > self.capacity() {
            return Err(Error::Capacity {
                occupancy: self.occupancy(),
                capacity: self.capacity(),
                needed: added,
            });
        }
        let (&first, rest) = z.split_first().ok_or(Error::Contract("empty suffix"))?;
        self.codes.set(x, self.codes.get(x).with_child(first));
        if added > 0 {
            let chain: Vec<NodeCode> = rest.iter().map(|&s| NodeCode::unary(s)).collect();
            self.shift_frontier(at, added as isize);
            self.codes.insert_slice(at, &chain);
        }
        Ok(added)
    }

    /// Inserts a frontier node with `code` at `at`, pointing to `child`.
    pub(crate) fn insert_frontier(
        &mut self,
        at: usize,
        code: NodeCode,
        child: BlockId,
    ) -> Result<()> {
        if self.occupancy() + 1 > self.capacity() {
            return Err(Error::Capacity {
                occupancy: self.occupancy(),
                capacity: self.capacity(),
                needed: 1,
            });
        }
        self.shift_frontier(at, 1);
        self.codes.insert(at, code);
        let slot = self.frontier.partition_point(|&f| (f as usize) < at);
        self.frontier.insert(slot, at as u32);
        self.children.insert(slot, child);
        Ok(())
    }

    /// Removes the single code at `idx`, which must have no stored subtree.
    /// Returns the child handle when `idx` was a frontier node.
    pub(crate) fn remove_node(&mut self, idx: usize) -> Option<BlockId> {
        let slot = self.frontier.partition_point(|&f| (f as usize) < idx);
        let removed = if self.frontier.get(slot) == Some(&(idx as u32)) {
            self.frontier.remove(slot);
            Some(self.children.remove(slot))
        } else {
            None
        };
        self.codes.remove(idx);
        self.shift_frontier(idx, -1);
        removed
    }

    /// Reallocates for `needed` more codes within `limit`. Fails with
    /// [`Error::Capacity`] when no allowed capacity fits, meaning the block
    /// must be split first.
    pub fn grow(&mut self, needed: usize, ladder: &SizeLadder, limit: usize) -> Result<()> {
        let want = self.occupancy() + needed;
        if want <= self.capacity() {
            return Ok(());
        }
        match ladder.capacity_for(want, limit) {
            Some(cap) => {
                self.set_capacity(cap);
                Ok(())
            }
            None => Err(Error::Capacity {
                occupancy: self.occupancy(),
                capacity: self.capacity(),
                needed,
            }),
        }
    }

    fn set_capacity(&mut self, cap: usize) {
        self.capacity = cap as u32;
        self.codes.set_capacity(cap);
    }

    /// Shrinks or grows to the capacity the ladder prescribes for the
    /// current occupancy.
    pub(crate) fn refit(&mut self, ladder: &SizeLadder) -> Result<()> {
        let cap = ladder
            .capacity_for(self.occupancy(), self.limit())
            .ok_or_else(|| {
                Error::Corrupt(format!(
                    "occupancy {} over limit {}",
                    self.occupancy(),
                    self.limit
                ))
            })?;
        if cap != self.capacity() {
            self.set_capacity(cap);
        }
        Ok(())
    }

    /// Depth and subtree size of every code, from one preorder pass. Fails if
    /// the codes do not form exactly one well-formed tree.
    pub fn layout(&self, leaf_depth: u32) -> Result<Vec<NodeInfo>> {
        let occ = self.occupancy();
        let mut info = vec![
            NodeInfo {
                depth: 0,
                size: 1,
                frontier: false,
            };
            occ
        ];
        if self.is_pointer() {
            info[0].depth = self.root_depth;
            return Ok(info);
        }
        // (node, remaining children)
        let mut stack: Vec<(usize, u8)> = Vec::with_capacity(33);
        let mut finger = 0;
        let mut depth = self.root_depth;
        for (i, slot) in info.iter_mut().enumerate() {
            if i > 0 && stack.is_empty() {
                return Err(Error::Corrupt(format!(
                    "codes after the root subtree ends at {i}"
                )));
            }
            slot.depth = depth;
            slot.frontier = self.at_frontier(&mut finger, i);
            let c = self.code(i).child_count();
            if depth > leaf_depth {
                return Err(Error::Corrupt(format!("node {i} below leaf depth")));
            }
            if !slot.frontier && depth < leaf_depth && c > 0 {
                stack.push((i, c));
                depth += 1;
            } else if !stack.is_empty() {
                // close finished subtrees
                while let Some(top) = stack.last_mut() {
                    top.1 -= 1;
                    if top.1 > 0 {
                        break;
                    }
                    stack.pop();
                    depth -= 1;
                }
            }
        }
        if !stack.is_empty() {
            return Err(Error::Corrupt(format!(
                "{} subtrees unterminated",
                stack.len()
            )));
        }
        // sizes: a second pass from the back using the depths
        let mut end_stack: Vec<usize> = Vec::with_capacity(33);
        for i in (0..occ).rev() {
            let d = info[i].depth;
            // subtree of i ends at the first later node with depth <= d
            while let Some(&j) = end_stack.last() {
                if info[j].depth > d {
                    end_stack.pop();
                } else {
                    break;
                }
            }
            let end = end_stack.last().copied().unwrap_or(occ);
            info[i].size = end - i;
            end_stack.push(i);
        }
        Ok(info)
    }

    /// Picks the node to split off: the leftmost eligible node whose subtree
    /// holds 25%..75% of the block, otherwise the eligible node that best
    /// balances the two halves. Eligible nodes are neither the root, nor
    /// frontier nodes, nor at leaf depth.
    pub fn choose_split_node(&self, leaf_depth: u32) -> Result<usize> {
        if self.is_pointer() || self.occupancy() < 2 {
            return Err(Error::SplitImpossible);
        }
        let occ = self.occupancy();
        let info = self.layout(leaf_depth)?;
        let eligible = |(i, n): &(usize, &NodeInfo)| *i != 0 && !n.frontier && n.depth < leaf_depth;
        if let Some((w, _)) = info
            .iter()
            .enumerate()
            .filter(eligible)
            .find(|(_, n)| 4 * n.size >= occ && 4 * n.size <= 3 * occ)
        {
            return Ok(w);
        }
        info.iter()
            .enumerate()
            .filter(eligible)
            .min_by_key(|(i, n)| ((occ as isize - 2 * n.size as isize).unsigned_abs(), *i))
            .map(|(i, _)| i)
            .ok_or(Error::SplitImpossible)
    }

    /// Moves the subtree of `w` into a new block. `w` stays here as a
    /// frontier node pointing at `child_id`; the new block is returned with
    /// its capacity fitted to `child_limit`. Children handed over to the new
    /// block keep stale parent links for the caller to fix.
    pub fn split(
        &mut self,
        w: usize,
        leaf_depth: u32,
        child_id: BlockId,
        child_limit: usize,
        ladder: &SizeLadder,
    ) -> Result<Block> {
        if w == 0 || w >= self.occupancy() || self.is_pointer() {
            return Err(Error::SplitImpossible);
        }
        let info = self.layout(leaf_depth)?;
        let node = info[w];
        if node.frontier {
            return Err(Error::SplitImpossible);
        }
        let size = node.size;
        let child_cap = ladder.capacity_for(size, child_limit).ok_or_else(|| {
            Error::Corrupt(format!("split part of {size} exceeds limit {child_limit}"))
        })?;
        let moved = self.codes.extract(w, size);
        let lo = self.frontier.partition_point(|&f| (f as usize) < w);
        let hi = self.frontier.partition_point(|&f| (f as usize) < w + size);
        let child_frontier: Vec<u32> = self.frontier.drain(lo..hi).map(|f| f - w as u32).collect();
        let child_children: Vec<BlockId> = self.children.drain(lo..hi).collect();

        let mut child = Block::from_parts(
            &moved,
            child_frontier,
            child_children,
            node.depth,
            child_limit,
            child_cap,
        )?;
        child.parent = None;

        self.codes.remove_range(w + 1, size - 1);
        self.shift_frontier(w + size, -(size as isize - 1));
        self.frontier.insert(lo, w as u32);
        self.children.insert(lo, child_id);
        self.refit(ladder)?;
        Ok(child)
    }

    /// Codes as space-separated 4-bit strings, frontier nodes in brackets.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut finger = 0;
        for i in 0..self.occupancy() {
            if i > 0 {
                out.push(' ');
            }
            let c = self.code(i);
            if !self.is_pointer() && self.at_frontier(&mut finger, i) {
                out.push_str(&format!("[{c}]"));
            } else {
                out.push_str(&c.to_string());
            }
        }
        out
    }
}
