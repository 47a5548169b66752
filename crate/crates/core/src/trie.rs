//! The dynamic k2-tree: a trie over Morton codes cut into a tree of blocks.

use crate::block::{Block, BlockId, ScanState, SizeLadder};
use crate::codes::{self, NodeCode};
use crate::error::{Error, Result};
use crate::morton::{GridShape, MortonCode, Point};
use crate::serial;

/// Header bits charged per block: root depth, limit, capacity and parent
/// link, one 32-bit word each.
pub const BLOCK_HEADER_BITS: u64 = 128;

/// Block size parameters.
///
/// Blocks rooted at depth `<= d1` may hold `n2_max` nodes, those rooted at
/// depth `<= d2` may hold `n1_max`, and deeper blocks grow along the size
/// ladder up to `n_max`. With `n2_max == 1` the top of the trie is stored as
/// one node per block, i.e. with explicit child pointers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrieConfig {
    pub epsilon: f64,
    pub n_max: usize,
    pub n1_max: usize,
    pub n2_max: usize,
    pub d1: u32,
    pub d2: u32,
}

impl Default for TrieConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            n_max: 512,
            n1_max: 96,
            n2_max: 1,
            d1: 8,
            d2: 12,
        }
    }
}

impl TrieConfig {
    /// Checks the parameters and returns the size ladder they induce.
    pub fn ladder(&self) -> Result<SizeLadder> {
        if !(self.n2_max < self.n1_max && self.n1_max < self.n_max) {
            return Err(Error::InvalidConfig(format!(
                "need n2_max < n1_max < n_max, got {} / {} / {}",
                self.n2_max, self.n1_max, self.n_max
            )));
        }
        // A multi-node block must fit a node plus four frontier copies.
        if self.n2_max == 0 || (self.n2_max > 1 && self.n2_max < 5) || self.n1_max < 5 {
            return Err(Error::InvalidConfig(format!(
                "block limits must be 1 or at least 5, got {} / {}",
                self.n2_max, self.n1_max
            )));
        }
        if self.d1 >= self.d2 {
            return Err(Error::InvalidConfig(format!(
                "need d1 < d2, got {} / {}",
                self.d1, self.d2
            )));
        }
        SizeLadder::new(self.epsilon, self.n_max)
    }

    /// Node limit of a block whose root sits at `depth`.
    pub fn limit_for(&self, depth: u32) -> usize {
        if depth <= self.d1 {
            self.n2_max
        } else if depth <= self.d2 {
            self.n1_max
        } else {
            self.n_max
        }
    }
}

/// Bit accounting of a trie.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpaceReport {
    pub points: u64,
    pub blocks: u64,
    /// Allocated code arrays: 4 bits times the sum of capacities.
    pub topology_bits: u64,
    /// 4 bits per distinct trie node, frontier copies counted once.
    pub topology_used_bits: u64,
    pub frontier_bits: u64,
    pub handle_bits: u64,
    pub bookkeeping_bits: u64,
    pub bits_per_point: f64,
}

impl SpaceReport {
    pub fn total_bits(&self) -> u64 {
        self.topology_bits + self.frontier_bits + self.handle_bits + self.bookkeeping_bits
    }

    pub fn used_topology_bits_per_point(&self) -> f64 {
        if self.points == 0 {
            0.0
        } else {
            self.topology_used_bits as f64 / self.points as f64
        }
    }
}

/// A set of points on a `side x side` grid.
///
/// ```
/// use k2trie::{GridShape, K2Trie, Point, TrieConfig};
///
/// let mut t = K2Trie::new(GridShape::new(16)?, TrieConfig::default())?;
/// assert!(t.insert(Point::new(0, 2))?);
/// assert!(t.contains(Point::new(0, 2))?);
/// assert_eq!(t.neighbors(0)?, vec![2]);
/// # Ok::<(), k2trie::Error>(())
/// ```
#[derive(Debug, Clone)]
pub struct K2Trie {
    shape: GridShape,
    config: TrieConfig,
    ladder: SizeLadder,
    blocks: Vec<Option<Block>>,
    free: Vec<u32>,
    root: BlockId,
    points: u64,
    /// Blocks written by the latest insert or delete.
    touched: Vec<BlockId>,
}

/// Owners of the nodes on a root-to-leaf path, one per depth.
struct Walk {
    path: Vec<(BlockId, usize)>,
    found: bool,
}

trait Visitor {
    /// Whether the node covering `extent x extent` cells at `(row0, col0)`
    /// should be entered.
    fn wants(&self, _row0: u64, _col0: u64, _extent: u64) -> bool {
        true
    }
    fn node(&mut self, _depth: u32, _code: NodeCode) {}
    fn cell(&mut self, _row: u64, _col: u64) {}
}

impl K2Trie {
    pub fn new(shape: GridShape, config: TrieConfig) -> Result<Self> {
        let ladder = config.ladder()?;
        let mut t = Self {
            shape,
            config,
            ladder,
            blocks: Vec::new(),
            free: Vec::new(),
            root: BlockId(0),
            points: 0,
            touched: Vec::new(),
        };
        let root = t.new_block(NodeCode::EMPTY, 0);
        t.root = t.alloc(root);
        Ok(t)
    }

    pub fn from_points<I>(shape: GridShape, config: TrieConfig, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = Point>,
    {
        let mut t = Self::new(shape, config)?;
        for p in points {
            t.insert(p)?;
        }
        Ok(t)
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn config(&self) -> &TrieConfig {
        &self.config
    }

    #[inline]
    pub fn ladder(&self) -> &SizeLadder {
        &self.ladder
    }

    /// Number of stored points.
    #[inline]
    pub fn len(&self) -> u64 {
        self.points
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    #[inline]
    pub fn root(&self) -> BlockId {
        self.root
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.index()).and_then(Option::as_ref)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len() - self.free.len()
    }

    /// Live blocks in handle order.
    pub fn blocks(&self) -> impl Iterator<Item = (BlockId, &Block)> {
        self.blocks
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_ref().map(|b| (BlockId(i as u32), b)))
    }

    // ---- arena ----

    fn new_block(&self, code: NodeCode, depth: u32) -> Block {
        let limit = self.config.limit_for(depth);
        let cap = self.ladder.capacity_for(1, limit).expect("limit >= 1");
        Block::with_root(code, depth, limit, cap)
    }

    fn reserve(&mut self) -> BlockId {
        match self.free.pop() {
            Some(i) => BlockId(i),
            None => {
                self.blocks.push(None);
                BlockId(self.blocks.len() as u32 - 1)
            }
        }
    }

    fn fill(&mut self, id: BlockId, block: Block) {
        self.touched.push(id);
        debug_assert!(self.blocks[id.index()].is_none());
        self.blocks[id.index()] = Some(block);
    }

    fn alloc(&mut self, block: Block) -> BlockId {
        let id = self.reserve();
        self.fill(id, block);
        id
    }

    fn release(&mut self, id: BlockId) {
        self.blocks[id.index()] = None;
        self.free.push(id.0);
    }

    #[inline]
    fn blk(&self, id: BlockId) -> &Block {
        self.blocks[id.index()]
            .as_ref()
            .expect("dangling block handle")
    }

    #[inline]
    fn blk_mut(&mut self, id: BlockId) -> &mut Block {
        self.touched.push(id);
        self.blocks[id.index()]
            .as_mut()
            .expect("dangling block handle")
    }

    /// Writes a code and keeps the parent's frontier copy of a block root in
    /// sync.
    fn write_code(&mut self, id: BlockId, idx: usize, code: NodeCode) -> Result<()> {
        self.blk_mut(id).set_code(idx, code);
        if idx == 0 {
            if let Some(p) = self.blk(id).parent() {
                let parent = self.blk_mut(p);
                if !parent.is_pointer() {
                    let slot = parent
                        .slot_of(id)
                        .ok_or_else(|| Error::Corrupt(format!("{id} missing from parent {p}")))?;
                    let f = parent.frontier()[slot] as usize;
                    parent.set_code(f, code);
                }
            }
        }
        Ok(())
    }

    // ---- queries ----

    pub fn contains(&self, p: Point) -> Result<bool> {
        let m = self.shape.encode(p)?;
        let leaf = self.shape.leaf_depth();
        let mut b = self.blk(self.root);
        let mut st = ScanState::at_root(b);
        let mut x = 0;
        let mut depth = 0;
        loop {
            let s = m.symbol(depth);
            let code = b.code(x);
            if !code.has_child(s) {
                return Ok(false);
            }
            if depth == leaf {
                return Ok(true);
            }
            depth += 1;
            let next = if b.is_pointer() {
                Some(b.children()[code.children_to_skip(s) as usize])
            } else {
                let loc = b.scan_to_child(x, depth - 1, s, leaf, &mut st)?;
                x = loc.index;
                loc.frontier_slot.map(|f| b.children()[f])
            };
            if let Some(id) = next {
                b = self.blk(id);
                st = ScanState::at_root(b);
                x = 0;
            }
        }
    }

    fn descend(&self, m: &MortonCode) -> Result<Walk> {
        let leaf = self.shape.leaf_depth();
        let mut path = Vec::with_capacity(self.shape.levels() as usize);
        let mut id = self.root;
        let mut b = self.blk(id);
        let mut st = ScanState::at_root(b);
        let mut x = 0;
        let mut depth = 0;
        loop {
            path.push((id, x));
            let s = m.symbol(depth);
            let code = b.code(x);
            if !code.has_child(s) {
                return Ok(Walk { path, found: false });
            }
            if depth == leaf {
                return Ok(Walk { path, found: true });
            }
            depth += 1;
            let next = if b.is_pointer() {
                Some(b.children()[code.children_to_skip(s) as usize])
            } else {
                let loc = b.scan_to_child(x, depth - 1, s, leaf, &mut st)?;
                x = loc.index;
                loc.frontier_slot.map(|f| b.children()[f])
            };
            if let Some(next) = next {
                id = next;
                b = self.blk(id);
                if b.root_depth() != depth {
                    return Err(Error::Corrupt(format!(
                        "block {id} rooted at depth {} reached at {depth}",
                        b.root_depth()
                    )));
                }
                st = ScanState::at_root(b);
                x = 0;
            }
        }
    }

    /// Adds `p`; returns `false` if it was already present.
    pub fn insert(&mut self, p: Point) -> Result<bool> {
        self.touched.clear();
        let m = self.shape.encode(p)?;
        let walk = self.descend(&m)?;
        if walk.found {
            return Ok(false);
        }
        let depth = walk.path.len() - 1;
        let (id, x) = walk.path[depth];
        let z: Vec<u8> = (depth as u32..self.shape.levels())
            .map(|l| m.symbol(l))
            .collect();
        self.insert_suffix(id, x, depth as u32, &z)?;
        self.points += 1;
        Ok(true)
    }

    /// Hangs the path `z` below node `x` of block `id`, which lacks child
    /// `z[0]`.
    fn insert_suffix(&mut self, mut id: BlockId, mut x: usize, depth: u32, z: &[u8]) -> Result<()> {
        let leaf = self.shape.leaf_depth();
        let needed = z.len() - 1;
        let chain: Vec<NodeCode> = z[1..].iter().map(|&s| NodeCode::unary(s)).collect();

        if self.blk(id).is_pointer() {
            let old = self.blk(id).code(0);
            if needed > 0 {
                let child = self.build_chain(depth + 1, &chain, id);
                let rank = old.children_to_skip(z[0]) as usize;
                self.blk_mut(id).children_mut().insert(rank, child);
            }
            return self.write_code(id, 0, old.with_child(z[0]));
        }

        loop {
            let b = self.blk(id);
            let limit = b.limit();
            let avail = limit - b.occupancy();
            if needed <= avail {
                let ladder = self.ladder.clone();
                let b = self.blk_mut(id);
                b.grow(needed, &ladder, limit)?;
                let at = b.locate_insertion(x, depth, z[0], leaf, &mut 0)?;
                b.splice_chain(x, at, z)?;
                let code = b.code(x);
                return self.write_code(id, x, code);
            }
            if needed < limit || avail == 0 {
                match b.choose_split_node(leaf) {
                    Ok(w) => {
                        (id, x) = self.split_tracking(id, w, x)?;
                        continue;
                    }
                    Err(Error::SplitImpossible) => {}
                    Err(e) => return Err(e),
                }
            }
            if avail == 0 {
                return Err(Error::Corrupt(format!(
                    "block {id} is full and cannot be split"
                )));
            }
            // The suffix cannot fit here: keep its first node as a frontier
            // node and store the rest in new blocks below.
            let at = b.locate_insertion(x, depth, z[0], leaf, &mut 0)?;
            let child = self.build_chain(depth + 1, &chain, id);
            let ladder = self.ladder.clone();
            let b = self.blk_mut(id);
            b.grow(1, &ladder, limit)?;
            b.insert_frontier(at, chain[0], child)?;
            let code = b.code(x).with_child(z[0]);
            return self.write_code(id, x, code);
        }
    }

    /// Stores a unary chain whose first node sits at `depth` in as many
    /// blocks as the depth limits require; returns the top block.
    fn build_chain(&mut self, depth: u32, chain: &[NodeCode], parent: BlockId) -> BlockId {
        let limit = self.config.limit_for(depth);
        let id = self.reserve();
        let mut block = if limit == 1 {
            let mut b = Block::with_root(chain[0], depth, 1, 1);
            if chain.len() > 1 {
                let child = self.build_chain(depth + 1, &chain[1..], id);
                b.children_mut().push(child);
            }
            b
        } else {
            let take = chain.len().min(limit);
            let cap = self
                .ladder
                .capacity_for(take, limit)
                .expect("chain fits its limit");
            if chain.len() <= limit {
                Block::from_parts(chain, vec![], vec![], depth, limit, cap)
                    .expect("valid chain block")
            } else {
                let f = limit - 1;
                let child = self.build_chain(depth + f as u32, &chain[f..], id);
                Block::from_parts(
                    &chain[..take],
                    vec![f as u32],
                    vec![child],
                    depth,
                    limit,
                    cap,
                )
                .expect("valid chain block")
            }
        };
        block.set_parent(Some(parent));
        self.fill(id, block);
        id
    }

    /// Splits the subtree of `w` out of block `id` and reports where node `x`
    /// of that block now lives.
    fn split_tracking(&mut self, id: BlockId, w: usize, x: usize) -> Result<(BlockId, usize)> {
        let leaf = self.shape.leaf_depth();
        let info = self.blk(id).layout(leaf)?;
        let node = info.get(w).copied().ok_or(Error::SplitImpossible)?;
        let child_limit = self.config.limit_for(node.depth);
        let child_id = self.reserve();
        let ladder = self.ladder.clone();
        let split = self
            .blk_mut(id)
            .split(w, leaf, child_id, child_limit, &ladder);
        let mut child = match split {
            Ok(c) => c,
            Err(e) => {
                self.blocks[child_id.index()] = None;
                self.free.push(child_id.0);
                return Err(e);
            }
        };
        child.set_parent(Some(id));
        for &c in child.children() {
            self.blk_mut(c).set_parent(Some(child_id));
        }
        self.fill(child_id, child);
        let moved = if x >= w && x < w + node.size {
            (child_id, x - w)
        } else if x >= w + node.size {
            (id, x - (node.size - 1))
        } else {
            (id, x)
        };
        Ok(moved)
    }

    /// Moves the subtree of node `w` of block `id` into a new child block.
    pub fn split_block(&mut self, id: BlockId, w: usize) -> Result<BlockId> {
        if self.block(id).is_none() {
            return Err(Error::Contract("unknown block"));
        }
        self.split_tracking(id, w, w).map(|(c, _)| c)
    }

    /// Removes `p`; returns `false` if it was absent.
    pub fn delete(&mut self, p: Point) -> Result<bool> {
        self.touched.clear();
        let m = self.shape.encode(p)?;
        let walk = self.descend(&m)?;
        if !walk.found {
            return Ok(false);
        }
        let path = walk.path;
        let mut depth = self.shape.leaf_depth() as usize;
        loop {
            let (id, x) = path[depth];
            let code = self.blk(id).code(x).without_child(m.symbol(depth as u32));
            if !code.is_empty() || depth == 0 {
                self.write_code(id, x, code)?;
                break;
            }
            self.remove_empty_node(id, x)?;
            depth -= 1;
        }
        self.points -= 1;
        Ok(true)
    }

    fn remove_empty_node(&mut self, id: BlockId, x: usize) -> Result<()> {
        let ladder = self.ladder.clone();
        if x > 0 {
            let b = self.blk_mut(id);
            if b.remove_node(x).is_some() {
                return Err(Error::Corrupt(format!(
                    "frontier node {x} of {id} emptied in place"
                )));
            }
            return b.refit(&ladder);
        }
        if self.blk(id).occupancy() != 1 {
            return Err(Error::Corrupt(format!(
                "emptied root of {id} still has a subtree"
            )));
        }
        let parent = self
            .blk(id)
            .parent()
            .ok_or_else(|| Error::Corrupt("removing the trie root".into()))?;
        let pb = self.blk_mut(parent);
        let slot = pb
            .slot_of(id)
            .ok_or_else(|| Error::Corrupt(format!("{id} missing from parent {parent}")))?;
        if pb.is_pointer() {
            pb.children_mut().remove(slot);
        } else {
            let f = pb.frontier()[slot] as usize;
            pb.remove_node(f);
            pb.refit(&ladder)?;
        }
        self.release(id);
        Ok(())
    }

    // ---- traversals ----

    fn walk<V: Visitor>(&self, v: &mut V) -> Result<()> {
        self.walk_block(self.root, 0, 0, v)
    }

    fn walk_block<V: Visitor>(&self, id: BlockId, row0: u64, col0: u64, v: &mut V) -> Result<()> {
        let b = self.blk(id);
        let depth = b.root_depth();
        if b.is_pointer() {
            let code = b.code(0);
            v.node(depth, code);
            if depth == self.shape.leaf_depth() {
                for s in code.symbols() {
                    v.cell(row0 + u64::from(s >> 1), col0 + u64::from(s & 1));
                }
                return Ok(());
            }
            let half = self.shape.extent_at(depth + 1);
            for (j, s) in code.symbols().enumerate() {
                let (r, c) = (
                    row0 + u64::from(s >> 1) * half,
                    col0 + u64::from(s & 1) * half,
                );
                if v.wants(r, c, half) {
                    let child = *b.children().get(j).ok_or_else(|| {
                        Error::Corrupt(format!("pointer block {id} lacks child {j}"))
                    })?;
                    self.walk_block(child, r, c, v)?;
                }
            }
            return Ok(());
        }
        let mut finger = 0;
        let mut pos = 0;
        self.walk_node(b, &mut finger, &mut pos, depth, row0, col0, v)
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_node<V: Visitor>(
        &self,
        b: &Block,
        finger: &mut usize,
        pos: &mut usize,
        depth: u32,
        row0: u64,
        col0: u64,
        v: &mut V,
    ) -> Result<()> {
        let leaf = self.shape.leaf_depth();
        let x = *pos;
        *pos += 1;
        if x > 0 && b.at_frontier(finger, x) {
            return self.walk_block(b.children()[*finger], row0, col0, v);
        }
        let code = b.code(x);
        v.node(depth, code);
        if depth == leaf {
            for s in code.symbols() {
                v.cell(row0 + u64::from(s >> 1), col0 + u64::from(s & 1));
            }
            return Ok(());
        }
        let half = self.shape.extent_at(depth + 1);
        for s in code.symbols() {
            let (r, c) = (
                row0 + u64::from(s >> 1) * half,
                col0 + u64::from(s & 1) * half,
            );
            if v.wants(r, c, half) {
                self.walk_node(b, finger, pos, depth + 1, r, c, v)?;
            } else {
                *pos = b.subtree_end(*pos, depth + 1, leaf, finger)?;
            }
        }
        Ok(())
    }

    /// Stored points inside rows `r1..=r2` and columns `c1..=c2`, in Morton
    /// order.
    pub fn range(&self, r1: u32, r2: u32, c1: u32, c2: u32) -> Result<Vec<Point>> {
        let side = self.shape.side();
        if r1 > r2 || c1 > c2 || u64::from(r2) >= side || u64::from(c2) >= side {
            return Err(Error::InvalidRange {
                r1,
                r2,
                c1,
                c2,
                side,
            });
        }
        struct Rect {
            r1: u64,
            r2: u64,
            c1: u64,
            c2: u64,
            out: Vec<Point>,
        }
        impl Visitor for Rect {
            fn wants(&self, row0: u64, col0: u64, extent: u64) -> bool {
                row0 <= self.r2
                    && row0 + extent > self.r1
                    && col0 <= self.c2
                    && col0 + extent > self.c1
            }
            fn cell(&mut self, row: u64, col: u64) {
                if (self.r1..=self.r2).contains(&row) && (self.c1..=self.c2).contains(&col) {
                    self.out.push(Point::new(row as u32, col as u32));
                }
            }
        }
        let mut v = Rect {
            r1: r1.into(),
            r2: r2.into(),
            c1: c1.into(),
            c2: c2.into(),
            out: Vec::new(),
        };
        self.walk(&mut v)?;
        Ok(v.out)
    }

    /// Columns of the points in `row`, ascending.
    pub fn neighbors(&self, row: u32) -> Result<Vec<u32>> {
        let last = (self.shape.side() - 1) as u32;
        Ok(self
            .range(row, row, 0, last)?
            .into_iter()
            .map(|p| p.col)
            .collect())
    }

    /// Rows of the points in `col`, ascending.
    pub fn reverse_neighbors(&self, col: u32) -> Result<Vec<u32>> {
        let last = (self.shape.side() - 1) as u32;
        Ok(self
            .range(0, last, col, col)?
            .into_iter()
            .map(|p| p.row)
            .collect())
    }

    /// All points in Morton order.
    pub fn points(&self) -> Result<Vec<Point>> {
        struct All(Vec<Point>);
        impl Visitor for All {
            fn cell(&mut self, row: u64, col: u64) {
                self.0.push(Point::new(row as u32, col as u32));
            }
        }
        let mut v = All(Vec::with_capacity(self.points as usize));
        self.walk(&mut v)?;
        Ok(v.0)
    }

    /// Node codes in breadth-first order: the classical levelwise bitvector.
    pub fn serialize_levelwise(&self) -> Result<Vec<NodeCode>> {
        // Preorder restricted to one depth is left-to-right order, so
        // bucketing a depth-first walk by depth yields the levelwise layout.
        struct Levels(Vec<Vec<NodeCode>>);
        impl Visitor for Levels {
            fn node(&mut self, depth: u32, code: NodeCode) {
                self.0[depth as usize].push(code);
            }
        }
        let mut v = Levels(vec![Vec::new(); self.shape.levels() as usize]);
        self.walk(&mut v)?;
        Ok(v.0.concat())
    }

    /// Levelwise codes as space-separated 4-bit strings.
    pub fn levelwise_text(&self) -> Result<String> {
        Ok(codes::render(&self.serialize_levelwise()?))
    }

    /// Levelwise codes in the packed binary format.
    pub fn to_packed(&self) -> Result<Vec<u8>> {
        serial::encode_packed(self.shape, self.points, &self.serialize_levelwise()?)
    }

    /// Number of distinct trie nodes.
    pub fn node_count(&self) -> u64 {
        self.blocks()
            .map(|(_, b)| {
                if b.is_pointer() {
                    1
                } else {
                    (b.occupancy() - b.frontier().len()) as u64
                }
            })
            .sum()
    }

    pub fn space_report(&self) -> SpaceReport {
        let mut r = SpaceReport {
            points: self.points,
            blocks: 0,
            topology_bits: 0,
            topology_used_bits: 4 * self.node_count(),
            frontier_bits: 0,
            handle_bits: 0,
            bookkeeping_bits: 0,
            bits_per_point: 0.0,
        };
        for (_, b) in self.blocks() {
            r.blocks += 1;
            r.topology_bits += b.topology_bits();
            r.frontier_bits += 32 * b.frontier().len() as u64;
            r.handle_bits += 32 * b.children().len() as u64;
        }
        r.bookkeeping_bits = BLOCK_HEADER_BITS * r.blocks;
        if r.points > 0 {
            r.bits_per_point = r.total_bits() as f64 / r.points as f64;
        }
        r
    }

    /// Checks one block and the links to its children. Returns the children
    /// with their expected root depths and the number of points stored in
    /// the block's own leaf-depth nodes.
    fn check_block(&self, id: BlockId) -> Result<(Vec<(BlockId, u32)>, u64)> {
        let leaf = self.shape.leaf_depth();
        let bad = |msg: String| Err(Error::Corrupt(format!("block {id}: {msg}")));
        let Some(b) = self.block(id) else {
            return bad("dangling handle".into());
        };
        let depth = b.root_depth();
        if depth > leaf {
            return bad(format!("root depth {depth} below the leaves"));
        }
        if b.limit() != self.config.limit_for(depth) {
            return bad(format!("limit {} for depth {depth}", b.limit()));
        }
        if self.ladder.capacity_for(b.occupancy(), b.limit()) != Some(b.capacity()) {
            return bad(format!(
                "capacity {} for occupancy {} under limit {}",
                b.capacity(),
                b.occupancy(),
                b.limit()
            ));
        }
        let is_trie_root = id == self.root;
        let mut kids = Vec::with_capacity(b.children().len());
        let mut leaf_bits = 0u64;
        if b.is_pointer() {
            let code = b.code(0);
            if b.occupancy() != 1 || !b.frontier().is_empty() {
                return bad("pointer block with stored frontier".into());
            }
            if code.is_empty() && !is_trie_root {
                return bad("empty node".into());
            }
            let want = if depth < leaf {
                code.child_count() as usize
            } else {
                0
            };
            if b.children().len() != want {
                return bad(format!("{} children for code {code}", b.children().len()));
            }
            if depth == leaf {
                leaf_bits += u64::from(code.child_count());
            }
            kids.extend(b.children().iter().map(|&c| (c, depth + 1)));
        } else {
            let fr = b.frontier();
            if fr.len() != b.children().len()
                || fr.windows(2).any(|w| w[0] >= w[1])
                || fr.iter().any(|&f| f == 0 || f as usize >= b.occupancy())
            {
                return bad(format!("bad frontier {fr:?}"));
            }
            let info = b.layout(leaf)?;
            for (i, n) in info.iter().enumerate() {
                let code = b.code(i);
                if code.is_empty() && !(is_trie_root && i == 0) {
                    return bad(format!("empty node at {i}"));
                }
                if n.depth == leaf && !n.frontier {
                    leaf_bits += u64::from(code.child_count());
                }
            }
            for (slot, &f) in fr.iter().enumerate() {
                let child = b.children()[slot];
                let Some(cb) = self.block(child) else {
                    return bad(format!("dangling child {child}"));
                };
                if cb.code(0) != b.code(f as usize) {
                    return bad(format!("frontier copy at {f} differs from {child}"));
                }
                kids.push((child, info[f as usize].depth));
            }
        }
        for &(c, d) in &kids {
            let Some(cb) = self.block(c) else {
                return bad(format!("dangling child {c}"));
            };
            if cb.parent() != Some(id) {
                return bad(format!("child {c} names parent {:?}", cb.parent()));
            }
            if cb.root_depth() != d {
                return bad(format!(
                    "child {c} rooted at depth {}, expected {d}",
                    cb.root_depth()
                ));
            }
        }
        Ok((kids, leaf_bits))
    }

    /// Verifies every structural invariant of the block tree: each block is
    /// well formed, reachable exactly once, and the leaf bits add up to the
    /// point count.
    pub fn check_invariants(&self) -> Result<()> {
        let root = self.blk(self.root);
        if root.parent().is_some() || root.root_depth() != 0 {
            return Err(Error::Corrupt(
                "trie root has a parent or nonzero depth".into(),
            ));
        }
        let mut seen = vec![false; self.blocks.len()];
        let mut reached = 0usize;
        let mut leaf_bits = 0u64;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                return Err(Error::Corrupt(format!("block {id} reachable twice")));
            }
            reached += 1;
            let (kids, bits) = self.check_block(id)?;
            leaf_bits += bits;
            stack.extend(kids.into_iter().map(|(c, _)| c));
        }
        if reached != self.block_count() {
            return Err(Error::Corrupt(format!(
                "{} live blocks, {reached} reachable",
                self.block_count()
            )));
        }
        if leaf_bits != self.points {
            return Err(Error::Corrupt(format!(
                "{leaf_bits} leaf bits for {} points",
                self.points
            )));
        }
        Ok(())
    }

    /// Checks the blocks written by the latest insert or delete, and their
    /// parents. Blocks not written keep the invariants they had, so running
    /// this after every mutation of an initially valid trie checks every
    /// block-level invariant at every step without a full scan.
    pub fn check_recent(&self) -> Result<()> {
        let mut ids = self.touched.clone();
        ids.sort_unstable();
        ids.dedup();
        let mut parents = Vec::new();
        for &id in &ids {
            let Some(b) = self.block(id) else { continue };
            self.check_block(id)?;
            match b.parent() {
                Some(p) => {
                    let pb = self.block(p).ok_or_else(|| {
                        Error::Corrupt(format!("block {id}: dangling parent {p}"))
                    })?;
                    if pb.slot_of(id).is_none() {
                        return Err(Error::Corrupt(format!(
                            "block {id} not listed by parent {p}"
                        )));
                    }
                    parents.push(p);
                }
                None if id != self.root => {
                    return Err(Error::Corrupt(format!("block {id} has no parent")));
                }
                None => {}
            }
        }
        parents.sort_unstable();
        parents.dedup();
        for p in parents {
            if ids.binary_search(&p).is_err() {
                self.check_block(p)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    pub(crate) fn sample_points() -> Vec<Point> {
        [
            (0, 2),
            (0, 3),
            (0, 4),
            (0, 5),
            (0, 6),
            (1, 3),
            (1, 7),
            (2, 1),
            (4, 0),
            (4, 1),
            (7, 3),
            (8, 12),
            (11, 12),
        ]
        .into_iter()
        .map(Point::from)
        .collect()
    }

    const SAMPLE: &str =
        "1001 1110 0100 0110 1100 1001 1010 1101 0100 1100 1001 1100 0001 1000 0010";

    fn configs() -> Vec<TrieConfig> {
        vec![
            TrieConfig::default(),
            TrieConfig {
                n_max: 8,
                n1_max: 6,
                n2_max: 5,
                d1: 0,
                d2: 1,
                epsilon: 0.5,
            },
            TrieConfig {
                n_max: 16,
                n1_max: 5,
                n2_max: 1,
                d1: 0,
                d2: 1,
                epsilon: 0.2,
            },
            TrieConfig {
                n_max: 64,
                n1_max: 32,
                n2_max: 16,
                d1: 0,
                d2: 1,
                epsilon: 0.05,
            },
        ]
    }

    fn g16() -> GridShape {
        GridShape::new(16).unwrap()
    }

    #[test]
    fn empty_trie() {
        let t = K2Trie::new(g16(), TrieConfig::default()).unwrap();
        assert_eq!(t.levelwise_text().unwrap(), "0000");
        assert_eq!(t.len(), 0);
        for r in 0..16 {
            for c in 0..16 {
                assert!(!t.contains(Point::new(r, c)).unwrap());
            }
        }
        assert_eq!(t.space_report().topology_used_bits, 4);
        t.check_invariants().unwrap();
    }

    #[test]
    fn side_two_root_is_leaf() {
        for cfg in configs() {
            let mut t = K2Trie::new(GridShape::new(2).unwrap(), cfg).unwrap();
            assert!(t.insert(Point::new(1, 0)).unwrap());
            assert_eq!(t.levelwise_text().unwrap(), "0010");
            assert!(t.contains(Point::new(1, 0)).unwrap());
            assert!(t.delete(Point::new(1, 0)).unwrap());
            assert_eq!(t.levelwise_text().unwrap(), "0000");
            t.check_invariants().unwrap();
        }
    }

    #[test]
    fn sample_construction_every_config() {
        for cfg in configs() {
            let t = K2Trie::from_points(g16(), cfg, sample_points()).unwrap();
            t.check_invariants().unwrap();
            assert_eq!(t.levelwise_text().unwrap(), SAMPLE, "{cfg:?}");
            assert_eq!(t.len(), 13);
            assert_eq!(t.space_report().topology_used_bits, 60);
            assert!(t.contains(Point::new(0, 2)).unwrap());
            assert!(!t.contains(Point::new(15, 15)).unwrap());
            assert!(!t.contains(Point::new(0, 0)).unwrap());
            assert_eq!(t.neighbors(0).unwrap(), [2, 3, 4, 5, 6]);
            assert_eq!(t.reverse_neighbors(1).unwrap(), [2, 4]);
            assert_eq!(t.neighbors(3).unwrap(), Vec::<u32>::new());
            assert_eq!(
                t.range(4, 4, 0, 15).unwrap(),
                [Point::new(4, 0), Point::new(4, 1)]
            );
            assert_eq!(t.range(0, 15, 0, 15).unwrap().len(), 13);
            assert!(t.range(12, 15, 0, 7).unwrap().is_empty());
        }
    }

    #[test]
    fn single_point_side_four() {
        let mut t = K2Trie::new(GridShape::new(4).unwrap(), TrieConfig::default()).unwrap();
        t.insert(Point::new(0, 0)).unwrap();
        assert_eq!(t.levelwise_text().unwrap(), "1000 1000");
    }

    #[test]
    fn double_insert_is_noop() {
        let mut t = K2Trie::from_points(g16(), TrieConfig::default(), sample_points()).unwrap();
        assert!(!t.insert(Point::new(0, 2)).unwrap());
        assert_eq!(t.levelwise_text().unwrap(), SAMPLE);
        assert_eq!(t.len(), 13);
    }

    #[test]
    fn delete_examples() {
        for cfg in configs() {
            let mut t = K2Trie::new(g16(), cfg).unwrap();
            t.insert(Point::new(4, 0)).unwrap();
            assert!(t.delete(Point::new(4, 0)).unwrap());
            assert_eq!(t.levelwise_text().unwrap(), "0000");
            assert_eq!(t.block_count(), 1);
            t.check_invariants().unwrap();

            let mut t = K2Trie::from_points(g16(), cfg, sample_points()).unwrap();
            assert!(!t.delete(Point::new(5, 5)).unwrap());
            assert!(t.delete(Point::new(7, 3)).unwrap());
            t.check_invariants().unwrap();
            let codes = t.serialize_levelwise().unwrap();
            assert_eq!(codes.len(), 14);
            assert_eq!(codes[5].to_string(), "1000");
            let rest: Vec<Point> = sample_points()
                .into_iter()
                .filter(|&p| p != Point::new(7, 3))
                .collect();
            let fresh = K2Trie::from_points(g16(), cfg, rest).unwrap();
            assert_eq!(codes, fresh.serialize_levelwise().unwrap());
        }
    }

    #[test]
    fn out_of_range_is_rejected() {
        let mut t = K2Trie::new(g16(), TrieConfig::default()).unwrap();
        assert!(matches!(
            t.insert(Point::new(16, 0)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            t.contains(Point::new(0, 16)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            t.delete(Point::new(99, 0)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            t.range(3, 2, 0, 0),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            t.range(0, 16, 0, 0),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            TrieConfig {
                n2_max: 96,
                ..TrieConfig::default()
            },
            TrieConfig {
                n2_max: 3,
                ..TrieConfig::default()
            },
            TrieConfig {
                d1: 12,
                ..TrieConfig::default()
            },
            TrieConfig {
                n_max: 510,
                ..TrieConfig::default()
            },
            TrieConfig {
                epsilon: 1.0,
                ..TrieConfig::default()
            },
        ];
        for cfg in bad {
            assert!(K2Trie::new(g16(), cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn random_ops_small_blocks_match_oracle() {
        use rand::{Rng, SeedableRng};
        let shape = GridShape::new(256).unwrap();
        for (seed, cfg) in configs().into_iter().enumerate() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed as u64);
            let mut t = K2Trie::new(shape, cfg).unwrap();
            let mut oracle = BTreeSet::new();
            for step in 0..3000 {
                let p = Point::new(rng.gen_range(0..64), rng.gen_range(0..256));
                if rng.gen_bool(0.65) {
                    assert_eq!(t.insert(p).unwrap(), oracle.insert(p), "step {step}");
                } else {
                    assert_eq!(t.delete(p).unwrap(), oracle.remove(&p), "step {step}");
                }
                if step % 97 == 0 {
                    t.check_invariants().unwrap();
                }
            }
            t.check_invariants().unwrap();
            let mut got = t.points().unwrap();
            got.sort();
            assert_eq!(got, oracle.iter().copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn recent_check_sees_corruption() {
        let cfg = TrieConfig {
            n_max: 8,
            n1_max: 6,
            n2_max: 5,
            d1: 0,
            d2: 1,
            epsilon: 0.5,
        };
        let mut t = K2Trie::from_points(g16(), cfg, sample_points()).unwrap();
        t.check_invariants().unwrap();
        t.insert(Point::new(15, 15)).unwrap();
        t.check_recent().unwrap();
        // Desynchronise a child root from its frontier copy.
        let child = t
            .blocks()
            .find(|(_, b)| !b.is_pointer() && !b.children().is_empty())
            .map(|(_, b)| b.children()[0])
            .unwrap();
        t.touched.clear();
        let code = t.blk(child).code(0);
        let other = if code == NodeCode::FULL {
            NodeCode::from_mask(1)
        } else {
            NodeCode::FULL
        };
        t.blk_mut(child).set_code(0, other);
        assert!(t.check_recent().is_err());
        assert!(t.check_invariants().is_err());

        let mut t = K2Trie::from_points(g16(), cfg, sample_points()).unwrap();
        t.touched.clear();
        let root = t.root;
        t.blk_mut(root).set_parent(Some(root));
        assert!(t.check_recent().is_err());
    }

    #[test]
    fn forced_split_reproduces_top_block() {
        let cfg = TrieConfig {
            n_max: 64,
            n1_max: 32,
            n2_max: 16,
            d1: 0,
            d2: 1,
            epsilon: 0.05,
        };
        let mut t = K2Trie::from_points(g16(), cfg, sample_points()).unwrap();
        assert_eq!(t.block_count(), 1);
        let root = t.root();
        assert_eq!(
            t.block(root).unwrap().render(),
            "1001 1110 0110 1101 0100 1100 1100 1001 1001 1100 0001 0100 1010 1000 0010"
        );
        t.split_block(root, 2).unwrap();
        t.split_block(root, 3).unwrap();
        assert_eq!(
            t.block(root).unwrap().render(),
            "1001 1110 [0110] [1100] 1001 1100 0001 0100 1010 1000 0010"
        );
        t.check_invariants().unwrap();
        assert_eq!(t.levelwise_text().unwrap(), SAMPLE);
    }
}
