//! Shows how a trie is cut into blocks: a single block first, then two
//! forced splits, then automatic growth with small block limits.

use k2trie::{GridShape, K2Trie, Point, TrieConfig};

fn main() -> k2trie::Result<()> {
    let pts: Vec<Point> = [
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
    .collect();
    let roomy = TrieConfig {
        epsilon: 0.05,
        n_max: 64,
        n1_max: 32,
        n2_max: 16,
        d1: 0,
        d2: 1,
    };
    let mut t = K2Trie::from_points(GridShape::new(16)?, roomy, pts.iter().copied())?;
    let root = t.root();
    println!("one block:   {}", t.block(root).unwrap().render());
    t.split_block(root, 2)?;
    t.split_block(root, 3)?;
    println!("after split: {}", t.block(root).unwrap().render());
    for (id, b) in t.blocks() {
        println!(
            "  {id} depth {} cap {}: {}",
            b.root_depth(),
            b.capacity(),
            b.render()
        );
    }

    let tight = TrieConfig {
        epsilon: 0.5,
        n_max: 8,
        n1_max: 6,
        n2_max: 5,
        d1: 0,
        d2: 1,
    };
    let t = K2Trie::from_points(GridShape::new(16)?, tight, pts)?;
    t.check_invariants()?;
    println!("with limits 5/6/8: {} blocks", t.block_count());
    for (id, b) in t.blocks() {
        println!(
            "  {id} depth {} parent {:?}: {}",
            b.root_depth(),
            b.parent().map(|p| p.to_string()),
            b.render()
        );
    }
    Ok(())
}
