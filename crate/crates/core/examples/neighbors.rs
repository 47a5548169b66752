//! A small directed graph as an adjacency matrix: successors, predecessors
//! and a rectangular range query.

use k2trie::{GridShape, K2Trie, Point, TrieConfig};

fn main() -> k2trie::Result<()> {
    let edges = [
        (0, 1),
        (0, 2),
        (1, 2),
        (2, 0),
        (2, 3),
        (3, 3),
        (5, 1),
        (6, 2),
        (6, 7),
    ];
    let t = K2Trie::from_points(
        GridShape::new(8)?,
        TrieConfig::default(),
        edges.iter().map(|&(u, v)| Point::new(u, v)),
    )?;
    for u in 0..8 {
        let out = t.neighbors(u)?;
        if !out.is_empty() {
            println!("{u} -> {out:?}");
        }
    }
    println!("into 2: {:?}", t.reverse_neighbors(2)?);
    let block: Vec<String> = t
        .range(0, 3, 2, 3)?
        .iter()
        .map(ToString::to_string)
        .collect();
    println!("rows 0..=3, cols 2..=3: {}", block.join(" "));
    Ok(())
}
