//! Insert, query and delete points on a 16x16 grid.

use k2trie::{GridShape, K2Trie, Point, TrieConfig};

fn main() -> k2trie::Result<()> {
    let mut t = K2Trie::new(GridShape::new(16)?, TrieConfig::default())?;
    for (r, c) in [(0, 2), (0, 3), (1, 3), (4, 0), (7, 3), (8, 12), (11, 12)] {
        t.insert(Point::new(r, c))?;
    }
    println!("{} points", t.len());
    println!("(7, 3) stored: {}", t.contains(Point::new(7, 3))?);
    println!("(7, 4) stored: {}", t.contains(Point::new(7, 4))?);

    t.delete(Point::new(7, 3))?;
    println!(
        "after delete, (7, 3) stored: {}",
        t.contains(Point::new(7, 3))?
    );
    println!("levelwise codes: {}", t.levelwise_text()?);
    Ok(())
}
