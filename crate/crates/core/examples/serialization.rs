//! Writes a trie in the packed binary format and reads it back as a static
//! tree.

use k2trie::{GridShape, K2Trie, Point, StaticK2, TrieConfig};

fn main() -> k2trie::Result<()> {
    let mut t = K2Trie::new(GridShape::new(32)?, TrieConfig::default())?;
    for i in 0..32 {
        t.insert(Point::new(i, (i * 7) % 32))?;
    }
    let bytes = t.to_packed()?;
    println!("{} codes, {} bytes packed", t.node_count(), bytes.len());
    println!("header: {:02x?}", &bytes[..16]);

    let path = std::env::temp_dir().join("k2trie-example.k2t");
    std::fs::write(&path, &bytes)?;
    let s = StaticK2::from_packed(&std::fs::read(&path)?)?;
    println!(
        "read back {} points on side {}",
        s.point_count(),
        s.shape().side()
    );
    assert_eq!(s.codes(), t.serialize_levelwise()?);
    assert!(s.contains(Point::new(3, 21))?);
    std::fs::remove_file(path)?;
    Ok(())
}
