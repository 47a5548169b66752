//! Builds the static levelwise tree of a point set and walks it with rank.

use k2trie::{GridShape, K2Trie, Point, StaticK2, TrieConfig};

fn main() -> k2trie::Result<()> {
    let shape = GridShape::new(16)?;
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
    let s = StaticK2::build(pts.iter().copied(), shape)?;
    println!("{}", s.text());
    println!(
        "{} nodes, level offsets {:?}",
        s.node_count(),
        s.level_offsets()
    );
    for t in s.code(0).symbols() {
        let child = s.child_node(0, t)?;
        println!("root child {t} is node {child} ({})", s.code(child));
    }
    println!("node 5, child 3 -> node {}", s.child_node(5, 3)?);

    let dynamic = K2Trie::from_points(shape, TrieConfig::default(), pts)?;
    assert_eq!(dynamic.serialize_levelwise()?, s.codes());
    println!("dynamic trie serializes to the same codes");
    Ok(())
}
