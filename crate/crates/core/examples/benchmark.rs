//! Times insertion and queries on synthetic clustered data and prints CSV.
//!
//! `cargo run --release --example benchmark -- 200000`

use k2trie::bench::{self, Dataset, QueryMode};
use k2trie::{GridShape, TrieConfig};

fn main() -> k2trie::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(100_000);
    let shape = GridShape::new(1 << 20)?;
    let ds = Dataset {
        name: format!("clustered-{n}"),
        points: bench::clustered(n, shape, 1),
        shape,
    };
    let (t, insert) = bench::bench_insert(&ds, TrieConfig::default(), 1)?;
    let existing = bench::bench_query(&t, &ds.name, QueryMode::Existing, n, 2)?;
    let random = bench::bench_query(&t, &ds.name, QueryMode::Random, n, 3)?;
    bench::write_csv(std::io::stdout().lock(), &[insert, existing, random])?;
    Ok(())
}
