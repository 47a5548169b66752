//! Space and speed of a fixed dataset under different block parameters.

use k2trie::bench::{self, Dataset};
use k2trie::{GridShape, TrieConfig};

fn main() -> k2trie::Result<()> {
    let shape = GridShape::new(1 << 16)?;
    let ds = Dataset {
        name: "clustered".into(),
        points: bench::clustered(50_000, shape, 7),
        shape,
    };
    println!(
        "{:>5} {:>5} {:>4} {:>7} {:>10} {:>10} {:>8}",
        "eps", "nmax", "n1", "blocks", "bits/pt", "topo/pt", "us/ins"
    );
    for (epsilon, n_max, n1_max) in [
        (0.05, 256, 64),
        (0.05, 512, 96),
        (0.05, 1024, 96),
        (0.2, 512, 96),
        (0.01, 512, 96),
    ] {
        let cfg = TrieConfig {
            epsilon,
            n_max,
            n1_max,
            n2_max: 1,
            d1: 4,
            d2: 7,
        };
        let (t, rec) = bench::bench_insert(&ds, cfg, 1)?;
        let r = t.space_report();
        println!(
            "{epsilon:>5} {n_max:>5} {n1_max:>4} {:>7} {:>10.2} {:>10.2} {:>8.3}",
            r.blocks,
            r.bits_per_point,
            r.used_topology_bits_per_point(),
            rec.mean_insert_us.unwrap_or(0.0)
        );
    }
    Ok(())
}
