//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::panic;
use std::time::{Duration, Instant};

use k2trie::bench::{self, Dataset, VerifyOptions};
use k2trie::{
    Block, BlockId, Error, GridShape, K2Trie, MortonCode, NodeCode, Point, StaticK2, TrieConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLE_LEVELWISE: &str =
    "1001 1110 0100 0110 1100 1001 1010 1101 0100 1100 1001 1100 0001 1000 0010";

fn sample_points() -> Vec<Point> {
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

fn within(start: Instant, limit: Duration, what: &str) -> String {
    let t = start.elapsed();
    assert!(t < limit, "{what} took {t:?}, limit {limit:?}");
    format!("{t:.2?}")
}

fn sample_construction() -> String {
    let start = Instant::now();
    let shape = GridShape::new(16).unwrap();
    for seed in 0..20 {
        let mut pts = sample_points();
        pts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let t = K2Trie::from_points(shape, TrieConfig::default(), pts).unwrap();
        assert_eq!(
            t.levelwise_text().unwrap(),
            SAMPLE_LEVELWISE,
            "order seed {seed}"
        );
    }
    format!(
        "20 orders, {}",
        within(start, Duration::from_secs(1), "construction")
    )
}

fn sample_block_layout() -> String {
    let start = Instant::now();
    let cfg = TrieConfig {
        epsilon: 0.05,
        n_max: 64,
        n1_max: 32,
        n2_max: 16,
        d1: 0,
        d2: 1,
    };
    let mut t = K2Trie::from_points(GridShape::new(16).unwrap(), cfg, sample_points()).unwrap();
    assert_eq!(t.block_count(), 1);
    let root = t.root();
    // Cut off the two subtrees that become frontier nodes 2 and 3.
    t.split_block(root, 2).unwrap();
    t.split_block(root, 3).unwrap();
    let b = t.block(root).unwrap();
    assert_eq!(
        b.render(),
        "1001 1110 [0110] [1100] 1001 1100 0001 0100 1010 1000 0010"
    );
    assert_eq!(b.frontier(), &[2, 3]);
    t.check_invariants().unwrap();
    assert_eq!(t.levelwise_text().unwrap(), SAMPLE_LEVELWISE);
    within(start, Duration::from_secs(1), "layout")
}

fn oracle_fuzz() -> String {
    let start = Instant::now();
    let shape = GridShape::new(1024).unwrap();
    let mut t = K2Trie::new(shape, TrieConfig::default()).unwrap();
    let rep = bench::verify(&mut t, &VerifyOptions::new(shape, 100_000, 42)).unwrap();
    assert!(rep.passed(), "{:?}", rep.divergence);
    assert_eq!(rep.ops, 100_000);
    assert_eq!(rep.checkpoints, 100);
    format!(
        "{} ops, {} checkpoints, {}",
        rep.ops,
        rep.checkpoints,
        within(start, Duration::from_secs(30), "fuzz")
    )
}

fn topology_bit_equality() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let shape = GridShape::from_levels(rng.gen_range(1..=10)).unwrap();
        let side = shape.side() as u32;
        let p = rng.gen_range(0..=1000);
        let pts: Vec<Point> = (0..p)
            .map(|_| Point::new(rng.gen_range(0..side), rng.gen_range(0..side)))
            .collect();
        let t = K2Trie::from_points(shape, TrieConfig::default(), pts.iter().copied()).unwrap();
        let s = StaticK2::build(pts, shape).unwrap();
        assert_eq!(4 * t.node_count() as usize, s.bit_len(), "case {case}");
        assert_eq!(
            t.space_report().topology_used_bits as usize,
            s.bit_len(),
            "case {case}"
        );
    }
    "100 sets".into()
}

/// Split rule evaluated over every node, using depths and sizes from an
/// independent recursive parse.
fn exhaustive_split(
    codes: &[NodeCode],
    frontier: &[u32],
    root_depth: u32,
    leaf: u32,
) -> Option<usize> {
    fn parse(
        codes: &[NodeCode],
        fr: &[u32],
        i: usize,
        d: u32,
        leaf: u32,
        out: &mut Vec<(u32, usize)>,
    ) -> usize {
        out[i].0 = d;
        let mut size = 1;
        if d < leaf && !fr.contains(&(i as u32)) {
            for _ in 0..codes[i].child_count() {
                size += parse(codes, fr, i + size, d + 1, leaf, out);
            }
        }
        out[i].1 = size;
        size
    }
    let mut info = vec![(0, 0); codes.len()];
    assert_eq!(
        parse(codes, frontier, 0, root_depth, leaf, &mut info),
        codes.len()
    );
    let occ = codes.len();
    let eligible: Vec<usize> = (1..occ)
        .filter(|&i| !frontier.contains(&(i as u32)) && info[i].0 < leaf)
        .collect();
    if let Some(&w) = eligible
        .iter()
        .find(|&&i| 4 * info[i].1 >= occ && 4 * info[i].1 <= 3 * occ)
    {
        return Some(w);
    }
    eligible
        .iter()
        .copied()
        .min_by_key(|&i| ((occ as isize - 2 * info[i].1 as isize).unsigned_abs(), i))
}

fn random_block(rng: &mut ChaCha8Rng, leaf: u32) -> (Vec<NodeCode>, Vec<u32>, u32) {
    fn grow(rng: &mut ChaCha8Rng, d: u32, leaf: u32, codes: &mut Vec<NodeCode>, fr: &mut Vec<u32>) {
        // Fewer children deeper down keeps blocks near a few hundred codes.
        let code = loop {
            let c = NodeCode::from_mask(rng.gen_range(1..16));
            if d < 2 || c.child_count() <= 2 || rng.gen_bool(0.2) {
                break c;
            }
        };
        codes.push(code);
        if d >= leaf {
            return;
        }
        for _ in 0..code.child_count() {
            if rng.gen_bool(0.15) {
                fr.push(codes.len() as u32);
                codes.push(NodeCode::from_mask(rng.gen_range(1..16)));
            } else {
                grow(rng, d + 1, leaf, codes, fr);
            }
        }
    }
    loop {
        let root_depth = rng.gen_range(0..=leaf);
        let (mut codes, mut fr) = (Vec::new(), Vec::new());
        grow(rng, root_depth, leaf, &mut codes, &mut fr);
        if codes.len() <= 512 {
            return (codes, fr, root_depth);
        }
    }
}

fn tables_and_properties() -> String {
    for m in 0..16u8 {
        let code = NodeCode::from_mask(m);
        for s in 0..4u8 {
            let want = (0..s).filter(|&j| m >> j & 1 == 1).count() as u8;
            assert_eq!(code.children_to_skip(s), want, "{code} {s}");
        }
    }
    for side in [2u64, 4, 16, 64] {
        let shape = GridShape::new(side).unwrap();
        let levels = shape.levels();
        for r in 0..side as u32 {
            for c in 0..side as u32 {
                let p = Point::new(r, c);
                let want: Vec<u8> = (0..levels)
                    .map(|l| {
                        let b = levels - 1 - l;
                        (((r >> b) & 1) * 2 + ((c >> b) & 1)) as u8
                    })
                    .collect();
                let m = shape.encode(p).unwrap();
                assert_eq!(m.symbols(), want, "{p} on side {side}");
                assert_eq!(
                    shape
                        .decode(&MortonCode::from_symbols(&want, shape).unwrap())
                        .unwrap(),
                    p
                );
            }
        }
    }
    let leaf = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut splittable = 0;
    for case in 0..1000 {
        let (codes, fr, root_depth) = random_block(&mut rng, leaf);
        let children = (0..fr.len() as u32).map(BlockId::new).collect();
        let b = Block::from_parts(&codes, fr.clone(), children, root_depth, 512, 512).unwrap();
        let got = match b.choose_split_node(leaf) {
            Ok(w) => Some(w),
            Err(Error::SplitImpossible) => None,
            Err(e) => panic!("case {case}: {e}"),
        };
        assert_eq!(
            got,
            exhaustive_split(&codes, &fr, root_depth, leaf),
            "case {case}: {}",
            b.render()
        );
        splittable += usize::from(got.is_some());
    }
    format!("64 skip cases, 4 grids, 1000 blocks ({splittable} splittable)")
}

fn structural_invariants() -> String {
    let shape = GridShape::new(1024).unwrap();
    assert_eq!(shape.leaf_depth(), shape.levels() - 1);
    let configs = [
        TrieConfig::default(),
        TrieConfig {
            epsilon: 0.25,
            n_max: 32,
            n1_max: 16,
            n2_max: 8,
            d1: 2,
            d2: 4,
        },
        TrieConfig {
            epsilon: 0.1,
            n_max: 64,
            n1_max: 12,
            n2_max: 1,
            d1: 3,
            d2: 6,
        },
    ];
    let mut checks = 0;
    for (i, cfg) in configs.into_iter().enumerate() {
        let mut t = K2Trie::new(shape, cfg).unwrap();
        let mut opts = VerifyOptions::new(shape, 100_000, 42 + i as u64);
        opts.check_each_mutation = true;
        let rep = bench::verify(&mut t, &opts).unwrap();
        assert!(rep.passed(), "config {i}: {:?}", rep.divergence);
        t.check_invariants().unwrap();
        checks += rep.structural_checks;
    }
    format!("3 configs, {checks} post-mutation checks")
}

fn performance_smoke() -> String {
    let shape = GridShape::new(1 << 20).unwrap();
    let p = 1_000_000usize;
    let ds = Dataset {
        name: "clustered".into(),
        points: bench::clustered(p, shape, 11),
        shape,
    };
    let (t, rec) = bench::bench_insert(&ds, TrieConfig::default(), 3).unwrap();
    let (_, again) = bench::bench_insert(&ds, TrieConfig::default(), 3).unwrap();
    assert_eq!(rec.points, p as u64);
    let mean = rec.mean_insert_us.unwrap();
    assert!(mean.is_finite() && mean > 0.0);
    assert!(again.mean_insert_us.unwrap().is_finite());
    let untimed = |r: &bench::BenchRecord| bench::BenchRecord {
        mean_insert_us: None,
        ..r.clone()
    };
    assert_eq!(untimed(&rec), untimed(&again));

    let mut buf = Vec::new();
    bench::write_csv(&mut buf, std::slice::from_ref(&rec)).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].len(), header.len());
    let col = |name: &str| &rows[0][header.iter().position(|h| h == name).unwrap()];
    assert_eq!(col("points"), "1000000");
    assert!(col("mean_insert_us").parse::<f64>().unwrap().is_finite());

    let used = t.space_report().used_topology_bits_per_point();
    let cells = (shape.side() as f64).powi(2);
    let envelope = 4.0 * (cells / p as f64).log(4.0) + 16.0;
    assert!(used <= envelope, "{used} bits/point over {envelope}");
    format!(
        "{mean:.3} us/insert, {used:.2} topology bits/point (envelope {envelope:.1}), {:.2} total bits/point",
        rec.bits_per_point
    )
}

fn delete_inverse() -> String {
    let shape = GridShape::new(1024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut random_point = || Point::new(rng.gen_range(0..1024), rng.gen_range(0..1024));
    let base: Vec<Point> = (0..3000).map(|_| random_point()).collect();
    let transient: Vec<Point> = (0..1000).map(|_| random_point()).collect();
    // Each transient point is inserted, then deleted later.
    let mut ops: Vec<(bool, Point)> = base.iter().map(|&p| (true, p)).collect();
    for &q in &transient {
        let i = rng.gen_range(0..=ops.len());
        ops.insert(i, (true, q));
        let j = rng.gen_range(i + 1..=ops.len());
        ops.insert(j, (false, q));
    }
    let mut t = K2Trie::new(shape, TrieConfig::default()).unwrap();
    let mut oracle = BTreeSet::new();
    for &(ins, p) in &ops {
        if ins {
            t.insert(p).unwrap();
            oracle.insert(p);
        } else {
            t.delete(p).unwrap();
            oracle.remove(&p);
        }
    }
    t.check_invariants().unwrap();
    let fresh = K2Trie::from_points(shape, TrieConfig::default(), oracle.iter().copied()).unwrap();
    assert_eq!(
        t.serialize_levelwise().unwrap(),
        fresh.serialize_levelwise().unwrap()
    );
    assert_eq!(
        t.serialize_levelwise().unwrap(),
        StaticK2::build(oracle.iter().copied(), shape)
            .unwrap()
            .codes()
    );
    format!(
        "1000 pairs over {} base points, {} survive",
        base.len(),
        oracle.len()
    )
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 8] = [
        ("sample construction", sample_construction),
        ("sample block layout", sample_block_layout),
        ("oracle fuzz", oracle_fuzz),
        ("topology bit equality", topology_bit_equality),
        ("tables and properties", tables_and_properties),
        ("structural invariants", structural_invariants),
        ("performance smoke", performance_smoke),
        ("delete inverse", delete_inverse),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match panic::catch_unwind(run) {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
