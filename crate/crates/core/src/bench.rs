//! Dataset ingestion, timed benchmarks, the oracle fuzz harness and dumps.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codes::NodeCode;
use crate::error::{Error, Result};
use crate::morton::{GridShape, Point};
use crate::static_k2::StaticK2;
use crate::trie::{K2Trie, TrieConfig};

/// A list of points read from an edge-list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub points: Vec<Point>,
    pub shape: GridShape,
}

/// Smallest power-of-two side, at least 2, covering every point.
pub fn covering_side(points: &[Point]) -> u64 {
    let max = points.iter().map(|p| p.row.max(p.col)).max().unwrap_or(0);
    (u64::from(max) + 1).next_power_of_two().max(2)
}

/// Parses `row col` lines. Blank lines and `#` comments are skipped;
/// duplicates are kept.
pub fn parse_edges(name: &str, text: &str, side: Option<u64>) -> Result<Dataset> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let mut fields = line.split_whitespace();
        let mut coord = |what: &str| -> Result<u32> {
            let f = fields
                .next()
                .ok_or_else(|| err(format!("missing {what}")))?;
            f.parse().map_err(|_| err(format!("bad {what} {f:?}")))
        };
        let row = coord("row")?;
        let col = coord("column")?;
        if let Some(extra) = fields.next() {
            return Err(err(format!("unexpected field {extra:?}")));
        }
        let p = Point::new(row, col);
        if let Some(side) = side {
            if u64::from(row) >= side || u64::from(col) >= side {
                return Err(err(format!("point {p} outside side {side}")));
            }
        }
        points.push(p);
    }
    let shape = GridShape::new(side.unwrap_or_else(|| covering_side(&points)))?;
    Ok(Dataset {
        name: name.to_string(),
        points,
        shape,
    })
}

pub fn ingest(path: &Path, side: Option<u64>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_edges(&name, &text, side)
}

/// `n` distinct points in dense square clusters scattered over the grid.
pub fn clustered(n: usize, shape: GridShape, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = shape.side();
    let spread = 64u64.min(side);
    let per_cluster = 256usize;
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let r0 = rng.gen_range(0..=side - spread);
        let c0 = rng.gen_range(0..=side - spread);
        for _ in 0..per_cluster {
            if out.len() == n {
                break;
            }
            let p = Point::new(
                (r0 + rng.gen_range(0..spread)) as u32,
                (c0 + rng.gen_range(0..spread)) as u32,
            );
            if seen.insert(p) {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    /// Stored points in random order; every answer is true.
    Existing,
    /// Uniformly random cells.
    Random,
}

impl FromStr for QueryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "existing" => Ok(Self::Existing),
            "random" => Ok(Self::Random),
            _ => Err(Error::InvalidConfig(format!("unknown query mode {s:?}"))),
        }
    }
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Existing => "existing",
            Self::Random => "random",
        })
    }
}

/// One CSV row. Every configuration field is included so a row can be
/// reproduced on its own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub side: u64,
    pub epsilon: f64,
    pub n_max: usize,
    pub n1_max: usize,
    pub n2_max: usize,
    pub d1: u32,
    pub d2: u32,
    pub seed: u64,
    pub points: u64,
    pub mean_insert_us: Option<f64>,
    pub query_mode: Option<String>,
    pub queries: u64,
    pub hits: u64,
    pub mean_query_us: Option<f64>,
    pub bits_per_point: f64,
    pub topology_used_bits_per_point: f64,
    pub blocks: u64,
}

impl BenchRecord {
    fn new(dataset: &str, t: &K2Trie, seed: u64) -> Self {
        let c = t.config();
        let r = t.space_report();
        Self {
            dataset: dataset.to_string(),
            side: t.shape().side(),
            epsilon: c.epsilon,
            n_max: c.n_max,
            n1_max: c.n1_max,
            n2_max: c.n2_max,
            d1: c.d1,
            d2: c.d2,
            seed,
            points: t.len(),
            mean_insert_us: None,
            query_mode: None,
            queries: 0,
            hits: 0,
            mean_query_us: None,
            bits_per_point: r.bits_per_point,
            topology_used_bits_per_point: r.used_topology_bits_per_point(),
            blocks: r.blocks,
        }
    }
}

fn mean_us(total: std::time::Duration, n: usize) -> Option<f64> {
    (n > 0).then(|| total.as_secs_f64() * 1e6 / n as f64)
}

/// Inserts the dataset one point at a time in a seeded random order.
pub fn bench_insert(ds: &Dataset, config: TrieConfig, seed: u64) -> Result<(K2Trie, BenchRecord)> {
    let mut order = ds.points.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut t = K2Trie::new(ds.shape, config)?;
    let start = Instant::now();
    for &p in &order {
        t.insert(p)?;
    }
    let elapsed = start.elapsed();
    let mut rec = BenchRecord::new(&ds.name, &t, seed);
    rec.mean_insert_us = mean_us(elapsed, order.len());
    Ok((t, rec))
}

/// Times `count` membership queries.
pub fn bench_query(
    t: &K2Trie,
    dataset: &str,
    mode: QueryMode,
    count: usize,
    seed: u64,
) -> Result<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let queries: Vec<Point> = match mode {
        QueryMode::Existing => {
            let mut stored = t.points()?;
            stored.shuffle(&mut rng);
            stored
                .into_iter()
                .cycle()
                .take(if t.is_empty() { 0 } else { count })
                .collect()
        }
        QueryMode::Random => {
            let side = t.shape().side();
            (0..count)
                .map(|_| Point::new(rng.gen_range(0..side) as u32, rng.gen_range(0..side) as u32))
                .collect()
        }
    };
    let mut hits = 0u64;
    let start = Instant::now();
    for &p in &queries {
        hits += u64::from(t.contains(p)?);
    }
    let elapsed = start.elapsed();
    let mut rec = BenchRecord::new(dataset, t, seed);
    rec.query_mode = Some(mode.to_string());
    rec.queries = queries.len() as u64;
    rec.hits = hits;
    rec.mean_query_us = mean_us(elapsed, queries.len());
    Ok(rec)
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Text,
    Binary,
}

impl FromStr for DumpFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "binary" => Ok(Self::Binary),
            _ => Err(Error::InvalidConfig(format!("unknown dump format {s:?}"))),
        }
    }
}

/// Writes the levelwise codes of `t`.
pub fn dump<W: Write>(t: &K2Trie, format: DumpFormat, mut out: W) -> Result<()> {
    match format {
        DumpFormat::Text => writeln!(out, "{}", t.levelwise_text()?)?,
        DumpFormat::Binary => out.write_all(&t.to_packed()?)?,
    }
    out.flush()?;
    Ok(())
}

/// The operations the fuzz harness drives.
pub trait Relation {
    fn insert(&mut self, p: Point) -> Result<bool>;
    fn delete(&mut self, p: Point) -> Result<bool>;
    fn contains(&self, p: Point) -> Result<bool>;
    fn range(&self, r1: u32, r2: u32, c1: u32, c2: u32) -> Result<Vec<Point>>;
    fn levelwise(&self) -> Result<Vec<NodeCode>>;
    /// Cheap structural check, run after each mutation when requested.
    fn check(&self) -> Result<()> {
        Ok(())
    }
    /// Complete structural check, run at checkpoints when requested.
    fn check_full(&self) -> Result<()> {
        self.check()
    }
}

impl Relation for K2Trie {
    fn insert(&mut self, p: Point) -> Result<bool> {
        K2Trie::insert(self, p)
    }
    fn delete(&mut self, p: Point) -> Result<bool> {
        K2Trie::delete(self, p)
    }
    fn contains(&self, p: Point) -> Result<bool> {
        K2Trie::contains(self, p)
    }
    fn range(&self, r1: u32, r2: u32, c1: u32, c2: u32) -> Result<Vec<Point>> {
        K2Trie::range(self, r1, r2, c1, c2)
    }
    fn levelwise(&self) -> Result<Vec<NodeCode>> {
        self.serialize_levelwise()
    }
    fn check(&self) -> Result<()> {
        self.check_recent()
    }
    fn check_full(&self) -> Result<()> {
        self.check_invariants()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub shape: GridShape,
    pub ops: usize,
    pub seed: u64,
    /// Compare against a static rebuild every this many operations.
    pub checkpoint: usize,
    pub check_each_mutation: bool,
}

impl VerifyOptions {
    pub fn new(shape: GridShape, ops: usize, seed: u64) -> Self {
        Self {
            shape,
            ops,
            seed,
            checkpoint: 1000,
            check_each_mutation: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub ops: usize,
    pub inserts: usize,
    pub deletes: usize,
    pub lookups: usize,
    pub ranges: usize,
    pub checkpoints: usize,
    pub structural_checks: usize,
    pub final_points: usize,
    /// First disagreement, with the operation index.
    pub divergence: Option<(usize, String)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Runs a seeded random operation mix on `rel` and on a `BTreeSet` oracle,
/// stopping at the first disagreement.
pub fn verify<R: Relation>(rel: &mut R, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let side = opts.shape.side();
    let mut oracle: BTreeSet<Point> = BTreeSet::new();
    let mut live: Vec<Point> = Vec::new();
    let mut rep = VerifyReport::default();
    let random_point = |rng: &mut ChaCha8Rng| {
        Point::new(rng.gen_range(0..side) as u32, rng.gen_range(0..side) as u32)
    };

    for i in 0..opts.ops {
        rep.ops = i + 1;
        let roll = rng.gen_range(0..100);
        let mutated;
        let bad: Option<String> = if roll < 40 {
            let p = random_point(&mut rng);
            rep.inserts += 1;
            mutated = true;
            let got = rel.insert(p)?;
            let want = oracle.insert(p);
            if want {
                live.push(p);
            }
            (got != want).then(|| format!("insert {p}: got {got}, expected {want}"))
        } else if roll < 65 {
            let from_live = !live.is_empty() && rng.gen_bool(0.8);
            let p = if from_live {
                let k = rng.gen_range(0..live.len());
                live.swap_remove(k)
            } else {
                random_point(&mut rng)
            };
            rep.deletes += 1;
            mutated = true;
            let got = rel.delete(p)?;
            let want = oracle.remove(&p);
            if want && !from_live {
                live.retain(|&q| q != p);
            }
            (got != want).then(|| format!("delete {p}: got {got}, expected {want}"))
        } else if roll < 90 {
            let p = if !live.is_empty() && rng.gen_bool(0.5) {
                live[rng.gen_range(0..live.len())]
            } else {
                random_point(&mut rng)
            };
            rep.lookups += 1;
            mutated = false;
            let got = rel.contains(p)?;
            let want = oracle.contains(&p);
            (got != want).then(|| format!("contains {p}: got {got}, expected {want}"))
        } else {
            let span = side.min(64);
            let r1 = rng.gen_range(0..side) as u32;
            let c1 = rng.gen_range(0..side) as u32;
            let r2 = (u64::from(r1) + rng.gen_range(0..span)).min(side - 1) as u32;
            let c2 = (u64::from(c1) + rng.gen_range(0..span)).min(side - 1) as u32;
            rep.ranges += 1;
            mutated = false;
            let mut got = rel.range(r1, r2, c1, c2)?;
            got.sort();
            let want: Vec<Point> = (r1..=r2)
                .flat_map(|r| oracle.range(Point::new(r, c1)..=Point::new(r, c2)).copied())
                .collect();
            (got != want)
                .then(|| format!("range {r1}..={r2} x {c1}..={c2}: got {got:?}, expected {want:?}"))
        };
        if let Some(msg) = bad {
            rep.divergence = Some((i, msg));
            break;
        }
        if mutated && opts.check_each_mutation {
            rep.structural_checks += 1;
            if let Err(e) = rel.check() {
                rep.divergence = Some((i, format!("structure: {e}")));
                break;
            }
        }
        if opts.checkpoint > 0 && (i + 1) % opts.checkpoint == 0 {
            rep.checkpoints += 1;
            if opts.check_each_mutation {
                if let Err(e) = rel.check_full() {
                    rep.divergence = Some((i, format!("structure: {e}")));
                    break;
                }
            }
            let want = StaticK2::build(oracle.iter().copied(), opts.shape)?.codes();
            if rel.levelwise()? != want {
                rep.divergence = Some((
                    i,
                    "levelwise serialization differs from static rebuild".into(),
                ));
                break;
            }
        }
    }
    rep.final_points = oracle.len();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "0 2\n0 3\n0 4\n0 5\n0 6\n1 3\n1 7\n2 1\n4 0\n4 1\n7 3\n8 12\n11 12\n";

    #[test]
    fn parse_examples() {
        let d = parse_edges("t", "0 2\n1 3\n", None).unwrap();
        assert_eq!(d.points.len(), 2);
        assert_eq!(d.shape.side(), 4);
        let d = parse_edges("sample", SAMPLE, Some(16)).unwrap();
        assert_eq!(d.shape.side(), 16);
        assert_eq!(d.points.len(), 13);
        let d = parse_edges("t", "# header\n\n3 3 # trailing\n3 3\n", None).unwrap();
        assert_eq!(d.points, vec![Point::new(3, 3); 2]);
        assert_eq!(d.shape.side(), 4);
        assert_eq!(parse_edges("t", "", None).unwrap().shape.side(), 2);
        match parse_edges("t", "a b\n", None) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_edges("t", "0 1\n\n5\n", None) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_edges("t", "0 16\n", Some(16)),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_edges("t", "0 1 2\n", None).is_err());
        assert!(parse_edges("t", "0 1\n", Some(12)).is_err());
    }

    #[test]
    fn sample_insert_bench() {
        let ds = parse_edges("sample", SAMPLE, Some(16)).unwrap();
        let (t, rec) = bench_insert(&ds, TrieConfig::default(), 7).unwrap();
        assert_eq!(rec.points, 13);
        assert!((rec.topology_used_bits_per_point - 60.0 / 13.0).abs() < 1e-12);
        assert!(rec.mean_insert_us.unwrap().is_finite());
        let q = bench_query(&t, "sample", QueryMode::Existing, 13, 1).unwrap();
        assert_eq!((q.queries, q.hits), (13, 13));
    }

    #[test]
    fn empty_records() {
        let ds = parse_edges("e", "", Some(16)).unwrap();
        let (t, rec) = bench_insert(&ds, TrieConfig::default(), 0).unwrap();
        assert_eq!(rec.points, 0);
        assert_eq!(rec.mean_insert_us, None);
        assert_eq!(rec.bits_per_point, 0.0);
        let q = bench_query(&t, "e", QueryMode::Random, 0, 0).unwrap();
        assert_eq!(q.queries, 0);
        assert_eq!(q.mean_query_us, None);
        let q = bench_query(&t, "e", QueryMode::Existing, 10, 0).unwrap();
        assert_eq!(q.queries, 0);
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let ds = Dataset {
            name: "c".into(),
            points: clustered(2000, GridShape::new(1024).unwrap(), 3),
            shape: GridShape::new(1024).unwrap(),
        };
        let (a, _) = bench_insert(&ds, TrieConfig::default(), 5).unwrap();
        let (b, _) = bench_insert(&ds, TrieConfig::default(), 5).unwrap();
        assert_eq!(
            a.serialize_levelwise().unwrap(),
            b.serialize_levelwise().unwrap()
        );
        let qa = bench_query(&a, "c", QueryMode::Random, 5000, 9).unwrap();
        let qb = bench_query(&b, "c", QueryMode::Random, 5000, 9).unwrap();
        assert_eq!(qa.hits, qb.hits);
        assert_eq!(
            clustered(500, GridShape::new(1024).unwrap(), 3),
            clustered(500, GridShape::new(1024).unwrap(), 3)
        );
    }

    #[test]
    fn clustered_points_are_distinct_and_in_range() {
        let shape = GridShape::new(256).unwrap();
        let pts = clustered(5000, shape, 1);
        assert_eq!(pts.len(), 5000);
        assert_eq!(pts.iter().collect::<HashSet<_>>().len(), 5000);
        assert!(pts.iter().all(|p| shape.check(*p).is_ok()));
    }

    #[test]
    fn csv_has_header_and_all_fields() {
        let ds = parse_edges("sample", SAMPLE, Some(16)).unwrap();
        let (_, rec) = bench_insert(&ds, TrieConfig::default(), 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        for field in [
            "epsilon",
            "n_max",
            "n1_max",
            "n2_max",
            "d1",
            "d2",
            "seed",
            "bits_per_point",
        ] {
            assert!(header.split(',').any(|h| h == field), "{field}");
        }
        assert_eq!(
            lines.next().unwrap().split(',').count(),
            header.split(',').count()
        );
    }

    #[test]
    fn dump_formats() {
        let ds = parse_edges("sample", SAMPLE, Some(16)).unwrap();
        let (t, _) = bench_insert(&ds, TrieConfig::default(), 1).unwrap();
        let mut text = Vec::new();
        dump(&t, DumpFormat::Text, &mut text).unwrap();
        assert_eq!(
            String::from_utf8(text).unwrap(),
            "1001 1110 0100 0110 1100 1001 1010 1101 0100 1100 1001 1100 0001 1000 0010\n"
        );
        let mut bin = Vec::new();
        dump(&t, DumpFormat::Binary, &mut bin).unwrap();
        let s = StaticK2::from_packed(&bin).unwrap();
        assert_eq!(s.codes(), t.serialize_levelwise().unwrap());
        let empty = K2Trie::new(GridShape::new(16).unwrap(), TrieConfig::default()).unwrap();
        let mut text = Vec::new();
        dump(&empty, DumpFormat::Text, &mut text).unwrap();
        assert_eq!(text, b"0000\n");
    }

    /// Loses every 50th successful insertion.
    struct Forgetful {
        inner: K2Trie,
        inserts: usize,
    }

    impl Relation for Forgetful {
        fn insert(&mut self, p: Point) -> Result<bool> {
            if self.inner.contains(p)? {
                return Ok(false);
            }
            self.inserts += 1;
            if self.inserts.is_multiple_of(50) {
                return Ok(true);
            }
            self.inner.insert(p)
        }
        fn delete(&mut self, p: Point) -> Result<bool> {
            self.inner.delete(p)
        }
        fn contains(&self, p: Point) -> Result<bool> {
            self.inner.contains(p)
        }
        fn range(&self, r1: u32, r2: u32, c1: u32, c2: u32) -> Result<Vec<Point>> {
            self.inner.range(r1, r2, c1, c2)
        }
        fn levelwise(&self) -> Result<Vec<NodeCode>> {
            self.inner.serialize_levelwise()
        }
    }

    #[test]
    fn harness_catches_a_faulty_relation() {
        let shape = GridShape::new(64).unwrap();
        let mut bad = Forgetful {
            inner: K2Trie::new(shape, TrieConfig::default()).unwrap(),
            inserts: 0,
        };
        let rep = verify(&mut bad, &VerifyOptions::new(shape, 20_000, 42)).unwrap();
        assert!(!rep.passed());
        assert!(rep.divergence.unwrap().0 < 20_000);
    }

    #[test]
    fn harness_passes_the_trie() {
        let shape = GridShape::new(64).unwrap();
        let mut t = K2Trie::new(shape, TrieConfig::default()).unwrap();
        let rep = verify(&mut t, &VerifyOptions::new(shape, 5000, 42)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.checkpoints, 5);
        let rep = verify(&mut t, &VerifyOptions::new(shape, 0, 1)).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.ops, 0);
    }
}
