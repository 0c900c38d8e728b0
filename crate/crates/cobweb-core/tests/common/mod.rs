//! Shared test support: deterministic synthetic digit datasets.
#![allow(dead_code)] // each test binary uses a different subset
//!
//! Seven-segment style glyphs rendered into 28×28 grayscale bytes with
//! per-image jitter (translation, intensity scale, pixel noise), plus a
//! small 8×8 texture dataset used to stress-test filter-tree
//! restructuring. Everything is ChaCha8-seeded and platform-stable.

use cobweb_core::dataset::{write_idx_images, write_idx_labels};
use cobweb_core::image::Digit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

const SEGMENTS: [&[usize]; 10] = [
    &[0, 1, 2, 3, 4, 5],    // 0: ABCDEF
    &[1, 2],                // 1: BC
    &[0, 1, 6, 4, 3],       // 2: ABGED
    &[0, 1, 6, 2, 3],       // 3: ABGCD
    &[5, 6, 1, 2],          // 4: FGBC
    &[0, 5, 6, 2, 3],       // 5: AFGCD
    &[0, 5, 6, 4, 2, 3],    // 6: AFGECD
    &[0, 1, 2],             // 7: ABC
    &[0, 1, 2, 3, 4, 5, 6], // 8
    &[0, 1, 2, 3, 5, 6],    // 9: ABCDFG
];

/// Render one digit glyph with jitter into a 28×28 byte grid. Like
/// MNIST, the background is exactly zero and stroke intensities are
/// coarsely quantized, so patch content repeats heavily within and
/// across images.
fn render_digit(digit: u8, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut img = vec![0u8; 28 * 28];
    // Glyph box 12 wide × 18 tall, thickness 2, jittered origin.
    let (w, h, t) = (12usize, 18usize, 2usize);
    let row0 = 5 + rng.random_range(0..4) as usize; // 5..8
    let col0 = 6 + rng.random_range(0..6) as usize; // 6..11
    let bright = 160 + 32 * rng.random_range(0..3); // 160/192/224
    let mut paint = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        // Quantized stroke texture: four levels around the base.
        let noise: i32 = 16 * rng.random_range(0..3) - 16;
        img[(row0 + r) * 28 + (col0 + c)] = (bright + noise).clamp(0, 255) as u8;
    };
    let mid = h / 2;
    for &seg in SEGMENTS[digit as usize] {
        match seg {
            // A: top bar
            0 => {
                for r in 0..t {
                    for c in 0..w {
                        paint(r, c, rng);
                    }
                }
            }
            // B: top-right column
            1 => {
                for r in 0..mid {
                    for c in w - t..w {
                        paint(r, c, rng);
                    }
                }
            }
            // C: bottom-right column
            2 => {
                for r in mid..h {
                    for c in w - t..w {
                        paint(r, c, rng);
                    }
                }
            }
            // D: bottom bar
            3 => {
                for r in h - t..h {
                    for c in 0..w {
                        paint(r, c, rng);
                    }
                }
            }
            // E: bottom-left column
            4 => {
                for r in mid..h {
                    for c in 0..t {
                        paint(r, c, rng);
                    }
                }
            }
            // F: top-left column
            5 => {
                for r in 0..mid {
                    for c in 0..t {
                        paint(r, c, rng);
                    }
                }
            }
            // G: middle bar
            6 => {
                for r in mid - 1..mid - 1 + t {
                    for c in 0..w {
                        paint(r, c, rng);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    img
}

/// `per_class` jittered glyphs of each digit, shuffled class-major
/// order (class 0 first), as raw bytes plus labels.
pub fn synthetic_digits(per_class: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<Digit>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(per_class * 10);
    let mut labels = Vec::with_capacity(per_class * 10);
    for digit in 0..10u8 {
        for _ in 0..per_class {
            images.push(render_digit(digit, &mut rng));
            labels.push(Digit::new(digit).unwrap());
        }
    }
    (images, labels)
}

/// Write a synthetic digit dataset as an IDX pair under `dir`.
pub fn write_synthetic_dataset(dir: &Path, per_class: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (images, labels) = synthetic_digits(per_class, seed);
    let images_path = dir.join(format!("digits-{per_class}x10-{seed}-images.idx"));
    let labels_path = dir.join(format!("digits-{per_class}x10-{seed}-labels.idx"));
    std::fs::write(&images_path, write_idx_images(28, 28, &images)).unwrap();
    std::fs::write(&labels_path, write_idx_labels(&labels)).unwrap();
    (images_path, labels_path)
}

/// Straight-line category utility oracle over small partitions of
/// 3-binary-nominal-attribute nodes, sharing no code with the engine.
/// Used by both the property suite and the acceptance gate.
pub mod cu_oracle {
    /// One node's tables: per attribute, counts for the two symbols.
    pub type ChildTable = [[u64; 2]; 3];

    pub fn child_count(table: &ChildTable) -> u64 {
        table
            .iter()
            .map(|attr| attr[0] + attr[1])
            .max()
            .unwrap()
            .max(1)
    }

    /// Canonical tree document for a root-plus-children partition; the
    /// root tables are the elementwise child sums, scaled uniformly.
    pub fn build_partition_doc(tables: &[ChildTable], scale: u64) -> String {
        use serde_json::json;
        let attr_names = ["a", "b", "c"];
        let mut nodes = Vec::new();
        let root_count: u64 = tables.iter().map(|t| child_count(t) * scale).sum();
        let mut root_tables = serde_json::Map::new();
        for (ai, name) in attr_names.iter().enumerate() {
            let c0: u64 = tables.iter().map(|t| t[ai][0] * scale).sum();
            let c1: u64 = tables.iter().map(|t| t[ai][1] * scale).sum();
            let mut values = serde_json::Map::new();
            if c0 > 0 {
                values.insert("0".into(), json!(c0));
            }
            if c1 > 0 {
                values.insert("1".into(), json!(c1));
            }
            if !values.is_empty() {
                root_tables.insert((*name).into(), serde_json::Value::Object(values));
            }
        }
        nodes.push(json!({
            "id": 0,
            "count": root_count,
            "children": (1..=tables.len() as u32).collect::<Vec<_>>(),
            "nominal": root_tables,
        }));
        for (i, table) in tables.iter().enumerate() {
            let mut node_tables = serde_json::Map::new();
            for (ai, name) in attr_names.iter().enumerate() {
                let mut values = serde_json::Map::new();
                if table[ai][0] > 0 {
                    values.insert("0".into(), json!(table[ai][0] * scale));
                }
                if table[ai][1] > 0 {
                    values.insert("1".into(), json!(table[ai][1] * scale));
                }
                if !values.is_empty() {
                    node_tables.insert((*name).into(), serde_json::Value::Object(values));
                }
            }
            nodes.push(json!({
                "id": i + 1,
                "count": child_count(table) * scale,
                "nominal": node_tables,
            }));
        }
        json!({
            "format_version": 1,
            "acuity": 1.0,
            "next_id": tables.len() + 1,
            "root": 0,
            "attributes": {"a": "nominal", "b": "nominal", "c": "nominal"},
            "nodes": nodes,
        })
        .to_string()
    }

    fn oracle_ecg(table: &ChildTable, count: u64) -> f64 {
        let mut total = 0.0;
        if count == 0 {
            return 0.0;
        }
        for attr in table {
            for &c in attr {
                let p = c as f64 / count as f64;
                total += p * p;
            }
        }
        total
    }

    pub fn oracle_cu(children: &[ChildTable]) -> f64 {
        let mut parent = [[0u64; 2]; 3];
        let mut parent_count = 0u64;
        for child in children {
            for ai in 0..3 {
                parent[ai][0] += child[ai][0];
                parent[ai][1] += child[ai][1];
            }
            parent_count += child_count(child);
        }
        let parent_ecg = oracle_ecg(&parent, parent_count);
        let mut sum = 0.0;
        for child in children {
            let n = child_count(child);
            sum += (n as f64 / parent_count as f64) * (oracle_ecg(child, n) - parent_ecg);
        }
        sum / children.len() as f64
    }

    /// Compare the engine against the oracle on one partition; the
    /// tolerance is 1e-12 absolute.
    pub fn engine_matches(tables: &[ChildTable]) -> Result<(), String> {
        let doc = build_partition_doc(tables, 1);
        let tree = cobweb_core::tree::CobwebTree::from_json_str(&doc).unwrap();
        let ids: Vec<_> = (1..=tables.len() as u32)
            .map(cobweb_core::tree::NodeId::from_value)
            .collect();
        let got = tree.category_utility(tree.root(), &ids).unwrap();
        let want = oracle_cu(tables);
        if (got - want).abs() > 1e-12 {
            return Err(format!("engine {got} vs oracle {want} for {tables:?}"));
        }
        Ok(())
    }
}

/// Small 8×8 textures drawn from drifting prototypes with noise:
/// enough churn to drive merges and splits in a filter hierarchy.
pub fn synthetic_textures(count: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<Digit>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = (i % 10) as u8;
        let phase = rng.random_range(0..4) as usize;
        let img: Vec<u8> = (0..64)
            .map(|j| {
                let (r, c) = (j / 8, j % 8);
                let base = match class % 4 {
                    0 => ((r + phase) % 4) * 60,
                    1 => ((c + phase) % 4) * 60,
                    2 => ((r + c + phase) % 4) * 60,
                    _ => ((r * c + phase) % 5) * 48,
                } as i32;
                let noise: i32 = rng.random_range(-30..30);
                (base + noise + class as i32 * 4).clamp(0, 255) as u8
            })
            .collect();
        images.push(img);
        labels.push(Digit::new(class).unwrap());
    }
    (images, labels)
}
