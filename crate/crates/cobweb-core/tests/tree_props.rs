//! Property tests for the concept tree engine.

mod common;

use cobweb_core::instance::{AttributeValue, Instance};
use cobweb_core::tree::CobwebTree;
use common::cu_oracle::{build_partition_doc, ChildTable};
use proptest::prelude::*;

fn nominal_instance(colors: &[&str], shapes: &[&str], pick: (usize, usize)) -> Instance {
    Instance::new()
        .with_nominal("color", colors[pick.0 % colors.len()])
        .with_nominal("shape", shapes[pick.1 % shapes.len()])
}

fn mixed_instance(color: usize, x: f64, y: f64) -> Instance {
    Instance::new()
        .with_nominal("color", ["red", "green", "blue"][color % 3])
        .with_continuous("x", x)
        .with_continuous("y", y)
}

proptest! {
    /// Internal counts always equal the sum of their children's counts,
    /// and the root holds every instance fitted.
    #[test]
    fn count_conservation(picks in prop::collection::vec((0usize..4, 0usize..3), 1..60)) {
        let mut tree = CobwebTree::new(0.5);
        for &pick in &picks {
            tree.ifit(&nominal_instance(&["r", "g", "b", "k"], &["s", "t", "u"], pick)).unwrap();
        }
        prop_assert_eq!(tree.total_instances(), picks.len() as u64);
        tree.validate().map_err(TestCaseError::fail)?;
    }

    /// Categorize and predict never change the serialized tree.
    #[test]
    fn read_paths_are_pure(
        picks in prop::collection::vec((0usize..3, any::<i8>(), any::<i8>()), 1..40),
        query in (0usize..3, any::<i8>(), any::<i8>()),
    ) {
        let mut tree = CobwebTree::new(0.5);
        for &(c, x, y) in &picks {
            tree.ifit(&mixed_instance(c, x as f64 / 16.0, y as f64 / 16.0)).unwrap();
        }
        let before = tree.to_json_string();
        let q = mixed_instance(query.0, query.1 as f64 / 16.0, query.2 as f64 / 16.0);
        tree.categorize(&q).unwrap();
        tree.predict(&q, "color").unwrap();
        tree.predict(&q, "x").unwrap();
        prop_assert_eq!(tree.to_json_string(), before);
    }

    /// The same instance sequence always grows the same tree.
    #[test]
    fn fitting_is_deterministic(
        picks in prop::collection::vec((0usize..3, any::<i8>(), any::<i8>()), 1..40),
    ) {
        let mut a = CobwebTree::new(0.5);
        let mut b = CobwebTree::new(0.5);
        for &(c, x, y) in &picks {
            let inst = mixed_instance(c, x as f64 / 16.0, y as f64 / 16.0);
            a.ifit(&inst).unwrap();
            b.ifit(&inst).unwrap();
        }
        prop_assert_eq!(a.to_json_string(), b.to_json_string());
    }

    /// Fitting the same instance k times keeps a single-leaf tree.
    #[test]
    fn duplicates_collapse_to_one_leaf(k in 1usize..30, color in 0usize..3, x in -8i8..8) {
        let mut tree = CobwebTree::new(0.5);
        let inst = mixed_instance(color, x as f64, 0.25);
        for _ in 0..k {
            tree.ifit(&inst).unwrap();
        }
        prop_assert_eq!(tree.node_count(), 1);
        prop_assert_eq!(tree.total_instances(), k as u64);
    }

    /// Duplicates absorb into their own leaf even inside a grown tree.
    #[test]
    fn duplicates_reuse_their_leaf(
        picks in prop::collection::vec((0usize..3, -6i8..6, -6i8..6), 1..30),
        dup in (0usize..3, -6i8..6, -6i8..6),
    ) {
        let mut tree = CobwebTree::new(0.5);
        for &(c, x, y) in &picks {
            tree.ifit(&mixed_instance(c, x as f64, y as f64)).unwrap();
        }
        let inst = mixed_instance(dup.0, dup.1 as f64, dup.2 as f64);
        let first = tree.ifit(&inst).unwrap();
        let leaves_after_first = tree.leaf_count();
        let second = tree.ifit(&inst).unwrap();
        prop_assert_eq!(first, second);
        prop_assert_eq!(tree.leaf_count(), leaves_after_first);
        tree.validate().map_err(TestCaseError::fail)?;
    }

    /// Scaling every count by the same factor leaves CU unchanged.
    #[test]
    fn cu_is_scale_invariant(
        tables in prop::collection::vec(child_table_strategy(), 1..4),
        scale in 2u64..6,
    ) {
        let base = build_partition_doc(&tables, 1);
        let scaled = build_partition_doc(&tables, scale);
        let base_tree = CobwebTree::from_json_str(&base).unwrap();
        let scaled_tree = CobwebTree::from_json_str(&scaled).unwrap();
        let ids: Vec<_> = (1..=tables.len() as u32)
            .map(cobweb_core::tree::NodeId::from_value)
            .collect();
        let root = base_tree.root();
        let cu_base = base_tree.category_utility(root, &ids).unwrap();
        let cu_scaled = scaled_tree.category_utility(scaled_tree.root(), &ids).unwrap();
        prop_assert!((cu_base - cu_scaled).abs() <= 1e-12, "{cu_base} vs {cu_scaled}");
    }

    /// Implementation CU equals a straight-line reimplementation of the
    /// formula on randomly drawn small partitions.
    #[test]
    fn cu_matches_straight_line_oracle(tables in prop::collection::vec(child_table_strategy(), 1..5)) {
        check_against_oracle(&tables)?;
    }
}

fn child_table_strategy() -> impl Strategy<Value = ChildTable> {
    prop::array::uniform3(prop::array::uniform2(0u64..3))
}

fn check_against_oracle(tables: &[ChildTable]) -> Result<(), TestCaseError> {
    common::cu_oracle::engine_matches(tables).map_err(TestCaseError::fail)
}

/// Exhaustive sweep of two-child partitions over a bounded table box:
/// every per-attribute count pair in 0..=2 for both children.
#[test]
fn cu_oracle_exhaustive_two_children() {
    let cells: Vec<[u64; 2]> = (0..3u64)
        .flat_map(|a| (0..3u64).map(move |b| [a, b]))
        .collect();
    // Vary one attribute fully per child and sweep the others through a
    // smaller palette to keep the sweep around 60k cases.
    let palette: Vec<[u64; 2]> = vec![[0, 0], [1, 0], [1, 1], [2, 0]];
    let mut cases = 0usize;
    for &a1 in &cells {
        for &b1 in &palette {
            for &c1 in &palette {
                for &a2 in &cells {
                    for &b2 in &palette {
                        for &c2 in &palette {
                            let t1 = [a1, b1, c1];
                            let t2 = [a2, b2, c2];
                            check_against_oracle(&[t1, t2]).unwrap();
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    assert_eq!(cases, (9 * 4 * 4) * (9 * 4 * 4));
}

/// Gaussian streaming statistics agree with a two-pass batch oracle.
#[test]
fn gaussian_online_matches_batch() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for trial in 0..50 {
        let n = 10 + trial * 37;
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let mut tree = CobwebTree::new(1.0);
        let root = tree.root();
        for &v in &values {
            tree.increment_counts(root, &Instance::new().with_continuous("x", v))
                .unwrap();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let got_mean = tree.continuous_mean(root, "x").unwrap();
        assert!((got_mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        // Read the std back through the serialized form.
        let doc: serde_json::Value = serde_json::from_str(&tree.to_json_string()).unwrap();
        let std = doc["nodes"][0]["continuous"]["x"]["std"].as_f64().unwrap();
        assert!((std - var.sqrt()).abs() <= 1e-9 * var.sqrt().max(1.0));
    }
}

/// Prediction queries that carry the target are sorted without it.
#[test]
fn predict_ignores_supplied_target() {
    let mut tree = CobwebTree::new(0.5);
    tree.ifit(
        &Instance::new()
            .with_nominal("x", "red")
            .with_nominal("label", "A"),
    )
    .unwrap();
    tree.ifit(
        &Instance::new()
            .with_nominal("x", "blue")
            .with_nominal("label", "B"),
    )
    .unwrap();
    let with_target = Instance::new()
        .with_nominal("x", "red")
        .with_nominal("label", "B");
    let got = tree.predict(&with_target, "label").unwrap();
    assert_eq!(got, Some(AttributeValue::Nominal("A".into())));
}
