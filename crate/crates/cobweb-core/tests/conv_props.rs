//! Property and invariant tests for the convolutional pipeline.

mod common;

use cobweb_core::conv::{extract_patches, ConvCobwebModel};
use cobweb_core::dataset::{normalize, RawDataset};
use cobweb_core::image::LabeledImage;
use proptest::prelude::*;

proptest! {
    /// |patches| = (H−k+1)·(W−k+1) whenever k fits.
    #[test]
    fn patch_count_formula(rows in 1usize..12, cols in 1usize..12, k in 1usize..6) {
        let image = LabeledImage::new(
            rows,
            cols,
            (0..rows * cols).map(|i| i as f64).collect(),
            None,
        );
        let result = extract_patches(&image, k);
        if k <= rows.min(cols) {
            let patches = result.unwrap();
            prop_assert_eq!(patches.len(), (rows - k + 1) * (cols - k + 1));
            for (i, p) in patches.iter().enumerate() {
                let per_row = cols - k + 1;
                prop_assert_eq!(p.origin(), (i / per_row, i % per_row));
            }
        } else {
            prop_assert!(result.is_err());
        }
    }
}

fn textures_model(count: usize, seed: u64) -> ConvCobwebModel {
    let (images, labels) = common::synthetic_textures(count, seed);
    let raw = RawDataset {
        rows: 8,
        cols: 8,
        images,
        labels,
    };
    let data = normalize(&raw).unwrap();
    let mut model = ConvCobwebModel::new(8, 8, 3, 0.3989422804014327).unwrap();
    for img in &data.images {
        model.fit_image(img).unwrap();
    }
    model
}

/// After a training sequence that provably triggers merges and splits,
/// every classifier filter reference still resolves to a live leaf.
#[test]
fn references_survive_restructuring() {
    let model = textures_model(300, 11);
    let counters = model.filters().counters();
    assert!(
        counters.merges >= 1,
        "sequence must trigger at least one merge"
    );
    assert!(
        counters.splits >= 1,
        "sequence must trigger at least one split"
    );
    model.check_reference_validity().unwrap();
    model.filters().validate().unwrap();
    model.classifier().validate().unwrap();
}

/// Filter root count is patch-count × images fitted.
#[test]
fn filter_count_conservation() {
    let model = textures_model(40, 5);
    assert_eq!(model.filters().total_instances(), 40 * 36);
    assert_eq!(model.classifier().total_instances(), 40);
}

/// Remapping an already-remapped view changes nothing, on every
/// classifier node.
#[test]
fn remap_is_idempotent_everywhere() {
    let model = textures_model(60, 23);
    for id in model.classifier().ids_preorder() {
        let once = model.remapped_counts(id).unwrap();
        let twice = model.remap_of(&once).unwrap();
        assert_eq!(once, twice, "remap not idempotent at node {id}");
    }
}

/// Remapped views preserve per-attribute totals and pass labels through.
#[test]
fn remap_preserves_totals() {
    let model = textures_model(50, 31);
    for id in model.classifier().ids_preorder() {
        let raw = model.classifier().nominal_tables_named(id).unwrap();
        let remapped = model.remapped_counts(id).unwrap();
        for (attr, values) in &raw {
            let raw_total: u64 = values.values().sum();
            let remapped_total: u64 = remapped.attrs[attr].values().sum();
            assert_eq!(raw_total, remapped_total, "attr {attr} at {id}");
            if attr == "label" {
                assert_eq!(&remapped.attrs[attr], values);
            }
        }
    }
}

/// predict_image leaves both hierarchies byte-identical.
#[test]
fn prediction_is_pure_after_restructuring() {
    let model = textures_model(120, 17);
    let (images, _) = common::synthetic_textures(6, 99);
    let raw = RawDataset {
        rows: 8,
        cols: 8,
        images,
        labels: (0..6)
            .map(|i| cobweb_core::image::Digit::new(i as u8).unwrap())
            .collect(),
    };
    let probes = normalize(&raw).unwrap();
    let before = (
        model.filters().to_json_string(),
        model.classifier().to_json_string(),
    );
    for probe in &probes.images {
        model.predict_image(probe).unwrap();
    }
    let after = (
        model.filters().to_json_string(),
        model.classifier().to_json_string(),
    );
    assert_eq!(before, after);
}

/// Identical image sequences grow byte-identical models.
#[test]
fn model_growth_is_deterministic() {
    let a = textures_model(80, 3);
    let b = textures_model(80, 3);
    assert_eq!(a.filters().to_json_string(), b.filters().to_json_string());
    assert_eq!(
        a.classifier().to_json_string(),
        b.classifier().to_json_string()
    );
}

/// Depth-1 labels are fixed points of themselves.
#[test]
fn depth1_labels_are_fixed_points() {
    let model = textures_model(60, 41);
    for id in model.filters().ids_preorder() {
        let d1 = model.depth1_label(id).unwrap();
        assert_eq!(model.depth1_label(d1).unwrap(), d1);
        let root = model.filters().root();
        if d1 != root {
            assert_eq!(model.filters().parent(d1).unwrap(), Some(root));
        }
    }
}
