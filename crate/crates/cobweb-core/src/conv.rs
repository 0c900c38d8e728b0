//! Convolutional Cobweb: a filter hierarchy over k×k pixel patches
//! feeding a classification hierarchy over filter-label encodings.
//!
//! An image is swept by a stride-1, no-padding window; every patch is
//! sorted into the filter hierarchy (learning fits it, prediction only
//! categorizes), and the image becomes an instance with one nominal
//! attribute per patch origin whose value is the filter node the patch
//! landed on. The classification hierarchy learns over these encodings
//! plus the digit label.
//!
//! Stored filter references are always leaf ids: `ifit` terminates in a
//! leaf, fission keeps the old id on the demoted leaf, merge inserts a
//! new parent, and split deletes only internal nodes. Because leaves
//! persist, the classifier's tables never go stale even as the filter
//! hierarchy restructures; during category utility computation every
//! reference is dynamically remapped to its ancestor one level below
//! the filter root, merging counts that meet at the same ancestor, so
//! all concepts compare filters at one shared granularity.

use crate::image::{Digit, LabeledImage};
use crate::instance::Instance;
use crate::tree::{AttrKind, CobwebTree, EncInstance, NodeId, RefResolver, TreeError};
use rustc_hash::FxHashMap;
use std::cell::RefCell;
use std::collections::BTreeMap;

pub const DEFAULT_FILTER_SIZE: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ConvError {
    #[error("filter size {k} exceeds image dimensions {rows}x{cols}")]
    FilterTooLarge { k: usize, rows: usize, cols: usize },
    #[error("image is {rows}x{cols} but the model expects {expect_rows}x{expect_cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expect_rows: usize,
        expect_cols: usize,
    },
    #[error("fit_image requires a labeled image")]
    MissingLabel,
    #[error("non-numeric filter reference '{0}'")]
    BadReference(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// One k×k window of an image, tagged with the upper-left pixel
/// position it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    origin: (usize, usize),
    size: usize,
    values: Vec<f64>,
}

impl Patch {
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.size + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// All stride-1 patches of size k, row-major by origin:
/// (H−k+1)·(W−k+1) of them.
pub fn extract_patches(image: &LabeledImage, k: usize) -> Result<Vec<Patch>, ConvError> {
    let (rows, cols) = (image.rows(), image.cols());
    if k == 0 || k > rows || k > cols {
        return Err(ConvError::FilterTooLarge { k, rows, cols });
    }
    let mut patches = Vec::with_capacity((rows - k + 1) * (cols - k + 1));
    for r in 0..=rows - k {
        for c in 0..=cols - k {
            let mut values = Vec::with_capacity(k * k);
            for dr in 0..k {
                for dc in 0..k {
                    values.push(image.get(r + dr, c + dc));
                }
            }
            patches.push(Patch {
                origin: (r, c),
                size: k,
                values,
            });
        }
    }
    Ok(patches)
}

/// A patch as a position-independent instance: k² continuous attributes
/// named by in-patch coordinates. The origin is deliberately excluded.
pub fn patch_to_instance(patch: &Patch) -> Instance {
    let mut inst = Instance::new();
    for r in 0..patch.size {
        for c in 0..patch.size {
            inst = inst.with_continuous(&patch_attr_name(r, c), patch.get(r, c));
        }
    }
    inst
}

fn patch_attr_name(r: usize, c: usize) -> String {
    format!("({r},{c})")
}

fn filter_attr_name(r: usize, c: usize) -> String {
    format!("filter@({r},{c})")
}

/// An image rewritten as filter labels: one entry per patch origin in
/// row-major order, plus the optional digit label.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    filters: Vec<((usize, usize), NodeId)>,
    label: Option<Digit>,
}

impl EncodedInstance {
    pub fn filters(&self) -> &[((usize, usize), NodeId)] {
        &self.filters
    }

    pub fn label(&self) -> Option<Digit> {
        self.label
    }

    /// Interop form: nominal attributes `filter@(r,c)` valued with the
    /// filter node id, plus `label` when present.
    pub fn to_instance(&self) -> Instance {
        let mut inst = Instance::new();
        for &((r, c), id) in &self.filters {
            inst = inst.with_nominal(&filter_attr_name(r, c), &id.to_string());
        }
        if let Some(d) = self.label {
            inst = inst.with_nominal("label", &d.symbol());
        }
        inst
    }
}

/// Transient remapped view of a classifier node's nominal tables:
/// filter references replaced by their depth-1 ancestors with counts
/// merged, everything else passed through unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemappedCounts {
    pub attrs: BTreeMap<String, BTreeMap<String, u64>>,
}

struct DepthOneResolver<'a> {
    filters: &'a CobwebTree,
    memo: RefCell<FxHashMap<u32, u32>>,
}

impl<'a> DepthOneResolver<'a> {
    fn new(filters: &'a CobwebTree) -> Self {
        DepthOneResolver {
            filters,
            memo: RefCell::new(FxHashMap::default()),
        }
    }
}

impl RefResolver for DepthOneResolver<'_> {
    fn resolve(&self, raw: u32) -> u32 {
        if let Some(&hit) = self.memo.borrow().get(&raw) {
            return hit;
        }
        let resolved = depth1_walk(self.filters, NodeId::from_value(raw))
            .expect("classifier filter reference must resolve to a live filter node")
            .value();
        self.memo.borrow_mut().insert(raw, resolved);
        resolved
    }
}

fn depth1_walk(filters: &CobwebTree, id: NodeId) -> Result<NodeId, TreeError> {
    filters.try_node_exists(id)?;
    let root = filters.root();
    let mut cur = id;
    while cur != root {
        let parent = filters.parent(cur)?.expect("non-root node has a parent");
        if parent == root {
            return Ok(cur);
        }
        cur = parent;
    }
    Ok(root)
}

/// The two-hierarchy model: filters over patches, classifier over
/// filter-encoded images.
pub struct ConvCobwebModel {
    filters: CobwebTree,
    classifier: CobwebTree,
    filter_size: usize,
    rows: usize,
    cols: usize,
    patch_attrs: Vec<crate::tree::AttrId>,
    filter_attrs: Vec<crate::tree::AttrId>,
    label_attr: crate::tree::AttrId,
    label_codes: [u32; 10],
}

impl ConvCobwebModel {
    pub fn new(
        rows: usize,
        cols: usize,
        filter_size: usize,
        acuity: f64,
    ) -> Result<Self, ConvError> {
        Self::from_parts(
            CobwebTree::new(acuity),
            CobwebTree::new(acuity),
            rows,
            cols,
            filter_size,
        )
    }

    /// Assemble a model around existing trees (fresh or deserialized),
    /// registering any attribute the trees do not already carry.
    pub fn from_parts(
        mut filters: CobwebTree,
        mut classifier: CobwebTree,
        rows: usize,
        cols: usize,
        filter_size: usize,
    ) -> Result<Self, ConvError> {
        let k = filter_size;
        if k == 0 || k > rows || k > cols {
            return Err(ConvError::FilterTooLarge { k, rows, cols });
        }
        let mut patch_attrs = Vec::with_capacity(k * k);
        for r in 0..k {
            for c in 0..k {
                patch_attrs
                    .push(filters.register_attr(&patch_attr_name(r, c), AttrKind::Continuous)?);
            }
        }
        let mut filter_attrs = Vec::with_capacity((rows - k + 1) * (cols - k + 1));
        for r in 0..=rows - k {
            for c in 0..=cols - k {
                filter_attrs
                    .push(classifier.register_attr(&filter_attr_name(r, c), AttrKind::NominalRef)?);
            }
        }
        let label_attr = classifier.register_attr("label", AttrKind::Nominal)?;
        let mut label_codes = [0u32; 10];
        for d in 0..10u32 {
            label_codes[d as usize] = classifier.intern_value(label_attr, &d.to_string());
        }
        Ok(ConvCobwebModel {
            filters,
            classifier,
            filter_size,
            rows,
            cols,
            patch_attrs,
            filter_attrs,
            label_attr,
            label_codes,
        })
    }

    pub fn filters(&self) -> &CobwebTree {
        &self.filters
    }

    pub fn classifier(&self) -> &CobwebTree {
        &self.classifier
    }

    pub fn filter_size(&self) -> usize {
        self.filter_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn check_dims(&self, image: &LabeledImage) -> Result<(), ConvError> {
        if image.rows() != self.rows || image.cols() != self.cols {
            return Err(ConvError::DimensionMismatch {
                rows: image.rows(),
                cols: image.cols(),
                expect_rows: self.rows,
                expect_cols: self.cols,
            });
        }
        Ok(())
    }

    /// The ancestor of `id` sitting one level below the filter root,
    /// or the root itself when `id` is the root.
    pub fn depth1_label(&self, id: NodeId) -> Result<NodeId, TreeError> {
        depth1_walk(&self.filters, id)
    }

    /// Walk the image's patches through the filter hierarchy, fitting
    /// each one, and return the encoding built from the leaf ids.
    pub fn encode_image_learn(
        &mut self,
        image: &LabeledImage,
    ) -> Result<EncodedInstance, ConvError> {
        self.check_dims(image)?;
        let k = self.filter_size;
        let mut enc = EncInstance {
            continuous: self.patch_attrs.iter().map(|&a| (a, 0.0)).collect(),
            ..EncInstance::default()
        };
        let mut out = Vec::with_capacity(self.filter_attrs.len());
        for r in 0..=self.rows - k {
            for c in 0..=self.cols - k {
                for dr in 0..k {
                    for dc in 0..k {
                        enc.continuous[dr * k + dc].1 = image.get(r + dr, c + dc);
                    }
                }
                let leaf = self.filters.ifit_enc(&enc, None);
                out.push(((r, c), leaf));
            }
        }
        Ok(EncodedInstance {
            filters: out,
            label: image.label(),
        })
    }

    /// Pure encoding: each patch is categorized, nothing is modified.
    pub fn encode_image(&self, image: &LabeledImage) -> Result<EncodedInstance, ConvError> {
        self.check_dims(image)?;
        let k = self.filter_size;
        let mut enc = EncInstance {
            continuous: self.patch_attrs.iter().map(|&a| (a, 0.0)).collect(),
            ..EncInstance::default()
        };
        let mut out = Vec::with_capacity(self.filter_attrs.len());
        for r in 0..=self.rows - k {
            for c in 0..=self.cols - k {
                for dr in 0..k {
                    for dc in 0..k {
                        enc.continuous[dr * k + dc].1 = image.get(r + dr, c + dc);
                    }
                }
                let node = self.filters.categorize_enc(&enc, None);
                out.push(((r, c), node));
            }
        }
        Ok(EncodedInstance {
            filters: out,
            label: image.label(),
        })
    }

    /// Fit one labeled image: patches into the filter hierarchy, then
    /// the encoded instance (with label) into the classifier, where
    /// every category utility evaluation sees depth-1 remapped counts.
    /// Returns the terminal classifier concept.
    pub fn fit_image(&mut self, image: &LabeledImage) -> Result<NodeId, ConvError> {
        let label = image.label().ok_or(ConvError::MissingLabel)?;
        let encoded = self.encode_image_learn(image)?;
        let mut query = EncInstance {
            nominal: self
                .filter_attrs
                .iter()
                .zip(encoded.filters.iter())
                .map(|(&attr, &(_, id))| (attr, id.value()))
                .collect(),
            ..EncInstance::default()
        };
        query
            .nominal
            .push((self.label_attr, self.label_codes[label.value() as usize]));
        query.nominal.sort_by_key(|(a, _)| *a);
        let resolver = DepthOneResolver::new(&self.filters);
        Ok(self.classifier.ifit_enc(&query, Some(&resolver)))
    }

    /// Predict the digit label for an image without modifying either
    /// hierarchy. Prediction-time filter ids are remapped to depth-1
    /// before classifier sorting so stored leaf references and
    /// categorize results meet at the same granularity.
    pub fn predict_image(&self, image: &LabeledImage) -> Result<Option<Digit>, ConvError> {
        let encoded = self.encode_image(&image.with_label(None))?;
        let mut query = EncInstance {
            nominal: Vec::with_capacity(self.filter_attrs.len()),
            ..EncInstance::default()
        };
        for (&attr, &(_, id)) in self.filter_attrs.iter().zip(encoded.filters.iter()) {
            let depth1 = self.depth1_label(id)?;
            query.nominal.push((attr, depth1.value()));
        }
        query.nominal.sort_by_key(|(a, _)| *a);
        let resolver = DepthOneResolver::new(&self.filters);
        let terminal = self.classifier.categorize_enc(&query, Some(&resolver));
        let label = self
            .classifier
            .predict_at(terminal, "label")
            .and_then(|v| match v {
                crate::instance::AttributeValue::Nominal(s) => Digit::from_symbol(&s),
                _ => None,
            });
        Ok(label)
    }

    /// The depth-1 remapped view of a classifier node's nominal counts.
    pub fn remapped_counts(&self, node: NodeId) -> Result<RemappedCounts, ConvError> {
        let attrs = self.classifier.nominal_tables_named(node)?;
        self.remap_of(&RemappedCounts { attrs })
    }

    /// Apply the depth-1 remap to an existing view; applying it to an
    /// already-remapped view is the identity.
    pub fn remap_of(&self, view: &RemappedCounts) -> Result<RemappedCounts, ConvError> {
        let mut attrs = BTreeMap::new();
        for (attr, values) in &view.attrs {
            let mut out: BTreeMap<String, u64> = BTreeMap::new();
            let is_filter = attr.starts_with("filter@");
            for (value, &count) in values {
                let key = if is_filter {
                    let raw: u32 = value
                        .parse()
                        .map_err(|_| ConvError::BadReference(value.clone()))?;
                    depth1_walk(&self.filters, NodeId::from_value(raw))?.to_string()
                } else {
                    value.clone()
                };
                *out.entry(key).or_insert(0) += count;
            }
            attrs.insert(attr.clone(), out);
        }
        Ok(RemappedCounts { attrs })
    }

    /// Scan every classifier table and confirm each stored filter
    /// reference resolves to a live leaf of the filter hierarchy.
    pub fn check_reference_validity(&self) -> Result<(), String> {
        for id in self.classifier.ids_preorder() {
            let tables = self
                .classifier
                .nominal_tables_named(id)
                .map_err(|e| e.to_string())?;
            for (attr, values) in tables {
                if !attr.starts_with("filter@") {
                    continue;
                }
                for value in values.keys() {
                    let raw: u32 = value
                        .parse()
                        .map_err(|_| format!("non-numeric filter reference '{value}'"))?;
                    let node = NodeId::from_value(raw);
                    if !self.filters.contains(node) {
                        return Err(format!(
                            "stale filter reference {node} at classifier node {id}"
                        ));
                    }
                    if !self.filters.is_leaf(node).map_err(|e| e.to_string())? {
                        return Err(format!(
                            "filter reference {node} at classifier node {id} is not a leaf"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// DOT rendering of the filter hierarchy, each node labeled with
    /// its k×k grid of mean intensities.
    pub fn filters_to_dot(&self) -> String {
        use std::fmt::Write;
        let k = self.filter_size;
        let mut out = String::from("digraph filters {\n  node [shape=record];\n");
        for id in self.filters.ids_preorder() {
            let mut label = format!("id {id}|count {}", self.filters.count(id).unwrap_or(0));
            for r in 0..k {
                label.push('|');
                for c in 0..k {
                    let mean = self
                        .filters
                        .continuous_mean(id, &patch_attr_name(r, c))
                        .unwrap_or(0.0);
                    if c > 0 {
                        label.push(' ');
                    }
                    write!(label, "{mean:.3}").unwrap();
                }
            }
            writeln!(out, "  n{id} [label=\"{{{label}}}\"];").unwrap();
        }
        for id in self.filters.ids_preorder() {
            for &ch in self.filters.children(id).unwrap_or(&[]) {
                writeln!(out, "  n{id} -> n{ch};").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }

    /// DOT rendering of the classification hierarchy, each node labeled
    /// with its label distribution.
    pub fn classifier_to_dot(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("digraph classifier {\n  node [shape=record];\n");
        for id in self.classifier.ids_preorder() {
            let count = self.classifier.count(id).unwrap_or(0);
            let mut label = format!("id {id}|count {count}");
            if count > 0 {
                for (sym, c) in self
                    .classifier
                    .nominal_value_counts(id, "label")
                    .unwrap_or_default()
                {
                    write!(label, "|{sym}: {:.3}", c as f64 / count as f64).unwrap();
                }
            }
            writeln!(out, "  n{id} [label=\"{{{label}}}\"];").unwrap();
        }
        for id in self.classifier.ids_preorder() {
            for &ch in self.classifier.children(id).unwrap_or(&[]) {
                writeln!(out, "  n{id} -> n{ch};").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(
        rows: usize,
        cols: usize,
        f: impl Fn(usize, usize) -> f64,
        label: Option<u8>,
    ) -> LabeledImage {
        let mut pixels = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                pixels.push(f(r, c));
            }
        }
        LabeledImage::new(rows, cols, pixels, label.and_then(Digit::new))
    }

    #[test]
    fn patch_count_28x28_k3() {
        let img = image(28, 28, |r, c| (r * 28 + c) as f64, None);
        let patches = extract_patches(&img, 3).unwrap();
        assert_eq!(patches.len(), 676);
        assert_eq!(patches[0].origin(), (0, 0));
        assert_eq!(patches[675].origin(), (25, 25));
    }

    #[test]
    fn patch_identity_case() {
        let img = image(3, 3, |r, c| (r + c) as f64, None);
        let patches = extract_patches(&img, 3).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].origin(), (0, 0));
        assert_eq!(patches[0].values(), img.pixels());
    }

    #[test]
    fn patch_count_4x4_k3() {
        let img = image(4, 4, |r, c| (r * 4 + c) as f64, None);
        assert_eq!(extract_patches(&img, 3).unwrap().len(), 4);
    }

    #[test]
    fn oversized_filter_is_an_error() {
        let img = image(2, 2, |_, _| 0.0, None);
        assert!(matches!(
            extract_patches(&img, 3),
            Err(ConvError::FilterTooLarge { .. })
        ));
    }

    #[test]
    fn patch_instance_has_k_squared_zero_attrs() {
        let img = image(3, 3, |_, _| 0.0, None);
        let inst = patch_to_instance(&extract_patches(&img, 3).unwrap()[0]);
        assert_eq!(inst.len(), 9);
        for (_, v) in inst.iter() {
            assert_eq!(v, &crate::instance::AttributeValue::Continuous(0.0));
        }
    }

    #[test]
    fn patch_instance_ignores_origin() {
        let img = image(8, 9, |r, c| ((r * 9 + c) % 4) as f64, None);
        let patches = extract_patches(&img, 3).unwrap();
        let same: Vec<&Patch> = patches
            .iter()
            .filter(|p| p.values() == patches[0].values())
            .collect();
        assert!(same.len() > 1, "test image must repeat a patch");
        let a = patch_to_instance(same[0]);
        let b = patch_to_instance(same[1]);
        assert_ne!(same[0].origin(), same[1].origin());
        assert_eq!(a, b);
    }

    #[test]
    fn patch_instance_indexing() {
        let img = image(3, 3, |r, c| (r * 3 + c + 1) as f64, None);
        let inst = patch_to_instance(&extract_patches(&img, 3).unwrap()[0]);
        assert_eq!(
            inst.get("(1,2)"),
            Some(&crate::instance::AttributeValue::Continuous(6.0))
        );
    }

    /// Filter tree shaped root → {f_a, f_b}, f_b → {leaf_c, leaf_d},
    /// built through the public fit path with crafted patches.
    fn hand_filter_model() -> (ConvCobwebModel, NodeId, NodeId, NodeId) {
        let mut model = ConvCobwebModel::new(3, 3, 3, 1.0).unwrap();
        // Three distinct uniform patches: two nearly identical (they end
        // up as siblings under one subtree) and one far away.
        let far = image(3, 3, |_, _| 100.0, Some(0));
        let near1 = image(3, 3, |_, _| 0.0, Some(1));
        let near2 = image(3, 3, |_, _| 0.5, Some(1));
        model.fit_image(&far).unwrap();
        model.fit_image(&near1).unwrap();
        model.fit_image(&near2).unwrap();
        let filters = model.filters();
        let root = filters.root();
        let kids = filters.children(root).unwrap().to_vec();
        // Find a root child that is internal (the near pair's host).
        let internal = kids
            .iter()
            .copied()
            .find(|&id| !filters.is_leaf(id).unwrap())
            .expect("expected an internal depth-1 filter");
        let grand = filters.children(internal).unwrap().to_vec();
        (model, root, internal, grand[0])
    }

    #[test]
    fn depth1_of_root_child_is_itself() {
        let (model, root, internal, _) = hand_filter_model();
        assert_eq!(model.filters().parent(internal).unwrap(), Some(root));
        assert_eq!(model.depth1_label(internal).unwrap(), internal);
    }

    #[test]
    fn depth1_of_deep_leaf_is_its_subroot() {
        let (model, _, internal, grand) = hand_filter_model();
        assert_eq!(model.depth1_label(grand).unwrap(), internal);
    }

    #[test]
    fn depth1_of_root_is_root() {
        let model = ConvCobwebModel::new(3, 3, 3, 1.0).unwrap();
        let root = model.filters().root();
        assert_eq!(model.depth1_label(root).unwrap(), root);
    }

    #[test]
    fn first_image_encoding_hits_leaves() {
        let mut model = ConvCobwebModel::new(28, 28, 3, 1.0).unwrap();
        let img = image(
            28,
            28,
            |r, c| ((r * 31 + c * 17) % 11) as f64 / 10.0,
            Some(5),
        );
        let enc = model.encode_image_learn(&img).unwrap();
        assert_eq!(enc.filters().len(), 676);
        assert_eq!(model.filters().total_instances(), 676);
        for &(_, id) in enc.filters() {
            assert!(model.filters().is_leaf(id).unwrap());
        }
    }

    #[test]
    fn readonly_encoding_is_pure_and_stable() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        let train = image(8, 8, |r, c| (r * 8 + c) as f64 / 64.0, Some(1));
        model.fit_image(&train).unwrap();
        let probe = image(8, 8, |r, c| (c * 8 + r) as f64 / 64.0, None);
        let before = model.filters().to_json_string();
        let e1 = model.encode_image(&probe).unwrap();
        let e2 = model.encode_image(&probe).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(model.filters().to_json_string(), before);
    }

    #[test]
    fn uniform_image_collapses_to_one_filter_leaf() {
        let mut model = ConvCobwebModel::new(28, 28, 3, 1.0).unwrap();
        let img = image(28, 28, |_, _| 0.25, Some(3));
        let enc = model.encode_image_learn(&img).unwrap();
        assert_eq!(model.filters().node_count(), 1);
        assert_eq!(model.filters().total_instances(), 676);
        let first = enc.filters()[0].1;
        assert!(enc.filters().iter().all(|&(_, id)| id == first));
    }

    #[test]
    fn remap_merges_counts_under_shared_ancestor() {
        let (model, _, internal, _) = hand_filter_model();
        let grand = model.filters().children(internal).unwrap().to_vec();
        assert_eq!(grand.len(), 2);
        // The classifier stored raw leaf ids; remap must merge the two
        // grandchildren under their shared depth-1 ancestor.
        let root = model.classifier().root();
        let remapped = model.remapped_counts(root).unwrap();
        let table = &remapped.attrs["filter@(0,0)"];
        assert_eq!(table.get(&internal.to_string()).copied(), Some(2));
        assert!(!table.contains_key(&grand[0].to_string()));
        assert!(!table.contains_key(&grand[1].to_string()));
    }

    #[test]
    fn remap_is_idempotent_and_passes_labels_through() {
        let (model, ..) = hand_filter_model();
        let root = model.classifier().root();
        let once = model.remapped_counts(root).unwrap();
        let twice = model.remap_of(&once).unwrap();
        assert_eq!(once, twice);
        let labels = &once.attrs["label"];
        assert_eq!(labels.get("0").copied(), Some(1));
        assert_eq!(labels.get("1").copied(), Some(2));
    }

    #[test]
    fn fit_updates_both_hierarchies() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        let img = image(8, 8, |r, c| ((r + c) % 3) as f64, Some(7));
        model.fit_image(&img).unwrap();
        assert_eq!(model.classifier().total_instances(), 1);
        assert_eq!(model.filters().total_instances(), 36);
        model.filters().validate().unwrap();
        model.classifier().validate().unwrap();
    }

    #[test]
    fn refitting_identical_image_absorbs() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        let img = image(8, 8, |r, c| ((r * c) % 5) as f64 - 2.0, Some(2));
        model.fit_image(&img).unwrap();
        model.fit_image(&img).unwrap();
        assert_eq!(model.classifier().total_instances(), 2);
        assert!(model
            .classifier()
            .is_leaf(model.classifier().root())
            .unwrap());
        assert_eq!(model.filters().total_instances(), 72);
    }

    #[test]
    fn count_conservation_over_images() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        for i in 0..5u8 {
            let img = image(
                8,
                8,
                |r, c| ((r * 7 + c * 3 + i as usize) % 6) as f64,
                Some(i),
            );
            model.fit_image(&img).unwrap();
        }
        assert_eq!(model.classifier().total_instances(), 5);
        assert_eq!(model.filters().total_instances(), 5 * 36);
        model.check_reference_validity().unwrap();
    }

    #[test]
    fn predicts_label_of_memorized_image() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        let img = image(8, 8, |r, c| ((r + 2 * c) % 4) as f64, Some(7));
        model.fit_image(&img).unwrap();
        assert_eq!(model.predict_image(&img).unwrap(), Digit::new(7));
    }

    #[test]
    fn untrained_model_predicts_none() {
        let model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        let img = image(8, 8, |_, _| 0.0, None);
        assert_eq!(model.predict_image(&img).unwrap(), None);
    }

    #[test]
    fn prediction_is_pure() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        for i in 0..3u8 {
            let img = image(
                8,
                8,
                |r, c| ((r * 5 + c * 2 + i as usize) % 7) as f64,
                Some(i),
            );
            model.fit_image(&img).unwrap();
        }
        let before = (
            model.filters().to_json_string(),
            model.classifier().to_json_string(),
        );
        let probe = image(8, 8, |r, c| ((r + c) % 2) as f64, None);
        model.predict_image(&probe).unwrap();
        let after = (
            model.filters().to_json_string(),
            model.classifier().to_json_string(),
        );
        assert_eq!(before, after);
    }

    #[test]
    fn missing_label_is_rejected() {
        let mut model = ConvCobwebModel::new(8, 8, 3, 1.0).unwrap();
        let img = image(8, 8, |_, _| 0.0, None);
        assert!(matches!(
            model.fit_image(&img),
            Err(ConvError::MissingLabel)
        ));
    }

    #[test]
    fn dot_exports_cover_all_nodes() {
        let (model, ..) = hand_filter_model();
        let fd = model.filters_to_dot();
        let cd = model.classifier_to_dot();
        assert_eq!(fd.matches("[label=").count(), model.filters().node_count());
        assert_eq!(
            cd.matches("[label=").count(),
            model.classifier().node_count()
        );
    }
}
