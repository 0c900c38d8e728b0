//! Image-level models: the Cobweb/3 pixel baseline, the model trait
//! the evaluation harness drives, and on-disk model documents.

use crate::conv::{ConvCobwebModel, ConvError};
use crate::image::{Digit, LabeledImage};
use crate::tree::{AttrKind, CobwebTree, EncInstance, NodeId, TreeDocError, TreeError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Conv(#[from] ConvError),
    #[error("cannot learn from an unlabeled image")]
    MissingLabel,
    #[error("image is {rows}x{cols} but the model expects {expect_rows}x{expect_cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expect_rows: usize,
        expect_cols: usize,
    },
}

/// Cobweb/3 over raw pixels: every image is an instance with one
/// continuous attribute per pixel, plus the digit label while learning.
pub struct Cobweb3 {
    tree: CobwebTree,
    rows: usize,
    cols: usize,
    pixel_attrs: Vec<crate::tree::AttrId>,
    label_attr: crate::tree::AttrId,
    label_codes: [u32; 10],
}

impl Cobweb3 {
    pub fn new(rows: usize, cols: usize, acuity: f64) -> Cobweb3 {
        Self::from_tree(CobwebTree::new(acuity), rows, cols).expect("fresh tree accepts registry")
    }

    /// Wrap an existing (possibly deserialized) tree.
    pub fn from_tree(
        mut tree: CobwebTree,
        rows: usize,
        cols: usize,
    ) -> Result<Cobweb3, ModelError> {
        let mut pixel_attrs = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                pixel_attrs.push(tree.register_attr(&format!("({r},{c})"), AttrKind::Continuous)?);
            }
        }
        let label_attr = tree.register_attr("label", AttrKind::Nominal)?;
        let mut label_codes = [0u32; 10];
        for d in 0..10u32 {
            label_codes[d as usize] = tree.intern_value(label_attr, &d.to_string());
        }
        Ok(Cobweb3 {
            tree,
            rows,
            cols,
            pixel_attrs,
            label_attr,
            label_codes,
        })
    }

    pub fn tree(&self) -> &CobwebTree {
        &self.tree
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn check_dims(&self, image: &LabeledImage) -> Result<(), ModelError> {
        if image.rows() != self.rows || image.cols() != self.cols {
            return Err(ModelError::DimensionMismatch {
                rows: image.rows(),
                cols: image.cols(),
                expect_rows: self.rows,
                expect_cols: self.cols,
            });
        }
        Ok(())
    }

    fn pixels_enc(&self, image: &LabeledImage) -> EncInstance {
        EncInstance {
            continuous: self
                .pixel_attrs
                .iter()
                .zip(image.pixels().iter())
                .map(|(&a, &p)| (a, p))
                .collect(),
            ..EncInstance::default()
        }
    }

    /// Fit one labeled image; returns the terminal concept.
    pub fn fit(&mut self, image: &LabeledImage) -> Result<NodeId, ModelError> {
        let label = image.label().ok_or(ModelError::MissingLabel)?;
        self.check_dims(image)?;
        let mut enc = self.pixels_enc(image);
        enc.nominal
            .push((self.label_attr, self.label_codes[label.value() as usize]));
        Ok(self.tree.ifit_enc(&enc, None))
    }

    /// Predict the digit label; the tree is not modified.
    pub fn predict_label(&self, image: &LabeledImage) -> Result<Option<Digit>, ModelError> {
        self.check_dims(image)?;
        let enc = self.pixels_enc(image);
        let terminal = self.tree.categorize_enc(&enc, None);
        Ok(self
            .tree
            .predict_at(terminal, "label")
            .and_then(|v| match v {
                crate::instance::AttributeValue::Nominal(s) => Digit::from_symbol(&s),
                _ => None,
            }))
    }
}

/// The predict-then-learn surface the evaluation harness drives.
pub trait IncrementalModel: Send {
    fn name(&self) -> &str;
    fn predict(&self, image: &LabeledImage) -> Result<Option<Digit>, ModelError>;
    fn learn(&mut self, image: &LabeledImage) -> Result<(), ModelError>;
}

impl IncrementalModel for Cobweb3 {
    fn name(&self) -> &str {
        "cobweb3"
    }

    fn predict(&self, image: &LabeledImage) -> Result<Option<Digit>, ModelError> {
        self.predict_label(image)
    }

    fn learn(&mut self, image: &LabeledImage) -> Result<(), ModelError> {
        self.fit(image).map(|_| ())
    }
}

impl IncrementalModel for ConvCobwebModel {
    fn name(&self) -> &str {
        "convcobweb"
    }

    fn predict(&self, image: &LabeledImage) -> Result<Option<Digit>, ModelError> {
        Ok(self.predict_image(image)?)
    }

    fn learn(&mut self, image: &LabeledImage) -> Result<(), ModelError> {
        self.fit_image(image)?;
        Ok(())
    }
}

/// Which model a configuration names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cobweb3,
    ConvCobweb,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cobweb3 => "cobweb3",
            ModelKind::ConvCobweb => "convcobweb",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cobweb3" => Ok(ModelKind::Cobweb3),
            "convcobweb" => Ok(ModelKind::ConvCobweb),
            other => Err(format!(
                "unknown model '{other}' (expected cobweb3 or convcobweb)"
            )),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelDocError {
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    BadVersion(u32),
    #[error("unknown model kind '{0}'")]
    UnknownKind(String),
    #[error("model document is missing the '{0}' field")]
    MissingField(&'static str),
    #[error(transparent)]
    Tree(#[from] TreeDocError),
    #[error("inconsistent model document: {0}")]
    Inconsistent(String),
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    kind: String,
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filter_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filters: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classifier: Option<serde_json::Value>,
}

/// A trained model as stored on disk: one JSON document carrying the
/// tree(s), the grid dimensions, and a format version.
pub enum ModelFile {
    Cobweb3(Cobweb3),
    ConvCobweb(ConvCobwebModel),
}

impl ModelFile {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelFile::Cobweb3(_) => ModelKind::Cobweb3,
            ModelFile::ConvCobweb(_) => ModelKind::ConvCobweb,
        }
    }

    pub fn to_json_string(&self) -> String {
        match self {
            ModelFile::Cobweb3(m) => cobweb3_to_json(m),
            ModelFile::ConvCobweb(m) => conv_model_to_json(m),
        }
    }

    pub fn from_json_str(s: &str) -> Result<ModelFile, ModelDocError> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelDocError::BadVersion(doc.format_version));
        }
        let kind = doc
            .kind
            .parse::<ModelKind>()
            .map_err(|_| ModelDocError::UnknownKind(doc.kind.clone()))?;
        match kind {
            ModelKind::Cobweb3 => {
                let tree_doc = doc.tree.ok_or(ModelDocError::MissingField("tree"))?;
                let tree = CobwebTree::from_json_value(tree_doc)?;
                let model = Cobweb3::from_tree(tree, doc.rows, doc.cols)
                    .map_err(|e| ModelDocError::Inconsistent(e.to_string()))?;
                Ok(ModelFile::Cobweb3(model))
            }
            ModelKind::ConvCobweb => {
                let filter_size = doc
                    .filter_size
                    .ok_or(ModelDocError::MissingField("filter_size"))?;
                let filters = CobwebTree::from_json_value(
                    doc.filters.ok_or(ModelDocError::MissingField("filters"))?,
                )?;
                let classifier = CobwebTree::from_json_value(
                    doc.classifier
                        .ok_or(ModelDocError::MissingField("classifier"))?,
                )?;
                let model = ConvCobwebModel::from_parts(
                    filters,
                    classifier,
                    doc.rows,
                    doc.cols,
                    filter_size,
                )
                .map_err(|e| ModelDocError::Inconsistent(e.to_string()))?;
                Ok(ModelFile::ConvCobweb(model))
            }
        }
    }
}

/// Serialize a Cobweb/3 model without taking ownership.
pub fn cobweb3_to_json(model: &Cobweb3) -> String {
    let doc = ModelDoc {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Cobweb3.to_string(),
        rows: model.rows(),
        cols: model.cols(),
        filter_size: None,
        tree: Some(model.tree().to_json_value()),
        filters: None,
        classifier: None,
    };
    serde_json::to_string(&doc).expect("model serialization cannot fail")
}

/// Serialize a Convolutional Cobweb model without taking ownership.
pub fn conv_model_to_json(model: &ConvCobwebModel) -> String {
    let doc = ModelDoc {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::ConvCobweb.to_string(),
        rows: model.rows(),
        cols: model.cols(),
        filter_size: Some(model.filter_size()),
        tree: None,
        filters: Some(model.filters().to_json_value()),
        classifier: Some(model.classifier().to_json_value()),
    };
    serde_json::to_string(&doc).expect("model serialization cannot fail")
}
