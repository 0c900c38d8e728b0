//! Canonical JSON serialization of a concept tree.
//!
//! Nodes are listed in depth-first preorder, map keys are sorted, and
//! continuous statistics are written as `{n, mean, std}` with the
//! standard deviation recomputed at write time; on load `m2` is
//! reconstructed as `std²·n`. Serializing, loading, and serializing
//! again reproduces the document byte for byte.

use super::{AttrKind, CobwebTree, NodeId};
use crate::stats::GaussianStat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TreeDocError {
    #[error("malformed tree document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported tree format version {0}")]
    BadVersion(u32),
    #[error("acuity must be positive, got {0}")]
    BadAcuity(f64),
    #[error("unknown attribute kind '{0}'")]
    UnknownKind(String),
    #[error("node id {0} appears twice")]
    DuplicateId(u32),
    #[error("node id {id} out of range (next_id = {next_id})")]
    IdOutOfRange { id: u32, next_id: u32 },
    #[error("attribute '{attr}' carries non-integer reference value '{value}'")]
    BadRefValue { attr: String, value: String },
    #[error("node {node} references undeclared attribute '{attr}'")]
    UndeclaredAttr { node: u32, attr: String },
    #[error("invalid tree structure: {0}")]
    Structure(String),
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    format_version: u32,
    acuity: f64,
    next_id: u32,
    root: u32,
    attributes: BTreeMap<String, String>,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: u32,
    count: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    nominal: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    continuous: BTreeMap<String, StatDoc>,
}

#[derive(Serialize, Deserialize)]
struct StatDoc {
    n: u64,
    mean: f64,
    std: f64,
}

fn kind_name(kind: AttrKind) -> &'static str {
    match kind {
        AttrKind::Nominal => "nominal",
        AttrKind::Continuous => "continuous",
        AttrKind::NominalRef => "nominal_ref",
    }
}

fn kind_from_name(name: &str) -> Option<AttrKind> {
    match name {
        "nominal" => Some(AttrKind::Nominal),
        "continuous" => Some(AttrKind::Continuous),
        "nominal_ref" => Some(AttrKind::NominalRef),
        _ => None,
    }
}

impl CobwebTree {
    fn to_doc(&self) -> TreeDoc {
        let mut attributes = BTreeMap::new();
        for i in 0..self.attr_len() {
            let id = super::AttrId(i as u32);
            attributes.insert(
                self.attr_name(id).to_string(),
                kind_name(self.attr_kind(id)).to_string(),
            );
        }
        let mut nodes = Vec::with_capacity(self.node_count());
        for id in self.ids_preorder() {
            let node = self.node(id);
            let mut nominal = BTreeMap::new();
            for &(attr, ref table) in &node.nominal {
                let mut values = BTreeMap::new();
                for (&v, &c) in &table.counts {
                    let key = match self.attr_kind(attr) {
                        AttrKind::Nominal => self.value_symbol(attr, v).to_string(),
                        AttrKind::NominalRef => v.to_string(),
                        AttrKind::Continuous => unreachable!(),
                    };
                    values.insert(key, c);
                }
                nominal.insert(self.attr_name(attr).to_string(), values);
            }
            let mut continuous = BTreeMap::new();
            for &(attr, ref stat) in &node.continuous {
                continuous.insert(
                    self.attr_name(attr).to_string(),
                    StatDoc {
                        n: stat.n(),
                        mean: stat.mean(),
                        std: stat.std(),
                    },
                );
            }
            nodes.push(NodeDoc {
                id: id.0,
                count: node.count,
                children: node.children.iter().map(|c| c.0).collect(),
                nominal,
                continuous,
            });
        }
        TreeDoc {
            format_version: TREE_FORMAT_VERSION,
            acuity: self.acuity(),
            next_id: self.nodes.len() as u32,
            root: self.root.0,
            attributes,
            nodes,
        }
    }

    fn from_doc(doc: TreeDoc) -> Result<CobwebTree, TreeDocError> {
        if doc.format_version != TREE_FORMAT_VERSION {
            return Err(TreeDocError::BadVersion(doc.format_version));
        }
        if !(doc.acuity > 0.0) {
            return Err(TreeDocError::BadAcuity(doc.acuity));
        }
        let mut tree = CobwebTree::new(doc.acuity);
        tree.nodes.clear();
        tree.live = 0;
        tree.nodes.resize_with(doc.next_id as usize, || None);
        for (name, kind) in &doc.attributes {
            let kind =
                kind_from_name(kind).ok_or_else(|| TreeDocError::UnknownKind(kind.clone()))?;
            tree.register_attr(name, kind).expect("fresh registry");
        }
        for nd in &doc.nodes {
            if nd.id >= doc.next_id {
                return Err(TreeDocError::IdOutOfRange {
                    id: nd.id,
                    next_id: doc.next_id,
                });
            }
            if tree.nodes[nd.id as usize].is_some() {
                return Err(TreeDocError::DuplicateId(nd.id));
            }
            let mut node = super::Node {
                count: nd.count,
                children: nd.children.iter().map(|&c| NodeId(c)).collect(),
                ..super::Node::default()
            };
            for (attr_name, values) in &nd.nominal {
                let attr =
                    tree.attr_lookup(attr_name)
                        .ok_or_else(|| TreeDocError::UndeclaredAttr {
                            node: nd.id,
                            attr: attr_name.clone(),
                        })?;
                let kind = tree.attr_kind(attr);
                let mut table = super::NomTable::default();
                for (value, &count) in values {
                    let code = match kind {
                        AttrKind::Nominal => tree.intern_value(attr, value),
                        AttrKind::NominalRef => {
                            value
                                .parse::<u32>()
                                .map_err(|_| TreeDocError::BadRefValue {
                                    attr: attr_name.clone(),
                                    value: value.clone(),
                                })?
                        }
                        AttrKind::Continuous => {
                            return Err(TreeDocError::Structure(format!(
                                "continuous attribute '{attr_name}' used nominally at node {}",
                                nd.id
                            )))
                        }
                    };
                    table.counts.insert(code, count);
                    table.total += count;
                    table.sq += count * count;
                }
                match kind {
                    AttrKind::Nominal => node.plain_sq += table.sq,
                    AttrKind::NominalRef => node.ref_sq += table.sq,
                    AttrKind::Continuous => unreachable!(),
                }
                node.nominal.push((attr, table));
            }
            node.nominal.sort_by_key(|(a, _)| *a);
            for (attr_name, stat) in &nd.continuous {
                let attr =
                    tree.attr_lookup(attr_name)
                        .ok_or_else(|| TreeDocError::UndeclaredAttr {
                            node: nd.id,
                            attr: attr_name.clone(),
                        })?;
                if tree.attr_kind(attr) != AttrKind::Continuous {
                    return Err(TreeDocError::Structure(format!(
                        "nominal attribute '{attr_name}' used continuously at node {}",
                        nd.id
                    )));
                }
                node.continuous
                    .push((attr, GaussianStat::from_parts(stat.n, stat.mean, stat.std)));
            }
            node.continuous.sort_by_key(|(a, _)| *a);
            tree.nodes[nd.id as usize] = Some(node);
            tree.live += 1;
        }
        tree.root = NodeId(doc.root);
        // Derive parent links from the child lists.
        for nd in &doc.nodes {
            for &c in &nd.children {
                match tree.nodes.get_mut(c as usize).and_then(|n| n.as_mut()) {
                    Some(child) => child.parent = Some(NodeId(nd.id)),
                    None => {
                        return Err(TreeDocError::Structure(format!(
                            "node {} lists missing child {c}",
                            nd.id
                        )))
                    }
                }
            }
        }
        tree.validate().map_err(TreeDocError::Structure)?;
        tree.rebuild_dedup();
        Ok(tree)
    }

    /// Canonical single-line JSON document.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("tree serialization cannot fail")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("tree serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<CobwebTree, TreeDocError> {
        Self::from_doc(serde_json::from_str(s)?)
    }

    pub fn from_json_value(v: serde_json::Value) -> Result<CobwebTree, TreeDocError> {
        Self::from_doc(serde_json::from_value(v)?)
    }
}
