//! The concept tree engine.
//!
//! A [`CobwebTree`] is a rooted hierarchy of concept nodes. Each node
//! stores an instance count, per-attribute nominal value counts, and
//! per-attribute online Gaussian statistics. Learning (`ifit`) sorts an
//! instance down the tree, choosing among add / create / merge / split
//! at every level by category utility; categorization and prediction
//! are strictly read-only.
//!
//! Attribute values come in three kinds: interned nominal symbols,
//! continuous reals (Cobweb/3 Gaussians with an acuity floor on the
//! standard deviation), and nominal *references* — opaque `u32` keys
//! owned by the caller that can be coarsened through a resolver during
//! category utility computation. References are how the convolutional
//! layer stores filter ids inside a classification tree.

mod cu;
mod dot;
mod fit;
mod serial;

pub use cu::RefResolver;
pub use serial::{TreeDocError, TREE_FORMAT_VERSION};

use crate::instance::{AttributeValue, Instance};
use crate::stats::GaussianStat;
use rustc_hash::FxHashMap;
use std::fmt;

/// Stable identifier of a concept node. Ids are never reused, so a
/// deleted node's id stays recognizably stale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn value(&self) -> u32 {
        self.0
    }

    /// The id as handed out by this tree (`value()`'s inverse). Useful
    /// for tooling and bindings that carry ids across an API boundary;
    /// operations verify liveness and report stale ids as errors.
    pub fn from_value(raw: u32) -> NodeId {
        NodeId(raw)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct AttrId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrKind {
    Nominal,
    Continuous,
    /// Nominal values that are opaque u32 references (e.g. filter node
    /// ids) rather than interned symbols.
    NominalRef,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("attribute '{attr}' is {expected:?} in this tree but the instance supplies {found:?}")]
    VariantMismatch {
        attr: String,
        expected: AttrKind,
        found: AttrKind,
    },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node id {0} refers to a deleted node")]
    StaleNode(NodeId),
    #[error("operation requires an internal node but {0} is a leaf")]
    NotInternal(NodeId),
    #[error("non-finite continuous value for attribute '{attr}'")]
    NonFinite { attr: String },
}

/// The four restructuring choices evaluated at an internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Add(NodeId),
    Create,
    Merge(NodeId, NodeId),
    Split(NodeId),
}

/// Counts of structural operations performed by `ifit`, for
/// instrumentation and stress tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub adds: u64,
    pub creates: u64,
    pub merges: u64,
    pub splits: u64,
    pub fissions: u64,
    pub absorbs: u64,
}

/// Per-attribute nominal count table with cached Σc and Σc².
#[derive(Debug, Clone, Default)]
pub(crate) struct NomTable {
    pub counts: FxHashMap<u32, u64>,
    pub total: u64,
    pub sq: u64,
}

impl NomTable {
    fn add(&mut self, value: u32) {
        let slot = self.counts.entry(value).or_insert(0);
        self.sq += 2 * *slot + 1;
        *slot += 1;
        self.total += 1;
    }

    pub fn get(&self, value: u32) -> u64 {
        self.counts.get(&value).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub count: u64,
    /// Sorted by attribute id.
    pub nominal: Vec<(AttrId, NomTable)>,
    /// Sorted by attribute id.
    pub continuous: Vec<(AttrId, GaussianStat)>,
    /// Σ over plain-nominal attributes of Σ_v c².
    pub plain_sq: u64,
    /// Σ over reference-nominal attributes of Σ_v c².
    pub ref_sq: u64,
}

impl Node {
    pub fn nominal_table(&self, attr: AttrId) -> Option<&NomTable> {
        self.nominal
            .binary_search_by_key(&attr, |(a, _)| *a)
            .ok()
            .map(|i| &self.nominal[i].1)
    }

    pub fn continuous_stat(&self, attr: AttrId) -> Option<&GaussianStat> {
        self.continuous
            .binary_search_by_key(&attr, |(a, _)| *a)
            .ok()
            .map(|i| &self.continuous[i].1)
    }
}

struct AttrInfo {
    name: String,
    kind: AttrKind,
    /// Interned value symbols; used only for `AttrKind::Nominal`.
    value_names: Vec<String>,
    value_ids: FxHashMap<String, u32>,
}

/// Stand-in code for a nominal symbol the tree has never stored. No
/// table can contain it, so lookups correctly report a count of 0.
/// Resolvers must pass it through unchanged (see `cu::resolve_value`).
pub(crate) const UNKNOWN_VALUE: u32 = u32::MAX;

/// An instance translated to the tree's internal attribute/value codes.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct EncInstance {
    /// Sorted by attribute id; covers both plain and reference nominals.
    pub nominal: Vec<(AttrId, u32)>,
    /// Sorted by attribute id.
    pub continuous: Vec<(AttrId, f64)>,
}

/// A rooted concept hierarchy. The root always exists; a freshly built
/// tree has a single node with count 0.
pub struct CobwebTree {
    acuity: f64,
    nodes: Vec<Option<Node>>,
    root: NodeId,
    live: u32,
    attrs: Vec<AttrInfo>,
    attr_ids: FxHashMap<String, AttrId>,
    counters: OpCounters,
    /// Content hash → leaf housing exactly that instance. Leaves are
    /// always pure (created from one instance, grown only by absorbing
    /// bit-identical ones), so a hit — verified by an exact-match check
    /// — routes a duplicate straight back to its own leaf.
    dedup: FxHashMap<u64, NodeId>,
}

impl CobwebTree {
    /// `acuity` is the standard-deviation floor for continuous
    /// attributes and must be positive.
    pub fn new(acuity: f64) -> CobwebTree {
        assert!(acuity > 0.0, "acuity must be positive");
        CobwebTree {
            acuity,
            nodes: vec![Some(Node::default())],
            root: NodeId(0),
            live: 1,
            attrs: Vec::new(),
            attr_ids: FxHashMap::default(),
            counters: OpCounters::default(),
            dedup: FxHashMap::default(),
        }
    }

    pub fn acuity(&self) -> f64 {
        self.acuity
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of live nodes.
    pub fn node_count(&self) -> usize {
        self.live as usize
    }

    /// Total instances fitted (the root count).
    pub fn total_instances(&self) -> u64 {
        self.node(self.root).count
    }

    pub fn counters(&self) -> OpCounters {
        self.counters
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.get(id.0 as usize).is_some_and(|n| n.is_some())
    }

    pub fn count(&self, id: NodeId) -> Result<u64, TreeError> {
        Ok(self.try_node(id)?.count)
    }

    pub fn children(&self, id: NodeId) -> Result<&[NodeId], TreeError> {
        Ok(&self.try_node(id)?.children)
    }

    pub fn parent(&self, id: NodeId) -> Result<Option<NodeId>, TreeError> {
        Ok(self.try_node(id)?.parent)
    }

    pub fn is_leaf(&self, id: NodeId) -> Result<bool, TreeError> {
        Ok(self.try_node(id)?.children.is_empty())
    }

    /// Depth of the deepest node; a single-node tree has depth 0.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, d)) = stack.pop() {
            max = max.max(d);
            for &ch in &self.node(id).children {
                stack.push((ch, d + 1));
            }
        }
        max
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            if node.children.is_empty() {
                n += 1;
            } else {
                stack.extend(node.children.iter().copied());
            }
        }
        n
    }

    /// Live node ids in depth-first preorder.
    pub fn ids_preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.live as usize);
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            for &ch in self.node(id).children.iter().rev() {
                stack.push(ch);
            }
        }
        out
    }

    /// Nominal value counts of one attribute at one node, with values
    /// rendered to strings, sorted by value.
    pub fn nominal_value_counts(
        &self,
        id: NodeId,
        attr: &str,
    ) -> Result<Vec<(String, u64)>, TreeError> {
        let node = self.try_node(id)?;
        let Some(&aid) = self.attr_ids.get(attr) else {
            return Ok(Vec::new());
        };
        let Some(table) = node.nominal_table(aid) else {
            return Ok(Vec::new());
        };
        let info = &self.attrs[aid.0 as usize];
        let mut out: Vec<(String, u64)> = table
            .counts
            .iter()
            .map(|(&v, &c)| (self.value_name(info, v), c))
            .collect();
        out.sort();
        Ok(out)
    }

    /// All nominal tables of a node with attribute names and value
    /// strings, sorted. A stable, hash-order-free view for exports,
    /// remapping, and tests.
    pub fn nominal_tables_named(
        &self,
        id: NodeId,
    ) -> Result<
        std::collections::BTreeMap<String, std::collections::BTreeMap<String, u64>>,
        TreeError,
    > {
        let node = self.try_node(id)?;
        let mut out = std::collections::BTreeMap::new();
        for &(attr, ref table) in &node.nominal {
            let info = &self.attrs[attr.0 as usize];
            let mut values = std::collections::BTreeMap::new();
            for (&v, &c) in &table.counts {
                values.insert(self.value_name(info, v), c);
            }
            out.insert(info.name.clone(), values);
        }
        Ok(out)
    }

    /// Mean of a continuous attribute at a node, if observed there.
    pub fn continuous_mean(&self, id: NodeId, attr: &str) -> Option<f64> {
        let node = self.try_node(id).ok()?;
        let aid = self.attr_ids.get(attr)?;
        let stat = node.continuous_stat(*aid)?;
        (stat.n() > 0).then(|| stat.mean())
    }

    pub(crate) fn try_node_exists(&self, id: NodeId) -> Result<(), TreeError> {
        self.try_node(id).map(|_| ())
    }

    fn value_name(&self, info: &AttrInfo, value: u32) -> String {
        match info.kind {
            AttrKind::Nominal => info.value_names[value as usize].clone(),
            AttrKind::NominalRef => value.to_string(),
            AttrKind::Continuous => unreachable!("continuous attribute in nominal table"),
        }
    }

    pub(crate) fn node(&self, id: NodeId) -> &Node {
        self.nodes[id.0 as usize].as_ref().expect("live node")
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id.0 as usize].as_mut().expect("live node")
    }

    pub(crate) fn try_node(&self, id: NodeId) -> Result<&Node, TreeError> {
        match self.nodes.get(id.0 as usize) {
            Some(Some(n)) => Ok(n),
            Some(None) => Err(TreeError::StaleNode(id)),
            None => Err(TreeError::UnknownNode(id)),
        }
    }

    pub(crate) fn alloc(&mut self, parent: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Some(Node {
            parent,
            ..Node::default()
        }));
        self.live += 1;
        id
    }

    pub(crate) fn delete(&mut self, id: NodeId) {
        debug_assert!(self.nodes[id.0 as usize].is_some());
        self.nodes[id.0 as usize] = None;
        self.live -= 1;
    }

    pub(crate) fn counters_mut(&mut self) -> &mut OpCounters {
        &mut self.counters
    }

    // ---- attribute registry ----

    pub(crate) fn attr_kind(&self, id: AttrId) -> AttrKind {
        self.attrs[id.0 as usize].kind
    }

    pub(crate) fn attr_name(&self, id: AttrId) -> &str {
        &self.attrs[id.0 as usize].name
    }

    pub(crate) fn attr_lookup(&self, name: &str) -> Option<AttrId> {
        self.attr_ids.get(name).copied()
    }

    pub(crate) fn attr_len(&self) -> usize {
        self.attrs.len()
    }

    /// Register an attribute, or return the existing id after checking
    /// the kind matches.
    pub(crate) fn register_attr(
        &mut self,
        name: &str,
        kind: AttrKind,
    ) -> Result<AttrId, TreeError> {
        if let Some(&id) = self.attr_ids.get(name) {
            let expected = self.attrs[id.0 as usize].kind;
            if expected != kind {
                return Err(TreeError::VariantMismatch {
                    attr: name.to_string(),
                    expected,
                    found: kind,
                });
            }
            return Ok(id);
        }
        let id = AttrId(self.attrs.len() as u32);
        self.attrs.push(AttrInfo {
            name: name.to_string(),
            kind,
            value_names: Vec::new(),
            value_ids: FxHashMap::default(),
        });
        self.attr_ids.insert(name.to_string(), id);
        Ok(id)
    }

    pub(crate) fn intern_value(&mut self, attr: AttrId, symbol: &str) -> u32 {
        let info = &mut self.attrs[attr.0 as usize];
        debug_assert_eq!(info.kind, AttrKind::Nominal);
        if let Some(&v) = info.value_ids.get(symbol) {
            return v;
        }
        let v = info.value_names.len() as u32;
        info.value_names.push(symbol.to_string());
        info.value_ids.insert(symbol.to_string(), v);
        v
    }

    pub(crate) fn lookup_value(&self, attr: AttrId, symbol: &str) -> Option<u32> {
        self.attrs[attr.0 as usize].value_ids.get(symbol).copied()
    }

    pub(crate) fn value_symbol(&self, attr: AttrId, value: u32) -> &str {
        &self.attrs[attr.0 as usize].value_names[value as usize]
    }

    // ---- instance encoding ----

    fn kind_of(value: &AttributeValue) -> AttrKind {
        match value {
            AttributeValue::Nominal(_) => AttrKind::Nominal,
            AttributeValue::Continuous(_) => AttrKind::Continuous,
        }
    }

    /// Validate an instance against the registry without mutating
    /// anything. Returns the first mismatch, if any.
    fn validate_instance(&self, inst: &Instance) -> Result<(), TreeError> {
        for (name, value) in inst.iter() {
            if let AttributeValue::Continuous(x) = value {
                if !x.is_finite() {
                    return Err(TreeError::NonFinite {
                        attr: name.to_string(),
                    });
                }
            }
            if let Some(&id) = self.attr_ids.get(name) {
                let expected = self.attrs[id.0 as usize].kind;
                let found = Self::kind_of(value);
                let compatible = match (expected, found) {
                    (AttrKind::Continuous, AttrKind::Continuous) => true,
                    (AttrKind::Nominal, AttrKind::Nominal) => true,
                    // Reference attributes accept nominal symbols that
                    // parse as u32 keys.
                    (AttrKind::NominalRef, AttrKind::Nominal) => true,
                    _ => false,
                };
                if !compatible {
                    return Err(TreeError::VariantMismatch {
                        attr: name.to_string(),
                        expected,
                        found,
                    });
                }
            }
        }
        Ok(())
    }

    /// Encode for mutation paths: unknown attributes are registered.
    pub(crate) fn encode_mut(&mut self, inst: &Instance) -> Result<EncInstance, TreeError> {
        self.validate_instance(inst)?;
        let mut enc = EncInstance::default();
        for (name, value) in inst.iter() {
            match value {
                AttributeValue::Continuous(x) => {
                    let id = self.register_attr(name, AttrKind::Continuous)?;
                    enc.continuous.push((id, *x));
                }
                AttributeValue::Nominal(sym) => {
                    let id = match self.attr_ids.get(name) {
                        Some(&id) => id,
                        None => self.register_attr(name, AttrKind::Nominal)?,
                    };
                    let code = match self.attrs[id.0 as usize].kind {
                        AttrKind::Nominal => self.intern_value(id, sym),
                        AttrKind::NominalRef => {
                            sym.parse::<u32>().map_err(|_| TreeError::VariantMismatch {
                                attr: name.to_string(),
                                expected: AttrKind::NominalRef,
                                found: AttrKind::Nominal,
                            })?
                        }
                        AttrKind::Continuous => unreachable!(),
                    };
                    enc.nominal.push((id, code));
                }
            }
        }
        enc.nominal.sort_by_key(|(a, _)| *a);
        enc.continuous.sort_by_key(|(a, _)| *a);
        Ok(enc)
    }

    /// Encode for read-only paths. Attributes the tree has never seen
    /// are dropped (they say nothing about this tree and registration
    /// would mutate it); novel symbols of known attributes map to
    /// [`UNKNOWN_VALUE`] so they still count as observations of
    /// something never stored.
    pub(crate) fn encode_readonly(&self, inst: &Instance) -> Result<EncInstance, TreeError> {
        self.validate_instance(inst)?;
        let mut enc = EncInstance::default();
        for (name, value) in inst.iter() {
            let Some(&id) = self.attr_ids.get(name) else {
                continue;
            };
            match value {
                AttributeValue::Continuous(x) => enc.continuous.push((id, *x)),
                AttributeValue::Nominal(sym) => match self.attrs[id.0 as usize].kind {
                    AttrKind::Nominal => {
                        let code = self.lookup_value(id, sym).unwrap_or(UNKNOWN_VALUE);
                        enc.nominal.push((id, code));
                    }
                    AttrKind::NominalRef => {
                        let code = sym.parse::<u32>().unwrap_or(UNKNOWN_VALUE);
                        enc.nominal.push((id, code));
                    }
                    AttrKind::Continuous => unreachable!(),
                },
            }
        }
        enc.nominal.sort_by_key(|(a, _)| *a);
        enc.continuous.sort_by_key(|(a, _)| *a);
        Ok(enc)
    }

    // ---- count updates ----

    /// Fold one instance into a node's tables.
    pub(crate) fn increment_enc(&mut self, id: NodeId, inst: &EncInstance) {
        // Collect kinds first to avoid borrowing the registry while the
        // node is mutably borrowed.
        let kinds: Vec<AttrKind> = inst
            .nominal
            .iter()
            .map(|(a, _)| self.attr_kind(*a))
            .collect();
        let node = self.node_mut(id);
        node.count += 1;
        for (i, &(attr, value)) in inst.nominal.iter().enumerate() {
            let idx = match node.nominal.binary_search_by_key(&attr, |(a, _)| *a) {
                Ok(i) => i,
                Err(pos) => {
                    node.nominal.insert(pos, (attr, NomTable::default()));
                    pos
                }
            };
            let table = &mut node.nominal[idx].1;
            let before = table.sq;
            table.add(value);
            let delta = table.sq - before;
            match kinds[i] {
                AttrKind::Nominal => node.plain_sq += delta,
                AttrKind::NominalRef => node.ref_sq += delta,
                AttrKind::Continuous => unreachable!(),
            }
        }
        for &(attr, x) in &inst.continuous {
            let idx = match node.continuous.binary_search_by_key(&attr, |(a, _)| *a) {
                Ok(i) => i,
                Err(pos) => {
                    node.continuous.insert(pos, (attr, GaussianStat::new()));
                    pos
                }
            };
            node.continuous[idx].1.push(x);
        }
    }

    /// Public form of the count update, mainly for building trees by
    /// hand in tests and tools.
    pub fn increment_counts(&mut self, id: NodeId, inst: &Instance) -> Result<(), TreeError> {
        self.try_node(id)?;
        let enc = self.encode_mut(inst)?;
        self.increment_enc(id, &enc);
        Ok(())
    }

    /// New leaf holding exactly one instance.
    pub(crate) fn create_leaf(&mut self, parent: NodeId, inst: &EncInstance) -> NodeId {
        let id = self.alloc(Some(parent));
        self.increment_enc(id, inst);
        self.node_mut(parent).children.push(id);
        self.dedup_insert(inst, id);
        id
    }

    // ---- duplicate routing ----

    pub(crate) fn enc_hash(inst: &EncInstance) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        let mut mix = |bits: u64| {
            hash ^= bits;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for &(attr, value) in &inst.nominal {
            mix(attr.0 as u64);
            mix(value as u64);
        }
        for &(attr, x) in &inst.continuous {
            mix(attr.0 as u64 | 1 << 32);
            mix(x.to_bits());
        }
        hash
    }

    /// The leaf housing exactly this instance, if one exists.
    pub(crate) fn dedup_lookup(&self, inst: &EncInstance) -> Option<NodeId> {
        let &leaf = self.dedup.get(&Self::enc_hash(inst))?;
        let node = self.nodes.get(leaf.0 as usize)?.as_ref()?;
        (node.children.is_empty() && self.exact_match(leaf, inst, None)).then_some(leaf)
    }

    /// Record the leaf that now houses this instance. First writer wins
    /// on hash collisions; lookups verify content, so a lost slot only
    /// costs the shortcut.
    pub(crate) fn dedup_insert(&mut self, inst: &EncInstance, leaf: NodeId) {
        self.dedup.entry(Self::enc_hash(inst)).or_insert(leaf);
    }

    /// Rebuild the duplicate index from leaf tables (used after
    /// deserialization). Only pure leaves are indexable; anything else
    /// is skipped and simply forgoes the shortcut.
    pub(crate) fn rebuild_dedup(&mut self) {
        self.dedup.clear();
        for id in self.ids_preorder() {
            let node = self.node(id);
            if !node.children.is_empty() || node.count == 0 {
                continue;
            }
            let Some(inst) = self.pure_leaf_instance(node) else {
                continue;
            };
            self.dedup.entry(Self::enc_hash(&inst)).or_insert(id);
        }
    }

    /// The single instance a pure leaf holds, or None if the tables
    /// show mixed content.
    fn pure_leaf_instance(&self, node: &Node) -> Option<EncInstance> {
        let mut inst = EncInstance::default();
        for &(attr, ref table) in &node.nominal {
            if table.total != node.count || table.counts.len() != 1 {
                return None;
            }
            let (&value, _) = table.counts.iter().next().expect("single entry");
            inst.nominal.push((attr, value));
        }
        for &(attr, ref stat) in &node.continuous {
            if stat.n() != node.count || stat.std() != 0.0 {
                return None;
            }
            inst.continuous.push((attr, stat.mean()));
        }
        Some(inst)
    }

    /// Does this leaf's stored distribution exactly match the instance?
    /// Reference values are compared through the resolver when given.
    pub(crate) fn exact_match(
        &self,
        id: NodeId,
        inst: &EncInstance,
        resolver: Option<&dyn RefResolver>,
    ) -> bool {
        let node = self.node(id);
        if node.count == 0 {
            return false;
        }
        if node.nominal.len() != inst.nominal.len()
            || node.continuous.len() != inst.continuous.len()
        {
            return false;
        }
        for (&(attr, value), &(nattr, ref table)) in inst.nominal.iter().zip(node.nominal.iter()) {
            if attr != nattr || table.total != node.count {
                return false;
            }
            let remap = resolver.filter(|_| self.attr_kind(attr) == AttrKind::NominalRef);
            match remap {
                None => {
                    if table.get(value) != node.count {
                        return false;
                    }
                }
                Some(r) => {
                    if value == UNKNOWN_VALUE {
                        return false;
                    }
                    let want = r.resolve(value);
                    if !table.counts.keys().all(|&v| r.resolve(v) == want) {
                        return false;
                    }
                }
            }
        }
        for (&(attr, x), &(nattr, ref stat)) in inst.continuous.iter().zip(node.continuous.iter()) {
            if attr != nattr || stat.n() != node.count || stat.std() != 0.0 || stat.mean() != x {
                return false;
            }
        }
        true
    }

    // ---- structure checks ----

    /// Walk the whole tree and verify structural invariants: a single
    /// rooted tree, parent/child agreement, count conservation at
    /// internal nodes, and table totals bounded by node counts.
    pub fn validate(&self) -> Result<(), String> {
        let root_node = self
            .nodes
            .get(self.root.0 as usize)
            .and_then(|n| n.as_ref())
            .ok_or("root id is not a live node")?;
        if root_node.parent.is_some() {
            return Err("root has a parent".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        let mut visited = 0u32;
        while let Some(id) = stack.pop() {
            let node = self
                .nodes
                .get(id.0 as usize)
                .and_then(|n| n.as_ref())
                .ok_or_else(|| format!("dangling child link to {id}"))?;
            if seen[id.0 as usize] {
                return Err(format!("node {id} reached twice (cycle or shared child)"));
            }
            seen[id.0 as usize] = true;
            visited += 1;
            if !node.children.is_empty() {
                let sum: u64 = node
                    .children
                    .iter()
                    .map(|&c| self.try_node(c).map(|n| n.count).unwrap_or(0))
                    .sum();
                if sum != node.count {
                    return Err(format!(
                        "count conservation violated at {id}: count {} vs child sum {sum}",
                        node.count
                    ));
                }
            }
            for &ch in &node.children {
                let child = self
                    .nodes
                    .get(ch.0 as usize)
                    .and_then(|n| n.as_ref())
                    .ok_or_else(|| format!("dangling child link {ch} under {id}"))?;
                if child.parent != Some(id) {
                    return Err(format!("parent link of {ch} does not point to {id}"));
                }
                stack.push(ch);
            }
            for &(attr, ref table) in &node.nominal {
                if table.total > node.count {
                    return Err(format!(
                        "attribute '{}' at {id} has more observations than the node count",
                        self.attr_name(attr)
                    ));
                }
            }
            for &(attr, ref stat) in &node.continuous {
                if stat.n() > node.count {
                    return Err(format!(
                        "attribute '{}' at {id} has more observations than the node count",
                        self.attr_name(attr)
                    ));
                }
                if stat.m2() < 0.0 {
                    return Err(format!("negative m2 at {id}"));
                }
            }
        }
        if visited != self.live {
            return Err(format!(
                "{} live nodes but only {visited} reachable from the root",
                self.live
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod thread_tests {
    use super::*;

    /// Trees and models carry no interior mutability: read-only
    /// operations may run concurrently, per-call scratch lives on the
    /// caller's stack.
    #[test]
    fn tree_is_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<CobwebTree>();
        check::<crate::conv::ConvCobwebModel>();
        check::<crate::models::Cobweb3>();
    }

    #[test]
    fn concurrent_reads_agree() {
        use crate::instance::Instance;
        let mut tree = CobwebTree::new(0.5);
        for i in 0..40usize {
            let inst = Instance::new()
                .with_nominal("c", ["x", "y", "z"][i % 3])
                .with_continuous("v", (i % 7) as f64);
            tree.ifit(&inst).unwrap();
        }
        let probe = Instance::new()
            .with_nominal("c", "y")
            .with_continuous("v", 2.0);
        let expect = tree.categorize(&probe).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| {
                    for _ in 0..50 {
                        assert_eq!(tree.categorize(&probe).unwrap(), expect);
                    }
                });
            }
        });
    }
}
