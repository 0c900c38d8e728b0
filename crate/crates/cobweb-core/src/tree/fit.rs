//! Learning and performance operations on a concept tree.

use super::cu::{CuCtx, RefResolver, Workspace};
use super::{AttrKind, Choice, CobwebTree, EncInstance, NodeId, NomTable, TreeError};
use crate::instance::{AttributeValue, Instance};
use crate::stats::GaussianStat;
use rustc_hash::FxHashMap;

impl CobwebTree {
    /// Incorporate an instance, restructuring as needed, and return the
    /// id of the leaf that now houses it. On a variant mismatch the
    /// tree is left untouched.
    pub fn ifit(&mut self, inst: &Instance) -> Result<NodeId, TreeError> {
        let enc = self.encode_mut(inst)?;
        Ok(self.ifit_enc(&enc, None))
    }

    pub(crate) fn ifit_enc(
        &mut self,
        inst: &EncInstance,
        resolver: Option<&dyn RefResolver>,
    ) -> NodeId {
        // A bit-identical duplicate goes straight back to its own leaf:
        // counts update along the path and no restructuring happens.
        // This is what keeps every unique instance represented by one
        // leaf regardless of how flat the utility landscape is.
        if let Some(leaf) = self.dedup_lookup(inst) {
            let mut cursor = Some(leaf);
            while let Some(id) = cursor {
                self.increment_enc(id, inst);
                cursor = self.node(id).parent;
            }
            self.counters_mut().absorbs += 1;
            return leaf;
        }
        let mut ws = Workspace::new();
        let mut current = self.root;
        loop {
            if self.node(current).children.is_empty() {
                if self.node(current).count == 0 || self.exact_match(current, inst, resolver) {
                    self.increment_enc(current, inst);
                    self.counters_mut().absorbs += 1;
                    self.dedup_insert(inst, current);
                    return current;
                }
                return self.fission(current, inst);
            }
            let choice = {
                let ctx = CuCtx {
                    tree: self,
                    resolver,
                };
                ctx.decide(&mut ws, current, inst)
            };
            match choice {
                Choice::Add(child) => {
                    self.increment_enc(current, inst);
                    ws.invalidate(current);
                    self.counters_mut().adds += 1;
                    current = child;
                }
                Choice::Create => {
                    self.increment_enc(current, inst);
                    ws.invalidate(current);
                    self.counters_mut().creates += 1;
                    return self.create_leaf(current, inst);
                }
                Choice::Merge(a, b) => {
                    self.increment_enc(current, inst);
                    ws.invalidate(current);
                    current = self.merge_children(current, a, b);
                    self.counters_mut().merges += 1;
                }
                Choice::Split(child) => {
                    self.split_child(current, child);
                    ws.invalidate(child);
                    self.counters_mut().splits += 1;
                }
            }
        }
    }

    /// Sort an instance down the tree without modifying anything.
    /// Descent stops where creating a hypothetical new child would be
    /// at least as good as adding to the best existing child.
    pub fn categorize(&self, inst: &Instance) -> Result<NodeId, TreeError> {
        let enc = self.encode_readonly(inst)?;
        Ok(self.categorize_enc(&enc, None))
    }

    pub(crate) fn categorize_enc(
        &self,
        inst: &EncInstance,
        resolver: Option<&dyn RefResolver>,
    ) -> NodeId {
        // A stored duplicate sorts to its own leaf.
        if let Some(leaf) = self.dedup_lookup(inst) {
            return leaf;
        }
        let ctx = CuCtx {
            tree: self,
            resolver,
        };
        let mut ws = Workspace::new();
        let mut current = self.root;
        loop {
            if self.node(current).children.is_empty() {
                return current;
            }
            let lv = ctx.eval_level(&mut ws, current, inst);
            if lv.cu_create >= lv.cu_add {
                return current;
            }
            current = lv.best();
        }
    }

    /// Categorize, then read the target attribute off the terminal
    /// concept: the modal nominal value, or the mean for continuous
    /// targets. Ancestors are consulted when the terminal node has no
    /// observations of the target; `None` if no ancestor has any.
    pub fn predict(
        &self,
        inst: &Instance,
        target: &str,
    ) -> Result<Option<AttributeValue>, TreeError> {
        let stripped = inst.without(target);
        let enc = self.encode_readonly(&stripped)?;
        let terminal = self.categorize_enc(&enc, None);
        Ok(self.predict_at(terminal, target))
    }

    pub(crate) fn predict_at(&self, terminal: NodeId, target: &str) -> Option<AttributeValue> {
        let attr = self.attr_lookup(target)?;
        let kind = self.attr_kind(attr);
        let mut cursor = Some(terminal);
        while let Some(id) = cursor {
            let node = self.node(id);
            match kind {
                AttrKind::Continuous => {
                    if let Some(stat) = node.continuous_stat(attr) {
                        if stat.n() > 0 {
                            return Some(AttributeValue::Continuous(stat.mean()));
                        }
                    }
                }
                AttrKind::Nominal | AttrKind::NominalRef => {
                    if let Some(table) = node.nominal_table(attr) {
                        if table.total > 0 {
                            return Some(AttributeValue::Nominal(self.modal_symbol(attr, table)));
                        }
                    }
                }
            }
            cursor = node.parent;
        }
        None
    }

    /// Highest-count value; ties break toward the smaller symbol so the
    /// answer does not depend on hash iteration order.
    fn modal_symbol(&self, attr: super::AttrId, table: &NomTable) -> String {
        match self.attr_kind(attr) {
            AttrKind::Nominal => {
                let mut best: Option<(u64, &str)> = None;
                for (&v, &c) in &table.counts {
                    let name = self.value_symbol(attr, v);
                    best = Some(match best {
                        Some((bc, bn))
                            if (bc, std::cmp::Reverse(bn)) >= (c, std::cmp::Reverse(name)) =>
                        {
                            (bc, bn)
                        }
                        _ => (c, name),
                    });
                }
                best.expect("nonempty table").1.to_string()
            }
            AttrKind::NominalRef => {
                let mut best: Option<(u64, u32)> = None;
                for (&v, &c) in &table.counts {
                    best = Some(match best {
                        Some((bc, bv))
                            if (bc, std::cmp::Reverse(bv)) >= (c, std::cmp::Reverse(v)) =>
                        {
                            (bc, bv)
                        }
                        _ => (c, v),
                    });
                }
                best.expect("nonempty table").1.to_string()
            }
            AttrKind::Continuous => unreachable!("continuous attribute in nominal table"),
        }
    }

    /// Which of the four operations would `ifit` take at this internal
    /// node, without performing it.
    pub fn best_restructure(&self, node: NodeId, inst: &Instance) -> Result<Choice, TreeError> {
        if self.try_node(node)?.children.is_empty() {
            return Err(TreeError::NotInternal(node));
        }
        let enc = self.encode_readonly(inst)?;
        let ctx = CuCtx {
            tree: self,
            resolver: None,
        };
        Ok(ctx.decide(&mut Workspace::new(), node, &enc))
    }

    // ---- structural mutations ----

    /// Turn a mismatching leaf into an internal node: the old leaf
    /// keeps its id and drops one level, a freshly allocated carrier
    /// takes its place holding the merged counts, and the instance
    /// becomes a new sibling leaf. Leaf ids therefore stay leaves for
    /// the life of the tree.
    fn fission(&mut self, old: NodeId, inst: &EncInstance) -> NodeId {
        let parent = self.node(old).parent;
        let carrier = self.alloc(parent);
        {
            let src = self.node(old).clone();
            let dst = self.node_mut(carrier);
            dst.count = src.count;
            dst.nominal = src.nominal;
            dst.continuous = src.continuous;
            dst.plain_sq = src.plain_sq;
            dst.ref_sq = src.ref_sq;
        }
        match parent {
            Some(p) => {
                let pos = self.child_position(p, old);
                self.node_mut(p).children[pos] = carrier;
            }
            None => self.root = carrier,
        }
        self.node_mut(old).parent = Some(carrier);
        self.node_mut(carrier).children.push(old);
        self.increment_enc(carrier, inst);
        self.counters_mut().fissions += 1;
        self.create_leaf(carrier, inst)
    }

    /// Fuse two children under a new node whose tables are their
    /// elementwise sum (Gaussians pooled exactly); the new node takes
    /// the earlier child slot and adopts both as its children.
    fn merge_children(&mut self, parent: NodeId, a: NodeId, b: NodeId) -> NodeId {
        let merged = self.alloc(Some(parent));
        let (count, nominal, continuous, plain_sq, ref_sq) = self.merged_tables(a, b);
        {
            let m = self.node_mut(merged);
            m.count = count;
            m.nominal = nominal;
            m.continuous = continuous;
            m.plain_sq = plain_sq;
            m.ref_sq = ref_sq;
            m.children = vec![a, b];
        }
        let pos_a = self.child_position(parent, a);
        let pos_b = self.child_position(parent, b);
        let (lo, hi) = (pos_a.min(pos_b), pos_a.max(pos_b));
        {
            let siblings = &mut self.node_mut(parent).children;
            siblings[lo] = merged;
            siblings.remove(hi);
        }
        self.node_mut(a).parent = Some(merged);
        self.node_mut(b).parent = Some(merged);
        merged
    }

    #[allow(clippy::type_complexity)]
    fn merged_tables(
        &self,
        a: NodeId,
        b: NodeId,
    ) -> (
        u64,
        Vec<(super::AttrId, NomTable)>,
        Vec<(super::AttrId, GaussianStat)>,
        u64,
        u64,
    ) {
        let na = self.node(a);
        let nb = self.node(b);
        let mut nominal = Vec::with_capacity(na.nominal.len().max(nb.nominal.len()));
        let mut plain_sq = 0u64;
        let mut ref_sq = 0u64;
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let next_a = na.nominal.get(i).map(|(x, _)| *x);
            let next_b = nb.nominal.get(j).map(|(x, _)| *x);
            let attr = match (next_a, next_b) {
                (Some(x), Some(y)) => x.min(y),
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => break,
            };
            let mut counts: FxHashMap<u32, u64> = FxHashMap::default();
            let mut total = 0u64;
            if next_a == Some(attr) {
                for (&v, &c) in &na.nominal[i].1.counts {
                    *counts.entry(v).or_insert(0) += c;
                }
                total += na.nominal[i].1.total;
                i += 1;
            }
            if next_b == Some(attr) {
                for (&v, &c) in &nb.nominal[j].1.counts {
                    *counts.entry(v).or_insert(0) += c;
                }
                total += nb.nominal[j].1.total;
                j += 1;
            }
            let sq: u64 = counts.values().map(|&c| c * c).sum();
            match self.attr_kind(attr) {
                AttrKind::Nominal => plain_sq += sq,
                AttrKind::NominalRef => ref_sq += sq,
                AttrKind::Continuous => unreachable!(),
            }
            nominal.push((attr, NomTable { counts, total, sq }));
        }
        let mut continuous = Vec::with_capacity(na.continuous.len().max(nb.continuous.len()));
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let next_a = na.continuous.get(i).map(|(x, _)| *x);
            let next_b = nb.continuous.get(j).map(|(x, _)| *x);
            let attr = match (next_a, next_b) {
                (Some(x), Some(y)) => x.min(y),
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => break,
            };
            let mut pooled = GaussianStat::new();
            if next_a == Some(attr) {
                pooled = pooled.merged(&na.continuous[i].1);
                i += 1;
            }
            if next_b == Some(attr) {
                pooled = pooled.merged(&nb.continuous[j].1);
                j += 1;
            }
            continuous.push((attr, pooled));
        }
        (na.count + nb.count, nominal, continuous, plain_sq, ref_sq)
    }

    /// Remove an internal child and promote its children into its slot,
    /// preserving order. Only internal nodes are ever deleted.
    fn split_child(&mut self, parent: NodeId, child: NodeId) {
        debug_assert!(!self.node(child).children.is_empty());
        let pos = self.child_position(parent, child);
        let grandchildren = std::mem::take(&mut self.node_mut(child).children);
        for &g in &grandchildren {
            self.node_mut(g).parent = Some(parent);
        }
        self.node_mut(parent)
            .children
            .splice(pos..=pos, grandchildren);
        self.delete(child);
    }

    fn child_position(&self, parent: NodeId, child: NodeId) -> usize {
        self.node(parent)
            .children
            .iter()
            .position(|&c| c == child)
            .expect("child under parent")
    }
}
