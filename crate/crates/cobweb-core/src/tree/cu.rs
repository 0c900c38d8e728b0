//! Expected correct guesses and category utility.
//!
//! The hot paths never iterate full count tables. Each node caches
//! Σ_v c² per nominal attribute (and the tree-wide split into plain and
//! reference parts), so the nominal part of ECG is `Σc² / count²` and a
//! hypothetical "node plus this instance" evaluation only touches the
//! attribute-value pairs the instance actually carries.
//!
//! When a [`RefResolver`] is supplied, reference-valued attributes are
//! viewed through it: stored keys are resolved, counts with the same
//! resolved key merge, and all ECG arithmetic runs on the merged view.
//! Views are materialized lazily in a per-call [`Workspace`] and thrown
//! away afterwards, which keeps read-only operations free of hidden
//! shared state.

use super::{AttrId, AttrKind, Choice, CobwebTree, EncInstance, NodeId, NomTable, TreeError};
use crate::stats::GaussianStat;
use rustc_hash::FxHashMap;

/// Maps a stored reference key to the key that should stand for it
/// during category utility computation.
pub trait RefResolver {
    fn resolve(&self, raw: u32) -> u32;
}

/// Per-call scratch space: resolved-count views keyed by node id.
/// Valid only while the resolver's underlying structure is unchanged,
/// which holds for the duration of one tree operation.
#[derive(Default)]
pub(crate) struct Workspace {
    views: FxHashMap<u32, RemapView>,
}

struct RemapView {
    /// Reference attributes only, sorted by attribute id.
    tables: Vec<(AttrId, FxHashMap<u32, u64>)>,
    ref_sq: u64,
}

impl RemapView {
    fn table(&self, attr: AttrId) -> Option<&FxHashMap<u32, u64>> {
        self.tables
            .binary_search_by_key(&attr, |(a, _)| *a)
            .ok()
            .map(|i| &self.tables[i].1)
    }
}

impl Workspace {
    pub fn new() -> Workspace {
        Workspace::default()
    }

    pub fn invalidate(&mut self, id: NodeId) {
        self.views.remove(&id.0);
    }
}

fn sq_of(map: &FxHashMap<u32, u64>) -> u64 {
    map.values().map(|&c| c * c).sum()
}

/// Resolve an instance-supplied value, passing the unknown-value
/// sentinel through untouched.
fn resolve_value(resolver: &dyn RefResolver, raw: u32) -> u32 {
    if raw == super::UNKNOWN_VALUE {
        raw
    } else {
        resolver.resolve(raw)
    }
}

pub(crate) struct CuCtx<'t> {
    pub tree: &'t CobwebTree,
    pub resolver: Option<&'t dyn RefResolver>,
}

impl<'t> CuCtx<'t> {
    fn acuity(&self) -> f64 {
        self.tree.acuity()
    }

    /// Continuous ECG term: 1 / (2·√π·max(σ, acuity)).
    fn cont_term(&self, std: f64) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI.sqrt() * std.max(self.acuity()))
    }

    fn ensure_view(&self, ws: &mut Workspace, id: NodeId) {
        let Some(resolver) = self.resolver else {
            return;
        };
        if ws.views.contains_key(&id.0) {
            return;
        }
        let node = self.tree.node(id);
        let mut tables = Vec::new();
        let mut ref_sq = 0u64;
        for &(attr, ref table) in &node.nominal {
            if self.tree.attr_kind(attr) != AttrKind::NominalRef {
                continue;
            }
            let mut merged: FxHashMap<u32, u64> = FxHashMap::default();
            merged.reserve(table.counts.len());
            for (&v, &c) in &table.counts {
                *merged.entry(resolver.resolve(v)).or_insert(0) += c;
            }
            ref_sq += sq_of(&merged);
            tables.push((attr, merged));
        }
        ws.views.insert(id.0, RemapView { tables, ref_sq });
    }

    /// Effective Σc² over reference attributes for this node.
    fn ref_sq(&self, ws: &mut Workspace, id: NodeId) -> u64 {
        match self.resolver {
            None => self.tree.node(id).ref_sq,
            Some(_) => {
                self.ensure_view(ws, id);
                ws.views[&id.0].ref_sq
            }
        }
    }

    /// Count of `value` under `attr` at this node, through the resolver
    /// when the attribute is reference-valued.
    fn effective_count(&self, ws: &Workspace, id: NodeId, attr: AttrId, value: u32) -> u64 {
        let node = self.tree.node(id);
        match (self.resolver, self.tree.attr_kind(attr)) {
            (Some(r), AttrKind::NominalRef) => {
                let resolved = resolve_value(r, value);
                ws.views
                    .get(&id.0)
                    .and_then(|v| v.table(attr))
                    .map_or(0, |t| t.get(&resolved).copied().unwrap_or(0))
            }
            _ => node.nominal_table(attr).map_or(0, |t| t.get(value)),
        }
    }

    /// Expected correct guesses of a node as it stands.
    pub fn ecg(&self, ws: &mut Workspace, id: NodeId) -> f64 {
        let node = self.tree.node(id);
        if node.count == 0 {
            return 0.0;
        }
        let ref_sq = self.ref_sq(ws, id);
        let node = self.tree.node(id);
        let n = node.count as f64;
        let mut total = (node.plain_sq + ref_sq) as f64 / (n * n);
        for (_, stat) in &node.continuous {
            if stat.n() > 0 {
                total += self.cont_term(stat.std());
            }
        }
        total
    }

    /// Expected correct guesses of the hypothetical node holding this
    /// node's instances plus `inst`.
    pub fn ecg_with(&self, ws: &mut Workspace, id: NodeId, inst: &EncInstance) -> f64 {
        self.ensure_view(ws, id);
        let node = self.tree.node(id);
        let ref_sq = match self.resolver {
            None => node.ref_sq,
            Some(_) => ws.views[&id.0].ref_sq,
        };
        let mut sq = node.plain_sq + ref_sq;
        for &(attr, value) in &inst.nominal {
            let c = self.effective_count(ws, id, attr, value);
            sq += 2 * c + 1;
        }
        let n1 = (node.count + 1) as f64;
        let mut total = sq as f64 / (n1 * n1);
        for (_, stat) in &node.continuous {
            if stat.n() > 0 {
                total += self.cont_term(stat.std());
            }
        }
        for &(attr, x) in &inst.continuous {
            match node.continuous_stat(attr) {
                Some(stat) if stat.n() > 0 => {
                    total -= self.cont_term(stat.std());
                    total += self.cont_term(stat.with_value(x).std());
                }
                _ => total += self.cont_term(0.0),
            }
        }
        total
    }

    /// ECG of a brand-new singleton concept holding only `inst`.
    pub fn singleton_ecg(&self, inst: &EncInstance) -> f64 {
        inst.nominal.len() as f64 + inst.continuous.len() as f64 * self.cont_term(0.0)
    }

    /// ECG of the hypothetical concept formed by merging nodes `a` and
    /// `b` and then adding `inst`.
    fn merged_ecg_with(&self, ws: &mut Workspace, a: NodeId, b: NodeId, inst: &EncInstance) -> f64 {
        self.ensure_view(ws, a);
        self.ensure_view(ws, b);
        let na = self.tree.node(a);
        let nb = self.tree.node(b);
        let mut sq = 0u64;

        // Nominal: walk the union of both nodes' attribute lists.
        let (mut i, mut j) = (0usize, 0usize);
        let mut inst_counts: FxHashMap<(AttrId, u32), u64> = FxHashMap::default();
        while i < na.nominal.len() || j < nb.nominal.len() {
            let next_a = na.nominal.get(i).map(|(x, _)| *x);
            let next_b = nb.nominal.get(j).map(|(x, _)| *x);
            let attr = match (next_a, next_b) {
                (Some(x), Some(y)) => x.min(y),
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => break,
            };
            let ta = (next_a == Some(attr)).then(|| &na.nominal[i].1);
            let tb = (next_b == Some(attr)).then(|| &nb.nominal[j].1);
            if ta.is_some() {
                i += 1;
            }
            if tb.is_some() {
                j += 1;
            }
            let remapped =
                self.resolver.is_some() && self.tree.attr_kind(attr) == AttrKind::NominalRef;
            if remapped {
                let va = ws.views[&a.0].table(attr);
                let vb = ws.views[&b.0].table(attr);
                sq += merged_map_sq(va, vb, attr, &mut inst_counts);
            } else {
                sq += merged_raw_sq(ta, tb, attr, &mut inst_counts);
            }
        }
        for &(attr, value) in &inst.nominal {
            let key = match (self.resolver, self.tree.attr_kind(attr)) {
                (Some(r), AttrKind::NominalRef) => resolve_value(r, value),
                _ => value,
            };
            let c = inst_counts.get(&(attr, key)).copied().unwrap_or(0);
            sq += 2 * c + 1;
        }
        let n1 = (na.count + nb.count + 1) as f64;
        let mut total = sq as f64 / (n1 * n1);

        // Continuous: pool per attribute, then push the instance value.
        let (mut i, mut j) = (0usize, 0usize);
        while i < na.continuous.len() || j < nb.continuous.len() {
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
            if let Ok(pos) = inst.continuous.binary_search_by_key(&attr, |(x, _)| *x) {
                pooled = pooled.with_value(inst.continuous[pos].1);
            }
            if pooled.n() > 0 {
                total += self.cont_term(pooled.std());
            }
        }
        // Instance attributes neither node has seen.
        for &(attr, _) in &inst.continuous {
            if na.continuous_stat(attr).is_none() && nb.continuous_stat(attr).is_none() {
                total += self.cont_term(0.0);
            }
        }
        total
    }

    /// Evaluate the add-vs-create comparison at an internal node.
    /// Children are ranked by `(count+1)·ECG(child+x) − count·ECG(child)`,
    /// which orders them exactly as the full category utility of the
    /// corresponding insertion partitions would.
    pub fn eval_level(&self, ws: &mut Workspace, parent: NodeId, inst: &EncInstance) -> LevelEval {
        let children: Vec<NodeId> = self.tree.node(parent).children.clone();
        debug_assert!(!children.is_empty());
        let n = self.tree.node(parent).count as f64;
        let n1 = n + 1.0;
        let c = children.len() as f64;

        let parent_ecg_with = self.ecg_with(ws, parent, inst);

        // Rank children by score; ties go first to a child whose stored
        // distribution exactly matches the instance (so duplicates keep
        // following their own branch even on flat CU plateaus), then to
        // the lowest index.
        let mut weighted_ecg_sum = 0.0; // Σ_k count_k · ECG(C_k)
        let mut best: Option<(f64, bool, usize)> = None;
        let mut second: Option<(f64, bool, usize)> = None;
        let mut child_ecgs = Vec::with_capacity(children.len());
        for (idx, &ch) in children.iter().enumerate() {
            let ecg = self.ecg(ws, ch);
            child_ecgs.push(ecg);
            let cnt = self.tree.node(ch).count as f64;
            weighted_ecg_sum += cnt * ecg;
            let score = (cnt + 1.0) * self.ecg_with(ws, ch, inst) - cnt * ecg;
            let exact = self.tree.exact_match(ch, inst, self.resolver);
            let beats = |incumbent: &(f64, bool, usize)| {
                score > incumbent.0 || (score == incumbent.0 && exact && !incumbent.1)
            };
            match best {
                Some(ref b) if !beats(b) => match second {
                    Some(ref s) if !beats(s) => {}
                    _ => second = Some((score, exact, idx)),
                },
                _ => {
                    second = best;
                    best = Some((score, exact, idx));
                }
            }
        }
        let (best_score, _, best_idx) = best.expect("internal node has children");
        let cu_add = (weighted_ecg_sum + best_score - n1 * parent_ecg_with) / (n1 * c);
        let cu_create =
            (weighted_ecg_sum + self.singleton_ecg(inst) - n1 * parent_ecg_with) / (n1 * (c + 1.0));
        LevelEval {
            children,
            child_ecgs,
            best_idx,
            second_idx: second.map(|(_, _, i)| i),
            cu_add,
            cu_create,
            weighted_ecg_sum,
            parent_ecg_with,
        }
    }

    /// Choose among the four restructuring operations at an internal
    /// node. Ties break by fixed precedence Add > Create > Merge >
    /// Split; among equal-scoring children the lowest index wins.
    pub fn decide(&self, ws: &mut Workspace, parent: NodeId, inst: &EncInstance) -> Choice {
        let lv = self.eval_level(ws, parent, inst);
        let n = self.tree.node(parent).count as f64;
        let n1 = n + 1.0;
        let c = lv.children.len() as f64;
        let best = lv.children[lv.best_idx];

        let mut winner = (lv.cu_add, Choice::Add(best));
        if lv.cu_create > winner.0 {
            winner = (lv.cu_create, Choice::Create);
        }

        // Merging needs a third child to stand apart from: fusing the
        // only two children reproduces the parent's own distribution
        // (CU exactly 0) and descending into it would recreate the same
        // two-child decision forever.
        if lv.children.len() >= 3 {
            let second_idx = lv.second_idx.expect("three children imply a second-best");
            let second = lv.children[second_idx];
            let cnt_b = self.tree.node(best).count as f64;
            let cnt_s = self.tree.node(second).count as f64;
            let merged_ecg = self.merged_ecg_with(ws, best, second, inst);
            let sum = lv.weighted_ecg_sum
                - cnt_b * lv.child_ecgs[lv.best_idx]
                - cnt_s * lv.child_ecgs[second_idx]
                + (cnt_b + cnt_s + 1.0) * merged_ecg;
            let cu_merge = (sum - n1 * lv.parent_ecg_with) / (n1 * (c - 1.0));
            if cu_merge > winner.0 {
                winner = (cu_merge, Choice::Merge(best, second));
            }
        }

        let grandchildren = self.tree.node(best).children.clone();
        if !grandchildren.is_empty() {
            // Split is evaluated on the partition as it stands, without
            // the incoming instance: the instance is only placed after
            // the promotion, on a later pass.
            let parent_ecg = self.ecg(ws, parent);
            let cnt_b = self.tree.node(best).count as f64;
            let mut sum = lv.weighted_ecg_sum - cnt_b * lv.child_ecgs[lv.best_idx];
            for &g in &grandchildren {
                sum += self.tree.node(g).count as f64 * self.ecg(ws, g);
            }
            let size = c - 1.0 + grandchildren.len() as f64;
            let cu_split = (sum - n * parent_ecg) / (n * size);
            if cu_split > winner.0 {
                winner = (cu_split, Choice::Split(best));
            }
        }

        winner.1
    }
}

pub(crate) struct LevelEval {
    pub children: Vec<NodeId>,
    pub child_ecgs: Vec<f64>,
    pub best_idx: usize,
    pub second_idx: Option<usize>,
    pub cu_add: f64,
    pub cu_create: f64,
    pub weighted_ecg_sum: f64,
    pub parent_ecg_with: f64,
}

impl LevelEval {
    pub fn best(&self) -> NodeId {
        self.children[self.best_idx]
    }
}

/// Σ(ca+cb)² over the union of two raw tables, also recording the
/// merged counts for the caller's instance adjustment.
fn merged_raw_sq(
    ta: Option<&NomTable>,
    tb: Option<&NomTable>,
    attr: AttrId,
    out_counts: &mut FxHashMap<(AttrId, u32), u64>,
) -> u64 {
    let empty = FxHashMap::default();
    let ma = ta.map(|t| &t.counts).unwrap_or(&empty);
    let mb = tb.map(|t| &t.counts).unwrap_or(&empty);
    merged_map_sq(Some(ma), Some(mb), attr, out_counts)
}

fn merged_map_sq(
    ma: Option<&FxHashMap<u32, u64>>,
    mb: Option<&FxHashMap<u32, u64>>,
    attr: AttrId,
    out_counts: &mut FxHashMap<(AttrId, u32), u64>,
) -> u64 {
    let empty = FxHashMap::default();
    let ma = ma.unwrap_or(&empty);
    let mb = mb.unwrap_or(&empty);
    let mut sq = 0u64;
    for (&v, &ca) in ma {
        let c = ca + mb.get(&v).copied().unwrap_or(0);
        sq += c * c;
        out_counts.insert((attr, v), c);
    }
    for (&v, &cb) in mb {
        if !ma.contains_key(&v) {
            sq += cb * cb;
            out_counts.insert((attr, v), cb);
        }
    }
    sq
}

impl CobwebTree {
    /// Expected correct guesses of one node: Σ_v P(A=v)² over nominal
    /// attributes plus Σ 1/(2√π·max(σ, acuity)) over continuous ones.
    /// A node with count 0 scores 0.
    pub fn expected_correct_guesses(&self, id: NodeId) -> Result<f64, TreeError> {
        self.try_node(id)?;
        let ctx = CuCtx {
            tree: self,
            resolver: None,
        };
        Ok(ctx.ecg(&mut Workspace::new(), id))
    }

    /// Category utility of a partition under a parent:
    /// `(1/n) Σ_k (count_k / parent_count) · (ECG(C_k) − ECG(parent))`.
    /// An empty partition scores 0.
    pub fn category_utility(&self, parent: NodeId, partition: &[NodeId]) -> Result<f64, TreeError> {
        let parent_count = self.try_node(parent)?.count;
        for &id in partition {
            self.try_node(id)?;
        }
        if partition.is_empty() || parent_count == 0 {
            return Ok(0.0);
        }
        let ctx = CuCtx {
            tree: self,
            resolver: None,
        };
        let mut ws = Workspace::new();
        let parent_ecg = ctx.ecg(&mut ws, parent);
        let mut sum = 0.0;
        for &id in partition {
            let weight = self.node(id).count as f64 / parent_count as f64;
            sum += weight * (ctx.ecg(&mut ws, id) - parent_ecg);
        }
        Ok(sum / partition.len() as f64)
    }
}
