//! Class labels and bounded finite models.
//!
//! The class `K(s)` of a state is the minimum number of inhibitions on any
//! path from the origin to `s`. The bounded model for accuracy `K0` keeps
//! every state with `K(s) <= K0`; an inhibition or discharge branch whose
//! every completion leaves that set is pruned and its sibling becomes forced.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, BdmState, BudgetPolicy, Discharge, ProbMonomial, TransitionWeight};
use crate::error::{Error, Result};
use crate::partitions::partition_table;

pub const DEFAULT_CLASS_CAP: usize = 10_000_000;

/// `K(s)` for every state with `K(s) <= K0`, across all layers.
#[derive(Clone, Debug)]
pub struct ClassMap {
    m: usize,
    k0: u32,
    classes: HashMap<BdmState, u32>,
}

impl ClassMap {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k0(&self) -> u32 {
        self.k0
    }

    pub fn get(&self, s: &BdmState) -> Option<u32> {
        self.classes.get(s).copied()
    }

    pub fn contains(&self, s: &BdmState) -> bool {
        self.classes.contains_key(s)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BdmState, u32)> {
        self.classes.iter().map(|(s, &k)| (s, k))
    }
}

pub fn compute_classes(m: usize, k0: u32) -> Result<ClassMap> {
    compute_classes_with_cap(m, k0, DEFAULT_CLASS_CAP)
}

/// Shortest-path search over the unbounded model with inhibition counts as
/// edge costs, processed level by level (bucket queue). Level `k` is only
/// finalized once all lower levels are closed.
pub fn compute_classes_with_cap(m: usize, k0: u32, cap: usize) -> Result<ClassMap> {
    if m == 0 {
        return Err(Error::ZeroSequences);
    }
    let origin = BdmState::origin(m)?;
    let mut best: HashMap<BdmState, u32> = HashMap::new();
    let mut buckets: Vec<Vec<BdmState>> = vec![Vec::new(); k0 as usize + 1];
    best.insert(origin.clone(), 0);
    buckets[0].push(origin);

    for level in 0..=k0 {
        let mut settled = 0usize;
        let mut i = 0;
        while i < buckets[level as usize].len() {
            let s = buckets[level as usize][i].clone();
            i += 1;
            if best.get(&s).copied() != Some(level) {
                continue;
            }
            settled += 1;
            if settled > cap {
                return Err(Error::ClassCapExceeded { m, k0, level, cap });
            }
            for o in step(&s, BudgetPolicy::Unbounded)? {
                let k = level + o.inhibitions;
                if k > k0 {
                    continue;
                }
                match best.get(&o.state) {
                    Some(&old) if old <= k => {}
                    _ => {
                        best.insert(o.state.clone(), k);
                        buckets[k as usize].push(o.state);
                    }
                }
            }
        }
        // Duplicates with stale labels are skipped above; free the bucket.
        buckets[level as usize] = Vec::new();
    }
    Ok(ClassMap { m, k0, classes: best })
}

/// A stored transition: one decision path to a successor in the next layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub to: usize,
    pub weight: ProbMonomial,
    pub discharges: Vec<Discharge>,
    pub inhibitions: u32,
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub states: Vec<BdmState>,
    pub classes: Vec<u32>,
    /// Outgoing decision paths per state; targets index the next layer.
    pub edges: Vec<Vec<Edge>>,
    index: HashMap<BdmState, usize>,
}

impl Layer {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &BdmState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Edges grouped by successor, in successor-index order.
    pub fn merged_edges(&self, from: usize) -> Vec<(usize, TransitionWeight)> {
        let mut merged: BTreeMap<usize, TransitionWeight> = BTreeMap::new();
        for e in &self.edges[from] {
            merged.entry(e.to).or_default().add(e.weight);
        }
        merged.into_iter().collect()
    }
}

/// Restriction of the infinite model to classes `0..=K0`.
#[derive(Clone, Debug)]
pub struct BoundedModel {
    m: usize,
    k0: u32,
    layers: Vec<Layer>,
}

pub fn build_bounded_model(m: usize, k0: u32) -> Result<BoundedModel> {
    BoundedModel::build(m, k0)
}

impl BoundedModel {
    pub fn build(m: usize, k0: u32) -> Result<Self> {
        Self::from_classes(&compute_classes(m, k0)?)
    }

    pub fn from_classes(classes: &ClassMap) -> Result<Self> {
        let m = classes.m();
        let mut per_layer: Vec<Vec<(u32, BdmState)>> = vec![Vec::new(); m + 1];
        for (s, k) in classes.iter() {
            per_layer[s.layer()].push((k, s.clone()));
        }
        let mut layers: Vec<Layer> = per_layer
            .into_iter()
            .map(|mut v| {
                v.sort_by(|(ka, sa), (kb, sb)| {
                    ka.cmp(kb)
                        .then_with(|| sa.batteries().cmp(sb.batteries()))
                        .then_with(|| sa.drain().cmp(&sb.drain()))
                });
                let index = v.iter().enumerate().map(|(i, (_, s))| (s.clone(), i)).collect();
                Layer {
                    classes: v.iter().map(|(k, _)| *k).collect(),
                    states: v.into_iter().map(|(_, s)| s).collect(),
                    edges: Vec::new(),
                    index,
                }
            })
            .collect();

        for t in 0..=m {
            let next = (t + 1) % (m + 1);
            let mut edges = Vec::with_capacity(layers[t].len());
            for s in &layers[t].states {
                let outcomes = step(s, BudgetPolicy::Bounded(classes))?;
                let mut out = Vec::with_capacity(outcomes.len());
                for o in outcomes {
                    let to = layers[next].index_of(&o.state).ok_or_else(|| Error::UnknownState(o.state.to_string()))?;
                    out.push(Edge { to, weight: o.weight, discharges: o.discharges, inhibitions: o.inhibitions });
                }
                edges.push(out);
            }
            layers[t].edges = edges;
        }
        Ok(Self { m, k0: classes.k0(), layers })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k0(&self) -> u32 {
        self.k0
    }

    /// Number of layers, `M + 1`.
    pub fn period(&self) -> usize {
        self.m + 1
    }

    pub fn layer(&self, t: usize) -> &Layer {
        &self.layers[t]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn total_states(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn class_of(&self, s: &BdmState) -> Option<u32> {
        let layer = self.layers.get(s.layer())?;
        layer.index_of(s).map(|i| layer.classes[i])
    }

    /// Index of the class-0 state of layer `t`.
    pub fn class_zero_index(&self, t: usize) -> usize {
        let s = BdmState::class_zero(self.m, t).expect("M >= 1");
        self.layers[t].index_of(&s).expect("class-0 state is always present")
    }

    /// `|{s in layer t : K(s) = K}|` for `K = 0..=K0`.
    pub fn class_counts(&self, t: usize) -> Vec<usize> {
        let mut counts = vec![0usize; self.k0 as usize + 1];
        for &k in &self.layers[t].classes {
            counts[k as usize] += 1;
        }
        counts
    }

    /// Checks every layer's class sizes against `p_K(M)`.
    pub fn verify_partition_counts(&self) -> std::result::Result<(), String> {
        let expected = partition_table(self.k0 as usize, self.m);
        for t in 0..=self.m {
            for (k, &n) in self.class_counts(t).iter().enumerate() {
                if expected[k].to_usize() != Some(n) {
                    return Err(format!("layer {t}, class {k}: {n} states, p_{k}({}) = {}", self.m, expected[k]));
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> ModelDump {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(t, l)| LayerDump {
                t,
                states: l
                    .states
                    .iter()
                    .zip(&l.classes)
                    .map(|(s, &k)| StateDump { b: s.batteries().to_vec(), d: s.drain(), k })
                    .collect(),
            })
            .collect();
        let mut edges = Vec::new();
        for (t, l) in self.layers.iter().enumerate() {
            let next = (t + 1) % (self.m + 1);
            for (idx, out) in l.edges.iter().enumerate() {
                edges.push(EdgeDump {
                    from: NodeRef { t, idx },
                    outcomes: out
                        .iter()
                        .map(|e| OutcomeDump {
                            to: NodeRef { t: next, idx: e.to },
                            monomials: vec![[e.weight.a as u64, e.weight.b as u64, e.weight.mult]],
                            discharges: e.discharges.iter().map(|d| [d.battery as u64, d.height as u64]).collect(),
                            inhibitions: e.inhibitions,
                        })
                        .collect(),
                });
            }
        }
        ModelDump { m: self.m, k0: self.k0, layers, edges }
    }
}

/// Counts of layer-`t` states by `(class K, drain d)`.
pub fn class_deviation_histogram(model: &BoundedModel, t: usize) -> BTreeMap<(u32, i32), usize> {
    let layer = model.layer(t);
    let mut hist = BTreeMap::new();
    for (s, &k) in layer.states.iter().zip(&layer.classes) {
        *hist.entry((k, s.drain())).or_insert(0) += 1;
    }
    hist
}

/// Serialized form of a [`BoundedModel`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDump {
    pub m: usize,
    pub k0: u32,
    pub layers: Vec<LayerDump>,
    pub edges: Vec<EdgeDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDump {
    pub t: usize,
    pub states: Vec<StateDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDump {
    pub b: Vec<i32>,
    pub d: i32,
    pub k: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRef {
    pub t: usize,
    pub idx: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDump {
    pub from: NodeRef,
    pub outcomes: Vec<OutcomeDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeDump {
    pub to: NodeRef,
    /// `[a, bExp, mult]` triples.
    pub monomials: Vec<[u64; 3]>,
    /// `[battery, height]` pairs.
    pub discharges: Vec<[u64; 2]>,
    pub inhibitions: u32,
}
