//! States and single-step dynamics of the battery-discharge model.
//!
//! A state holds `M` battery charges `b`, a drain charge `d` and the main
//! cycle (layer) `T in 0..=M`. One step is the update phase (decrement the
//! drain, or increment every battery when wrapping from `T = M` to `T = 0`)
//! followed by `M` subcycles. In subcycle `t` the battery `b_t` is eligible
//! when `b_t > d`; an eligible battery either discharges (swaps with the
//! drain, probability `(q-1)/q`) or is inhibited (probability `1/q`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Probability;
use crate::model::ClassMap;

/// Canonical state `(b_1, ..., b_M; d)_T` with `T + d + sum(b) = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BdmState {
    batteries: Vec<i32>,
    drain: i32,
    layer: usize,
}

impl BdmState {
    pub fn new(batteries: Vec<i32>, drain: i32, layer: usize) -> Result<Self> {
        let m = batteries.len();
        if m == 0 {
            return Err(Error::ZeroSequences);
        }
        if layer > m {
            return Err(Error::InvalidState(format!("layer {layer} exceeds M={m}")));
        }
        let state = Self { batteries, drain, layer };
        if state.invariant_sum() != 0 {
            return Err(Error::InvalidState(format!("{state} violates T + d + sum(b) = 0")));
        }
        Ok(state)
    }

    /// Builds a layer-`T` state whose drain is implied by the invariant.
    pub fn from_batteries(batteries: Vec<i32>, layer: usize) -> Result<Self> {
        let drain = -(layer as i32) - batteries.iter().sum::<i32>();
        Self::new(batteries, drain, layer)
    }

    /// The start state `(0, ..., 0; 0)_0`.
    pub fn origin(m: usize) -> Result<Self> {
        Self::new(vec![0; m], 0, 0)
    }

    /// The unique class-0 state of layer `T`: `b_i = -1` for `i <= T`, else 0, `d = 0`.
    pub fn class_zero(m: usize, layer: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroSequences);
        }
        let batteries = (1..=m).map(|i| if i <= layer { -1 } else { 0 }).collect();
        Self::new(batteries, 0, layer)
    }

    pub fn m(&self) -> usize {
        self.batteries.len()
    }

    pub fn batteries(&self) -> &[i32] {
        &self.batteries
    }

    pub fn drain(&self) -> i32 {
        self.drain
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    fn invariant_sum(&self) -> i64 {
        self.layer as i64 + self.drain as i64 + self.batteries.iter().map(|&b| b as i64).sum::<i64>()
    }
}

impl fmt::Display for BdmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.batteries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ";{})_{}", self.drain, self.layer)
    }
}

/// `mult * (q-1)^a / q^b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProbMonomial {
    pub a: u32,
    pub b: u32,
    pub mult: u64,
}

impl ProbMonomial {
    pub const ONE: ProbMonomial = ProbMonomial { a: 0, b: 0, mult: 1 };

    pub fn new(a: u32, b: u32, mult: u64) -> Self {
        debug_assert!(a <= b && mult > 0);
        Self { a, b, mult }
    }

    pub fn value<P: Probability>(&self, q: &P) -> P {
        let qm1 = q.clone() - P::one();
        let num = qm1.powi(self.a).mul_ref(&P::from_i64(self.mult as i64));
        num / q.powi(self.b)
    }

    fn times_discharge(self) -> Self {
        Self { a: self.a + 1, b: self.b + 1, ..self }
    }

    fn times_inhibition(self) -> Self {
        Self { b: self.b + 1, ..self }
    }
}

impl fmt::Display for ProbMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mult != 1 {
            write!(f, "{}*", self.mult)?;
        }
        match self.a {
            0 => write!(f, "1")?,
            1 => write!(f, "(q-1)")?,
            a => write!(f, "(q-1)^{a}")?,
        }
        match self.b {
            0 => Ok(()),
            1 => write!(f, "/q"),
            b => write!(f, "/q^{b}"),
        }
    }
}

/// Formal sum of monomials; the exact transition probability of a merged edge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionWeight {
    monomials: Vec<ProbMonomial>,
}

impl TransitionWeight {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a monomial, combining it with an equal-exponent term if present.
    pub fn add(&mut self, m: ProbMonomial) {
        match self.monomials.iter_mut().find(|x| x.a == m.a && x.b == m.b) {
            Some(x) => x.mult += m.mult,
            None => {
                self.monomials.push(m);
                self.monomials.sort();
            }
        }
    }

    pub fn monomials(&self) -> &[ProbMonomial] {
        &self.monomials
    }

    pub fn value<P: Probability>(&self, q: &P) -> P {
        let mut acc = P::zero();
        for m in &self.monomials {
            acc += &m.value(q);
        }
        acc
    }
}

impl From<ProbMonomial> for TransitionWeight {
    fn from(m: ProbMonomial) -> Self {
        Self { monomials: vec![m] }
    }
}

impl fmt::Display for TransitionWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.monomials.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

/// What happened at one battery during a subcycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Discharge,
    Inhibit,
    /// `b_t <= d`: the battery is not eligible.
    Idle,
}

impl Action {
    pub fn symbol(self) -> char {
        match self {
            Action::Discharge => 'D',
            Action::Inhibit => 'I',
            Action::Idle => '-',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Discharge {
    /// 1-based battery index.
    pub battery: usize,
    /// `b_t - d` at the moment of the swap; always positive.
    pub height: u32,
}

/// One decision path through the `M` subcycles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubcycleOutcome {
    pub state: BdmState,
    pub weight: ProbMonomial,
    pub path: Vec<Action>,
    pub discharges: Vec<Discharge>,
    pub inhibitions: u32,
}

impl SubcycleOutcome {
    pub fn path_string(&self) -> String {
        self.path.iter().map(|a| a.symbol()).collect()
    }
}

/// Whether inhibitions are free, or restricted to paths that stay inside a
/// bounded model's class map.
#[derive(Clone, Copy, Debug)]
pub enum BudgetPolicy<'a> {
    Unbounded,
    Bounded(&'a ClassMap),
}

/// `ceil(n M / (M + 1))`, the typical joint linear complexity after `n`
/// columns. The drain is the deviation of the actual complexity from it.
pub fn typical_degree(n: usize, m: usize) -> i64 {
    (n * m).div_ceil(m + 1) as i64
}

/// Decrement the drain (`T < M`) or increment all batteries (`T = M`).
pub fn update_phase(s: &BdmState) -> BdmState {
    let m = s.m();
    let next = if s.layer < m {
        BdmState { batteries: s.batteries.clone(), drain: s.drain - 1, layer: s.layer + 1 }
    } else {
        BdmState { batteries: s.batteries.iter().map(|b| b + 1).collect(), drain: s.drain, layer: 0 }
    };
    assert_eq!(next.invariant_sum(), 0, "update phase broke the layer invariant");
    next
}

/// Enumerates every decision path of the `M` subcycles from a post-update
/// state. Outcomes are not merged; each carries its own weight and the
/// heights of its discharges.
pub fn subcycle_phase(s: &BdmState, policy: BudgetPolicy<'_>) -> Result<Vec<SubcycleOutcome>> {
    if let BudgetPolicy::Bounded(map) = policy {
        if map.m() != s.m() {
            return Err(Error::ClassMapMismatch { expected: map.m(), found: s.m() });
        }
    }
    let mut walker = Walker {
        policy,
        layer: s.layer,
        batteries: s.batteries.clone(),
        drain: s.drain,
        path: Vec::with_capacity(s.m()),
        discharges: Vec::new(),
    };
    Ok(walker.explore(0))
}

/// One full transition: [`update_phase`] followed by [`subcycle_phase`].
pub fn step(s: &BdmState, policy: BudgetPolicy<'_>) -> Result<Vec<SubcycleOutcome>> {
    subcycle_phase(&update_phase(s), policy)
}

struct Walker<'a> {
    policy: BudgetPolicy<'a>,
    layer: usize,
    batteries: Vec<i32>,
    drain: i32,
    path: Vec<Action>,
    discharges: Vec<Discharge>,
}

impl Walker<'_> {
    fn explore(&mut self, t: usize) -> Vec<SubcycleOutcome> {
        if t == self.batteries.len() {
            let state = BdmState { batteries: self.batteries.clone(), drain: self.drain, layer: self.layer };
            if let BudgetPolicy::Bounded(map) = self.policy {
                if !map.contains(&state) {
                    return Vec::new();
                }
            }
            let inhibitions = self.path.iter().filter(|&&a| a == Action::Inhibit).count() as u32;
            return vec![SubcycleOutcome {
                state,
                weight: ProbMonomial::ONE,
                path: self.path.clone(),
                discharges: self.discharges.clone(),
                inhibitions,
            }];
        }

        let bt = self.batteries[t];
        if bt <= self.drain {
            self.path.push(Action::Idle);
            let out = self.explore(t + 1);
            self.path.pop();
            return out;
        }

        self.path.push(Action::Discharge);
        self.discharges.push(Discharge { battery: t + 1, height: (bt - self.drain) as u32 });
        self.batteries[t] = self.drain;
        self.drain = bt;
        let mut discharged = self.explore(t + 1);
        self.drain = self.batteries[t];
        self.batteries[t] = bt;
        self.discharges.pop();
        self.path.pop();

        self.path.push(Action::Inhibit);
        let mut inhibited = self.explore(t + 1);
        self.path.pop();

        // A lone surviving branch is forced and carries factor 1.
        if !discharged.is_empty() && !inhibited.is_empty() {
            for o in &mut discharged {
                o.weight = o.weight.times_discharge();
            }
            for o in &mut inhibited {
                o.weight = o.weight.times_inhibition();
            }
        }
        discharged.append(&mut inhibited);
        discharged
    }
}
