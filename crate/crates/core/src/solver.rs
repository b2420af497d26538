//! Distributions over the periodic chain: finite-horizon evolution and the
//! per-layer stationary distribution, in `f64` or exact rational arithmetic.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::dynamics::typical_degree;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{FieldParam, Probability};
use crate::linalg::{clear_denominators, solve_exact};
use crate::model::BoundedModel;

pub const DEFAULT_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Per-layer probability vectors, indexed by the model's canonical state order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainDistribution<P> {
    pub per_layer: Vec<Vec<P>>,
    /// `||x R - x||_1` on layer 0 for stationary solves.
    pub residual: Option<f64>,
    /// Round trips used by power iteration.
    pub iterations: Option<usize>,
}

impl<P: Probability> ChainDistribution<P> {
    pub fn layer(&self, t: usize) -> &[P] {
        &self.per_layer[t]
    }

    pub fn period(&self) -> usize {
        self.per_layer.len()
    }

    pub fn layer_sums(&self) -> Vec<P> {
        self.per_layer
            .iter()
            .map(|v| {
                let mut s = P::zero();
                for x in v {
                    s += x;
                }
                s
            })
            .collect()
    }

    pub fn to_f64(&self) -> ChainDistribution<f64> {
        ChainDistribution {
            per_layer: self.per_layer.iter().map(|v| v.iter().map(P::as_f64).collect()).collect(),
            residual: self.residual,
            iterations: self.iterations,
        }
    }
}

/// Distribution at one point in time.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSnapshot<P> {
    pub step: usize,
    pub layer: usize,
    pub probs: Vec<P>,
}

/// Layer transition matrices with weights evaluated at a fixed `q`, stored
/// in gather form: `incoming[t][j]` lists `(i, w)` for edges from state `i`
/// of layer `t` to state `j` of layer `t + 1`, sorted by `i`.
#[derive(Clone, Debug)]
pub struct TransitionMatrices<P> {
    incoming: Vec<Vec<Vec<(usize, P)>>>,
    sizes: Vec<usize>,
}

impl<P: Probability> TransitionMatrices<P> {
    pub fn new(model: &BoundedModel, q: &FieldParam) -> Self {
        let qv = P::from_field(q);
        let period = model.period();
        let sizes: Vec<usize> = model.layers().iter().map(|l| l.len()).collect();
        let mut incoming = Vec::with_capacity(period);
        for t in 0..period {
            let next = (t + 1) % period;
            let layer = model.layer(t);
            let mut cols: Vec<Vec<(usize, P)>> = vec![Vec::new(); sizes[next]];
            for i in 0..layer.len() {
                for (j, w) in layer.merged_edges(i) {
                    cols[j].push((i, w.value(&qv)));
                }
            }
            incoming.push(cols);
        }
        Self { incoming, sizes }
    }

    pub fn period(&self) -> usize {
        self.sizes.len()
    }

    /// `x P_t`: maps a layer-`t` vector to layer `t + 1`.
    pub fn apply(&self, t: usize, x: &[P], exec: Execution) -> Vec<P> {
        debug_assert_eq!(x.len(), self.sizes[t]);
        let cols = &self.incoming[t];
        exec.map_range(cols.len(), |j| {
            let mut acc = P::zero();
            for (i, w) in &cols[j] {
                if !x[*i].is_zero() {
                    acc += &x[*i].mul_ref(w);
                }
            }
            acc
        })
    }

    /// Applies all factors once, starting and ending at layer 0.
    pub fn round_trip(&self, x0: &[P], exec: Execution) -> Vec<P> {
        let mut x = x0.to_vec();
        for t in 0..self.period() {
            x = self.apply(t, &x, exec);
        }
        x
    }

    /// Layers `1..=M` from a layer-0 vector.
    pub fn spread(&self, x0: Vec<P>, exec: Execution) -> Vec<Vec<P>> {
        let mut layers = Vec::with_capacity(self.period());
        layers.push(x0);
        for t in 0..self.period() - 1 {
            let next = self.apply(t, &layers[t], exec);
            layers.push(next);
        }
        layers
    }
}

/// Point mass on the origin `(0,...,0;0)_0`.
pub fn origin_distribution<P: Probability>(model: &BoundedModel) -> Vec<P> {
    let mut x = vec![P::zero(); model.layer(0).len()];
    x[model.class_zero_index(0)] = P::one();
    x
}

/// Applies `steps` layer transitions to a layer-0 distribution.
pub fn evolve<P: Probability>(
    model: &BoundedModel,
    q: &FieldParam,
    dist0: &[P],
    steps: usize,
    exec: Execution,
) -> Result<LayerSnapshot<P>> {
    if dist0.len() != model.layer(0).len() {
        return Err(Error::DistributionShape("initial vector must cover layer 0".into()));
    }
    let mats = TransitionMatrices::<P>::new(model, q);
    let mut x = dist0.to_vec();
    for s in 0..steps {
        x = mats.apply(s % model.period(), &x, exec);
    }
    Ok(LayerSnapshot { step: steps, layer: steps % model.period(), probs: x })
}

/// Evolves for `steps >= M` steps and returns, per layer, the distribution
/// at its most recent visit.
pub fn evolve_visits<P: Probability>(
    model: &BoundedModel,
    q: &FieldParam,
    dist0: &[P],
    steps: usize,
    exec: Execution,
) -> Result<ChainDistribution<P>> {
    let period = model.period();
    if steps + 1 < period {
        return Err(Error::InvalidArgument(format!("{steps} steps do not visit all {period} layers")));
    }
    let mats = TransitionMatrices::<P>::new(model, q);
    let mut per_layer: Vec<Vec<P>> = vec![Vec::new(); period];
    let mut x = dist0.to_vec();
    for s in 0..=steps {
        if s + period > steps {
            per_layer[s % period] = x.clone();
        }
        if s < steps {
            x = mats.apply(s % period, &x, exec);
        }
    }
    Ok(ChainDistribution { per_layer, residual: None, iterations: None })
}

/// How power iteration measures the change between round trips.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConvergenceNorm {
    /// `||x' - x||_1` on layer 0.
    #[default]
    L1,
    /// `max_i |x'_i - x_i| / x'_i`; resolves tiny high-class probabilities
    /// to full relative precision. Any zero entry counts as unconverged.
    MaxRelative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub norm: ConvergenceNorm,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOLERANCE, max_iters: DEFAULT_MAX_ITERS, norm: ConvergenceNorm::L1 }
    }
}

impl PowerOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StationaryMethod {
    PowerIteration(PowerOptions),
    ExactNullspace,
}

impl Default for StationaryMethod {
    fn default() -> Self {
        StationaryMethod::PowerIteration(PowerOptions::default())
    }
}

/// Floating-point stationary distribution by power iteration on the
/// round-trip operator, starting from the origin.
pub fn stationary_power(
    model: &BoundedModel,
    q: &FieldParam,
    opts: PowerOptions,
    exec: Execution,
) -> Result<ChainDistribution<f64>> {
    let mats = TransitionMatrices::<f64>::new(model, q);
    let mut x = origin_distribution::<f64>(model);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let mut y = mats.round_trip(&x, exec);
        let total: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= total);
        change = match opts.norm {
            ConvergenceNorm::L1 => l1_distance(&x, &y),
            ConvergenceNorm::MaxRelative => max_relative_change(&x, &y),
        };
        x = y;
        iterations += 1;
        if change < opts.tol {
            let residual = l1_distance(&x, &mats.round_trip(&x, exec));
            let per_layer = mats.spread(x, exec);
            return Ok(ChainDistribution { per_layer, residual: Some(residual), iterations: Some(iterations) });
        }
    }
    Err(Error::NotConverged { iterations, residual: change })
}

fn max_relative_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter().zip(new).map(|(a, b)| if *b > 0.0 { (a - b).abs() / b } else { f64::INFINITY }).fold(0.0, f64::max)
}

/// Exact stationary distribution: solves `x (R - I) = 0`, `sum(x) = 1` on
/// layer 0 by fraction-free elimination, then spreads to the other layers.
pub fn stationary_exact(model: &BoundedModel, q: &FieldParam) -> Result<ChainDistribution<BigRational>> {
    let mats = TransitionMatrices::<BigRational>::new(model, q);
    let n = model.layer(0).len();
    let exec = Execution::Sequential;

    // Row i of R is e_i pushed through every factor.
    let mut r: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![BigRational::zero(); n];
        e[i] = BigRational::one();
        r.push(mats.round_trip(&e, exec));
    }

    // Equation j: sum_i x_i (R_ij - delta_ij) = 0; the last one is replaced
    // by the normalization (the columns of R - I sum to zero).
    let mut a = Vec::with_capacity(n);
    let mut b = vec![BigInt::zero(); n];
    for j in 0..n {
        if j + 1 == n {
            a.push(vec![BigInt::one(); n]);
            b[j] = BigInt::one();
            continue;
        }
        let row: Vec<BigRational> =
            (0..n).map(|i| if i == j { &r[i][j] - BigRational::one() } else { r[i][j].clone() }).collect();
        a.push(clear_denominators(&row));
    }
    let x = solve_exact(a, b).ok_or(Error::NullspaceDimension)?;

    let y = mats.round_trip(&x, exec);
    let residual: f64 = x.iter().zip(&y).map(|(u, v)| (u - v).as_f64().abs()).sum();
    if x.iter().zip(&y).any(|(u, v)| u != v) {
        return Err(Error::NullspaceDimension);
    }
    Ok(ChainDistribution { per_layer: mats.spread(x, exec), residual: Some(residual), iterations: None })
}

pub fn stationary(
    model: &BoundedModel,
    q: &FieldParam,
    method: StationaryMethod,
    exec: Execution,
) -> Result<ChainDistribution<f64>> {
    match method {
        StationaryMethod::PowerIteration(opts) => stationary_power(model, q, opts, exec),
        StationaryMethod::ExactNullspace => Ok(stationary_exact(model, q)?.to_f64()),
    }
}

/// `pr(s) = q^{-K(s)} / sum_{s' in layer} q^{-K(s')}` per layer.
pub fn predicted_stationary<P: Probability>(model: &BoundedModel, q: &FieldParam) -> ChainDistribution<P> {
    let qv = P::from_field(q);
    let inv_pows: Vec<P> = (0..=model.k0()).map(|k| P::one() / qv.powi(k)).collect();
    let per_layer = model
        .layers()
        .iter()
        .map(|l| {
            let raw: Vec<P> = l.classes.iter().map(|&k| inv_pows[k as usize].clone()).collect();
            let mut norm = P::zero();
            for v in &raw {
                norm += v;
            }
            raw.into_iter().map(|v| v / norm.clone()).collect()
        })
        .collect();
    ChainDistribution { per_layer, residual: None, iterations: None }
}

/// Truncated `P(M, q)`: `sum_K |class K| q^{-K}` for layer `t`.
pub fn layer_normalizer<P: Probability>(model: &BoundedModel, q: &FieldParam, t: usize) -> P {
    let qv = P::from_field(q);
    let mut acc = P::zero();
    for (k, &count) in model.class_counts(t).iter().enumerate() {
        acc += &(P::from_i64(count as i64) / qv.powi(k as u32));
    }
    acc
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Quantities of the chain after `n` steps from the origin, including the
/// joint law of state and number of discharges so far.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonAnalysis<P> {
    pub steps: usize,
    pub layer: usize,
    /// Law of `L_n = d + ceil(nM/(M+1))`.
    pub complexity_pmf: BTreeMap<i64, P>,
    /// Law of the number of jumps (discharges) in the first `n` steps.
    pub jump_count_pmf: BTreeMap<u32, P>,
    /// Expected number of jumps of each height in the first `n` steps.
    pub height_histogram: BTreeMap<u32, P>,
}

pub fn horizon_analysis<P: Probability>(model: &BoundedModel, q: &FieldParam, steps: usize) -> HorizonAnalysis<P> {
    let qv = P::from_field(q);
    let period = model.period();
    // (state, jumps so far) -> probability, current layer implied by the step.
    let mut current: BTreeMap<(usize, u32), P> = BTreeMap::new();
    current.insert((model.class_zero_index(0), 0), P::one());
    let mut heights: BTreeMap<u32, P> = BTreeMap::new();
    let weights: Vec<Vec<Vec<P>>> = model
        .layers()
        .iter()
        .map(|l| l.edges.iter().map(|out| out.iter().map(|e| e.weight.value(&qv)).collect()).collect())
        .collect();

    for s in 0..steps {
        let t = s % period;
        let layer = model.layer(t);
        let mut next: BTreeMap<(usize, u32), P> = BTreeMap::new();
        for ((i, jumps), p) in &current {
            for (e, w) in layer.edges[*i].iter().zip(&weights[t][*i]) {
                let pw = p.mul_ref(w);
                for d in &e.discharges {
                    *heights.entry(d.height).or_insert_with(P::zero) += &pw;
                }
                let key = (e.to, jumps + e.discharges.len() as u32);
                *next.entry(key).or_insert_with(P::zero) += &pw;
            }
        }
        current = next;
    }

    let layer = steps % period;
    let offset = typical_degree(steps, model.m());
    let mut complexity_pmf = BTreeMap::new();
    let mut jump_count_pmf = BTreeMap::new();
    for ((i, jumps), p) in current {
        let l = model.layer(layer).states[i].drain() as i64 + offset;
        *complexity_pmf.entry(l).or_insert_with(P::zero) += &p;
        *jump_count_pmf.entry(jumps).or_insert_with(P::zero) += &p;
    }
    HorizonAnalysis { steps, layer, complexity_pmf, jump_count_pmf, height_histogram: heights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn q(v: i64) -> FieldParam {
        FieldParam::from_integer(v).unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let model = BoundedModel::build(2, 3).unwrap();
        let x0 = origin_distribution::<BigRational>(&model);
        let snap = evolve(&model, &q(2), &x0, 0, Execution::Sequential).unwrap();
        assert_eq!(snap.probs, x0);
        assert_eq!(snap.layer, 0);
    }

    #[test]
    fn m1_two_steps_by_hand() {
        // Step 1: (0;0)_0 -> (0;-1)_1, battery eligible: (-1;0)_1 w.p. 1/2, (0;-1)_1 w.p. 1/2.
        // Step 2 from (-1;0)_1: -> (0;0)_0, not eligible: (0;0)_0 w.p. 1.
        // Step 2 from (0;-1)_1: -> (1;-1)_0, eligible: (-1;1)_0 w.p. 1/2, (1;-1)_0 w.p. 1/2.
        let model = BoundedModel::build(1, 4).unwrap();
        let x0 = origin_distribution::<BigRational>(&model);
        let snap = evolve(&model, &q(2), &x0, 2, Execution::Sequential).unwrap();
        let layer0 = model.layer(0);
        let mut got = BTreeMap::new();
        for (s, p) in layer0.states.iter().zip(&snap.probs) {
            if !p.is_zero() {
                got.insert((s.batteries()[0], s.drain()), p.clone());
            }
        }
        let expected: BTreeMap<(i32, i32), BigRational> =
            [((0, 0), rat(1, 2)), ((-1, 1), rat(1, 4)), ((1, -1), rat(1, 4))].into_iter().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn class_zero_cycle_weight() {
        // The class-0 cycle of M=3 discharges on every step; its probability
        // after one round trip is the product of its edge weights.
        let model = BoundedModel::build(3, 6).unwrap();
        let x0 = origin_distribution::<BigRational>(&model);
        let snap = evolve(&model, &q(2), &x0, 4, Execution::Sequential).unwrap();
        let mut product = BigRational::one();
        for t in 0..4 {
            let i = model.class_zero_index(t);
            let j = model.class_zero_index((t + 1) % 4);
            let merged = model.layer(t).merged_edges(i);
            let w = merged.iter().find(|(to, _)| *to == j).unwrap().1.value(&rat(2, 1));
            product *= w;
        }
        // (1/2) * (1/2) * (1/2) * 1
        assert_eq!(product, rat(1, 8));
        assert!(snap.probs[model.class_zero_index(0)] >= product);
    }

    #[test]
    fn predicted_normalizer_m3_k0_2() {
        let model = BoundedModel::build(3, 2).unwrap();
        for t in 0..4 {
            assert_eq!(layer_normalizer::<BigRational>(&model, &q(2), t), rat(2, 1));
        }
        let pred = predicted_stationary::<BigRational>(&model, &q(2));
        let l0 = model.layer(0);
        let zero = model.class_zero_index(0);
        assert!(pred.layer(0).iter().all(|p| p <= &pred.layer(0)[zero]));
        let c1 = l0.classes.iter().position(|&k| k == 1).unwrap();
        let c2 = l0.classes.iter().position(|&k| k == 2).unwrap();
        assert_eq!(&pred.layer(0)[c1] / &pred.layer(0)[c2], rat(2, 1));
    }

    #[test]
    fn power_and_exact_agree() {
        let model = BoundedModel::build(2, 6).unwrap();
        let tol = 1e-13;
        let p = stationary_power(&model, &q(3), PowerOptions::with_tol(tol), Execution::Sequential).unwrap();
        let e = stationary_exact(&model, &q(3)).unwrap();
        assert_eq!(e.residual, Some(0.0));
        for t in 0..3 {
            for (a, b) in p.layer(t).iter().zip(e.layer(t)) {
                assert!((a - b.as_f64()).abs() <= 10.0 * tol);
            }
        }
        for s in e.layer_sums() {
            assert_eq!(s, BigRational::one());
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let model = BoundedModel::build(2, 6).unwrap();
        let opts = PowerOptions { tol: 1e-30, max_iters: 3, norm: ConvergenceNorm::L1 };
        let err = stationary_power(&model, &q(2), opts, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 3, .. }));
    }

    #[test]
    fn stationary_layers_map_onto_each_other() {
        let model = BoundedModel::build(3, 8).unwrap();
        let dist = stationary_exact(&model, &q(2)).unwrap();
        let mats = TransitionMatrices::<BigRational>::new(&model, &q(2));
        for t in 0..4 {
            let next = mats.apply(t, dist.layer(t), Execution::Sequential);
            assert_eq!(next, dist.layer((t + 1) % 4));
        }
    }

    #[test]
    fn parallel_apply_is_bitwise_identical() {
        let model = BoundedModel::build(3, 12).unwrap();
        let a = stationary_power(&model, &q(2), PowerOptions::with_tol(1e-12), Execution::Sequential).unwrap();
        let b = stationary_power(&model, &q(2), PowerOptions::with_tol(1e-12), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_masses_sum_to_one() {
        let model = BoundedModel::build(2, 6).unwrap();
        let h = horizon_analysis::<BigRational>(&model, &q(3), 3);
        let total = h.complexity_pmf.values().fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(total, BigRational::one());
        let total = h.jump_count_pmf.values().fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(total, BigRational::one());
    }
}
