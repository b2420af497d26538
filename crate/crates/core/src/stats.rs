//! Complexity statistics read off a model and a distribution over it:
//! mean drain deviation, the deviation law, jump rate and the jump-height
//! profile, plus extraction of integer power-series coefficients in `1/q`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::field::{FieldParam, Probability};
use crate::model::BoundedModel;
use crate::solver::{stationary_exact, ChainDistribution};

/// Every statistic for one `(model, q, distribution)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatReport<P> {
    pub m: usize,
    pub k0: u32,
    pub d_bar_per_layer: Vec<P>,
    pub d_bar: P,
    pub dev_pmf_per_layer: Vec<BTreeMap<i32, P>>,
    pub dev_pmf: BTreeMap<i32, P>,
    pub jump_rate_per_layer: Vec<P>,
    pub jump_rate: P,
    pub jump_heights: BTreeMap<u32, P>,
    /// Smallest and largest drain present in the model; the deviation law
    /// is implicitly zero outside.
    pub drain_support: (i32, i32),
}

fn check_shape<P>(model: &BoundedModel, dist: &ChainDistribution<P>) -> Result<()> {
    if dist.per_layer.len() != model.period()
        || dist.per_layer.iter().zip(model.layers()).any(|(v, l)| v.len() != l.len())
    {
        return Err(Error::DistributionShape("layer sizes differ from the model".into()));
    }
    Ok(())
}

fn mean_over_layers<P: Probability>(values: &[P]) -> P {
    let mut acc = P::zero();
    for v in values {
        acc += v;
    }
    acc / P::from_i64(values.len() as i64)
}

/// `d(M,T) = sum_s pr_T(s) d(s)` and its average over the `M + 1` layers.
pub fn mean_deviation<P: Probability>(model: &BoundedModel, dist: &ChainDistribution<P>) -> Result<(Vec<P>, P)> {
    check_shape(model, dist)?;
    let per_layer: Vec<P> = model
        .layers()
        .iter()
        .zip(&dist.per_layer)
        .map(|(l, x)| {
            let mut acc = P::zero();
            for (s, p) in l.states.iter().zip(x) {
                acc += &p.mul_ref(&P::from_i64(s.drain() as i64));
            }
            acc
        })
        .collect();
    let mean = mean_over_layers(&per_layer);
    Ok((per_layer, mean))
}

/// `pr(d = d0)` keyed by `d0`.
pub type DeviationPmf<P> = BTreeMap<i32, P>;

/// `pr(d = d0)` per layer and averaged with equal layer weights.
pub fn deviation_pmf<P: Probability>(
    model: &BoundedModel,
    dist: &ChainDistribution<P>,
) -> Result<(Vec<DeviationPmf<P>>, DeviationPmf<P>)> {
    check_shape(model, dist)?;
    let per_layer: Vec<BTreeMap<i32, P>> = model
        .layers()
        .iter()
        .zip(&dist.per_layer)
        .map(|(l, x)| {
            let mut pmf: BTreeMap<i32, P> = BTreeMap::new();
            for (s, p) in l.states.iter().zip(x) {
                *pmf.entry(s.drain()).or_insert_with(P::zero) += p;
            }
            pmf
        })
        .collect();
    let layers = P::from_i64(per_layer.len() as i64);
    let mut averaged: BTreeMap<i32, P> = BTreeMap::new();
    for pmf in &per_layer {
        for (d, p) in pmf {
            *averaged.entry(*d).or_insert_with(P::zero) += p;
        }
    }
    let averaged = averaged.into_iter().map(|(d, p)| (d, p / layers.clone())).collect();
    Ok((per_layer, averaged))
}

/// Expected discharges per step from layer `T`, and their mean over `T`.
pub fn jump_rate<P: Probability>(
    model: &BoundedModel,
    q: &FieldParam,
    dist: &ChainDistribution<P>,
) -> Result<(Vec<P>, P)> {
    check_shape(model, dist)?;
    let qv = P::from_field(q);
    let per_layer: Vec<P> = model
        .layers()
        .iter()
        .zip(&dist.per_layer)
        .map(|(l, x)| {
            let mut acc = P::zero();
            for (out, p) in l.edges.iter().zip(x) {
                let mut expected = P::zero();
                for e in out {
                    if !e.discharges.is_empty() {
                        expected += &e.weight.value(&qv).mul_ref(&P::from_i64(e.discharges.len() as i64));
                    }
                }
                acc += &p.mul_ref(&expected);
            }
            acc
        })
        .collect();
    let mean = mean_over_layers(&per_layer);
    Ok((per_layer, mean))
}

/// Average number of jumps of height `h` per step, for every `h` that occurs.
pub fn jump_height_profile<P: Probability>(
    model: &BoundedModel,
    q: &FieldParam,
    dist: &ChainDistribution<P>,
) -> Result<BTreeMap<u32, P>> {
    check_shape(model, dist)?;
    let qv = P::from_field(q);
    let mut profile: BTreeMap<u32, P> = BTreeMap::new();
    for (l, x) in model.layers().iter().zip(&dist.per_layer) {
        for (out, p) in l.edges.iter().zip(x) {
            for e in out {
                if e.discharges.is_empty() {
                    continue;
                }
                let pw = p.mul_ref(&e.weight.value(&qv));
                for d in &e.discharges {
                    *profile.entry(d.height).or_insert_with(P::zero) += &pw;
                }
            }
        }
    }
    let layers = P::from_i64(model.period() as i64);
    Ok(profile.into_iter().map(|(h, v)| (h, v / layers.clone())).collect())
}

pub fn stat_report<P: Probability>(
    model: &BoundedModel,
    q: &FieldParam,
    dist: &ChainDistribution<P>,
) -> Result<StatReport<P>> {
    let (d_bar_per_layer, d_bar) = mean_deviation(model, dist)?;
    let (dev_pmf_per_layer, dev_pmf) = deviation_pmf(model, dist)?;
    let (jump_rate_per_layer, jump_rate) = jump_rate(model, q, dist)?;
    let jump_heights = jump_height_profile(model, q, dist)?;
    let drains = model.layers().iter().flat_map(|l| l.states.iter().map(|s| s.drain()));
    let drain_support = drains.fold((i32::MAX, i32::MIN), |(lo, hi), d| (lo.min(d), hi.max(d)));
    Ok(StatReport {
        m: model.m(),
        k0: model.k0(),
        d_bar_per_layer,
        d_bar,
        dev_pmf_per_layer,
        dev_pmf,
        jump_rate_per_layer,
        jump_rate,
        jump_heights,
        drain_support,
    })
}

/// Statistic whose `1/q` expansion [`series_coefficients`] can extract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesStat {
    /// Mean drain deviation in layer `T`.
    MeanDeviation { layer: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesOptions {
    /// Evaluate at `q = 10^w`.
    pub w: u32,
    /// The model is built with `K0 = depth + margin`.
    pub margin: u32,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { w: 2, margin: 4 }
    }
}

/// First `depth` coefficients `c_1, c_2, ...` of the statistic as a series
/// `sum_k c_k q^{-k}`, read as balanced base-`10^w` digits of its exact
/// value at `q = 10^w` and cross-checked at `q = 10^(w+2)`.
pub fn series_coefficients(stat: SeriesStat, m: usize, depth: usize, opts: SeriesOptions) -> Result<Vec<i64>> {
    let SeriesStat::MeanDeviation { layer } = stat;
    if layer > m {
        return Err(Error::InvalidArgument(format!("layer {layer} exceeds M={m}")));
    }
    let model = BoundedModel::build(m, depth as u32 + opts.margin)?;
    let eval = |w: u32| -> Result<Vec<i64>> {
        let base = num_traits::pow(BigInt::from(10), w as usize);
        let q = FieldParam::new(BigRational::from_integer(base.clone()))?;
        let dist = stationary_exact(&model, &q)?;
        let (per_layer, _) = mean_deviation(&model, &dist)?;
        balanced_digits(&per_layer[layer], &base, depth)
    };
    let low = eval(opts.w)?;
    let high = eval(opts.w + 2)?;
    if let Some(index) = low.iter().zip(&high).position(|(a, b)| a != b) {
        return Err(Error::SeriesUnstable { index: index + 1 });
    }
    Ok(low)
}

/// Balanced base-`base` digits of `x` after the radix point: returns
/// `c_1..c_depth` with `x = sum c_k base^{-k} + O(base^{-depth-1})` and
/// each `c_k` in `(-base/2, base/2]`.
pub fn balanced_digits(x: &BigRational, base: &BigInt, depth: usize) -> Result<Vec<i64>> {
    let scaled = x * BigRational::from_integer(num_traits::pow(base.clone(), depth));
    let mut y = scaled.round().to_integer();
    let half = base / 2;
    let guard = base * 9 / 20;
    let mut digits = vec![0i64; depth];
    for k in (0..depth).rev() {
        let mut r = y.mod_floor(base);
        if r > half {
            r -= base;
        }
        if r.abs() > guard {
            return Err(Error::SeriesBoundary { index: k + 1 });
        }
        y = (&y - &r) / base;
        digits[k] = r.to_i64().expect("digit fits in i64");
    }
    if !y.is_zero() {
        // Non-zero integer part: the value is not a series starting at 1/q.
        return Err(Error::SeriesUnstable { index: 0 });
    }
    Ok(digits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{stationary_exact, stationary_power, PowerOptions};
    use crate::Execution;

    fn q(v: i64) -> FieldParam {
        FieldParam::from_integer(v).unwrap()
    }

    #[test]
    fn balanced_digits_of_known_value() {
        // 1/100 - 2/100^2 + 3/100^3
        let x = BigRational::new(BigInt::from(1_000_000 - 20_000 + 300), BigInt::from(100_000_000));
        let digits = balanced_digits(&x, &BigInt::from(100), 4).unwrap();
        assert_eq!(digits, vec![1, -2, 3, 0]);
    }

    #[test]
    fn boundary_digit_is_rejected() {
        let x = BigRational::new(BigInt::from(48), BigInt::from(100));
        assert!(matches!(balanced_digits(&x, &BigInt::from(100), 1), Err(Error::SeriesBoundary { .. })));
    }

    #[test]
    fn heights_sum_to_jump_rate() {
        let model = BoundedModel::build(3, 12).unwrap();
        let dist = stationary_power(&model, &q(2), PowerOptions::with_tol(1e-13), Execution::Sequential).unwrap();
        let (_, rate) = jump_rate(&model, &q(2), &dist).unwrap();
        let heights = jump_height_profile(&model, &q(2), &dist).unwrap();
        let total: f64 = heights.values().sum();
        assert!((total - rate).abs() < 1e-12);
    }

    #[test]
    fn exact_pmf_sums_to_one() {
        let model = BoundedModel::build(2, 6).unwrap();
        let dist = stationary_exact(&model, &q(3)).unwrap();
        let (_, pmf) = deviation_pmf(&model, &dist).unwrap();
        let total = pmf.values().fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(total, BigRational::from_integer(BigInt::from(1)));
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let model = BoundedModel::build(2, 3).unwrap();
        let other = BoundedModel::build(2, 4).unwrap();
        let dist = stationary_exact(&other, &q(2)).unwrap();
        assert!(mean_deviation(&model, &dist).is_err());
    }
}
