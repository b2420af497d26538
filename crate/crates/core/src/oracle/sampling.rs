//! Exhaustive and sampled complexity distributions. Both aggregate exact
//! integer counters, so results do not depend on how work is split.
//!
//! Monte Carlo inputs come from ChaCha8 keyed by `(seed, sample index)`:
//! sample `i` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `i` and
//! draws symbols in column-major order. Over `F_2`, symbol `k` is bit
//! `k mod 64` of the `(k / 64)`-th `u64` output; otherwise each symbol is
//! one uniform draw from `0..p`.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{complexity_profile, Engine, MultiSequence, PrimeField, Synthesizer};
use crate::dynamics::typical_degree;
use crate::error::{Error, Result};
use crate::exec::Execution;

pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

/// Counts over all `p^{MN}` inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExhaustiveDistribution {
    pub p: u32,
    pub m: usize,
    pub n: usize,
    pub total: u64,
    /// Inputs with `L_N = l`.
    pub complexity_counts: BTreeMap<usize, u64>,
    /// Inputs with exactly `j` jumps.
    pub jump_count_counts: BTreeMap<usize, u64>,
    /// Jumps of height `h`, summed over all inputs.
    pub height_counts: BTreeMap<u32, u64>,
    /// Inputs with final deviation `d_N = d`.
    pub deviation_counts: BTreeMap<i64, u64>,
}

impl ExhaustiveDistribution {
    fn empty(p: u32, m: usize, n: usize) -> Self {
        Self {
            p,
            m,
            n,
            total: 0,
            complexity_counts: BTreeMap::new(),
            jump_count_counts: BTreeMap::new(),
            height_counts: BTreeMap::new(),
            deviation_counts: BTreeMap::new(),
        }
    }

    fn merge(&mut self, other: Self) {
        self.total += other.total;
        merge_counts(&mut self.complexity_counts, other.complexity_counts);
        merge_counts(&mut self.jump_count_counts, other.jump_count_counts);
        merge_counts(&mut self.height_counts, other.height_counts);
        merge_counts(&mut self.deviation_counts, other.deviation_counts);
    }
}

fn merge_counts<K: Ord>(into: &mut BTreeMap<K, u64>, from: BTreeMap<K, u64>) {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
}

/// Exhaustive distribution using the linear-system definition.
pub fn exhaustive_distribution(
    field: PrimeField,
    m: usize,
    n: usize,
    exec: Execution,
) -> Result<ExhaustiveDistribution> {
    exhaustive_distribution_with(field, m, n, Engine::LinearSystem, DEFAULT_ENUMERATION_CAP, exec)
}

pub fn exhaustive_distribution_with(
    field: PrimeField,
    m: usize,
    n: usize,
    engine: Engine,
    cap: u128,
    exec: Execution,
) -> Result<ExhaustiveDistribution> {
    if m == 0 {
        return Err(Error::ZeroSequences);
    }
    let p = field.p() as u128;
    let count = (0..m * n).try_fold(1u128, |acc, _| acc.checked_mul(p).filter(|&c| c <= cap));
    let Some(count) = count else {
        let shown = (p as f64).powi((m * n) as i32);
        return Err(Error::EnumerationCap { count: shown.min(u128::MAX as f64) as u128, cap });
    };
    let count = count as u64;
    let parts = exec.map_blocks(count, 4096, |range| {
        let mut acc = ExhaustiveDistribution::empty(field.p(), m, n);
        let mut data = vec![0u16; m * n];
        for index in range {
            let mut x = index;
            for s in data.iter_mut() {
                *s = (x % field.p() as u64) as u16;
                x /= field.p() as u64;
            }
            let seq = MultiSequence::new(m, n, data.clone()).expect("shape is valid");
            let profile = complexity_profile(field, &seq, engine).expect("symbols are in range");
            acc.total += 1;
            *acc.complexity_counts.entry(profile.final_complexity()).or_insert(0) += 1;
            *acc.jump_count_counts.entry(profile.jump_count).or_insert(0) += 1;
            merge_counts(&mut acc.height_counts, profile.height_histogram);
            let d = profile.deviations.last().copied().unwrap_or(0);
            *acc.deviation_counts.entry(d).or_insert(0) += 1;
        }
        acc
    });
    let mut total = ExhaustiveDistribution::empty(field.p(), m, n);
    for part in parts {
        total.merge(part);
    }
    Ok(total)
}

/// A sample mean with its standard error (`None` for a single sample).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: Option<f64>,
}

impl Estimate {
    /// From per-sample counts `c_i` of a quantity `c_i / denom`, given
    /// `sum c_i` and `sum c_i^2`.
    fn from_sums(samples: u64, sum: u128, sum_sq: u128, denom: f64) -> Self {
        let s = samples as f64;
        let mean = sum as f64 / s / denom;
        let se = (samples > 1).then(|| {
            let spread = (samples as u128 * sum_sq - sum * sum) as f64;
            (spread / (s * (s - 1.0)) / s).sqrt() / denom
        });
        Self { mean, se }
    }

    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> Option<f64> {
        self.se.map(|se| (self.mean - target).abs() / se)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub p: u32,
    pub m: usize,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// Jumps per column over the whole run.
    pub jump_rate: Estimate,
    /// Jumps of each height per column.
    pub height_rates: BTreeMap<u32, Estimate>,
    /// First and last column (1-based, inclusive) of the deviation window.
    pub deviation_window: (usize, usize),
    /// Fraction of window columns with `d_n = d`.
    pub deviation_pmf: BTreeMap<i64, Estimate>,
}

#[derive(Default)]
struct Sums {
    jumps: (u128, u128),
    heights: BTreeMap<u32, (u128, u128)>,
    deviations: BTreeMap<i64, (u128, u128)>,
}

impl Sums {
    fn add<K: Ord + Copy>(map: &mut BTreeMap<K, (u128, u128)>, counts: &BTreeMap<K, u64>) {
        for (k, &c) in counts {
            let e = map.entry(*k).or_insert((0, 0));
            e.0 += c as u128;
            e.1 += (c as u128) * (c as u128);
        }
    }

    fn merge(&mut self, other: Sums) {
        self.jumps.0 += other.jumps.0;
        self.jumps.1 += other.jumps.1;
        merge_sums(&mut self.heights, other.heights);
        merge_sums(&mut self.deviations, other.deviations);
    }
}

fn merge_sums<K: Ord>(into: &mut BTreeMap<K, (u128, u128)>, from: BTreeMap<K, (u128, u128)>) {
    for (k, (a, b)) in from {
        let e = into.entry(k).or_insert((0, 0));
        e.0 += a;
        e.1 += b;
    }
}

/// Column-major symbol source for sample `index`.
struct SymbolStream {
    rng: ChaCha8Rng,
    p: u32,
    bits: u64,
    left: u32,
}

impl SymbolStream {
    fn new(p: u32, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng, p, bits: 0, left: 0 }
    }

    #[inline]
    fn next(&mut self) -> u16 {
        if self.p == 2 {
            if self.left == 0 {
                self.bits = self.rng.next_u64();
                self.left = 64;
            }
            let s = (self.bits & 1) as u16;
            self.bits >>= 1;
            self.left -= 1;
            s
        } else {
            self.rng.random_range(0..self.p) as u16
        }
    }
}

/// The input used as Monte Carlo sample `index`.
pub fn sample_multisequence(field: PrimeField, m: usize, n: usize, seed: u64, index: u64) -> Result<MultiSequence> {
    let mut stream = SymbolStream::new(field.p(), seed, index);
    let mut data = vec![0u16; m * n];
    for i in 0..n {
        for t in 0..m {
            data[t * n + i] = stream.next();
        }
    }
    MultiSequence::new(m, n, data)
}

pub fn monte_carlo(
    field: PrimeField,
    m: usize,
    n: usize,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloReport> {
    monte_carlo_with(field, m, n, samples, seed, Engine::ShiftRegister, exec)
}

pub fn monte_carlo_with(
    field: PrimeField,
    m: usize,
    n: usize,
    samples: u64,
    seed: u64,
    engine: Engine,
    exec: Execution,
) -> Result<MonteCarloReport> {
    if m == 0 {
        return Err(Error::ZeroSequences);
    }
    if samples == 0 || n == 0 {
        return Err(Error::InvalidArgument("monte carlo needs at least one sample and one column".into()));
    }
    let window_len = (n / 10).max(1);
    let window = (n - window_len + 1, n);

    let parts = exec.map_blocks(samples, 16, |range| {
        let mut sums = Sums::default();
        let mut heights: BTreeMap<u32, u64> = BTreeMap::new();
        let mut devs: BTreeMap<i64, u64> = BTreeMap::new();
        for index in range {
            heights.clear();
            devs.clear();
            let mut jumps = 0u64;
            let mut record = |col: usize, l: usize, h: u32, last_row: bool| {
                if h > 0 {
                    jumps += 1;
                    *heights.entry(h).or_insert(0) += 1;
                }
                if last_row && col >= window.0 {
                    *devs.entry(l as i64 - typical_degree(col, m)).or_insert(0) += 1;
                }
            };
            match engine {
                Engine::ShiftRegister => {
                    let mut stream = SymbolStream::new(field.p(), seed, index);
                    let mut s = Synthesizer::new(field, m, n);
                    for col in 1..=n {
                        for t in 1..=m {
                            let h = s.push(stream.next());
                            record(col, s.complexity(), h, t == m);
                        }
                    }
                }
                Engine::LinearSystem => {
                    let seq = sample_multisequence(field, m, n, seed, index).expect("valid shape");
                    let profile = complexity_profile(field, &seq, engine).expect("symbols in range");
                    for r in &profile.records {
                        record(r.n, r.l, r.jump_height, r.t == m);
                    }
                }
            }
            sums.jumps.0 += jumps as u128;
            sums.jumps.1 += (jumps as u128) * (jumps as u128);
            Sums::add(&mut sums.heights, &heights);
            Sums::add(&mut sums.deviations, &devs);
        }
        sums
    });
    let mut sums = Sums::default();
    for part in parts {
        sums.merge(part);
    }

    let cols = n as f64;
    let wl = window_len as f64;
    Ok(MonteCarloReport {
        p: field.p(),
        m,
        n,
        samples,
        seed,
        jump_rate: Estimate::from_sums(samples, sums.jumps.0, sums.jumps.1, cols),
        height_rates: sums
            .heights
            .into_iter()
            .map(|(h, (a, b))| (h, Estimate::from_sums(samples, a, b, cols)))
            .collect(),
        deviation_window: window,
        deviation_pmf: sums
            .deviations
            .into_iter()
            .map(|(d, (a, b))| (d, Estimate::from_sums(samples, a, b, wl)))
            .collect(),
    })
}
