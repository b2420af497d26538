//! Ground truth for the battery model: joint linear complexity of
//! multisequences over prime fields, its profile under column-major
//! reading, and exhaustive / Monte Carlo distributions.

mod field;
pub mod linear;
mod sampling;
mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::dynamics::{typical_degree, update_phase, BdmState};
use crate::error::{Error, Result};

pub use field::PrimeField;
pub use linear::{joint_linear_complexity, joint_linear_complexity_from};
pub use sampling::{
    exhaustive_distribution, exhaustive_distribution_with, monte_carlo, monte_carlo_with, sample_multisequence,
    Estimate, ExhaustiveDistribution, MonteCarloReport, DEFAULT_ENUMERATION_CAP,
};
pub use synth::Synthesizer;

/// `M` rows by `N` columns of field symbols, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSequence {
    m: usize,
    n: usize,
    data: Vec<u16>,
}

impl MultiSequence {
    pub fn new(m: usize, n: usize, data: Vec<u16>) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroSequences);
        }
        if data.len() != m * n {
            return Err(Error::InvalidArgument(format!("{} symbols for a {m}x{n} multisequence", data.len())));
        }
        Ok(Self { m, n, data })
    }

    pub fn zeros(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, vec![0; m * n])
    }

    pub fn from_rows(rows: Vec<Vec<u16>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("rows have different lengths".into()));
        }
        Self::new(m, n, rows.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row `t` (0-based).
    pub fn row(&self, t: usize) -> &[u16] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    /// `a_{t,i}` with 1-based `t` and `i`.
    pub fn get(&self, t: usize, i: usize) -> u16 {
        self.data[(t - 1) * self.n + i - 1]
    }

    pub fn check_field(&self, field: PrimeField) -> Result<()> {
        self.data.iter().try_for_each(|&s| field.check_symbol(s as u32))
    }

    /// Text form: header `q M N`, then one line of space-separated symbols per row.
    pub fn to_text(&self, field: PrimeField) -> String {
        let mut out = format!("{} {} {}\n", field.p(), self.m, self.n);
        for t in 0..self.m {
            let row: Vec<String> = self.row(t).iter().map(u16::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<(PrimeField, Self)> {
        // Rows may be blank when N = 0, so only leading blank lines are skipped.
        let mut lines = text.lines().map(str::trim).skip_while(|l| l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("missing header line \"q M N\"".into()))?;
        let fields: Vec<u32> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad header token {s:?}"))))
            .collect::<Result<_>>()?;
        let [q, m, n] = fields[..] else {
            return Err(Error::Parse(format!("header must be \"q M N\", got {header:?}")));
        };
        let field = PrimeField::new(q)?;
        let (m, n) = (m as usize, n as usize);
        let mut data = Vec::with_capacity(m * n);
        for t in 0..m {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("expected {m} rows, found {t}")))?;
            let row: Vec<u16> = line
                .split_whitespace()
                .map(|s| {
                    let v: u32 = s.parse().map_err(|_| Error::Parse(format!("bad symbol {s:?} in row {}", t + 1)))?;
                    field.check_symbol(v)?;
                    Ok(v as u16)
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!("row {} has {} symbols, expected {n}", t + 1, row.len())));
            }
            data.extend(row);
        }
        if lines.any(|l| !l.is_empty()) {
            return Err(Error::Parse(format!("more than {m} rows")));
        }
        Ok((field, Self::new(m, n, data)?))
    }
}

/// How a profile computes the complexity after each symbol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// Solve the recurrence system from scratch at every substep.
    #[default]
    LinearSystem,
    /// Incremental [`Synthesizer`].
    ShiftRegister,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubstepRecord {
    pub n: usize,
    pub t: usize,
    pub l: usize,
    pub jump_height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplexityProfile {
    pub m: usize,
    pub n: usize,
    pub records: Vec<SubstepRecord>,
    /// `d_n = L_n - ceil(nM/(M+1))` for `n = 1..=N`.
    pub deviations: Vec<i64>,
    pub jump_count: usize,
    pub height_histogram: BTreeMap<u32, u64>,
}

impl ComplexityProfile {
    pub fn final_complexity(&self) -> usize {
        self.records.last().map_or(0, |r| r.l)
    }
}

/// Complexity after every symbol, reading column by column.
pub fn complexity_profile(field: PrimeField, seq: &MultiSequence, engine: Engine) -> Result<ComplexityProfile> {
    seq.check_field(field)?;
    let (m, n) = (seq.m(), seq.n());
    let mut ls = Vec::with_capacity(m * n);
    match engine {
        Engine::ShiftRegister => {
            let mut s = Synthesizer::new(field, m, n);
            for i in 1..=n {
                for t in 1..=m {
                    s.push(seq.get(t, i));
                    ls.push(s.complexity());
                }
            }
        }
        Engine::LinearSystem => {
            let mut l = 0;
            for i in 1..=n {
                for t in 1..=m {
                    let prefix: Vec<&[u16]> =
                        (1..=m).map(|r| &seq.row(r - 1)[..if r <= t { i } else { i - 1 }]).collect();
                    l = joint_linear_complexity_from(field, &prefix, l);
                    ls.push(l);
                }
            }
        }
    }
    Ok(profile_from_complexities(m, n, &ls))
}

fn profile_from_complexities(m: usize, n: usize, ls: &[usize]) -> ComplexityProfile {
    let mut records = Vec::with_capacity(ls.len());
    let mut deviations = Vec::with_capacity(n);
    let mut height_histogram = BTreeMap::new();
    let mut prev = 0;
    for (k, &l) in ls.iter().enumerate() {
        let (i, t) = (k / m + 1, k % m + 1);
        let h = (l - prev) as u32;
        if h > 0 {
            *height_histogram.entry(h).or_insert(0) += 1;
        }
        records.push(SubstepRecord { n: i, t, l, jump_height: h });
        if t == m {
            deviations.push(l as i64 - typical_degree(i, m));
        }
        prev = l;
    }
    let jump_count = records.iter().filter(|r| r.jump_height > 0).count();
    ComplexityProfile { m, n, records, deviations, jump_count, height_histogram }
}

/// Replays a profile through the battery model: each column applies the
/// update phase, each jump must come from an eligible battery (`b_t > d`)
/// with height `b_t - d` and swaps `b_t` with `d`. Returns the state after
/// every column; the drain must equal that column's deviation.
pub fn battery_trace(profile: &ComplexityProfile) -> Result<Vec<BdmState>> {
    let m = profile.m;
    let mut state = BdmState::origin(m)?;
    let mut states = Vec::with_capacity(profile.n);
    for column in profile.records.chunks(m) {
        let next = update_phase(&state);
        let mut b = next.batteries().to_vec();
        let mut d = next.drain();
        let layer = next.layer();
        for r in column {
            let bt = b[r.t - 1];
            if r.jump_height > 0 {
                if bt <= d {
                    return Err(Error::TraceMismatch(format!(
                        "jump at (n={}, t={}) from ineligible battery b={bt}, d={d}",
                        r.n, r.t
                    )));
                }
                if (bt - d) as u32 != r.jump_height {
                    return Err(Error::TraceMismatch(format!(
                        "jump height {} at (n={}, t={}) but b - d = {}",
                        r.jump_height,
                        r.n,
                        r.t,
                        bt - d
                    )));
                }
                b[r.t - 1] = d;
                d = bt;
            }
        }
        state = BdmState::new(b, d, layer)?;
        let n = column[0].n;
        if state.drain() as i64 != profile.deviations[n - 1] {
            return Err(Error::TraceMismatch(format!(
                "drain {} after column {n}, deviation {}",
                state.drain(),
                profile.deviations[n - 1]
            )));
        }
        states.push(state.clone());
    }
    Ok(states)
}

/// Number of symbols that, appended to row `t` (1-based) of a column-major
/// prefix, leave the complexity unchanged. `t` must be the next row to read.
pub fn uniqueness_check(field: PrimeField, prefix: &[Vec<u16>], t: usize) -> Result<u32> {
    let m = prefix.len();
    if t == 0 || t > m {
        return Err(Error::InvalidArgument(format!("row {t} out of range 1..={m}")));
    }
    let n = prefix[t - 1].len() + 1;
    for (r, row) in prefix.iter().enumerate() {
        let expected = if r + 1 < t { n } else { n - 1 };
        if row.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} symbols; position (t={t}, n={n}) needs {expected}",
                r + 1,
                row.len()
            )));
        }
        row.iter().try_for_each(|&s| field.check_symbol(s as u32))?;
    }
    let rows: Vec<&[u16]> = prefix.iter().map(Vec::as_slice).collect();
    let base = joint_linear_complexity(field, &rows);
    let mut extended = prefix[t - 1].clone();
    extended.push(0);
    let mut keep = 0;
    for symbol in 0..field.p() {
        *extended.last_mut().expect("non-empty") = symbol as u16;
        let mut rows = rows.clone();
        rows[t - 1] = &extended;
        if joint_linear_complexity_from(field, &rows, base) == base {
            keep += 1;
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf(p: u32) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn profile_of_one_zero_one() {
        let seq = MultiSequence::from_rows(vec![vec![1, 0, 1]]).unwrap();
        for engine in [Engine::LinearSystem, Engine::ShiftRegister] {
            let p = complexity_profile(gf(2), &seq, engine).unwrap();
            let ls: Vec<usize> = p.records.iter().map(|r| r.l).collect();
            assert_eq!(ls, vec![1, 1, 2]);
            let jumps: Vec<(usize, u32)> =
                p.records.iter().filter(|r| r.jump_height > 0).map(|r| (r.n, r.jump_height)).collect();
            assert_eq!(jumps, vec![(1, 1), (3, 1)]);
        }
    }

    #[test]
    fn late_one_jumps_by_three() {
        let seq = MultiSequence::from_rows(vec![vec![0, 0, 1]]).unwrap();
        let p = complexity_profile(gf(2), &seq, Engine::LinearSystem).unwrap();
        assert_eq!(p.records.iter().map(|r| r.l).collect::<Vec<_>>(), vec![0, 0, 3]);
        assert_eq!(p.jump_count, 1);
        assert_eq!(p.height_histogram, BTreeMap::from([(3, 1)]));
        // Battery before the third column: b = 1, d = -2.
        let states = battery_trace(&p).unwrap();
        assert_eq!(states.last().unwrap().drain(), 1);
    }

    #[test]
    fn zero_input_is_flat() {
        let seq = MultiSequence::zeros(3, 5).unwrap();
        let p = complexity_profile(gf(3), &seq, Engine::LinearSystem).unwrap();
        assert!(p.records.iter().all(|r| r.l == 0));
        assert_eq!(p.jump_count, 0);
        battery_trace(&p).unwrap();
    }

    #[test]
    fn uniqueness_examples() {
        // After (1, 0), only 0 keeps L = 1.
        assert_eq!(uniqueness_check(gf(2), &[vec![1, 0]], 1).unwrap(), 1);
        // After (1), L = 1 = n: nothing can jump.
        assert_eq!(uniqueness_check(gf(3), &[vec![1]], 1).unwrap(), 3);
        assert!(uniqueness_check(gf(2), &[vec![1, 0], vec![1, 0]], 2).is_err());
    }

    #[test]
    fn text_round_trip() {
        let seq = MultiSequence::from_rows(vec![vec![0, 1, 2], vec![2, 2, 0]]).unwrap();
        let text = seq.to_text(gf(3));
        assert_eq!(text, "3 2 3\n0 1 2\n2 2 0\n");
        assert_eq!(MultiSequence::parse(&text).unwrap(), (gf(3), seq));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(MultiSequence::parse("4 1 1\n0\n"), Err(Error::NotPrime(4))));
        assert!(matches!(MultiSequence::parse("2 1 2\n0 2\n"), Err(Error::SymbolOutOfRange { .. })));
        assert!(matches!(MultiSequence::parse("2 2 1\n0\n"), Err(Error::Parse(_))));
        assert!(matches!(MultiSequence::parse(""), Err(Error::Parse(_))));
    }
}
