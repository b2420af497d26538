//! Incremental shift-register synthesis for multisequences read column by
//! column. Each row keeps the connection polynomial that was current when
//! that row last forced a length change, together with the position and
//! discrepancy of that change; a nonzero discrepancy on row `t` is cancelled
//! with a shifted copy of row `t`'s auxiliary polynomial. The length grows
//! exactly when the candidate `n - m_t + L_{B_t}` exceeds the current `L`,
//! which is the battery condition `b_t > d` in disguise.
//!
//! Agreement with [`super::linear`] is property-tested. Over `F_2` the
//! registers are bit-packed.

use super::field::PrimeField;

/// Minimal-length LFSR synthesizer for an `M`-row multisequence of at most
/// `capacity` columns, fed one symbol at a time in column-major order.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    m: usize,
    capacity: usize,
    /// 1-based column and 0-based row of the next symbol.
    next_n: usize,
    next_t: usize,
    l: usize,
    aux: Vec<AuxMeta>,
    reg: Register,
}

#[derive(Clone, Copy, Debug)]
struct AuxMeta {
    lb: usize,
    mt: usize,
}

#[derive(Clone, Debug)]
enum Register {
    Generic(GenericRegister),
    Binary(BinaryRegister),
}

impl Synthesizer {
    /// Uses the bit-packed register when `p = 2`.
    pub fn new(field: PrimeField, m: usize, capacity: usize) -> Self {
        if field.p() == 2 {
            Self::with_register(m, capacity, Register::Binary(BinaryRegister::new(m, capacity)))
        } else {
            Self::generic(field, m, capacity)
        }
    }

    /// Always uses the word-per-symbol register, whatever `p`.
    pub fn generic(field: PrimeField, m: usize, capacity: usize) -> Self {
        Self::with_register(m, capacity, Register::Generic(GenericRegister::new(field, m, capacity)))
    }

    fn with_register(m: usize, capacity: usize, reg: Register) -> Self {
        assert!(m > 0, "at least one row");
        Self { m, capacity, next_n: 1, next_t: 0, l: 0, aux: vec![AuxMeta { lb: 0, mt: 0 }; m], reg }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Current joint linear complexity.
    pub fn complexity(&self) -> usize {
        self.l
    }

    /// `(n, t)` of the next symbol, both 1-based.
    pub fn position(&self) -> (usize, usize) {
        (self.next_n, self.next_t + 1)
    }

    /// Whether reading the next symbol can raise the complexity.
    pub fn next_is_eligible(&self) -> bool {
        let a = self.aux[self.next_t];
        self.next_n > self.l && self.next_n - a.mt + a.lb > self.l
    }

    /// Reads the next symbol and returns the jump height (0 if `L` is unchanged).
    ///
    /// Panics past `capacity` columns.
    #[inline]
    pub fn push(&mut self, symbol: u16) -> u32 {
        let (n, t) = (self.next_n, self.next_t);
        assert!(n <= self.capacity, "synthesizer capacity exceeded");
        self.next_t += 1;
        if self.next_t == self.m {
            self.next_t = 0;
            self.next_n += 1;
        }
        let cap = self.capacity;
        let l = self.l;
        let a = self.aux[t];
        let candidate = n - a.mt + a.lb;
        // When n <= L the row imposes no new equation.
        let grow = match &mut self.reg {
            Register::Generic(r) => r.read(t, n, symbol, l, cap, a, candidate),
            Register::Binary(r) => r.read(t, n, symbol, l, cap, a, candidate),
        };
        if grow {
            self.aux[t] = AuxMeta { lb: l, mt: n };
            self.l = candidate;
            (candidate - l) as u32
        } else {
            0
        }
    }
}

#[derive(Clone, Debug)]
struct GenericRegister {
    field: PrimeField,
    /// Rows stored reversed: `rows[t][cap - i] = a_{t,i}`.
    rows: Vec<Vec<u32>>,
    c: Vec<u32>,
    b: Vec<Vec<u32>>,
    beta: Vec<u32>,
}

impl GenericRegister {
    fn new(field: PrimeField, m: usize, cap: usize) -> Self {
        Self { field, rows: vec![vec![0; cap + 1]; m], c: vec![1], b: vec![vec![1]; m], beta: vec![1; m] }
    }

    #[allow(clippy::too_many_arguments)]
    fn read(&mut self, t: usize, n: usize, symbol: u16, l: usize, cap: usize, a: AuxMeta, candidate: usize) -> bool {
        let f = self.field;
        self.rows[t][cap - n] = symbol as u32;
        if n <= l {
            return false;
        }
        let window = &self.rows[t][cap - n..cap - n + l + 1];
        let p = f.p() as u64;
        let delta = (self.c.iter().zip(window).map(|(&c, &x)| (c * x) as u64).sum::<u64>() % p) as u32;
        if delta == 0 {
            return false;
        }
        let k = n - a.mt;
        let coef = f.mul(delta, f.inv(self.beta[t]));
        let grow = candidate > l;
        let previous = if grow { Some(self.c.clone()) } else { None };
        if self.c.len() < candidate + 1 {
            self.c.resize(candidate + 1, 0);
        }
        for (cj, &bj) in self.c[k..].iter_mut().zip(&self.b[t]) {
            *cj = f.sub(*cj, f.mul(coef, bj));
        }
        if let Some(prev) = previous {
            self.b[t] = prev;
            self.beta[t] = delta;
        }
        grow
    }
}

#[derive(Clone, Debug)]
struct BinaryRegister {
    /// Bit `cap - i` of `rows[t]` is `a_{t,i}`.
    rows: Vec<Vec<u64>>,
    c: Vec<u64>,
    b: Vec<Vec<u64>>,
    scratch: Vec<u64>,
}

impl BinaryRegister {
    fn new(m: usize, cap: usize) -> Self {
        let words = cap / 64 + 3;
        let mut c = vec![0u64; words];
        c[0] = 1;
        Self { rows: vec![vec![0; words]; m], c: c.clone(), b: vec![c.clone(); m], scratch: c }
    }

    #[inline]
    fn window(bits: &[u64], offset: usize) -> u64 {
        let (w, s) = (offset / 64, offset % 64);
        if s == 0 {
            bits[w]
        } else {
            (bits[w] >> s) | (bits[w + 1] << (64 - s))
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn read(&mut self, t: usize, n: usize, symbol: u16, l: usize, cap: usize, a: AuxMeta, candidate: usize) -> bool {
        let pos = cap - n;
        if symbol & 1 == 1 {
            self.rows[t][pos / 64] |= 1 << (pos % 64);
        }
        if n <= l {
            return false;
        }
        let row = &self.rows[t];
        let mut acc = 0u64;
        for (w, &cw) in self.c[..=l / 64].iter().enumerate() {
            acc ^= cw & Self::window(row, pos + 64 * w);
        }
        if acc.count_ones() & 1 == 0 {
            return false;
        }
        let grow = candidate > l;
        if grow {
            self.scratch.copy_from_slice(&self.c);
        }
        let k = n - a.mt;
        let (ws, bs) = (k / 64, k % 64);
        for (w, &bw) in self.b[t][..=a.lb / 64].iter().enumerate() {
            self.c[w + ws] ^= bw << bs;
            if bs != 0 {
                self.c[w + ws + 1] ^= bw >> (64 - bs);
            }
        }
        if grow {
            std::mem::swap(&mut self.scratch, &mut self.b[t]);
        }
        grow
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear::joint_linear_complexity;
    use proptest::prelude::*;

    fn run(s: &mut Synthesizer, rows: &[Vec<u16>]) -> Vec<usize> {
        let n = rows[0].len();
        let mut out = Vec::new();
        for i in 0..n {
            for row in rows {
                s.push(row[i]);
                out.push(s.complexity());
            }
        }
        out
    }

    fn reference(field: PrimeField, rows: &[Vec<u16>]) -> Vec<usize> {
        let (m, n) = (rows.len(), rows[0].len());
        let mut out = Vec::new();
        for i in 1..=n {
            for t in 0..m {
                let prefix: Vec<&[u16]> = (0..m).map(|r| &rows[r][..if r <= t { i } else { i - 1 }]).collect();
                out.push(joint_linear_complexity(field, &prefix));
            }
        }
        out
    }

    fn multiseq(
        p: u16,
        m: std::ops::RangeInclusive<usize>,
        n: std::ops::RangeInclusive<usize>,
    ) -> impl Strategy<Value = Vec<Vec<u16>>> {
        (m, n).prop_flat_map(move |(m, n)| proptest::collection::vec(proptest::collection::vec(0..p, n), m))
    }

    #[test]
    fn one_zero_one() {
        let f = PrimeField::new(2).unwrap();
        let mut s = Synthesizer::new(f, 1, 3);
        assert_eq!(run(&mut s, &[vec![1, 0, 1]]), vec![1, 1, 2]);
    }

    #[test]
    fn long_binary_run_matches_generic() {
        let f = PrimeField::new(2).unwrap();
        let mut bits = 0x9E37_79B9_7F4A_7C15u64;
        let rows: Vec<Vec<u16>> = (0..3)
            .map(|_| {
                (0..300)
                    .map(|_| {
                        bits ^= bits << 13;
                        bits ^= bits >> 7;
                        bits ^= bits << 17;
                        (bits & 1) as u16
                    })
                    .collect()
            })
            .collect();
        let a = run(&mut Synthesizer::new(f, 3, 300), &rows);
        let b = run(&mut Synthesizer::generic(f, 3, 300), &rows);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn binary_matches_linear_system(rows in multiseq(2, 1..=4, 1..=9)) {
            let f = PrimeField::new(2).unwrap();
            let m = rows.len();
            prop_assert_eq!(run(&mut Synthesizer::new(f, m, rows[0].len()), &rows), reference(f, &rows));
        }

        #[test]
        fn generic_matches_linear_system_gf3(rows in multiseq(3, 1..=3, 1..=7)) {
            let f = PrimeField::new(3).unwrap();
            let m = rows.len();
            prop_assert_eq!(run(&mut Synthesizer::new(f, m, rows[0].len()), &rows), reference(f, &rows));
        }

        #[test]
        fn generic_matches_linear_system_gf5(rows in multiseq(5, 1..=3, 1..=6)) {
            let f = PrimeField::new(5).unwrap();
            let m = rows.len();
            prop_assert_eq!(run(&mut Synthesizer::new(f, m, rows[0].len()), &rows), reference(f, &rows));
        }

        #[test]
        fn sparse_binary_matches_linear_system(
            rows in (1usize..=3, 4usize..=12).prop_flat_map(|(m, n)| proptest::collection::vec(
                proptest::collection::vec(prop_oneof![8 => Just(0u16), 1 => Just(1u16)], n), m))
        ) {
            let f = PrimeField::new(2).unwrap();
            let m = rows.len();
            prop_assert_eq!(run(&mut Synthesizer::new(f, m, rows[0].len()), &rows), reference(f, &rows));
        }
    }
}
