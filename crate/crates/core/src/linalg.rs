//! Exact linear solves over the integers (fraction-free Bareiss elimination).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Solves `A x = b` for a square integer system.
///
/// Returns `None` when `A` is singular. Pivots are chosen per column by the
/// smallest bit length among the nonzero candidates, which keeps the
/// intermediate minors small on the sparse, structured systems used here.
pub fn solve_exact(mut a: Vec<Vec<BigInt>>, mut b: Vec<BigInt>) -> Option<Vec<BigRational>> {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n) && b.len() == n, "system must be square");
    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = (k..n).filter(|&r| !a[r][k].is_zero()).min_by_key(|&r| a[r][k].bits())?;
        if pivot != k {
            a.swap(pivot, k);
            b.swap(pivot, k);
        }
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        let akk = pivot_row[k].clone();
        for (offset, row) in rest.iter_mut().enumerate() {
            let i = k + 1 + offset;
            let aik = std::mem::take(&mut row[k]);
            if aik.is_zero() {
                // Row still has to be rescaled by akk / prev to keep the
                // Bareiss invariant.
                if akk != prev {
                    for x in row[k + 1..n].iter_mut().filter(|x| !x.is_zero()) {
                        *x = &*x * &akk / &prev;
                    }
                    b[i] = &b[i] * &akk / &prev;
                }
                continue;
            }
            for j in (k + 1)..n {
                let v = &akk * &row[j] - &aik * &pivot_row[j];
                row[j] = v / &prev;
            }
            b[i] = (&akk * &b[i] - &aik * &b[k]) / &prev;
        }
        prev = akk;
    }

    let mut x: Vec<BigRational> = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = BigRational::from_integer(b[i].clone());
        for j in (i + 1)..n {
            if !a[i][j].is_zero() {
                acc -= &x[j] * BigRational::from_integer(a[i][j].clone());
            }
        }
        x[i] = acc / BigRational::from_integer(a[i][i].clone());
    }
    Some(x)
}

/// Multiplies a rational row by the lcm of its denominators.
pub fn clear_denominators(row: &[BigRational]) -> Vec<BigInt> {
    use num_integer::Integer;
    let mut l = BigInt::one();
    for v in row {
        if !v.is_zero() {
            l = l.lcm(v.denom());
        }
    }
    row.iter().map(|v| (v * BigRational::from_integer(l.clone())).to_integer()).collect()
}

/// Absolute value of the largest entry; used in diagnostics.
pub fn max_abs(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x.abs()).fold(BigRational::zero(), |m, x| if x > m { x } else { m })
}
