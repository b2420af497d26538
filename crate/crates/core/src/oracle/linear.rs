//! Joint linear complexity from its definition: the least `L` for which the
//! recurrence system `a_{t,i} + sum_{j=1..L} c_j a_{t,i-j} = 0`
//! (`L < i <= n_t`, every row `t`) has a solution over `F_p`.

use super::field::PrimeField;

/// Joint linear complexity of a (possibly ragged) prefix.
pub fn joint_linear_complexity(field: PrimeField, rows: &[&[u16]]) -> usize {
    joint_linear_complexity_from(field, rows, 0)
}

/// As [`joint_linear_complexity`], searching upward from a known lower bound.
pub fn joint_linear_complexity_from(field: PrimeField, rows: &[&[u16]], lower: usize) -> usize {
    let longest = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    // L = longest is always feasible: the system is empty.
    (lower..longest).find(|&l| is_feasible(field, rows, l)).unwrap_or(longest.max(lower))
}

/// Whether some recurrence of length `l` generates every row.
pub fn is_feasible(field: PrimeField, rows: &[&[u16]], l: usize) -> bool {
    let width = l + 1;
    let mut system: Vec<Vec<u32>> = Vec::new();
    for row in rows {
        // 1-based i from l+1 to n_t; row[i-1] = a_{t,i}.
        for i in (l + 1)..=row.len() {
            let mut eq = Vec::with_capacity(width);
            for j in 1..=l {
                eq.push(row[i - j - 1] as u32);
            }
            eq.push(field.neg(row[i - 1] as u32));
            system.push(eq);
        }
    }
    consistent(field, system, l)
}

/// Gaussian elimination on an augmented `[A | b]` system with `cols` unknowns.
fn consistent(field: PrimeField, mut rows: Vec<Vec<u32>>, cols: usize) -> bool {
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = field.inv(rows[rank][col]);
        for v in rows[rank][col..].iter_mut() {
            *v = field.mul(*v, inv);
        }
        let (top, rest) = rows.split_at_mut(rank + 1);
        let prow = &top[rank];
        for row in rest.iter_mut() {
            let f = row[col];
            if f != 0 {
                for (x, y) in row[col..].iter_mut().zip(&prow[col..]) {
                    *x = field.sub(*x, field.mul(f, *y));
                }
            }
        }
        rank += 1;
    }
    rows[rank..].iter().all(|r| r[cols] == 0)
}
