//! Sparse LU factorization of a simplex basis.
//!
//! Right-looking Gaussian elimination. Each step takes the active column with the
//! fewest entries and, inside it, the sparsest row among entries that pass a
//! threshold test against the column maximum. Basis matrices here are mostly unit
//! columns, so most steps are singletons and produce no fill.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const THRESHOLD: f64 = 0.1;
const DROP: f64 = 1e-14;
const SINGULAR: f64 = 1e-11;

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions that could not be pivoted.
    pub columns: Vec<usize>,
    /// Rows left without a pivot.
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct LuFactors {
    n: usize,
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    pivot_val: Vec<f64>,
    /// Multipliers of step `s`: `(row, l)` meaning `row -= l * pivot_row[s]`.
    lower: Vec<Vec<(usize, f64)>>,
    /// Off-pivot entries of the pivot row at step `s`, by basis position.
    upper: Vec<Vec<(usize, f64)>>,
}

impl LuFactors {
    /// Factorizes the `n x n` matrix whose column `p` is `columns[p]` (row, value) pairs.
    pub(crate) fn factorize(n: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), n);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (p, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((p, v));
                    col_rows[p].push(r);
                }
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            col_count.iter().enumerate().map(|(j, &c)| Reverse((c, j))).collect();
        let mut row_active = vec![true; n];
        let mut col_active = vec![true; n];

        let mut lu = LuFactors {
            n,
            pivot_row: Vec::with_capacity(n),
            pivot_col: Vec::with_capacity(n),
            pivot_val: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
        };
        // Position of each column inside the row being updated, or usize::MAX.
        let mut slot = vec![usize::MAX; n];
        let mut seen = vec![0usize; n];
        let mut step = 0usize;

        for _ in 0..n {
            // Heap entries go stale when a count changes; skip those.
            let q = loop {
                match heap.pop() {
                    Some(Reverse((count, j))) if col_active[j] && col_count[j] == count => break Some(j),
                    Some(_) => continue,
                    None => break None,
                }
            };
            let Some(q) = q else {
                break;
            };
            // Live entries of column q.
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(col_count[q]);
            step += 1;
            col_rows[q].retain(|&r| {
                // A row can be listed twice after its entry cancelled and filled in again.
                if !row_active[r] || seen[r] == step {
                    return false;
                }
                seen[r] = step;
                match rows[r].iter().find(|e| e.0 == q) {
                    Some(&(_, v)) => {
                        entries.push((r, v));
                        true
                    }
                    None => false,
                }
            });
            let col_max = entries.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
            if col_max < SINGULAR {
                break;
            }
            let (p, v) = entries
                .iter()
                .copied()
                .filter(|e| e.1.abs() >= THRESHOLD * col_max)
                .min_by(|a, b| {
                    rows[a.0].len().cmp(&rows[b.0].len()).then(b.1.abs().total_cmp(&a.1.abs())).then(a.0.cmp(&b.0))
                })
                .expect("column maximum passes its own threshold");

            let pivot_entries = std::mem::take(&mut rows[p]);
            let mut lower = Vec::new();
            for &(r, a) in &entries {
                if r == p {
                    continue;
                }
                let l = a / v;
                lower.push((r, l));
                let row = &mut rows[r];
                for (idx, e) in row.iter().enumerate() {
                    slot[e.0] = idx;
                }
                for &(c, u) in &pivot_entries {
                    if c == q {
                        continue;
                    }
                    if slot[c] != usize::MAX {
                        row[slot[c]].1 -= l * u;
                    } else {
                        slot[c] = row.len();
                        row.push((c, -l * u));
                        col_rows[c].push(r);
                        col_count[c] += 1;
                        heap.push(Reverse((col_count[c], c)));
                    }
                }
                for e in row.iter() {
                    slot[e.0] = usize::MAX;
                }
                row.retain(|e| {
                    if e.0 == q {
                        return false;
                    }
                    if e.1.abs() < DROP {
                        col_count[e.0] -= 1;
                        heap.push(Reverse((col_count[e.0], e.0)));
                        return false;
                    }
                    true
                });
            }
            for &(c, _) in &pivot_entries {
                if c != q {
                    col_count[c] -= 1;
                    heap.push(Reverse((col_count[c], c)));
                }
            }
            row_active[p] = false;
            col_active[q] = false;
            lu.pivot_row.push(p);
            lu.pivot_col.push(q);
            lu.pivot_val.push(v);
            lu.lower.push(lower);
            lu.upper.push(pivot_entries.into_iter().filter(|e| e.0 != q).collect());
        }

        if lu.pivot_row.len() < n {
            return Err(Singular {
                columns: (0..n).filter(|&j| col_active[j]).collect(),
                rows: (0..n).filter(|&i| row_active[i]).collect(),
            });
        }
        Ok(lu)
    }

    /// Solves `B x = b` in place: `b` indexed by row on entry, by basis position on exit.
    pub(crate) fn solve(&self, b: &mut [f64], work: &mut Vec<f64>) {
        for s in 0..self.n {
            let w = b[self.pivot_row[s]];
            if w != 0.0 {
                for &(r, l) in &self.lower[s] {
                    b[r] -= l * w;
                }
            }
        }
        work.clear();
        work.resize(self.n, 0.0);
        for s in (0..self.n).rev() {
            let mut acc = b[self.pivot_row[s]];
            for &(c, u) in &self.upper[s] {
                acc -= u * work[c];
            }
            work[self.pivot_col[s]] = acc / self.pivot_val[s];
        }
        b.copy_from_slice(work);
    }

    /// Solves `B^T y = c` in place: `c` indexed by basis position on entry, by row on exit.
    pub(crate) fn solve_transpose(&self, c: &mut [f64], work: &mut Vec<f64>) {
        work.clear();
        work.resize(self.n, 0.0);
        for s in 0..self.n {
            let z = c[self.pivot_col[s]] / self.pivot_val[s];
            work[self.pivot_row[s]] = z;
            if z != 0.0 {
                for &(col, u) in &self.upper[s] {
                    c[col] -= u * z;
                }
            }
        }
        for s in (0..self.n).rev() {
            let mut acc = 0.0;
            for &(r, l) in &self.lower[s] {
                acc += l * work[r];
            }
            work[self.pivot_row[s]] -= acc;
        }
        c.copy_from_slice(work);
    }

    #[cfg(test)]
    fn nnz(&self) -> usize {
        self.lower.iter().map(Vec::len).sum::<usize>() + self.upper.iter().map(Vec::len).sum::<usize>() + self.n
    }
}
