//! Sparse symmetric linear algebra for the constrained stiffness systems:
//! upper-triangular CSC storage, a geometric nested-dissection ordering, and
//! an elimination-tree LDLᵀ factorization without pivoting.
//!
//! The pure-traction problems lead to saddle systems `[[K, R], [Rᵀ, 0]]`
//! where `K` is positive semidefinite with the rigid motions as kernel and
//! `R` holds three dense constraint columns. Ordering the multiplier rows
//! last keeps every leading pivot positive and puts exactly three negative
//! pivots at the end, so the factorization needs no pivoting.

// indexed loops mirror the matrix formulas throughout this module
#![allow(clippy::needless_range_loop)]

use crate::error::{LabError, Result};
use emt_core::Vec2;

const NONE: usize = usize::MAX;

/// Accumulator for a symmetric matrix; entries are folded into the upper
/// triangle and duplicates are summed.
#[derive(Debug, Clone)]
pub struct SymTriplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymTriplets {
    pub fn new(n: usize) -> Self {
        SymTriplets { n, entries: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` at `(i, j)`; symmetric counterpart entries are equivalent.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v == 0.0 && i != j {
            return;
        }
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((r, c, v));
    }

    /// Builds deduplicated upper CSC with every diagonal entry present.
    pub fn build(mut self) -> SparseSym {
        for d in 0..self.n {
            self.entries.push((d, d, 0.0));
        }
        self.entries.sort_unstable_by_key(|e| (e.1, e.0));
        let mut col_ptr = vec![0usize; self.n + 1];
        let mut row_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last = (NONE, NONE);
        for (r, c, v) in self.entries {
            if (r, c) == last {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = (r, c);
            }
        }
        for c in 0..self.n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseSym { n: self.n, col_ptr, row_idx, values }
    }
}

/// Symmetric matrix stored as its upper triangle in CSC with sorted rows.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSym {
    /// Full symmetric matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// Mean absolute diagonal value, used to scale constraint columns.
    pub fn mean_diag(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                if self.row_idx[p] == j {
                    s += self.values[p].abs();
                }
            }
        }
        s / self.n as f64
    }

    /// Copy with `+delta` added to the first `n_pos` diagonal entries and
    /// `-delta` to the rest (static regularization of a quasidefinite
    /// matrix).
    pub fn regularized(&self, n_pos: usize, delta: f64) -> SparseSym {
        let mut out = self.clone();
        for j in 0..self.n {
            for p in out.col_ptr[j]..out.col_ptr[j + 1] {
                if out.row_idx[p] == j {
                    out.values[p] += if j < n_pos { delta } else { -delta };
                }
            }
        }
        out
    }

    /// Symmetric permutation `P A Pᵀ` with `perm[new] = old`.
    fn permuted(&self, perm: &[usize]) -> SparseSym {
        let n = self.n;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut tri = Vec::with_capacity(self.values.len());
        for j in 0..n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let (mut r, mut c) = (inv[i], inv[j]);
                if r > c {
                    std::mem::swap(&mut r, &mut c);
                }
                tri.push((r, c, self.values[p]));
            }
        }
        tri.sort_unstable_by_key(|e| (e.1, e.0));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(tri.len());
        let mut values = Vec::with_capacity(tri.len());
        for (r, c, v) in tri {
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseSym { n, col_ptr, row_idx, values }
    }
}

/// Geometric nested dissection on a node graph with coordinates.
///
/// Recursively splits by the coordinate median along the wider bounding-box
/// axis; the separator (nodes with cross-edges) is ordered last. Planar FEM
/// graphs get near-optimal fill this way without a full minimum-degree
/// implementation.
pub fn nested_dissection(adj_ptr: &[usize], adj: &[usize], coords: &[Vec2]) -> Vec<usize> {
    let n = coords.len();
    let mut perm = Vec::with_capacity(n);
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut side = vec![0u8; n];
    dissect(&mut nodes, adj_ptr, adj, coords, &mut side, &mut perm);
    perm
}

fn dissect(
    nodes: &mut [usize],
    adj_ptr: &[usize],
    adj: &[usize],
    coords: &[Vec2],
    side: &mut [u8],
    out: &mut Vec<usize>,
) {
    const LEAF: usize = 48;
    if nodes.len() <= LEAF {
        out.extend_from_slice(nodes);
        return;
    }
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &v in nodes.iter() {
        lo.x = lo.x.min(coords[v].x);
        lo.y = lo.y.min(coords[v].y);
        hi.x = hi.x.max(coords[v].x);
        hi.y = hi.y.max(coords[v].y);
    }
    let split_x = (hi.x - lo.x) >= (hi.y - lo.y);
    nodes.sort_unstable_by(|&a, &b| {
        let (ka, kb) = if split_x { (coords[a].x, coords[b].x) } else { (coords[a].y, coords[b].y) };
        ka.partial_cmp(&kb).unwrap().then(a.cmp(&b))
    });
    let mid = nodes.len() / 2;
    // side: 1 = A, 2 = B
    for (idx, &v) in nodes.iter().enumerate() {
        side[v] = if idx < mid { 1 } else { 2 };
    }
    let mut a = Vec::with_capacity(mid);
    let mut b = Vec::with_capacity(nodes.len() - mid);
    let mut sep = Vec::new();
    for &v in nodes.iter() {
        let my = side[v];
        let mut cross = false;
        for &w in &adj[adj_ptr[v]..adj_ptr[v + 1]] {
            let other = side[w];
            if other != 0 && other != my {
                cross = true;
                break;
            }
        }
        if cross {
            sep.push(v);
        } else if my == 1 {
            a.push(v);
        } else {
            b.push(v);
        }
    }
    for &v in nodes.iter() {
        side[v] = 0;
    }
    if a.is_empty() && b.is_empty() {
        out.extend_from_slice(&sep);
        return;
    }
    dissect(&mut a, adj_ptr, adj, coords, side, out);
    dissect(&mut b, adj_ptr, adj, coords, side, out);
    out.extend_from_slice(&sep);
}

/// LDLᵀ factors of a permuted symmetric matrix.
pub struct LdltFactor {
    n: usize,
    perm: Vec<usize>,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
}

impl LdltFactor {
    /// Factors `P A Pᵀ = L D Lᵀ` with `perm[new] = old`.
    pub fn factor(a: &SparseSym, perm: Vec<usize>) -> Result<LdltFactor> {
        let n = a.n;
        assert_eq!(perm.len(), n);
        let ap = a.permuted(&perm);

        // elimination tree and column counts
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut l_nnz = vec![0usize; n];
        for j in 0..n {
            flag[j] = j;
            for p in ap.col_ptr[j]..ap.col_ptr[j + 1] {
                let mut node = ap.row_idx[p];
                if node == j {
                    continue;
                }
                while flag[node] != j {
                    if parent[node] == NONE {
                        parent[node] = j;
                    }
                    l_nnz[node] += 1;
                    flag[node] = j;
                    node = parent[node];
                }
            }
        }

        let mut l_colptr = vec![0usize; n + 1];
        for j in 0..n {
            l_colptr[j + 1] = l_colptr[j] + l_nnz[j];
        }
        let total = l_colptr[n];
        let mut l_rowidx = vec![0usize; total];
        let mut l_values = vec![0.0f64; total];
        let mut l_next: Vec<usize> = l_colptr[..n].to_vec();

        let mut d = vec![0.0f64; n];
        let mut d_inv = vec![0.0f64; n];
        let mut y_val = vec![0.0f64; n];
        let mut y_marked = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];

        for j in 0..n {
            let mut nnz_y = 0usize;
            for p in ap.col_ptr[j]..ap.col_ptr[j + 1] {
                let i = ap.row_idx[p];
                if i == j {
                    d[j] = ap.values[p];
                    continue;
                }
                y_val[i] += ap.values[p];
                let mut next = i;
                let mut nnz_e = 0usize;
                while next != NONE && next < j && !y_marked[next] {
                    y_marked[next] = true;
                    elim[nnz_e] = next;
                    nnz_e += 1;
                    next = parent[next];
                }
                while nnz_e > 0 {
                    nnz_e -= 1;
                    y_idx[nnz_y] = elim[nnz_e];
                    nnz_y += 1;
                }
            }
            for t in (0..nnz_y).rev() {
                let k = y_idx[t];
                let yk = y_val[k];
                y_val[k] = 0.0;
                y_marked[k] = false;
                for p in l_colptr[k]..l_next[k] {
                    y_val[l_rowidx[p]] -= l_values[p] * yk;
                }
                let ljk = yk * d_inv[k];
                d[j] -= ljk * yk;
                l_rowidx[l_next[k]] = j;
                l_values[l_next[k]] = ljk;
                l_next[k] += 1;
            }
            if d[j] == 0.0 || !d[j].is_finite() {
                return Err(LabError::Solver(format!("zero pivot at column {j} of {n}")));
            }
            d_inv[j] = 1.0 / d[j];
        }

        Ok(LdltFactor { n, perm, l_colptr, l_rowidx, l_values, d, d_inv })
    }

    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for new in 0..self.n {
            x[new] = b[self.perm[new]];
        }
        for j in 0..self.n {
            let xj = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                x[self.l_rowidx[p]] -= self.l_values[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] *= self.d_inv[j];
        }
        for j in (0..self.n).rev() {
            let mut xj = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                xj -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[j] = xj;
        }
        let mut out = vec![0.0; self.n];
        for new in 0..self.n {
            out[self.perm[new]] = x[new];
        }
        out
    }

    /// Solve with one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &SparseSym, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx.iter()) {
            *xi += di;
        }
        x
    }

    /// Iterative refinement against a possibly different (unregularized)
    /// matrix `a`, until `‖a x − b‖∞ ≤ tol · scale` or `max_iter` steps.
    /// Returns the solution and the final residual.
    pub fn solve_against(&self, a: &SparseSym, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut x = self.solve(b);
        for _ in 0..max_iter {
            let ax = a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect();
            let resid = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if resid <= tol * scale {
                return (x, resid);
            }
            let dx = self.solve(&r);
            for (xi, di) in x.iter_mut().zip(dx.iter()) {
                *xi += di;
            }
        }
        let ax = a.matvec(&x);
        let resid = b.iter().zip(ax.iter()).fold(0.0f64, |m, (bi, ai)| m.max((bi - ai).abs()));
        (x, resid)
    }

    pub fn l_nnz(&self) -> usize {
        self.l_values.len()
    }

}
