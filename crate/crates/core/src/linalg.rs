//! Sparse symmetric matrices and the solvers the depth estimators need:
//! an envelope Cholesky factorization under reverse Cuthill-McKee ordering,
//! Jacobi-preconditioned conjugate gradients, and a shift-invert subspace
//! iteration for the lowest generalized eigenpairs.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Compressed sparse row storage of a symmetric matrix (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; columns within a row are sorted.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last = usize::MAX;
            for &(j, v) in row.iter() {
                if j == last {
                    *values.last_mut().expect("previous entry") += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = j;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            n: diag.len(),
            row_ptr: (0..=diag.len()).collect(),
            col_idx: (0..diag.len()).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `self + c * other`, merging sparsity patterns.
    pub fn add_scaled(&self, c: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, c * v)));
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    pub fn scaled(&self, c: f64) -> CsrMatrix {
        CsrMatrix {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    /// Principal submatrix with row/column `k` removed.
    pub fn without_index(&self, k: usize) -> CsrMatrix {
        let shift = |j: usize| if j > k { j - 1 } else { j };
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in (0..self.n).filter(|&i| i != k) {
            triplets.extend(self.row(i).filter(|&(j, _)| j != k).map(|(j, v)| (shift(i), shift(j), v)));
        }
        CsrMatrix::from_triplets(self.n - 1, &triplets)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Reverse Cuthill-McKee ordering; `order[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree = |i: usize| adj[i].len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (last vertex reached, eccentricity)
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            if dist[v] > dist[last] || (dist[v] == dist[last] && degree(v) < degree(last)) {
                last = v;
            }
            for &w in &adj[v] {
                if !visited[w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (last, dist[last])
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree(i), i))
            .expect("unvisited vertex");
        // pseudo-peripheral start
        let mut start = seed;
        let mut ecc = bfs_levels(start, &visited).1;
        for _ in 0..8 {
            let (far, _) = bfs_levels(start, &visited);
            let (_, e) = bfs_levels(far, &visited);
            if e <= ecc {
                break;
            }
            start = far;
            ecc = e;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (profile) Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    order: Vec<usize>,
    /// first column stored for each row of L
    first: Vec<usize>,
    /// start offset of each row in `data`
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let order = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in order.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (new, &old) in order.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn <= new {
                    data[offset[new] + jn - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_i = &data[offset[i] + k0 - fi..offset[i] + j - fi];
                let row_j = &data[offset[j] + k0 - fj..offset[j] + j - fj];
                let dot: f64 = row_i.iter().zip(row_j).map(|(x, y)| x * y).sum();
                let idx = offset[i] + j - fi;
                if j < i {
                    let djj = data[offset[j] + j - fj];
                    data[idx] = (data[idx] - dot) / djj;
                } else {
                    let d = data[idx] - dot;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::Solver(format!(
                            "matrix is not positive definite (pivot {d:.3e} at row {})",
                            order[i]
                        )));
                    }
                    data[idx] = d.sqrt();
                }
            }
        }
        Ok(Self {
            order,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution> {
    let n = a.dim();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("CG breakdown at iteration {it}: pᵀAp = {pap:.3e}")));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let res = norm(&r) / b_norm;
        if res <= tol {
            return Ok(CgSolution {
                x,
                iterations: it + 1,
                relative_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "CG did not reach relative residual {tol:e} in {max_iter} iterations (last {:.3e})",
        norm(&r) / b_norm
    )))
}

/// Lowest generalized eigenpairs of `a x = λ b x`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// b-orthonormal eigenvectors, one per column
    pub vectors: DMatrix<f64>,
    pub iterations: usize,
}

/// Shift-invert subspace iteration with Rayleigh-Ritz projection.
///
/// `a` must be symmetric positive semidefinite and `b` symmetric positive
/// definite. Converged when every requested pair has relative residual
/// `‖a x − λ b x‖ / ((|λ| + σ)‖b x‖)` below `tol`.
pub fn lowest_eigenpairs(a: &CsrMatrix, b: &CsrMatrix, k: usize, tol: f64, max_iter: usize) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::Eigensolver(format!("cannot compute {k} eigenpairs of a {n}×{n} problem")));
    }
    let p = (2 * k).max(k + 8).min(n);
    let sigma = 1e-3 * a.trace() / b.trace();
    let shifted = Cholesky::factor(&a.add_scaled(sigma, b))
        .map_err(|e| Error::Eigensolver(format!("shifted factorization failed: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    let mut theta = Vec::new();
    for it in 1..=max_iter {
        let mut y = DMatrix::zeros(n, p);
        for c in 0..p {
            let bx = b.mul_vec(x.column(c).as_slice());
            y.set_column(c, &DVector::from_vec(shifted.solve(&bx)));
        }
        let ay = apply_columns(a, &y);
        let by = apply_columns(b, &y);
        let a_small = symmetrize(y.transpose() * &ay);
        let b_small = symmetrize(y.transpose() * &by);
        let chol = b_small
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Eigensolver("projected mass matrix lost definiteness".into()))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Eigensolver("singular projected factor".into()))?;
        let c = symmetrize(&l_inv * a_small * l_inv.transpose());
        let eig = SymmetricEigen::new(c);
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let z = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, idx[c])]);
        theta = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let coeffs = l_inv.transpose() * z;
        x = &y * &coeffs;
        let ax = &ay * &coeffs;
        let bx = &by * &coeffs;

        let worst = (0..k)
            .map(|c| {
                let r = ax.column(c) - bx.column(c) * theta[c];
                r.norm() / ((theta[c].abs() + sigma) * bx.column(c).norm())
            })
            .fold(0.0, f64::max);
        if worst < tol {
            return Ok(EigenPairs {
                values: theta[..k].to_vec(),
                vectors: x.columns(0, k).into_owned(),
                iterations: it,
            });
        }
    }
    Err(Error::Eigensolver(format!(
        "subspace iteration did not converge in {max_iter} iterations (leading values {:?})",
        &theta[..k.min(theta.len())]
    )))
}

fn apply_columns(m: &CsrMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        out.set_column(c, &DVector::from_vec(m.mul_vec(x.column(c).as_slice())));
    }
    out
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
