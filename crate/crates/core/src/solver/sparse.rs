//! Symmetric sparse matrices and the two linear solvers behind
//! [`super::DirichletSystem`]: an envelope (profile) Cholesky factorization
//! in reverse Cuthill–McKee order, and Jacobi-preconditioned conjugate
//! gradients.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Relative residual target for conjugate gradients.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Systems below this size are always factored directly.
pub const DIRECT_SIZE: usize = 500;

/// Above [`DIRECT_SIZE`], a direct factorization is still used when its
/// estimated flop count stays below this budget (narrow profiles such as
/// paths and thin strips).
pub const DIRECT_FLOP_BUDGET: f64 = 2e8;

/// Symmetric matrix with a dense diagonal and CSR off-diagonal part.
#[derive(Clone, Debug)]
pub struct SparseSym {
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from the diagonal and each off-diagonal pair `(i, j, a_ij)`
    /// listed once.
    pub fn from_pairs(diag: Vec<f64>, pairs: &[(usize, usize, f64)]) -> Self {
        let n = diag.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, a) in pairs {
            rows[i].push((j, a));
            rows[j].push((i, a));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, a) in row {
                cols.push(j);
                vals.push(a);
            }
            row_ptr.push(cols.len());
        }
        SparseSym {
            diag,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    /// `A - σ·diag(d)`.
    pub fn shifted(&self, sigma: f64, d: &[f64]) -> Self {
        let mut out = self.clone();
        for (a, w) in out.diag.iter_mut().zip(d) {
            *a -= sigma * w;
        }
        out
    }

    /// `diag(s) A diag(s)`.
    pub fn scaled(&self, s: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.diag[i] *= s[i] * s[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.vals[k] *= s[i] * s[self.cols[k]];
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.len() {
            let mut acc = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        self.matvec(x, &mut y);
        y
    }

    pub fn quadratic(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for (j, a) in self.row(i) {
                m[(i, j)] = a;
            }
        }
        m
    }

    /// Lower and upper Gershgorin bounds of `diag(d)^{-1} A` for `d > 0`.
    pub fn gershgorin(&self, d: &[f64]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let radius: f64 = self.row(i).map(|(_, a)| a.abs()).sum();
            lo = lo.min((self.diag[i] - radius) / d[i]);
            hi = hi.max((self.diag[i] + radius) / d[i]);
        }
        (lo, hi)
    }

    /// Chooses and builds a solver for this (assumed positive definite)
    /// matrix.
    pub fn factor(&self) -> Result<Factor> {
        if self.is_empty() {
            return Err(Error::Domain("empty system".into()));
        }
        let order = reverse_cuthill_mckee(self);
        let cost = envelope_cost(self, &order);
        if self.len() < DIRECT_SIZE || cost <= DIRECT_FLOP_BUDGET {
            Ok(Factor::Envelope(EnvelopeCholesky::new(self, order)?))
        } else {
            Ok(Factor::Cg(Pcg::new(self.clone())))
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A factored (or iteratively solvable) positive definite system.
#[derive(Debug)]
pub enum Factor {
    Envelope(EnvelopeCholesky),
    Cg(Pcg),
}

impl Factor {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factor::Envelope(c) => Ok(c.solve(rhs)),
            Factor::Cg(cg) => cg.solve(rhs, None),
        }
    }

    /// Like [`Factor::solve`], warm-starting iterative solvers from `guess`.
    pub fn solve_from(&self, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factor::Envelope(c) => Ok(c.solve(rhs)),
            Factor::Cg(cg) => cg.solve(rhs, Some(guess)),
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, Factor::Envelope(_))
    }
}

/// Reverse Cuthill–McKee ordering, component by component, each started
/// from a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee(a: &SparseSym) -> Vec<usize> {
    let n = a.len();
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last = |start: usize, mark: &mut Vec<bool>| -> (usize, usize) {
        // Returns the last vertex of a BFS (min degree among the last level)
        // and the eccentricity of `start`.
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            mark[v] = true;
            let better = dist[v] > dist[last] || (dist[v] == dist[last] && degree[v] < degree[last]);
            if better {
                last = v;
            }
            for (w, _) in a.row(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (last, dist[last])
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let mut scratch = vec![false; n];
        let (mut start, mut ecc) = bfs_last(seed, &mut scratch);
        for _ in 0..4 {
            let (next, next_ecc) = bfs_last(start, &mut scratch);
            if next_ecc <= ecc {
                break;
            }
            start = next;
            ecc = next_ecc;
        }
        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = a.row(v).map(|(w, _)| w).filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

fn envelope_firsts(a: &SparseSym, order: &[usize]) -> Vec<usize> {
    let n = a.len();
    let mut position = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    order
        .iter()
        .enumerate()
        .map(|(p, &i)| a.row(i).map(|(j, _)| position[j]).filter(|&q| q < p).min().unwrap_or(p))
        .collect()
}

/// Estimated flops of an envelope factorization.
pub fn envelope_cost(a: &SparseSym, order: &[usize]) -> f64 {
    envelope_firsts(a, order)
        .iter()
        .enumerate()
        .map(|(p, &f)| {
            let w = (p - f + 1) as f64;
            w * w
        })
        .sum()
}

/// Profile Cholesky `P A Pᵀ = L Lᵀ`.
#[derive(Debug)]
pub struct EnvelopeCholesky {
    order: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    /// Row `p` holds `L[p][first[p]..=p]` at `data[offset[p]..]`.
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn new(a: &SparseSym, order: Vec<usize>) -> Result<Self> {
        let n = a.len();
        let first = envelope_firsts(a, &order);
        let mut position = vec![0; n];
        for (p, &i) in order.iter().enumerate() {
            position[i] = p;
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for p in 0..n {
            offset.push(offset[p] + (p - first[p] + 1));
        }
        let mut data = vec![0.0; offset[n]];
        for (p, &i) in order.iter().enumerate() {
            data[offset[p] + (p - first[p])] = a.diag[i];
            for (j, v) in a.row(i) {
                let q = position[j];
                if q < p {
                    data[offset[p] + (q - first[p])] = v;
                }
            }
        }

        for p in 0..n {
            let fp = first[p];
            for q in fp..p {
                let fq = first[q];
                let start = fp.max(fq);
                let mut s = data[offset[p] + (q - fp)];
                let row_p = &data[offset[p] + (start - fp)..offset[p] + (q - fp)];
                let row_q = &data[offset[q] + (start - fq)..offset[q] + (q - fq)];
                s -= dot(row_p, row_q);
                let pivot = data[offset[q] + (q - fq)];
                data[offset[p] + (q - fp)] = s / pivot;
            }
            let diag_at = offset[p] + (p - fp);
            let original = data[diag_at];
            let d = original - dot(&data[offset[p]..diag_at], &data[offset[p]..diag_at]);
            if !(d > 1e-14 * original.abs().max(f64::MIN_POSITIVE)) {
                let partial = EnvelopeCholesky {
                    order: order.clone(),
                    first: first.clone(),
                    offset: offset.clone(),
                    data: data.clone(),
                };
                let direction = partial.negative_direction(p);
                return Err(Error::Indefinite {
                    direction,
                    energy: d,
                });
            }
            data[diag_at] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            order,
            first,
            offset,
            data,
        })
    }

    fn entry(&self, p: usize, q: usize) -> f64 {
        if q < self.first[p] {
            0.0
        } else {
            self.data[self.offset[p] + (q - self.first[p])]
        }
    }

    /// With rows `0..p` factored and row `p` holding `y = L_{<p}^{-1} a_p`,
    /// the vector `(-L_{<p}^{-T} y, 1, 0, …)` has energy equal to the failed
    /// pivot.
    fn negative_direction(&self, p: usize) -> Vec<f64> {
        let mut z: Vec<f64> = (0..p).map(|q| self.entry(p, q)).collect();
        for q in (0..p).rev() {
            z[q] /= self.entry(q, q);
            let zq = z[q];
            for r in self.first[q]..q {
                z[r] -= self.entry(q, r) * zq;
            }
        }
        let mut x = vec![0.0; self.order.len()];
        for q in 0..p {
            x[self.order[q]] = -z[q];
        }
        x[self.order[p]] = 1.0;
        x
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut y: Vec<f64> = self.order.iter().map(|&i| rhs[i]).collect();
        for p in 0..n {
            let fp = self.first[p];
            let row = &self.data[self.offset[p]..self.offset[p] + (p - fp)];
            let s = y[p] - dot(row, &y[fp..p]);
            y[p] = s / self.data[self.offset[p] + (p - fp)];
        }
        for p in (0..n).rev() {
            let fp = self.first[p];
            y[p] /= self.data[self.offset[p] + (p - fp)];
            let yp = y[p];
            let row = &self.data[self.offset[p]..self.offset[p] + (p - fp)];
            for (k, l) in row.iter().enumerate() {
                y[fp + k] -= l * yp;
            }
        }
        let mut x = vec![0.0; n];
        for (p, &i) in self.order.iter().enumerate() {
            x[i] = y[p];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients.
#[derive(Debug)]
pub struct Pcg {
    matrix: SparseSym,
    max_iterations: usize,
}

impl Pcg {
    pub fn new(matrix: SparseSym) -> Self {
        let max_iterations = 20 * matrix.len() + 1000;
        Pcg {
            matrix,
            max_iterations,
        }
    }

    pub fn solve(&self, b: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let a = &self.matrix;
        let n = a.len();
        let b_norm = norm(b);
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let mut r: Vec<f64> = {
            let ax = a.mul(&x);
            b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
        };
        let inv_diag: Vec<f64> = a
            .diag
            .iter()
            .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for iteration in 0..self.max_iterations {
            let residual = norm(&r) / b_norm;
            if residual <= CG_TOLERANCE {
                return Ok(x);
            }
            a.matvec(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if curvature <= 0.0 {
                let scale = norm(&p);
                return Err(Error::Indefinite {
                    direction: p.iter().map(|v| v / scale).collect(),
                    energy: curvature / (scale * scale),
                });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            // Recompute the true residual now and then to stop drift.
            if iteration % 200 == 199 {
                let ax = a.mul(&x);
                for i in 0..n {
                    r[i] = b[i] - ax[i];
                }
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
        Err(Error::NoConvergence {
            method: "conjugate gradients",
            iterations: self.max_iterations,
            residual: norm(&r) / b_norm,
        })
    }
}
