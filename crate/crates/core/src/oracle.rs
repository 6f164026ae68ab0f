//! Independent reference computations used to cross-check the solvers.
//!
//! Matrices here are assembled from the model's neighbor enumeration and
//! handled by dense direct algorithms only (LU with partial pivoting, cyclic
//! Jacobi), sharing no code with [`crate::solver`].

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::RegionFunction;
use crate::graph::{ExhaustionFamily, ExplicitGraph, Field, FiniteRegion, GraphModel, Vertex};

pub const DENSE_ORACLE_LIMIT: usize = 2000;

fn dense_operator(model: &GraphModel, region: &FiniteRegion) -> Result<DMatrix<f64>> {
    let n = region.len();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::SizeLimit { size: n, cap: DENSE_ORACLE_LIMIT });
    }
    let mut a = DMatrix::zeros(n, n);
    for (i, x) in region.vertices().iter().enumerate() {
        a[(i, i)] += model.potential(x);
        for (y, b) in model.neighbors(x)? {
            a[(i, i)] += b;
            if let Some(j) = region.index_of(&y) {
                a[(i, j)] -= b;
            }
        }
    }
    Ok(a)
}

/// Solves `A z = rhs` by Gaussian elimination with partial pivoting. A zero
/// pivot yields a kernel vector of `A` in the error.
fn lu_solve(mut a: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs())).unwrap();
        if a[(p, k)].abs() <= 1e-13 * scale {
            // Upper-triangular kernel vector with z_k = 1.
            let mut z = vec![0.0; n];
            z[k] = 1.0;
            for i in (0..k).rev() {
                let s: f64 = (i + 1..=k).map(|j| a[(i, j)] * z[j]).sum();
                z[i] = -s / a[(i, i)];
            }
            return Err(Error::Indefinite { direction: z, energy: 0.0 });
        }
        a.swap_rows(k, p);
        perm.swap(k, p);
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            a[(i, k)] = f;
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        for j in 0..i {
            y[i] -= a[(i, j)] * y[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            y[i] -= a[(i, j)] * y[j];
        }
        y[i] /= a[(i, i)];
    }
    Ok(y)
}

/// `H_K^{-1} 1_x` by a dense direct solve.
pub fn dense_green(model: &GraphModel, region: &std::sync::Arc<FiniteRegion>, x: &Vertex) -> Result<RegionFunction> {
    let a = dense_operator(model, region)?;
    let i = region.index_of(x).ok_or(Error::UnknownVertex(*x))?;
    let mut rhs = vec![0.0; region.len()];
    rhs[i] = 1.0;
    RegionFunction::new(std::sync::Arc::clone(region), lu_solve(a, &rhs)?)
}

/// All eigenpairs of `H_K ψ = λ m ψ`.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is `ψ_k`, orthonormal in `ℓ²(K, m)`; the bottom one has positive sum.
    pub vectors: DMatrix<f64>,
    /// `max |S − V Λ Vᵀ|` for the symmetrized matrix `S`.
    pub reconstruction_residual: f64,
}

/// Cyclic Jacobi eigenvalue iteration on a symmetric matrix.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

pub fn dense_spectrum(model: &GraphModel, region: &FiniteRegion) -> Result<DenseSpectrum> {
    let a = dense_operator(model, region)?;
    let n = region.len();
    let s: Vec<f64> = region.vertices().iter().map(|x| 1.0 / model.measure(x).sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let (values, vectors) = jacobi_eigen(sym.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut sorted = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        sorted.set_column(col, &vectors.column(k));
    }
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sorted_values.clone()));
    let rebuilt = &sorted * lambda * sorted.transpose();
    let reconstruction_residual = (rebuilt - &sym).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Back to ψ = m^{-1/2} v.
    for col in 0..n {
        let sign = if col == 0 && sorted.column(0).sum() < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            sorted[(i, col)] *= sign * s[i];
        }
    }
    Ok(DenseSpectrum {
        values: sorted_values,
        vectors: sorted,
        reconstruction_residual,
    })
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, x);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                weights[i] = 2.0 / ((1.0 - x * x) * dq * dq);
                weights[n - 1 - i] = weights[i];
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
    }
    (nodes, weights)
}

/// One tensor Gauss–Legendre evaluation of the reduced lattice integral.
fn lattice_rule(d: usize, points: usize) -> f64 {
    let (x, w) = gauss_legendre(points);
    let pi = std::f64::consts::PI;
    // s ∈ [0, π], u_j ∈ [0, 1].
    let s_nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (pi * (x + 1.0) / 2.0, w * pi / 2.0)).collect();
    let u_nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0)).collect();
    let extra = d - 2;
    let total: f64 = s_nodes
        .par_iter()
        .map(|&(s, ws)| {
            let mut acc = 0.0;
            let mut idx = vec![0usize; extra];
            loop {
                let mut weight = ws * s.powi(extra as i32);
                let mut a = 2.0 + 2.0 * (1.0 - s.cos());
                for &k in &idx {
                    let (u, wu) = u_nodes[k];
                    weight *= wu;
                    a += 2.0 * (1.0 - (s * u).cos());
                }
                acc += weight / ((a - 2.0) * (a + 2.0)).sqrt();
                let mut carry = 0;
                while carry < extra {
                    idx[carry] += 1;
                    if idx[carry] < points {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                }
                if carry == extra {
                    break;
                }
            }
            acc
        })
        .sum();
    (d - 1) as f64 * total / pi.powi(d as i32 - 1)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureValue {
    pub value: f64,
    /// `|Q_{2n} − Q_n|` at the accepted rule.
    pub error_estimate: f64,
    pub points: usize,
}

/// `G_{ℤ^d}(0,0) = (2π)^{-d} ∫_{[−π,π]^d} (2Σ(1 − cos θ_i))^{-1} dθ`.
///
/// The last coordinate is integrated in closed form; the remaining cube is
/// folded onto the sector where the first angle is largest and mapped to
/// `[0,π] × [0,1]^{d−2}`, which removes the singularity at the origin.
pub fn lattice_green_quadrature(d: usize, tol: f64) -> Result<QuadratureValue> {
    if d < 3 {
        return Err(Error::DivergentIntegral { dim: d });
    }
    if d > 6 {
        return Err(Error::UnsupportedPresentation(format!("quadrature supports d ≤ 6, got {d}")));
    }
    let mut points = 8;
    let mut previous = lattice_rule(d, points);
    loop {
        let next = lattice_rule(d, points * 2);
        let error_estimate = (next - previous).abs();
        points *= 2;
        if error_estimate <= tol {
            return Ok(QuadratureValue { value: next, error_estimate, points });
        }
        let budget = (points as f64).powi(d as i32 - 1);
        if budget > 5e8 {
            return Err(Error::NoConvergence {
                method: "lattice quadrature",
                iterations: points,
                residual: error_estimate,
            });
        }
        previous = next;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReturnEstimate {
    pub horizons: Vec<usize>,
    /// Estimates of `Σ_{n ≤ horizon} P^n(x, x)`.
    pub values: Vec<f64>,
    /// 95% half-widths, summed over steps.
    pub half_widths: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

const BLOCK: usize = 256;

/// Monte-Carlo estimate of the expected number of visits to `x` up to each
/// horizon for the walk with `P(x,y) = b(x,y)/B(x)`.
pub fn rw_return_estimate(
    family: &ExhaustionFamily,
    x: &Vertex,
    horizons: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ReturnEstimate> {
    let model = family.model();
    if !model.contains(x) {
        return Err(Error::UnknownVertex(*x));
    }
    if horizons.is_empty() || trials == 0 {
        return Err(Error::Domain("need at least one horizon and one trial".into()));
    }
    let h_max = *horizons.iter().max().unwrap();
    let blocks = trials.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let mut counts = vec![0u64; h_max + 1];
            let mut buf = Vec::new();
            let walks = BLOCK.min(trials - block * BLOCK);
            for _ in 0..walks {
                let mut v = *x;
                counts[0] += 1;
                for count in counts.iter_mut().skip(1) {
                    if model.potential(&v) != 0.0 {
                        return Err(Error::UnsupportedPresentation(
                            "the random walk needs q ≡ 0".into(),
                        ));
                    }
                    model.neighbors_into(&v, &mut buf)?;
                    let total: f64 = buf.iter().map(|(_, b)| b).sum();
                    if total <= 0.0 {
                        return Err(Error::AssumptionViolation(format!("{v} has no neighbors")));
                    }
                    let mut r = rng.random::<f64>() * total;
                    let mut next = buf[buf.len() - 1].0;
                    for &(y, b) in &buf {
                        if r < b {
                            next = y;
                            break;
                        }
                        r -= b;
                    }
                    v = next;
                    if v == *x {
                        *count += 1;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<Vec<Vec<u64>>>>()?;
    let mut total = vec![0u64; h_max + 1];
    for c in counts {
        total.iter_mut().zip(c).for_each(|(t, c)| *t += c);
    }
    let t = trials as f64;
    let mut values = Vec::with_capacity(horizons.len());
    let mut half_widths = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut value = 0.0;
        let mut half = 0.0;
        for &c in &total[..=h] {
            let p = c as f64 / t;
            value += p;
            half += 1.96 * (p * (1.0 - p) / t).sqrt();
        }
        values.push(value);
        half_widths.push(half);
    }
    Ok(ReturnEstimate {
        horizons: horizons.to_vec(),
        values,
        half_widths,
        trials,
        seed,
    })
}

#[derive(Clone, Copy, Debug)]
pub enum RandomPotential {
    /// `q` uniform in `[0, 1)`.
    Nonnegative,
    /// `q` uniform in `[−1, 1)`, then shifted so that the bottom eigenvalue
    /// of `H` on the whole graph equals `margin`.
    Certified { margin: f64 },
}

/// Connected random graph on vertices `0..n`: a random spanning tree plus
/// independent extra edges with probability `p`, weights uniform in `(0, 1]`.
pub fn random_connected_graph(n: usize, p: f64, potential: RandomPotential, seed: u64) -> Result<GraphModel> {
    if n == 0 {
        return Err(Error::Domain("need at least one vertex".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<Vertex> = (0..n as i64).map(Vertex::id).collect();
    let mut edges: HashMap<(usize, usize), f64> = HashMap::new();
    let weight = |rng: &mut ChaCha8Rng| 1.0 - rng.random::<f64>();
    for i in 1..n {
        let j = rng.random_range(0..i);
        let w = weight(&mut rng);
        edges.insert((j, i), w);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p && !edges.contains_key(&(i, j)) {
                let w = weight(&mut rng);
                edges.insert((i, j), w);
            }
        }
    }
    let mut list: Vec<(Vertex, Vertex, f64)> =
        edges.into_iter().map(|((i, j), b)| (vertices[i], vertices[j], b)).collect();
    list.sort_by_key(|a| (a.0, a.1));
    let graph = ExplicitGraph::new(vertices.clone(), list)?;
    let raw: Vec<f64> = (0..n)
        .map(|_| match potential {
            RandomPotential::Nonnegative => rng.random::<f64>(),
            RandomPotential::Certified { .. } => 2.0 * rng.random::<f64>() - 1.0,
        })
        .collect();
    let table = |q: &[f64]| Field::Table {
        default: 0.0,
        values: vertices.iter().copied().zip(q.iter().copied()).collect(),
    };
    let model = GraphModel::explicit(graph.clone()).with_potential(table(&raw));
    let q = match potential {
        RandomPotential::Nonnegative => raw,
        RandomPotential::Certified { margin } => {
            let region = FiniteRegion::build(&model, 0, vertices.clone())?;
            let bottom = dense_spectrum(&model, &region)?.values[0];
            raw.iter().map(|q| q - bottom + margin).collect()
        }
    };
    Ok(GraphModel::explicit(graph).with_potential(table(&q)))
}
