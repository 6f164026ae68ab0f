//! Heat kernels of Dirichlet systems and their large-time and near-critical
//! resolvent limits.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::RegionFunction;
use crate::graph::Vertex;
use crate::solver::expm::dense_expm;
use crate::solver::{smallest_pencil, DirichletSystem, HeatSemigroup, SpectralDecomposition};

/// Largest system handled by the dense spectral paths.
pub const DENSE_LIMIT: usize = 2000;
/// Required `gap · t_final` for large-time estimates.
pub const GAP_TIMES: f64 = 20.0;

fn require_counting(system: &DirichletSystem) -> Result<()> {
    if system.has_counting_measure() {
        Ok(())
    } else {
        Err(Error::Precondition("heat kernels are defined with the counting measure".into()))
    }
}

fn require_dense(system: &DirichletSystem) -> Result<()> {
    if system.len() > DENSE_LIMIT {
        Err(Error::SizeLimit {
            size: system.len(),
            cap: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

fn index(system: &DirichletSystem, x: &Vertex) -> Result<usize> {
    system.region().index_of(x).ok_or(Error::UnknownVertex(*x))
}

/// `p_t(x, y) = (e^{-tH_K} 1_x)(y)`, reusable across times.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    semigroup: HeatSemigroup,
    len: usize,
    region: std::sync::Arc<crate::graph::FiniteRegion>,
}

impl HeatKernel {
    pub fn new(system: &DirichletSystem) -> Result<Self> {
        require_counting(system)?;
        Ok(HeatKernel {
            semigroup: system.heat_semigroup(),
            len: system.len(),
            region: std::sync::Arc::clone(system.region()),
        })
    }

    pub fn column(&self, t: f64, x: &Vertex) -> Result<RegionFunction> {
        let i = self.region.index_of(x).ok_or(Error::UnknownVertex(*x))?;
        let mut e = vec![0.0; self.len];
        e[i] = 1.0;
        RegionFunction::new(std::sync::Arc::clone(&self.region), self.semigroup.apply(t, &e)?)
    }

    pub fn at(&self, t: f64, x: &Vertex, y: &Vertex) -> Result<f64> {
        Ok(self.column(t, x)?.at(y))
    }
}

pub fn heat_kernel(system: &DirichletSystem, t: f64, x: &Vertex, y: &Vertex) -> Result<f64> {
    HeatKernel::new(system)?.at(t, x, y)
}

#[derive(Clone, Debug, Serialize)]
pub struct LongTimeRate {
    pub t_final: f64,
    /// `−log p_T(x,y) / T`.
    pub raw_estimate: f64,
    /// `−(log p_T − log p_{T'}) / (T − T')` over the last two grid points.
    pub slope_estimate: f64,
    /// `λ_min` of the system.
    pub lambda0: f64,
    /// `λ₁ − λ₀`, infinite for a single vertex.
    pub gap: f64,
    /// `Ψ(x)Ψ(y)`.
    pub projection: f64,
    /// Bound on `|raw_estimate − λ₀|`.
    pub raw_bound: f64,
    /// Bound on `|slope_estimate − λ₀|`.
    pub slope_bound: f64,
    /// Whether `log p_t` had to be evaluated through the eigenexpansion.
    pub eigen_path: bool,
}

/// `log p_t(x,y)` from the eigenexpansion with the leading exponential
/// factored out, immune to underflow.
fn log_heat_eigen(spec: &SpectralDecomposition, i: usize, j: usize, t: f64) -> f64 {
    let lambda0 = spec.values[0];
    let mut sum = 0.0;
    for k in 0..spec.values.len() {
        sum += (-(spec.values[k] - lambda0) * t).exp() * spec.vectors[(i, k)] * spec.vectors[(j, k)];
    }
    -lambda0 * t + sum.ln()
}

/// Decay rate of `p_t(x,y)` over `t_grid`, compared with `λ₀`.
pub fn long_time_rate(system: &DirichletSystem, x: &Vertex, y: &Vertex, t_grid: &[f64]) -> Result<LongTimeRate> {
    require_counting(system)?;
    require_dense(system)?;
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] < 0.0 {
        return Err(Error::Domain("time grid must be increasing, nonnegative, with at least two points".into()));
    }
    let (i, j) = (index(system, x)?, index(system, y)?);
    let spec = system.spectral_decomposition();
    let lambda0 = spec.values[0];
    let gap = if spec.values.len() > 1 {
        spec.values[1] - lambda0
    } else {
        f64::INFINITY
    };
    let t_final = *t_grid.last().unwrap();
    let t_prev = t_grid[t_grid.len() - 2];
    if gap * t_final < GAP_TIMES {
        return Err(Error::Precondition(format!(
            "gap × t_final = {:.3} is below {GAP_TIMES}",
            gap * t_final
        )));
    }
    let projection = spec.vectors[(i, 0)] * spec.vectors[(j, 0)];
    let semigroup = system.heat_semigroup();
    let mut e = vec![0.0; system.len()];
    e[i] = 1.0;
    let mut eigen_path = false;
    let mut log_p = |t: f64| -> Result<f64> {
        let p = semigroup.apply(t, &e)?[j];
        if p > 1e-250 {
            Ok(p.ln())
        } else {
            eigen_path = true;
            Ok(log_heat_eigen(&spec, i, j, t))
        }
    };
    let log_final = log_p(t_final)?;
    let log_prev = log_p(t_prev)?;
    let raw_estimate = -log_final / t_final;
    let slope_estimate = -(log_final - log_prev) / (t_final - t_prev);
    let tail = |t: f64| (-gap * t).exp() / projection;
    let raw_bound = (projection.ln().abs() - (1.0 - tail(t_final)).ln()) / t_final;
    let slope_bound = -2.0 * (1.0 - tail(t_prev)).ln() / (t_final - t_prev);
    Ok(LongTimeRate {
        t_final,
        raw_estimate,
        slope_estimate,
        lambda0,
        gap,
        projection,
        raw_bound,
        slope_bound,
        eigen_path,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateLimit {
    /// `lim e^{λ₀t} p_t(x,y)` from the bottom spectral projection.
    pub limit: f64,
    /// The same limit from a matrix exponential at large `t`.
    pub time_stepped: f64,
    pub time: f64,
    /// `Ψ(x)Ψ(y)`, equal to `limit`.
    pub projection: f64,
    pub gap: f64,
}

/// `lim_{t→∞} e^{λ₀t} p_t(x,y) = Ψ(x)Ψ(y)` on a finite system.
pub fn heat_gs_limit(system: &DirichletSystem, x: &Vertex, y: &Vertex) -> Result<GroundStateLimit> {
    require_counting(system)?;
    require_dense(system)?;
    let (i, j) = (index(system, x)?, index(system, y)?);
    let spec = system.spectral_decomposition();
    let lambda0 = spec.values[0];
    let gap = if spec.values.len() > 1 {
        spec.values[1] - lambda0
    } else {
        f64::INFINITY
    };
    if gap <= 1e-10 * lambda0.abs().max(1.0) {
        return Err(Error::Multiplicity { gap });
    }
    let projection = spec.vectors[(i, 0)] * spec.vectors[(j, 0)];
    let time = if gap.is_finite() { 2.0 * GAP_TIMES / gap } else { 1.0 };
    let n = system.len();
    let shifted = system.matrix().to_dense() - DMatrix::identity(n, n) * lambda0;
    let propagator = dense_expm(&(shifted * -time));
    Ok(GroundStateLimit {
        limit: projection,
        time_stepped: propagator[(i, j)],
        time,
        projection,
        gap,
    })
}

/// `λ_k = −2^{−k}`, `k = 1..=20`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=20).map(|k| -(2f64).powi(-k)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaGreenLimit {
    pub lambdas: Vec<f64>,
    /// `(−λ) G_λ(x, x₀)`.
    pub values: Vec<f64>,
    /// Bottom of the pencil `(H_K, diag w)`.
    pub lambda_min: f64,
    /// `φ(x)φ(x₀)` with `‖φ‖_{ℓ²(w)} = 1` when `λ_min` vanishes, else 0.
    pub limit: f64,
    pub final_error: f64,
}

/// `(−λ) G_λ(x, x₀)` with `(H − λ w) G_λ = 1_{x₀}`, along `lambdas ↗ 0`.
pub fn lambda_green_limit(
    system: &DirichletSystem,
    w: &[f64],
    x: &Vertex,
    x0: &Vertex,
    lambdas: &[f64],
) -> Result<LambdaGreenLimit> {
    if w.len() != system.len() || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("weight must be positive on every vertex of the region".into()));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l < 0.0)) {
        return Err(Error::Domain("spectral parameters must be negative".into()));
    }
    let (i, i0) = (index(system, x)?, index(system, x0)?);
    let values = lambdas
        .par_iter()
        .map(|&lambda| {
            let factor = system.matrix().shifted(lambda, w).factor().map_err(|e| match e {
                Error::Indefinite { .. } => Error::SpectralParameter { lambda },
                other => other,
            })?;
            let mut rhs = vec![0.0; system.len()];
            rhs[i0] = 1.0;
            Ok(-lambda * factor.solve(&rhs)?[i])
        })
        .collect::<Result<Vec<f64>>>()?;
    let pair = smallest_pencil(system.matrix(), w)?;
    let scale = system.matrix().diag().iter().fold(1.0f64, |m, d| m.max(d.abs()));
    if pair.value < -1e-10 * scale {
        return Err(Error::NotNonnegative {
            level: system.region().level(),
            lambda_min: pair.value,
        });
    }
    let limit = if pair.value.abs() <= 1e-10 * scale {
        pair.vector[i] * pair.vector[i0]
    } else {
        0.0
    };
    let final_error = (values.last().unwrap() - limit).abs();
    Ok(LambdaGreenLimit {
        lambdas: lambdas.to_vec(),
        values,
        lambda_min: pair.value,
        limit,
        final_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ExhaustionFamily, ExplicitGraph, Field, GraphModel};
    use crate::solver::assemble;
    use std::f64::consts::PI;

    fn two_vertex() -> DirichletSystem {
        let model = GraphModel::explicit(
            ExplicitGraph::new([Vertex::id(1), Vertex::id(2)], [(Vertex::id(1), Vertex::id(2), 1.0)])
                .unwrap(),
        );
        assemble(&ExhaustionFamily::anchored(model).unwrap(), 1).unwrap()
    }

    fn single(q: f64) -> DirichletSystem {
        let model = GraphModel::explicit(ExplicitGraph::new([Vertex::id(1)], []).unwrap())
            .with_potential(Field::Constant(q));
        assemble(&ExhaustionFamily::anchored(model).unwrap(), 0).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let one = Vertex::id(1);
        assert!((heat_kernel(&single(2.0), 1.0, &one, &one).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        let s = two_vertex();
        for t in [0.1, 1.0, 7.0] {
            let p = heat_kernel(&s, t, &one, &one).unwrap();
            assert!((p - (1.0 + (-2.0 * t).exp()) / 2.0).abs() < 1e-12);
        }
        assert_eq!(heat_kernel(&s, 0.0, &one, &Vertex::id(2)).unwrap(), 0.0);
    }

    #[test]
    fn rate_examples() {
        let one = Vertex::id(1);
        let r = long_time_rate(&two_vertex(), &one, &one, &[100.0, 200.0]).unwrap();
        assert!(r.slope_estimate.abs() < 1e-12);
        assert!((r.raw_estimate - 2f64.ln() / 200.0).abs() < 1e-12);
        let r = long_time_rate(&single(2.0), &one, &one, &[1.0, 2.0]).unwrap();
        assert!((r.raw_estimate - 2.0).abs() < 1e-14);

        let family = ExhaustionFamily::anchored(GraphModel::half_line_dirichlet()).unwrap();
        let s = assemble(&family, 9).unwrap();
        let x = Vertex::id(5);
        let r = long_time_rate(&s, &x, &x, &[150.0, 200.0]).unwrap();
        let exact = 4.0 * (PI / 20.0).sin().powi(2);
        assert!((r.slope_estimate - exact).abs() < 1e-4);
        assert!((r.raw_estimate - exact).abs() <= r.raw_bound + 1e-12);
        assert!(long_time_rate(&s, &x, &x, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn underflow_switches_to_eigen_path() {
        let one = Vertex::id(1);
        let r = long_time_rate(&single(2.0), &one, &one, &[300.0, 400.0]).unwrap();
        assert!(r.eigen_path);
        assert!((r.raw_estimate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gs_limit_examples() {
        let s = two_vertex();
        for y in [1, 2] {
            let g = heat_gs_limit(&s, &Vertex::id(1), &Vertex::id(y)).unwrap();
            assert!((g.limit - 0.5).abs() < 1e-12);
            assert!((g.time_stepped - g.limit).abs() < 1e-8);
        }
        let g = heat_gs_limit(&single(2.0), &Vertex::id(1), &Vertex::id(1)).unwrap();
        assert!((g.limit - 1.0).abs() < 1e-15);
        assert!((g.time_stepped - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lambda_green_examples() {
        let s = two_vertex();
        let one = Vertex::id(1);
        let grid = default_lambda_grid();
        let r = lambda_green_limit(&s, &[1.0, 1.0], &one, &one, &grid).unwrap();
        for (l, v) in r.lambdas.iter().zip(&r.values) {
            assert!((v - (1.0 - l) / (2.0 - l)).abs() < 1e-10, "{l}");
        }
        assert!((r.limit - 0.5).abs() < 1e-12);
        assert!(r.final_error < 1e-6);

        let r = lambda_green_limit(&single(2.0), &[1.0], &one, &one, &grid).unwrap();
        assert_eq!(r.limit, 0.0);
        assert!((r.values[0] - 0.5 / 2.5).abs() < 1e-15);

        let r = lambda_green_limit(&s, &[1.0, 4.0], &one, &one, &grid).unwrap();
        assert!((r.limit - 0.2).abs() < 1e-12);
        assert!(r.final_error < 1e-6);
        assert!(lambda_green_limit(&s, &[1.0, 1.0], &one, &one, &[0.0]).is_err());
    }
}
