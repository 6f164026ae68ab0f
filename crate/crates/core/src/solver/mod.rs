//! Dirichlet restrictions `H_K` of the operator to finite regions, and the
//! linear-algebra operations on them: Green solves, bottom eigenpairs,
//! resolvents and the heat semigroup.
//!
//! The diagonal of `H_K` keeps the full degree `Σ_y b(x,y)`, including
//! edges that leave `K`, so that `⟨H_K φ, φ⟩ = h(φ)` for every `φ`
//! supported in `K`.

pub mod eigen;
pub mod expm;
pub mod sparse;

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::RegionFunction;
use crate::graph::{ExhaustionFamily, FiniteRegion, GraphModel, Vertex};

pub use eigen::{smallest_pencil, PencilPair, EIGEN_TOLERANCE};
pub use sparse::{Factor, SparseSym};

/// Heat semigroups of systems below this size use a dense eigendecomposition.
pub const DENSE_HEAT_SIZE: usize = 500;
pub const HEAT_TOLERANCE: f64 = 1e-10;

/// The operator `H_K` together with the measure on `K`.
#[derive(Debug)]
pub struct DirichletSystem {
    region: Arc<FiniteRegion>,
    matrix: SparseSym,
    measure: Vec<f64>,
    factor: Mutex<Option<Arc<Factor>>>,
}

impl Clone for DirichletSystem {
    fn clone(&self) -> Self {
        DirichletSystem {
            region: Arc::clone(&self.region),
            matrix: self.matrix.clone(),
            measure: self.measure.clone(),
            factor: Mutex::new(None),
        }
    }
}

/// Smallest eigenpair of `m^{-1} H_K`.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    /// Normalized in `ℓ²(K, m)`, positive sum.
    pub vector: RegionFunction,
    pub residual: f64,
    pub iterations: usize,
}

/// Assembles `H_{K_n}` for level `n` of the family.
pub fn assemble(family: &ExhaustionFamily, n: usize) -> Result<DirichletSystem> {
    let region = family.region(n)?;
    DirichletSystem::new(family.model(), region)
}

impl DirichletSystem {
    pub fn new(model: &GraphModel, region: Arc<FiniteRegion>) -> Result<Self> {
        let mut diag = Vec::with_capacity(region.len());
        let mut measure = Vec::with_capacity(region.len());
        for (i, x) in region.vertices().iter().enumerate() {
            let m = model.measure(x);
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::AssumptionViolation(format!("m({x}) = {m} must be positive")));
            }
            measure.push(m);
            diag.push(region.degree(i) + model.potential(x));
        }
        let pairs: Vec<(usize, usize, f64)> =
            region.induced_edges().iter().map(|&(i, j, b)| (i, j, -b)).collect();
        Ok(DirichletSystem {
            matrix: SparseSym::from_pairs(diag, &pairs),
            region,
            measure,
            factor: Mutex::new(None),
        })
    }

    pub fn region(&self) -> &Arc<FiniteRegion> {
        &self.region
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn has_counting_measure(&self) -> bool {
        self.measure.iter().all(|m| *m == 1.0)
    }

    fn index(&self, x: &Vertex) -> Result<usize> {
        self.region.index_of(x).ok_or(Error::UnknownVertex(*x))
    }

    fn check_function(&self, f: &RegionFunction) -> Result<()> {
        if !Arc::ptr_eq(f.region(), &self.region) && f.region().vertices() != self.region.vertices() {
            return Err(Error::Domain("function lives on a different region".into()));
        }
        Ok(())
    }

    /// `H_K φ` as a plain vector.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.matrix.mul(phi)
    }

    /// `⟨H_K φ, φ⟩`.
    pub fn quadratic(&self, phi: &[f64]) -> f64 {
        self.matrix.quadratic(phi)
    }

    /// Factorization of `H_K`, computed once and shared.
    pub fn factor(&self) -> Result<Arc<Factor>> {
        let mut slot = self.factor.lock().expect("factor cache poisoned");
        if let Some(f) = slot.as_ref() {
            return Ok(Arc::clone(f));
        }
        let f = Arc::new(self.matrix.factor()?);
        *slot = Some(Arc::clone(&f));
        Ok(f)
    }

    /// Solves `H_K u = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(rhs)
    }

    /// `g = H_K^{-1} 1_x`, the level-`K` Green function with pole `x`.
    pub fn solve_green(&self, x: &Vertex) -> Result<RegionFunction> {
        let i = self.index(x)?;
        let mut rhs = vec![0.0; self.len()];
        rhs[i] = 1.0;
        let g = self.solve(&rhs)?;
        RegionFunction::new(Arc::clone(&self.region), g)
    }

    /// Smallest eigenpair of `m^{-1} H_K` by inverse iteration.
    pub fn lambda_min(&self) -> Result<EigenPair> {
        let pair = smallest_pencil(&self.matrix, &self.measure)?;
        Ok(EigenPair {
            value: pair.value,
            vector: RegionFunction::new(Arc::clone(&self.region), pair.vector)?,
            residual: pair.residual,
            iterations: pair.iterations,
        })
    }

    /// `inf_φ h(φ) / Σ w φ²` over `φ` supported in `K`, the bottom of the
    /// pencil `(H_K, diag w)`.
    ///
    /// When `w` vanishes somewhere the infimum is taken over all of `C_c(K)`
    /// with only the support of `w` in the denominator; `H_K` must then be
    /// positive definite.
    pub fn generalized_lambda_min(&self, w: &[f64]) -> Result<PencilPair> {
        if w.len() != self.len() {
            return Err(Error::Domain("weight length does not match the region".into()));
        }
        smallest_pencil(&self.matrix, w)
    }

    /// Solves `(H_K − λ m) u = m f` for `λ` below the bottom of the spectrum.
    pub fn resolvent_apply(&self, lambda: f64, f: &RegionFunction) -> Result<RegionFunction> {
        self.check_function(f)?;
        let factor = self
            .matrix
            .shifted(lambda, &self.measure)
            .factor()
            .map_err(|e| match e {
                Error::Indefinite { .. } => Error::SpectralParameter { lambda },
                other => other,
            })?;
        let rhs: Vec<f64> = f.values().iter().zip(&self.measure).map(|(f, m)| f * m).collect();
        let u = factor.solve(&rhs).map_err(|e| match e {
            Error::Indefinite { .. } => Error::SpectralParameter { lambda },
            other => other,
        })?;
        RegionFunction::new(Arc::clone(&self.region), u)
    }

    /// Semigroup `t ↦ e^{-t m^{-1} H_K}`, reusable across many times.
    pub fn heat_semigroup(&self) -> HeatSemigroup {
        HeatSemigroup::new(self)
    }

    /// `e^{-t m^{-1} H_K} f`.
    pub fn heat_apply(&self, t: f64, f: &RegionFunction) -> Result<RegionFunction> {
        self.check_function(f)?;
        let u = self.heat_semigroup().apply(t, f.values())?;
        RegionFunction::new(Arc::clone(&self.region), u)
    }

    /// `m^{-1/2} H_K m^{-1/2}`.
    pub fn symmetrized(&self) -> SparseSym {
        let s: Vec<f64> = self.measure.iter().map(|m| 1.0 / m.sqrt()).collect();
        self.matrix.scaled(&s)
    }

    /// Full spectral decomposition of `m^{-1/2} H_K m^{-1/2}`, ascending.
    pub fn spectral_decomposition(&self) -> SpectralDecomposition {
        SpectralDecomposition::new(&self.symmetrized().to_dense())
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn new(matrix: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(matrix.clone());
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(k).clone_owned();
            if v.sum() < 0.0 {
                v = -v;
            }
            vectors.set_column(col, &v);
        }
        SpectralDecomposition { values, vectors }
    }
}

#[derive(Clone, Debug)]
enum HeatKind {
    Dense(SpectralDecomposition),
    Krylov(SparseSym),
}

/// The heat semigroup of one system.
#[derive(Clone, Debug)]
pub struct HeatSemigroup {
    sqrt_m: Vec<f64>,
    kind: HeatKind,
}

impl HeatSemigroup {
    fn new(system: &DirichletSystem) -> Self {
        let sqrt_m = system.measure.iter().map(|m| m.sqrt()).collect();
        let kind = if system.len() < DENSE_HEAT_SIZE {
            HeatKind::Dense(system.spectral_decomposition())
        } else {
            HeatKind::Krylov(system.symmetrized())
        };
        HeatSemigroup { sqrt_m, kind }
    }

    pub fn apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("time {t} must be finite and nonnegative")));
        }
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        let v: Vec<f64> = f.iter().zip(&self.sqrt_m).map(|(f, s)| f * s).collect();
        let out = match &self.kind {
            HeatKind::Dense(d) => {
                let v = DVector::from_vec(v);
                let mut coeffs = d.vectors.tr_mul(&v);
                for (c, lam) in coeffs.iter_mut().zip(d.values.iter()) {
                    *c *= (-t * lam).exp();
                }
                (&d.vectors * coeffs).iter().copied().collect::<Vec<f64>>()
            }
            HeatKind::Krylov(s) => expm::krylov_heat(s, &v, t, HEAT_TOLERANCE)?,
        };
        Ok(out.iter().zip(&self.sqrt_m).map(|(u, s)| u / s).collect())
    }
}

/// Summary of a solve, for reports.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveInfo {
    pub vertices: usize,
    pub direct: bool,
}
