//! The formal operator `H = L + q`, its energy form `h`, and the ground
//! state transform `h_v`.
//!
//! Everything here works directly from the model's neighbor enumeration and
//! never touches an assembled matrix, so it doubles as an independent check
//! on [`crate::solver`].

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{FiniteRegion, GraphModel, Vertex};

/// A function on a finite region, implicitly zero outside it.
#[derive(Clone, Debug)]
pub struct RegionFunction {
    region: Arc<FiniteRegion>,
    values: Vec<f64>,
}

impl RegionFunction {
    pub fn new(region: Arc<FiniteRegion>, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::Domain(format!(
                "function has {} values for a region of {} vertices",
                values.len(),
                region.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite function value {v}")));
        }
        Ok(RegionFunction { region, values })
    }

    pub fn zeros(region: Arc<FiniteRegion>) -> Self {
        let n = region.len();
        RegionFunction {
            region,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(region: Arc<FiniteRegion>, f: impl Fn(&Vertex) -> f64) -> Result<Self> {
        let values = region.vertices().iter().map(f).collect();
        Self::new(region, values)
    }

    /// `1_{x}` on the region.
    pub fn indicator(region: Arc<FiniteRegion>, x: &Vertex) -> Result<Self> {
        let i = region.index_of(x).ok_or(Error::UnknownVertex(*x))?;
        let mut f = Self::zeros(region);
        f.values[i] = 1.0;
        Ok(f)
    }

    pub fn region(&self) -> &Arc<FiniteRegion> {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `x`; zero off the region.
    pub fn at(&self, x: &Vertex) -> f64 {
        self.region.index_of(x).map_or(0.0, |i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(&Vertex, f64) -> f64) -> Result<Self> {
        let values = self
            .region
            .vertices()
            .iter()
            .zip(&self.values)
            .map(|(x, v)| f(x, *v))
            .collect();
        Self::new(Arc::clone(&self.region), values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RegionFunction {
            region: Arc::clone(&self.region),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn support(&self) -> impl Iterator<Item = (Vertex, f64)> + '_ {
        self.region
            .vertices()
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v != 0.0)
            .map(|(x, v)| (*x, *v))
    }
}

fn apply_with(model: &GraphModel, x: &Vertex, u: impl Fn(&Vertex) -> f64) -> Result<f64> {
    let ux = u(x);
    let mut acc = model.potential(x) * ux;
    for (y, b) in model.neighbors(x)? {
        acc += b * (ux - u(&y));
    }
    Ok(acc)
}

/// `(Hu)(x) = Σ_y b(x,y)(u(x) − u(y)) + q(x)u(x)` with `u = 0` off its region.
pub fn apply_h(model: &GraphModel, u: &RegionFunction, x: &Vertex) -> Result<f64> {
    apply_with(model, x, |y| u.at(y))
}

/// `(Hu)(x)` for a function defined on the whole vertex universe.
pub fn apply_h_global(model: &GraphModel, u: &dyn Fn(&Vertex) -> f64, x: &Vertex) -> Result<f64> {
    apply_with(model, x, u)
}

/// Merged support of two region functions, as vertex ↦ (φ, ψ).
fn joint_support(phi: &RegionFunction, psi: &RegionFunction) -> HashMap<Vertex, (f64, f64)> {
    let mut joint: HashMap<Vertex, (f64, f64)> = HashMap::new();
    for (x, v) in phi.support() {
        joint.entry(x).or_default().0 = v;
    }
    for (x, v) in psi.support() {
        joint.entry(x).or_default().1 = v;
    }
    joint
}

/// `h(φ, ψ) = ½ Σ b(x,y)(φ(x)−φ(y))(ψ(x)−ψ(y)) + Σ q φ ψ`.
///
/// The functions may live on different regions; each is extended by zero.
/// Every unordered pair is summed once.
pub fn quad_form(model: &GraphModel, phi: &RegionFunction, psi: &RegionFunction) -> Result<f64> {
    let joint = joint_support(phi, psi);
    let mut keys: Vec<&Vertex> = joint.keys().collect();
    keys.sort();
    let mut acc = 0.0;
    let mut buf = Vec::new();
    for x in keys {
        let (px, sx) = joint[x];
        acc += model.potential(x) * px * sx;
        model.neighbors_into(x, &mut buf)?;
        for &(y, b) in &buf {
            match joint.get(&y) {
                Some(&(py, sy)) => {
                    if *x < y {
                        acc += b * (px - py) * (sx - sy);
                    }
                }
                None => acc += b * px * sx,
            }
        }
    }
    Ok(acc)
}

/// `h(φ) = h(φ, φ)`.
pub fn energy(model: &GraphModel, phi: &RegionFunction) -> Result<f64> {
    quad_form(model, phi, phi)
}

fn positive(v: &dyn Fn(&Vertex) -> f64, x: &Vertex) -> Result<f64> {
    let value = v(x);
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("v({x}) = {value} is not strictly positive")))
    }
}

/// Ground state transform `h_v(φ) = ½ Σ b(x,y) v(x) v(y) (φ(x) − φ(y))²`.
pub fn gst_form(model: &GraphModel, v: &dyn Fn(&Vertex) -> f64, phi: &RegionFunction) -> Result<f64> {
    let support: HashMap<Vertex, f64> = phi.support().collect();
    let mut keys: Vec<&Vertex> = support.keys().collect();
    keys.sort();
    let mut acc = 0.0;
    let mut buf = Vec::new();
    for x in keys {
        let px = support[x];
        let vx = positive(v, x)?;
        model.neighbors_into(x, &mut buf)?;
        for &(y, b) in &buf {
            let vy = positive(v, &y)?;
            match support.get(&y) {
                Some(&py) => {
                    if *x < y {
                        acc += b * vx * vy * (px - py).powi(2);
                    }
                }
                None => acc += b * vx * vy * px * px,
            }
        }
    }
    Ok(acc)
}

/// `|h(φ) − h_v(φ/v) − Σ f φ²|` for `v > 0` with `Hv = f v`.
///
/// The eigen-equation is checked on the support of φ and its neighbors; a
/// mismatch beyond `tol` (relative to `|Hv| + |f v|`) is a precondition error.
pub fn gst_identity_residual(
    model: &GraphModel,
    v: &dyn Fn(&Vertex) -> f64,
    f: &dyn Fn(&Vertex) -> f64,
    phi: &RegionFunction,
    tol: f64,
) -> Result<f64> {
    let mut closure: Vec<Vertex> = Vec::new();
    for (x, _) in phi.support() {
        closure.push(x);
        closure.extend(model.neighbors(&x)?.into_iter().map(|(y, _)| y));
    }
    closure.sort();
    closure.dedup();
    for x in &closure {
        let hv = apply_h_global(model, v, x)?;
        let fv = f(x) * positive(v, x)?;
        if (hv - fv).abs() > tol * (hv.abs() + fv.abs()).max(1.0) {
            return Err(Error::Precondition(format!(
                "Hv = {hv} but f·v = {fv} at vertex {x}"
            )));
        }
    }
    let quotient = phi.map(|x, p| p / v(x))?;
    let h = energy(model, phi)?;
    let hv = gst_form(model, v, &quotient)?;
    let potential: f64 = phi.support().map(|(x, p)| f(&x) * p * p).sum();
    Ok((h - hv - potential).abs())
}

/// Partial sums of the extended form `h̃_v(g/v)` on one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtendedFormEstimate {
    /// `½ Σ_{inner edges} b v(x) v(y) (g(x)/v(x) − g(y)/v(y))²`.
    pub interior: f64,
    /// Contribution of `∂K` when `g` is extended by zero; for `g = v` this is
    /// the cut energy `Σ_{∂K} b(x,y) v(x) v(y)`.
    pub boundary: f64,
    /// Always true: the value is a truncation, never the full sum over `X`.
    pub truncated: bool,
}

impl ExtendedFormEstimate {
    pub fn total(&self) -> f64 {
        self.interior + self.boundary
    }
}

pub fn extended_form(v: &dyn Fn(&Vertex) -> f64, g: &RegionFunction) -> Result<ExtendedFormEstimate> {
    let region = g.region();
    let vs: Vec<f64> = region
        .vertices()
        .iter()
        .map(|x| positive(v, x))
        .collect::<Result<_>>()?;
    let ratio: Vec<f64> = g.values().iter().zip(&vs).map(|(g, v)| g / v).collect();
    let interior = region
        .induced_edges()
        .iter()
        .map(|&(i, j, b)| b * vs[i] * vs[j] * (ratio[i] - ratio[j]).powi(2))
        .sum();
    let mut boundary = 0.0;
    for (i, y, b) in region.boundary_edges() {
        let vy = positive(v, y)?;
        boundary += b * vs[*i] * vy * ratio[*i].powi(2);
    }
    Ok(ExtendedFormEstimate {
        interior,
        boundary,
        truncated: true,
    })
}
