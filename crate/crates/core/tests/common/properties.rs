//! Property bodies shared by the suites and the acceptance target.

use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;
use sgl_core::criticality::{capacity_series, green_series, Monotonicity, MONOTONE_SLACK};
use sgl_core::forms::{apply_h, gst_form, gst_identity_residual, quad_form};
use sgl_core::oracle::{dense_green, dense_spectrum};
use sgl_core::solver::{assemble, DirichletSystem};
use sgl_core::spectral::{harnack_constant, lambda0_series, HarnackInstance};
use sgl_core::{ExhaustionFamily, Field, GraphModel, RegionFunction, Vertex};

use super::{function, values, whole, GraphCase};

pub type Outcome = Result<(), TestCaseError>;

/// The random graph with a random measure in `[0.5, 2)`.
pub fn weighted(case: &GraphCase) -> GraphModel {
    let model = case.model();
    let vertices = model.finite_vertices().unwrap().to_vec();
    let m = values(case.seed ^ 0x6d, vertices.len(), 0.5, 2.0);
    model.with_measure(Field::Table {
        default: 1.0,
        values: vertices.into_iter().zip(m).collect(),
    })
}

pub fn system(model: GraphModel, level: usize) -> (ExhaustionFamily, DirichletSystem) {
    let family = ExhaustionFamily::anchored(model).unwrap();
    let region = family.region(level).unwrap();
    let system = DirichletSystem::new(family.model(), region).unwrap();
    (family, system)
}

/// The `k` vertices of level `n` closest to the anchor, a connected set.
pub fn window(family: &ExhaustionFamily, n: usize, k: usize) -> Vec<Vertex> {
    let region = family.region(n).unwrap();
    let dist = region.distances_from(region.index_of(&family.anchor()).unwrap());
    let mut order: Vec<usize> = (0..region.len()).collect();
    order.sort_by_key(|&i| (dist[i], i));
    order.into_iter().take(k).map(|i| region.vertices()[i]).collect()
}

pub fn green_formula(case: GraphCase, level: usize, seed: u64) -> Outcome {
    let family = case.family();
    let model = family.model();
    let region = family.region(level).unwrap();
    let phi = function(&region, seed, -1.0, 1.0);
    let psi = function(&region, seed ^ 1, -1.0, 1.0);
    let mut sum = 0.0;
    let mut scale = 0.0;
    for (i, x) in region.vertices().iter().enumerate() {
        sum += apply_h(model, &phi, x).unwrap() * psi.values()[i];
        let size = model.weighted_degree(x).unwrap() + model.potential(x).abs();
        scale += 2.0 * size * phi.max_abs() * psi.values()[i].abs();
    }
    let scale = f64::max(scale, 1.0);
    let a = quad_form(model, &phi, &psi).unwrap();
    let b = quad_form(model, &psi, &phi).unwrap();
    prop_assert!((a - sum).abs() <= 1e-12 * scale, "gap {} scale {scale}", (a - sum).abs());
    prop_assert!((a - b).abs() <= 1e-13 * scale);
    Ok(())
}

pub fn gst_identity(case: GraphCase, seed: u64) -> Outcome {
    let model = case.model();
    let region = whole(&model);
    let spectrum = dense_spectrum(&model, &region).unwrap();
    let lambda = spectrum.values[0];
    let v_values: Vec<f64> = (0..region.len()).map(|i| spectrum.vectors[(i, 0)]).collect();
    prop_assert!(v_values.iter().all(|v| *v > 0.0), "bottom eigenvector not positive");
    let lookup = Arc::clone(&region);
    let v = move |x: &Vertex| v_values[lookup.index_of(x).unwrap()];
    let f = move |_: &Vertex| lambda;
    let phi = function(&region, seed, -1.0, 1.0);
    let residual = gst_identity_residual(&model, &v, &f, &phi, 1e-8).unwrap();
    let h = quad_form(&model, &phi, &phi).unwrap();
    let scale = h.abs() + phi.values().iter().map(|p| p * p).sum::<f64>() * (1.0 + lambda.abs());
    prop_assert!(residual <= 1e-10 * scale.max(1.0), "residual {residual}");
    let quotient = phi.map(|x, p| p / v(x)).unwrap();
    prop_assert!(gst_form(&model, &v, &quotient).unwrap() >= 0.0);
    let potential: f64 = phi.values().iter().map(|p| lambda * p * p).sum();
    prop_assert!(h >= potential - residual - 1e-12 * scale);
    Ok(())
}

pub fn green_vs_oracle(case: GraphCase, level: usize) -> Outcome {
    let (family, system) = system(case.model(), level);
    let region = Arc::clone(system.region());
    let probes: Vec<Vertex> = region.vertices().iter().take(4).copied().collect();
    let columns: Vec<RegionFunction> = probes.iter().map(|x| system.solve_green(x).unwrap()).collect();
    for (x, g) in probes.iter().zip(&columns) {
        let oracle = dense_green(family.model(), &region, x).unwrap();
        let scale = oracle.max_abs();
        for (a, b) in g.values().iter().zip(oracle.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }
    for (i, x) in probes.iter().enumerate() {
        for (j, y) in probes.iter().enumerate() {
            let (gxy, gyx) = (columns[i].at(y), columns[j].at(x));
            prop_assert!((gxy - gyx).abs() <= 1e-10 * gxy.abs().max(gyx.abs()).max(1e-300));
        }
    }
    Ok(())
}

pub fn series_monotone(family: &ExhaustionFamily, x: &Vertex, n_max: usize) -> Outcome {
    let green = green_series(family, x, x, n_max).unwrap();
    let cap = capacity_series(family, x, n_max).unwrap();
    let lambda0 = lambda0_series(family, n_max).unwrap();
    prop_assert_eq!(green.expected_monotonicity, Monotonicity::Increasing);
    prop_assert_eq!(cap.expected_monotonicity, Monotonicity::Decreasing);
    prop_assert!(green.monotonicity_violation(MONOTONE_SLACK).is_none(), "{:?}", green.values);
    prop_assert!(cap.monotonicity_violation(MONOTONE_SLACK).is_none(), "{:?}", cap.values);
    prop_assert!(lambda0.monotonicity_violation(MONOTONE_SLACK).is_none(), "{:?}", lambda0.values);
    for (g, c) in green.values.iter().zip(&cap.values) {
        prop_assert!((g * c - 1.0).abs() <= 1e-10);
    }
    Ok(())
}

pub fn minimum_principle(case: GraphCase, level: usize, zero_fraction: f64) -> Outcome {
    let family = case.family();
    let region = family.region(level).unwrap();
    if region.boundary_edges().is_empty() {
        return Ok(());
    }
    let system = DirichletSystem::new(family.model(), Arc::clone(&region)).unwrap();
    let raw = values(case.seed, region.boundary_edges().len(), 0.0, 1.0);
    let mut rhs = vec![0.0; region.len()];
    let mut outer = HashMap::new();
    for ((i, y, b), r) in region.boundary_edges().iter().zip(raw) {
        // One boundary value per outer vertex, zero with probability `zero_fraction`.
        let g = *outer.entry(*y).or_insert(if r < zero_fraction { 0.0 } else { r });
        rhs[*i] += b * g;
    }
    let u = system.solve(&rhs).unwrap();
    prop_assert!(u.iter().all(|v| *v >= 0.0), "{u:?}");
    if rhs.iter().any(|r| *r > 0.0) && region.is_connected() {
        prop_assert!(u.iter().all(|v| *v > 0.0));
    }
    Ok(())
}

pub fn resolvent_monotone(case: GraphCase, level: usize, a: f64, b: f64) -> Outcome {
    let (_, system) = system(weighted(&case), level);
    let lambda_min = system.lambda_min().unwrap().value;
    let (lo, hi) = (a.min(b), a.max(b));
    // λ ≤ μ < λ_min, spread over [λ_min − 3, λ_min).
    let lambda = lambda_min - 3.0 * (1.0 - lo) - 1e-3;
    let mu = lambda_min - 3.0 * (1.0 - hi) - 1e-3;
    let f = function(system.region(), case.seed, 0.0, 1.0);
    let u = system.resolvent_apply(lambda, &f).unwrap();
    let v = system.resolvent_apply(mu, &f).unwrap();
    for (x, y) in u.values().iter().zip(v.values()) {
        prop_assert!(*x >= 0.0);
        prop_assert!(*x <= y + 1e-10 * y.abs().max(1.0));
    }
    Ok(())
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

pub fn laplace_transform(case: GraphCase, level: usize) -> Outcome {
    let (_, system) = system(weighted(&case), level);
    let lambda_min = system.lambda_min().unwrap().value;
    let lambda = lambda_min - 1.0;
    let f = function(system.region(), case.seed, 0.0, 1.0);
    let expected = system.resolvent_apply(lambda, &f).unwrap();
    // Tail beyond T is bounded by e^{(λ − λ_min)T}‖f‖/(λ_min − λ) < 1e-8.
    let t_end = 20.0;
    let semigroup = system.heat_semigroup();
    let width = 0.05;
    let mut integral = vec![0.0; system.len()];
    for panel in 0..(t_end / width) as usize {
        let mid = (panel as f64 + 0.5) * width;
        for (node, weight) in GL5 {
            let t = mid + 0.5 * width * node;
            let heat = semigroup.apply(t, f.values()).unwrap();
            let factor = 0.5 * width * weight * (t * lambda).exp();
            for (acc, h) in integral.iter_mut().zip(&heat) {
                *acc += factor * h;
            }
        }
    }
    let scale = expected.max_abs().max(1.0);
    for (a, b) in integral.iter().zip(expected.values()) {
        prop_assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
    }
    Ok(())
}

pub fn harnack_sound(case: GraphCase, k: usize, shrink: f64, shift: f64) -> Outcome {
    let family = case.family();
    let big = assemble(&family, 3).unwrap();
    let w = window(&family, 3, k);
    let f = big.lambda_min().unwrap().value * shrink - shift;
    let bound = harnack_constant(&HarnackInstance::new(family.model(), &w, &Field::Constant(f)).unwrap());
    let Some(c) = bound.constant else {
        return Ok(());
    };
    // Nonnegative supersolutions: conic combinations of resolvent columns.
    let columns: Vec<Vec<f64>> = (0..big.len().min(12))
        .map(|j| {
            let g = RegionFunction::indicator(Arc::clone(big.region()), &big.region().vertices()[j]).unwrap();
            big.resolvent_apply(f, &g).unwrap().into_values()
        })
        .collect();
    for trial in 0..100u64 {
        let coeffs = values(case.seed ^ trial, columns.len(), 0.0, 1.0);
        let mut u = vec![0.0; big.len()];
        for (j, (col, c)) in columns.iter().zip(&coeffs).enumerate() {
            if (trial >> (j % 8)) & 1 == 0 {
                continue;
            }
            for (acc, v) in u.iter_mut().zip(col) {
                *acc += c * v;
            }
        }
        if u.iter().all(|v| *v == 0.0) {
            continue;
        }
        let u = RegionFunction::new(Arc::clone(big.region()), u).unwrap();
        for x in &w {
            let action = apply_h(family.model(), &u, x).unwrap() - f * u.at(x);
            prop_assert!(action >= -1e-10 * u.max_abs());
        }
        let on_w: Vec<f64> = w.iter().map(|x| u.at(x)).collect();
        let max = on_w.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        let min = on_w.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        prop_assert!(max <= c * min * (1.0 + 1e-9), "max {max} > {c} * {min}");
    }
    Ok(())
}

pub fn harnack_monotone(case: GraphCase, k: usize, f: f64, df: f64) -> Outcome {
    let family = case.family();
    let w = window(&family, 3, k);
    let low = harnack_constant(&HarnackInstance::new(family.model(), &w, &Field::Constant(f)).unwrap());
    let high = harnack_constant(&HarnackInstance::new(family.model(), &w, &Field::Constant(f + df)).unwrap());
    if let (Some(a), Some(b)) = (low.constant, high.constant) {
        prop_assert!(b <= a * (1.0 + 1e-12), "{b} > {a}");
    }
    if high.constant.is_some() {
        prop_assert!(low.constant.is_some());
    }
    Ok(())
}
