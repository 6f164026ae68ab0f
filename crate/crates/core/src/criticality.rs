//! Exhaustion limits: Green-function and capacity series, the
//! critical/subcritical classification, ground states, null-sequences,
//! minimal Green functions and weight criticality.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{apply_h, energy, RegionFunction};
use crate::graph::{ExhaustionFamily, Field, Vertex};
use crate::solver::{assemble, DirichletSystem};

/// Slack on monotonicity of computed series.
pub const MONOTONE_SLACK: f64 = 1e-10;
/// A level whose bottom eigenvalue is above `-NONNEG_TOLERANCE` counts as
/// nonnegative.
pub const NONNEG_TOLERANCE: f64 = 1e-10;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

pub const CLASSIFICATION_CAVEAT: &str = "Exhaustion evidence is necessary but finite: the verdict \
describes the computed levels and is not a proof about the infinite graph.";
pub const UNIFORM_CAVEAT: &str = "A finite sample cannot certify the supremum over all vertices; \
this report is evidence only.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

/// Values of some quantity along the levels of an exhaustion.
#[derive(Clone, Debug, Serialize)]
pub struct EvidenceSeries {
    pub name: String,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
    pub expected_monotonicity: Monotonicity,
    /// Least-squares fit `c + a/n` over the last quarter, when defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extrapolated_limit: Option<f64>,
}

impl EvidenceSeries {
    pub fn new(name: &str, levels: Vec<usize>, values: Vec<f64>, expected: Monotonicity) -> Self {
        let mut series = EvidenceSeries {
            name: name.to_string(),
            levels,
            values,
            expected_monotonicity: expected,
            extrapolated_limit: None,
        };
        let tail = series.tail_start();
        series.extrapolated_limit = richardson_limit(&series.levels[tail..], &series.values[tail..]);
        series
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Index where the last quarter of the series begins.
    pub fn tail_start(&self) -> usize {
        let n = self.values.len();
        if n < 2 {
            return 0;
        }
        n - 1 - (n / 4).max(1)
    }

    /// Relative change `|v_start − v_last| / |v_last|` across the last quarter.
    pub fn tail_change(&self) -> f64 {
        let Some(last) = self.last() else { return f64::NAN };
        let first = self.values[self.tail_start()];
        if first == last {
            return 0.0;
        }
        (first - last).abs() / last.abs()
    }

    /// First index violating the declared monotonicity, if any.
    pub fn monotonicity_violation(&self, slack: f64) -> Option<usize> {
        let tol = |a: f64, b: f64| slack * a.abs().max(b.abs()).max(1.0);
        self.values.windows(2).position(|w| match self.expected_monotonicity {
            Monotonicity::Increasing => w[1] < w[0] - tol(w[0], w[1]),
            Monotonicity::Decreasing => w[1] > w[0] + tol(w[0], w[1]),
            Monotonicity::None => false,
        })
        .map(|i| i + 1)
    }
}

/// Least-squares fit of `v ≈ c + a/n` over the points with `n > 0`; returns `c`.
pub fn richardson_limit(levels: &[usize], values: &[f64]) -> Option<f64> {
    let points: Vec<(f64, f64)> = levels
        .iter()
        .zip(values)
        .filter(|(n, v)| **n > 0 && v.is_finite())
        .map(|(n, v)| (1.0 / *n as f64, *v))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(my - sxy / sxx * mx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Critical,
    Subcritical,
    #[serde(rename = "Positive-critical")]
    PositiveCritical,
    #[serde(rename = "Null-critical")]
    NullCritical,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Critical => "Critical",
            Verdict::Subcritical => "Subcritical",
            Verdict::PositiveCritical => "Positive-critical",
            Verdict::NullCritical => "Null-critical",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// Thresholds of the finite-data decision rules.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecisionRule {
    /// Largest relative change across the last quarter counted as a plateau.
    pub plateau_eps: f64,
    /// Smallest ratio `cap_first / cap_last` counted as sustained decay.
    pub decay_floor: f64,
    /// Relative agreement between the `c + a/n` extrapolant and the last
    /// value that also counts as a plateau (and the growth threshold for
    /// divergent partial sums).
    pub extrapolation_tol: f64,
    /// Certify `h ≥ 0` on every level before trusting the series.
    pub certify: bool,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule {
            plateau_eps: 1e-6,
            decay_floor: 5.0,
            extrapolation_tol: 0.05,
            certify: true,
        }
    }
}

impl DecisionRule {
    fn plateaus(&self, series: &EvidenceSeries) -> bool {
        let Some(last) = series.last() else { return false };
        if series.values.len() >= 2 && series.tail_change() <= self.plateau_eps {
            return true;
        }
        match series.extrapolated_limit {
            Some(c) => c > 0.0 && (c - last).abs() <= self.extrapolation_tol * last.abs(),
            None => false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RuleParameters {
    pub levels: Vec<usize>,
    pub plateau_eps: f64,
    pub decay_floor: f64,
    pub extrapolation_tol: f64,
    pub tail_change: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extrapolated_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub evidence: Vec<EvidenceSeries>,
    pub parameters: RuleParameters,
    pub caveat: String,
}

/// Levels `first..=n_max` of the family at which `K_n` contains all of `poles`.
pub fn levels_containing(family: &ExhaustionFamily, poles: &[Vertex], n_max: usize) -> Result<Vec<usize>> {
    let first = family.first_level();
    if n_max < first {
        return Err(Error::Domain(format!("level {n_max} is below the first level {first}")));
    }
    let top = family.region(n_max)?;
    if let Some(p) = poles.iter().find(|p| !top.contains(p)) {
        return Err(Error::Precondition(format!("{p} is not in the level-{n_max} region")));
    }
    // Regions are nested, so the admissible levels form a tail.
    let mut lo = first;
    let mut hi = n_max;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let region = family.region(mid)?;
        if poles.iter().all(|p| region.contains(p)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((lo..=n_max).collect())
}

/// Solves for the Green columns at `poles` on one level, certifying `h ≥ 0`
/// first. `None` marks a level where `H_K` is singular but nonnegative, so
/// the Green function is infinite.
fn level_columns(
    family: &ExhaustionFamily,
    n: usize,
    poles: &[Vertex],
    certify: bool,
) -> Result<(DirichletSystem, Option<Vec<RegionFunction>>)> {
    let system = assemble(family, n)?;
    if let Some(p) = poles.iter().find(|p| !system.region().contains(p)) {
        return Err(Error::Precondition(format!("{p} is not in the level-{n} region")));
    }
    let singular = |system: &DirichletSystem| -> Result<()> {
        let lambda = system.lambda_min()?.value;
        if lambda < -NONNEG_TOLERANCE {
            Err(Error::NotNonnegative { level: n, lambda_min: lambda })
        } else {
            Ok(())
        }
    };
    match system.factor() {
        Ok(factor) => {
            if certify && !factor.is_direct() {
                let lambda = system.lambda_min()?.value;
                if lambda < -NONNEG_TOLERANCE {
                    return Err(Error::NotNonnegative { level: n, lambda_min: lambda });
                }
            }
            let mut columns = Vec::with_capacity(poles.len());
            for p in poles {
                match system.solve_green(p) {
                    Ok(g) => columns.push(g),
                    Err(Error::Indefinite { .. }) => {
                        singular(&system)?;
                        return Ok((system, None));
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((system, Some(columns)))
        }
        Err(Error::Indefinite { .. }) => {
            singular(&system)?;
            Ok((system, None))
        }
        Err(e) => Err(e),
    }
}

fn green_values(family: &ExhaustionFamily, x: &Vertex, y: &Vertex, levels: &[usize], certify: bool) -> Result<Vec<f64>> {
    levels
        .par_iter()
        .map(|&n| {
            let (_, columns) = level_columns(family, n, &[*x], certify)?;
            Ok(columns.map_or(f64::INFINITY, |c| c[0].at(y)))
        })
        .collect()
}

/// `G_n(x, y)` at the given levels.
pub fn green_series_at(family: &ExhaustionFamily, x: &Vertex, y: &Vertex, levels: &[usize]) -> Result<EvidenceSeries> {
    let values = green_values(family, x, y, levels, false)?;
    Ok(EvidenceSeries::new("green", levels.to_vec(), values, Monotonicity::Increasing))
}

/// `G_n(x, y)` for every level up to `n_max` whose region holds `x` and `y`.
pub fn green_series(family: &ExhaustionFamily, x: &Vertex, y: &Vertex, n_max: usize) -> Result<EvidenceSeries> {
    let levels = levels_containing(family, &[*x, *y], n_max)?;
    green_series_at(family, x, y, &levels)
}

fn capacity_from(levels: Vec<usize>, green: &[f64]) -> EvidenceSeries {
    let values = green.iter().map(|g| 1.0 / g).collect();
    EvidenceSeries::new("capacity", levels, values, Monotonicity::Decreasing)
}

/// `cap_n(x) = 1 / G_n(x, x)` at the given levels.
pub fn capacity_series_at(family: &ExhaustionFamily, x: &Vertex, levels: &[usize]) -> Result<EvidenceSeries> {
    let green = green_values(family, x, x, levels, false)?;
    Ok(capacity_from(levels.to_vec(), &green))
}

pub fn capacity_series(family: &ExhaustionFamily, x: &Vertex, n_max: usize) -> Result<EvidenceSeries> {
    let levels = levels_containing(family, &[*x], n_max)?;
    capacity_series_at(family, x, &levels)
}

/// Critical/subcritical verdict from the capacity series at `x`.
///
/// Subcritical when the capacity plateaus at a positive value, Critical when
/// it shrinks by at least `decay_floor` without a plateau, else Inconclusive.
pub fn classify_at(family: &ExhaustionFamily, x: &Vertex, levels: &[usize], rule: &DecisionRule) -> Result<ClassificationReport> {
    let green = green_values(family, x, x, levels, rule.certify)?;
    let capacity = capacity_from(levels.to_vec(), &green);
    let decay_ratio = match (capacity.values.first(), capacity.last()) {
        (Some(first), Some(last)) if capacity.values.len() >= 2 => Some(first / last),
        _ => None,
    };
    let verdict = if rule.plateaus(&capacity) {
        Verdict::Subcritical
    } else if decay_ratio.is_some_and(|r| r >= rule.decay_floor) {
        Verdict::Critical
    } else {
        Verdict::Inconclusive
    };
    let green_series = EvidenceSeries::new("green", levels.to_vec(), green, Monotonicity::Increasing);
    Ok(ClassificationReport {
        verdict,
        parameters: RuleParameters {
            levels: levels.to_vec(),
            plateau_eps: rule.plateau_eps,
            decay_floor: rule.decay_floor,
            extrapolation_tol: rule.extrapolation_tol,
            tail_change: capacity.tail_change(),
            extrapolated_limit: capacity.extrapolated_limit,
            decay_ratio,
        },
        evidence: vec![capacity, green_series],
        caveat: CLASSIFICATION_CAVEAT.to_string(),
    })
}

pub fn classify(family: &ExhaustionFamily, x: &Vertex, n_max: usize, rule: &DecisionRule) -> Result<ClassificationReport> {
    let levels = levels_containing(family, &[*x], n_max)?;
    classify_at(family, x, &levels, rule)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundStateMethod {
    /// Bottom Dirichlet eigenvector of `K_N`, scaled to 1 at the anchor.
    BottomEigenvector,
    /// Normalized Green column `G_N(o,·)/G_N(o,o)`.
    GreenColumn,
}

#[derive(Clone, Debug)]
pub struct GroundStateEstimate {
    pub level: usize,
    pub method: GroundStateMethod,
    /// The estimate, equal to 1 at `o`.
    pub profile: RegionFunction,
    /// `G_N(o,·)/G_N(o,o)`; `None` when `H_{K_N}` is singular.
    pub green_profile: Option<RegionFunction>,
    /// Bottom eigenvalue of `K_N` in the eigenvector method.
    pub eigenvalue: Option<f64>,
    /// Probe window: the ball of radius `≤ 10` around the family anchor.
    pub window: Vec<Vertex>,
    /// `max_window |ψ_N − ψ_{N−1}|`.
    pub window_change: f64,
}

fn ground_profile(
    family: &ExhaustionFamily,
    o: &Vertex,
    n: usize,
    method: GroundStateMethod,
) -> Result<(RegionFunction, Option<RegionFunction>, Option<f64>)> {
    let (system, columns) = level_columns(family, n, &[*o], false)?;
    let green = columns.map(|c| {
        let g = &c[0];
        g.scaled(1.0 / g.at(o))
    });
    match method {
        GroundStateMethod::GreenColumn => {
            let g = green.clone().ok_or(Error::Precondition(format!(
                "H is singular on level {n}; the Green column is undefined"
            )))?;
            Ok((g, green, None))
        }
        GroundStateMethod::BottomEigenvector => {
            let pair = system.lambda_min()?;
            let at_o = pair.vector.at(o);
            if !(at_o > 0.0) {
                return Err(Error::NoConvergence {
                    method: "ground state",
                    iterations: pair.iterations,
                    residual: pair.residual,
                });
            }
            Ok((pair.vector.scaled(1.0 / at_o), green, Some(pair.value)))
        }
    }
}

/// Ground-state estimate normalized at `o` from level `n`.
///
/// For a `Critical` verdict the estimate is the bottom Dirichlet eigenvector
/// of `K_n`, which converges to the ground state much faster than the Green
/// column (whose profile decays like `1 − |k|/n` on critical lattices); the
/// Green column is still returned alongside. Any other verdict yields the
/// normalized Green column.
pub fn ground_state(family: &ExhaustionFamily, o: &Vertex, n: usize, verdict: Verdict) -> Result<GroundStateEstimate> {
    let method = if verdict == Verdict::Critical {
        GroundStateMethod::BottomEigenvector
    } else {
        GroundStateMethod::GreenColumn
    };
    let levels = levels_containing(family, &[*o], n)?;
    if levels.len() < 2 {
        return Err(Error::Precondition(format!("level {n} leaves no previous level containing {o}")));
    }
    let (profile, green_profile, eigenvalue) = ground_profile(family, o, n, method)?;
    let (previous, _, _) = ground_profile(family, o, n - 1, method)?;
    let radius = (n - 1 - family.first_level()).min(10);
    let window = family.region_vertices(family.first_level() + radius)?;
    let window_change = window
        .iter()
        .map(|x| (profile.at(x) - previous.at(x)).abs())
        .fold(0.0, f64::max);
    Ok(GroundStateEstimate {
        level: n,
        method,
        profile,
        green_profile,
        eigenvalue,
        window,
        window_change,
    })
}

#[derive(Clone, Debug)]
pub struct NullSequenceTerm {
    pub level: usize,
    /// Capacity minimizer `G_n(o,·)/G_n(o,o)`.
    pub function: RegionFunction,
    /// `h(e_n)`, evaluated from the form.
    pub energy: f64,
}

/// Capacity minimizers `e_n` with `e_n(o) = 1` and their energies.
pub fn null_sequence_at(family: &ExhaustionFamily, o: &Vertex, levels: &[usize]) -> Result<Vec<NullSequenceTerm>> {
    levels
        .par_iter()
        .map(|&n| {
            let (_, columns) = level_columns(family, n, &[*o], false)?;
            let g = columns
                .ok_or(Error::Precondition(format!("H is singular on level {n}")))?
                .remove(0);
            let function = g.scaled(1.0 / g.at(o));
            let energy = energy(family.model(), &function)?;
            Ok(NullSequenceTerm { level: n, function, energy })
        })
        .collect()
}

pub fn null_sequence(family: &ExhaustionFamily, o: &Vertex, n_max: usize) -> Result<Vec<NullSequenceTerm>> {
    let levels = levels_containing(family, &[*o], n_max)?;
    null_sequence_at(family, o, &levels)
}

#[derive(Clone, Debug)]
pub struct MinimalGreen {
    pub level: usize,
    pub green: RegionFunction,
    /// `max |H G_N(x,·) − 1_x|` over the interior of `K_{N−1}`.
    pub residual: f64,
    pub residual_tolerance: f64,
    pub passed: bool,
}

/// `G_N(x,·)` as the level-`N` approximant of the minimal Green function.
pub fn minimal_green(family: &ExhaustionFamily, x: &Vertex, n: usize, verdict: Verdict) -> Result<MinimalGreen> {
    match verdict {
        Verdict::Subcritical => {}
        Verdict::Critical => return Err(Error::NoMinimalGreen),
        other => {
            return Err(Error::Precondition(format!(
                "minimal Green function needs a Subcritical verdict, got {other}"
            )))
        }
    }
    let (_, columns) = level_columns(family, n, &[*x], false)?;
    let green = columns.ok_or(Error::NoMinimalGreen)?.remove(0);
    let inner = if n > family.first_level() {
        family.region_vertices(n - 1)?
    } else {
        Vec::new()
    };
    let model = family.model();
    let residual = inner
        .par_iter()
        .filter(|y| {
            let i = green.region().index_of(y).expect("levels are nested");
            green.region().is_interior(i)
        })
        .map(|y| {
            let target = if y == x { 1.0 } else { 0.0 };
            apply_h(model, &green, y).map(|v| (v - target).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(MinimalGreen {
        level: n,
        green,
        residual,
        residual_tolerance: RESIDUAL_TOLERANCE,
        passed: residual <= RESIDUAL_TOLERANCE,
    })
}

/// `inf h(φ)/Σwφ²` over `φ` supported in `K_n`, at the given levels.
///
/// A value below 1 at any level disproves `h − w ≥ 0`.
pub fn weight_nonneg_series_at(family: &ExhaustionFamily, w: &Field, levels: &[usize]) -> Result<EvidenceSeries> {
    let values = levels
        .par_iter()
        .map(|&n| {
            let system = assemble(family, n)?;
            let weights: Vec<f64> = system.region().vertices().iter().map(|x| w.eval(x)).collect();
            Ok(system.generalized_lambda_min(&weights)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvidenceSeries::new("weight-bottom", levels.to_vec(), values, Monotonicity::Decreasing))
}

pub fn weight_nonneg_series(family: &ExhaustionFamily, w: &Field, n_max: usize) -> Result<EvidenceSeries> {
    let first = family.first_level();
    if n_max < first {
        return Err(Error::Domain(format!("level {n_max} is below the first level {first}")));
    }
    let levels: Vec<usize> = (first..=n_max).collect();
    weight_nonneg_series_at(family, w, &levels)
}

/// Null/positive criticality from the partial sums `S_n = Σ_{K_n} ψ² w`.
pub fn weight_criticality_at(
    family: &ExhaustionFamily,
    w: &Field,
    psi: &(dyn Fn(&Vertex) -> f64 + Sync),
    levels: &[usize],
    rule: &DecisionRule,
) -> Result<ClassificationReport> {
    let values = levels
        .par_iter()
        .map(|&n| {
            let vertices = family.region_vertices(n)?;
            Ok(vertices.iter().map(|x| psi(x).powi(2) * w.eval(x)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let sums = EvidenceSeries::new("weighted-mass", levels.to_vec(), values, Monotonicity::Increasing);
    let growth = sums.tail_change();
    let verdict = if rule.plateaus(&sums) {
        Verdict::PositiveCritical
    } else if growth > rule.extrapolation_tol {
        Verdict::NullCritical
    } else {
        Verdict::Inconclusive
    };
    Ok(ClassificationReport {
        verdict,
        parameters: RuleParameters {
            levels: levels.to_vec(),
            plateau_eps: rule.plateau_eps,
            decay_floor: rule.decay_floor,
            extrapolation_tol: rule.extrapolation_tol,
            tail_change: growth,
            extrapolated_limit: sums.extrapolated_limit,
            decay_ratio: None,
        },
        evidence: vec![sums],
        caveat: CLASSIFICATION_CAVEAT.to_string(),
    })
}

pub fn weight_criticality(
    family: &ExhaustionFamily,
    w: &Field,
    psi: &(dyn Fn(&Vertex) -> f64 + Sync),
    n_max: usize,
    rule: &DecisionRule,
) -> Result<ClassificationReport> {
    let first = family.first_level();
    if n_max < first {
        return Err(Error::Domain(format!("level {n_max} is below the first level {first}")));
    }
    let levels: Vec<usize> = (first..=n_max).collect();
    weight_criticality_at(family, w, psi, &levels, rule)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformAssessment {
    /// Sampled diagonal values agree within 25%.
    Bounded,
    /// Spread exceeds 25% and the largest value sits at the sample vertex
    /// farthest from the anchor: evidence against uniform subcriticality.
    UnboundedTrend,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformProbeReport {
    pub level: usize,
    pub sample: Vec<Vertex>,
    pub diagonal: Vec<f64>,
    pub max_green: f64,
    pub capacity_floor: f64,
    /// `max/min − 1` over the sample.
    pub spread: f64,
    pub assessment: UniformAssessment,
    pub caveat: String,
}

/// `G_N(x,x)` over a finite sample of vertices.
pub fn uniform_subcriticality_probe(family: &ExhaustionFamily, sample: &[Vertex], n: usize) -> Result<UniformProbeReport> {
    if sample.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let (system, _) = level_columns(family, n, &[], false)?;
    let region = Arc::clone(system.region());
    let diagonal = sample
        .par_iter()
        .map(|x| {
            if !region.contains(x) {
                return Err(Error::Precondition(format!("{x} is not in the level-{n} region")));
            }
            Ok(system.solve_green(x)?.at(x))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_green = diagonal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_green = diagonal.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = max_green / min_green - 1.0;
    let anchor = region
        .index_of(&family.anchor())
        .ok_or(Error::UnknownVertex(family.anchor()))?;
    let dist = region.distances_from(anchor);
    let distance = |x: &Vertex| dist[region.index_of(x).expect("checked above")];
    let farthest = sample.iter().map(distance).max().unwrap_or(0);
    let argmax = diagonal
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let assessment = if spread <= 0.25 {
        UniformAssessment::Bounded
    } else if distance(&sample[argmax]) == farthest {
        UniformAssessment::UnboundedTrend
    } else {
        UniformAssessment::Inconclusive
    };
    Ok(UniformProbeReport {
        level: n,
        sample: sample.to_vec(),
        diagonal,
        max_green,
        capacity_floor: 1.0 / max_green,
        spread,
        assessment,
        caveat: UNIFORM_CAVEAT.to_string(),
    })
}
