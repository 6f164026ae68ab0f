use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use sgl_core::criticality::{self, ClassificationReport, DecisionRule, EvidenceSeries, GroundStateEstimate, Verdict};
use sgl_core::io::{self, GraphInput, SCHEMA_VERSION};
use sgl_core::spectral::{self, HarnackInstance};
use sgl_core::{heat, oracle, solver, Error, ExhaustionFamily, Field, Result, Vertex};

use crate::output::{emit_json, emit_table, num, Format, Table};
use crate::{Common, RuleArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum VerdictArg {
    Auto,
    Critical,
    Subcritical,
}

fn vertex(text: &str) -> Result<Vertex> {
    text.parse::<Vertex>()
        .map_err(|_| Error::Parse(format!("invalid vertex {text:?}")))
}

struct Loaded {
    input: GraphInput,
    family: ExhaustionFamily,
}

fn load(common: &Common) -> Result<Loaded> {
    let input = io::read_input(&common.input)?;
    let anchor = common.anchor.as_deref().map(vertex).transpose()?;
    let family = input.family(anchor)?;
    Ok(Loaded { input, family })
}

fn rule(args: &RuleArgs) -> DecisionRule {
    DecisionRule {
        plateau_eps: args.tol,
        decay_floor: args.decay_floor,
        extrapolation_tol: args.extrapolation_tol,
        certify: true,
    }
}

fn out(common: &Common) -> Option<&Path> {
    common.out.as_deref()
}

fn series_table(series: &EvidenceSeries, value: &'static str) -> Table {
    let mut table = Table::new(&["level", value]);
    for (l, v) in series.levels.iter().zip(&series.values) {
        table.push(vec![l.to_string(), num(*v)]);
    }
    table
}

fn emit_series(common: &Common, series: &EvidenceSeries, value: &'static str) -> Result<()> {
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_table(out(common), &series_table(series, value)),
        Format::Json => emit_json(out(common), series),
    }
}

pub fn classify(common: &Common, args: &RuleArgs) -> Result<()> {
    let l = load(common)?;
    let report = criticality::classify(&l.family, &l.family.anchor(), common.levels, &rule(args))?;
    match common.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(out(common), &report),
        Format::Csv => {
            let mut table = Table::new(&["level", "capacity", "green"]);
            let (cap, green) = (&report.evidence[0], &report.evidence[1]);
            for i in 0..cap.levels.len() {
                table.push(vec![cap.levels[i].to_string(), num(cap.values[i]), num(green.values[i])]);
            }
            emit_table(out(common), &table)
        }
    }
}

pub fn green(common: &Common, target: Option<&str>) -> Result<()> {
    let l = load(common)?;
    let x = l.family.anchor();
    let y = target.map(vertex).transpose()?.unwrap_or(x);
    let series = criticality::green_series(&l.family, &x, &y, common.levels)?;
    emit_series(common, &series, "value")
}

pub fn capacity(common: &Common) -> Result<()> {
    let l = load(common)?;
    let series = criticality::capacity_series(&l.family, &l.family.anchor(), common.levels)?;
    emit_series(common, &series, "value")
}

fn ground_state_json(g: &GroundStateEstimate) -> Value {
    let window: Vec<Value> = g.window.iter().map(|x| json!([x, g.profile.at(x)])).collect();
    json!({
        "level": g.level,
        "method": g.method,
        "eigenvalue": g.eigenvalue,
        "window_change": g.window_change,
        "window": window,
    })
}

fn resolve_verdict(l: &Loaded, verdict: VerdictArg, args: &RuleArgs, levels: usize) -> Result<Verdict> {
    Ok(match verdict {
        VerdictArg::Critical => Verdict::Critical,
        VerdictArg::Subcritical => Verdict::Subcritical,
        VerdictArg::Auto => criticality::classify(&l.family, &l.family.anchor(), levels, &rule(args))?.verdict,
    })
}

pub fn groundstate(common: &Common, verdict: VerdictArg, args: &RuleArgs) -> Result<()> {
    let l = load(common)?;
    let verdict = resolve_verdict(&l, verdict, args, common.levels)?;
    let g = criticality::ground_state(&l.family, &l.family.anchor(), common.levels, verdict)?;
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut table = Table::new(&["vertex", "value"]);
            for (x, v) in g.profile.region().vertices().iter().zip(g.profile.values()) {
                table.push(vec![x.to_string(), num(*v)]);
            }
            emit_table(out(common), &table)
        }
        Format::Json => emit_json(out(common), &ground_state_json(&g)),
    }
}

pub fn lambda0(common: &Common, holes: &[usize]) -> Result<()> {
    let l = load(common)?;
    if holes.is_empty() {
        let series = spectral::lambda0_series(&l.family, common.levels)?;
        emit_series(common, &series, "value")
    } else {
        let probe = spectral::lambda0_ess_probe(&l.family, holes, common.levels)?;
        emit_json(out(common), &probe)
    }
}

pub fn heat(common: &Common, x: Option<&str>, y: Option<&str>, times: &[f64]) -> Result<()> {
    let l = load(common)?;
    let anchor = l.family.anchor();
    let x = x.map(vertex).transpose()?.unwrap_or(anchor);
    let y = y.map(vertex).transpose()?.unwrap_or(anchor);
    let system = solver::assemble(&l.family, common.levels)?;
    let kernel = heat::HeatKernel::new(&system)?;
    let values = times
        .iter()
        .map(|t| kernel.at(*t, &x, &y))
        .collect::<Result<Vec<f64>>>()?;
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut table = Table::new(&["t", "p_t"]);
            for (t, p) in times.iter().zip(&values) {
                table.push(vec![num(*t), num(*p)]);
            }
            emit_table(out(common), &table)
        }
        Format::Json => emit_json(out(common), &json!({"x": x, "y": y, "t": times, "p_t": values})),
    }
}

pub fn harnack(common: &Common, vertices: &[String], f: f64, cap: usize) -> Result<()> {
    let l = load(common)?;
    let window = vertices.iter().map(|v| vertex(v)).collect::<Result<Vec<Vertex>>>()?;
    let inst = HarnackInstance::with_cap(&l.input.model, &window, &Field::Constant(f), cap)?;
    let bound = spectral::harnack_constant(&inst);
    emit_json(
        out(common),
        &json!({
            "window": inst.vertices(),
            "d": inst.d(),
            "constant": bound.constant,
            "worst_pair": bound.worst_pair,
            "certified": bound.constant.is_some(),
        }),
    )
}

pub fn hardy(common: &Common, weight: &str) -> Result<()> {
    let l = load(common)?;
    let w = io::parse_weight(weight)?;
    let series = criticality::weight_nonneg_series(&l.family, &w, common.levels)?;
    emit_series(common, &series, "gen_lambda_min")
}

fn section<T: Serialize>(result: Result<T>) -> Value {
    match result.and_then(|v| Ok(serde_json::to_value(v)?)) {
        Ok(v) => json!({"status": "ok", "result": v}),
        Err(e) => json!({"status": "error", "message": e.to_string()}),
    }
}

fn skipped(reason: &str) -> Value {
    json!({"status": "skipped", "reason": reason})
}

pub fn report(common: &Common, args: &RuleArgs, weight: Option<&str>, full: bool, seed: u64) -> Result<()> {
    let l = load(common)?;
    let weight = weight.map(io::parse_weight).transpose()?;
    let family = &l.family;
    let o = family.anchor();
    let n = common.levels;
    let mut sections = Map::new();

    let classification: Result<ClassificationReport> = criticality::classify(family, &o, n, &rule(args));
    let verdict = classification.as_ref().ok().map(|r| r.verdict);
    sections.insert("classify".into(), section(classification));
    sections.insert("green".into(), section(criticality::green_series(family, &o, &o, n)));
    sections.insert("capacity".into(), section(criticality::capacity_series(family, &o, n)));
    sections.insert("lambda0".into(), section(spectral::lambda0_series(family, n)));

    let mut ground = None;
    match verdict {
        Some(Verdict::Critical) => {
            let g = criticality::ground_state(family, &o, n, Verdict::Critical);
            sections.insert("ground_state".into(), section(g.as_ref().map(ground_state_json).map_err(clone_err)));
            ground = g.ok();
            sections.insert("minimal_green".into(), skipped("critical: no minimal Green function"));
            sections.insert("uniform_probe".into(), skipped("requires a Subcritical verdict"));
        }
        Some(Verdict::Subcritical) => {
            let m = criticality::minimal_green(family, &o, n, Verdict::Subcritical).map(|m| {
                json!({
                    "level": m.level,
                    "green_at_anchor": m.green.at(&o),
                    "residual": m.residual,
                    "residual_tolerance": m.residual_tolerance,
                    "passed": m.passed,
                })
            });
            sections.insert("minimal_green".into(), section(m));
            sections.insert("ground_state".into(), skipped("subcritical: no ground state"));
            let probe = probe_sample(family, n).and_then(|s| criticality::uniform_subcriticality_probe(family, &s, n));
            sections.insert("uniform_probe".into(), section(probe));
        }
        _ => {
            for name in ["ground_state", "minimal_green", "uniform_probe"] {
                sections.insert(name.into(), skipped("no conclusive verdict"));
            }
        }
    }

    if let Some(w) = &weight {
        match (&ground, verdict) {
            (Some(g), _) => {
                let psi = |x: &Vertex| g.profile.at(x);
                let r = criticality::weight_criticality(family, w, &psi, n, &rule(args));
                sections.insert("weight_criticality".into(), section(r));
            }
            (None, Some(Verdict::Subcritical)) => {
                sections.insert("hardy".into(), section(criticality::weight_nonneg_series(family, w, n)));
            }
            _ => {
                sections.insert("weight_criticality".into(), skipped("needs a ground state or a Subcritical verdict"));
            }
        }
    }

    if full {
        let first = family.first_level();
        let probe = if n > first + 1 {
            section(spectral::lambda0_ess_probe(family, &[first], n))
        } else {
            skipped("too few levels for a hole probe")
        };
        sections.insert("lambda0_ess".into(), probe);
        let walk = oracle::rw_return_estimate(family, &o, &[100, 1000, 10000], 4000, seed);
        sections.insert("return_mass".into(), section(walk));
    }

    let any_ok = sections.values().any(|s| s["status"] == "ok");
    let document = json!({
        "schema_version": SCHEMA_VERSION,
        "input": common.input.display().to_string(),
        "anchor": o,
        "levels": n,
        "sections": sections,
    });
    emit_json(out(common), &document)?;
    if any_ok {
        Ok(())
    } else {
        Err(Error::Precondition("every report section failed".into()))
    }
}

fn clone_err(e: &Error) -> Error {
    Error::Precondition(e.to_string())
}

/// Up to 20 vertices near the anchor, in canonical order.
fn probe_sample(family: &ExhaustionFamily, n: usize) -> Result<Vec<Vertex>> {
    let first = family.first_level();
    let radius = (n.saturating_sub(first) / 4).clamp(0, 2);
    let mut sample = family.region_vertices(first + radius)?;
    sample.truncate(20);
    Ok(sample)
}
