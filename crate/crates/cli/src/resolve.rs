//! Turns command-line specs into models, slit systems, states and effects.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{Complex, DVector};
use sorkin_core::io::{read_hermitian, read_hermitian_list, read_model, read_table, slit_filters};
use sorkin_core::quantum::{random_pure_state, random_rank1_slits};
use sorkin_core::{
    basis_slit_system, random_effect, random_state, slit_system_from_projectors,
    spin1_feynman_setup, Effect, Filter, HermitianOperator, ModelSpace, ProbabilityTable,
    SlitSystem, Spin1Setup, State,
};

pub const TABLE_FIXTURE: &str = include_str!("../fixtures/fixture-0.6.json");

/// A named bundle of model, slits, state and detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// Qutrit with basis slits, source and detector both `|ψ⟩⟨ψ|`, `ψ = (1,1,1)/√3`.
    Qutrit,
    /// Classical three-outcome model, uniform source, detector on outcome 1.
    ClassicalUniform,
}

impl Fixture {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "qutrit" => Ok(Fixture::Qutrit),
            "classical-uniform" | "classical" => Ok(Fixture::ClassicalUniform),
            _ => bail!("unknown fixture {name:?} (expected qutrit or classical-uniform)"),
        }
    }

    pub fn model(self) -> &'static str {
        match self {
            Fixture::Qutrit => "quantum:3",
            Fixture::ClassicalUniform => "classical:3",
        }
    }
}

pub struct Loaded {
    pub model: ModelSpace<f64>,
    /// Filters shipped inside a JSON model document, by name.
    pub named_filters: BTreeMap<String, Filter<f64>>,
}

pub fn load_model(spec: &str) -> Result<Loaded> {
    if let Some((kind, n)) = spec.split_once(':') {
        if !Path::new(spec).exists() {
            let n: usize = n
                .parse()
                .with_context(|| format!("model dimension in {spec:?}"))?;
            let model = match kind {
                "quantum" => ModelSpace::quantum(n)?,
                "real_quantum" | "real-quantum" => ModelSpace::real_quantum(n)?,
                "classical" => ModelSpace::classical(n)?,
                _ => bail!(
                    "unknown model kind {kind:?} (expected quantum, real_quantum or classical)"
                ),
            };
            return Ok(Loaded {
                model,
                named_filters: BTreeMap::new(),
            });
        }
    }
    let text = read_file(spec)?;
    let (model, named_filters) =
        read_model(&text).with_context(|| format!("reading model {spec}"))?;
    Ok(Loaded {
        model,
        named_filters,
    })
}

pub fn read_file(path: &str) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {path}"))
}

pub fn parse_axis(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("axis {text:?}"))?;
    parts
        .try_into()
        .map_err(|_| anyhow!("axis {text:?} must have three components"))
}

pub fn spin1_setup(b: Option<&str>, d: Option<&str>) -> Result<Spin1Setup<f64>> {
    let b = parse_axis(b.ok_or_else(|| anyhow!("spin-1 slits need --b"))?)?;
    let d = parse_axis(d.ok_or_else(|| anyhow!("spin-1 slits need --d"))?)?;
    Ok(spin1_feynman_setup(b, d)?)
}

/// `basis`, `spin1`, `model` (filters from the model file), `random:SEED`
/// or a JSON file with three projectors.
pub fn slit_system(
    loaded: &Loaded,
    spec: &str,
    spin: Option<&Spin1Setup<f64>>,
) -> Result<SlitSystem<f64>> {
    let model = &loaded.model;
    match spec {
        "basis" => Ok(basis_slit_system(model)?),
        "spin1" => {
            let setup = spin.ok_or_else(|| anyhow!("spin-1 slits need --b and --d"))?;
            Ok(setup.slit_system(model)?)
        }
        "model" => {
            if loaded.named_filters.is_empty() {
                bail!("the model document carries no filters");
            }
            Ok(SlitSystem::new(
                model.clone(),
                slit_filters(&loaded.named_filters),
            )?)
        }
        _ => {
            if let Some(seed) = spec.strip_prefix("random:") {
                let seed = parse_seed(seed)?;
                let p = random_rank1_slits(model, 3, seed)?;
                return Ok(slit_system_from_projectors(
                    &[p[0].clone(), p[1].clone(), p[2].clone()],
                    model,
                )?);
            }
            let projectors = read_hermitian_list::<f64>(&read_file(spec)?)
                .with_context(|| format!("reading projectors from {spec}"))?;
            let three: [HermitianOperator<f64>; 3] =
                projectors.try_into().map_err(|v: Vec<_>| {
                    anyhow!("expected three slit projectors, found {}", v.len())
                })?;
            Ok(slit_system_from_projectors(&three, model)?)
        }
    }
}

fn parse_seed(text: &str) -> Result<u64> {
    text.parse()
        .with_context(|| format!("seed {text:?} is not a non-negative integer"))
}

/// `(1,…,1)/√d`.
fn uniform_superposition(d: usize) -> DVector<Complex<f64>> {
    DVector::from_element(d, Complex::new(1.0 / (d as f64).sqrt(), 0.0))
}

fn one_hot(m: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(m);
    v[i] = 1.0;
    v
}

fn parse_index(text: &str, bound: usize) -> Result<usize> {
    let i: usize = text.parse().with_context(|| format!("index {text:?}"))?;
    if i >= bound {
        bail!("index {i} out of range for dimension {bound}");
    }
    Ok(i)
}

/// Coordinates from a JSON file: a Hermitian matrix `{"re", "im"}`, an
/// object `{"coords": [...]}` or a bare list.
fn coords_from_file(model: &ModelSpace<f64>, path: &str) -> Result<DVector<f64>> {
    let text = read_file(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
    let list = match &value {
        serde_json::Value::Array(_) => Some(value.clone()),
        serde_json::Value::Object(o) if o.contains_key("coords") => Some(o["coords"].clone()),
        _ => None,
    };
    let coords = match list {
        Some(list) => {
            let v: Vec<f64> =
                serde_json::from_value(list).with_context(|| format!("coordinates in {path}"))?;
            DVector::from_vec(v)
        }
        None => {
            let op = read_hermitian::<f64>(&text).with_context(|| format!("matrix in {path}"))?;
            model.embed(&op)?
        }
    };
    model.check_dim(coords.len())?;
    Ok(coords)
}

/// `fixture`, `mixed`, `basis:I`, `random:SEED`, `pure:SEED` or a JSON file.
pub fn state(model: &ModelSpace<f64>, spec: &str) -> Result<State<f64>> {
    let m = model.dimension();
    let hilbert = model.hilbert();
    let s = match (spec, hilbert) {
        ("fixture", Some((d, _))) => {
            model.state_from_operator(&HermitianOperator::pure(&uniform_superposition(d)))?
        }
        ("mixed", Some((d, _))) => {
            model.state_from_operator(&HermitianOperator::identity(d).scale(1.0 / d as f64))?
        }
        ("fixture" | "mixed", None) => {
            let s = State::new(DVector::from_element(m, 1.0));
            let n = model.normalization(&s);
            s.scaled(1.0 / n)
        }
        _ => {
            if let Some(seed) = spec.strip_prefix("random:") {
                random_state(model, parse_seed(seed)?)
            } else if let Some(seed) = spec.strip_prefix("pure:") {
                random_pure_state(model, parse_seed(seed)?)?
            } else if let Some(i) = spec.strip_prefix("basis:") {
                match hilbert {
                    Some((d, _)) => model.state_from_operator(
                        &HermitianOperator::basis_projector(d, parse_index(i, d)?),
                    )?,
                    None => State::new(one_hot(m, parse_index(i, m)?)),
                }
            } else {
                State::new(coords_from_file(model, spec)?)
            }
        }
    };
    if !model.is_normalized(&s) {
        bail!(
            "state {spec:?} is not normalized: u·s = {}",
            model.normalization(&s)
        );
    }
    Ok(s)
}

/// `fixture`, `unit`, `basis:I`, `random:SEED` or a JSON file.
pub fn effect(model: &ModelSpace<f64>, spec: &str) -> Result<Effect<f64>> {
    let m = model.dimension();
    let hilbert = model.hilbert();
    Ok(match (spec, hilbert) {
        ("fixture", Some((d, _))) => {
            model.effect_from_operator(&HermitianOperator::pure(&uniform_superposition(d)))?
        }
        ("fixture", None) => Effect::new(one_hot(m, 0)),
        ("unit", _) => model.unit_effect(),
        _ => {
            if let Some(seed) = spec.strip_prefix("random:") {
                random_effect(model, parse_seed(seed)?)
            } else if let Some(i) = spec.strip_prefix("basis:") {
                match hilbert {
                    Some((d, _)) => model.effect_from_operator(
                        &HermitianOperator::basis_projector(d, parse_index(i, d)?),
                    )?,
                    None => Effect::new(one_hot(m, parse_index(i, m)?)),
                }
            } else {
                Effect::new(coords_from_file(model, spec)?)
            }
        }
    })
}

/// A table file, or the shipped `fixture-0.6` table.
pub fn table(spec: &str) -> Result<ProbabilityTable<f64>> {
    let text = if Path::new(spec).exists() {
        read_file(spec)?
    } else if matches!(spec, "fixture-0.6" | "fixture-0.6.json") {
        TABLE_FIXTURE.to_string()
    } else {
        bail!("cannot read table {spec}");
    };
    read_table(&text).with_context(|| format!("reading table {spec}"))
}

/// Detector effects: `basis` (one effect per basis vector of the model) or a
/// JSON file with projectors.
pub fn detector_effects(model: &ModelSpace<f64>, spec: &str) -> Result<Vec<Effect<f64>>> {
    if spec == "basis" {
        return Ok(match model.hilbert() {
            Some((d, _)) => (0..d)
                .map(|i| model.effect_from_operator(&HermitianOperator::basis_projector(d, i)))
                .collect::<sorkin_core::Result<_>>()?,
            None => (0..model.dimension())
                .map(|i| Effect::new(one_hot(model.dimension(), i)))
                .collect(),
        });
    }
    let ops = read_hermitian_list::<f64>(&read_file(spec)?)
        .with_context(|| format!("reading detector from {spec}"))?;
    ops.iter()
        .map(|p| Ok(model.effect_from_operator(p)?))
        .collect()
}
