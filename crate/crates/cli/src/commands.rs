use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::Serialize;
use sorkin_core::interference::table_from_filters;
use sorkin_core::io::{record_csv, tomography_csv, I3EstimateDoc, TableDoc, TomographyDoc};
use sorkin_core::quantum::basis_subset_filters;
use sorkin_core::tomography::{tomography_roundtrip, TomographyMode};
use sorkin_core::{
    estimate_i3, i2_from_table, i3_from_table, i3_operator, ik_from_table, interference_sweep,
    prop1_verify, run_experiment, run_table_experiment, validate_filter, Check, Error,
    ExperimentPlan, Measurement, ProbabilityTable, Prop1Report, SlitSet, SlitSystem, SweepReport,
    SweepSampling, ValidationReport,
};

use crate::output::{render, short, unix_now, Emitter, Format};
use crate::resolve::{self, Fixture, Loaded};
use crate::{Common, ExperimentArgs, InterferenceArgs, Mode, Sampling, TomographyArgs};

const DEFAULT_MODEL: &str = "quantum:3";
const DEFAULT_SHOTS: u64 = 100_000;

struct Setup {
    loaded: Loaded,
    model_spec: String,
    slit_spec: String,
    spin: Option<sorkin_core::Spin1Setup<f64>>,
}

impl Common {
    fn fixture(&self) -> Result<Option<Fixture>> {
        self.fixture.as_deref().map(Fixture::parse).transpose()
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn emitter(&self, command: &'static str, started: f64) -> Emitter {
        Emitter {
            out: self.out.clone(),
            command,
            started,
        }
    }

    fn setup(&self) -> Result<Setup> {
        let fixture = self.fixture()?;
        let model_spec = match (&self.model, fixture) {
            (Some(m), _) => m.clone(),
            (None, Some(f)) => f.model().to_string(),
            (None, None) => DEFAULT_MODEL.to_string(),
        };
        let loaded = resolve::load_model(&model_spec)?;
        let slit_spec = if self.spin1 {
            "spin1".to_string()
        } else {
            match &self.slits {
                Some(s) => s.clone(),
                None if !loaded.named_filters.is_empty() => "model".to_string(),
                None => "basis".to_string(),
            }
        };
        let spin = if slit_spec == "spin1" {
            Some(resolve::spin1_setup(self.b.as_deref(), self.d.as_deref())?)
        } else {
            None
        };
        Ok(Setup {
            loaded,
            model_spec,
            slit_spec,
            spin,
        })
    }

    fn state_spec(&self) -> &str {
        self.state.as_deref().unwrap_or("fixture")
    }

    fn effect_spec(&self) -> &str {
        self.effect.as_deref().unwrap_or("fixture")
    }
}

impl Setup {
    fn slits(&self) -> Result<SlitSystem<f64>> {
        resolve::slit_system(&self.loaded, &self.slit_spec, self.spin.as_ref())
    }
}

/// Slit-system construction failures that mean "the input is not a valid
/// system" rather than "the input could not be read".
fn is_validation_failure(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<Error>(),
        Some(
            Error::SlitsNotOrthogonal(..)
                | Error::InvalidSlitSystem(_)
                | Error::NotAProjection(_)
                | Error::NotHermitian(_)
        )
    )
}

fn exit(ok: bool) -> u8 {
    if ok {
        0
    } else {
        1
    }
}

#[derive(Serialize)]
struct ValidateDoc {
    model: String,
    slits: String,
    dimension: usize,
    samples: usize,
    seed: u64,
    passed: bool,
    checks: Vec<Check>,
}

pub fn validate(c: Common) -> Result<u8> {
    let started = unix_now();
    let setup = c.setup()?;
    let model = &setup.loaded.model;
    let seed = c.seed();
    let mut report = ValidationReport::default();

    if setup.slit_spec == "model" {
        for (i, (name, f)) in setup.loaded.named_filters.iter().enumerate() {
            let sub = validate_filter(f, model, c.samples, seed.wrapping_add(i as u64));
            report.extend_prefixed(&format!("{name}: "), sub);
        }
        let by_set = sorkin_core::io::slit_filters(&setup.loaded.named_filters);
        if SlitSet::all_nonempty(3)?.all(|s| by_set.contains_key(&s)) {
            let ss = SlitSystem::from_parts_unchecked(model.clone(), by_set)?;
            let limit = model.tolerances().proj;
            report.push(
                "slits pairwise orthogonal",
                ss.orthogonality_residual(),
                limit,
            );
            report.push(
                "product relations P_J P_K = P_(J∩K)",
                ss.product_relation_residual(),
                limit,
            );
        }
    } else {
        match setup.slits() {
            Ok(ss) => report = ss.validate(c.samples, seed),
            Err(e) if is_validation_failure(&e) => report.checks.push(Check {
                name: format!("slit system construction ({e:#})"),
                passed: false,
                residual: f64::INFINITY,
                threshold: 0.0,
            }),
            Err(e) => return Err(e),
        }
    }

    let passed = report.passed();
    for f in report.failures() {
        eprintln!(
            "FAIL {}: residual {} > {}",
            f.name,
            short(f.residual),
            short(f.threshold)
        );
    }
    eprintln!(
        "{} checks, {} failed",
        report.checks.len(),
        report.failures().count()
    );
    let doc = ValidateDoc {
        model: setup.model_spec,
        slits: setup.slit_spec,
        dimension: model.dimension(),
        samples: c.samples,
        seed,
        passed,
        checks: report.checks,
    };
    let code = exit(passed);
    c.emitter("validate", started)
        .write(&render(&doc, c.format)?, code)?;
    Ok(code)
}

#[derive(Serialize)]
struct Prop1Doc {
    model: String,
    slits: String,
    holds: bool,
    #[serde(flatten)]
    report: Prop1Report,
}

pub fn prop1(c: Common) -> Result<u8> {
    let started = unix_now();
    let setup = c.setup()?;
    let ss = setup.slits()?;
    let report = prop1_verify(&ss, c.samples, c.seed());
    eprintln!(
        "sup|I3| = {}  gap = {}  span defect = {}  -> {}",
        short(report.sup_abs_i3),
        short(report.operator_gap),
        short(report.span_defect),
        match (report.consistent, report.holds()) {
            (true, true) => "all three hold",
            (true, false) => "all three fail",
            (false, _) => "verdicts disagree",
        }
    );
    let code = exit(report.consistent);
    let doc = Prop1Doc {
        model: setup.model_spec,
        slits: setup.slit_spec,
        holds: report.holds(),
        report,
    };
    c.emitter("prop1", started)
        .write(&render(&doc, c.format)?, code)?;
    Ok(code)
}

fn pair_i2(t: &ProbabilityTable<f64>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, j) in [(1, 2), (1, 3), (2, 3)] {
        let get = |s: SlitSet| {
            t.get(s)
                .ok_or_else(|| anyhow::anyhow!("table has no entry {s}"))
        };
        let v = i2_from_table(
            get(SlitSet::pair(i, j))?,
            get(SlitSet::single(i))?,
            get(SlitSet::single(j))?,
        );
        out.insert(SlitSet::pair(i, j).key(), v);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TableInterferenceDoc {
    table: String,
    k: usize,
    entries: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i2: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i3: Option<f64>,
    ik: f64,
}

#[derive(Serialize)]
struct PointInterferenceDoc {
    model: String,
    slits: String,
    state: String,
    effect: String,
    entries: BTreeMap<String, f64>,
    i2: BTreeMap<String, f64>,
    i3_table: f64,
    i3_operator: f64,
    path_difference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    i4: Option<f64>,
}

#[derive(Serialize)]
struct SweepDoc {
    model: String,
    slits: String,
    sampling: &'static str,
    #[serde(flatten)]
    report: SweepReport,
}

pub fn interference(a: InterferenceArgs) -> Result<u8> {
    let started = unix_now();
    let c = &a.common;
    let text = if let Some(spec) = &a.table {
        let t = resolve::table(spec)?;
        let k = t.order();
        let doc = TableInterferenceDoc {
            table: spec.clone(),
            k,
            entries: TableDoc::from_table(&t).entries,
            i2: if k == 3 { Some(pair_i2(&t)?) } else { None },
            i3: if k == 3 {
                Some(i3_from_table(&t)?)
            } else {
                None
            },
            ik: ik_from_table(&t)?,
        };
        eprintln!("I{k} = {}", short(doc.ik));
        render(&doc, c.format)?
    } else {
        let setup = c.setup()?;
        let ss = setup.slits()?;
        if a.sweep {
            let (sampling, name) = match a.sampling {
                Sampling::General => (SweepSampling::General, "general"),
                Sampling::Pure => (SweepSampling::PureRankOne, "pure"),
            };
            let report = interference_sweep(&ss, c.samples, c.seed(), sampling)?;
            eprintln!(
                "{} pairs: sup|I3| = {} (table), {} (operator); max|I2| = {}",
                report.samples,
                short(report.sup_abs_i3_table),
                short(report.sup_abs_i3_operator),
                short(report.max_abs_i2)
            );
            render(
                &SweepDoc {
                    model: setup.model_spec,
                    slits: setup.slit_spec,
                    sampling: name,
                    report,
                },
                c.format,
            )?
        } else {
            let model = ss.model();
            let s = resolve::state(model, c.state_spec())?;
            let e = resolve::effect(model, c.effect_spec())?;
            let t = ss.probability_table(&e, &s)?;
            let i3_table = i3_from_table(&t)?;
            let i3_op = i3_operator(&e, &ss, &s)?;
            let i4 = if a.i4 {
                let filters = basis_subset_filters(model, 4)?;
                Some(ik_from_table(&table_from_filters(4, &filters, &e, &s)?)?)
            } else {
                None
            };
            let doc = PointInterferenceDoc {
                model: setup.model_spec.clone(),
                slits: setup.slit_spec.clone(),
                state: c.state_spec().to_string(),
                effect: c.effect_spec().to_string(),
                entries: TableDoc::from_table(&t).entries,
                i2: pair_i2(&t)?,
                i3_table,
                i3_operator: i3_op,
                path_difference: (i3_table - i3_op).abs(),
                i4,
            };
            eprintln!(
                "I2(12) = {}  I3 = {} (table), {} (operator)",
                short(doc.i2["12"]),
                short(i3_table),
                short(i3_op)
            );
            render(&doc, c.format)?
        }
    };
    c.emitter("interference", started).write(&text, 0)?;
    Ok(0)
}

#[derive(Serialize)]
struct Comparison {
    shots: [u64; 2],
    reconstruction_errors: [f64; 2],
    error_decreased: bool,
}

#[derive(Serialize)]
struct TomographyReport {
    model: String,
    slits: String,
    state: String,
    #[serde(flatten)]
    result: TomographyDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

pub fn tomography(a: TomographyArgs) -> Result<u8> {
    let started = unix_now();
    let c = &a.common;
    let setup = c.setup()?;
    let ss = setup.slits()?;
    let model = ss.model().clone();
    let s = resolve::state(&model, c.state_spec())?;
    let seed = c.seed();
    let mode = match a.mode {
        Mode::Exact => {
            if a.compare_shots.is_some() {
                bail!("--compare-shots needs --mode sampled");
            }
            TomographyMode::Exact
        }
        Mode::Sampled => TomographyMode::Sampled {
            shots: c.shots.unwrap_or(DEFAULT_SHOTS),
            seed,
        },
    };
    let result = tomography_roundtrip(&model, &ss, &s, mode)?;
    eprintln!(
        "reconstruction error {}  (defect norm {})",
        short(result.reconstruction_error),
        short(result.defect_norm)
    );
    let comparison = match (a.compare_shots, mode) {
        (Some(more), TomographyMode::Sampled { shots, .. }) => {
            let other = tomography_roundtrip(
                &model,
                &ss,
                &s,
                TomographyMode::Sampled { shots: more, seed },
            )?;
            let (lo, hi) = if more >= shots {
                (result.reconstruction_error, other.reconstruction_error)
            } else {
                (other.reconstruction_error, result.reconstruction_error)
            };
            eprintln!(
                "at {more} shots: reconstruction error {}",
                short(other.reconstruction_error)
            );
            Some(Comparison {
                shots: [shots, more],
                reconstruction_errors: [result.reconstruction_error, other.reconstruction_error],
                error_decreased: hi < lo,
            })
        }
        _ => None,
    };
    let text = match c.format {
        Format::Csv => tomography_csv(&result)?,
        Format::Json => render(
            &TomographyReport {
                model: setup.model_spec,
                slits: setup.slit_spec,
                state: c.state_spec().to_string(),
                result: TomographyDoc::from_result(&result),
                comparison,
            },
            Format::Json,
        )?,
    };
    c.emitter("tomography", started).write(&text, 0)?;
    Ok(0)
}

#[derive(Serialize)]
struct ExperimentDoc {
    source: String,
    seed: u64,
    shots_per_setting: u64,
    plan_hash: String,
    max_abs_z: Option<f64>,
    #[serde(flatten)]
    estimate: I3EstimateDoc,
}

pub fn experiment(a: ExperimentArgs) -> Result<u8> {
    let started = unix_now();
    let c = &a.common;
    let seed = c.seed();
    let shots = c.shots.unwrap_or(DEFAULT_SHOTS);
    let (source, record) = if let Some(spec) = &a.table {
        let t = resolve::table(spec)?;
        if t.order() != 3 {
            bail!("experiments need a three-slit table, got k = {}", t.order());
        }
        (
            format!("table {spec}"),
            run_table_experiment(&t, shots, seed)?,
        )
    } else {
        let setup = c.setup()?;
        let ss = setup.slits()?;
        let model = ss.model().clone();
        let detector = match (&setup.spin, &a.detector) {
            (Some(spin), None) => spin.detector_measurement(&model)?,
            (_, spec) => Measurement::new(resolve::detector_effects(
                &model,
                spec.as_deref().unwrap_or("basis"),
            )?),
        };
        let s = resolve::state(&model, c.state_spec())?;
        let plan = ExperimentPlan::new(ss, detector, s, shots, seed);
        (
            format!(
                "{} / {} / {}",
                setup.model_spec,
                setup.slit_spec,
                c.state_spec()
            ),
            run_experiment(&plan)?,
        )
    };
    if let Some(path) = &a.record {
        std::fs::write(path, record_csv(&record)?)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    }
    let est = estimate_i3(&record)?;
    for o in &est.per_outcome {
        eprintln!(
            "outcome {}: I3 = {} ± {}  z = {}",
            o.outcome + 1,
            short(o.estimate),
            short(o.standard_error),
            o.z_score.map_or("n/a (degenerate)".into(), short)
        );
    }
    let text = match c.format {
        Format::Csv => record_csv(&record)?,
        Format::Json => render(
            &ExperimentDoc {
                source,
                seed,
                shots_per_setting: shots,
                plan_hash: record.plan_hash.clone(),
                max_abs_z: if est.degenerate() {
                    None
                } else {
                    Some(est.max_abs_z())
                },
                estimate: I3EstimateDoc::from_estimate(&est),
            },
            Format::Json,
        )?,
    };
    c.emitter("experiment", started).write(&text, 0)?;
    Ok(0)
}
