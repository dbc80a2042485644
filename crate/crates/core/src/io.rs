//! JSON and CSV interchange.
//!
//! Every float is written with 17 significant digits so that values
//! round-trip exactly through text.

use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentRecord, I3Estimate};
use crate::gpt::{Cone, Filter, ModelSpace, Transformation};
use crate::hermitian::HermitianOperator;
use crate::interference::{ProbabilityTable, SlitSet};
use crate::quantum::Spin1Setup;
use crate::scalar::Scalar;
use crate::tomography::{TomographyMode, TomographyResult};

/// `x` with 17 significant digits in scientific notation.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON formatter that prints floats via [`sig17`].
#[derive(Default)]
pub struct Sig17Formatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for Sig17Formatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Pretty-printed JSON with 17-significant-digit floats and a trailing newline.
pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn rows<T: Scalar>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)].as_f64()).collect())
        .collect()
}

fn from_rows<T: Scalar>(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<T>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Parse(format!("{what}: ragged matrix")));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| T::lit(rows[i][j])))
}

fn vec_f64<T: Scalar>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn vec_t<T: Scalar>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|x| T::lit(*x)))
}

/// A model with its filters, keyed by name.
pub type NamedModel<T> = (ModelSpace<T>, BTreeMap<String, Filter<T>>);

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct ConeDoc {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct FilterDoc {
    pub projection: Vec<Vec<f64>>,
    pub complement: Vec<Vec<f64>>,
}

/// The model interchange document.
#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct ModelDoc {
    pub label: String,
    pub dimension: usize,
    pub cone: ConeDoc,
    pub order_unit: Vec<f64>,
    #[serde(default)]
    pub filters: BTreeMap<String, FilterDoc>,
}

impl ModelDoc {
    pub fn from_model<T: Scalar>(
        model: &ModelSpace<T>,
        filters: &BTreeMap<String, Filter<T>>,
    ) -> Self {
        let cone = match model.cone() {
            Cone::Quantum { d } => ConeDoc {
                kind: "quantum".into(),
                d: Some(*d),
                n: None,
                generators: None,
                tolerance: None,
            },
            Cone::RealQuantum { d } => ConeDoc {
                kind: "real_quantum".into(),
                d: Some(*d),
                n: None,
                generators: None,
                tolerance: None,
            },
            Cone::Classical { n } => ConeDoc {
                kind: "classical".into(),
                d: None,
                n: Some(*n),
                generators: None,
                tolerance: None,
            },
            Cone::Custom {
                generators,
                tolerance,
            } => ConeDoc {
                kind: "custom".into(),
                d: None,
                n: None,
                generators: Some(generators.iter().map(vec_f64).collect()),
                tolerance: Some(tolerance.as_f64()),
            },
        };
        ModelDoc {
            label: model.label().to_string(),
            dimension: model.dimension(),
            cone,
            order_unit: vec_f64(model.order_unit()),
            filters: filters
                .iter()
                .map(|(k, f)| {
                    (
                        k.clone(),
                        FilterDoc {
                            projection: rows(f.projection.matrix()),
                            complement: rows(f.complement.matrix()),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Rebuilds the model and its named filters, checking every dimension.
    pub fn into_model<T: Scalar>(&self) -> Result<NamedModel<T>> {
        let need = |x: Option<usize>, name: &str| {
            x.ok_or_else(|| {
                Error::Parse(format!(
                    "cone of type {:?} needs field {name:?}",
                    self.cone.kind
                ))
            })
        };
        let order_unit = vec_t::<T>(&self.order_unit);
        let model = match self.cone.kind.as_str() {
            "quantum" => {
                let d = need(self.cone.d, "d")?;
                ModelSpace::from_parts(self.label.clone(), Cone::Quantum { d }, order_unit)?
            }
            "real_quantum" => {
                let d = need(self.cone.d, "d")?;
                ModelSpace::from_parts(self.label.clone(), Cone::RealQuantum { d }, order_unit)?
            }
            "classical" => {
                let n = need(self.cone.n, "n")?;
                ModelSpace::from_parts(self.label.clone(), Cone::Classical { n }, order_unit)?
            }
            "custom" => {
                let gens = self
                    .cone
                    .generators
                    .as_ref()
                    .ok_or_else(|| Error::Parse("custom cone needs \"generators\"".into()))?;
                let tolerance = T::lit(self.cone.tolerance.unwrap_or(1e-10));
                ModelSpace::custom(
                    gens.iter().map(|g| vec_t(g)).collect(),
                    order_unit,
                    tolerance,
                )?
                .with_label(self.label.clone())
            }
            other => return Err(Error::Parse(format!("unknown cone type {other:?}"))),
        };
        if model.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: model.dimension(),
            });
        }
        let mut filters = BTreeMap::new();
        for (name, f) in &self.filters {
            let p = Transformation::new(from_rows::<T>(&f.projection, name)?)?;
            let c = Transformation::new(from_rows::<T>(&f.complement, name)?)?;
            model.check_dim(p.dim())?;
            model.check_dim(c.dim())?;
            filters.insert(name.clone(), Filter::new(p, c)?);
        }
        Ok((model, filters))
    }
}

/// Parses a JSON model document.
pub fn read_model<T: Scalar>(json: &str) -> Result<NamedModel<T>> {
    serde_json::from_str::<ModelDoc>(json)?.into_model()
}

pub fn write_model<T: Scalar>(
    model: &ModelSpace<T>,
    filters: &BTreeMap<String, Filter<T>>,
) -> Result<String> {
    to_json_string(&ModelDoc::from_model(model, filters))
}

/// Interprets filter names such as `"12"` or `"P12"` as slit sets; other
/// names are ignored.
pub fn slit_filters<T: Scalar>(
    filters: &BTreeMap<String, Filter<T>>,
) -> BTreeMap<SlitSet, Filter<T>> {
    filters
        .iter()
        .filter_map(|(name, f)| {
            let key = name
                .strip_prefix('P')
                .or_else(|| name.strip_prefix('p'))
                .unwrap_or(name);
            SlitSet::parse(key).ok().map(|s| (s, f.clone()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct HermitianDoc {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl HermitianDoc {
    pub fn from_operator<T: Scalar>(op: &HermitianOperator<T>) -> Self {
        HermitianDoc {
            re: rows(&op.real_part()),
            im: Some(rows(&op.imag_part())),
        }
    }

    pub fn to_operator<T: Scalar>(&self) -> Result<HermitianOperator<T>> {
        let re = from_rows::<T>(&self.re, "re")?;
        let im = match &self.im {
            Some(im) => from_rows::<T>(im, "im")?,
            None => DMatrix::zeros(re.nrows(), re.ncols()),
        };
        if re.shape() != im.shape() || re.nrows() != re.ncols() {
            return Err(Error::Parse(
                "hermitian matrix: re and im must be square and of equal shape".into(),
            ));
        }
        HermitianOperator::from_parts(re, im)
    }
}

pub fn read_hermitian<T: Scalar>(json: &str) -> Result<HermitianOperator<T>> {
    serde_json::from_str::<HermitianDoc>(json)?.to_operator()
}

/// Reads either a single Hermitian matrix or a list of them.
pub fn read_hermitian_list<T: Scalar>(json: &str) -> Result<Vec<HermitianOperator<T>>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<HermitianDoc>),
        Wrapped { projectors: Vec<HermitianDoc> },
        One(HermitianDoc),
    }
    match serde_json::from_str::<OneOrMany>(json)? {
        OneOrMany::Many(v) | OneOrMany::Wrapped { projectors: v } => {
            v.iter().map(HermitianDoc::to_operator).collect()
        }
        OneOrMany::One(h) => Ok(vec![h.to_operator()?]),
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct SpinSetupDoc {
    pub b: [f64; 3],
    pub d: [f64; 3],
}

impl SpinSetupDoc {
    pub fn from_setup<T: Scalar>(s: &Spin1Setup<T>) -> Self {
        let f = |a: [T; 3]| [a[0].as_f64(), a[1].as_f64(), a[2].as_f64()];
        SpinSetupDoc {
            b: f(s.filter_axis),
            d: f(s.detector_axis),
        }
    }

    pub fn to_setup<T: Scalar>(&self) -> Result<Spin1Setup<T>> {
        let f = |a: [f64; 3]| [T::lit(a[0]), T::lit(a[1]), T::lit(a[2])];
        crate::quantum::spin1_feynman_setup(f(self.b), f(self.d))
    }
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct TableDoc {
    pub k: usize,
    pub entries: BTreeMap<String, f64>,
}

impl TableDoc {
    pub fn from_table<T: Scalar>(t: &ProbabilityTable<T>) -> Self {
        TableDoc {
            k: t.order(),
            entries: t
                .entries()
                .iter()
                .map(|(s, p)| (s.key(), p.as_f64()))
                .collect(),
        }
    }

    /// Rebuilds the table; keys may list slits in any order.
    pub fn to_table<T: Scalar>(&self) -> Result<ProbabilityTable<T>> {
        let mut t = ProbabilityTable::new(self.k)?;
        for (key, p) in &self.entries {
            t.insert(SlitSet::parse(key)?, T::lit(*p))?;
        }
        Ok(t)
    }
}

pub fn read_table<T: Scalar>(json: &str) -> Result<ProbabilityTable<T>> {
    serde_json::from_str::<TableDoc>(json)?.to_table()
}

pub fn write_table<T: Scalar>(t: &ProbabilityTable<T>) -> Result<String> {
    to_json_string(&TableDoc::from_table(t))
}

/// One outcome row of a tomography run.
#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct TomographyRow {
    pub face: String,
    pub setting: usize,
    pub outcome: usize,
    pub observed: f64,
    pub fitted: f64,
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct FaceDoc {
    pub rank: usize,
    pub settings: usize,
    pub coordinates: Vec<f64>,
    pub normalization: f64,
    pub negative_normalization: bool,
    pub single_slit_components: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct TomographyDoc {
    pub mode: String,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub faces: BTreeMap<String, FaceDoc>,
    pub reconstruction: Vec<f64>,
    pub truth: Vec<f64>,
    pub reconstruction_error: f64,
    pub defect_norm: f64,
    pub source_in_full_face: bool,
    pub cone_distance: f64,
}

impl TomographyDoc {
    pub fn from_result<T: Scalar>(r: &TomographyResult<T>) -> Self {
        let (mode, shots, seed) = match r.mode {
            TomographyMode::Exact => ("exact".to_string(), None, None),
            TomographyMode::Sampled { shots, seed } => {
                ("sampled".to_string(), Some(shots), Some(seed))
            }
        };
        TomographyDoc {
            mode,
            shots,
            seed,
            faces: r
                .per_face
                .iter()
                .map(|(k, f)| {
                    (
                        k.key(),
                        FaceDoc {
                            rank: f.face_rank,
                            settings: f.n_settings,
                            coordinates: vec_f64(f.estimate.state.coords()),
                            normalization: f.estimate.normalization.as_f64(),
                            negative_normalization: f.estimate.negative_normalization,
                            single_slit_components: [
                                vec_f64(f.components.0.coords()),
                                vec_f64(f.components.1.coords()),
                            ],
                        },
                    )
                })
                .collect(),
            reconstruction: vec_f64(r.reconstructed.coords()),
            truth: vec_f64(r.truth.coords()),
            reconstruction_error: r.reconstruction_error.as_f64(),
            defect_norm: r.defect_norm.as_f64(),
            source_in_full_face: r.source_in_full_face,
            cone_distance: r.cone_distance.as_f64(),
        }
    }
}

pub fn tomography_rows<T: Scalar>(r: &TomographyResult<T>) -> Vec<TomographyRow> {
    let mut out = Vec::new();
    for (face, f) in &r.per_face {
        for (k, (obs, fit)) in f
            .estimate
            .observed
            .iter()
            .zip(&f.estimate.fitted)
            .enumerate()
        {
            for (l, (o, p)) in obs.iter().zip(fit).enumerate() {
                out.push(TomographyRow {
                    face: face.key(),
                    setting: k,
                    outcome: l,
                    observed: o.as_f64(),
                    fitted: p.as_f64(),
                });
            }
        }
    }
    out
}

fn csv_string<F>(header: &[&str], write_rows: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    write_rows(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv emits UTF-8"))
}

/// Columns `face,setting,outcome,observed,fitted`.
pub fn tomography_csv<T: Scalar>(r: &TomographyResult<T>) -> Result<String> {
    csv_string(&["face", "setting", "outcome", "observed", "fitted"], |w| {
        for row in tomography_rows(r) {
            w.write_record([
                row.face,
                row.setting.to_string(),
                row.outcome.to_string(),
                sig17(row.observed),
                sig17(row.fitted),
            ])?;
        }
        Ok(())
    })
}

pub fn read_tomography_csv(text: &str) -> Result<Vec<TomographyRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// One row of an experiment record; `outcome` is `1..=n` or `"blocked"`.
#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct RecordRow {
    pub setting: String,
    pub outcome: String,
    pub count: u64,
    pub shots: u64,
    pub frequency: f64,
}

/// Columns `setting,outcome,count,shots,frequency`.
pub fn record_csv(record: &ExperimentRecord) -> Result<String> {
    csv_string(
        &["setting", "outcome", "count", "shots", "frequency"],
        |w| {
            for (set, counts) in &record.counts {
                let shots = record.shots[set];
                for (l, c) in counts.iter().enumerate() {
                    let outcome = if l == record.n_outcomes {
                        "blocked".to_string()
                    } else {
                        (l + 1).to_string()
                    };
                    let freq = if shots == 0 {
                        0.0
                    } else {
                        *c as f64 / shots as f64
                    };
                    w.write_record([
                        set.key(),
                        outcome,
                        c.to_string(),
                        shots.to_string(),
                        sig17(freq),
                    ])?;
                }
            }
            Ok(())
        },
    )
}

/// Parses a record CSV back into counts; seed and plan hash are not part of
/// the CSV and are supplied by the caller.
pub fn read_record_csv(text: &str, seed: u64, plan_hash: String) -> Result<ExperimentRecord> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut counts: BTreeMap<SlitSet, Vec<(usize, u64)>> = BTreeMap::new();
    let mut blocked: BTreeMap<SlitSet, u64> = BTreeMap::new();
    let mut shots = BTreeMap::new();
    for row in reader.deserialize::<RecordRow>() {
        let row = row?;
        let set = SlitSet::parse(&row.setting)?;
        shots.insert(set, row.shots);
        if row.outcome == "blocked" {
            blocked.insert(set, row.count);
        } else {
            let l: usize = row
                .outcome
                .parse()
                .map_err(|_| Error::Parse(format!("bad outcome {:?}", row.outcome)))?;
            if l == 0 {
                return Err(Error::Parse("outcomes are numbered from 1".into()));
            }
            counts.entry(set).or_default().push((l - 1, row.count));
        }
    }
    let n_outcomes = counts.values().map(|v| v.len()).max().unwrap_or(0);
    let mut full = BTreeMap::new();
    for set in shots.keys() {
        let mut c = vec![0u64; n_outcomes + 1];
        for &(l, x) in counts.get(set).into_iter().flatten() {
            if l >= n_outcomes {
                return Err(Error::Parse(format!("outcome {} out of range", l + 1)));
            }
            c[l] = x;
        }
        c[n_outcomes] = *blocked
            .get(set)
            .ok_or_else(|| Error::Parse(format!("setting {set} lacks a blocked row")))?;
        full.insert(*set, c);
    }
    ExperimentRecord::new(n_outcomes, full, shots, seed, plan_hash)
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct OutcomeDoc {
    /// One-based detector outcome.
    pub outcome: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub z_score: Option<f64>,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, SerializeDerive, Deserialize)]
pub struct I3EstimateDoc {
    pub per_outcome: Vec<OutcomeDoc>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub degenerate: bool,
    /// Per setting: detector-outcome frequencies followed by the blocked frequency.
    pub frequencies: BTreeMap<String, Vec<f64>>,
}

impl I3EstimateDoc {
    pub fn from_estimate(e: &I3Estimate) -> Self {
        I3EstimateDoc {
            per_outcome: e
                .per_outcome
                .iter()
                .map(|o| OutcomeDoc {
                    outcome: o.outcome + 1,
                    estimate: o.estimate,
                    standard_error: o.standard_error,
                    z_score: o.z_score,
                    degenerate: o.degenerate,
                })
                .collect(),
            chi_square: e.chi_square,
            degrees_of_freedom: e.degrees_of_freedom,
            degenerate: e.degenerate(),
            frequencies: e
                .frequencies
                .iter()
                .map(|(k, v)| (k.key(), v.clone()))
                .collect(),
        }
    }
}
