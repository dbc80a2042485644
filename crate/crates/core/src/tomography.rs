//! Two-slit filtering tomography: informationally complete measurements on
//! the faces of `P₁₂`, `P₁₃`, `P₂₃`, linear estimation of the filtered states,
//! and reconstruction of the source as
//! `s = s₁₂ + s₁₃ + s₂₃ − s₁ − s₂ − s₃`.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::sample_categorical;
use crate::gpt::{
    apply, face_of, validate_measurement, Cone, Effect, Face, Filter, Measurement, ModelSpace,
    State,
};
use crate::hermitian::{Field, HermitianOperator};
use crate::interference::{defect_operator, SlitSet, SlitSystem};
use crate::linalg;
use crate::scalar::Scalar;

/// The three two-slit faces, in reconstruction order.
pub fn pair_faces() -> [SlitSet; 3] {
    [
        SlitSet::pair(1, 2),
        SlitSet::pair(1, 3),
        SlitSet::pair(2, 3),
    ]
}

/// Measurements whose statistics determine any state on one face.
#[derive(Clone, Debug)]
pub struct FaceMeasurementPlan<T: Scalar> {
    pub face: Face<T>,
    pub settings: Vec<Measurement<T>>,
    /// One row per effect (settings in order), holding the effect restricted
    /// to the face basis.
    pub design_matrix: DMatrix<T>,
}

impl<T: Scalar> FaceMeasurementPlan<T> {
    /// Builds a plan from caller-supplied settings, checking each is a valid
    /// measurement and that together they are informationally complete on
    /// the face.
    pub fn with_settings(
        face: Face<T>,
        model: &ModelSpace<T>,
        settings: Vec<Measurement<T>>,
    ) -> Result<Self> {
        for ms in &settings {
            for e in &ms.effects {
                model.check_dim(e.dim())?;
            }
            let report = validate_measurement(ms, model);
            if let Some(c) = report.failures().next() {
                let msg = format!("setting fails {:?}: residual {:e}", c.name, c.residual);
                return Err(Error::InvalidModel(msg));
            };
        }
        let rows: Vec<DVector<T>> = settings
            .iter()
            .flat_map(|ms| ms.effects.iter().map(|e| face.coordinates(e.coords())))
            .collect();
        let design_matrix = DMatrix::from_fn(rows.len(), face.rank, |r, c| rows[r][c]);
        let rank = linalg::rank(&design_matrix, model.tolerances().rank);
        if rank < face.rank {
            return Err(Error::RankDeficient {
                rank,
                expected: face.rank,
            });
        }
        Ok(FaceMeasurementPlan {
            face,
            settings,
            design_matrix,
        })
    }

    pub fn n_effects(&self) -> usize {
        self.design_matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.face.rank
    }
}

/// Groups `effects` into a measurement by adding the complement `u − Σ`.
fn completed<T: Scalar>(model: &ModelSpace<T>, effects: Vec<Effect<T>>) -> Measurement<T> {
    let sum = effects
        .iter()
        .fold(DVector::zeros(model.dimension()), |a, e| a + e.coords());
    let mut effects = effects;
    effects.push(Effect::new(model.order_unit() - sum));
    Measurement::new(effects)
}

fn quantum_settings<T: Scalar>(
    face: &Face<T>,
    model: &ModelSpace<T>,
    field: Field,
) -> Result<Vec<Measurement<T>>> {
    let support = model.unembed(&(&face.projection_matrix * model.order_unit()))?;
    let (vals, vecs) = support.eigen_descending();
    let half = T::lit(0.5);
    let basis: Vec<DVector<Complex<T>>> = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > half)
        .map(|(k, _)| vecs.column(k).into_owned())
        .collect();
    let proj = |v: DVector<Complex<T>>| model.effect_from_operator(&HermitianOperator::pure(&v));

    let mut settings = vec![completed(
        model,
        basis.iter().cloned().map(proj).collect::<Result<_>>()?,
    )];
    let i = Complex::new(T::zero(), T::one());
    for a in 0..basis.len() {
        for b in a + 1..basis.len() {
            let (va, vb) = (&basis[a], &basis[b]);
            settings.push(completed(model, vec![proj(va + vb)?, proj(va - vb)?]));
            if field == Field::Complex {
                settings.push(completed(
                    model,
                    vec![proj(va + vb * i)?, proj(va - vb * i)?],
                ));
            }
        }
    }
    Ok(settings)
}

/// Standard informationally complete plan for a face.
///
/// Matrix models: the projectors onto an eigenbasis of the face's support,
/// then for each pair of basis vectors the `(|a⟩ ± |b⟩)/√2` basis and (complex
/// case) the `(|a⟩ ± i|b⟩)/√2` basis. Classical models: the coordinate
/// indicators of the support. Every setting is completed with `u − Σ`.
///
/// Custom cones get the single two-outcome measurement `{Pᵀu, u − Pᵀu}`,
/// which is only complete on rank-1 faces; use
/// [`FaceMeasurementPlan::with_settings`] to supply more.
pub fn build_face_measurement<T: Scalar>(
    face: &Face<T>,
    model: &ModelSpace<T>,
) -> Result<FaceMeasurementPlan<T>> {
    model.check_dim(face.projection_matrix.nrows())?;
    let settings = match model.cone() {
        Cone::Quantum { .. } | Cone::RealQuantum { .. } => {
            let (_, field) = model.hilbert().expect("matrix model");
            quantum_settings(face, model, field)?
        }
        Cone::Classical { n } => {
            let mask = &face.projection_matrix * model.order_unit();
            let half = T::lit(0.5);
            let effects = (0..*n)
                .filter(|&i| mask[i] > half * model.order_unit()[i])
                .map(|i| {
                    Effect::new(DVector::from_fn(*n, |r, _| {
                        if r == i {
                            model.order_unit()[i]
                        } else {
                            T::zero()
                        }
                    }))
                })
                .collect();
            vec![completed(model, effects)]
        }
        Cone::Custom { .. } => {
            let pu = face.projection_matrix.transpose() * model.order_unit();
            vec![completed(model, vec![Effect::new(pu)])]
        }
    };
    FaceMeasurementPlan::with_settings(face.clone(), model, settings)
}

/// Per-setting outcome frequencies, each row holding one entry per effect
/// followed by the "did not pass the filter" frequency.
pub type SettingFrequencies<T> = Vec<Vec<T>>;

/// Exact outcome probabilities when the source `s` is sent through `filter`
/// and then measured with each setting of `plan`.
pub fn exact_frequencies<T: Scalar>(
    plan: &FaceMeasurementPlan<T>,
    filter: &Filter<T>,
    s: &State<T>,
) -> Result<SettingFrequencies<T>> {
    let filtered = apply(&filter.projection, s)?;
    let incoming = plan_order_unit(plan, s);
    Ok(plan
        .settings
        .iter()
        .map(|ms| {
            let mut row: Vec<T> = ms
                .effects
                .iter()
                .map(|e| e.coords().dot(filtered.coords()))
                .collect();
            let passed = row.iter().fold(T::zero(), |a, b| a + *b);
            row.push(incoming - passed);
            row
        })
        .collect())
}

fn plan_order_unit<T: Scalar>(plan: &FaceMeasurementPlan<T>, s: &State<T>) -> T {
    // every setting sums to the order unit
    let u = plan.settings[0]
        .effects
        .iter()
        .fold(DVector::zeros(s.dim()), |a, e| a + e.coords());
    u.dot(s.coords())
}

/// Estimate of one filtered state.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredEstimate<T: Scalar> {
    pub state: State<T>,
    /// Face-basis coordinates of the estimate.
    pub face_coordinates: DVector<T>,
    /// `u · ŝ`.
    pub normalization: T,
    /// The estimated normalization is below `−tol`.
    pub negative_normalization: bool,
    /// Observed frequencies, per setting, detector outcomes only.
    pub observed: Vec<Vec<T>>,
    /// Probabilities predicted by the estimate, same shape as `observed`.
    pub fitted: Vec<Vec<T>>,
}

/// Least-squares estimate of `P(s)` from the per-setting frequencies.
pub fn estimate_filtered_state<T: Scalar>(
    plan: &FaceMeasurementPlan<T>,
    freqs: &SettingFrequencies<T>,
    filter: &Filter<T>,
    model: &ModelSpace<T>,
) -> Result<FilteredEstimate<T>> {
    model.check_dim(filter.dim())?;
    if freqs.len() != plan.settings.len() {
        return Err(Error::FrequencyShape(format!(
            "{} settings for a plan with {}",
            freqs.len(),
            plan.settings.len()
        )));
    }
    let mut observed = Vec::with_capacity(freqs.len());
    for (row, ms) in freqs.iter().zip(&plan.settings) {
        let n = ms.effects.len();
        if row.len() != n && row.len() != n + 1 {
            return Err(Error::FrequencyShape(format!(
                "{} frequencies for a setting with {n} effects",
                row.len()
            )));
        }
        observed.push(row[..n].to_vec());
    }
    let y = DVector::from_iterator(plan.n_effects(), observed.iter().flatten().copied());
    let design_rank = linalg::rank(&plan.design_matrix, model.tolerances().rank);
    if design_rank < plan.rank() {
        return Err(Error::RankDeficient {
            rank: design_rank,
            expected: plan.rank(),
        });
    }
    let x = linalg::least_squares(&plan.design_matrix, &y, model.tolerances().rank);
    let fitted_flat = &plan.design_matrix * &x;
    let mut fitted = Vec::with_capacity(observed.len());
    let mut k = 0;
    for row in &observed {
        fitted.push(fitted_flat.rows(k, row.len()).iter().copied().collect());
        k += row.len();
    }
    let state = State::new(plan.face.lift(&x));
    let normalization = model.normalization(&state);
    Ok(FilteredEstimate {
        negative_normalization: normalization < -model.tolerances().tol,
        normalization,
        state,
        face_coordinates: x,
        observed,
        fitted,
    })
}

/// `(P_i(s_ij), P_j(s_ij))`.
pub fn extract_single_slit_components<T: Scalar>(
    s_ij: &State<T>,
    ss: &SlitSystem<T>,
    i: usize,
    j: usize,
) -> Result<(State<T>, State<T>)> {
    Ok((
        apply(&ss.filter(SlitSet::single(i)).projection, s_ij)?,
        apply(&ss.filter(SlitSet::single(j)).projection, s_ij)?,
    ))
}

/// `s₁₂ + s₁₃ + s₂₃ − s₁ − s₂ − s₃`, with each `s_i` the average of `P_i`
/// applied to the two face estimates containing slit `i`.
pub fn reconstruct<T: Scalar>(
    estimates: &BTreeMap<SlitSet, State<T>>,
    ss: &SlitSystem<T>,
) -> Result<State<T>> {
    let m = ss.model().dimension();
    let mut total = DVector::zeros(m);
    let mut singles: [DVector<T>; 3] = std::array::from_fn(|_| DVector::zeros(m));
    for face in pair_faces() {
        let s = estimates
            .get(&face)
            .ok_or_else(|| Error::MissingFace(face.key()))?;
        ss.model().check_dim(s.dim())?;
        total += s.coords();
        let slits = face.slits();
        let (si, sj) = extract_single_slit_components(s, ss, slits[0], slits[1])?;
        singles[slits[0] - 1] += si.coords();
        singles[slits[1] - 1] += sj.coords();
    }
    let half = T::lit(0.5);
    for s in &singles {
        total -= s * half;
    }
    Ok(State::new(total))
}

/// How frequencies are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TomographyMode {
    /// Exact outcome probabilities.
    Exact,
    /// Multinomial counts with `shots` fresh systems per setting.
    Sampled { shots: u64, seed: u64 },
}

/// Estimates and diagnostics for one face.
#[derive(Clone, Debug)]
pub struct FaceResult<T: Scalar> {
    pub face_rank: usize,
    pub n_settings: usize,
    pub estimate: FilteredEstimate<T>,
    /// `P_i(ŝ_ij)` and `P_j(ŝ_ij)`.
    pub components: (State<T>, State<T>),
    /// `‖P_ij(ŝ_ij) − ŝ_ij‖₂`.
    pub fixed_point_residual: T,
}

#[derive(Clone, Debug)]
pub struct TomographyResult<T: Scalar> {
    pub mode: TomographyMode,
    pub per_face: BTreeMap<SlitSet, FaceResult<T>>,
    pub reconstructed: State<T>,
    /// `P₁₂₃(s)`, the part of the source that reaches any measurement.
    pub truth: State<T>,
    /// `‖reconstructed − P₁₂₃(s)‖₂`.
    pub reconstruction_error: T,
    /// `‖R₁₂₃(s)‖₂`; equals the error in exact mode.
    pub defect_norm: T,
    /// `P₁₂₃` leaves the source unchanged within tolerance.
    pub source_in_full_face: bool,
    /// Distance of the reconstruction to the state cone (diagnostic only).
    pub cone_distance: T,
}

/// Builds the plans, obtains frequencies (exact or sampled), estimates the
/// three filtered states and reconstructs the source.
pub fn tomography_roundtrip<T: Scalar>(
    model: &ModelSpace<T>,
    ss: &SlitSystem<T>,
    s: &State<T>,
    mode: TomographyMode,
) -> Result<TomographyResult<T>> {
    model.check_dim(ss.model().dimension())?;
    model.check_dim(s.dim())?;
    let faces = pair_faces();
    let per_face: Vec<(SlitSet, FaceResult<T>)> = faces
        .par_iter()
        .map(|&set| -> Result<(SlitSet, FaceResult<T>)> {
            let filter = ss.filter(set);
            let plan = build_face_measurement(&face_of(filter, model)?, model)?;
            let probs = exact_frequencies(&plan, filter, s)?;
            let freqs = match mode {
                TomographyMode::Exact => probs,
                TomographyMode::Sampled { shots, seed } => probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let key = format!("tomography/{}/{k}", set.key());
                        let counts =
                            sample_categorical(p, shots, seed, &key, model.tolerances().tol)?;
                        Ok(counts
                            .into_iter()
                            .map(|c| {
                                if shots == 0 {
                                    T::zero()
                                } else {
                                    T::lit(c as f64 / shots as f64)
                                }
                            })
                            .collect())
                    })
                    .collect::<Result<_>>()?,
            };
            let estimate = estimate_filtered_state(&plan, &freqs, filter, model)?;
            let slits = set.slits();
            let components =
                extract_single_slit_components(&estimate.state, ss, slits[0], slits[1])?;
            let fixed_point_residual =
                apply(&filter.projection, &estimate.state)?.distance(&estimate.state);
            Ok((
                set,
                FaceResult {
                    face_rank: plan.rank(),
                    n_settings: plan.settings.len(),
                    estimate,
                    components,
                    fixed_point_residual,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let per_face: BTreeMap<_, _> = per_face.into_iter().collect();
    let estimates = per_face
        .iter()
        .map(|(k, f)| (*k, f.estimate.state.clone()))
        .collect();
    let reconstructed = reconstruct(&estimates, ss)?;
    let truth = apply(&ss.filter(SlitSet::full(3)).projection, s)?;
    let defect_norm = apply(&defect_operator(ss), s)?.coords().norm();
    Ok(TomographyResult {
        mode,
        reconstruction_error: reconstructed.distance(&truth),
        defect_norm,
        source_in_full_face: truth.distance(s) <= model.tolerances().tol,
        cone_distance: model.cone_distance(reconstructed.coords()),
        per_face,
        reconstructed,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpt::random_state;
    use crate::quantum::{basis_slit_system, classical_slit_system};

    fn qutrit_fixture() -> (ModelSpace<f64>, SlitSystem<f64>, State<f64>) {
        let q = ModelSpace::quantum(3).unwrap();
        let ss = basis_slit_system(&q).unwrap();
        let psi = DVector::from_element(3, Complex::new(1.0 / 3f64.sqrt(), 0.0));
        let s = q
            .state_from_operator(&HermitianOperator::pure(&psi))
            .unwrap();
        (q, ss, s)
    }

    fn plus01() -> HermitianOperator<f64> {
        let v = DVector::from_vec(vec![
            Complex::new(1.0, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
        ]);
        HermitianOperator::outer(&v).scale(1.0 / 3.0)
    }

    #[test]
    fn design_ranks() {
        let (q, ss, _) = qutrit_fixture();
        let p12 = build_face_measurement(&face_of(ss.filter(SlitSet::pair(1, 2)), &q).unwrap(), &q)
            .unwrap();
        assert_eq!(p12.rank(), 4);
        assert_eq!(linalg::rank(&p12.design_matrix, 1e-8), 4);
        let p1 = build_face_measurement(&face_of(ss.filter(SlitSet::single(1)), &q).unwrap(), &q)
            .unwrap();
        assert_eq!(p1.rank(), 1);
        assert_eq!(p1.settings.len(), 1);

        let c = ModelSpace::<f64>::classical(3).unwrap();
        let f = crate::quantum::classical_subset_filter(&c, &[0, 1]).unwrap();
        let plan = build_face_measurement(&face_of(&f, &c).unwrap(), &c).unwrap();
        assert_eq!(plan.rank(), 2);
        assert_eq!(linalg::rank(&plan.design_matrix, 1e-8), 2);
    }

    #[test]
    fn real_face_uses_fewer_settings() {
        let r = ModelSpace::<f64>::real_quantum(3).unwrap();
        let ss = basis_slit_system(&r).unwrap();
        let plan =
            build_face_measurement(&face_of(ss.filter(SlitSet::pair(1, 2)), &r).unwrap(), &r)
                .unwrap();
        assert_eq!(plan.rank(), 3);
        assert_eq!(plan.settings.len(), 2);
    }

    #[test]
    fn exact_filtered_state() {
        let (q, ss, s) = qutrit_fixture();
        let f = ss.filter(SlitSet::pair(1, 2));
        let plan = build_face_measurement(&face_of(f, &q).unwrap(), &q).unwrap();
        let freqs = exact_frequencies(&plan, f, &s).unwrap();
        let est = estimate_filtered_state(&plan, &freqs, f, &q).unwrap();
        let want = q.state_from_operator(&plus01()).unwrap();
        assert!(est.state.distance(&want) < 1e-10);
        assert!((est.normalization - 2.0 / 3.0).abs() < 1e-12);
        assert!(!est.negative_normalization);
    }

    #[test]
    fn sampled_filtered_state() {
        let (q, ss, s) = qutrit_fixture();
        let f = ss.filter(SlitSet::pair(1, 2));
        let plan = build_face_measurement(&face_of(f, &q).unwrap(), &q).unwrap();
        let shots = 1_000_000u64;
        let freqs: SettingFrequencies<f64> = exact_frequencies(&plan, f, &s)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                sample_categorical(p, shots, 3, &format!("t{k}"), 1e-9)
                    .unwrap()
                    .into_iter()
                    .map(|c| c as f64 / shots as f64)
                    .collect()
            })
            .collect();
        let est = estimate_filtered_state(&plan, &freqs, f, &q).unwrap();
        assert!(
            est.state
                .distance(&q.state_from_operator(&plus01()).unwrap())
                < 0.01
        );
    }

    #[test]
    fn zero_state_gives_zero_estimate() {
        let (q, ss, _) = qutrit_fixture();
        let f = ss.filter(SlitSet::pair(1, 2));
        let plan = build_face_measurement(&face_of(f, &q).unwrap(), &q).unwrap();
        let freqs = exact_frequencies(&plan, f, &State::zeros(9)).unwrap();
        assert_eq!(
            estimate_filtered_state(&plan, &freqs, f, &q)
                .unwrap()
                .state
                .coords()
                .norm(),
            0.0
        );
    }

    #[test]
    fn frequency_shape_checked() {
        let (q, ss, _) = qutrit_fixture();
        let f = ss.filter(SlitSet::pair(1, 2));
        let plan = build_face_measurement(&face_of(f, &q).unwrap(), &q).unwrap();
        assert!(matches!(
            estimate_filtered_state(&plan, &vec![vec![0.0]], f, &q),
            Err(Error::FrequencyShape(_))
        ));
    }

    #[test]
    fn single_slit_components() {
        let (q, ss, _) = qutrit_fixture();
        let s12 = q.state_from_operator(&plus01()).unwrap();
        let (s1, s2) = extract_single_slit_components(&s12, &ss, 1, 2).unwrap();
        let d = |a: f64, b: f64| {
            q.state_from_operator(
                &HermitianOperator::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![
                    a, b, 0.0,
                ])))
                .unwrap(),
            )
            .unwrap()
        };
        assert!(s1.distance(&d(1.0 / 3.0, 0.0)) < 1e-12);
        assert!(s2.distance(&d(0.0, 1.0 / 3.0)) < 1e-12);
        let (a, b) = extract_single_slit_components(&s1, &ss, 1, 2).unwrap();
        assert!(a.distance(&s1) < 1e-12 && b.coords().norm() < 1e-12);
    }

    #[test]
    fn reconstruct_requires_all_faces() {
        let (_, ss, s) = qutrit_fixture();
        let only = [(SlitSet::pair(1, 2), s)].into_iter().collect();
        assert!(matches!(
            reconstruct(&only, &ss),
            Err(Error::MissingFace(_))
        ));
    }

    #[test]
    fn state_inside_one_face_is_recovered() {
        let (q, ss, _) = qutrit_fixture();
        let s = q.state_from_operator(&plus01().scale(1.5)).unwrap();
        let estimates = pair_faces()
            .into_iter()
            .map(|f| (f, apply(&ss.filter(f).projection, &s).unwrap()))
            .collect();
        assert!(reconstruct(&estimates, &ss).unwrap().distance(&s) < 1e-12);
    }

    #[test]
    fn exact_roundtrips() {
        let (q, ss, s) = qutrit_fixture();
        let r = tomography_roundtrip(&q, &ss, &s, TomographyMode::Exact).unwrap();
        assert!(r.reconstruction_error < 1e-10);
        assert!(r.source_in_full_face);
        assert!(r.cone_distance < 1e-9);
        for f in r.per_face.values() {
            assert!(f.fixed_point_residual < 1e-10);
        }

        let c = ModelSpace::<f64>::classical(3).unwrap();
        let css = classical_slit_system(&c, [vec![0], vec![1], vec![2]]).unwrap();
        for seed in 0..5 {
            let s = random_state(&c, seed);
            assert!(
                tomography_roundtrip(&c, &css, &s, TomographyMode::Exact)
                    .unwrap()
                    .reconstruction_error
                    < 1e-12
            );
        }
    }

    #[test]
    fn sampled_roundtrip_is_reproducible() {
        let (q, ss, s) = qutrit_fixture();
        let mode = TomographyMode::Sampled {
            shots: 100_000,
            seed: 8,
        };
        let a = tomography_roundtrip(&q, &ss, &s, mode).unwrap();
        let b = tomography_roundtrip(&q, &ss, &s, mode).unwrap();
        assert_eq!(a.reconstructed, b.reconstructed);
        assert!(a.reconstruction_error > 0.0 && a.reconstruction_error < 0.05);
    }
}
