//! Builders for concrete models (complex quantum, real quantum, classical),
//! conjugation superoperators, and the spin-1 Feynman-filter geometry.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gpt::{
    apply, probability, Cone, Effect, Filter, Measurement, ModelSpace, State, Transformation,
};
use crate::hermitian::{basis_element, Field, HermitianOperator};
use crate::interference::{SlitSet, SlitSystem};
use crate::rng::rng_from_seed;
use crate::scalar::{Scalar, Tolerances};

/// Eigenvalue gap below which eigenvectors are treated as one degenerate block.
pub const DEGENERACY_GAP: f64 = 1e-8;

pub fn build_quantum_model<T: Scalar>(d: usize) -> Result<ModelSpace<T>> {
    ModelSpace::quantum(d)
}

pub fn build_real_quantum_model<T: Scalar>(d: usize) -> Result<ModelSpace<T>> {
    ModelSpace::real_quantum(d)
}

pub fn build_classical_model<T: Scalar>(n: usize) -> Result<ModelSpace<T>> {
    ModelSpace::classical(n)
}

fn check_projector<T: Scalar>(pi: &HermitianOperator<T>, model: &ModelSpace<T>) -> Result<()> {
    let (d, _) = model.hilbert().ok_or_else(|| {
        Error::UnsupportedModel(format!(
            "{} model has no Hilbert space",
            model.cone().kind()
        ))
    })?;
    if pi.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: pi.dim(),
        });
    }
    let r = pi.idempotence_residual();
    if r > model.tolerances().projector {
        return Err(Error::NotAProjection(r.as_f64()));
    }
    Ok(())
}

/// The matrix of `ρ ↦ Π ρ Π` in embedded coordinates.
pub fn conjugation_superoperator<T: Scalar>(
    pi: &HermitianOperator<T>,
    model: &ModelSpace<T>,
) -> Result<Transformation<T>> {
    check_projector(pi, model)?;
    let (d, field) = model.hilbert().expect("checked above");
    let m = model.dimension();
    let mut mat = DMatrix::zeros(m, m);
    for k in 0..m {
        let b = basis_element::<T>(k, d, field);
        mat.set_column(k, &model.embed(&b.conjugate_by(pi))?);
    }
    Transformation::new(mat)
}

/// Filter `ρ ↦ ΠρΠ` with complement `ρ ↦ (I−Π)ρ(I−Π)`.
pub fn projector_filter<T: Scalar>(
    pi: &HermitianOperator<T>,
    model: &ModelSpace<T>,
) -> Result<Filter<T>> {
    let comp = HermitianOperator::identity(pi.dim()).sub(pi);
    Filter::new(
        conjugation_superoperator(pi, model)?,
        conjugation_superoperator(&comp, model)?,
    )
}

/// Filters for every nonempty subset of the given pairwise-orthogonal projectors.
pub fn subset_filters<T: Scalar>(
    pis: &[HermitianOperator<T>],
    model: &ModelSpace<T>,
) -> Result<BTreeMap<SlitSet, Filter<T>>> {
    for p in pis {
        check_projector(p, model)?;
    }
    let tol = model.tolerances().projector;
    for i in 0..pis.len() {
        for j in (i + 1)..pis.len() {
            let r = (pis[i].matrix() * pis[j].matrix()).norm();
            if r > tol {
                return Err(Error::SlitsNotOrthogonal(i + 1, j + 1, r.as_f64()));
            }
        }
    }
    let k = pis.len();
    let mut out = BTreeMap::new();
    for set in SlitSet::all_nonempty(k)? {
        let d = pis[0].dim();
        let sum = set
            .slits()
            .into_iter()
            .fold(HermitianOperator::zeros(d), |acc, i| acc.add(&pis[i - 1]));
        out.insert(set, projector_filter(&sum, model)?);
    }
    Ok(out)
}

/// Three-slit system whose `P_J` are conjugations by `Σ_{i∈J} Πᵢ`.
pub fn slit_system_from_projectors<T: Scalar>(
    pis: &[HermitianOperator<T>; 3],
    model: &ModelSpace<T>,
) -> Result<SlitSystem<T>> {
    SlitSystem::new(model.clone(), subset_filters(pis, model)?)
}

/// Coordinate-mask filter keeping `indices` (zero-based) of a classical model.
pub fn classical_subset_filter<T: Scalar>(
    model: &ModelSpace<T>,
    indices: &[usize],
) -> Result<Filter<T>> {
    let Cone::Classical { n } = *model.cone() else {
        return Err(Error::UnsupportedModel(
            "subset filters need a classical model".into(),
        ));
    };
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad + 1,
        });
    }
    let keep = DVector::from_fn(n, |i, _| {
        if indices.contains(&i) {
            T::one()
        } else {
            T::zero()
        }
    });
    let drop = keep.map(|x| T::one() - x);
    Filter::new(
        Transformation::new(DMatrix::from_diagonal(&keep))?,
        Transformation::new(DMatrix::from_diagonal(&drop))?,
    )
}

/// Subset filters for disjoint groups of classical coordinates.
pub fn classical_subset_filters<T: Scalar>(
    model: &ModelSpace<T>,
    groups: &[Vec<usize>],
) -> Result<BTreeMap<SlitSet, Filter<T>>> {
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            if groups[i].iter().any(|x| groups[j].contains(x)) {
                return Err(Error::SlitsNotOrthogonal(i + 1, j + 1, 1.0));
            }
        }
    }
    let mut out = BTreeMap::new();
    for set in SlitSet::all_nonempty(groups.len())? {
        let idx: Vec<usize> = set
            .slits()
            .into_iter()
            .flat_map(|i| groups[i - 1].iter().copied())
            .collect();
        out.insert(set, classical_subset_filter(model, &idx)?);
    }
    Ok(out)
}

pub fn classical_slit_system<T: Scalar>(
    model: &ModelSpace<T>,
    groups: [Vec<usize>; 3],
) -> Result<SlitSystem<T>> {
    SlitSystem::new(model.clone(), classical_subset_filters(model, &groups)?)
}

/// Single-coordinate slits `{0}, {1}, …` (classical) or computational-basis
/// projectors `|0⟩⟨0|, |1⟩⟨1|, …` (matrix models), for `k` slits.
pub fn basis_subset_filters<T: Scalar>(
    model: &ModelSpace<T>,
    k: usize,
) -> Result<BTreeMap<SlitSet, Filter<T>>> {
    match model.cone() {
        Cone::Classical { n } => {
            if k > *n {
                return Err(Error::DimensionMismatch {
                    expected: *n,
                    found: k,
                });
            }
            classical_subset_filters(model, &(0..k).map(|i| vec![i]).collect::<Vec<_>>())
        }
        Cone::Quantum { d } | Cone::RealQuantum { d } => {
            if k > *d {
                return Err(Error::DimensionMismatch {
                    expected: *d,
                    found: k,
                });
            }
            let pis: Vec<_> = (0..k)
                .map(|i| HermitianOperator::basis_projector(*d, i))
                .collect();
            subset_filters(&pis, model)
        }
        Cone::Custom { .. } => Err(Error::UnsupportedModel(
            "custom models have no basis slits".into(),
        )),
    }
}

/// Three basis slits; for `d > 3` they span a proper subspace.
pub fn basis_slit_system<T: Scalar>(model: &ModelSpace<T>) -> Result<SlitSystem<T>> {
    SlitSystem::new(model.clone(), basis_subset_filters(model, 3)?)
}

fn c<T: Scalar>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

fn check_axis<T: Scalar>(axis: &[T; 3]) -> Result<()> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let limit = Tolerances::<T>::default().projector;
    if (norm - T::one()).abs() > limit {
        return Err(Error::NonUnitAxis(norm.as_f64()));
    }
    Ok(())
}

/// `S·n = n_x S_x + n_y S_y + n_z S_z` for spin 1 in the `S_z` eigenbasis
/// ordered `m = +1, 0, −1`.
pub fn spin1_operator<T: Scalar>(axis: [T; 3]) -> Result<HermitianOperator<T>> {
    check_axis(&axis)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let sx: DMatrix<Complex<T>> = DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0., 0.),
            c(r, 0.),
            c(0., 0.),
            c(r, 0.),
            c(0., 0.),
            c(r, 0.),
            c(0., 0.),
            c(r, 0.),
            c(0., 0.),
        ],
    );
    let sy: DMatrix<Complex<T>> = DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0., 0.),
            c(0., -r),
            c(0., 0.),
            c(0., r),
            c(0., 0.),
            c(0., -r),
            c(0., 0.),
            c(0., r),
            c(0., 0.),
        ],
    );
    let sz: DMatrix<Complex<T>> =
        DMatrix::from_diagonal(&DVector::from_vec(vec![c(1., 0.), c(0., 0.), c(-1., 0.)]));
    let s = sx * Complex::from(axis[0]) + sy * Complex::from(axis[1]) + sz * Complex::from(axis[2]);
    HermitianOperator::new(s)
}

/// Spectral projectors of `h`, ordered by descending eigenvalue. Eigenvalues
/// closer than `gap` are merged into one projector after re-orthogonalising
/// the block's eigenvectors.
pub fn eigenprojectors<T: Scalar>(
    h: &HermitianOperator<T>,
    gap: T,
) -> Vec<(T, HermitianOperator<T>)> {
    let (values, vectors) = h.eigen_descending();
    let d = h.dim();
    let mut out = Vec::new();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (values[end - 1] - values[end]).abs() < gap {
            end += 1;
        }
        // modified Gram–Schmidt within the block
        let mut block: Vec<DVector<Complex<T>>> = Vec::new();
        for col in start..end {
            let mut v = vectors.column(col).into_owned();
            for q in &block {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
            let n = v.norm();
            if n > T::zero() {
                block.push(v.unscale(n));
            }
        }
        let proj = block.iter().fold(HermitianOperator::zeros(d), |acc, v| {
            acc.add(&HermitianOperator::outer(v))
        });
        let mean = values[start..end].iter().fold(T::zero(), |a, b| a + *b)
            / T::from_usize(end - start).expect("block size fits");
        out.push((mean, proj));
        start = end;
    }
    out
}

/// Feynman filter along `b` followed by a Stern–Gerlach measurement along `d`.
#[derive(Clone, Debug)]
pub struct Spin1Setup<T: Scalar> {
    pub filter_axis: [T; 3],
    pub detector_axis: [T; 3],
    /// Eigenprojectors of `S·b` for eigenvalues `+1, 0, −1`.
    pub slit_projectors: [HermitianOperator<T>; 3],
    /// Eigenprojectors of `S·d` for eigenvalues `+1, 0, −1`.
    pub detector_effects: [HermitianOperator<T>; 3],
}

fn spin1_projectors<T: Scalar>(axis: [T; 3]) -> Result<[HermitianOperator<T>; 3]> {
    let s = spin1_operator(axis)?;
    let parts = eigenprojectors(&s, T::lit(DEGENERACY_GAP));
    if parts.len() != 3 {
        return Err(Error::DegenerateSpectrum(format!(
            "{} distinct eigenvalues",
            parts.len()
        )));
    }
    let recon = parts
        .iter()
        .fold(HermitianOperator::zeros(3), |acc, (l, p)| {
            acc.add(&p.scale(*l))
        });
    let r = (recon.matrix() - s.matrix()).norm();
    if r > Tolerances::<T>::default().projector {
        return Err(Error::DegenerateSpectrum(format!(
            "reconstruction residual {:e}",
            r.as_f64()
        )));
    }
    let mut it = parts.into_iter().map(|(_, p)| p);
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

pub fn spin1_feynman_setup<T: Scalar>(b: [T; 3], d: [T; 3]) -> Result<Spin1Setup<T>> {
    Ok(Spin1Setup {
        filter_axis: b,
        detector_axis: d,
        slit_projectors: spin1_projectors(b)?,
        detector_effects: spin1_projectors(d)?,
    })
}

impl<T: Scalar> Spin1Setup<T> {
    pub fn slit_system(&self, model: &ModelSpace<T>) -> Result<SlitSystem<T>> {
        slit_system_from_projectors(&self.slit_projectors, model)
    }

    pub fn detector_measurement(&self, model: &ModelSpace<T>) -> Result<Measurement<T>> {
        detector_measurement(model, &self.detector_effects)
    }
}

pub fn detector_measurement<T: Scalar>(
    model: &ModelSpace<T>,
    effects: &[HermitianOperator<T>],
) -> Result<Measurement<T>> {
    Ok(Measurement::new(
        effects
            .iter()
            .map(|e| model.effect_from_operator(e))
            .collect::<Result<_>>()?,
    ))
}

/// `prob(detector & filter | s) = detector · P(s)`.
pub fn joint_probability<T: Scalar>(
    detector: &Effect<T>,
    filter: &Filter<T>,
    s: &State<T>,
) -> Result<T> {
    probability(detector, &apply(&filter.projection, s)?)
}

fn random_vector<T: Scalar>(
    d: usize,
    field: Field,
    rng: &mut crate::rng::Rng,
) -> DVector<Complex<T>> {
    DVector::from_fn(d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if field == Field::Complex {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        c(re, im)
    })
}

/// Random pure state `|ψ⟩⟨ψ|` with ψ uniform on the unit sphere.
pub fn random_pure_state<T: Scalar>(model: &ModelSpace<T>, seed: u64) -> Result<State<T>> {
    let (d, field) = model
        .hilbert()
        .ok_or_else(|| Error::UnsupportedModel("pure states need a matrix model".into()))?;
    let mut rng = rng_from_seed(seed);
    let v = random_vector::<T>(d, field, &mut rng);
    model.state_from_operator(&HermitianOperator::pure(&v))
}

/// Random rank-1 projector effect.
pub fn random_rank1_effect<T: Scalar>(model: &ModelSpace<T>, seed: u64) -> Result<Effect<T>> {
    let (d, field) = model
        .hilbert()
        .ok_or_else(|| Error::UnsupportedModel("rank-1 effects need a matrix model".into()))?;
    let mut rng = rng_from_seed(seed);
    let v = random_vector::<T>(d, field, &mut rng);
    model.effect_from_operator(&HermitianOperator::pure(&v))
}

/// `k` rank-1 projectors onto random orthonormal vectors (QR of a Gaussian
/// matrix), so the slits span a random `k`-dimensional subspace.
pub fn random_rank1_slits<T: Scalar>(
    model: &ModelSpace<T>,
    k: usize,
    seed: u64,
) -> Result<Vec<HermitianOperator<T>>> {
    let (d, field) = model
        .hilbert()
        .ok_or_else(|| Error::UnsupportedModel("rank-1 slits need a matrix model".into()))?;
    if k > d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: k,
        });
    }
    let mut rng = rng_from_seed(seed);
    let cols: Vec<_> = (0..k)
        .map(|_| random_vector::<T>(d, field, &mut rng))
        .collect();
    let q = DMatrix::from_columns(&cols).qr().q();
    Ok((0..k)
        .map(|j| HermitianOperator::pure(&q.column(j).into_owned()))
        .collect())
}

/// Uniformly random unit vector in `R³`.
pub fn random_unit_axis<T: Scalar>(seed: u64) -> [T; 3] {
    let mut rng = rng_from_seed(seed);
    loop {
        let v: [f64; 3] = [
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [T::lit(v[0] / n), T::lit(v[1] / n), T::lit(v[2] / n)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpt::{face_of, random_effect, random_state, validate_filter, validate_measurement};

    fn psi() -> DVector<Complex<f64>> {
        DVector::from_element(3, Complex::new(1.0 / 3f64.sqrt(), 0.0))
    }

    #[test]
    fn model_dimensions() {
        assert_eq!(build_quantum_model::<f64>(3).unwrap().dimension(), 9);
        assert_eq!(build_quantum_model::<f64>(2).unwrap().dimension(), 4);
        assert_eq!(build_real_quantum_model::<f64>(3).unwrap().dimension(), 6);
        assert_eq!(build_classical_model::<f64>(3).unwrap().dimension(), 3);
        assert!(matches!(
            build_quantum_model::<f64>(1),
            Err(Error::InvalidDimension(1))
        ));
        assert!(build_real_quantum_model::<f64>(0).is_err());
        assert!(build_classical_model::<f64>(1).is_err());
    }

    #[test]
    fn real_quantum_cone_membership() {
        let m = build_real_quantum_model::<f64>(3).unwrap();
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.5, 1.0, 0.1, -0.7, 0.4, 0.9]);
        let rho = &g * g.transpose();
        let rho = &rho / rho.trace();
        let s = m
            .state_from_operator(&HermitianOperator::from_real(rho).unwrap())
            .unwrap();
        assert!(m.contains(s.coords()));
        assert!(m.is_normalized(&s));
        let back = m.unembed(s.coords()).unwrap();
        assert!((m.embed(&back).unwrap() - s.coords()).norm() < 1e-14);
    }

    #[test]
    fn identity_conjugation_is_identity() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let t = conjugation_superoperator(&HermitianOperator::identity(3), &q).unwrap();
        assert!((t.matrix() - DMatrix::identity(9, 9)).norm() < 1e-14);
    }

    #[test]
    fn rank_one_conjugation_example() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let t = conjugation_superoperator(&HermitianOperator::basis_projector(3, 0), &q).unwrap();
        let s = q
            .state_from_operator(&HermitianOperator::pure(&psi()))
            .unwrap();
        let out = apply(&t, &s).unwrap();
        let mut diag = DMatrix::zeros(3, 3);
        diag[(0, 0)] = 1.0 / 3.0;
        let expected = q
            .embed(&HermitianOperator::from_real(diag).unwrap())
            .unwrap();
        assert!((out.coords() - expected).norm() < 1e-14);
    }

    #[test]
    fn rank_two_conjugation_has_rank_four() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let pi =
            HermitianOperator::basis_projector(3, 0).add(&HermitianOperator::basis_projector(3, 1));
        let f = projector_filter(&pi, &q).unwrap();
        assert_eq!(face_of(&f, &q).unwrap().rank, 4);
    }

    #[test]
    fn conjugation_rejects_non_projector() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let r = conjugation_superoperator(&HermitianOperator::identity(3).scale(0.5), &q);
        assert!(matches!(r, Err(Error::NotAProjection(_))));
    }

    #[test]
    fn conjugation_matches_basis_action() {
        // applying the superoperator to each basis element and re-embedding reproduces its columns
        let q = build_quantum_model::<f64>(3).unwrap();
        let setup = spin1_feynman_setup([0.0, 0.6, 0.8], [1.0, 0.0, 0.0]).unwrap();
        let pi = &setup.slit_projectors[1];
        let t = conjugation_superoperator(pi, &q).unwrap();
        for k in 0..9 {
            let b = basis_element::<f64>(k, 3, Field::Complex);
            let direct = q.embed(&b.conjugate_by(pi)).unwrap();
            let mut e = DVector::zeros(9);
            e[k] = 1.0;
            assert!((t.matrix() * e - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_slits_on_qutrit() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let ss = basis_slit_system(&q).unwrap();
        let full = ss.projection(SlitSet::full(3));
        assert!((full - DMatrix::identity(9, 9)).norm() < 1e-13);
        for f in ss.filters().values() {
            assert!(validate_filter(f, &q, 100, 9).passed());
        }
    }

    #[test]
    fn basis_slits_on_ququart_span_subspace() {
        let q = build_quantum_model::<f64>(4).unwrap();
        let ss = basis_slit_system(&q).unwrap();
        let full = ss.projection(SlitSet::full(3));
        assert!((full - DMatrix::identity(16, 16)).norm() > 1.0);
    }

    #[test]
    fn non_orthogonal_slits_rejected() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let plus = DVector::from_vec(vec![
            Complex::new(1.0, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
        ]);
        let pis = [
            HermitianOperator::basis_projector(3, 0),
            HermitianOperator::pure(&plus),
            HermitianOperator::basis_projector(3, 2),
        ];
        assert!(matches!(
            slit_system_from_projectors(&pis, &q),
            Err(Error::SlitsNotOrthogonal(1, 2, _))
        ));
    }

    #[test]
    fn spin1_z_is_diagonal() {
        let s = spin1_operator([0.0, 0.0, 1.0]).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -1.0]));
        assert!((s.real_part() - expected).norm() < 1e-15);
        assert!(s.imag_part().norm() < 1e-15);
    }

    #[test]
    fn spin1_x_spectrum() {
        let ev = spin1_operator::<f64>([1.0, 0.0, 0.0])
            .unwrap()
            .eigenvalues();
        for (got, want) in ev.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn spin1_rejects_non_unit_axis() {
        assert!(matches!(
            spin1_operator([1.0, 1.0, 0.0]),
            Err(Error::NonUnitAxis(_))
        ));
    }

    #[test]
    fn feynman_setup_z_z_is_computational_basis() {
        let s = spin1_feynman_setup([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]).unwrap();
        for i in 0..3 {
            let e = HermitianOperator::<f64>::basis_projector(3, i);
            assert!((s.slit_projectors[i].matrix() - e.matrix()).norm() < 1e-12);
            assert!((s.detector_effects[i].matrix() - e.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn feynman_setup_detectors_are_sx_eigenprojectors() {
        let s = spin1_feynman_setup([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]).unwrap();
        // S_x eigenvectors: (1, √2, 1)/2, (1, 0, −1)/√2, (1, −√2, 1)/2
        let r2 = 2f64.sqrt();
        let vecs = [
            [0.5, r2 / 2.0, 0.5],
            [1.0 / r2, 0.0, -1.0 / r2],
            [0.5, -r2 / 2.0, 0.5],
        ];
        for (i, v) in vecs.iter().enumerate() {
            let v = DVector::from_iterator(3, v.iter().map(|x| Complex::new(*x, 0.0)));
            let expected = HermitianOperator::outer(&v);
            assert!(
                (s.detector_effects[i].matrix() - expected.matrix()).norm() < 1e-12,
                "index {i}"
            );
        }
    }

    #[test]
    fn spin1_completeness_on_random_axes() {
        for seed in 0..100 {
            let setup =
                spin1_feynman_setup(random_unit_axis::<f64>(seed), random_unit_axis(seed + 1000))
                    .unwrap();
            for group in [&setup.slit_projectors, &setup.detector_effects] {
                let sum = group
                    .iter()
                    .fold(HermitianOperator::zeros(3), |a, p| a.add(p));
                assert!((sum.matrix() - DMatrix::identity(3, 3)).norm() < 1e-10);
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            assert!((group[i].matrix() * group[j].matrix()).norm() < 1e-10);
                        }
                    }
                }
            }
            let q = build_quantum_model::<f64>(3).unwrap();
            assert!(validate_measurement(&setup.detector_measurement(&q).unwrap(), &q).passed());
        }
    }

    #[test]
    fn degenerate_block_is_merged() {
        let h =
            HermitianOperator::<f64>::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![
                1.0, 1.0, 0.0,
            ])))
            .unwrap();
        let parts = eigenprojectors(&h, 1e-8);
        assert_eq!(parts.len(), 2);
        assert!((parts[0].1.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn joint_probability_examples() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let rho = HermitianOperator::pure(&psi());
        let s = q.state_from_operator(&rho).unwrap();
        let det = q.effect_from_operator(&rho).unwrap();
        let pi12 =
            HermitianOperator::basis_projector(3, 0).add(&HermitianOperator::basis_projector(3, 1));
        let f12 = projector_filter(&pi12, &q).unwrap();
        assert!((joint_probability(&det, &f12, &s).unwrap() - 4.0 / 9.0).abs() < 1e-14);

        let id = projector_filter(&HermitianOperator::identity(3), &q).unwrap();
        assert!((joint_probability(&q.unit_effect(), &id, &s).unwrap() - 1.0).abs() < 1e-14);

        let f2 = projector_filter(&HermitianOperator::basis_projector(3, 1), &q).unwrap();
        let d0 = q
            .effect_from_operator(&HermitianOperator::basis_projector(3, 0))
            .unwrap();
        assert!(joint_probability(&d0, &f2, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn joint_probability_matches_matrix_picture() {
        let q = build_quantum_model::<f64>(3).unwrap();
        for seed in 0..100u64 {
            let s = random_state(&q, seed);
            let e = random_effect(&q, seed + 500);
            let setup =
                spin1_feynman_setup(random_unit_axis::<f64>(seed + 900), [0.0, 0.0, 1.0]).unwrap();
            let pi = &setup.slit_projectors[(seed % 3) as usize];
            let f = projector_filter(pi, &q).unwrap();
            let rho = q.unembed(s.coords()).unwrap();
            let dop = q.unembed(e.coords()).unwrap();
            let direct = (dop.matrix() * pi.matrix() * rho.matrix() * pi.matrix())
                .trace()
                .re;
            assert!((joint_probability(&e, &f, &s).unwrap() - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn classical_subset_filters_validate() {
        let c = build_classical_model::<f64>(3).unwrap();
        let ss = classical_slit_system(&c, [vec![0], vec![1], vec![2]]).unwrap();
        for f in ss.filters().values() {
            assert!(validate_filter(f, &c, 100, 4).passed());
        }
        assert!(classical_subset_filters(&c, &[vec![0, 1], vec![1]]).is_err());
    }

    #[test]
    fn random_pure_states_and_rank1_effects() {
        let q = build_quantum_model::<f64>(3).unwrap();
        let s = random_pure_state(&q, 3).unwrap();
        let rho = q.unembed(s.coords()).unwrap();
        assert!((rho.trace_product(&rho) - 1.0).abs() < 1e-12);
        let e = random_rank1_effect(&q, 3).unwrap();
        assert!((q.unembed(e.coords()).unwrap().trace() - 1.0).abs() < 1e-12);
        assert_eq!(random_pure_state(&q, 3).unwrap(), s);
    }
}
