//! The Sorkin hierarchy on three-slit systems: interference terms from
//! probability tables and from the operator form, the signed two-slit
//! operator `P⁽³⁾ = P₁₂ + P₁₃ + P₂₃ − P₁ − P₂ − P₃`, the defect
//! `R₁₂₃ = P₁₂₃ − P⁽³⁾`, and a checker for the three equivalent
//! no-third-order-interference conditions.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gpt::{
    face_of, probability, random_effect, random_state, validate_filter, Effect, Filter, ModelSpace,
    State, Transformation, ValidationReport,
};
use crate::linalg;
use crate::rng::derive_seed;
use crate::scalar::Scalar;

/// Largest number of slits a [`SlitSet`] can address (keys are single digits).
pub const MAX_SLITS: usize = 9;

/// A set of open slits, stored as a bitmask over slits `1..=9`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlitSet(u16);

impl SlitSet {
    pub const EMPTY: SlitSet = SlitSet(0);

    /// Set from one-based slit indices.
    pub fn new(slits: &[usize]) -> Result<Self> {
        let mut bits = 0u16;
        for &s in slits {
            if s == 0 || s > MAX_SLITS {
                return Err(Error::Parse(format!(
                    "slit index {s} out of range 1..={MAX_SLITS}"
                )));
            }
            bits |= 1 << (s - 1);
        }
        Ok(SlitSet(bits))
    }

    pub fn single(i: usize) -> Self {
        assert!((1..=MAX_SLITS).contains(&i), "slit index out of range");
        SlitSet(1 << (i - 1))
    }

    pub fn pair(i: usize, j: usize) -> Self {
        SlitSet::single(i).union(SlitSet::single(j))
    }

    /// All of `1..=k`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_SLITS, "too many slits");
        SlitSet(((1u32 << k) - 1) as u16)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        (1..=MAX_SLITS).contains(&i) && self.0 & (1 << (i - 1)) != 0
    }

    pub fn union(self, other: Self) -> Self {
        SlitSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        SlitSet(self.0 & other.0)
    }

    /// One-based slit indices in increasing order.
    pub fn slits(self) -> Vec<usize> {
        (1..=MAX_SLITS).filter(|&i| self.contains(i)).collect()
    }

    /// Every nonempty subset of `1..=k`, in bitmask order.
    pub fn all_nonempty(k: usize) -> Result<impl Iterator<Item = SlitSet>> {
        if k == 0 || k > MAX_SLITS {
            return Err(Error::InvalidOrder(k));
        }
        Ok((1u16..(1u16 << k)).map(SlitSet))
    }

    /// Sorted digit string, e.g. `"13"`.
    pub fn key(self) -> String {
        self.slits()
            .iter()
            .map(|i| char::from(b'0' + *i as u8))
            .collect()
    }

    pub fn parse(key: &str) -> Result<Self> {
        if key.is_empty() {
            return Err(Error::Parse("empty slit set".into()));
        }
        let mut slits = Vec::new();
        for ch in key.chars() {
            let d = ch
                .to_digit(10)
                .ok_or_else(|| Error::Parse(format!("invalid slit key {key:?}")))?
                as usize;
            slits.push(d);
        }
        let set = SlitSet::new(&slits)?;
        if set.len() != slits.len() {
            return Err(Error::Parse(format!("repeated slit in key {key:?}")));
        }
        Ok(set)
    }
}

impl Serialize for SlitSet {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

impl<'de> serde::Deserialize<'de> for SlitSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let key = String::deserialize(deserializer)?;
        SlitSet::parse(&key).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for SlitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Three pairwise-orthogonal slit filters and the filters for every nonempty
/// union of them.
#[derive(Clone, Debug)]
pub struct SlitSystem<T: Scalar> {
    model: ModelSpace<T>,
    filters: BTreeMap<SlitSet, Filter<T>>,
}

impl<T: Scalar> SlitSystem<T> {
    /// Builds and checks pairwise orthogonality and `P_J P_K = P_K P_J = P_{J∩K}`.
    pub fn new(model: ModelSpace<T>, filters: BTreeMap<SlitSet, Filter<T>>) -> Result<Self> {
        let ss = Self::from_parts_unchecked(model, filters)?;
        let limit = ss.model.tolerances().proj;
        let orth = ss.orthogonality_residual();
        if orth > limit {
            return Err(Error::InvalidSlitSystem(format!(
                "single slits not orthogonal: {:e}",
                orth.as_f64()
            )));
        }
        let prod = ss.product_relation_residual();
        if prod > limit {
            return Err(Error::InvalidSlitSystem(format!(
                "product relations violated: {:e}",
                prod.as_f64()
            )));
        }
        Ok(ss)
    }

    /// Only checks that all seven filters are present with matching dimensions.
    pub fn from_parts_unchecked(
        model: ModelSpace<T>,
        filters: BTreeMap<SlitSet, Filter<T>>,
    ) -> Result<Self> {
        for set in SlitSet::all_nonempty(3)? {
            let f = filters
                .get(&set)
                .ok_or_else(|| Error::MissingSetting(set.key()))?;
            model.check_dim(f.dim())?;
        }
        let filters = filters
            .into_iter()
            .filter(|(k, _)| SlitSet::full(3).union(*k) == SlitSet::full(3))
            .collect();
        Ok(SlitSystem { model, filters })
    }

    pub fn model(&self) -> &ModelSpace<T> {
        &self.model
    }

    pub fn filters(&self) -> &BTreeMap<SlitSet, Filter<T>> {
        &self.filters
    }

    pub fn filter(&self, set: SlitSet) -> &Filter<T> {
        &self.filters[&set]
    }

    pub fn projection(&self, set: SlitSet) -> &DMatrix<T> {
        self.filters[&set].matrix()
    }

    /// Returns a copy with `P_set` replaced by `matrix`, without re-validating.
    pub fn with_projection(&self, set: SlitSet, matrix: DMatrix<T>) -> Result<Self> {
        let mut filters = self.filters.clone();
        let entry = filters
            .get_mut(&set)
            .ok_or_else(|| Error::MissingSetting(set.key()))?;
        entry.projection = Transformation::new(matrix)?;
        Self::from_parts_unchecked(self.model.clone(), filters)
    }

    fn scaled_limit(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> T {
        a.norm().max(b.norm()).max(T::one())
    }

    /// Worst `‖PᵢPⱼ‖_F` over `i ≠ j`, relative to the operator norms involved.
    pub fn orthogonality_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 1..=3 {
            for j in 1..=3 {
                if i != j {
                    let a = self.projection(SlitSet::single(i));
                    let b = self.projection(SlitSet::single(j));
                    worst = worst.max((a * b).norm() / self.scaled_limit(a, b));
                }
            }
        }
        worst
    }

    /// Worst `‖P_J P_K − P_{J∩K}‖_F` over all ordered pairs (`P_∅ = 0`),
    /// relative to the operator norms involved.
    pub fn product_relation_residual(&self) -> T {
        let mut worst = T::zero();
        let m = self.model.dimension();
        let zero = DMatrix::zeros(m, m);
        for (&j, fj) in &self.filters {
            for (&k, fk) in &self.filters {
                let meet = j.intersection(k);
                let target = if meet.is_empty() {
                    &zero
                } else {
                    self.projection(meet)
                };
                let r = (fj.matrix() * fk.matrix() - target).norm();
                worst = worst.max(r / self.scaled_limit(fj.matrix(), fk.matrix()));
            }
        }
        worst
    }

    /// Orthogonality, product relations, and the filter axioms for all seven
    /// filters.
    pub fn validate(&self, n_samples: usize, seed: u64) -> ValidationReport {
        let mut report = ValidationReport::default();
        let limit = self.model.tolerances().proj;
        report.push(
            "slits pairwise orthogonal",
            self.orthogonality_residual(),
            limit,
        );
        report.push(
            "product relations P_J P_K = P_(J∩K)",
            self.product_relation_residual(),
            limit,
        );
        for (i, (set, f)) in self.filters.iter().enumerate() {
            let sub = validate_filter(f, &self.model, n_samples, derive_seed(seed, i as u64));
            report.extend_prefixed(&format!("P{set}: "), sub);
        }
        report
    }

    /// The seven joint probabilities `r · P_J(s)`.
    pub fn probability_table(
        &self,
        detector: &Effect<T>,
        s: &State<T>,
    ) -> Result<ProbabilityTable<T>> {
        table_from_filters(3, &self.filters, detector, s)
    }
}

/// Joint probabilities `r · P_J(s)` for every nonempty `J ⊆ {1..k}`.
pub fn table_from_filters<T: Scalar>(
    k: usize,
    filters: &BTreeMap<SlitSet, Filter<T>>,
    detector: &Effect<T>,
    s: &State<T>,
) -> Result<ProbabilityTable<T>> {
    let mut table = ProbabilityTable::new(k)?;
    for set in SlitSet::all_nonempty(k)? {
        let f = filters
            .get(&set)
            .ok_or_else(|| Error::MissingSetting(set.key()))?;
        let p = probability(detector, &crate::gpt::apply(&f.projection, s)?)?;
        table.entries.insert(set, p);
    }
    Ok(table)
}

/// Probabilities `p_J` of one detector outcome under each slit configuration.
///
/// Entries are not required to be mutually consistent.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable<T: Scalar> {
    k: usize,
    entries: BTreeMap<SlitSet, T>,
}

impl<T: Scalar> ProbabilityTable<T> {
    pub fn new(k: usize) -> Result<Self> {
        if !(2..=MAX_SLITS).contains(&k) {
            return Err(Error::InvalidOrder(k));
        }
        Ok(ProbabilityTable {
            k,
            entries: BTreeMap::new(),
        })
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(SlitSet) -> T) -> Result<Self> {
        let mut t = Self::new(k)?;
        for set in SlitSet::all_nonempty(k)? {
            t.insert(set, f(set))?;
        }
        Ok(t)
    }

    /// Inserts `p_J`, rejecting sets outside `1..=k` and values outside `[0, 1]`.
    pub fn insert(&mut self, set: SlitSet, p: T) -> Result<()> {
        if set.is_empty() || set.union(SlitSet::full(self.k)) != SlitSet::full(self.k) {
            return Err(Error::Parse(format!(
                "slit set {set} outside 1..={}",
                self.k
            )));
        }
        let slack = crate::scalar::Tolerances::<T>::default().tol;
        if !(p >= -slack && p <= T::one() + slack) {
            return Err(Error::InvalidProbability {
                key: set.key(),
                value: p.as_f64(),
            });
        }
        self.entries.insert(set, p);
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn get(&self, set: SlitSet) -> Option<T> {
        self.entries.get(&set).copied()
    }

    pub fn entries(&self) -> &BTreeMap<SlitSet, T> {
        &self.entries
    }

    fn require(&self, set: SlitSet) -> Result<T> {
        self.get(set).ok_or_else(|| Error::MissingEntry(set.key()))
    }
}

/// `p₁₂₃ − (p₁₂ + p₁₃ + p₂₃) + (p₁ + p₂ + p₃)`.
pub fn i3_from_table<T: Scalar>(t: &ProbabilityTable<T>) -> Result<T> {
    if t.k != 3 {
        return Err(Error::InvalidOrder(t.k));
    }
    let p = |s: &[usize]| t.require(SlitSet::new(s).expect("static slit set"));
    Ok(p(&[1, 2, 3])? - (p(&[1, 2])? + p(&[1, 3])? + p(&[2, 3])?)
        + (p(&[1])? + p(&[2])? + p(&[3])?))
}

/// `p₁₂ − p₁ − p₂`.
pub fn i2_from_table<T: Scalar>(p12: T, p1: T, p2: T) -> T {
    p12 - p1 - p2
}

/// `I_k = Σ_{∅≠J⊆{1..k}} (−1)^{k−|J|} p_J`, accumulated from the largest
/// subsets down so that `k = 3` reproduces [`i3_from_table`] bit for bit.
pub fn ik_from_table<T: Scalar>(t: &ProbabilityTable<T>) -> Result<T> {
    let k = t.k;
    let mut acc = T::zero();
    for size in (1..=k).rev() {
        let mut group = None;
        for set in SlitSet::all_nonempty(k)?.filter(|s| s.len() == size) {
            let p = t.require(set)?;
            group = Some(match group {
                None => p,
                Some(g) => g + p,
            });
        }
        let group = group.unwrap_or_else(T::zero);
        acc = if (k - size).is_multiple_of(2) {
            acc + group
        } else {
            acc - group
        };
    }
    Ok(acc)
}

/// `P⁽³⁾ = P₁₂ + P₁₃ + P₂₃ − P₁ − P₂ − P₃`.
pub fn p3_operator<T: Scalar>(ss: &SlitSystem<T>) -> Transformation<T> {
    let p = |s: &[usize]| ss.projection(SlitSet::new(s).expect("static slit set"));
    let m = p(&[1, 2]) + p(&[1, 3]) + p(&[2, 3]) - p(&[1]) - p(&[2]) - p(&[3]);
    Transformation::new(m).expect("square")
}

/// `R₁₂₃ = P₁₂₃ − P⁽³⁾`.
pub fn defect_operator<T: Scalar>(ss: &SlitSystem<T>) -> Transformation<T> {
    let m = ss.projection(SlitSet::full(3)) - p3_operator(ss).matrix();
    Transformation::new(m).expect("square")
}

/// `I₃ = r · (P₁₂₃ − P⁽³⁾)(s)`.
pub fn i3_operator<T: Scalar>(r: &Effect<T>, ss: &SlitSystem<T>, s: &State<T>) -> Result<T> {
    ss.model().check_dim(r.dim())?;
    ss.model().check_dim(s.dim())?;
    probability(r, &crate::gpt::apply(&defect_operator(ss), s)?)
}

/// `‖P⁽³⁾P⁽³⁾ − P⁽³⁾‖_F`.
pub fn p3_idempotence_residual<T: Scalar>(ss: &SlitSystem<T>) -> T {
    p3_operator(ss).idempotence_residual()
}

/// `(‖R₁₂₃P⁽³⁾‖_F, ‖P⁽³⁾R₁₂₃‖_F)`.
pub fn defect_annihilation_residuals<T: Scalar>(ss: &SlitSystem<T>) -> (T, T) {
    let p3 = p3_operator(ss);
    let r = defect_operator(ss);
    (
        (r.matrix() * p3.matrix()).norm(),
        (p3.matrix() * r.matrix()).norm(),
    )
}

fn two_slit_span<T: Scalar>(ss: &SlitSystem<T>) -> DMatrix<T> {
    let p12 = ss.projection(SlitSet::pair(1, 2));
    let p13 = ss.projection(SlitSet::pair(1, 3));
    let p23 = ss.projection(SlitSet::pair(2, 3));
    linalg::column_space(
        &linalg::hstack(&[p12, p13, p23]),
        ss.model().tolerances().rank,
    )
}

/// Largest distance of an orthonormal image vector of `P₁₂₃` from the span of
/// the columns of `P₁₂`, `P₁₃`, `P₂₃`. Zero exactly when the three-slit face
/// lies in the linear span of the two-slit faces.
pub fn span_condition_check<T: Scalar>(ss: &SlitSystem<T>) -> T {
    let image = linalg::column_space(
        ss.projection(SlitSet::full(3)),
        ss.model().tolerances().rank,
    );
    linalg::max_distance_to_span(&image, &two_slit_span(ss))
}

/// Mutual projection residual between the image of `P⁽³⁾` and the span of
/// the two-slit faces (both directions).
pub fn p3_image_span_residual<T: Scalar>(ss: &SlitSystem<T>) -> T {
    let rank_tol = ss.model().tolerances().rank;
    let img = linalg::column_space(p3_operator(ss).matrix(), rank_tol);
    let span = two_slit_span(ss);
    linalg::max_distance_to_span(&img, &span).max(linalg::max_distance_to_span(&span, &img))
}

/// Outcome of checking the three equivalent no-third-order-interference
/// conditions on one slit system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop1Report {
    /// `sup |I₃|` over the sampled (effect, state) pairs.
    pub sup_abs_i3: f64,
    /// `‖P₁₂₃ − P⁽³⁾‖_F`.
    pub operator_gap: f64,
    /// [`span_condition_check`] residual.
    pub span_defect: f64,
    pub threshold: f64,
    pub sampled_i3_vanishes: bool,
    pub operator_identity_holds: bool,
    pub span_condition_holds: bool,
    /// True when the three verdicts agree.
    pub consistent: bool,
    pub samples_used: usize,
    pub seed: u64,
}

impl Prop1Report {
    /// All three conditions hold.
    pub fn holds(&self) -> bool {
        self.sampled_i3_vanishes && self.operator_identity_holds && self.span_condition_holds
    }
}

/// Maximum `|I₃|` over `n_samples` random (effect, state) pairs; sample `i`
/// draws from seeds derived from `(seed, i)`.
pub fn sampled_sup_abs_i3<T: Scalar>(ss: &SlitSystem<T>, n_samples: usize, seed: u64) -> T {
    let r = defect_operator(ss);
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = random_state(ss.model(), derive_seed(seed, 2 * i));
            let e = random_effect(ss.model(), derive_seed(seed, 2 * i + 1));
            e.coords().dot(&(r.matrix() * s.coords())).abs()
        })
        .reduce(T::zero, |a, b| a.max(b))
}

pub fn prop1_verify<T: Scalar>(ss: &SlitSystem<T>, n_samples: usize, seed: u64) -> Prop1Report {
    let threshold = ss.model().tolerances().prop;
    let sup = sampled_sup_abs_i3(ss, n_samples, seed);
    let gap = defect_operator(ss).matrix().norm();
    let span = span_condition_check(ss);
    let v1 = sup <= threshold;
    let v2 = gap <= threshold;
    let v3 = span <= threshold;
    Prop1Report {
        sup_abs_i3: sup.as_f64(),
        operator_gap: gap.as_f64(),
        span_defect: span.as_f64(),
        threshold: threshold.as_f64(),
        sampled_i3_vanishes: v1,
        operator_identity_holds: v2,
        span_condition_holds: v3,
        consistent: v1 == v2 && v2 == v3,
        samples_used: n_samples,
        seed,
    }
}

/// How a random sweep draws its (state, effect) pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepSampling {
    /// Full-rank states and general effects from the model's random builders.
    General,
    /// Pure states and rank-1 projector detectors (matrix models only).
    PureRankOne,
}

/// Extremes of the interference terms over a random sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub samples: usize,
    pub seed: u64,
    pub sup_abs_i3_table: f64,
    pub sup_abs_i3_operator: f64,
    /// Largest `|table − operator|` disagreement.
    pub max_path_disagreement: f64,
    /// Largest `|I₂|` over the three slit pairs.
    pub max_abs_i2: f64,
}

/// Evaluates `I₂` (three pairs) and `I₃` (table and operator paths) on
/// `n_samples` random pairs.
pub fn interference_sweep<T: Scalar>(
    ss: &SlitSystem<T>,
    n_samples: usize,
    seed: u64,
    sampling: SweepSampling,
) -> Result<SweepReport> {
    let model = ss.model();
    let per_sample = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<[T; 4]> {
            let (s, e) = match sampling {
                SweepSampling::General => (
                    random_state(model, derive_seed(seed, 2 * i)),
                    random_effect(model, derive_seed(seed, 2 * i + 1)),
                ),
                SweepSampling::PureRankOne => (
                    crate::quantum::random_pure_state(model, derive_seed(seed, 2 * i))?,
                    crate::quantum::random_rank1_effect(model, derive_seed(seed, 2 * i + 1))?,
                ),
            };
            let table = ss.probability_table(&e, &s)?;
            let via_table = i3_from_table(&table)?;
            let via_op = i3_operator(&e, ss, &s)?;
            let mut i2 = T::zero();
            for (a, b) in [(1, 2), (1, 3), (2, 3)] {
                let v = i2_from_table(
                    table.require(SlitSet::pair(a, b))?,
                    table.require(SlitSet::single(a))?,
                    table.require(SlitSet::single(b))?,
                );
                i2 = i2.max(v.abs());
            }
            Ok([
                via_table.abs(),
                via_op.abs(),
                (via_table - via_op).abs(),
                i2,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = [T::zero(); 4];
    for row in per_sample {
        for (b, v) in best.iter_mut().zip(row) {
            *b = b.max(v);
        }
    }
    Ok(SweepReport {
        samples: n_samples,
        seed,
        sup_abs_i3_table: best[0].as_f64(),
        sup_abs_i3_operator: best[1].as_f64(),
        max_path_disagreement: best[2].as_f64(),
        max_abs_i2: best[3].as_f64(),
    })
}

/// Face of `P_J` for each of the seven settings.
pub fn faces<T: Scalar>(ss: &SlitSystem<T>) -> Result<BTreeMap<SlitSet, crate::gpt::Face<T>>> {
    ss.filters()
        .iter()
        .map(|(k, f)| Ok((*k, face_of(f, ss.model())?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::HermitianOperator;
    use crate::quantum::{
        basis_slit_system, basis_subset_filters, classical_slit_system, random_unit_axis,
        spin1_feynman_setup,
    };
    use nalgebra::{Complex, DVector};
    use proptest::prelude::*;

    fn qutrit() -> (ModelSpace<f64>, SlitSystem<f64>, State<f64>, Effect<f64>) {
        let q = ModelSpace::quantum(3).unwrap();
        let ss = basis_slit_system(&q).unwrap();
        let psi = DVector::from_element(3, Complex::new(1.0 / 3f64.sqrt(), 0.0));
        let rho = HermitianOperator::pure(&psi);
        let s = q.state_from_operator(&rho).unwrap();
        let e = q.effect_from_operator(&rho).unwrap();
        (q, ss, s, e)
    }

    /// Independent reference: `Tr[D Π_J ρ Π_J]` in the matrix picture.
    fn trace_table(
        d: &HermitianOperator<f64>,
        rho: &HermitianOperator<f64>,
        pis: &[HermitianOperator<f64>],
        k: usize,
    ) -> BTreeMap<SlitSet, f64> {
        SlitSet::all_nonempty(k)
            .unwrap()
            .map(|set| {
                let pi = set
                    .slits()
                    .iter()
                    .fold(HermitianOperator::zeros(d.dim()), |a, i| a.add(&pis[i - 1]));
                (
                    set,
                    (d.matrix() * pi.matrix() * rho.matrix() * pi.matrix())
                        .trace()
                        .re,
                )
            })
            .collect()
    }

    #[test]
    fn slit_set_keys() {
        assert_eq!(SlitSet::new(&[3, 1]).unwrap().key(), "13");
        assert_eq!(SlitSet::parse("123").unwrap(), SlitSet::full(3));
        assert!(SlitSet::parse("11").is_err());
        assert!(SlitSet::parse("1a").is_err());
        assert!(SlitSet::parse("").is_err());
        assert_eq!(SlitSet::all_nonempty(3).unwrap().count(), 7);
        assert_eq!(
            SlitSet::pair(1, 2).intersection(SlitSet::pair(2, 3)),
            SlitSet::single(2)
        );
    }

    #[test]
    fn i3_constructed_table() {
        let t = ProbabilityTable::from_fn(3, |s| -> f64 {
            match s.len() {
                3 => 0.9,
                2 => 0.2,
                _ => 0.1,
            }
        })
        .unwrap();
        assert!((i3_from_table(&t).unwrap() - 0.6).abs() < 1e-15);
        let z = ProbabilityTable::from_fn(3, |_| 0.0).unwrap();
        assert_eq!(i3_from_table(&z).unwrap(), 0.0);
    }

    #[test]
    fn i3_missing_entry() {
        let mut t = ProbabilityTable::<f64>::new(3).unwrap();
        t.insert(SlitSet::single(1), 0.5).unwrap();
        assert!(matches!(i3_from_table(&t), Err(Error::MissingEntry(_))));
        assert!(matches!(ik_from_table(&t), Err(Error::MissingEntry(_))));
    }

    #[test]
    fn table_rejects_out_of_range() {
        let mut t = ProbabilityTable::<f64>::new(3).unwrap();
        assert!(t.insert(SlitSet::single(1), 1.5).is_err());
        assert!(t.insert(SlitSet::single(4), 0.5).is_err());
        assert!(ProbabilityTable::<f64>::new(1).is_err());
    }

    #[test]
    fn qutrit_fixture_table() {
        let (_, ss, s, e) = qutrit();
        let t = ss.probability_table(&e, &s).unwrap();
        assert!((t.get(SlitSet::full(3)).unwrap() - 1.0).abs() < 1e-14);
        assert!((t.get(SlitSet::pair(1, 3)).unwrap() - 4.0 / 9.0).abs() < 1e-14);
        assert!((t.get(SlitSet::single(2)).unwrap() - 1.0 / 9.0).abs() < 1e-14);
        assert!(i3_from_table(&t).unwrap().abs() < 1e-14);
        let i2 = i2_from_table(
            t.get(SlitSet::pair(1, 2)).unwrap(),
            t.get(SlitSet::single(1)).unwrap(),
            t.get(SlitSet::single(2)).unwrap(),
        );
        assert!((i2 - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn i2_diagonal_detector_and_classical() {
        let (q, ss, s, _) = qutrit();
        let d0 = q
            .effect_from_operator(&HermitianOperator::basis_projector(3, 0))
            .unwrap();
        let t = ss.probability_table(&d0, &s).unwrap();
        let i2 = i2_from_table(
            t.get(SlitSet::pair(1, 2)).unwrap(),
            t.get(SlitSet::single(1)).unwrap(),
            t.get(SlitSet::single(2)).unwrap(),
        );
        assert!(i2.abs() < 1e-15);
        assert!((t.get(SlitSet::pair(1, 2)).unwrap() - 1.0 / 3.0).abs() < 1e-14);

        let c = ModelSpace::<f64>::classical(3).unwrap();
        let css = classical_slit_system(&c, [vec![0], vec![1], vec![2]]).unwrap();
        let s = State::new(DVector::from_element(3, 1.0 / 3.0));
        let e = Effect::new(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let t = css.probability_table(&e, &s).unwrap();
        assert_eq!(
            i2_from_table(
                t.get(SlitSet::pair(1, 2)).unwrap(),
                t.get(SlitSet::single(1)).unwrap(),
                t.get(SlitSet::single(2)).unwrap()
            ),
            0.0
        );
    }

    #[test]
    fn ik_order_two() {
        let t = ProbabilityTable::from_fn(2, |s| if s.len() == 2 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(ik_from_table(&t).unwrap(), 1.0);
    }

    #[test]
    fn i4_vanishes_on_four_basis_slits() {
        let q = ModelSpace::<f64>::quantum(4).unwrap();
        let filters = basis_subset_filters(&q, 4).unwrap();
        let pis: Vec<_> = (0..4)
            .map(|i| HermitianOperator::basis_projector(4, i))
            .collect();
        for seed in 0..50 {
            let s = random_state(&q, seed);
            let e = random_effect(&q, seed + 100);
            let t = table_from_filters(4, &filters, &e, &s).unwrap();
            // cross-check entries against the matrix picture
            let reference = trace_table(
                &q.unembed(e.coords()).unwrap(),
                &q.unembed(s.coords()).unwrap(),
                &pis,
                4,
            );
            for (set, p) in &reference {
                assert!((t.get(*set).unwrap() - p).abs() < 1e-12);
            }
            assert!(ik_from_table(&t).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn p3_is_identity_for_full_systems() {
        let (_, ss, _, _) = qutrit();
        assert!((p3_operator(&ss).matrix() - DMatrix::identity(9, 9)).norm() < 1e-13);
        assert!(defect_operator(&ss).matrix().norm() < 1e-13);

        let c = ModelSpace::<f64>::classical(3).unwrap();
        let css = classical_slit_system(&c, [vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(p3_operator(&css).matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn subspace_system_identities() {
        let q = ModelSpace::<f64>::quantum(4).unwrap();
        let ss = basis_slit_system(&q).unwrap();
        assert!(defect_operator(&ss).matrix().norm() < 1e-10);
        assert!(p3_idempotence_residual(&ss) < 1e-10);
        let (a, b) = defect_annihilation_residuals(&ss);
        assert!(a < 1e-10 && b < 1e-10);
        assert!(span_condition_check(&ss) < 1e-10);
        assert!(p3_image_span_residual(&ss) < 1e-10);
    }

    #[test]
    fn span_check_examples() {
        let (_, ss, _, _) = qutrit();
        assert!(span_condition_check(&ss) < 1e-10);
        assert!(p3_image_span_residual(&ss) < 1e-10);
        let c = ModelSpace::<f64>::classical(3).unwrap();
        let css = classical_slit_system(&c, [vec![0], vec![1], vec![2]]).unwrap();
        assert!(span_condition_check(&css) < 1e-12);
    }

    #[test]
    fn i3_operator_zero_effect() {
        let (_, ss, s, _) = qutrit();
        assert_eq!(i3_operator(&Effect::zeros(9), &ss, &s).unwrap(), 0.0);
        assert!(i3_operator(&Effect::zeros(4), &ss, &s).is_err());
    }

    #[test]
    fn i3_operator_matches_table_on_subspace_slits() {
        // rank-1 slits from a random orthonormal triple inside a 3-dim subspace of C⁴
        let q = ModelSpace::<f64>::quantum(4).unwrap();
        for seed in 0..200u64 {
            let setup =
                spin1_feynman_setup(random_unit_axis::<f64>(seed), [0.0, 0.0, 1.0]).unwrap();
            let lift = |p: &HermitianOperator<f64>| {
                let mut m = DMatrix::zeros(4, 4);
                m.view_mut((0, 0), (3, 3)).copy_from(p.matrix());
                HermitianOperator::new(m).unwrap()
            };
            let pis = [
                lift(&setup.slit_projectors[0]),
                lift(&setup.slit_projectors[1]),
                lift(&setup.slit_projectors[2]),
            ];
            let ss = crate::quantum::slit_system_from_projectors(&pis, &q).unwrap();
            let s = random_state(&q, seed + 1);
            let e = random_effect(&q, seed + 2);
            let rho = q.unembed(s.coords()).unwrap();
            let d = q.unembed(e.coords()).unwrap();
            let reference = trace_table(&d, &rho, &pis, 3);
            let by_hand = reference[&SlitSet::full(3)]
                - (reference[&SlitSet::pair(1, 2)]
                    + reference[&SlitSet::pair(1, 3)]
                    + reference[&SlitSet::pair(2, 3)])
                + (reference[&SlitSet::single(1)]
                    + reference[&SlitSet::single(2)]
                    + reference[&SlitSet::single(3)]);
            let op = i3_operator(&e, &ss, &s).unwrap();
            assert!((op - by_hand).abs() < 1e-11);
            assert!(op.abs() < 1e-12);
        }
    }

    #[test]
    fn prop1_holds_on_shipped_systems() {
        let systems = vec![
            basis_slit_system(&ModelSpace::<f64>::quantum(3).unwrap()).unwrap(),
            basis_slit_system(&ModelSpace::<f64>::real_quantum(3).unwrap()).unwrap(),
            basis_slit_system(&ModelSpace::<f64>::classical(3).unwrap()).unwrap(),
        ];
        for ss in &systems {
            let r = prop1_verify(ss, 500, 42);
            assert!(r.holds() && r.consistent, "{r:?}");
            assert!(r.sup_abs_i3 < 1e-9 && r.operator_gap < 1e-9 && r.span_defect < 1e-9);
        }
    }

    #[test]
    fn slit_system_validation_report() {
        let (_, ss, _, _) = qutrit();
        let report = ss.validate(50, 1);
        assert!(
            report.passed(),
            "{:?}",
            report.failures().collect::<Vec<_>>()
        );
    }

    #[test]
    fn unchecked_bump_is_rejected_by_checked_constructor() {
        let (q, ss, _, _) = qutrit();
        let mut bumped = ss.projection(SlitSet::full(3)).clone();
        bumped[(0, 1)] += 1e-3;
        let broken = ss.with_projection(SlitSet::full(3), bumped).unwrap();
        assert!(SlitSystem::new(q, broken.filters().clone()).is_err());
    }

    #[test]
    fn sweep_paths_agree() {
        let (_, ss, _, _) = qutrit();
        let r = interference_sweep(&ss, 200, 3, SweepSampling::General).unwrap();
        assert!(r.sup_abs_i3_table < 1e-12 && r.sup_abs_i3_operator < 1e-12);
        assert!(r.max_path_disagreement < 1e-11);
        let pure = interference_sweep(&ss, 200, 3, SweepSampling::PureRankOne).unwrap();
        assert!(pure.max_abs_i2 > 0.1);
    }

    proptest! {
        #[test]
        fn ik_reduces_to_i3_exactly(vals in proptest::collection::vec(0.0f64..1.0, 7)) {
            let mut it = vals.into_iter();
            let t = ProbabilityTable::from_fn(3, |_| it.next().unwrap()).unwrap();
            prop_assert_eq!(ik_from_table(&t).unwrap(), i3_from_table(&t).unwrap());
        }

        #[test]
        fn i3_is_linear_in_top_entry(vals in proptest::collection::vec(0.0f64..0.5, 7), delta in 0.0f64..0.5) {
            let mut it = vals.into_iter();
            let t = ProbabilityTable::from_fn(3, |_| it.next().unwrap()).unwrap();
            let mut bumped = t.clone();
            bumped.insert(SlitSet::full(3), t.get(SlitSet::full(3)).unwrap() + delta).unwrap();
            let diff = ik_from_table(&bumped).unwrap() - ik_from_table(&t).unwrap();
            prop_assert!((diff - delta).abs() < 1e-15);
        }
    }
}
