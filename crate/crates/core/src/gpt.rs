//! Finite-dimensional operational models: a cone of un-normalised states in
//! `R^m`, an order unit, effects, transformations and filters.
//!
//! States and effects share one coordinate space; the probability of an effect
//! on a state is their dot product.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{embed, unembed, Field, HermitianOperator};
use crate::linalg;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::scalar::{Scalar, Tolerances};

/// Shape of the positive cone.
#[derive(Clone, Debug, PartialEq)]
pub enum Cone<T: Scalar> {
    /// Positive semidefinite `d × d` Hermitian matrices, `m = d²`.
    Quantum { d: usize },
    /// Positive semidefinite `d × d` real symmetric matrices, `m = d(d+1)/2`.
    RealQuantum { d: usize },
    /// Nonnegative orthant, `m = n`.
    Classical { n: usize },
    /// Polyhedral cone spanned by the given generators.
    Custom {
        generators: Vec<DVector<T>>,
        tolerance: T,
    },
}

impl<T: Scalar> Cone<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Cone::Quantum { .. } => "quantum",
            Cone::RealQuantum { .. } => "real_quantum",
            Cone::Classical { .. } => "classical",
            Cone::Custom { .. } => "custom",
        }
    }
}

/// The arena for states, effects and transformations.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpace<T: Scalar> {
    label: String,
    cone: Cone<T>,
    order_unit: DVector<T>,
    tol: Tolerances<T>,
}

impl<T: Scalar> ModelSpace<T> {
    pub fn quantum(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(ModelSpace {
            label: format!("quantum:{d}"),
            cone: Cone::Quantum { d },
            order_unit: embed(&DMatrix::identity(d, d), Field::Complex),
            tol: Tolerances::default(),
        })
    }

    pub fn real_quantum(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(ModelSpace {
            label: format!("real_quantum:{d}"),
            cone: Cone::RealQuantum { d },
            order_unit: embed(&DMatrix::identity(d, d), Field::Real),
            tol: Tolerances::default(),
        })
    }

    pub fn classical(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(ModelSpace {
            label: format!("classical:{n}"),
            cone: Cone::Classical { n },
            order_unit: DVector::from_element(n, T::one()),
            tol: Tolerances::default(),
        })
    }

    /// A polyhedral model. The order unit must be strictly positive on every
    /// nonzero generator.
    pub fn custom(
        generators: Vec<DVector<T>>,
        order_unit: DVector<T>,
        tolerance: T,
    ) -> Result<Self> {
        let m = order_unit.len();
        if generators.is_empty() {
            return Err(Error::InvalidModel(
                "custom cone needs at least one generator".into(),
            ));
        }
        for g in &generators {
            if g.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: g.len(),
                });
            }
            if g.norm() > T::zero() && order_unit.dot(g) <= T::zero() {
                return Err(Error::InvalidModel(
                    "order unit is not strictly positive on a generator".into(),
                ));
            }
        }
        Ok(ModelSpace {
            label: format!("custom:{m}"),
            cone: Cone::Custom {
                generators,
                tolerance,
            },
            order_unit,
            tol: Tolerances::default(),
        })
    }

    /// Builds a model from an explicit cone and order unit, checking that the
    /// order unit is consistent with the cone type.
    pub fn from_parts(
        label: impl Into<String>,
        cone: Cone<T>,
        order_unit: DVector<T>,
    ) -> Result<Self> {
        let base = match cone {
            Cone::Quantum { d } => Self::quantum(d)?,
            Cone::RealQuantum { d } => Self::real_quantum(d)?,
            Cone::Classical { n } => {
                let mut m = Self::classical(n)?;
                if order_unit.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: order_unit.len(),
                    });
                }
                if order_unit.iter().any(|x| *x <= T::zero()) {
                    return Err(Error::InvalidModel(
                        "classical order unit must be positive".into(),
                    ));
                }
                m.order_unit = order_unit.clone();
                m
            }
            Cone::Custom {
                generators,
                tolerance,
            } => Self::custom(generators, order_unit.clone(), tolerance)?,
        };
        if base.order_unit.len() != order_unit.len() {
            return Err(Error::DimensionMismatch {
                expected: base.order_unit.len(),
                found: order_unit.len(),
            });
        }
        let gap = (&base.order_unit - &order_unit).norm();
        if gap > base.tol.tol * base.order_unit.norm().max(T::one()) {
            return Err(Error::InvalidModel(format!(
                "order unit differs from the embedded identity by {:e}",
                gap.as_f64()
            )));
        }
        Ok(base.with_label(label))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances<T>) -> Self {
        self.tol = tol;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn cone(&self) -> &Cone<T> {
        &self.cone
    }

    pub fn order_unit(&self) -> &DVector<T> {
        &self.order_unit
    }

    pub fn tolerances(&self) -> &Tolerances<T> {
        &self.tol
    }

    pub fn dimension(&self) -> usize {
        self.order_unit.len()
    }

    /// Hilbert-space dimension and field for matrix models.
    pub fn hilbert(&self) -> Option<(usize, Field)> {
        match self.cone {
            Cone::Quantum { d } => Some((d, Field::Complex)),
            Cone::RealQuantum { d } => Some((d, Field::Real)),
            _ => None,
        }
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: len,
            });
        }
        Ok(())
    }

    /// Embedded coordinates of a Hermitian operator.
    pub fn embed(&self, op: &HermitianOperator<T>) -> Result<DVector<T>> {
        let (d, field) = self.hilbert().ok_or_else(|| {
            Error::UnsupportedModel(format!("{} has no operator embedding", self.cone.kind()))
        })?;
        if op.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: op.dim(),
            });
        }
        if field == Field::Real && op.max_imag() > self.tol.hermitian {
            return Err(Error::UnsupportedModel(
                "operator has an imaginary part in a real model".into(),
            ));
        }
        Ok(embed(op.matrix(), field))
    }

    pub fn unembed(&self, coords: &DVector<T>) -> Result<HermitianOperator<T>> {
        let (d, field) = self.hilbert().ok_or_else(|| {
            Error::UnsupportedModel(format!("{} has no operator embedding", self.cone.kind()))
        })?;
        self.check_dim(coords.len())?;
        HermitianOperator::new(unembed(coords, d, field))
    }

    pub fn state_from_operator(&self, rho: &HermitianOperator<T>) -> Result<State<T>> {
        Ok(State::new(self.embed(rho)?))
    }

    pub fn effect_from_operator(&self, e: &HermitianOperator<T>) -> Result<Effect<T>> {
        Ok(Effect::new(self.embed(e)?))
    }

    /// `u · s`.
    pub fn normalization(&self, s: &State<T>) -> T {
        self.order_unit.dot(&s.coords)
    }

    pub fn is_normalized(&self, s: &State<T>) -> bool {
        (self.normalization(s) - T::one()).abs() <= self.tol.tol
    }

    /// The order unit viewed as an effect.
    pub fn unit_effect(&self) -> Effect<T> {
        Effect::new(self.order_unit.clone())
    }

    /// Generators rescaled to unit normalisation (custom and classical cones).
    fn normalized_generators(&self) -> Vec<DVector<T>> {
        match &self.cone {
            Cone::Custom { generators, .. } => generators
                .iter()
                .filter(|g| g.norm() > T::zero())
                .map(|g| g / self.order_unit.dot(g))
                .collect(),
            Cone::Classical { n } => (0..*n)
                .map(|i| {
                    let mut e = DVector::zeros(*n);
                    e[i] = T::one() / self.order_unit[i];
                    e
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    fn generator_matrix(&self) -> DMatrix<T> {
        let gens = self.normalized_generators();
        DMatrix::from_fn(self.dimension(), gens.len(), |r, c| gens[c][r])
    }

    /// How far `coords` is from satisfying cone membership: the negated
    /// smallest eigenvalue (matrix models), the negated smallest coordinate
    /// (classical), or the nonnegative-least-squares residual (custom).
    /// Zero for members.
    pub fn cone_violation(&self, coords: &DVector<T>) -> T {
        match &self.cone {
            Cone::Quantum { .. } | Cone::RealQuantum { .. } => match self.unembed(coords) {
                Ok(op) => {
                    let lo = op.eigenvalues().first().copied().unwrap_or_else(T::zero);
                    (-lo).max(T::zero())
                }
                Err(_) => T::max_value().unwrap_or_else(T::one),
            },
            Cone::Classical { .. } => coords.iter().fold(T::zero(), |a, x| a.max(-*x)),
            Cone::Custom { .. } => linalg::nnls(&self.generator_matrix(), coords).1,
        }
    }

    /// Euclidean distance from `coords` to the cone.
    pub fn cone_distance(&self, coords: &DVector<T>) -> T {
        match &self.cone {
            Cone::Quantum { .. } | Cone::RealQuantum { .. } => match self.unembed(coords) {
                Ok(op) => op
                    .eigenvalues()
                    .into_iter()
                    .filter(|l| *l < T::zero())
                    .fold(T::zero(), |a, l| a + l * l)
                    .sqrt(),
                Err(_) => T::max_value().unwrap_or_else(T::one),
            },
            Cone::Classical { .. } => coords
                .iter()
                .filter(|x| **x < T::zero())
                .fold(T::zero(), |a, x| a + *x * *x)
                .sqrt(),
            Cone::Custom { .. } => linalg::nnls(&self.generator_matrix(), coords).1,
        }
    }

    pub fn contains(&self, coords: &DVector<T>) -> bool {
        let limit = match &self.cone {
            Cone::Custom { tolerance, .. } => *tolerance,
            _ => self.tol.cone,
        };
        self.cone_violation(coords) <= limit
    }

    /// Amount by which the effect leaves `[0, 1]` on normalised states.
    pub fn effect_range_residual(&self, e: &Effect<T>) -> T {
        let out_of_unit = |lo: T, hi: T| (-lo).max(hi - T::one()).max(T::zero());
        match &self.cone {
            Cone::Quantum { .. } | Cone::RealQuantum { .. } => match self.unembed(&e.coords) {
                Ok(op) => {
                    let ev = op.eigenvalues();
                    out_of_unit(ev[0], ev[ev.len() - 1])
                }
                Err(_) => T::max_value().unwrap_or_else(T::one),
            },
            Cone::Classical { .. } | Cone::Custom { .. } => {
                let vals: Vec<T> = self
                    .normalized_generators()
                    .iter()
                    .map(|g| e.coords.dot(g))
                    .collect();
                let lo = vals
                    .iter()
                    .copied()
                    .fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b));
                let hi = vals
                    .iter()
                    .copied()
                    .fold(T::min_value().unwrap_or_else(T::zero), |a, b| a.max(b));
                out_of_unit(lo, hi)
            }
        }
    }
}

/// A possibly un-normalised state.
#[derive(Clone, Debug, PartialEq)]
pub struct State<T: Scalar> {
    coords: DVector<T>,
}

impl<T: Scalar> State<T> {
    pub fn new(coords: DVector<T>) -> Self {
        State { coords }
    }

    pub fn zeros(m: usize) -> Self {
        State {
            coords: DVector::zeros(m),
        }
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<T> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn scaled(&self, a: T) -> Self {
        State {
            coords: &self.coords * a,
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        State {
            coords: &self.coords + &other.coords,
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        State {
            coords: &self.coords - &other.coords,
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        (&self.coords - &other.coords).norm()
    }
}

/// A linear functional on states, embedded in the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct Effect<T: Scalar> {
    coords: DVector<T>,
}

impl<T: Scalar> Effect<T> {
    pub fn new(coords: DVector<T>) -> Self {
        Effect { coords }
    }

    pub fn zeros(m: usize) -> Self {
        Effect {
            coords: DVector::zeros(m),
        }
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A linear map on the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct Transformation<T: Scalar> {
    matrix: DMatrix<T>,
}

impl<T: Scalar> Transformation<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Transformation { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Transformation {
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Transformation {
            matrix: DMatrix::zeros(m, m),
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn compose(&self, after: &Self) -> Self {
        Transformation {
            matrix: &after.matrix * &self.matrix,
        }
    }

    pub fn idempotence_residual(&self) -> T {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }
}

/// An ideal passage device: a projection together with its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter<T: Scalar> {
    pub projection: Transformation<T>,
    pub complement: Transformation<T>,
}

impl<T: Scalar> Filter<T> {
    pub fn new(projection: Transformation<T>, complement: Transformation<T>) -> Result<Self> {
        if projection.dim() != complement.dim() {
            return Err(Error::DimensionMismatch {
                expected: projection.dim(),
                found: complement.dim(),
            });
        }
        Ok(Filter {
            projection,
            complement,
        })
    }

    pub fn dim(&self) -> usize {
        self.projection.dim()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        self.projection.matrix()
    }
}

/// Effects summing to the order unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement<T: Scalar> {
    pub effects: Vec<Effect<T>>,
}

impl<T: Scalar> Measurement<T> {
    pub fn new(effects: Vec<Effect<T>>) -> Self {
        Measurement { effects }
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }
}

/// The linear span of the states a filter transmits unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Face<T: Scalar> {
    pub projection_matrix: DMatrix<T>,
    /// Orthonormal columns spanning the image of `projection_matrix`.
    pub image_basis: DMatrix<T>,
    pub rank: usize,
}

impl<T: Scalar> Face<T> {
    /// Coordinates of `v` in `image_basis`.
    pub fn coordinates(&self, v: &DVector<T>) -> DVector<T> {
        self.image_basis.transpose() * v
    }

    pub fn lift(&self, x: &DVector<T>) -> DVector<T> {
        &self.image_basis * x
    }
}

/// One named check inside a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn push<T: Scalar>(&mut self, name: impl Into<String>, residual: T, threshold: T) {
        self.checks.push(Check {
            name: name.into(),
            passed: residual <= threshold,
            residual: residual.as_f64(),
            threshold: threshold.as_f64(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Appends `other`'s checks with `prefix` prepended to each name.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ValidationReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
    }
}

pub const AXIOM_IDEMPOTENCE: &str = "axiom (i) idempotence";
pub const AXIOM_NEUTRALITY: &str = "axiom (ii) neutrality";
pub const AXIOM_COMPLEMENT_PRODUCTS: &str = "axiom (iii) complement products";
pub const AXIOM_COMPLEMENT_EQUIVALENCES: &str = "axiom (iii) complement equivalences";

/// `e · s`.
pub fn probability<T: Scalar>(e: &Effect<T>, s: &State<T>) -> Result<T> {
    if e.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: s.dim(),
        });
    }
    Ok(e.coords.dot(&s.coords))
}

pub fn apply<T: Scalar>(t: &Transformation<T>, s: &State<T>) -> Result<State<T>> {
    if t.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: s.dim(),
        });
    }
    Ok(State::new(&t.matrix * &s.coords))
}

/// State after the branch `(op, e)` of an operation fired, renormalised to the
/// input's normalisation: `(u·s / e·s) op(s)`.
pub fn conditional_state<T: Scalar>(
    model: &ModelSpace<T>,
    op_branch: &Transformation<T>,
    e_branch: &Effect<T>,
    s: &State<T>,
) -> Result<State<T>> {
    model.check_dim(s.dim())?;
    let p = probability(e_branch, s)?;
    if p <= model.tol.tol {
        return Err(Error::ZeroProbability(p.as_f64()));
    }
    let out = apply(op_branch, s)?;
    Ok(out.scaled(model.normalization(s) / p))
}

/// Sampled check of positivity and normalisation non-increase.
pub fn validate_transformation<T: Scalar>(
    t: &Transformation<T>,
    model: &ModelSpace<T>,
    n_samples: usize,
    seed: u64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = model.check_dim(t.dim()) {
        report.checks.push(dimension_failure(e));
        return report;
    }
    let samples = sample_states(model, n_samples, seed);
    push_positivity(&mut report, "", t, model, &samples);
    report
}

fn dimension_failure(e: Error) -> Check {
    Check {
        name: format!("dimension ({e})"),
        passed: false,
        residual: f64::INFINITY,
        threshold: 0.0,
    }
}

fn sample_states<T: Scalar>(model: &ModelSpace<T>, n: usize, seed: u64) -> Vec<State<T>> {
    (0..n as u64)
        .map(|i| random_state(model, derive_seed(seed, i)))
        .collect()
}

fn push_positivity<T: Scalar>(
    report: &mut ValidationReport,
    prefix: &str,
    t: &Transformation<T>,
    model: &ModelSpace<T>,
    samples: &[State<T>],
) {
    let tol = model.tolerances();
    let mut pos = T::zero();
    let mut norm = T::zero();
    for s in samples {
        let out = &t.matrix * s.coords();
        pos = pos.max(model.cone_violation(&out));
        norm = norm.max(model.order_unit.dot(&out) - model.normalization(s));
    }
    let cone_limit = match model.cone() {
        Cone::Custom { tolerance, .. } => *tolerance,
        _ => tol.cone,
    };
    report.push(format!("{prefix}positivity"), pos, cone_limit);
    report.push(
        format!("{prefix}normalization non-increasing"),
        norm,
        tol.tol,
    );
}

/// Checks filter axioms (i)–(iii): exactly for the matrix identities, by
/// sampling `n_samples` random states (and their images under both maps) for
/// neutrality and the complement equivalences.
pub fn validate_filter<T: Scalar>(
    f: &Filter<T>,
    model: &ModelSpace<T>,
    n_samples: usize,
    seed: u64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = model.check_dim(f.dim()) {
        report.checks.push(dimension_failure(e));
        return report;
    }
    let tol = *model.tolerances();
    let p = f.projection.matrix();
    let q = f.complement.matrix();
    let scale = p.norm().max(q.norm()).max(T::one());

    report.push(
        AXIOM_IDEMPOTENCE,
        f.projection.idempotence_residual(),
        tol.proj * p.norm().max(T::one()),
    );
    report.push(
        "complement idempotence",
        f.complement.idempotence_residual(),
        tol.proj * q.norm().max(T::one()),
    );
    let products = (p * q).norm().max((q * p).norm());
    report.push(AXIOM_COMPLEMENT_PRODUCTS, products, tol.proj * scale);

    let base = sample_states(model, n_samples, seed);
    let mut samples = Vec::with_capacity(3 * base.len());
    for s in &base {
        samples.push(State::new(p * s.coords()));
        samples.push(State::new(q * s.coords()));
        samples.push(s.clone());
    }

    let u = model.order_unit();
    let neutral = |m: &DMatrix<T>, t: &State<T>| -> Option<T> {
        let img = m * t.coords();
        if (u.dot(&img) - u.dot(t.coords())).abs() <= tol.tol {
            Some((img - t.coords()).norm())
        } else {
            None
        }
    };
    let mut neutrality = T::zero();
    let mut equivalence = T::zero();
    for t in &samples {
        for m in [p, q] {
            if let Some(r) = neutral(m, t) {
                neutrality = neutrality.max(r);
            }
        }
        let p_fixed = (p * t.coords() - t.coords()).norm();
        let p_kills = (p * t.coords()).norm();
        let q_fixed = (q * t.coords() - t.coords()).norm();
        let q_kills = (q * t.coords()).norm();
        // P(s)=s ⇔ P'(s)=0 and P'(s)=s ⇔ P(s)=0
        for (lhs, rhs) in [(p_fixed, q_kills), (q_fixed, p_kills)] {
            if lhs <= tol.tol {
                equivalence = equivalence.max(rhs);
            }
            if rhs <= tol.tol {
                equivalence = equivalence.max(lhs);
            }
        }
    }
    report.push(AXIOM_NEUTRALITY, neutrality, tol.tol);
    report.push(AXIOM_COMPLEMENT_EQUIVALENCES, equivalence, tol.tol);

    push_positivity(&mut report, "", &f.projection, model, &base);
    push_positivity(&mut report, "complement ", &f.complement, model, &base);
    report
}

pub fn validate_effect<T: Scalar>(e: &Effect<T>, model: &ModelSpace<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    match model.check_dim(e.dim()) {
        Ok(()) => report.push(
            "effect range",
            model.effect_range_residual(e),
            model.tolerances().tol,
        ),
        Err(err) => report.checks.push(dimension_failure(err)),
    }
    report
}

/// Checks `Σ eᵢ = u` and that every effect takes values in `[0, 1]`.
pub fn validate_measurement<T: Scalar>(
    ms: &Measurement<T>,
    model: &ModelSpace<T>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = model.dimension();
    if let Some(bad) = ms.effects.iter().find(|e| e.dim() != m) {
        report
            .checks
            .push(dimension_failure(Error::DimensionMismatch {
                expected: m,
                found: bad.dim(),
            }));
        return report;
    }
    let sum = ms
        .effects
        .iter()
        .fold(DVector::zeros(m), |acc: DVector<T>, e| acc + e.coords());
    report.push(
        "sum equals order unit",
        (sum - model.order_unit()).norm(),
        model.tolerances().tol,
    );
    let worst = ms
        .effects
        .iter()
        .map(|e| model.effect_range_residual(e))
        .fold(T::zero(), |a, b| a.max(b));
    report.push("effect range", worst, model.tolerances().tol);
    report
}

/// The face transmitted unchanged by `f`, as the column space of its projection.
pub fn face_of<T: Scalar>(f: &Filter<T>, model: &ModelSpace<T>) -> Result<Face<T>> {
    model.check_dim(f.dim())?;
    let p = f.projection.matrix();
    let tol = model.tolerances();
    let r = f.projection.idempotence_residual();
    if r > tol.proj * p.norm().max(T::one()) {
        return Err(Error::NotAProjection(r.as_f64()));
    }
    let image_basis = linalg::column_space(p, tol.rank);
    Ok(Face {
        projection_matrix: p.clone(),
        rank: image_basis.ncols(),
        image_basis,
    })
}

fn gaussian<T: Scalar>(rng: &mut Rng) -> T {
    let x: f64 = StandardNormal.sample(rng);
    T::lit(x)
}

fn ginibre<T: Scalar>(d: usize, field: Field, rng: &mut Rng) -> DMatrix<Complex<T>> {
    DMatrix::from_fn(d, d, |_, _| {
        let re = gaussian::<T>(rng);
        let im = if field == Field::Complex {
            gaussian::<T>(rng)
        } else {
            T::zero()
        };
        Complex::new(re, im)
    })
}

/// Flat Dirichlet weights on `k` points.
fn simplex_weights<T: Scalar>(k: usize, rng: &mut Rng) -> Vec<T> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| T::lit(x / total)).collect()
}

/// A random normalised state, deterministic in `seed`.
///
/// Matrix models use `GG†/Tr(GG†)` with a Gaussian `G` (full rank almost
/// surely); classical and custom models use flat Dirichlet mixtures of the
/// normalised extreme rays.
pub fn random_state<T: Scalar>(model: &ModelSpace<T>, seed: u64) -> State<T> {
    let mut rng = rng_from_seed(seed);
    match model.hilbert() {
        Some((d, field)) => {
            let g = ginibre::<T>(d, field, &mut rng);
            let rho = &g * g.adjoint();
            let tr = rho.trace().re;
            let rho = rho.map(|z| z.unscale(tr));
            State::new(embed(&rho, field))
        }
        None => {
            let gens = model.normalized_generators();
            let w = simplex_weights::<T>(gens.len(), &mut rng);
            let coords = gens
                .iter()
                .zip(w)
                .fold(DVector::zeros(model.dimension()), |acc, (g, wi)| {
                    acc + g * wi
                });
            State::new(coords)
        }
    }
}

/// A random valid effect, deterministic in `seed`.
pub fn random_effect<T: Scalar>(model: &ModelSpace<T>, seed: u64) -> Effect<T> {
    let mut rng = rng_from_seed(seed);
    match model.hilbert() {
        Some((d, field)) => {
            let q = ginibre::<T>(d, field, &mut rng).qr().q();
            let lambda = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| {
                Complex::new(T::lit(rng.random::<f64>()), T::zero())
            }));
            let e = &q * lambda * q.adjoint();
            Effect::new(embed(&e, field))
        }
        None => match model.cone() {
            Cone::Classical { n } => Effect::new(DVector::from_fn(*n, |i, _| {
                T::lit(rng.random::<f64>()) * model.order_unit()[i]
            })),
            _ => {
                // affine rescaling of a random functional onto [0, 1] over the extreme rays
                let m = model.dimension();
                let r = DVector::from_fn(m, |_, _| gaussian::<T>(&mut rng));
                let vals: Vec<T> = model
                    .normalized_generators()
                    .iter()
                    .map(|g| r.dot(g))
                    .collect();
                let lo = vals.iter().copied().fold(vals[0], |a, b| a.min(b));
                let hi = vals.iter().copied().fold(vals[0], |a, b| a.max(b));
                let width: T = T::lit(rng.random::<f64>());
                let offset = T::lit(rng.random::<f64>()) * (T::one() - width);
                let span = hi - lo;
                if span <= T::zero() {
                    return Effect::new(model.order_unit() * offset);
                }
                let a = width / span;
                let b = offset - a * lo;
                Effect::new(r * a + model.order_unit() * b)
            }
        },
    }
}
