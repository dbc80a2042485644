//! Seeded Monte Carlo simulation of the seven-setting three-slit experiment
//! and statistical estimation of the interference terms from counts.

use std::collections::BTreeMap;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gpt::{apply, validate_measurement, Measurement, ModelSpace, State};
use crate::interference::{ProbabilityTable, SlitSet, SlitSystem};
use crate::rng::substream;
use crate::scalar::Scalar;

/// Shots per sampling block; each block draws from its own substream.
pub const BLOCK_SHOTS: u64 = 1 << 20;

/// Clamps tiny negative probabilities to zero and rejects anything further
/// outside `[0, 1]`.
pub fn clamp_probabilities<T: Scalar>(probs: &[T], tol: T, setting: &str) -> Result<Vec<f64>> {
    probs
        .iter()
        .map(|&p| {
            if p < -tol || p > T::one() + tol || !p.is_finite() {
                Err(Error::ModelInconsistency(p.as_f64(), setting.to_string()))
            } else {
                Ok(p.as_f64().clamp(0.0, 1.0))
            }
        })
        .collect()
}

fn multinomial_block(probs: &[f64], n: u64, rng: &mut crate::rng::Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let x = Binomial::new(remaining, q)
            .expect("probability in [0, 1]")
            .sample(rng);
        counts[k] = x;
        remaining -= x;
        mass -= p;
    }
    counts
}

/// Draws `shots` outcomes from the categorical distribution `probs`
/// (clamped, then renormalized), using one independent substream per block of
/// [`BLOCK_SHOTS`] derived from `(seed, key, block)`.
///
/// Zero-probability categories never receive counts.
pub fn sample_categorical<T: Scalar>(
    probs: &[T],
    shots: u64,
    seed: u64,
    key: &str,
    tol: T,
) -> Result<Vec<u64>> {
    let p = clamp_probabilities(probs, tol, key)?;
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol.as_f64().max(1e-9) * p.len() as f64 {
        return Err(Error::ModelInconsistency(
            total,
            format!("{key} (probabilities sum)"),
        ));
    }
    let blocks = shots.div_ceil(BLOCK_SHOTS);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK_SHOTS.min(shots - b * BLOCK_SHOTS);
            let mut rng = substream(seed, key, b);
            multinomial_block(&p, n, &mut rng)
        })
        .reduce(
            || vec![0u64; p.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

/// The experimental arrangement: a source, a slit system and a detector.
#[derive(Clone, Debug)]
pub struct ExperimentPlan<T: Scalar> {
    pub slits: SlitSystem<T>,
    pub detector: Measurement<T>,
    pub source: State<T>,
    pub shots_per_setting: u64,
    /// Settings listed here use their own shot count instead of `shots_per_setting`.
    pub shot_overrides: BTreeMap<SlitSet, u64>,
    pub seed: u64,
}

impl<T: Scalar> ExperimentPlan<T> {
    pub fn new(
        slits: SlitSystem<T>,
        detector: Measurement<T>,
        source: State<T>,
        shots_per_setting: u64,
        seed: u64,
    ) -> Self {
        ExperimentPlan {
            slits,
            detector,
            source,
            shots_per_setting,
            shot_overrides: BTreeMap::new(),
            seed,
        }
    }

    pub fn model(&self) -> &ModelSpace<T> {
        self.slits.model()
    }

    pub fn shots_for(&self, set: SlitSet) -> u64 {
        self.shot_overrides
            .get(&set)
            .copied()
            .unwrap_or(self.shots_per_setting)
    }

    /// Checks the detector measurement and the source normalization.
    pub fn validate(&self) -> Result<()> {
        let model = self.model();
        model.check_dim(self.source.dim())?;
        for e in &self.detector.effects {
            model.check_dim(e.dim())?;
        }
        let report = validate_measurement(&self.detector, model);
        if let Some(c) = report.failures().next() {
            return Err(Error::InvalidModel(format!(
                "detector measurement fails {:?}: residual {:e}",
                c.name, c.residual
            )));
        }
        if !model.is_normalized(&self.source) {
            return Err(Error::InvalidModel(format!(
                "source state not normalized: u·s = {}",
                model.normalization(&self.source)
            )));
        }
        Ok(())
    }

    /// `prob(d_l & e_J | s)` for each detector outcome, then the blocked
    /// probability `1 − Σ_l`.
    pub fn outcome_probabilities(&self, set: SlitSet) -> Result<Vec<T>> {
        let filtered = apply(&self.slits.filter(set).projection, &self.source)?;
        let mut probs: Vec<T> = self
            .detector
            .effects
            .iter()
            .map(|e| e.coords().dot(filtered.coords()))
            .collect();
        let passed = probs.iter().fold(T::zero(), |a, b| a + *b);
        probs.push(T::one() - passed);
        Ok(probs)
    }

    /// SHA-256 over every number that determines the record.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: f64| h.update(x.to_le_bytes());
        for (set, f) in self.slits.filters() {
            put(set.bits() as f64);
            f.matrix().iter().for_each(|v| put(v.as_f64()));
        }
        for e in &self.detector.effects {
            e.coords().iter().for_each(|v| put(v.as_f64()));
        }
        self.source.coords().iter().for_each(|v| put(v.as_f64()));
        h.update(self.seed.to_le_bytes());
        for set in SlitSet::all_nonempty(3).expect("three slits") {
            h.update(self.shots_for(set).to_le_bytes());
        }
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Counts per setting; the last outcome of every setting is "blocked".
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentRecord {
    /// Detector outcomes per setting, not counting the blocked outcome.
    pub n_outcomes: usize,
    pub counts: BTreeMap<SlitSet, Vec<u64>>,
    pub shots: BTreeMap<SlitSet, u64>,
    pub seed: u64,
    pub plan_hash: String,
}

impl ExperimentRecord {
    /// Builds a record, checking every setting has `n_outcomes + 1` counts
    /// summing to its shot count.
    pub fn new(
        n_outcomes: usize,
        counts: BTreeMap<SlitSet, Vec<u64>>,
        shots: BTreeMap<SlitSet, u64>,
        seed: u64,
        plan_hash: String,
    ) -> Result<Self> {
        for (set, c) in &counts {
            let n = shots
                .get(set)
                .ok_or_else(|| Error::MissingSetting(set.key()))?;
            if c.len() != n_outcomes + 1 {
                return Err(Error::FrequencyShape(format!(
                    "setting {set}: {} counts for {} outcomes plus blocked",
                    c.len(),
                    n_outcomes
                )));
            }
            if c.iter().sum::<u64>() != *n {
                return Err(Error::FrequencyShape(format!(
                    "setting {set}: counts do not sum to {n}"
                )));
            }
        }
        Ok(ExperimentRecord {
            n_outcomes,
            counts,
            shots,
            seed,
            plan_hash,
        })
    }

    /// `counts(J, l) / shots(J)`, or zero when no shots were taken.
    pub fn frequency(&self, set: SlitSet, outcome: usize) -> Result<f64> {
        let c = self
            .counts
            .get(&set)
            .ok_or_else(|| Error::MissingSetting(set.key()))?;
        let n = self.shots[&set];
        Ok(if n == 0 {
            0.0
        } else {
            c[outcome] as f64 / n as f64
        })
    }

    pub fn total_draws(&self) -> u64 {
        self.shots.values().sum()
    }
}

/// Samples one setting; deterministic in `(plan.seed, set)`.
pub fn simulate_setting<T: Scalar>(plan: &ExperimentPlan<T>, set: SlitSet) -> Result<Vec<u64>> {
    let probs = plan.outcome_probabilities(set)?;
    sample_categorical(
        &probs,
        plan.shots_for(set),
        plan.seed,
        &format!("setting/{}", set.key()),
        plan.model().tolerances().tol,
    )
}

/// Samples all seven settings from independent substreams.
pub fn run_experiment<T: Scalar>(plan: &ExperimentPlan<T>) -> Result<ExperimentRecord> {
    plan.validate()?;
    let sets: Vec<SlitSet> = SlitSet::all_nonempty(3)?.collect();
    let counts = sets
        .par_iter()
        .map(|&set| Ok((set, simulate_setting(plan, set)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let shots = sets.iter().map(|&s| (s, plan.shots_for(s))).collect();
    ExperimentRecord::new(plan.detector.len(), counts, shots, plan.seed, plan.hash())
}

/// Samples a raw probability table as a one-outcome experiment: each setting
/// `J` yields the detector outcome with probability `p_J` and "blocked"
/// otherwise.
pub fn run_table_experiment<T: Scalar>(
    table: &ProbabilityTable<T>,
    shots: u64,
    seed: u64,
) -> Result<ExperimentRecord> {
    let tol = crate::scalar::Tolerances::<T>::default().tol;
    let mut counts = BTreeMap::new();
    let mut shot_map = BTreeMap::new();
    let mut h = Sha256::new();
    for (&set, &p) in table.entries() {
        let c = sample_categorical(
            &[p, T::one() - p],
            shots,
            seed,
            &format!("setting/{}", set.key()),
            tol,
        )?;
        counts.insert(set, c);
        shot_map.insert(set, shots);
        h.update([set.bits() as u8]);
        h.update(p.as_f64().to_le_bytes());
    }
    h.update(seed.to_le_bytes());
    h.update(shots.to_le_bytes());
    ExperimentRecord::new(1, counts, shot_map, seed, hex(&h.finalize()))
}

/// Point estimate and uncertainty for one detector outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeEstimate {
    /// Zero-based detector outcome index.
    pub outcome: usize,
    pub estimate: f64,
    pub standard_error: f64,
    /// `estimate / standard_error`; absent when the standard error is zero.
    pub z_score: Option<f64>,
    /// Standard error is zero, so no test against zero is possible.
    pub degenerate: bool,
}

impl OutcomeEstimate {
    fn new(outcome: usize, estimate: f64, var: f64) -> Self {
        let se = var.max(0.0).sqrt();
        let degenerate = se == 0.0;
        OutcomeEstimate {
            outcome,
            estimate,
            standard_error: se,
            z_score: if degenerate {
                None
            } else {
                Some(estimate / se)
            },
            degenerate,
        }
    }

    /// `|estimate| ≤ k · SE`.
    pub fn within(&self, k: f64) -> bool {
        self.estimate.abs() <= k * self.standard_error
    }
}

/// Empirical third-order interference for every detector outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct I3Estimate {
    pub per_outcome: Vec<OutcomeEstimate>,
    /// `Σ z²` over non-degenerate outcomes.
    pub chi_square: f64,
    /// Number of outcomes contributing to `chi_square`.
    pub degrees_of_freedom: usize,
    /// Empirical frequencies per setting, blocked last.
    pub frequencies: BTreeMap<SlitSet, Vec<f64>>,
}

impl I3Estimate {
    pub fn degenerate(&self) -> bool {
        self.per_outcome.iter().all(|o| o.degenerate)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.per_outcome
            .iter()
            .filter_map(|o| o.z_score)
            .fold(0.0, |a, z| a.max(z.abs()))
    }
}

fn signed_estimate(
    record: &ExperimentRecord,
    terms: &[(SlitSet, f64)],
    outcome: usize,
) -> Result<OutcomeEstimate> {
    let mut est = 0.0;
    let mut var = 0.0;
    for &(set, sign) in terms {
        let p = record.frequency(set, outcome)?;
        est += sign * p;
        let n = record.shots[&set];
        if n > 0 {
            var += p * (1.0 - p) / n as f64;
        }
    }
    Ok(OutcomeEstimate::new(outcome, est, var))
}

fn i3_terms() -> Vec<(SlitSet, f64)> {
    SlitSet::all_nonempty(3)
        .expect("three slits")
        .map(|s| (s, if s.len() % 2 == 1 { 1.0 } else { -1.0 }))
        .collect()
}

/// `Î₃(l)` from empirical frequencies with independent-binomial standard errors.
pub fn estimate_i3(record: &ExperimentRecord) -> Result<I3Estimate> {
    let terms = i3_terms();
    for (set, _) in &terms {
        if !record.counts.contains_key(set) {
            return Err(Error::MissingSetting(set.key()));
        }
    }
    // same grouping as the table formula: p123 − (p12 + p13 + p23) + (p1 + p2 + p3)
    let order = [
        SlitSet::full(3),
        SlitSet::pair(1, 2),
        SlitSet::pair(1, 3),
        SlitSet::pair(2, 3),
        SlitSet::single(1),
        SlitSet::single(2),
        SlitSet::single(3),
    ];
    let mut per_outcome = Vec::with_capacity(record.n_outcomes);
    for l in 0..record.n_outcomes {
        let f = |s: SlitSet| record.frequency(s, l);
        let est = f(order[0])? - (f(order[1])? + f(order[2])? + f(order[3])?)
            + (f(order[4])? + f(order[5])? + f(order[6])?);
        let mut o = signed_estimate(record, &terms, l)?;
        o.estimate = est;
        o.z_score = if o.degenerate {
            None
        } else {
            Some(est / o.standard_error)
        };
        per_outcome.push(o);
    }
    let chi_square = per_outcome
        .iter()
        .filter_map(|o| o.z_score)
        .map(|z| z * z)
        .sum();
    let degrees_of_freedom = per_outcome.iter().filter(|o| !o.degenerate).count();
    let frequencies = record
        .counts
        .keys()
        .map(|&s| {
            Ok((
                s,
                (0..=record.n_outcomes)
                    .map(|l| record.frequency(s, l))
                    .collect::<Result<Vec<_>>>()?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(I3Estimate {
        per_outcome,
        chi_square,
        degrees_of_freedom,
        frequencies,
    })
}

/// `Î₂(l) = p̂_ab − p̂_a − p̂_b` for slits `a ≠ b`.
pub fn estimate_i2(
    record: &ExperimentRecord,
    a: usize,
    b: usize,
    outcome: usize,
) -> Result<OutcomeEstimate> {
    if outcome >= record.n_outcomes {
        return Err(Error::FrequencyShape(format!(
            "outcome {outcome} out of range"
        )));
    }
    let terms = [
        (SlitSet::pair(a, b), 1.0),
        (SlitSet::single(a), -1.0),
        (SlitSet::single(b), -1.0),
    ];
    let mut o = signed_estimate(record, &terms, outcome)?;
    let p = |s| record.frequency(s, outcome);
    o.estimate = p(terms[0].0)? - p(terms[1].0)? - p(terms[2].0)?;
    o.z_score = if o.degenerate {
        None
    } else {
        Some(o.estimate / o.standard_error)
    };
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpt::Effect;
    use crate::hermitian::HermitianOperator;
    use crate::quantum::{basis_slit_system, detector_measurement};
    use nalgebra::{Complex, DVector};

    fn qutrit_plan(shots: u64, seed: u64) -> ExperimentPlan<f64> {
        let q = ModelSpace::quantum(3).unwrap();
        let ss = basis_slit_system(&q).unwrap();
        let psi = DVector::from_element(3, Complex::new(1.0 / 3f64.sqrt(), 0.0));
        let rho = HermitianOperator::pure(&psi);
        let det =
            detector_measurement(&q, &[rho.clone(), HermitianOperator::identity(3).sub(&rho)])
                .unwrap();
        ExperimentPlan::new(ss, det, q.state_from_operator(&rho).unwrap(), shots, seed)
    }

    #[test]
    fn categorical_respects_zero_mass() {
        let c = sample_categorical(&[0.5, 0.0, 0.5], 10_000, 1, "k", 1e-9).unwrap();
        assert_eq!(c[1], 0);
        assert_eq!(c.iter().sum::<u64>(), 10_000);
        assert_eq!(
            sample_categorical(&[1.0, 0.0], 0, 1, "k", 1e-9).unwrap(),
            vec![0, 0]
        );
    }

    #[test]
    fn clamping() {
        assert_eq!(
            clamp_probabilities(&[-1e-12, 1.0], 1e-9, "x").unwrap(),
            vec![0.0, 1.0]
        );
        assert!(matches!(
            clamp_probabilities(&[-1e-3, 1.0], 1e-9, "x"),
            Err(Error::ModelInconsistency(..))
        ));
        assert!(sample_categorical(&[0.2, 0.2], 10, 1, "k", 1e-9).is_err());
    }

    #[test]
    fn multi_block_sampling_is_deterministic() {
        let shots = 3 * BLOCK_SHOTS + 17;
        let a = sample_categorical(&[0.25, 0.25, 0.5], shots, 9, "k", 1e-9).unwrap();
        let b = sample_categorical(&[0.25, 0.25, 0.5], shots, 9, "k", 1e-9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().sum::<u64>(), shots);
        let c = sample_categorical(&[0.25, 0.25, 0.5], shots, 10, "k", 1e-9).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_setting_never_blocks() {
        let plan = qutrit_plan(10_000, 3);
        assert_eq!(
            *simulate_setting(&plan, SlitSet::full(3))
                .unwrap()
                .last()
                .unwrap(),
            0
        );
    }

    #[test]
    fn single_slit_blocks_two_thirds() {
        let n = 100_000u64;
        let plan = qutrit_plan(n, 5);
        let blocked = *simulate_setting(&plan, SlitSet::single(1))
            .unwrap()
            .last()
            .unwrap() as f64
            / n as f64;
        let sigma = ((2.0 / 9.0) / n as f64).sqrt();
        assert!((blocked - 2.0 / 3.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn record_totals_and_determinism() {
        let plan = qutrit_plan(1000, 11);
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.total_draws(), 7000);
        assert_eq!(r, run_experiment(&plan).unwrap());
        let zero = run_experiment(&qutrit_plan(0, 11)).unwrap();
        assert!(zero.counts.values().all(|c| c.iter().all(|&x| x == 0)));
    }

    #[test]
    fn shot_overrides() {
        let mut plan = qutrit_plan(100, 1);
        plan.shot_overrides.insert(SlitSet::full(3), 500);
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.shots[&SlitSet::full(3)], 500);
        assert_eq!(r.counts[&SlitSet::full(3)].iter().sum::<u64>(), 500);
        assert_ne!(plan.hash(), qutrit_plan(100, 1).hash());
    }

    #[test]
    fn quantum_i3_consistent_with_zero() {
        let r = run_experiment(&qutrit_plan(1_000_000, 2)).unwrap();
        let est = estimate_i3(&r).unwrap();
        for o in &est.per_outcome {
            assert!(o.within(5.0), "{o:?}");
            assert!(o.standard_error > 0.0);
        }
    }

    #[test]
    fn raw_table_is_inconsistent_with_zero() {
        let t = ProbabilityTable::from_fn(3, |s| -> f64 {
            match s.len() {
                3 => 0.9,
                2 => 0.2,
                _ => 0.1,
            }
        })
        .unwrap();
        let r = run_table_experiment(&t, 1_000_000, 4).unwrap();
        let est = estimate_i3(&r).unwrap();
        let o = &est.per_outcome[0];
        assert!((o.estimate - 0.6).abs() < 0.005);
        assert!((o.standard_error - (0.84f64 / 1e6).sqrt()).abs() < 2e-5);
        assert!(o.z_score.unwrap() > 100.0);
    }

    #[test]
    fn all_blocked_is_degenerate() {
        let counts = SlitSet::all_nonempty(3)
            .unwrap()
            .map(|s| (s, vec![0, 10]))
            .collect();
        let shots = SlitSet::all_nonempty(3).unwrap().map(|s| (s, 10)).collect();
        let r = ExperimentRecord::new(1, counts, shots, 0, String::new()).unwrap();
        let est = estimate_i3(&r).unwrap();
        assert_eq!(est.per_outcome[0].estimate, 0.0);
        assert_eq!(est.per_outcome[0].standard_error, 0.0);
        assert!(est.degenerate());
    }

    #[test]
    fn missing_setting() {
        let counts = [(SlitSet::single(1), vec![0, 1])].into_iter().collect();
        let shots = [(SlitSet::single(1), 1)].into_iter().collect();
        let r = ExperimentRecord::new(1, counts, shots, 0, String::new()).unwrap();
        assert!(matches!(estimate_i3(&r), Err(Error::MissingSetting(_))));
    }

    #[test]
    fn record_shape_checked() {
        let counts = [(SlitSet::single(1), vec![0, 2])].into_iter().collect();
        let shots = [(SlitSet::single(1), 1)].into_iter().collect();
        assert!(ExperimentRecord::new(1, counts, shots, 0, String::new()).is_err());
    }

    #[test]
    fn invalid_detector_rejected() {
        let mut plan = qutrit_plan(10, 1);
        plan.detector =
            Measurement::new(vec![Effect::new(plan.model().order_unit().clone() * 0.5)]);
        assert!(run_experiment(&plan).is_err());
    }
}
