//! Third-order interference on finite-dimensional probabilistic models.
//!
//! Models are cones of un-normalised states in `R^m` with an order unit;
//! slits are filters (idempotent, neutral, complemented projections). The
//! crate computes the Sorkin interference terms, checks the equivalent
//! operator and span conditions for their vanishing, reconstructs states by
//! two-slit filtering tomography, and simulates the seven-setting experiment.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the precision.

pub mod error;
pub mod experiment;
pub mod gpt;
pub mod hermitian;
pub mod interference;
pub mod io;
pub mod linalg;
pub mod quantum;
pub mod rng;
pub mod scalar;
pub mod tomography;

pub use error::{Error, Result};
pub use experiment::{
    estimate_i2, estimate_i3, run_experiment, run_table_experiment, simulate_setting,
    ExperimentPlan, ExperimentRecord, I3Estimate, OutcomeEstimate,
};
pub use gpt::{
    apply, conditional_state, face_of, probability, random_effect, random_state, validate_effect,
    validate_filter, validate_measurement, validate_transformation, Check, Cone, Effect, Face,
    Filter, Measurement, ModelSpace, State, Transformation, ValidationReport,
};
pub use hermitian::{Field, HermitianOperator};
pub use interference::{
    defect_operator, i2_from_table, i3_from_table, i3_operator, ik_from_table, interference_sweep,
    p3_operator, prop1_verify, span_condition_check, ProbabilityTable, Prop1Report, SlitSet,
    SlitSystem, SweepReport, SweepSampling,
};
pub use quantum::{
    basis_slit_system, build_classical_model, build_quantum_model, build_real_quantum_model,
    classical_slit_system, projector_filter, slit_system_from_projectors, spin1_feynman_setup,
    spin1_operator, Spin1Setup,
};
pub use scalar::{Scalar, Tolerances};
pub use tomography::{
    build_face_measurement, estimate_filtered_state, extract_single_slit_components, reconstruct,
    tomography_roundtrip, FaceMeasurementPlan, TomographyMode, TomographyResult,
};

pub type ModelSpace64 = ModelSpace<f64>;
pub type State64 = State<f64>;
pub type Effect64 = Effect<f64>;
pub type Transformation64 = Transformation<f64>;
pub type Filter64 = Filter<f64>;
pub type SlitSystem64 = SlitSystem<f64>;
pub type ProbabilityTable64 = ProbabilityTable<f64>;
pub type HermitianOperator64 = HermitianOperator<f64>;
pub type ExperimentPlan64 = ExperimentPlan<f64>;
pub type TomographyResult64 = TomographyResult<f64>;

pub type ModelSpace32 = ModelSpace<f32>;
pub type State32 = State<f32>;
pub type Effect32 = Effect<f32>;
pub type Transformation32 = Transformation<f32>;
pub type Filter32 = Filter<f32>;
pub type SlitSystem32 = SlitSystem<f32>;
pub type ProbabilityTable32 = ProbabilityTable<f32>;
pub type HermitianOperator32 = HermitianOperator<f32>;
pub type ExperimentPlan32 = ExperimentPlan<f32>;
pub type TomographyResult32 = TomographyResult<f32>;
