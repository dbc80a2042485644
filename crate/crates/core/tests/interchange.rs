use std::collections::BTreeMap;

use proptest::prelude::*;
use sorkin_core::io::{
    read_model, read_record_csv, read_table, read_tomography_csv, record_csv, slit_filters,
    to_json_string, tomography_csv, tomography_rows, write_model, write_table, I3EstimateDoc,
    TomographyDoc,
};
use sorkin_core::quantum::detector_measurement;
use sorkin_core::tomography::{tomography_roundtrip, TomographyMode};
use sorkin_core::{
    basis_slit_system, estimate_i3, i3_from_table, prop1_verify, random_state, run_experiment,
    ExperimentPlan, HermitianOperator, ModelSpace, ProbabilityTable, SlitSet, SlitSystem,
};

fn named(ss: &SlitSystem<f64>) -> BTreeMap<String, sorkin_core::Filter<f64>> {
    ss.filters()
        .iter()
        .map(|(s, f)| (format!("P{}", s.key()), f.clone()))
        .collect()
}

#[test]
fn model_documents_round_trip_exactly() {
    for m in [
        ModelSpace::<f64>::quantum(3).unwrap(),
        ModelSpace::real_quantum(3).unwrap(),
        ModelSpace::classical(3).unwrap(),
    ] {
        let ss = basis_slit_system(&m).unwrap();
        let text = write_model(&m, &named(&ss)).unwrap();
        let (back, filters) = read_model::<f64>(&text).unwrap();
        assert_eq!(back.dimension(), m.dimension());
        assert_eq!(back.order_unit(), m.order_unit());
        let rebuilt = SlitSystem::new(back, slit_filters(&filters)).unwrap();
        for (set, f) in ss.filters() {
            assert_eq!(rebuilt.filter(*set).matrix(), f.matrix());
        }
        // writing again is byte-identical
        assert_eq!(
            write_model(rebuilt.model(), &named(&rebuilt)).unwrap(),
            text
        );
    }
}

#[test]
fn bad_model_documents_are_rejected() {
    assert!(read_model::<f64>("{").is_err());
    assert!(read_model::<f64>(
        r#"{"label":"x","dimension":4,"cone":{"type":"quantum","d":3},"order_unit":[1,0,0,0]}"#
    )
    .is_err());
}

#[test]
fn prop1_report_serializes_every_field() {
    let ss = basis_slit_system(&ModelSpace::<f64>::quantum(3).unwrap()).unwrap();
    let r = prop1_verify(&ss, 50, 3);
    let v: serde_json::Value = serde_json::from_str(&to_json_string(&r).unwrap()).unwrap();
    for key in [
        "sup_abs_i3",
        "operator_gap",
        "span_defect",
        "threshold",
        "consistent",
        "samples_used",
        "seed",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["seed"], 3);
    assert_eq!(v["consistent"], true);
}

#[test]
fn tomography_outputs_round_trip() {
    let q = ModelSpace::<f64>::quantum(3).unwrap();
    let ss = basis_slit_system(&q).unwrap();
    let s = random_state(&q, 4);
    let r = tomography_roundtrip(
        &q,
        &ss,
        &s,
        TomographyMode::Sampled {
            shots: 1000,
            seed: 2,
        },
    )
    .unwrap();
    let doc = TomographyDoc::from_result(&r);
    let text = to_json_string(&doc).unwrap();
    assert_eq!(serde_json::from_str::<TomographyDoc>(&text).unwrap(), doc);
    assert_eq!(doc.faces.len(), 3);
    assert_eq!(doc.shots, Some(1000));

    let csv = tomography_csv(&r).unwrap();
    assert!(csv.starts_with("face,setting,outcome,observed,fitted"));
    assert_eq!(read_tomography_csv(&csv).unwrap(), tomography_rows(&r));
}

fn qutrit_plan() -> ExperimentPlan<f64> {
    let q = ModelSpace::quantum(3).unwrap();
    let ss = basis_slit_system(&q).unwrap();
    let rho = HermitianOperator::identity(3).scale(1.0 / 3.0);
    let e0 = HermitianOperator::pure(&nalgebra::DVector::from_element(
        3,
        nalgebra::Complex::new(1.0 / 3f64.sqrt(), 0.0),
    ));
    let det =
        detector_measurement(&q, &[e0.clone(), HermitianOperator::identity(3).sub(&e0)]).unwrap();
    ExperimentPlan::new(ss, det, q.state_from_operator(&rho).unwrap(), 5000, 6)
}

#[test]
fn records_and_estimates_round_trip() {
    let rec = run_experiment(&qutrit_plan()).unwrap();
    let csv = record_csv(&rec).unwrap();
    assert!(csv.starts_with("setting,outcome,count,shots,frequency"));
    assert!(csv.contains(",blocked,"));
    let back = read_record_csv(&csv, rec.seed, rec.plan_hash.clone()).unwrap();
    assert_eq!(back, rec);

    let doc = I3EstimateDoc::from_estimate(&estimate_i3(&rec).unwrap());
    assert_eq!(doc.per_outcome[0].outcome, 1);
    let text = to_json_string(&doc).unwrap();
    assert_eq!(serde_json::from_str::<I3EstimateDoc>(&text).unwrap(), doc);
}

#[test]
fn slit_set_serializes_as_key() {
    let s = SlitSet::new(&[3, 1]).unwrap();
    assert_eq!(serde_json::to_string(&s).unwrap(), "\"13\"");
    assert_eq!(serde_json::from_str::<SlitSet>("\"13\"").unwrap(), s);
    assert!(serde_json::from_str::<SlitSet>("\"1a\"").is_err());
}

proptest! {
    #[test]
    fn tables_round_trip(vals in proptest::collection::vec(0.0f64..=1.0, 7)) {
        let mut it = vals.into_iter();
        let t = ProbabilityTable::from_fn(3, |_| it.next().unwrap()).unwrap();
        let text = write_table(&t).unwrap();
        let back = read_table::<f64>(&text).unwrap();
        prop_assert_eq!(back.entries(), t.entries());
        prop_assert_eq!(i3_from_table(&back).unwrap(), i3_from_table(&t).unwrap());
    }
}

#[test]
fn single_precision_smoke() {
    let q = ModelSpace::<f32>::quantum(3).unwrap();
    let ss = basis_slit_system(&q).unwrap();
    let r = prop1_verify(&ss, 50, 1);
    assert!(r.holds(), "{r:?}");
    let s = random_state(&q, 2);
    let t = tomography_roundtrip(&q, &ss, &s, TomographyMode::Exact).unwrap();
    assert!(t.reconstruction_error < 1e-4);
}
